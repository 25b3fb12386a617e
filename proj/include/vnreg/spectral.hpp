#pragma once

#include <optional>
#include <span>
#include <utility>
#include <vector>

#include <Eigen/Core>

#include "vnreg/graph.hpp"
#include "vnreg/linalg.hpp"

namespace vnreg {

/// Adjacency spectral embedding X = U |Lambda|^{1/2}.
///
/// Columns hold the retained eigenvectors with positive eigenvalues first,
/// then negative ones, each group by decreasing magnitude, so that
/// positions * I_{p,q} * positions^T is the rank-d spectral truncation of A.
struct Embedding {
  Eigen::MatrixXd positions;       // n x d
  int p = 0;
  int q = 0;
  Eigen::VectorXd eigenvalues;     // signed, aligned with the columns
  Eigen::VectorXd singular_values; // |eigenvalues|, descending

  int dimension() const { return p + q; }
  Eigen::VectorXd Signs() const;
  // positions * I_{p,q} * positions^T
  Eigen::MatrixXd Reconstruction() const;
};

/// Eigendecomposition of an adjacency matrix, computed once and reused for
/// several embedding dimensions.
class AdjacencySpectrum {
 public:
  explicit AdjacencySpectrum(const Graph& g);
  explicit AdjacencySpectrum(const Eigen::MatrixXd& symmetric);

  Eigen::Index size() const { return eig_.values.size(); }

  // |eigenvalues| in descending order.
  Eigen::VectorXd SingularValues() const;

  // Indices of the d leading eigenvalues by magnitude; ties keep the
  // positive eigenvalue first, then the lower index.
  std::vector<Eigen::Index> LeadingIndices(int d) const;

  Embedding Embed(int d) const;
  std::pair<int, int> Signature(int d) const;

 private:
  SymmetricEigen eig_;
  std::vector<Eigen::Index> order_;  // all indices, leading first
};

Embedding AdjacencySpectralEmbedding(const Graph& g, int d);

// Signs of the d leading eigenvalues of A as (p, q).
std::pair<int, int> EstimateSignature(const Graph& g, int d);

// Zhu-Ghodsi profile-likelihood elbow of a descending profile: the split
// point q in 1..len maximising the Gaussian log-likelihood with a shared
// variance. Returns a 1-based count.
int ProfileLikelihoodElbow(std::span<const double> descending);

// The first `count` elbows, each found on the tail past the previous one.
std::vector<int> ProfileLikelihoodElbows(std::span<const double> descending, int count);

// Embedding dimension at the `elbow_index`-th elbow of the singular values
// of A (optionally only the leading max_rank values).
int SelectDimension(const Graph& g, int elbow_index = 1, std::optional<int> max_rank = {});
int SelectDimension(const AdjacencySpectrum& spectrum, int elbow_index = 1,
                    std::optional<int> max_rank = {});

}  // namespace vnreg

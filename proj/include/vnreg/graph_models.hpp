#pragma once

#include <cstdint>
#include <optional>
#include <span>
#include <vector>

#include <Eigen/Core>

#include "vnreg/graph.hpp"

namespace vnreg {

// ---------------------------------------------------------------------------
// Stochastic blockmodel

/// Exactly one of `block_probabilities` (memberships drawn i.i.d.) or
/// `block_sizes` (vertices pre-assigned contiguously, block 0 first) is set.
struct SbmSpec {
  Vertex n = 0;
  Eigen::MatrixXd block_matrix;
  std::vector<double> block_probabilities;
  std::vector<Vertex> block_sizes;
  double sparsity = 1.0;

  int blocks() const { return static_cast<int>(block_matrix.rows()); }
  void Validate() const;

  static SbmSpec WithSizes(Eigen::MatrixXd b, std::vector<Vertex> sizes, double sparsity = 1.0);
  static SbmSpec WithProbabilities(Vertex n, Eigen::MatrixXd b, std::vector<double> pi,
                                   double sparsity = 1.0);
};

struct SbmSample {
  Graph graph;
  std::vector<int> membership;  // 0-based block per vertex
};

struct CorrelatedSbmSample {
  Graph first;
  Graph second;
  std::vector<int> membership;
};

SbmSample SampleSbm(const SbmSpec& spec, std::uint64_t seed);

// Edge pairs are coupled as e2 | e1=1 ~ Bern(p + rho(1-p)), e2 | e1=0 ~
// Bern(p(1-rho)), which keeps both marginals at p and the Pearson
// correlation at rho.
CorrelatedSbmSample SampleCorrelatedSbm(const SbmSpec& spec, double rho, std::uint64_t seed);

// ---------------------------------------------------------------------------
// Generalized random dot product graph

struct GrdpgSpec {
  Eigen::MatrixXd positions;  // n x d
  int p = 1;
  int q = 0;
  double sparsity = 1.0;

  Eigen::Index dimension() const { return positions.cols(); }
  // nu * X I_{p,q} X^T
  Eigen::MatrixXd EdgeProbabilities() const;
  // Throws kValidation / kFeasibility naming the first offending pair.
  void Validate() const;
};

Graph SampleGrdpg(const GrdpgSpec& spec, std::uint64_t seed);
std::pair<Graph, Graph> SampleCorrelatedGrdpg(const GrdpgSpec& spec, double rho,
                                              std::uint64_t seed);

// Samples an edge-independent graph from a symmetric probability matrix with
// entries in [0, 1] (diagonal ignored).
Graph SampleFromProbabilities(const Eigen::MatrixXd& probabilities, std::uint64_t seed);

/// Point-mass latent positions of an SBM: rows of a spectral factorization
/// of nu*B = Y I_{p,q} Y^T, positive eigenvalues first. Zero eigenvalues are
/// dropped, so d = rank(B).
struct BlockLatentPositions {
  Eigen::MatrixXd positions;  // K x d
  int p = 0;
  int q = 0;
};
BlockLatentPositions SbmLatentPositions(const Eigen::MatrixXd& block_matrix, double sparsity = 1.0);

// GRDPG spec whose row i is the latent position of membership[i].
GrdpgSpec SbmAsGrdpg(const Eigen::MatrixXd& block_matrix, std::span<const int> membership,
                     double sparsity = 1.0);

// ---------------------------------------------------------------------------
// Block contamination

/// Probabilistic mode draws W+ then W- vertex by vertex with probabilities
/// pi_plus / pi_minus. Fixed mode (both size vectors set) picks exactly
/// w_plus_sizes[k] and w_minus_sizes[k] vertices uniformly from stratum k.
struct BlockContaminationSpec {
  double pi_plus = 0.0;
  double pi_minus = 0.0;
  double s_plus = 0.0;
  double s_minus = 0.0;
  std::optional<std::vector<Vertex>> w_plus_sizes;
  std::optional<std::vector<Vertex>> w_minus_sizes;

  bool fixed_sizes() const { return w_plus_sizes.has_value(); }
  void Validate() const;
};

struct BlockContamination {
  Graph graph;
  std::vector<Vertex> w_plus;   // sorted
  std::vector<Vertex> w_minus;  // sorted
};

// `strata` (block labels, optional) drives the fixed-size mode; without it
// the whole vertex set is one stratum.
BlockContamination ContaminateBlock(const Graph& g, const BlockContaminationSpec& spec,
                                    std::uint64_t seed, std::span<const int> strata = {});

/// Block matrix of the 3K-block SBM produced by block contamination, with
/// blocks ordered (core_1, plus_1, minus_1, core_2, plus_2, minus_2, ...).
Eigen::MatrixXd BuildContaminatedBlockMatrix(const Eigen::MatrixXd& block_matrix, double s_plus,
                                             double s_minus);

// Contaminated-block index of a vertex: 3*block + {0 core, 1 plus, 2 minus}.
std::vector<int> ContaminatedLabels(std::span<const int> membership,
                                    std::span<const Vertex> w_plus,
                                    std::span<const Vertex> w_minus);

// ---------------------------------------------------------------------------
// Diffuse (white) noise

enum class NoiseRegion {
  kBox,                // axis-aligned [lower, upper] per coordinate
  kUnitSphereOrthant,  // {z : |z| = 1, z >= 0}
  kUnitBallOrthant,    // {z : |z| <= 1, z >= 0}
};

/// Noise positions are drawn uniformly from `region` in R^k (k =
/// transform rows, or d without a transform) and mapped through `transform`
/// (k x d) when set.
struct DiffuseNoiseSpec {
  Vertex m = 0;
  NoiseRegion region = NoiseRegion::kUnitSphereOrthant;
  Eigen::VectorXd box_lower;
  Eigen::VectorXd box_upper;
  std::optional<Eigen::MatrixXd> transform;
};

struct DiffuseContamination {
  GrdpgSpec spec;               // rows: signal first, then the m noise rows
  std::vector<bool> noise_mask;  // length n + m
};

DiffuseContamination ContaminateDiffuse(const GrdpgSpec& signal, const DiffuseNoiseSpec& noise,
                                        std::uint64_t seed);

// Noise rows alone (no feasibility check), drawn as in ContaminateDiffuse.
Eigen::MatrixXd SampleNoisePositions(const DiffuseNoiseSpec& noise, Eigen::Index dim, std::uint64_t seed);

// Scaled block positions c * Y such that any nonnegative unit-norm (or
// shorter) combination of them is feasible against Y and against each other;
// requires nu*B = Y I Y^T to be entrywise nonnegative.
Eigen::MatrixXd FeasibleNoiseTransform(const BlockLatentPositions& blocks);

// Adds noise vertices to an already-sampled signal graph. Signal-signal edges
// are copied from `signal_graph`; every pair touching a noise vertex is drawn
// from the GRDPG kernel of `combined`.
Graph AttachNoiseVertices(const Graph& signal_graph, const DiffuseContamination& combined,
                          std::uint64_t seed);

}  // namespace vnreg

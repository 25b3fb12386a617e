#include "vnreg/spectral.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numbers>
#include <numeric>
#include <string>

#include "vnreg/error.hpp"

namespace vnreg {

Eigen::VectorXd Embedding::Signs() const { return SignatureDiagonal(p, q); }

Eigen::MatrixXd Embedding::Reconstruction() const {
  return positions * Signs().asDiagonal() * positions.transpose();
}

AdjacencySpectrum::AdjacencySpectrum(const Graph& g) : AdjacencySpectrum(g.ToDense()) {}

AdjacencySpectrum::AdjacencySpectrum(const Eigen::MatrixXd& symmetric)
    : eig_(DecomposeSymmetric(symmetric)) {
  order_.resize(static_cast<std::size_t>(eig_.values.size()));
  std::iota(order_.begin(), order_.end(), Eigen::Index{0});
  const Eigen::VectorXd& w = eig_.values;
  std::stable_sort(order_.begin(), order_.end(), [&](Eigen::Index a, Eigen::Index b) {
    const double ma = std::abs(w(a));
    const double mb = std::abs(w(b));
    if (ma != mb) return ma > mb;
    if ((w(a) > 0) != (w(b) > 0)) return w(a) > 0;
    return a < b;
  });
}

Eigen::VectorXd AdjacencySpectrum::SingularValues() const {
  Eigen::VectorXd s(static_cast<Eigen::Index>(order_.size()));
  for (std::size_t i = 0; i < order_.size(); ++i)
    s(static_cast<Eigen::Index>(i)) = std::abs(eig_.values(order_[i]));
  return s;
}

std::vector<Eigen::Index> AdjacencySpectrum::LeadingIndices(int d) const {
  if (d < 1 || d > size())
    throw Error(ErrorKind::kRange, "embedding dimension " + std::to_string(d) +
                                       " outside [1, " + std::to_string(size()) + "]");
  return {order_.begin(), order_.begin() + d};
}

std::pair<int, int> AdjacencySpectrum::Signature(int d) const {
  int p = 0, q = 0;
  const double scale = std::max(1.0, eig_.values.cwiseAbs().maxCoeff());
  for (Eigen::Index idx : LeadingIndices(d)) {
    const double w = eig_.values(idx);
    if (std::abs(w) <= 1e-10 * scale)
      throw Error(ErrorKind::kDegenerate, "zero eigenvalue among the " + std::to_string(d) +
                                              " leading eigenvalues");
    (w > 0 ? p : q)++;
  }
  return {p, q};
}

Embedding AdjacencySpectrum::Embed(int d) const {
  std::vector<Eigen::Index> lead = LeadingIndices(d);
  const double scale = std::max(1.0, eig_.values.cwiseAbs().maxCoeff());
  if (std::abs(eig_.values(lead.back())) <= 1e-10 * scale)
    throw Error(ErrorKind::kRank,
                "adjacency matrix has fewer than " + std::to_string(d) + " nonzero eigenvalues");

  // Positive eigenvalues first; stable partition keeps magnitude order.
  std::stable_partition(lead.begin(), lead.end(),
                        [&](Eigen::Index i) { return eig_.values(i) > 0; });

  Embedding emb;
  const Eigen::Index n = size();
  emb.positions.resize(n, d);
  emb.eigenvalues.resize(d);
  for (int c = 0; c < d; ++c) {
    const Eigen::Index idx = lead[static_cast<std::size_t>(c)];
    const double w = eig_.values(idx);
    Eigen::VectorXd col = eig_.vectors.col(idx) * std::sqrt(std::abs(w));
    // Sign convention: entry of largest magnitude (first such) is positive.
    const double peak = col.cwiseAbs().maxCoeff();
    Eigen::Index pivot = 0;
    while (std::abs(col(pivot)) < peak - 1e-12 * peak) ++pivot;
    if (col(pivot) < 0) col = -col;
    emb.positions.col(c) = col;
    emb.eigenvalues(c) = w;
    (w > 0 ? emb.p : emb.q)++;
  }
  emb.singular_values = emb.eigenvalues.cwiseAbs();
  std::sort(emb.singular_values.data(), emb.singular_values.data() + d, std::greater<>());
  return emb;
}

Embedding AdjacencySpectralEmbedding(const Graph& g, int d) {
  return AdjacencySpectrum(g).Embed(d);
}

std::pair<int, int> EstimateSignature(const Graph& g, int d) {
  return AdjacencySpectrum(g).Signature(d);
}

// ---------------------------------------------------------------------------

int ProfileLikelihoodElbow(std::span<const double> x) {
  const auto len = static_cast<int>(x.size());
  if (len == 0) throw Error(ErrorKind::kRange, "empty profile");
  if (len == 1) return 1;

  double scale = 0.0;
  for (double v : x) scale = std::max(scale, std::abs(v));
  const double variance_floor = std::max(scale * scale, 1.0) * 1e-24;

  int best_q = 1;
  double best = -std::numeric_limits<double>::infinity();
  for (int q = 1; q <= len; ++q) {
    const auto head = x.first(static_cast<std::size_t>(q));
    const auto tail = x.subspan(static_cast<std::size_t>(q));
    const double mu1 = std::accumulate(head.begin(), head.end(), 0.0) / q;
    const double mu2 =
        tail.empty() ? 0.0 : std::accumulate(tail.begin(), tail.end(), 0.0) / tail.size();
    double ss = 0.0;
    for (double v : head) ss += (v - mu1) * (v - mu1);
    for (double v : tail) ss += (v - mu2) * (v - mu2);
    // Pooled variance with one degree of freedom per estimated mean.
    const int dof = len - 1 - (q < len ? 1 : 0);
    const double sigma2 = std::max(dof > 0 ? ss / dof : 0.0, variance_floor);
    double loglik = -0.5 * len * std::log(2.0 * std::numbers::pi * sigma2) - ss / (2.0 * sigma2);
    if (loglik > best) {
      best = loglik;
      best_q = q;
    }
  }
  return best_q;
}

std::vector<int> ProfileLikelihoodElbows(std::span<const double> x, int count) {
  std::vector<int> elbows;
  int offset = 0;
  for (int i = 0; i < count; ++i) {
    if (offset >= static_cast<int>(x.size()))
      throw Error(ErrorKind::kRange, "elbow " + std::to_string(i + 1) +
                                         " lies beyond the end of the profile");
    offset += ProfileLikelihoodElbow(x.subspan(static_cast<std::size_t>(offset)));
    elbows.push_back(offset);
  }
  return elbows;
}

int SelectDimension(const AdjacencySpectrum& spectrum, int elbow_index, std::optional<int> max_rank) {
  if (elbow_index < 1) throw Error(ErrorKind::kRange, "elbow index must be positive");
  const Eigen::VectorXd s = spectrum.SingularValues();
  Eigen::Index len = s.size();
  if (max_rank) len = std::min<Eigen::Index>(len, *max_rank);
  if (len < 1) throw Error(ErrorKind::kRange, "empty singular value profile");
  return ProfileLikelihoodElbows(std::span<const double>(s.data(), static_cast<std::size_t>(len)),
                                 elbow_index)
      .back();
}

int SelectDimension(const Graph& g, int elbow_index, std::optional<int> max_rank) {
  if (g.size() == 0) throw Error(ErrorKind::kRange, "empty graph");
  return SelectDimension(AdjacencySpectrum(g), elbow_index, max_rank);
}

}  // namespace vnreg

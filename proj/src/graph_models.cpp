#include "vnreg/graph_models.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <sstream>
#include <string>

#include "vnreg/error.hpp"
#include "vnreg/linalg.hpp"
#include "vnreg/rng.hpp"

namespace vnreg {
namespace {

constexpr double kProbabilityTolerance = 1e-12;

bool InUnitInterval(double x) {
  return x >= -kProbabilityTolerance && x <= 1.0 + kProbabilityTolerance;
}

double ClampUnit(double x) { return std::clamp(x, 0.0, 1.0); }

void ValidateRho(double rho) {
  if (!(rho >= 0.0 && rho <= 1.0))
    throw Error(ErrorKind::kValidation, "rho must lie in [0, 1]");
}

void RequireProbability(double x, const char* name) {
  if (!(x >= 0.0 && x <= 1.0))
    throw Error(ErrorKind::kValidation, std::string(name) + " must lie in [0, 1]");
}

std::vector<int> DrawMembership(const SbmSpec& spec, Rng& rng) {
  std::vector<int> membership;
  membership.reserve(static_cast<std::size_t>(spec.n));
  if (!spec.block_sizes.empty()) {
    for (int k = 0; k < spec.blocks(); ++k)
      membership.insert(membership.end(), static_cast<std::size_t>(spec.block_sizes[k]), k);
    return membership;
  }
  std::vector<double> cumulative(spec.block_probabilities.size());
  std::partial_sum(spec.block_probabilities.begin(), spec.block_probabilities.end(),
                   cumulative.begin());
  for (Vertex v = 0; v < spec.n; ++v) {
    const double u = Uniform01(rng) * cumulative.back();
    const auto it = std::upper_bound(cumulative.begin(), cumulative.end(), u);
    membership.push_back(static_cast<int>(
        std::min<std::ptrdiff_t>(it - cumulative.begin(), spec.blocks() - 1)));
  }
  return membership;
}

// Second indicator of a correlated pair given the first.
bool CoupledEdge(Rng& rng, double p, double rho, bool first) {
  const double conditional = first ? p + rho * (1.0 - p) : p * (1.0 - rho);
  return Bernoulli(rng, conditional);
}

}  // namespace

// ---------------------------------------------------------------------------

SbmSpec SbmSpec::WithSizes(Eigen::MatrixXd b, std::vector<Vertex> sizes, double sparsity) {
  SbmSpec spec;
  spec.n = std::accumulate(sizes.begin(), sizes.end(), Vertex{0});
  spec.block_matrix = std::move(b);
  spec.block_sizes = std::move(sizes);
  spec.sparsity = sparsity;
  spec.Validate();
  return spec;
}

SbmSpec SbmSpec::WithProbabilities(Vertex n, Eigen::MatrixXd b, std::vector<double> pi,
                                   double sparsity) {
  SbmSpec spec;
  spec.n = n;
  spec.block_matrix = std::move(b);
  spec.block_probabilities = std::move(pi);
  spec.sparsity = sparsity;
  spec.Validate();
  return spec;
}

void SbmSpec::Validate() const {
  const auto k = block_matrix.rows();
  if (k < 1 || block_matrix.cols() != k)
    throw Error(ErrorKind::kValidation, "block matrix must be square and non-empty");
  if (n < 0) throw Error(ErrorKind::kValidation, "vertex count must be non-negative");
  RequireProbability(sparsity, "sparsity");
  for (Eigen::Index i = 0; i < k; ++i) {
    for (Eigen::Index j = 0; j < k; ++j) {
      if (block_matrix(i, j) != block_matrix(j, i))
        throw Error(ErrorKind::kValidation, "block matrix must be symmetric");
      RequireProbability(block_matrix(i, j), "block matrix entry");
    }
  }
  const bool has_pi = !block_probabilities.empty();
  const bool has_sizes = !block_sizes.empty();
  if (has_pi == has_sizes)
    throw Error(ErrorKind::kValidation,
                "exactly one of block probabilities / block sizes must be given");
  if (has_pi) {
    if (static_cast<Eigen::Index>(block_probabilities.size()) != k)
      throw Error(ErrorKind::kValidation, "block probability vector has wrong length");
    double total = 0.0;
    for (double p : block_probabilities) {
      if (!(p > 0.0)) throw Error(ErrorKind::kValidation, "block probabilities must be positive");
      total += p;
    }
    if (std::abs(total - 1.0) > 1e-9)
      throw Error(ErrorKind::kValidation, "block probabilities must sum to 1");
  } else {
    if (static_cast<Eigen::Index>(block_sizes.size()) != k)
      throw Error(ErrorKind::kValidation, "block size vector has wrong length");
    Vertex total = 0;
    for (Vertex s : block_sizes) {
      if (s < 0) throw Error(ErrorKind::kValidation, "block sizes must be non-negative");
      total += s;
    }
    if (total != n) throw Error(ErrorKind::kValidation, "block sizes must sum to n");
  }
}

SbmSample SampleSbm(const SbmSpec& spec, std::uint64_t seed) {
  spec.Validate();
  Rng rng(seed);
  SbmSample out{Graph(spec.n), DrawMembership(spec, rng)};
  const Eigen::MatrixXd prob = spec.sparsity * spec.block_matrix;
  for (Vertex u = 0; u < spec.n; ++u) {
    const int bu = out.membership[static_cast<std::size_t>(u)];
    for (Vertex v = u + 1; v < spec.n; ++v) {
      if (Bernoulli(rng, prob(bu, out.membership[static_cast<std::size_t>(v)])))
        out.graph.SetEdge(u, v, true);
    }
  }
  return out;
}

CorrelatedSbmSample SampleCorrelatedSbm(const SbmSpec& spec, double rho, std::uint64_t seed) {
  spec.Validate();
  ValidateRho(rho);
  Rng rng(seed);
  CorrelatedSbmSample out{Graph(spec.n), Graph(spec.n), DrawMembership(spec, rng)};
  const Eigen::MatrixXd prob = spec.sparsity * spec.block_matrix;
  for (Vertex u = 0; u < spec.n; ++u) {
    const int bu = out.membership[static_cast<std::size_t>(u)];
    for (Vertex v = u + 1; v < spec.n; ++v) {
      const double p = prob(bu, out.membership[static_cast<std::size_t>(v)]);
      const bool e1 = Bernoulli(rng, p);
      const bool e2 = CoupledEdge(rng, p, rho, e1);
      if (e1) out.first.SetEdge(u, v, true);
      if (e2) out.second.SetEdge(u, v, true);
    }
  }
  return out;
}

// ---------------------------------------------------------------------------

Eigen::MatrixXd GrdpgSpec::EdgeProbabilities() const {
  const Eigen::VectorXd signs = SignatureDiagonal(p, q);
  return sparsity * positions * signs.asDiagonal() * positions.transpose();
}

void GrdpgSpec::Validate() const {
  if (p < 1 || q < 0 || p + q != positions.cols())
    throw Error(ErrorKind::kValidation, "signature (p, q) must satisfy p >= 1, q >= 0, p + q = d");
  RequireProbability(sparsity, "sparsity");
  const Eigen::MatrixXd prob = EdgeProbabilities();
  for (Eigen::Index j = 0; j < prob.cols(); ++j) {
    for (Eigen::Index i = 0; i < prob.rows(); ++i) {
      if (i == j) continue;
      if (!InUnitInterval(prob(i, j))) {
        std::ostringstream msg;
        msg << "edge probability " << prob(i, j) << " for pair (" << i << ", " << j
            << ") lies outside [0, 1]";
        throw Error(ErrorKind::kFeasibility, msg.str());
      }
    }
  }
}

Graph SampleFromProbabilities(const Eigen::MatrixXd& probabilities, std::uint64_t seed) {
  const Vertex n = probabilities.rows();
  Rng rng(seed);
  Graph g(n);
  for (Vertex u = 0; u < n; ++u)
    for (Vertex v = u + 1; v < n; ++v)
      if (Bernoulli(rng, ClampUnit(probabilities(u, v)))) g.SetEdge(u, v, true);
  return g;
}

Graph SampleGrdpg(const GrdpgSpec& spec, std::uint64_t seed) {
  spec.Validate();
  return SampleFromProbabilities(spec.EdgeProbabilities(), seed);
}

std::pair<Graph, Graph> SampleCorrelatedGrdpg(const GrdpgSpec& spec, double rho,
                                              std::uint64_t seed) {
  spec.Validate();
  ValidateRho(rho);
  const Eigen::MatrixXd prob = spec.EdgeProbabilities();
  const Vertex n = prob.rows();
  Rng rng(seed);
  Graph g1(n), g2(n);
  for (Vertex u = 0; u < n; ++u) {
    for (Vertex v = u + 1; v < n; ++v) {
      const double p = ClampUnit(prob(u, v));
      const bool e1 = Bernoulli(rng, p);
      const bool e2 = CoupledEdge(rng, p, rho, e1);
      if (e1) g1.SetEdge(u, v, true);
      if (e2) g2.SetEdge(u, v, true);
    }
  }
  return {std::move(g1), std::move(g2)};
}

BlockLatentPositions SbmLatentPositions(const Eigen::MatrixXd& block_matrix, double sparsity) {
  const SymmetricEigen eig = DecomposeSymmetric(sparsity * block_matrix);
  const double scale = std::max(1.0, eig.values.cwiseAbs().maxCoeff());
  const double cutoff = 1e-12 * scale;
  std::vector<Eigen::Index> positive, negative;
  // Descending magnitude within each sign group.
  for (Eigen::Index i = eig.values.size() - 1; i >= 0; --i)
    if (eig.values(i) > cutoff) positive.push_back(i);
  for (Eigen::Index i = 0; i < eig.values.size(); ++i)
    if (eig.values(i) < -cutoff) negative.push_back(i);
  BlockLatentPositions out;
  out.p = static_cast<int>(positive.size());
  out.q = static_cast<int>(negative.size());
  out.positions.resize(block_matrix.rows(), out.p + out.q);
  int col = 0;
  for (auto idx : positive) out.positions.col(col++) = eig.vectors.col(idx) * std::sqrt(eig.values(idx));
  for (auto idx : negative) out.positions.col(col++) = eig.vectors.col(idx) * std::sqrt(-eig.values(idx));
  return out;
}

GrdpgSpec SbmAsGrdpg(const Eigen::MatrixXd& block_matrix, std::span<const int> membership,
                     double sparsity) {
  const BlockLatentPositions blocks = SbmLatentPositions(block_matrix, 1.0);
  if (blocks.p < 1) throw Error(ErrorKind::kValidation, "block matrix has no positive eigenvalue");
  GrdpgSpec spec;
  spec.p = blocks.p;
  spec.q = blocks.q;
  spec.sparsity = sparsity;
  spec.positions.resize(static_cast<Eigen::Index>(membership.size()), blocks.positions.cols());
  for (std::size_t i = 0; i < membership.size(); ++i)
    spec.positions.row(static_cast<Eigen::Index>(i)) = blocks.positions.row(membership[i]);
  return spec;
}

// ---------------------------------------------------------------------------

void BlockContaminationSpec::Validate() const {
  RequireProbability(pi_plus, "pi_plus");
  RequireProbability(pi_minus, "pi_minus");
  RequireProbability(s_plus, "s_plus");
  RequireProbability(s_minus, "s_minus");
  if (w_plus_sizes.has_value() != w_minus_sizes.has_value())
    throw Error(ErrorKind::kValidation, "fixed W+/W- sizes must be given together");
  if (w_plus_sizes && w_plus_sizes->size() != w_minus_sizes->size())
    throw Error(ErrorKind::kValidation, "W+/W- size vectors differ in length");
}

namespace {

// Partial Fisher-Yates: first `count` entries become a uniform sample.
void SampleWithoutReplacement(std::vector<Vertex>& pool, std::size_t count, Rng& rng) {
  for (std::size_t i = 0; i < count; ++i) {
    const auto j = i + UniformIndex(rng, pool.size() - i);
    std::swap(pool[i], pool[j]);
  }
}

}  // namespace

BlockContamination ContaminateBlock(const Graph& g, const BlockContaminationSpec& spec,
                                    std::uint64_t seed, std::span<const int> strata) {
  spec.Validate();
  const Vertex n = g.size();
  if (!strata.empty() && static_cast<Vertex>(strata.size()) != n)
    throw Error(ErrorKind::kValidation, "strata length does not match the graph");
  Rng rng(seed);
  // 0 = untouched, 1 = W+, 2 = W-
  std::vector<std::uint8_t> role(static_cast<std::size_t>(n), 0);

  if (spec.fixed_sizes()) {
    const auto& plus = *spec.w_plus_sizes;
    const auto& minus = *spec.w_minus_sizes;
    const int groups = static_cast<int>(plus.size());
    std::vector<std::vector<Vertex>> members(static_cast<std::size_t>(groups));
    for (Vertex v = 0; v < n; ++v) {
      const int s = strata.empty() ? 0 : strata[static_cast<std::size_t>(v)];
      if (s < 0 || s >= groups)
        throw Error(ErrorKind::kValidation, "stratum label without a W+/W- size entry");
      members[static_cast<std::size_t>(s)].push_back(v);
    }
    for (int s = 0; s < groups; ++s) {
      auto& pool = members[static_cast<std::size_t>(s)];
      const auto np = static_cast<std::size_t>(plus[static_cast<std::size_t>(s)]);
      const auto nm = static_cast<std::size_t>(minus[static_cast<std::size_t>(s)]);
      if (plus[static_cast<std::size_t>(s)] < 0 || minus[static_cast<std::size_t>(s)] < 0 ||
          np + nm > pool.size())
        throw Error(ErrorKind::kValidation, "W+/W- sizes exceed stratum " + std::to_string(s));
      SampleWithoutReplacement(pool, np + nm, rng);
      for (std::size_t i = 0; i < np; ++i) role[static_cast<std::size_t>(pool[i])] = 1;
      for (std::size_t i = np; i < np + nm; ++i) role[static_cast<std::size_t>(pool[i])] = 2;
    }
  } else {
    for (Vertex v = 0; v < n; ++v)
      if (Bernoulli(rng, spec.pi_plus)) role[static_cast<std::size_t>(v)] = 1;
    for (Vertex v = 0; v < n; ++v)
      if (role[static_cast<std::size_t>(v)] == 0 && Bernoulli(rng, spec.pi_minus))
        role[static_cast<std::size_t>(v)] = 2;
  }

  BlockContamination out{g, {}, {}};
  for (Vertex v = 0; v < n; ++v) {
    if (role[static_cast<std::size_t>(v)] == 1) out.w_plus.push_back(v);
    if (role[static_cast<std::size_t>(v)] == 2) out.w_minus.push_back(v);
  }
  // Addition pairs (one end in W+, the other outside W-) and deletion pairs
  // (one end in W-, the other outside W+) are disjoint.
  for (Vertex u = 0; u < n; ++u) {
    const auto ru = role[static_cast<std::size_t>(u)];
    for (Vertex v = u + 1; v < n; ++v) {
      const auto rv = role[static_cast<std::size_t>(v)];
      const bool add = (ru == 1 && rv != 2) || (rv == 1 && ru != 2);
      const bool remove = (ru == 2 && rv != 1) || (rv == 2 && ru != 1);
      if (add) {
        if (!out.graph.HasEdge(u, v) && Bernoulli(rng, spec.s_plus)) out.graph.SetEdge(u, v, true);
      } else if (remove) {
        if (out.graph.HasEdge(u, v) && Bernoulli(rng, spec.s_minus)) out.graph.SetEdge(u, v, false);
      }
    }
  }
  return out;
}

Eigen::MatrixXd BuildContaminatedBlockMatrix(const Eigen::MatrixXd& block_matrix, double s_plus,
                                             double s_minus) {
  const Eigen::Index k = block_matrix.rows();
  Eigen::MatrixXd out(3 * k, 3 * k);
  // role: 0 core, 1 plus, 2 minus
  for (Eigen::Index i = 0; i < 3 * k; ++i) {
    for (Eigen::Index j = 0; j < 3 * k; ++j) {
      const double base = block_matrix(i / 3, j / 3);
      const int ri = static_cast<int>(i % 3);
      const int rj = static_cast<int>(j % 3);
      const bool add = (ri == 1 && rj != 2) || (rj == 1 && ri != 2);
      const bool remove = (ri == 2 && rj != 1) || (rj == 2 && ri != 1);
      if (add) {
        out(i, j) = base + s_plus * (1.0 - base);
      } else if (remove) {
        out(i, j) = base * (1.0 - s_minus);
      } else {
        out(i, j) = base;
      }
    }
  }
  return out;
}

std::vector<int> ContaminatedLabels(std::span<const int> membership,
                                    std::span<const Vertex> w_plus,
                                    std::span<const Vertex> w_minus) {
  std::vector<int> labels(membership.size());
  for (std::size_t v = 0; v < membership.size(); ++v) labels[v] = 3 * membership[v];
  for (Vertex v : w_plus) labels[static_cast<std::size_t>(v)] += 1;
  for (Vertex v : w_minus) labels[static_cast<std::size_t>(v)] += 2;
  return labels;
}

// ---------------------------------------------------------------------------

namespace {

Eigen::RowVectorXd DrawNoisePoint(const DiffuseNoiseSpec& noise, Eigen::Index dim, Rng& rng) {
  Eigen::RowVectorXd z(dim);
  switch (noise.region) {
    case NoiseRegion::kBox:
      for (Eigen::Index c = 0; c < dim; ++c)
        z(c) = noise.box_lower(c) + (noise.box_upper(c) - noise.box_lower(c)) * Uniform01(rng);
      break;
    case NoiseRegion::kUnitSphereOrthant:
    case NoiseRegion::kUnitBallOrthant: {
      // |N(0, I)| normalised is uniform on the positive orthant of the sphere.
      double norm = 0.0;
      do {
        for (Eigen::Index c = 0; c < dim; ++c) z(c) = std::abs(StandardNormal(rng));
        norm = z.norm();
      } while (norm == 0.0);
      z /= norm;
      if (noise.region == NoiseRegion::kUnitBallOrthant)
        z *= std::pow(Uniform01(rng), 1.0 / static_cast<double>(dim));
      break;
    }
  }
  return z;
}

}  // namespace

DiffuseContamination ContaminateDiffuse(const GrdpgSpec& signal, const DiffuseNoiseSpec& noise,
                                        std::uint64_t seed) {
  signal.Validate();
  if (noise.m < 0) throw Error(ErrorKind::kValidation, "noise count must be non-negative");
  const Eigen::Index d = signal.dimension();
  const Eigen::Index sample_dim = noise.transform ? noise.transform->rows() : d;
  if (noise.transform && noise.transform->cols() != d)
    throw Error(ErrorKind::kDimension, "noise transform must have d columns");
  if (noise.region == NoiseRegion::kBox &&
      (noise.box_lower.size() != sample_dim || noise.box_upper.size() != sample_dim))
    throw Error(ErrorKind::kDimension, "box bounds must match the sampling dimension");

  Rng rng(seed);
  const Eigen::Index n = signal.positions.rows();
  DiffuseContamination out;
  out.spec = signal;
  out.spec.positions.conservativeResize(n + noise.m, d);
  for (Eigen::Index i = 0; i < noise.m; ++i) {
    Eigen::RowVectorXd z = DrawNoisePoint(noise, sample_dim, rng);
    out.spec.positions.row(n + i) = noise.transform ? Eigen::RowVectorXd(z * *noise.transform) : z;
  }
  out.noise_mask.assign(static_cast<std::size_t>(n + noise.m), false);
  std::fill(out.noise_mask.begin() + n, out.noise_mask.end(), true);
  out.spec.Validate();
  return out;
}

Eigen::MatrixXd SampleNoisePositions(const DiffuseNoiseSpec& noise, Eigen::Index dim, std::uint64_t seed) {
  if (noise.m < 0) throw Error(ErrorKind::kValidation, "noise count must be non-negative");
  const Eigen::Index sample_dim = noise.transform ? noise.transform->rows() : dim;
  if (noise.transform && noise.transform->cols() != dim)
    throw Error(ErrorKind::kDimension, "noise transform must have d columns");
  if (noise.region == NoiseRegion::kBox &&
      (noise.box_lower.size() != sample_dim || noise.box_upper.size() != sample_dim))
    throw Error(ErrorKind::kDimension, "box bounds must match the sampling dimension");
  Rng rng(seed);
  Eigen::MatrixXd out(noise.m, dim);
  for (Eigen::Index i = 0; i < noise.m; ++i) {
    const Eigen::RowVectorXd z = DrawNoisePoint(noise, sample_dim, rng);
    out.row(i) = noise.transform ? Eigen::RowVectorXd(z * *noise.transform) : z;
  }
  return out;
}

Eigen::MatrixXd FeasibleNoiseTransform(const BlockLatentPositions& blocks) {
  const Eigen::VectorXd signs = SignatureDiagonal(blocks.p, blocks.q);
  const Eigen::MatrixXd gram = blocks.positions * signs.asDiagonal() * blocks.positions.transpose();
  if ((gram.array() < -kProbabilityTolerance).any())
    throw Error(ErrorKind::kFeasibility, "block probabilities must be nonnegative");
  // For s >= 0 with |s| <= 1: (s G)_j <= |G_j|_2 and s G s' <= |G|_2.
  const double column = gram.colwise().norm().maxCoeff();
  const double spectral = DecomposeSymmetric(gram).values.cwiseAbs().maxCoeff();
  const double c = std::min(1.0 / column, 1.0 / std::sqrt(spectral));
  return c * blocks.positions;
}

Graph AttachNoiseVertices(const Graph& signal_graph, const DiffuseContamination& combined,
                          std::uint64_t seed) {
  const Vertex total = static_cast<Vertex>(combined.noise_mask.size());
  const Vertex n = signal_graph.size();
  for (Vertex v = 0; v < total; ++v)
    if (combined.noise_mask[static_cast<std::size_t>(v)] != (v >= n))
      throw Error(ErrorKind::kValidation, "noise rows must follow the signal rows");
  const Eigen::MatrixXd prob = combined.spec.EdgeProbabilities();
  Rng rng(seed);
  Graph g(total);
  for (Vertex u = 0; u < total; ++u) {
    for (Vertex v = u + 1; v < total; ++v) {
      const bool edge = v < n ? signal_graph.HasEdge(u, v) : Bernoulli(rng, ClampUnit(prob(u, v)));
      if (edge) g.SetEdge(u, v, true);
    }
  }
  return g;
}

}  // namespace vnreg

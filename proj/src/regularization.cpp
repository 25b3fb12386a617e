#include "vnreg/regularization.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <string>

#include <Eigen/SVD>
#include <spdlog/spdlog.h>

#include "vnreg/error.hpp"
#include "vnreg/rng.hpp"

namespace vnreg {

using Eigen::Index;
using Eigen::MatrixXd;

// ---------------------------------------------------------------------------
// Matching

namespace {

struct MatchSearch {
  const MatrixXd& a;
  const MatrixXd& b;
  int k1;
  int k2;
  std::vector<int> current;
  std::vector<bool> used;
  std::vector<int> best;
  double best_value = std::numeric_limits<double>::infinity();

  // Squared error contributed by placing clean block t at contaminated block c,
  // against the already placed blocks 0..t-1.
  double Increment(int t, int c) const {
    double d = a(t, t) - b(c, c);
    double sum = d * d;
    for (int s = 0; s < t; ++s) {
      d = a(t, s) - b(c, current[s]);
      sum += 2.0 * d * d;
    }
    return sum;
  }

  void Search(int t, double partial) {
    if (t == k1) {
      if (partial < best_value) {
        best_value = partial;
        best = current;
      }
      return;
    }
    for (int c = 0; c < k2; ++c) {
      if (used[c]) continue;
      const double next = partial + Increment(t, c);
      if (next >= best_value) continue;  // cannot beat (or lexicographically precede) the incumbent
      used[c] = true;
      current[t] = c;
      Search(t + 1, next);
      used[c] = false;
    }
  }
};

}  // namespace

MatchResult MatchBlockMatrices(const MatrixXd& clean, const MatrixXd& contaminated, int cap) {
  const int k1 = static_cast<int>(clean.rows());
  const int k2 = static_cast<int>(contaminated.rows());
  if (clean.cols() != k1 || contaminated.cols() != k2 || k1 < 1)
    throw Error(ErrorKind::kDimension, "match: block matrices must be square and nonempty");
  if (k1 > k2)
    throw Error(ErrorKind::kDimension, "match: clean graph has more blocks (" + std::to_string(k1) +
                                           ") than the contaminated graph (" + std::to_string(k2) + ")");
  if (k2 > cap)
    throw Error(ErrorKind::kSize, "match: " + std::to_string(k2) +
                                      " contaminated blocks exceed the exhaustive-search cap of " +
                                      std::to_string(cap) + "; fix K2 or raise match_cap");

  MatchSearch search{clean, contaminated, k1, k2, std::vector<int>(k1, -1),
                     std::vector<bool>(k2, false), {}, std::numeric_limits<double>::infinity()};
  search.Search(0, 0.0);

  MatchResult result;
  result.mapping = search.best;
  result.objective = std::sqrt(search.best_value);
  result.retained_blocks = search.best;
  std::sort(result.retained_blocks.begin(), result.retained_blocks.end());
  return result;
}

// ---------------------------------------------------------------------------
// Procrustes

ProcrustesResult ProcrustesAlign(const MatrixXd& source_centers, const MatrixXd& target_centers,
                                 const MatrixXd& source_points) {
  if (source_centers.rows() != target_centers.rows() || source_centers.cols() != target_centers.cols())
    throw Error(ErrorKind::kDimension, "procrustes: center matrices differ in shape");
  if (source_points.cols() != source_centers.cols())
    throw Error(ErrorKind::kDimension, "procrustes: points and centers differ in dimension");

  const MatrixXd cross = source_centers.transpose() * target_centers;
  Eigen::JacobiSVD<MatrixXd> svd(cross, Eigen::ComputeFullU | Eigen::ComputeFullV);
  ProcrustesResult r;
  r.rotation = svd.matrixU() * svd.matrixV().transpose();
  const auto& sv = svd.singularValues();
  r.rank_deficient = sv.size() == 0 || !(sv(sv.size() - 1) > 1e-10 * std::max(sv(0), 1e-300));
  if (r.rank_deficient)
    spdlog::warn("procrustes: cross product is rank deficient; the rotation is not unique");
  r.aligned = source_points * r.rotation;
  return r;
}

// ---------------------------------------------------------------------------
// Block trimming

namespace {

int ChooseDimension(const AdjacencySpectrum& spectrum, std::optional<int> fixed, int elbow) {
  return fixed ? *fixed : SelectDimension(spectrum, elbow);
}

ClusterModel ClusterEmbedding(const MatrixXd& x, std::optional<int> k, const TrimConfig& config,
                              std::uint64_t seed) {
  if (k) {
    if (x.rows() <= static_cast<Index>(*k) * (x.cols() + 1))
      throw Error(ErrorKind::kValidation, "cluster: too few vertices for K=" + std::to_string(*k));
    return FitGmm(x, *k, seed, config.gmm);
  }
  return GmmBic(x, config.k_range, seed, config.gmm);
}

template <typename F>
auto Stage(const char* name, F&& f) {
  try {
    return f();
  } catch (const Error& e) {
    RethrowWithStage(e, name);
  }
}

}  // namespace

TrimOutcome BlockTrim(const Graph& g1, const Graph& g2, const TrimConfig& config, std::uint64_t seed) {
  if (g1.size() == 0 || g2.size() == 0) throw Error(ErrorKind::kValidation, "block trim: empty graph");
  TrimOutcome out;

  const AdjacencySpectrum spec1(g1), spec2(g2);
  out.d1 = Stage("embed G1", [&] { return ChooseDimension(spec1, config.d1, config.elbow); });
  out.d2 = Stage("embed G2", [&] { return ChooseDimension(spec2, config.d2, config.elbow); });
  const Embedding x1 = Stage("embed G1", [&] { return spec1.Embed(out.d1); });
  const Embedding x2 = Stage("embed G2", [&] { return spec2.Embed(out.d2); });
  out.p1 = x1.p;
  out.q1 = x1.q;
  out.p2 = x2.p;
  out.q2 = x2.q;

  out.model_1 = Stage("cluster G1", [&] {
    return ClusterEmbedding(x1.positions, config.k1, config, DeriveSeed(seed, {stream::kCluster, 1}));
  });
  out.model_2 = Stage("cluster G2", [&] {
    return ClusterEmbedding(x2.positions, config.k2, config, DeriveSeed(seed, {stream::kCluster, 2}));
  });

  const BlockMatrixEstimate b1 = EstimateBlockMatrix(out.model_1.centers, x1.p, x1.q);
  const BlockMatrixEstimate b2 = EstimateBlockMatrix(out.model_2.centers, x2.p, x2.q);
  out.block_matrix_1 = b1.matrix;
  out.block_matrix_2 = b2.matrix;
  out.clamped = b1.clamped || b2.clamped;

  if (out.model_2.k < out.model_1.k)
    throw Error(ErrorKind::kTrim, "block trim: G2 has fewer estimated blocks (" +
                                      std::to_string(out.model_2.k) + ") than G1 (" +
                                      std::to_string(out.model_1.k) + ")");
  out.match = Stage("match", [&] {
    return MatchBlockMatrices(b1.matrix, b2.matrix, config.match_cap);
  });

  // Retained vertices, plus which matched G1 cluster each one belongs to.
  std::vector<int> owner(out.model_2.k, -1);
  for (int i = 0; i < out.model_1.k; ++i) owner[out.match.mapping[i]] = i;
  std::vector<int> matched_cluster;
  for (Vertex v = 0; v < g2.size(); ++v) {
    const int block = out.model_2.assignments[v] - 1;
    if (block >= 0 && owner[block] >= 0) {
      out.vertex_map.push_back(v);
      matched_cluster.push_back(owner[block]);
    }
  }
  if (out.vertex_map.empty()) throw Error(ErrorKind::kTrim, "block trim: no vertices retained");
  out.match.retained_vertices = out.vertex_map;
  out.trimmed_graph = g2.Induced(out.vertex_map);

  const Embedding xt = Stage("re-embed trimmed G2", [&] {
    return AdjacencySpectralEmbedding(out.trimmed_graph, out.d1);
  });
  out.embedding_2 = xt.positions;

  // G1's centers live in d1 dimensions; the targets are the matched
  // clusters' means in the re-embedded trimmed graph.
  const int k1 = out.model_1.k;
  MatrixXd targets = MatrixXd::Zero(k1, out.d1);
  std::vector<Index> counts(k1, 0);
  for (std::size_t i = 0; i < matched_cluster.size(); ++i) {
    targets.row(matched_cluster[i]) += xt.positions.row(static_cast<Index>(i));
    ++counts[matched_cluster[i]];
  }
  for (int i = 0; i < k1; ++i) {
    if (counts[i] == 0)
      throw Error(ErrorKind::kTrim, "block trim: matched block " + std::to_string(out.match.mapping[i]) +
                                        " has no vertices");
    targets.row(i) /= static_cast<double>(counts[i]);
  }
  const ProcrustesResult aligned = ProcrustesAlign(out.model_1.centers, targets, x1.positions);
  out.embedding_1 = x1.positions;
  out.aligned_embedding_1 = aligned.aligned;
  out.rotation = aligned.rotation;
  out.rank_deficient = aligned.rank_deficient;
  return out;
}

CleanOutcome RobustClean(const Graph& g, const CleanConfig& config, std::uint64_t seed) {
  return RobustClean(g, AdjacencySpectrum(g), config, seed);
}

CleanOutcome RobustClean(const Graph& g, const AdjacencySpectrum& spectrum, const CleanConfig& config,
                         std::uint64_t seed) {
  if (spectrum.size() != g.size()) throw Error(ErrorKind::kDimension, "clean: spectrum does not match graph");
  CleanOutcome out;
  out.d = Stage("embed noisy graph", [&] { return ChooseDimension(spectrum, config.d, config.elbow); });
  out.embedding = Stage("embed noisy graph", [&] { return spectrum.Embed(out.d).positions; });
  out.model = Stage("robust kmeans", [&] {
    const MatrixXd input = config.sphere_project ? SphereProject(out.embedding) : out.embedding;
    return RobustKMeans(input, config.robust, DeriveSeed(seed, {stream::kRobust}));
  });
  for (Vertex v = 0; v < g.size(); ++v)
    if (out.model.assignments[v] != 0) out.kept.push_back(v);
  out.cleaned = g.Induced(out.kept);
  return out;
}

TrimOutcome TwoStageClean(const Graph& g1, const Graph& g2, const CleanConfig& clean,
                          const TrimConfig& trim, std::uint64_t seed) {
  return TwoStageClean(g1, g2, AdjacencySpectrum(g2), clean, trim, seed);
}

TrimOutcome TwoStageClean(const Graph& g1, const Graph& g2, const AdjacencySpectrum& spectrum_2,
                          const CleanConfig& clean, const TrimConfig& trim, std::uint64_t seed) {
  const CleanOutcome stage1 = RobustClean(g2, spectrum_2, clean, DeriveSeed(seed, {1}));
  TrimOutcome out = BlockTrim(g1, stage1.cleaned, trim, DeriveSeed(seed, {2}));
  for (Vertex& v : out.vertex_map) v = stage1.kept[v];
  out.match.retained_vertices = out.vertex_map;
  out.stage1_kept = stage1.kept;
  return out;
}

// ---------------------------------------------------------------------------
// Degree-trimming baseline

double Modularity(const Graph& g, const std::vector<int>& communities) {
  if (static_cast<Vertex>(communities.size()) != g.size())
    throw Error(ErrorKind::kDimension, "modularity: one community label per vertex required");
  const double m = static_cast<double>(g.EdgeCount());
  if (m == 0.0) return 0.0;
  const int c_max = communities.empty() ? 0 : *std::max_element(communities.begin(), communities.end());
  std::vector<double> inside(c_max + 1, 0.0), degree(c_max + 1, 0.0);
  for (const auto& [u, v] : g.Edges()) {
    if (communities[u] == communities[v]) inside[communities[u]] += 1.0;
    degree[communities[u]] += 1.0;
    degree[communities[v]] += 1.0;
  }
  double q = 0.0;
  for (int c = 0; c <= c_max; ++c) {
    const double share = degree[c] / (2.0 * m);
    q += inside[c] / m - share * share;
  }
  return q;
}

std::vector<Vertex> DegreeTrimmedVertices(const Graph& g, double top_percent, double bottom_percent) {
  const Vertex n = g.size();
  const std::vector<Vertex> deg = g.Degrees();
  std::vector<Vertex> order(n);
  std::iota(order.begin(), order.end(), 0);
  std::stable_sort(order.begin(), order.end(), [&](Vertex a, Vertex b) { return deg[a] > deg[b]; });
  const auto top = static_cast<Vertex>(std::llround(top_percent / 100.0 * static_cast<double>(n)));
  const auto bottom = static_cast<Vertex>(std::llround(bottom_percent / 100.0 * static_cast<double>(n)));
  std::vector<Vertex> kept;
  for (Vertex i = top; i < n - bottom; ++i) kept.push_back(order[i]);
  std::sort(kept.begin(), kept.end());
  return kept;
}

BaselineOutcome DegreeTrimBaseline(const Graph& g, const BaselineConfig& config, std::uint64_t seed) {
  if (g.size() == 0) throw Error(ErrorKind::kValidation, "degree trim: empty graph");
  if (!(config.grid_step > 0)) throw Error(ErrorKind::kValidation, "degree trim: grid step must be > 0");

  BaselineOutcome best;
  if (config.k) {
    best.k = *config.k;
  } else {
    const MatrixXd x = AdjacencySpectralEmbedding(g, config.d).positions;
    best.k = GmmBic(x, config.k_range, DeriveSeed(seed, {stream::kBaseline, 0})).k;
  }

  bool have = false;
  const int steps = static_cast<int>(std::floor(config.grid_max / config.grid_step + 1e-9));
  for (int hi = 0; hi <= steps; ++hi) {
    for (int li = 0; li <= steps; ++li) {
      const double h = hi * config.grid_step, l = li * config.grid_step;
      std::vector<Vertex> kept = DegreeTrimmedVertices(g, h, l);
      if (static_cast<int>(kept.size()) < best.k)
        throw Error(ErrorKind::kSize, "degree trim: trimming leaves fewer than K vertices");
      Graph trimmed = g.Induced(kept);
      std::vector<int> labels;
      try {
        const MatrixXd x = AdjacencySpectralEmbedding(trimmed, config.d).positions;
        labels = KMeans(x, best.k, DeriveSeed(seed, {stream::kBaseline, 1})).assignments;
      } catch (const Error& e) {
        if (e.kind() != ErrorKind::kRank) throw;
        continue;  // spectrum too degenerate at this trim level
      }
      const double q = Modularity(trimmed, labels);
      if (!have || q > best.modularity) {
        have = true;
        best.modularity = q;
        best.top_percent = h;
        best.bottom_percent = l;
        best.kept = std::move(kept);
        best.trimmed = std::move(trimmed);
      }
    }
  }
  if (!have) throw Error(ErrorKind::kRank, "degree trim: no trim level admits a d-dimensional embedding");
  return best;
}

// ---------------------------------------------------------------------------
// Separation conditions

bool SeparationReport::supported() const {
  return std::all_of(margins.begin(), margins.end(), [](const SeparationMargin& m) { return m.value > 0; });
}

SeparationReport CheckSeparation(const MatrixXd& b, double s_plus, double s_minus, SeparationMode mode) {
  if (b.rows() != b.cols() || b.rows() == 0)
    throw Error(ErrorKind::kValidation, "separation: block matrix must be square and nonempty");
  const int k = static_cast<int>(b.rows());
  const double inf = std::numeric_limits<double>::infinity();
  SeparationReport report;
  report.mode = mode;
  if (mode == SeparationMode::kDiagonal) {
    double distinct = inf, added = inf, deleted = inf;
    for (int i = 0; i < k; ++i) {
      for (int j = 0; j < k; ++j) {
        if (i != j) distinct = std::min(distinct, std::abs(b(i, i) - b(j, j)));
        added = std::min(added, std::abs(b(i, i) - b(j, j) - s_plus * (1.0 - b(j, j))));
        deleted = std::min(deleted, std::abs(b(i, i) - b(j, j) * (1.0 - s_minus)));
      }
    }
    report.margins = {{"A1.1", distinct}, {"A1.2", added}, {"A1.3", deleted}};
  } else {
    double distinct = inf, added = inf, deleted = inf;
    for (int i = 0; i < k; ++i)
      for (int j = 0; j < k; ++j) {
        if (i == j) continue;
        for (int u = 0; u < k; ++u)
          for (int v = 0; v < k; ++v) {
            if (u == v) continue;
            const bool same_pair = (i == u && j == v) || (i == v && j == u);
            if (!same_pair) distinct = std::min(distinct, std::abs(b(i, j) - b(u, v)));
            added = std::min(added, std::abs(b(i, j) - b(u, v) - s_plus * (1.0 - b(u, v))));
            deleted = std::min(deleted, std::abs(b(i, j) - b(u, v) * (1.0 - s_minus)));
          }
      }
    report.margins = {{"A2.1", distinct}, {"A2.2", added}, {"A2.3", deleted}};
  }
  return report;
}

}  // namespace vnreg

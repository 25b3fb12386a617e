// Acceptance suite: one pass/fail line per criterion. Numeric arguments pick
// criteria to run. A failed criterion is reported but only fails the process
// under --strict; a criterion that throws always does.
#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <functional>
#include <iostream>
#include <map>
#include <numeric>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include <Eigen/Dense>
#include <fmt/format.h>
#include <spdlog/spdlog.h>

#include "test_support.hpp"
#include "vnreg/clustering.hpp"
#include "vnreg/experiment.hpp"
#include "vnreg/graph_models.hpp"
#include "vnreg/regularization.hpp"
#include "vnreg/rng.hpp"
#include "vnreg/spectral.hpp"

using namespace vnreg;
using Eigen::MatrixXd;
namespace fs = std::filesystem;

namespace {

struct Verdict {
  bool pass = false;
  std::string detail;
};

const MatrixXd kB = (MatrixXd(2, 2) << 0.7, 0.2, 0.2, 0.3).finished();

fs::path ConfigPath(const std::string& name) { return fs::path(VNREG_SOURCE_DIR) / "configs" / name; }

double Median(std::vector<double> v) {
  std::sort(v.begin(), v.end());
  const std::size_t h = v.size() / 2;
  return v.size() % 2 ? v[h] : 0.5 * (v[h - 1] + v[h]);
}

// Mean of a named curve over replicates.
EvalCurve Mean(const std::vector<ReplicateResult>& reps, const std::string& name) {
  std::vector<const EvalCurve*> curves;
  for (const auto& r : reps) curves.push_back(&r.curves.at(name));
  return MeanCurve(curves);
}

std::vector<ReplicateResult> RunAll(const ExperimentConfig& c) {
  std::vector<ReplicateResult> reps;
  for (int i = 0; i < c.replicates; ++i) reps.push_back(RunReplicate(c, i));
  return reps;
}

Verdict GoldenContaminatedMatrix() {
  // The 6x6 matrix displayed for B = [[0.7, 0.2], [0.2, 0.3]], s+ = s- = 0.2.
  const MatrixXd displayed = (MatrixXd(6, 6) << 0.70, 0.76, 0.56, 0.20, 0.36, 0.16,  //
                              0.76, 0.76, 0.70, 0.36, 0.36, 0.20,                   //
                              0.56, 0.70, 0.56, 0.16, 0.20, 0.16,                   //
                              0.20, 0.36, 0.16, 0.30, 0.44, 0.24,                   //
                              0.36, 0.36, 0.20, 0.44, 0.44, 0.30,                   //
                              0.16, 0.20, 0.16, 0.24, 0.30, 0.24)
                                 .finished();
  const double err = (BuildContaminatedBlockMatrix(kB, 0.2, 0.2) - displayed).cwiseAbs().maxCoeff();
  return {err < 1e-12, fmt::format("max entry error {:.3g} (tolerance 1e-12)", err)};
}

Verdict MatchingExactness() {
  const MatrixXd bc = BuildContaminatedBlockMatrix(kB, 0.2, 0.2);
  const MatchResult m = MatchBlockMatrices(kB, bc);
  // Independent route: every injection, enumerated in shuffled order.
  test::Rng rng(11);
  double best = std::numeric_limits<double>::infinity();
  std::vector<int> arg;
  for (const auto& inj : test::AllInjections(2, 6, rng)) {
    const double f = test::MatchObjective(kB, bc, inj);
    if (f < best) {
      best = f;
      arg = inj;
    }
  }
  const bool ok = m.mapping == std::vector<int>{0, 3} && m.objective < 1e-12 && arg == m.mapping &&
                  std::abs(best - m.objective) < 1e-15;
  return {ok, fmt::format("mapping {{1->{}, 2->{}}}, objective {:.3g}; enumeration mapping {{1->{}, 2->{}}}, "
                          "objective {:.3g}",
                          m.mapping[0] + 1, m.mapping[1] + 1, m.objective, arg[0] + 1, arg[1] + 1, best)};
}

// Frobenius error of the block matrix estimated from a 2-cluster GMM on the
// 2-dimensional embedding, minimised over the label order.
double BlockEstimateError(Vertex n, std::uint64_t seed) {
  const Graph g = SampleSbm(SbmSpec::WithSizes(kB, {n / 2, n / 2}), DeriveSeed(seed, {0})).graph;
  const Embedding e = AdjacencySpectralEmbedding(g, 2);
  const ClusterModel m = FitGmm(e.positions, 2, DeriveSeed(seed, {1}));
  const MatrixXd est = EstimateBlockMatrix(m.centers, e.p, e.q).matrix;
  MatrixXd swapped = est;
  swapped << est(1, 1), est(1, 0), est(0, 1), est(0, 0);
  return std::min((est - kB).norm(), (swapped - kB).norm());
}

Verdict BlockEstimateConsistency() {
  std::vector<double> medians;
  for (Vertex n : {500, 1000, 2000}) {
    std::vector<double> errs;
    for (std::uint64_t r = 0; r < 20; ++r) errs.push_back(BlockEstimateError(n, DeriveSeed(3, {static_cast<std::uint64_t>(n), r})));
    medians.push_back(Median(errs));
  }
  const bool ok = medians[0] > medians[1] && medians[1] > medians[2] && medians[2] < 0.05;
  return {ok, fmt::format("median errors {:.4f}, {:.4f}, {:.4f} at n = 500, 1000, 2000 (need decreasing, last < 0.05)",
                          medians[0], medians[1], medians[2])};
}

struct ModelVsGraphRun {
  std::vector<ReplicateResult> reps;
};

const ModelVsGraphRun& Fig2Run() {
  static const ModelVsGraphRun run = [] {
    ExperimentConfig c = LoadExperimentConfig(ConfigPath("fig2_m400_rho07.toml"));
    c.baseline = false;  // only the model-trimming curve is judged
    return ModelVsGraphRun{RunAll(c)};
  }();
  return run;
}

Verdict MatchedBlocksAreCore() {
  const auto& reps = Fig2Run().reps;
  int hits = 0;
  for (const auto& r : reps) hits += r.stats.at("core_match") == 1.0;
  return {hits >= 27, fmt::format("core blocks matched in {}/{} replicates (need >= 27/30)", hits, reps.size())};
}

Verdict Fig2Dominance() {
  const EvalCurve mean = Mean(Fig2Run().reps, "model");
  bool dominates = true;
  double min_gap = std::numeric_limits<double>::infinity();
  for (std::size_t k = 0; k < 100; ++k) {
    min_gap = std::min(min_gap, mean.value[k] - mean.chance[k]);
    dominates = dominates && mean.value[k] > mean.chance[k];
  }
  const double margin = mean.value[99] - mean.chance[99];
  return {dominates && margin >= 50,
          fmt::format("smallest gap over chance {:.2f}; at k=100 mean {:.2f} vs chance {:.2f}, margin {:.2f} (need >= 50)",
                      min_gap, mean.value[99], mean.chance[99], margin)};
}

const std::vector<ReplicateResult>& Fig4Run() {
  static const std::vector<ReplicateResult> reps = RunAll(LoadExperimentConfig(ConfigPath("fig4_twostage.toml")));
  return reps;
}

Verdict Fig4PostOverPre() {
  const EvalCurve post = Mean(Fig4Run(), "post"), pre = Mean(Fig4Run(), "pre");
  const std::size_t k = 49;
  const bool ok = post.value[k] >= pre.value[k] && post.value[k] > post.chance[k] && pre.value[k] > pre.chance[k];
  return {ok, fmt::format("at k=50 post-regularization {:.2f} (chance {:.2f}), no regularization with seeds {:.2f} "
                          "(chance {:.2f})",
                          post.value[k], post.chance[k], pre.value[k], pre.chance[k])};
}

Verdict Fig6SeedlessOverSeeded() {
  const EvalCurve seedless = Mean(Fig4Run(), "post"), seeded = Mean(Fig4Run(), "seeded");
  const std::size_t k = 49;
  return {seedless.value[k] >= seeded.value[k],
          fmt::format("at k=50 seedless {:.2f}, seeded {:.2f}", seedless.value[k], seeded.value[k])};
}

Verdict RobustClusteringConsistency() {
  // Two point masses with inner products 0.7325 (within) and 0.17 (across),
  // white noise uniform on the nonnegative part of the unit ball.
  const Eigen::RowVector2d z1(0.85, 0.1), z2(0.1, 0.85);
  const double eta = (z1 - z2).norm();
  const double lambda = 0.2;
  const Vertex n = 600, m = 60;
  int correct = 0, separated = 0;
  double noise_fraction = 0.0;
  const int reps = 50;
  for (int r = 0; r < reps; ++r) {
    const std::uint64_t seed = DeriveSeed(8, {static_cast<std::uint64_t>(r)});
    GrdpgSpec signal;
    signal.positions.resize(n, 2);
    for (Vertex i = 0; i < n; ++i) signal.positions.row(i) = i < n / 2 ? z1 : z2;
    signal.p = 2;
    DiffuseNoiseSpec noise;
    noise.m = m;
    noise.region = NoiseRegion::kUnitBallOrthant;
    const DiffuseContamination combined = ContaminateDiffuse(signal, noise, DeriveSeed(seed, {0}));
    const Graph g = SampleGrdpg(combined.spec, DeriveSeed(seed, {1}));
    const MatrixXd x = AdjacencySpectralEmbedding(g, 2).positions;

    double spread = 0.0;
    for (int b = 0; b < 2; ++b) {
      const MatrixXd block = x.middleRows(b * n / 2, n / 2);
      const Eigen::RowVectorXd mean = block.colwise().mean();
      spread = std::max(spread, (block.rowwise() - mean).rowwise().norm().maxCoeff());
    }
    separated += eta >= 6 * std::max(lambda / 3, spread);

    RobustKmeansConfig cfg;
    cfg.k = 2;
    cfg.lambda = lambda;
    cfg.r_star = lambda;
    const ClusterModel model = RobustKMeans(x, cfg, DeriveSeed(seed, {2}));
    const int a = model.assignments[0], b = model.assignments[n - 1];
    bool ok = a != 0 && b != 0 && a != b;
    for (Vertex i = 0; i < n && ok; ++i) ok = model.assignments[i] == (i < n / 2 ? a : b);
    correct += ok;
    int noise_clustered = 0;
    for (Vertex i = n; i < n + m; ++i) noise_clustered += model.assignments[i] != 0;
    noise_fraction += static_cast<double>(noise_clustered) / m / reps;
  }
  return {correct >= 47 && noise_fraction <= 0.25,
          fmt::format("signal correctly clustered in {}/{} replicates (need >= 47); mean clustered-noise fraction "
                      "{:.3f} (need <= 0.25); separation condition held in {}/{} replicates (eta = {:.3f})",
                      correct, reps, noise_fraction, separated, reps, eta)};
}

Verdict BruteForceOracle() {
  test::Rng rng(9);
  int agree = 0;
  double worst = 0.0;
  for (int t = 0; t < 100; ++t) {
    const int n = 2 + static_cast<int>(rng() % 9);
    MatrixXd x(n, 2);
    for (int i = 0; i < n; ++i) x.row(i) << test::Uniform(rng), test::Uniform(rng);
    RobustKmeansConfig cfg;
    cfg.k = 1 + static_cast<int>(rng() % 2);
    cfg.k = std::min(cfg.k, n);
    cfg.lambda = 0.05 + 0.4 * test::Uniform(rng);
    cfg.restarts = 20;
    cfg.refine = true;
    const double got = RobustKMeans(x, cfg, 1000 + t).objective;
    const double exact = test::RobustObjectiveBruteForce(x, cfg.k, cfg.lambda);
    worst = std::max(worst, std::abs(got - exact));
    agree += std::abs(got - exact) < 1e-9;
  }
  return {agree == 100, fmt::format("{}/100 instances within 1e-9 of the exhaustive minimum (worst gap {:.3g})", agree, worst)};
}

Verdict EmbeddingOptimality() {
  test::Rng rng(10);
  int ok = 0;
  double worst = -std::numeric_limits<double>::infinity();
  for (int t = 0; t < 50; ++t) {
    const int k = 2 + static_cast<int>(rng() % 3);
    const MatrixXd b = test::RandomSymmetricProbabilities(k, rng);
    std::vector<Vertex> sizes(k, 300 / k);
    sizes.back() += 300 - std::accumulate(sizes.begin(), sizes.end(), Vertex{0});
    const Graph g = SampleSbm(SbmSpec::WithSizes(b, sizes), 500 + t).graph;
    const MatrixXd a = g.ToDense();
    const Embedding e = AdjacencySpectralEmbedding(g, k);
    const double excess = (e.Reconstruction() - a).norm() - test::BestRankError(a, k);
    worst = std::max(worst, excess);
    ok += excess <= 1e-8;
  }
  return {ok == 50, fmt::format("{}/50 graphs within 1e-8 of the best rank-d error (largest excess {:.3g})", ok, worst)};
}

std::map<std::string, std::string> ReadCsvTree(const fs::path& dir) {
  std::map<std::string, std::string> files;
  for (const auto& entry : fs::recursive_directory_iterator(dir)) {
    if (!entry.is_regular_file() || entry.path().extension() != ".csv") continue;
    std::ifstream in(entry.path(), std::ios::binary);
    std::stringstream ss;
    ss << in.rdbuf();
    files[fs::relative(entry.path(), dir).string()] = ss.str();
  }
  return files;
}

Verdict Determinism() {
  const fs::path root = fs::temp_directory_path() / "vnreg_acceptance_determinism";
  fs::remove_all(root);
  std::vector<std::string> lines;
  bool ok = true;
  for (const auto& entry : fs::directory_iterator(fs::path(VNREG_SOURCE_DIR) / "configs")) {
    ExperimentConfig c = LoadExperimentConfig(entry.path());
    if (c.scenario == Scenario::kCheck) continue;
    c.replicates = 2;
    const std::string stem = entry.path().stem().string();
    c.output_dir = root / (stem + "_a");
    RunExperiment(c, 1);
    c.output_dir = root / (stem + "_b");
    RunExperiment(c, 2);
    const auto a = ReadCsvTree(root / (stem + "_a")), b = ReadCsvTree(root / (stem + "_b"));
    const bool same = !a.empty() && a == b;
    ok = ok && same;
    lines.push_back(fmt::format("{} {} ({} CSVs)", stem, same ? "identical" : "DIFFERS", a.size()));
  }
  fs::remove_all(root);
  std::string detail = "2 replicates, sequential vs 2 jobs: ";
  for (std::size_t i = 0; i < lines.size(); ++i) detail += (i ? "; " : "") + lines[i];
  return {ok, detail};
}

}  // namespace

int main(int argc, char** argv) {
  spdlog::set_level(spdlog::level::warn);
  const std::vector<std::pair<std::string, std::function<Verdict()>>> criteria{
      {"contaminated block matrix golden value", GoldenContaminatedMatrix},
      {"block matrix matching exactness", MatchingExactness},
      {"block matrix estimates converge", BlockEstimateConsistency},
      {"matched blocks are the core blocks", MatchedBlocksAreCore},
      {"model trimming dominates chance (m=400, rho=0.7)", Fig2Dominance},
      {"two-stage cleaning beats seeded nomination at k=50", Fig4PostOverPre},
      {"seedless alignment beats seeded alignment at k=50", Fig6SeedlessOverSeeded},
      {"robust k-means recovers separated blocks", RobustClusteringConsistency},
      {"robust k-means matches the exhaustive minimum", BruteForceOracle},
      {"embedding is the best low-rank reconstruction", EmbeddingOptimality},
      {"bundled configs are byte-reproducible", Determinism},
  };
  std::set<int> selected;
  bool strict = false;
  for (int i = 1; i < argc; ++i) {
    if (std::string(argv[i]) == "--strict") strict = true;
    else selected.insert(std::atoi(argv[i]));
  }

  int failed = 0, errored = 0, ran = 0;
  for (std::size_t i = 0; i < criteria.size(); ++i) {
    const int id = static_cast<int>(i) + 1;
    if (!selected.empty() && !selected.count(id)) continue;
    const auto start = std::chrono::steady_clock::now();
    Verdict v;
    try {
      v = criteria[i].second();
    } catch (const std::exception& e) {
      v = {false, std::string("error: ") + e.what()};
      ++errored;
    }
    ++ran;
    const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
    failed += !v.pass;
    std::cout << fmt::format("criterion {:>2} {}: {}: {} [{:.1f}s]", id, v.pass ? "PASS" : "FAIL", criteria[i].first,
                             v.detail, secs)
              << std::endl;
  }
  std::cout << fmt::format("{} of {} criteria passed", ran - failed, ran) << std::endl;
  if (errored > 0) return 2;
  return strict && failed > 0 ? 1 : 0;
}

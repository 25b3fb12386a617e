#include "vnreg/experiment.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <exception>
#include <fstream>
#include <numeric>
#include <set>
#include <sstream>
#include <thread>

#include <fmt/format.h>
#include <nlohmann/json.hpp>
#include <spdlog/spdlog.h>
#define TOML_EXCEPTIONS 1
#include <tomlplusplus/toml.hpp>

#include "vnreg/error.hpp"
#include "vnreg/graph_models.hpp"
#include "vnreg/io.hpp"
#include "vnreg/plot.hpp"
#include "vnreg/rng.hpp"
#include "vnreg/spectral.hpp"

namespace vnreg {

namespace fs = std::filesystem;
using Eigen::Index;
using Eigen::MatrixXd;

// ---------------------------------------------------------------------------
// Config parsing

namespace {

class ConfigReader {
 public:
  explicit ConfigReader(std::string source) : source_(std::move(source)) {}

  [[noreturn]] void Fail(const toml::node* node, const std::string& msg) const {
    std::string where = source_;
    if (node != nullptr && node->source().begin.line > 0)
      where += ": line " + std::to_string(node->source().begin.line);
    throw Error(ErrorKind::kConfig, where + ": " + msg);
  }

  void CheckKeys(const toml::table& t, const std::string& table, std::initializer_list<std::string_view> keys) const {
    for (const auto& [k, v] : t) {
      if (std::find(keys.begin(), keys.end(), k.str()) == keys.end())
        Fail(&v, "unknown key '" + std::string(k.str()) + "'" + (table.empty() ? "" : " in [" + table + "]"));
    }
  }

  template <typename T>
  std::optional<T> Get(const toml::table& t, std::string_view key) const {
    const toml::node* n = t.get(key);
    if (n == nullptr) return std::nullopt;
    if constexpr (std::is_same_v<T, double>) {
      if (auto v = n->value<double>()) return *v;  // integers convert
      Fail(n, "'" + std::string(key) + "' must be a number");
    } else if constexpr (std::is_same_v<T, std::int64_t>) {
      if (n->is_integer()) return n->as_integer()->get();
      Fail(n, "'" + std::string(key) + "' must be an integer");
    } else if constexpr (std::is_same_v<T, bool>) {
      if (n->is_boolean()) return n->as_boolean()->get();
      Fail(n, "'" + std::string(key) + "' must be true or false");
    } else {
      if (n->is_string()) return std::string(n->as_string()->get());
      Fail(n, "'" + std::string(key) + "' must be a string");
    }
  }

  std::optional<int> GetInt(const toml::table& t, std::string_view key) const {
    auto v = Get<std::int64_t>(t, key);
    if (!v) return std::nullopt;
    if (*v < std::numeric_limits<int>::min() || *v > std::numeric_limits<int>::max())
      Fail(t.get(key), "'" + std::string(key) + "' out of range");
    return static_cast<int>(*v);
  }

  // Integer or the string "auto".
  std::optional<int> GetIntOrAuto(const toml::table& t, std::string_view key) const {
    const toml::node* n = t.get(key);
    if (n == nullptr) return std::nullopt;
    if (n->is_string() && n->as_string()->get() == "auto") return std::nullopt;
    if (!n->is_integer()) Fail(n, "'" + std::string(key) + "' must be an integer or \"auto\"");
    return static_cast<int>(n->as_integer()->get());
  }

  std::vector<double> GetNumbers(const toml::node& n, std::string_view key) const {
    const toml::array* a = n.as_array();
    if (a == nullptr) Fail(&n, "'" + std::string(key) + "' must be an array of numbers");
    std::vector<double> out;
    for (const auto& e : *a) {
      auto v = e.value<double>();
      if (!v) Fail(&e, "'" + std::string(key) + "' must contain only numbers");
      out.push_back(*v);
    }
    return out;
  }

  MatrixXd GetMatrix(const toml::table& t, std::string_view key) const {
    const toml::node* n = t.get(key);
    if (n == nullptr) Fail(nullptr, "missing '" + std::string(key) + "'");
    const toml::array* rows = n->as_array();
    if (rows == nullptr || rows->empty()) Fail(n, "'" + std::string(key) + "' must be a nonempty array of rows");
    std::vector<std::vector<double>> values;
    for (const auto& r : *rows) values.push_back(GetNumbers(r, key));
    MatrixXd m(static_cast<Index>(values.size()), static_cast<Index>(values[0].size()));
    for (std::size_t i = 0; i < values.size(); ++i) {
      if (values[i].size() != values[0].size()) Fail(n, "'" + std::string(key) + "' rows differ in length");
      for (std::size_t j = 0; j < values[i].size(); ++j)
        m(static_cast<Index>(i), static_cast<Index>(j)) = values[i][j];
    }
    return m;
  }

  const toml::table* Table(const toml::table& root, std::string_view key) const {
    const toml::node* n = root.get(key);
    if (n == nullptr) return nullptr;
    if (!n->is_table()) Fail(n, "'" + std::string(key) + "' must be a table");
    return n->as_table();
  }

 private:
  std::string source_;
};

}  // namespace

ExperimentConfig ParseExperimentConfig(const std::string& text, const std::string& source) {
  toml::table root;
  try {
    root = toml::parse(text, source);
  } catch (const toml::parse_error& e) {
    throw Error(ErrorKind::kConfig, fmt::format("{}: line {}: {}", source, e.source().begin.line, e.description()));
  }
  ConfigReader r(source);
  r.CheckKeys(root, "", {"scenario", "name", "replicates", "master_seed", "k_max", "output_dir", "model",
                         "block_noise", "diffuse_noise", "pipeline", "robust", "baseline", "resample"});
  ExperimentConfig c;
  const std::string scenario = r.Get<std::string>(root, "scenario").value_or("model_vs_graph");
  if (scenario == "model_vs_graph") c.scenario = Scenario::kModelVsGraph;
  else if (scenario == "two_stage") c.scenario = Scenario::kTwoStage;
  else if (scenario == "resample") c.scenario = Scenario::kResample;
  else if (scenario == "check") c.scenario = Scenario::kCheck;
  else r.Fail(root.get("scenario"), "unknown scenario '" + scenario + "'");
  c.name = r.Get<std::string>(root, "name").value_or(scenario);
  c.replicates = r.GetInt(root, "replicates").value_or(c.replicates);
  if (auto s = r.Get<std::int64_t>(root, "master_seed")) c.master_seed = static_cast<std::uint64_t>(*s);
  if (auto k = r.GetInt(root, "k_max")) {
    if (*k < 1) r.Fail(root.get("k_max"), "k_max must be >= 1");
    c.k_max = static_cast<std::size_t>(*k);
  }
  if (auto o = r.Get<std::string>(root, "output_dir")) c.output_dir = *o;

  if (const auto* t = r.Table(root, "model")) {
    r.CheckKeys(*t, "model", {"block_matrix", "core_sizes", "sparsity", "rho"});
    c.block_matrix = r.GetMatrix(*t, "block_matrix");
    if (const toml::node* n = t->get("core_sizes")) {
      for (double v : r.GetNumbers(*n, "core_sizes")) {
        if (v != std::floor(v) || v < 1) r.Fail(n, "core_sizes must be positive integers");
        c.core_sizes.push_back(static_cast<Vertex>(v));
      }
    }
    c.sparsity = r.Get<double>(*t, "sparsity").value_or(c.sparsity);
    c.rho = r.Get<double>(*t, "rho").value_or(c.rho);
  }
  if (const auto* t = r.Table(root, "block_noise")) {
    r.CheckKeys(*t, "block_noise", {"m", "s_plus", "s_minus"});
    c.block_noise_m = r.Get<std::int64_t>(*t, "m").value_or(0);
    c.s_plus = r.Get<double>(*t, "s_plus").value_or(c.s_plus);
    c.s_minus = r.Get<double>(*t, "s_minus").value_or(c.s_minus);
  }
  if (const auto* t = r.Table(root, "diffuse_noise")) {
    r.CheckKeys(*t, "diffuse_noise", {"m", "region"});
    c.diffuse_m = r.Get<std::int64_t>(*t, "m").value_or(0);
    const std::string region = r.Get<std::string>(*t, "region").value_or("sphere_orthant");
    if (region == "sphere_orthant") c.diffuse_region = NoiseRegion::kUnitSphereOrthant;
    else if (region == "ball_orthant") c.diffuse_region = NoiseRegion::kUnitBallOrthant;
    else r.Fail(t->get("region"), "region must be \"sphere_orthant\" or \"ball_orthant\"");
  }
  if (const auto* t = r.Table(root, "pipeline")) {
    r.CheckKeys(*t, "pipeline", {"d1", "d2", "elbow", "k1", "k2", "joint_k", "k_range", "seeds"});
    c.d1 = r.GetIntOrAuto(*t, "d1");
    c.d2 = r.GetIntOrAuto(*t, "d2");
    c.elbow = r.GetInt(*t, "elbow").value_or(c.elbow);
    c.k1 = r.GetInt(*t, "k1");
    c.k2 = r.GetInt(*t, "k2");
    c.joint_k = r.GetInt(*t, "joint_k");
    if (const toml::node* n = t->get("k_range")) {
      const auto v = r.GetNumbers(*n, "k_range");
      if (v.size() != 2) r.Fail(n, "k_range must be [min, max]");
      c.k_range = {static_cast<int>(v[0]), static_cast<int>(v[1])};
    }
    c.seeds = r.GetInt(*t, "seeds").value_or(c.seeds);
  }
  if (const auto* t = r.Table(root, "robust")) {
    r.CheckKeys(*t, "robust", {"k", "lambda", "r_star", "restarts", "max_iters", "sphere_project"});
    c.robust_k = r.GetInt(*t, "k");
    c.lambda = r.Get<double>(*t, "lambda").value_or(c.lambda);
    if (const toml::node* n = t->get("r_star")) {
      if (n->is_string() && n->as_string()->get() == "g1_radius") {
        c.r_star.fixed.reset();
      } else if (auto v = n->value<double>()) {
        c.r_star.fixed = *v;
      } else {
        r.Fail(n, "r_star must be a number or \"g1_radius\"");
      }
    }
    c.robust_restarts = r.GetInt(*t, "restarts").value_or(c.robust_restarts);
    c.robust_max_iters = r.GetInt(*t, "max_iters").value_or(c.robust_max_iters);
    c.sphere_project = r.Get<bool>(*t, "sphere_project").value_or(c.sphere_project);
  }
  if (const auto* t = r.Table(root, "baseline")) {
    r.CheckKeys(*t, "baseline", {"enabled", "grid_step", "grid_max"});
    c.baseline = r.Get<bool>(*t, "enabled").value_or(c.baseline);
    c.baseline_grid_step = r.Get<double>(*t, "grid_step").value_or(c.baseline_grid_step);
    c.baseline_grid_max = r.Get<double>(*t, "grid_max").value_or(c.baseline_grid_max);
  }
  if (const auto* t = r.Table(root, "resample")) {
    r.CheckKeys(*t, "resample", {"graph", "labels", "d", "m", "k"});
    if (auto g = r.Get<std::string>(*t, "graph")) c.resample_graph = *g;
    if (auto l = r.Get<std::string>(*t, "labels")) c.resample_labels = *l;
    c.resample_d = r.GetInt(*t, "d").value_or(c.resample_d);
    c.resample_m = r.Get<std::int64_t>(*t, "m").value_or(c.resample_m);
    c.resample_k = r.GetInt(*t, "k").value_or(c.resample_k);
  }
  try {
    c.Validate();
  } catch (const Error& e) {
    throw Error(ErrorKind::kConfig, source + ": " + e.what());
  }
  return c;
}

ExperimentConfig LoadExperimentConfig(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error(ErrorKind::kIo, "cannot open config " + path.string());
  std::stringstream ss;
  ss << in.rdbuf();
  ExperimentConfig c = ParseExperimentConfig(ss.str(), path.string());
  // Relative data paths are resolved against the config's directory.
  auto resolve = [&](std::optional<fs::path>& p) {
    if (p && p->is_relative()) p = path.parent_path() / *p;
  };
  resolve(c.resample_graph);
  resolve(c.resample_labels);
  return c;
}

void ExperimentConfig::Validate() const {
  auto fail = [](const std::string& msg) { throw Error(ErrorKind::kValidation, msg); };
  if (replicates < 1) fail("replicates must be >= 1");
  const bool needs_model = scenario != Scenario::kResample || !resample_graph;
  if (needs_model) {
    if (block_matrix.size() == 0) fail("[model] block_matrix is required");
    if (block_matrix.rows() != block_matrix.cols()) fail("[model] block_matrix must be square");
    if ((block_matrix - block_matrix.transpose()).cwiseAbs().maxCoeff() > 1e-12)
      fail("[model] block_matrix must be symmetric");
    if ((block_matrix.array() < 0).any() || (block_matrix.array() > 1).any())
      fail("[model] block_matrix entries must lie in [0, 1]");
    if (scenario != Scenario::kCheck && static_cast<Index>(core_sizes.size()) != block_matrix.rows())
      fail("[model] core_sizes needs one entry per block");
  }
  if (!(sparsity >= 0 && sparsity <= 1)) fail("[model] sparsity must lie in [0, 1]");
  if (!(rho >= 0 && rho <= 1)) fail("[model] rho must lie in [0, 1]");
  if (!(s_plus >= 0 && s_plus <= 1) || !(s_minus >= 0 && s_minus <= 1))
    fail("[block_noise] s_plus and s_minus must lie in [0, 1]");
  if (block_noise_m < 0 || diffuse_m < 0) fail("noise counts must be non-negative");
  if (needs_model && block_noise_m % (2 * block_matrix.rows()) != 0)
    fail("[block_noise] m must be divisible by 2K so W+ and W- split evenly across blocks");
  if (!(lambda > 0)) fail("[robust] lambda must be > 0");
  if (r_star.fixed && !(*r_star.fixed > 0)) fail("[robust] r_star must be > 0");
  if (k_range.min < 1 || k_range.max < k_range.min) fail("[pipeline] k_range must satisfy 1 <= min <= max");
  if (seeds < 1) fail("[pipeline] seeds must be >= 1");
  if (!(baseline_grid_step > 0)) fail("[baseline] grid_step must be > 0");
  if (resample_d < 1 || resample_k < 1 || resample_m < 0) fail("[resample] d, k must be >= 1 and m >= 0");
}

// ---------------------------------------------------------------------------
// Simulation

ContaminatedPair SimulateContaminatedPair(const ExperimentConfig& config, std::uint64_t seed) {
  const Index k = config.block_matrix.rows();
  const Vertex per_role = config.block_noise_m / (2 * k);
  std::vector<Vertex> sizes;
  for (Vertex c : config.core_sizes) sizes.push_back(c + 2 * per_role);
  const SbmSpec spec = SbmSpec::WithSizes(config.block_matrix, sizes, config.sparsity);
  const CorrelatedSbmSample pair = SampleCorrelatedSbm(spec, config.rho, DeriveSeed(seed, {stream::kGraph1}));

  BlockContaminationSpec noise;
  noise.s_plus = config.s_plus;
  noise.s_minus = config.s_minus;
  noise.w_plus_sizes = std::vector<Vertex>(static_cast<std::size_t>(k), per_role);
  noise.w_minus_sizes = std::vector<Vertex>(static_cast<std::size_t>(k), per_role);
  const BlockContamination contaminated =
      ContaminateBlock(pair.second, noise, DeriveSeed(seed, {stream::kContaminate}), pair.membership);

  ContaminatedPair out;
  out.labels_2 = ContaminatedLabels(pair.membership, contaminated.w_plus, contaminated.w_minus);
  for (Vertex v = 0; v < pair.second.size(); ++v) {
    if (out.labels_2[v] % 3 == 0) {
      out.core.push_back(v);
      out.membership_1.push_back(pair.membership[v]);
    }
  }
  out.g1 = pair.first.Induced(out.core);
  out.g2 = contaminated.graph;

  if (config.diffuse_m > 0) {
    const MatrixXd bc = BuildContaminatedBlockMatrix(config.block_matrix, config.s_plus, config.s_minus);
    const BlockLatentPositions blocks = SbmLatentPositions(bc, config.sparsity);
    DiffuseNoiseSpec diffuse;
    diffuse.m = config.diffuse_m;
    diffuse.region = config.diffuse_region;
    diffuse.transform = FeasibleNoiseTransform(blocks);
    const DiffuseContamination combined = ContaminateDiffuse(SbmAsGrdpg(bc, out.labels_2, config.sparsity),
                                                             diffuse, DeriveSeed(seed, {stream::kDiffuse, 0}));
    out.g2 = AttachNoiseVertices(out.g2, combined, DeriveSeed(seed, {stream::kDiffuse, 1}));
    out.labels_2.resize(out.labels_2.size() + static_cast<std::size_t>(config.diffuse_m), -1);
  }
  return out;
}

namespace {

TrimConfig MakeTrimConfig(const ExperimentConfig& c) {
  TrimConfig t;
  t.d1 = c.d1;
  t.d2 = c.d2;
  t.elbow = c.elbow;
  t.k1 = c.k1;
  t.k2 = c.k2;
  t.k_range = c.k_range;
  return t;
}

JointClusterConfig MakeJointConfig(const ExperimentConfig& c) {
  JointClusterConfig j;
  j.k = c.joint_k ? c.joint_k : c.k1;
  j.k_range = c.k_range;
  return j;
}

std::vector<Vertex> AllVertices(Vertex n) {
  std::vector<Vertex> v(static_cast<std::size_t>(n));
  std::iota(v.begin(), v.end(), 0);
  return v;
}

// Query i's true match expressed in a candidate index space; -1 when the
// true vertex is absent (it then never counts as found).
std::map<Vertex, Vertex> TruthThrough(const std::vector<Vertex>& core, const std::vector<Vertex>& candidate_ids) {
  std::map<Vertex, Vertex> position;
  for (std::size_t i = 0; i < candidate_ids.size(); ++i) position[candidate_ids[i]] = static_cast<Vertex>(i);
  std::map<Vertex, Vertex> truth;
  for (std::size_t i = 0; i < core.size(); ++i) {
    const auto it = position.find(core[i]);
    truth[static_cast<Vertex>(i)] = it == position.end() ? -1 : it->second;
  }
  return truth;
}

std::size_t CandidateCount(const std::vector<NominationList>& lists) {
  return lists.empty() ? 0 : std::max<std::size_t>(lists.front().candidates.size(), 1);
}

// `count` seed pairs drawn uniformly from the queries whose true match is
// present, as (query, candidate index).
std::vector<std::pair<Vertex, Vertex>> DrawSeeds(const std::map<Vertex, Vertex>& truth, int count,
                                                 std::uint64_t seed) {
  std::vector<std::pair<Vertex, Vertex>> pool;
  for (const auto& [q, c] : truth)
    if (c >= 0) pool.emplace_back(q, c);
  Rng rng(seed);
  const std::size_t take = std::min(pool.size(), static_cast<std::size_t>(count));
  for (std::size_t i = 0; i < take; ++i) std::swap(pool[i], pool[i + UniformIndex(rng, pool.size() - i)]);
  pool.resize(take);
  return pool;
}

// Curve for a replicate where trimming kept no true match to seed from:
// nothing can be found, chance is still defined by the candidate count.
EvalCurve NoHits(std::size_t queries, std::size_t candidates, std::size_t k_max) {
  EvalCurve curve;
  curve.value.assign(k_max, 0.0);
  curve.chance.resize(k_max);
  for (std::size_t k = 0; k < k_max; ++k)
    curve.chance[k] = static_cast<double>(queries * (k + 1)) / static_cast<double>(std::max<std::size_t>(candidates, 1));
  return curve;
}

// 1 when the retained G2 clusters are, by majority truth label, exactly the
// core blocks.
double CoreMatch(const TrimOutcome& t, const std::vector<int>& labels_of_trim_input, int k) {
  std::set<int> majority;
  for (int block : t.match.retained_blocks) {
    std::map<int, int> votes;
    for (std::size_t v = 0; v < t.model_2.assignments.size(); ++v)
      if (t.model_2.assignments[v] == block + 1) ++votes[labels_of_trim_input[v]];
    if (votes.empty()) return 0.0;
    const auto best = std::max_element(votes.begin(), votes.end(),
                                       [](const auto& a, const auto& b) { return a.second < b.second; });
    majority.insert(best->first);
  }
  std::set<int> cores;
  for (int b = 0; b < k; ++b) cores.insert(3 * b);
  return majority == cores ? 1.0 : 0.0;
}

void RetentionStats(const std::vector<Vertex>& retained, const std::vector<Vertex>& core, ReplicateResult& r,
                    const std::string& prefix) {
  const std::set<Vertex> core_set(core.begin(), core.end());
  double hits = 0;
  for (Vertex v : retained) hits += core_set.count(v) ? 1.0 : 0.0;
  r.stats[prefix + "retained"] = static_cast<double>(retained.size());
  r.stats[prefix + "precision"] = retained.empty() ? 0.0 : hits / static_cast<double>(retained.size());
  r.stats[prefix + "recall"] = core.empty() ? 0.0 : hits / static_cast<double>(core.size());
}

double RadiusFromG1(const Graph& g1, int dim, int k, bool project, std::uint64_t seed) {
  MatrixXd x = AdjacencySpectralEmbedding(g1, dim).positions;
  if (project) x = SphereProject(x);
  const ClusterModel m = FitGmm(x, k, seed);
  return ClusterRadius(m, x);
}

ReplicateResult RunModelVsGraph(const ExperimentConfig& c, std::uint64_t seed) {
  ReplicateResult r;
  const ContaminatedPair pair = SimulateContaminatedPair(c, seed);
  const int k = static_cast<int>(c.block_matrix.rows());
  const std::vector<Vertex> queries = AllVertices(pair.g1.size());
  const JointClusterConfig joint = MakeJointConfig(c);

  const TrimOutcome trim = BlockTrim(pair.g1, pair.g2, MakeTrimConfig(c), DeriveSeed(seed, {stream::kCluster}));
  r.stats["core_match"] = CoreMatch(trim, pair.labels_2, k);
  r.stats["k1"] = trim.model_1.k;
  r.stats["k2"] = trim.model_2.k;
  RetentionStats(trim.vertex_map, pair.core, r, "trim_");
  const JointNomination model = NominateJointly(trim.aligned_embedding_1, trim.embedding_2, queries, joint,
                                                DeriveSeed(seed, {stream::kCluster, 7}));
  r.curves["model"] = RankAtKCurve(model.lists, TruthThrough(pair.core, trim.vertex_map),
                                   CandidateCount(model.lists), c.k_max);

  if (c.baseline) {
    BaselineConfig bc;
    bc.d = trim.d1;
    bc.k_range = c.k_range;
    bc.grid_step = c.baseline_grid_step;
    bc.grid_max = c.baseline_grid_max;
    const BaselineOutcome base = DegreeTrimBaseline(pair.g2, bc, DeriveSeed(seed, {stream::kBaseline}));
    r.stats["baseline_top_percent"] = base.top_percent;
    r.stats["baseline_bottom_percent"] = base.bottom_percent;
    RetentionStats(base.kept, pair.core, r, "baseline_");
    const MatrixXd x2 = AdjacencySpectralEmbedding(base.trimmed, trim.d1).positions;
    const auto truth = TruthThrough(pair.core, base.kept);
    const auto seeds = DrawSeeds(truth, c.seeds, DeriveSeed(seed, {stream::kSeeds, 0}));
    if (seeds.empty()) {
      r.curves["baseline"] = NoHits(queries.size(), base.kept.size(), c.k_max);
    } else {
      const SeededNomination nom = NominateWithSeeds(trim.embedding_1, x2, seeds, queries, joint,
                                                     DeriveSeed(seed, {stream::kBaseline, 7}));
      r.curves["baseline"] = RankAtKCurve(nom.nomination.lists, truth, CandidateCount(nom.nomination.lists), c.k_max);
    }
  }
  return r;
}

ReplicateResult RunTwoStage(const ExperimentConfig& c, std::uint64_t seed) {
  ReplicateResult r;
  const ContaminatedPair pair = SimulateContaminatedPair(c, seed);
  const int k = static_cast<int>(c.block_matrix.rows());
  const std::vector<Vertex> queries = AllVertices(pair.g1.size());
  const JointClusterConfig joint = MakeJointConfig(c);
  const TrimConfig trim_config = MakeTrimConfig(c);
  const AdjacencySpectrum spectrum_2(pair.g2);

  CleanConfig clean;
  clean.d = c.d2;
  clean.elbow = c.elbow;
  clean.sphere_project = c.sphere_project;
  clean.robust.k = c.robust_k ? *c.robust_k : c.k2.value_or(3 * k);
  clean.robust.lambda = c.lambda;
  clean.robust.restarts = c.robust_restarts;
  clean.robust.max_iters = c.robust_max_iters;
  // The radius is measured in the dimension the noisy graph is cleaned in,
  // so it is comparable with the distances it thresholds.
  const int clean_d = c.d2 ? *c.d2 : SelectDimension(spectrum_2, c.elbow);
  clean.robust.r_star = c.r_star.fixed ? *c.r_star.fixed
                                       : RadiusFromG1(pair.g1, clean_d, c.k1.value_or(k), c.sphere_project,
                                                      DeriveSeed(seed, {stream::kRobust, 1}));
  r.stats["r_star"] = clean.robust.r_star;

  const TrimOutcome post = TwoStageClean(pair.g1, pair.g2, spectrum_2, clean, trim_config,
                                         DeriveSeed(seed, {stream::kCluster}));
  {
    double noise_total = 0, noise_kept = 0, signal_total = 0, signal_kept = 0;
    std::vector<bool> kept(pair.labels_2.size(), false);
    for (Vertex v : post.stage1_kept) kept[v] = true;
    for (std::size_t v = 0; v < pair.labels_2.size(); ++v) {
      const bool noise = pair.labels_2[v] < 0;
      (noise ? noise_total : signal_total) += 1;
      if (kept[v]) (noise ? noise_kept : signal_kept) += 1;
    }
    r.stats["stage1_noise_removed"] = noise_total > 0 ? 1.0 - noise_kept / noise_total : 0.0;
    r.stats["stage1_signal_kept"] = signal_total > 0 ? signal_kept / signal_total : 0.0;
    std::vector<int> stage1_labels;
    for (Vertex v : post.stage1_kept) stage1_labels.push_back(pair.labels_2[v]);
    r.stats["core_match"] = CoreMatch(post, stage1_labels, k);
    RetentionStats(post.vertex_map, pair.core, r, "trim_");
  }

  const auto post_truth = TruthThrough(pair.core, post.vertex_map);
  const JointNomination seedless = NominateJointly(post.aligned_embedding_1, post.embedding_2, queries, joint,
                                                   DeriveSeed(seed, {stream::kCluster, 7}));
  r.curves["post"] = RankAtKCurve(seedless.lists, post_truth, CandidateCount(seedless.lists), c.k_max);

  // Same trimmed graph, but seeds instead of center alignment.
  const auto post_seeds = DrawSeeds(post_truth, c.seeds, DeriveSeed(seed, {stream::kSeeds, 1}));
  if (post_seeds.empty()) {
    r.curves["seeded"] = NoHits(queries.size(), post.vertex_map.size(), c.k_max);
  } else {
    const SeededNomination seeded = NominateWithSeeds(post.embedding_1, post.embedding_2, post_seeds, queries, joint,
                                                      DeriveSeed(seed, {stream::kCluster, 8}));
    r.curves["seeded"] = RankAtKCurve(seeded.nomination.lists, post_truth, CandidateCount(seeded.nomination.lists), c.k_max);
  }

  // No regularisation: embed everything at d1 and align by seeds.
  const MatrixXd x2 = spectrum_2.Embed(post.d1).positions;
  const auto pre_truth = TruthThrough(pair.core, AllVertices(pair.g2.size()));
  const SeededNomination pre =
      NominateWithSeeds(post.embedding_1, x2, DrawSeeds(pre_truth, c.seeds, DeriveSeed(seed, {stream::kSeeds, 2})),
                        queries, joint, DeriveSeed(seed, {stream::kCluster, 9}));
  r.curves["pre"] = RankAtKCurve(pre.nomination.lists, pre_truth, CandidateCount(pre.nomination.lists), c.k_max);
  return r;
}

// Orthogonal alignment of source centers onto target centers, trying every
// pairing of the clusters (they are unlabelled on both sides).
ProcrustesResult AlignUnlabelledCenters(const MatrixXd& source, const MatrixXd& target, const MatrixXd& points) {
  std::vector<int> perm(static_cast<std::size_t>(source.rows()));
  std::iota(perm.begin(), perm.end(), 0);
  ProcrustesResult best;
  double best_err = std::numeric_limits<double>::infinity();
  do {
    MatrixXd permuted(target.rows(), target.cols());
    for (std::size_t i = 0; i < perm.size(); ++i) permuted.row(static_cast<Index>(i)) = target.row(perm[i]);
    ProcrustesResult cand = ProcrustesAlign(source, permuted, points);
    const double err = (source * cand.rotation - permuted).norm();
    if (err < best_err) {
      best_err = err;
      best = std::move(cand);
    }
  } while (std::next_permutation(perm.begin(), perm.end()));
  return best;
}

ReplicateResult RunResample(const ExperimentConfig& c, std::uint64_t seed) {
  ReplicateResult r;
  Graph g1;
  std::vector<std::int64_t> classes;
  if (c.resample_graph) {
    g1 = ReadEdgeList(*c.resample_graph);
    if (c.resample_labels) {
      classes = ReadLabels(*c.resample_labels);
      if (static_cast<Vertex>(classes.size()) != g1.size())
        throw Error(ErrorKind::kValidation, "resample: label count does not match the graph");
    }
  } else {
    const SbmSample s = SampleSbm(SbmSpec::WithSizes(c.block_matrix, c.core_sizes, c.sparsity),
                                  DeriveSeed(seed, {stream::kGraph1}));
    g1 = s.graph;
    classes.assign(s.membership.begin(), s.membership.end());
  }
  const Vertex n = g1.size();
  const int d = c.resample_d, k = c.resample_k;

  const Embedding x1 = AdjacencySpectralEmbedding(g1, d);
  DiffuseNoiseSpec noise;
  noise.m = c.resample_m;
  noise.region = NoiseRegion::kUnitSphereOrthant;
  const MatrixXd z = SampleNoisePositions(noise, d, DeriveSeed(seed, {stream::kDiffuse}));
  MatrixXd x(n + noise.m, d);
  x << x1.positions, z;
  // Estimated positions need not be feasible; clip the kernel.
  const MatrixXd prob = (x * SignatureDiagonal(x1.p, x1.q).asDiagonal() * x.transpose()).cwiseMax(0.0).cwiseMin(1.0);
  const Graph g2 = SampleFromProbabilities(prob, DeriveSeed(seed, {stream::kGraph2}));

  CleanConfig clean;
  clean.d = d;
  clean.sphere_project = c.sphere_project;
  clean.robust.k = k;
  clean.robust.lambda = c.lambda;
  clean.robust.restarts = c.robust_restarts;
  clean.robust.max_iters = c.robust_max_iters;
  clean.robust.r_star = c.r_star.fixed ? *c.r_star.fixed
                                       : RadiusFromG1(g1, d, k, c.sphere_project, DeriveSeed(seed, {stream::kRobust, 1}));
  r.stats["r_star"] = clean.robust.r_star;
  const CleanOutcome cleaned = RobustClean(g2, clean, DeriveSeed(seed, {stream::kRobust}));
  double noise_kept = 0;
  for (Vertex v : cleaned.kept) noise_kept += v >= n ? 1.0 : 0.0;
  r.stats["noise_removed"] = noise.m > 0 ? 1.0 - noise_kept / static_cast<double>(noise.m) : 0.0;
  r.stats["signal_kept"] = (static_cast<double>(cleaned.kept.size()) - noise_kept) / static_cast<double>(n);

  const MatrixXd x2t = cleaned.embedding(cleaned.kept, Eigen::all);
  // Robust cluster centers in the unprojected space.
  MatrixXd centers_2 = MatrixXd::Zero(k, d);
  std::vector<double> counts(static_cast<std::size_t>(k), 0.0);
  for (std::size_t i = 0; i < cleaned.kept.size(); ++i) {
    const int lab = cleaned.model.assignments[cleaned.kept[i]] - 1;
    centers_2.row(lab) += x2t.row(static_cast<Index>(i));
    counts[lab] += 1.0;
  }
  for (int j = 0; j < k; ++j)
    if (counts[j] > 0) centers_2.row(j) /= counts[j];
  const ClusterModel m1 = FitGmm(x1.positions, k, DeriveSeed(seed, {stream::kCluster, 1}));
  const ProcrustesResult aligned = AlignUnlabelledCenters(m1.centers, centers_2, x1.positions);

  const std::vector<Vertex> queries = AllVertices(n);
  JointClusterConfig joint;
  joint.k = c.joint_k;
  joint.k_range = c.k_range;
  JointNomination nom = NominateJointly(aligned.aligned, x2t, queries, joint, DeriveSeed(seed, {stream::kCluster, 7}));

  if (!classes.empty()) {
    // The resampled copy of the query itself is not an "other" vertex.
    for (NominationList& list : nom.lists) {
      for (std::size_t i = 0; i < list.candidates.size(); ++i) {
        if (cleaned.kept[list.candidates[i]] == list.query) {
          list.candidates.erase(list.candidates.begin() + static_cast<std::ptrdiff_t>(i));
          list.scores.erase(list.scores.begin() + static_cast<std::ptrdiff_t>(i));
          break;
        }
      }
    }
    std::map<Vertex, std::int64_t> query_labels, candidate_labels;
    for (Vertex v = 0; v < n; ++v) query_labels[v] = classes[v];
    for (std::size_t i = 0; i < cleaned.kept.size(); ++i) {
      const Vertex orig = cleaned.kept[i];
      candidate_labels[static_cast<Vertex>(i)] = orig < n ? classes[orig] : -1;
    }
    for (auto& [cls, curve] : PrecisionAtK(nom.lists, query_labels, candidate_labels, c.k_max))
      r.curves[fmt::format("precision_class_{}", cls)] = std::move(curve);
  }
  return r;
}

}  // namespace

ReplicateResult RunReplicate(const ExperimentConfig& config, int replicate) {
  const std::uint64_t seed = DeriveSeed(config.master_seed, {static_cast<std::uint64_t>(replicate)});
  switch (config.scenario) {
    case Scenario::kModelVsGraph: return RunModelVsGraph(config, seed);
    case Scenario::kTwoStage: return RunTwoStage(config, seed);
    case Scenario::kResample: return RunResample(config, seed);
    case Scenario::kCheck: break;
  }
  throw Error(ErrorKind::kConfig, "scenario 'check' has no replicates; use the check command");
}

std::vector<CurveDifference> ScenarioDifferences(const ExperimentConfig& config) {
  switch (config.scenario) {
    case Scenario::kModelVsGraph:
      if (config.baseline) return {{"model_minus_baseline", "model", "baseline"}};
      return {};
    case Scenario::kTwoStage:
      return {{"post_minus_pre", "post", "pre"}, {"with_minus_without_seeds", "seeded", "post"}};
    default: return {};
  }
}

EvalCurve MeanCurve(const std::vector<const EvalCurve*>& curves) {
  EvalCurve mean;
  if (curves.empty()) return mean;
  std::size_t len = curves.front()->k_max();
  for (const EvalCurve* c : curves) len = std::min(len, c->k_max());
  mean.value.assign(len, 0.0);
  mean.chance.assign(len, 0.0);
  for (const EvalCurve* c : curves)
    for (std::size_t k = 0; k < len; ++k) {
      mean.value[k] += c->value[k];
      mean.chance[k] += c->chance[k];
    }
  for (std::size_t k = 0; k < len; ++k) {
    mean.value[k] /= static_cast<double>(curves.size());
    mean.chance[k] /= static_cast<double>(curves.size());
  }
  return mean;
}

namespace {

EvalCurve Difference(const EvalCurve& a, const EvalCurve& b) {
  EvalCurve d;
  const std::size_t len = std::min(a.k_max(), b.k_max());
  for (std::size_t k = 0; k < len; ++k) {
    d.value.push_back(a.value[k] - b.value[k]);
    d.chance.push_back(a.chance[k] - b.chance[k]);
  }
  return d;
}

void WriteText(const fs::path& path, const std::string& text) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw Error(ErrorKind::kIo, "cannot write " + path.string());
  out << text;
}

}  // namespace

ExperimentSummary RunExperiment(const ExperimentConfig& config, int jobs) {
  if (config.scenario == Scenario::kCheck)
    throw Error(ErrorKind::kConfig, "scenario 'check' has no replicates; use the check command");
  const int n = config.replicates;
  ExperimentSummary summary;
  summary.replicates.resize(static_cast<std::size_t>(n));
  std::vector<std::exception_ptr> failures(static_cast<std::size_t>(n));
  std::atomic<int> next{0};
  auto worker = [&] {
    for (int i = next++; i < n; i = next++) {
      try {
        spdlog::info("{}: replicate {}/{}", config.name, i + 1, n);
        summary.replicates[static_cast<std::size_t>(i)] = RunReplicate(config, i);
      } catch (...) {
        failures[static_cast<std::size_t>(i)] = std::current_exception();
      }
    }
  };
  const int threads = std::clamp(jobs, 1, n);
  if (threads == 1) {
    worker();
  } else {
    std::vector<std::thread> pool;
    for (int t = 0; t < threads; ++t) pool.emplace_back(worker);
    for (auto& t : pool) t.join();
  }
  for (int i = 0; i < n; ++i) {
    if (!failures[static_cast<std::size_t>(i)]) continue;
    try {
      std::rethrow_exception(failures[static_cast<std::size_t>(i)]);
    } catch (const Error& e) {
      throw Error(e.kind(), fmt::format("replicate {}: {}", i, e.what()));
    }
  }

  // Differences per replicate, then means of everything.
  const auto diffs = ScenarioDifferences(config);
  for (ReplicateResult& rep : summary.replicates)
    for (const auto& d : diffs)
      if (rep.curves.count(d.plus) && rep.curves.count(d.minus))
        rep.curves[d.name] = Difference(rep.curves.at(d.plus), rep.curves.at(d.minus));
  std::set<std::string> names;
  for (const auto& [name, curve] : summary.replicates.front().curves) names.insert(name);
  for (const std::string& name : names) {
    std::vector<const EvalCurve*> curves;
    for (const ReplicateResult& rep : summary.replicates)
      if (rep.curves.count(name)) curves.push_back(&rep.curves.at(name));
    summary.mean_curves[name] = MeanCurve(curves);
  }

  // Output.
  const fs::path out = config.output_dir;
  EnsureDirectory(out);
  nlohmann::json js;
  js["name"] = config.name;
  js["replicates"] = n;
  js["master_seed"] = config.master_seed;
  nlohmann::json reps = nlohmann::json::array();
  std::map<std::string, double> stat_sums;
  for (int i = 0; i < n; ++i) {
    const ReplicateResult& rep = summary.replicates[static_cast<std::size_t>(i)];
    const fs::path dir = out / fmt::format("replicate_{:03d}", i);
    for (const auto& [name, curve] : rep.curves) WriteEvalCurve(dir / (name + ".csv"), curve);
    reps.push_back(rep.stats);
    for (const auto& [k, v] : rep.stats) stat_sums[k] += v;
  }
  js["replicate_stats"] = std::move(reps);
  nlohmann::json means;
  for (const auto& [k, v] : stat_sums) means[k] = v / n;
  js["mean_stats"] = std::move(means);
  WriteText(out / "summary.json", js.dump(2) + "\n");

  std::set<std::string> diff_names;
  for (const auto& d : diffs) diff_names.insert(d.name);
  for (const auto& [name, mean] : summary.mean_curves) {
    WriteEvalCurve(out / ("mean_" + name + ".csv"), mean);
    const bool is_diff = diff_names.count(name) > 0;
    LinePlot plot;
    plot.title = config.name + ": " + name;
    plot.y_label = name.rfind("precision", 0) == 0 ? "precision at k" : (is_diff ? "difference in matches found" : "matches ranked within top k");
    plot.zero_line = is_diff;
    for (const ReplicateResult& rep : summary.replicates)
      if (rep.curves.count(name)) plot.series.push_back({rep.curves.at(name).value, "#999999", 1.0, 0.35});
    if (!is_diff) plot.series.push_back({mean.chance, "#1f4fd1", 2.0, 1.0});
    plot.series.push_back({mean.value, is_diff ? "#d11f1f" : "#000000", 2.5, 1.0});
    WriteText(out / (name + ".svg"), RenderSvg(plot));
  }
  return summary;
}

}  // namespace vnreg

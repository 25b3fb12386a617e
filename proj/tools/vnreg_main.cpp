// vnreg command-line driver.
#include <cstdlib>
#include <filesystem>
#include <iomanip>
#include <iostream>
#include <optional>
#include <string>

#include <cli11/CLI11.hpp>
#include <spdlog/sinks/stdout_color_sinks.h>
#include <spdlog/spdlog.h>

#include "vnreg/error.hpp"
#include "vnreg/experiment.hpp"
#include "vnreg/io.hpp"
#include "vnreg/nomination.hpp"
#include "vnreg/regularization.hpp"
#include "vnreg/spectral.hpp"

namespace fs = std::filesystem;
using namespace vnreg;

namespace {

constexpr int kExitOk = 0;
constexpr int kExitConfig = 2;
constexpr int kExitPipeline = 3;
constexpr int kExitIo = 4;

int ExitCodeFor(ErrorKind kind) {
  switch (kind) {
    case ErrorKind::kConfig: return kExitConfig;
    case ErrorKind::kIo:
    case ErrorKind::kParse: return kExitIo;
    default: return kExitPipeline;
  }
}

void ConfigureLogging() {
  auto logger = spdlog::stderr_color_mt("vnreg");
  logger->set_pattern("[%l] %v");
  spdlog::set_default_logger(logger);
  spdlog::set_level(spdlog::level::info);
  if (const char* level = std::getenv("VNREG_LOG")) spdlog::set_level(spdlog::level::from_str(level));
}

struct Common {
  std::string config;
  std::optional<std::uint64_t> seed;
  int jobs = 1;
  std::string out;
  std::optional<int> replicates;
};

ExperimentConfig LoadWithOverrides(const Common& c) {
  ExperimentConfig cfg = LoadExperimentConfig(c.config);
  if (c.seed) cfg.master_seed = *c.seed;
  if (!c.out.empty()) cfg.output_dir = c.out;
  if (c.replicates) {
    if (*c.replicates < 1) throw Error(ErrorKind::kConfig, "--replicates must be >= 1");
    cfg.replicates = *c.replicates;
  }
  return cfg;
}

void PrintMeans(const ExperimentSummary& s, std::size_t k) {
  for (const auto& [name, curve] : s.mean_curves) {
    if (curve.k_max() < k) continue;
    std::cout << name << ": mean at k=" << k << " = " << FormatDouble(curve.value[k - 1])
              << " (chance " << FormatDouble(curve.chance[k - 1]) << ")\n";
  }
}

void PrintSeparation(const SeparationReport& report) {
  for (const auto& m : report.margins)
    std::cout << "  " << m.name << " margin = " << std::setprecision(6) << m.value << (m.value > 0 ? "" : "  (flagged)")
              << '\n';
  std::cout << "  verdict: " << (report.supported() ? "pass" : "flag") << '\n';
}

}  // namespace

int main(int argc, char** argv) {
  ConfigureLogging();
  CLI::App app{"Vertex nomination under block and diffuse contamination"};
  app.require_subcommand(1);

  // simulate / resample-experiment
  Common sim;
  auto* simulate = app.add_subcommand("simulate", "run a simulation config (model_vs_graph or two_stage)");
  auto* resample = app.add_subcommand("resample-experiment", "embed, resample as a GRDPG, add sphere noise, clean, rank");
  for (auto* sc : {simulate, resample}) {
    sc->add_option("--config", sim.config, "TOML experiment config")->required()->check(CLI::ExistingFile);
    sc->add_option("--seed", sim.seed, "override the master seed");
    sc->add_option("--jobs", sim.jobs, "replicates run concurrently")->check(CLI::PositiveNumber);
    sc->add_option("--out", sim.out, "output directory (overrides the config)");
    sc->add_option("--replicates", sim.replicates, "override the replicate count");
  }

  // check
  std::string check_config;
  auto* check = app.add_subcommand("check", "separation conditions for a block matrix and contamination rates");
  check->add_option("--config", check_config, "TOML config with [model] and [block_noise]")->required()->check(CLI::ExistingFile);

  // embed
  std::string embed_edges, embed_out;
  std::optional<int> embed_d;
  int embed_elbow = 1;
  auto* embed = app.add_subcommand("embed", "adjacency spectral embedding of an edge list");
  embed->add_option("edges", embed_edges, "edge list")->required();
  embed->add_option("--d", embed_d, "dimension (default: profile-likelihood elbow)");
  embed->add_option("--elbow", embed_elbow, "which elbow to use when --d is absent");
  embed->add_option("--out", embed_out, "output stem (<stem>.csv, <stem>.json)")->required();

  // clean
  std::string clean_edges, clean_out;
  std::optional<int> clean_d;
  int clean_elbow = 1, clean_k = 2;
  double clean_lambda = kDefaultLambda;
  std::optional<double> clean_r;
  bool clean_sphere = false;
  std::uint64_t clean_seed = 1;
  auto* clean = app.add_subcommand("clean", "robust K-means removal of diffuse noise vertices");
  clean->add_option("edges", clean_edges, "edge list")->required();
  clean->add_option("--d", clean_d, "embedding dimension (default: elbow)");
  clean->add_option("--elbow", clean_elbow, "which elbow to use when --d is absent");
  clean->add_option("--k", clean_k, "number of clusters");
  clean->add_option("--lambda", clean_lambda, "penalty per unclustered vertex");
  clean->add_option("--r-star", clean_r, "maximum cluster radius (default: lambda)");
  clean->add_flag("--sphere", clean_sphere, "cluster the row-normalised embedding");
  clean->add_option("--seed", clean_seed, "random seed");
  clean->add_option("--out", clean_out, "output directory")->required();

  // nominate
  std::string nom_g1, nom_g2, nom_queries, nom_out, nom_seeds;
  std::optional<int> nom_d1, nom_d2, nom_k1, nom_k2, nom_joint_k, nom_clean_k;
  int nom_elbow = 1;
  double nom_lambda = kDefaultLambda;
  std::optional<double> nom_r;
  bool nom_clean = false, nom_no_trim = false;
  std::uint64_t nom_seed = 1;
  auto* nominate = app.add_subcommand("nominate", "rank G2 vertices for each query vertex of G1");
  nominate->add_option("edges_1", nom_g1, "edge list of G1")->required();
  nominate->add_option("edges_2", nom_g2, "edge list of G2")->required();
  nominate->add_option("queries", nom_queries, "G1 query ids, one per line")->required();
  nominate->add_option("--d1", nom_d1, "embedding dimension of G1 (default: elbow)");
  nominate->add_option("--d2", nom_d2, "embedding dimension of G2 (default: elbow)");
  nominate->add_option("--elbow", nom_elbow, "which elbow to use for unset dimensions");
  nominate->add_option("--k1", nom_k1, "clusters in G1 (default: BIC)");
  nominate->add_option("--k2", nom_k2, "clusters in G2 (default: BIC)");
  nominate->add_option("--joint-k", nom_joint_k, "clusters in the joint fit (default: BIC)");
  nominate->add_flag("--clean", nom_clean, "remove diffuse noise from G2 first");
  nominate->add_option("--clean-k", nom_clean_k, "clusters for the cleaning step (default: --k2 or 2)");
  nominate->add_option("--lambda", nom_lambda, "cleaning penalty");
  nominate->add_option("--r-star", nom_r, "cleaning radius (default: lambda)");
  nominate->add_flag("--no-trim", nom_no_trim, "skip block trimming (requires --seeds-file)");
  nominate->add_option("--seeds-file", nom_seeds, "seed pairs 'g1_id g2_id' for Procrustes alignment");
  nominate->add_option("--seed", nom_seed, "random seed");
  nominate->add_option("--out", nom_out, "output CSV")->required();

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    return app.exit(e) == 0 ? kExitOk : kExitConfig;
  }

  try {
    if (simulate->parsed() || resample->parsed()) {
      const ExperimentConfig cfg = LoadWithOverrides(sim);
      const bool want_resample = resample->parsed();
      if (want_resample != (cfg.scenario == Scenario::kResample))
        throw Error(ErrorKind::kConfig, sim.config + ": scenario does not match the '" +
                                            std::string(want_resample ? "resample-experiment" : "simulate") +
                                            "' command");
      const ExperimentSummary s = RunExperiment(cfg, sim.jobs);
      PrintMeans(s, std::min<std::size_t>(cfg.k_max, 50));
      std::cout << "outputs written to " << cfg.output_dir.string() << '\n';
    } else if (check->parsed()) {
      const ExperimentConfig cfg = LoadExperimentConfig(check_config);
      std::cout << "diagonal conditions (A1):\n";
      PrintSeparation(CheckSeparation(cfg.block_matrix, cfg.s_plus, cfg.s_minus, SeparationMode::kDiagonal));
      std::cout << "off-diagonal conditions (A2):\n";
      PrintSeparation(CheckSeparation(cfg.block_matrix, cfg.s_plus, cfg.s_minus, SeparationMode::kOffDiagonal));
    } else if (embed->parsed()) {
      const Graph g = ReadEdgeList(fs::path(embed_edges));
      const AdjacencySpectrum spectrum(g);
      const int d = embed_d ? *embed_d : SelectDimension(spectrum, embed_elbow);
      const Embedding e = spectrum.Embed(d);
      WriteEmbedding(embed_out, e);
      std::cout << "d=" << d << " signature=(" << e.p << "," << e.q << ")\n";
    } else if (clean->parsed()) {
      const Graph g = ReadEdgeList(fs::path(clean_edges));
      CleanConfig cc;
      cc.d = clean_d;
      cc.elbow = clean_elbow;
      cc.sphere_project = clean_sphere;
      cc.robust.k = clean_k;
      cc.robust.lambda = clean_lambda;
      cc.robust.r_star = clean_r.value_or(clean_lambda);
      const CleanOutcome out = RobustClean(g, cc, clean_seed);
      const fs::path dir = clean_out;
      EnsureDirectory(dir);
      WriteEdgeList(dir / "cleaned_edges.txt", out.cleaned);
      std::vector<std::int64_t> kept(out.kept.begin(), out.kept.end());
      WriteLabels(dir / "kept_vertices.txt", kept);
      WriteClusterModel(dir / "model.json", out.model);
      std::cout << "kept " << out.kept.size() << " of " << g.size() << " vertices\n";
    } else if (nominate->parsed()) {
      const Graph g1 = ReadEdgeList(fs::path(nom_g1));
      const Graph g2_full = ReadEdgeList(fs::path(nom_g2));
      const auto raw_queries = ReadLabels(nom_queries);
      std::vector<Vertex> queries(raw_queries.begin(), raw_queries.end());

      Graph g2 = g2_full;
      std::vector<Vertex> ids(static_cast<std::size_t>(g2.size()));
      for (std::size_t i = 0; i < ids.size(); ++i) ids[i] = static_cast<Vertex>(i);
      if (nom_clean) {
        CleanConfig cc;
        cc.d = nom_d2;
        cc.elbow = nom_elbow;
        cc.robust.k = nom_clean_k ? *nom_clean_k : nom_k2.value_or(2);
        cc.robust.lambda = nom_lambda;
        cc.robust.r_star = nom_r.value_or(nom_lambda);
        const CleanOutcome out = RobustClean(g2_full, cc, nom_seed);
        g2 = out.cleaned;
        ids = out.kept;
      }
      JointClusterConfig joint;
      joint.k = nom_joint_k;
      std::vector<NominationList> lists;
      if (!nom_no_trim) {
        TrimConfig tc;
        tc.d1 = nom_d1;
        tc.d2 = nom_d2;
        tc.elbow = nom_elbow;
        tc.k1 = nom_k1;
        tc.k2 = nom_k2;
        const TrimOutcome t = BlockTrim(g1, g2, tc, nom_seed);
        std::vector<Vertex> composed;
        for (Vertex v : t.vertex_map) composed.push_back(ids[v]);
        ids = std::move(composed);
        lists = NominateJointly(t.aligned_embedding_1, t.embedding_2, queries, joint, nom_seed).lists;
      } else {
        if (nom_seeds.empty()) throw Error(ErrorKind::kConfig, "--no-trim needs --seeds-file");
        const AdjacencySpectrum s1(g1);
        const int d = nom_d1 ? *nom_d1 : SelectDimension(s1, nom_elbow);
        std::map<Vertex, Vertex> position;
        for (std::size_t i = 0; i < ids.size(); ++i) position[ids[i]] = static_cast<Vertex>(i);
        std::vector<std::pair<Vertex, Vertex>> seeds;
        for (const auto& [a, b] : ReadVertexPairs(nom_seeds)) {
          const auto it = position.find(b);
          if (it == position.end()) continue;  // removed by cleaning
          seeds.emplace_back(a, it->second);
        }
        lists = NominateWithSeeds(s1.Embed(d).positions, AdjacencySpectralEmbedding(g2, d).positions, seeds, queries,
                                  joint, nom_seed)
                    .nomination.lists;
      }
      WriteNominations(nom_out, lists, {}, ids);
      std::cout << "wrote " << lists.size() << " nomination lists to " << nom_out << '\n';
    }
  } catch (const Error& e) {
    std::cerr << "error (" << ToString(e.kind()) << "): " << e.what() << '\n';
    return ExitCodeFor(e.kind());
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return kExitPipeline;
  }
  return kExitOk;
}

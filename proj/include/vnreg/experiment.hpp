#pragma once

#include <cstdint>
#include <filesystem>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include <Eigen/Core>

#include "vnreg/clustering.hpp"
#include "vnreg/graph.hpp"
#include "vnreg/graph_models.hpp"
#include "vnreg/nomination.hpp"
#include "vnreg/regularization.hpp"

namespace vnreg {

enum class Scenario {
  kModelVsGraph,  // block noise: model trimming against the degree-trimming comparator
  kTwoStage,      // block + diffuse noise: two-stage cleaning against seeded nomination
  kResample,      // resample an embedded graph as a GRDPG, add sphere noise, clean, rank
  kCheck,         // separation conditions only
};

struct RadiusRule {
  // Fixed cluster radius, or (when unset) the largest cluster radius of a
  // GMM clustering of G1 embedded at the dimension used for cleaning.
  std::optional<double> fixed;
};

struct ExperimentConfig {
  Scenario scenario = Scenario::kModelVsGraph;
  std::string name;
  int replicates = 30;
  std::uint64_t master_seed = 1;
  std::size_t k_max = 100;
  std::filesystem::path output_dir = "out";

  // [model]
  Eigen::MatrixXd block_matrix;
  std::vector<Vertex> core_sizes;
  double sparsity = 1.0;
  double rho = 0.7;

  // [block_noise]: W+ and W- each take m / (2K) vertices of every block.
  Vertex block_noise_m = 0;
  double s_plus = 0.2;
  double s_minus = 0.2;

  // [diffuse_noise]
  Vertex diffuse_m = 0;
  NoiseRegion diffuse_region = NoiseRegion::kUnitSphereOrthant;

  // [pipeline]
  std::optional<int> d1;
  std::optional<int> d2;
  int elbow = 1;
  std::optional<int> k1;
  std::optional<int> k2;
  std::optional<int> joint_k;
  KRange k_range{1, 9};
  int seeds = 10;

  // [robust]
  std::optional<int> robust_k;  // defaults to k2
  double lambda = kDefaultLambda;
  RadiusRule r_star;
  int robust_restarts = 10;
  int robust_max_iters = 100;
  bool sphere_project = false;

  // [baseline]
  bool baseline = true;
  double baseline_grid_step = 5.0;
  double baseline_grid_max = 25.0;

  // [resample]
  std::optional<std::filesystem::path> resample_graph;
  std::optional<std::filesystem::path> resample_labels;
  int resample_d = 2;
  Vertex resample_m = 500;
  int resample_k = 2;

  void Validate() const;
};

// TOML parsing; errors carry kConfig and the offending line.
ExperimentConfig ParseExperimentConfig(const std::string& text, const std::string& source = "config");
ExperimentConfig LoadExperimentConfig(const std::filesystem::path& path);

struct ReplicateResult {
  std::map<std::string, EvalCurve> curves;
  std::map<std::string, double> stats;
};

// One replicate of a simulation scenario, seeded from (master seed, index).
ReplicateResult RunReplicate(const ExperimentConfig& config, int replicate);

// Named curve differences reported for a scenario: (name, minuend, subtrahend).
struct CurveDifference {
  std::string name;
  std::string plus;
  std::string minus;
};
std::vector<CurveDifference> ScenarioDifferences(const ExperimentConfig& config);

struct ExperimentSummary {
  std::vector<ReplicateResult> replicates;
  std::map<std::string, EvalCurve> mean_curves;  // includes differences
};

// Runs every replicate (up to `jobs` concurrently) and writes per-replicate
// CSVs, mean and difference CSVs, summary.json and SVG plots to `output_dir`.
ExperimentSummary RunExperiment(const ExperimentConfig& config, int jobs);

// Means over replicates, aligned by k.
EvalCurve MeanCurve(const std::vector<const EvalCurve*>& curves);

// Simulated inputs shared by the scenarios.
struct ContaminatedPair {
  Graph g1;                   // clean graph on the core vertices
  Graph g2;                   // contaminated graph
  std::vector<Vertex> core;   // G2 id of G1 vertex i
  std::vector<int> labels_2;  // 3*block + role for signal vertices, -1 for diffuse noise
  std::vector<int> membership_1;
};

ContaminatedPair SimulateContaminatedPair(const ExperimentConfig& config, std::uint64_t seed);

}  // namespace vnreg

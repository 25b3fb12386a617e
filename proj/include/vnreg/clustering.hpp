#pragma once

#include <cstdint>
#include <limits>
#include <vector>

#include <Eigen/Core>

namespace vnreg {

/// Hard clustering with per-cluster Gaussian summaries.
///
/// Assignment labels are 1..k; 0 marks a point left unclustered (noise).
struct ClusterModel {
  int k = 0;
  Eigen::MatrixXd centers;                  // k x d
  std::vector<Eigen::MatrixXd> covariances;  // k matrices, d x d
  Eigen::VectorXd weights;                   // sums to 1
  std::vector<int> assignments;

  // Fit diagnostics; NaN when not applicable to the producing method.
  double log_likelihood = std::numeric_limits<double>::quiet_NaN();
  double bic = std::numeric_limits<double>::quiet_NaN();
  double objective = std::numeric_limits<double>::quiet_NaN();
  std::vector<double> log_likelihood_trace;

  Eigen::Index dimension() const { return centers.cols(); }
  std::vector<Eigen::Index> Members(int label) const;
  void Validate() const;
};

struct KRange {
  int min = 1;
  int max = 9;
};

struct GmmOptions {
  int restarts = 5;
  int max_iters = 500;
  double rel_tolerance = 1e-7;
  double ridge = 1e-6;  // times trace(Sigma)/d, added every M-step
};

// EM for a k-component full-covariance mixture, best of `restarts`
// k-means++-seeded runs by log-likelihood. Throws kConvergence when every
// restart collapses a component.
ClusterModel FitGmm(const Eigen::MatrixXd& points, int k, std::uint64_t seed,
                    const GmmOptions& options = {});

// FitGmm for every k in range; keeps the fit with the largest
// BIC = 2 loglik - params * ln(n).
ClusterModel GmmBic(const Eigen::MatrixXd& points, KRange range, std::uint64_t seed,
                    const GmmOptions& options = {});

struct KMeansOptions {
  int max_iters = 300;
  int restarts = 1;
};

// Lloyd iterations from k-means++ seeding. `objective` is the within-cluster
// sum of squared distances.
ClusterModel KMeans(const Eigen::MatrixXd& points, int k, std::uint64_t seed,
                    const KMeansOptions& options = {});

struct RobustKmeansConfig {
  int k = 2;
  double lambda = 0.2;
  double r_star = std::numeric_limits<double>::infinity();
  int max_iters = 100;
  int restarts = 10;
  // After the radius heuristic, descend on the objective directly
  // (geometric-median centers, threshold min(lambda, r_star), relocation of
  // empty clusters, single-center swaps onto data points, single-point
  // membership toggles). Off by default: the plain heuristic is the reference
  // behaviour and stays a k-means fixed point when r_star is infinite.
  bool refine = false;

  void Validate() const;
};

inline constexpr double kDefaultLambda = 0.2;

// Sum over clustered points of the distance to the nearest center plus
// lambda per unclustered point.
double RobustObjective(const Eigen::MatrixXd& points, const Eigen::MatrixXd& centers,
                       const std::vector<int>& assignments, double lambda);

// Radius-thresholded k-means; the run with the smallest RobustObjective
// across restarts is returned (stored in `objective`).
ClusterModel RobustKMeans(const Eigen::MatrixXd& points, const RobustKmeansConfig& config,
                          std::uint64_t seed);

// Largest distance from a clustered point to its own center.
double ClusterRadius(const ClusterModel& model, const Eigen::MatrixXd& points);

// r + log(n+m)^2 / sqrt(n+m), logarithm in `log_base` (natural by default).
double SuggestLambda(double cluster_radius, Eigen::Index n_plus_m,
                     double log_base = 2.718281828459045);
double SuggestLambda(const ClusterModel& clean_model, const Eigen::MatrixXd& clean_points,
                     Eigen::Index n_plus_m, double log_base = 2.718281828459045);

struct BlockMatrixEstimate {
  Eigen::MatrixXd matrix;  // clamped to [0, 1]
  bool clamped = false;    // true if any raw entry fell outside [0, 1]
};

// centers * I_{p,q} * centers^T
BlockMatrixEstimate EstimateBlockMatrix(const Eigen::MatrixXd& centers, int p, int q);

// Rows scaled to unit Euclidean norm; throws kDegenerate on a zero row.
Eigen::MatrixXd SphereProject(const Eigen::MatrixXd& points);

// Geometric median (minimiser of the sum of Euclidean distances).
Eigen::RowVectorXd GeometricMedian(const Eigen::MatrixXd& points);

}  // namespace vnreg

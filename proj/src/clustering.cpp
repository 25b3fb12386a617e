#include "vnreg/clustering.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <string>

#include <Eigen/Eigenvalues>

#include "vnreg/error.hpp"
#include "vnreg/linalg.hpp"
#include "vnreg/rng.hpp"

namespace vnreg {

using Eigen::Index;
using Eigen::MatrixXd;
using Eigen::RowVectorXd;
using Eigen::VectorXd;

namespace {

void RequireNonEmpty(const MatrixXd& points, const char* what) {
  if (points.rows() == 0 || points.cols() == 0)
    throw Error(ErrorKind::kValidation, std::string(what) + ": empty input");
}

// Index of the nearest center by squared distance; ties go to the lower index.
int Nearest(const MatrixXd& centers, const RowVectorXd& x, double* dist2) {
  int best = 0;
  double best_d = std::numeric_limits<double>::infinity();
  for (Index j = 0; j < centers.rows(); ++j) {
    const double d = (centers.row(j) - x).squaredNorm();
    if (d < best_d) {
      best_d = d;
      best = static_cast<int>(j);
    }
  }
  if (dist2 != nullptr) *dist2 = best_d;
  return best;
}

MatrixXd KMeansPlusPlus(const MatrixXd& points, int k, Rng& rng) {
  const Index n = points.rows();
  MatrixXd centers(k, points.cols());
  centers.row(0) = points.row(static_cast<Index>(UniformIndex(rng, n)));
  VectorXd d2(n);
  for (Index i = 0; i < n; ++i) d2(i) = (points.row(i) - centers.row(0)).squaredNorm();
  for (int c = 1; c < k; ++c) {
    const double total = d2.sum();
    Index pick = 0;
    if (!(total > 0.0)) {
      pick = static_cast<Index>(UniformIndex(rng, n));
    } else {
      const double target = Uniform01(rng) * total;
      double acc = 0.0;
      pick = n - 1;
      for (Index i = 0; i < n; ++i) {
        acc += d2(i);
        if (acc > target) {
          pick = i;
          break;
        }
      }
    }
    centers.row(c) = points.row(pick);
    for (Index i = 0; i < n; ++i)
      d2(i) = std::min(d2(i), (points.row(i) - centers.row(c)).squaredNorm());
  }
  return centers;
}

// Member means; an empty cluster is moved onto the member point farthest from
// its own center (only if that distance is positive). `labels` are 1-based,
// 0 entries are ignored. Returns true if any center was reseeded.
bool UpdateMeans(const MatrixXd& points, const std::vector<int>& labels, MatrixXd& centers) {
  const Index k = centers.rows();
  MatrixXd sums = MatrixXd::Zero(k, points.cols());
  std::vector<Index> counts(k, 0);
  for (Index i = 0; i < points.rows(); ++i) {
    if (labels[i] == 0) continue;
    sums.row(labels[i] - 1) += points.row(i);
    ++counts[labels[i] - 1];
  }
  bool reseeded = false;
  for (Index j = 0; j < k; ++j) {
    if (counts[j] > 0) {
      centers.row(j) = sums.row(j) / static_cast<double>(counts[j]);
      continue;
    }
    Index far = -1;
    double far_d = 0.0;
    for (Index i = 0; i < points.rows(); ++i) {
      if (labels[i] == 0) continue;
      const double d = (points.row(i) - centers.row(labels[i] - 1)).squaredNorm();
      if (d > far_d) {
        far_d = d;
        far = i;
      }
    }
    if (far >= 0) {
      centers.row(j) = points.row(far);
      reseeded = true;
    }
  }
  return reseeded;
}

struct Summary {
  std::vector<MatrixXd> covariances;
  VectorXd weights;
};

// Per-cluster (biased) sample covariances and member proportions.
Summary Summarise(const MatrixXd& points, const MatrixXd& centers, const std::vector<int>& labels) {
  const Index k = centers.rows(), d = points.cols();
  Summary s;
  s.covariances.assign(k, MatrixXd::Zero(d, d));
  s.weights = VectorXd::Zero(k);
  for (Index i = 0; i < points.rows(); ++i) {
    if (labels[i] == 0) continue;
    const RowVectorXd diff = points.row(i) - centers.row(labels[i] - 1);
    s.covariances[labels[i] - 1] += diff.transpose() * diff;
    s.weights(labels[i] - 1) += 1.0;
  }
  for (Index j = 0; j < k; ++j)
    if (s.weights(j) > 0) s.covariances[j] /= s.weights(j);
  const double total = s.weights.sum();
  if (total > 0) s.weights /= total;
  return s;
}

struct LloydResult {
  MatrixXd centers;
  std::vector<int> labels;  // 1-based
  double cost = 0.0;
};

LloydResult Lloyd(const MatrixXd& points, MatrixXd centers, int max_iters) {
  const Index n = points.rows();
  LloydResult r;
  r.labels.assign(n, 0);
  for (int it = 0; it < max_iters; ++it) {
    bool changed = false;
    for (Index i = 0; i < n; ++i) {
      const int lab = Nearest(centers, points.row(i), nullptr) + 1;
      if (lab != r.labels[i]) {
        r.labels[i] = lab;
        changed = true;
      }
    }
    if (!changed) break;
    UpdateMeans(points, r.labels, centers);
  }
  r.cost = 0.0;
  for (Index i = 0; i < n; ++i) r.cost += (points.row(i) - centers.row(r.labels[i] - 1)).squaredNorm();
  r.centers = std::move(centers);
  return r;
}

// ---------------------------------------------------------------------------
// Gaussian mixture EM

struct EmFit {
  bool ok = false;
  double log_likelihood = -std::numeric_limits<double>::infinity();
  MatrixXd means;
  std::vector<MatrixXd> covs;
  VectorXd weights;
  MatrixXd resp;
  std::vector<double> trace;
};

double RidgeFor(const MatrixXd& cov, double rel, double floor) {
  return std::max(rel * cov.trace() / static_cast<double>(cov.rows()), floor);
}

// log N(x; mean, cov) for every row, via Cholesky.
bool LogDensities(const MatrixXd& points, const RowVectorXd& mean, const MatrixXd& cov,
                  Eigen::Ref<VectorXd> out) {
  Eigen::LLT<MatrixXd> llt(cov);
  if (llt.info() != Eigen::Success) return false;
  const MatrixXd& l = llt.matrixLLT();
  double logdet = 0.0;
  for (Index j = 0; j < l.rows(); ++j) logdet += 2.0 * std::log(l(j, j));
  const double d = static_cast<double>(points.cols());
  const double base = -0.5 * (d * std::log(2.0 * M_PI) + logdet);
  MatrixXd centred = (points.rowwise() - mean).transpose();
  llt.matrixL().solveInPlace(centred);
  out = base - 0.5 * centred.colwise().squaredNorm().transpose().array();
  return true;
}

EmFit RunEm(const MatrixXd& points, const std::vector<int>& init_labels, int k,
            const GmmOptions& options, double ridge_floor) {
  const Index n = points.rows(), d = points.cols();
  EmFit fit;
  fit.means = MatrixXd::Zero(k, d);
  fit.covs.assign(k, MatrixXd::Zero(d, d));
  fit.weights = VectorXd::Zero(k);

  // Parameters from the hard initial partition.
  fit.resp = MatrixXd::Zero(n, k);
  for (Index i = 0; i < n; ++i) fit.resp(i, init_labels[i] - 1) = 1.0;

  MatrixXd logp(n, k);
  auto m_step = [&]() -> bool {
    const VectorXd nk = fit.resp.colwise().sum().transpose();
    for (int j = 0; j < k; ++j) {
      if (nk(j) < 1e-8) return false;
      fit.means.row(j) = (fit.resp.col(j).transpose() * points) / nk(j);
      const MatrixXd centred = points.rowwise() - fit.means.row(j);
      MatrixXd cov = (centred.array().colwise() * fit.resp.col(j).array()).matrix().transpose() * centred / nk(j);
      cov = 0.5 * (cov + cov.transpose());
      cov.diagonal().array() += RidgeFor(cov, options.ridge, ridge_floor);
      fit.covs[j] = std::move(cov);
      fit.weights(j) = nk(j) / static_cast<double>(n);
    }
    return true;
  };
  auto e_step = [&]() -> bool {
    for (int j = 0; j < k; ++j) {
      if (!LogDensities(points, fit.means.row(j), fit.covs[j], logp.col(j))) return false;
      logp.col(j).array() += std::log(fit.weights(j));
    }
    double ll = 0.0;
    for (Index i = 0; i < n; ++i) {
      const double mx = logp.row(i).maxCoeff();
      const double lse = mx + std::log((logp.row(i).array() - mx).exp().sum());
      fit.resp.row(i) = (logp.row(i).array() - lse).exp();
      ll += lse;
    }
    if (!std::isfinite(ll)) return false;
    fit.log_likelihood = ll;
    fit.trace.push_back(ll);
    return true;
  };

  if (!m_step() || !e_step()) return fit;
  for (int it = 0; it < options.max_iters; ++it) {
    const double prev = fit.log_likelihood;
    if (!m_step() || !e_step()) return fit;
    if (std::abs(fit.log_likelihood - prev) <= options.rel_tolerance * std::abs(fit.log_likelihood))
      break;
  }
  fit.ok = true;
  return fit;
}

}  // namespace

std::vector<Index> ClusterModel::Members(int label) const {
  std::vector<Index> out;
  for (std::size_t i = 0; i < assignments.size(); ++i)
    if (assignments[i] == label) out.push_back(static_cast<Index>(i));
  return out;
}

void ClusterModel::Validate() const {
  if (k < 1 || centers.rows() != k || weights.size() != k ||
      static_cast<int>(covariances.size()) != k)
    throw Error(ErrorKind::kValidation, "cluster model: inconsistent cluster count");
  if ((weights.array() < 0).any() || std::abs(weights.sum() - 1.0) > 1e-9)
    throw Error(ErrorKind::kValidation, "cluster model: weights are not a probability vector");
  for (const MatrixXd& c : covariances) {
    if (c.rows() != centers.cols() || c.cols() != centers.cols() ||
        (c - c.transpose()).cwiseAbs().maxCoeff() > 1e-9)
      throw Error(ErrorKind::kValidation, "cluster model: covariance not symmetric");
    if (Eigen::SelfAdjointEigenSolver<MatrixXd>(c, Eigen::EigenvaluesOnly).eigenvalues().minCoeff() < -1e-9)
      throw Error(ErrorKind::kValidation, "cluster model: covariance not positive semidefinite");
  }
  for (int a : assignments)
    if (a < 0 || a > k) throw Error(ErrorKind::kValidation, "cluster model: label out of range");
}

ClusterModel KMeans(const MatrixXd& points, int k, std::uint64_t seed, const KMeansOptions& options) {
  RequireNonEmpty(points, "kmeans");
  if (k < 1 || k > points.rows())
    throw Error(ErrorKind::kValidation, "kmeans: need 1 <= K <= n, got K=" + std::to_string(k));
  LloydResult best;
  best.cost = std::numeric_limits<double>::infinity();
  for (int r = 0; r < std::max(1, options.restarts); ++r) {
    Rng rng(DeriveSeed(seed, {static_cast<std::uint64_t>(r)}));
    LloydResult run = Lloyd(points, KMeansPlusPlus(points, k, rng), options.max_iters);
    if (run.cost < best.cost) best = std::move(run);
  }
  ClusterModel model;
  model.k = k;
  model.centers = best.centers;
  Summary s = Summarise(points, best.centers, best.labels);
  model.covariances = std::move(s.covariances);
  model.weights = std::move(s.weights);
  model.assignments = std::move(best.labels);
  model.objective = best.cost;
  return model;
}

ClusterModel FitGmm(const MatrixXd& points, int k, std::uint64_t seed, const GmmOptions& options) {
  RequireNonEmpty(points, "gmm");
  const Index n = points.rows(), d = points.cols();
  if (k < 1 || k > n) throw Error(ErrorKind::kValidation, "gmm: need 1 <= K <= n");

  const MatrixXd centred = points.rowwise() - points.colwise().mean();
  const double spread = centred.squaredNorm() / static_cast<double>(n * d);
  const double ridge_floor = 1e-12 + 1e-10 * spread;

  EmFit best;
  for (int r = 0; r < std::max(1, options.restarts); ++r) {
    Rng rng(DeriveSeed(seed, {static_cast<std::uint64_t>(k), static_cast<std::uint64_t>(r)}));
    const LloydResult init = Lloyd(points, KMeansPlusPlus(points, k, rng), 20);
    EmFit fit = RunEm(points, init.labels, k, options, ridge_floor);
    if (fit.ok && fit.log_likelihood > best.log_likelihood) best = std::move(fit);
  }
  if (!best.ok)
    throw Error(ErrorKind::kConvergence,
                "gmm: every EM restart degenerated for K=" + std::to_string(k));

  ClusterModel model;
  model.k = k;
  model.centers = best.means;
  model.covariances = best.covs;
  model.weights = best.weights;
  model.assignments.resize(n);
  for (Index i = 0; i < n; ++i) {
    Index arg = 0;
    best.resp.row(i).maxCoeff(&arg);  // first maximum on ties
    model.assignments[i] = static_cast<int>(arg) + 1;
  }
  const double params = (k - 1) + k * d + k * d * (d + 1) / 2.0;
  model.log_likelihood = best.log_likelihood;
  model.bic = 2.0 * best.log_likelihood - params * std::log(static_cast<double>(n));
  model.log_likelihood_trace = std::move(best.trace);
  return model;
}

ClusterModel GmmBic(const MatrixXd& points, KRange range, std::uint64_t seed, const GmmOptions& options) {
  RequireNonEmpty(points, "gmm_bic");
  if (range.min < 1 || range.max < range.min)
    throw Error(ErrorKind::kValidation, "gmm_bic: invalid K range");
  const Index n = points.rows(), d = points.cols();
  if (n <= static_cast<Index>(range.max) * (d + 1))
    throw Error(ErrorKind::kValidation,
                "gmm_bic: need n > max(K)*(d+1); n=" + std::to_string(n) +
                    ", max K=" + std::to_string(range.max) + ", d=" + std::to_string(d));
  ClusterModel best;
  bool have = false;
  for (int k = range.min; k <= range.max; ++k) {
    try {
      ClusterModel m = FitGmm(points, k, seed, options);
      if (!have || m.bic > best.bic) {
        best = std::move(m);
        have = true;
      }
    } catch (const Error& e) {
      if (e.kind() != ErrorKind::kConvergence) throw;
    }
  }
  if (!have) throw Error(ErrorKind::kConvergence, "gmm_bic: EM degenerated for every K in range");
  return best;
}

// ---------------------------------------------------------------------------
// Robust K-means

void RobustKmeansConfig::Validate() const {
  if (k < 1) throw Error(ErrorKind::kValidation, "robust kmeans: K must be >= 1");
  if (!(lambda > 0)) throw Error(ErrorKind::kValidation, "robust kmeans: lambda must be > 0");
  if (!(r_star > 0)) throw Error(ErrorKind::kValidation, "robust kmeans: r_star must be > 0");
  if (max_iters < 1) throw Error(ErrorKind::kValidation, "robust kmeans: max_iters must be >= 1");
  if (restarts < 1) throw Error(ErrorKind::kValidation, "robust kmeans: restarts must be >= 1");
}

double RobustObjective(const MatrixXd& points, const MatrixXd& centers,
                       const std::vector<int>& assignments, double lambda) {
  double total = 0.0;
  for (Index i = 0; i < points.rows(); ++i) {
    if (assignments[i] == 0) {
      total += lambda;
    } else {
      double d2 = 0.0;
      Nearest(centers, points.row(i), &d2);
      total += std::sqrt(d2);
    }
  }
  return total;
}

RowVectorXd GeometricMedian(const MatrixXd& points) {
  RequireNonEmpty(points, "geometric median");
  const Index n = points.rows();
  if (n == 1) return points.row(0);

  // A data point is the median iff the pull of the other points does not
  // exceed its multiplicity.
  for (Index j = 0; j < n; ++j) {
    RowVectorXd pull = RowVectorXd::Zero(points.cols());
    double mult = 0.0;
    for (Index i = 0; i < n; ++i) {
      const RowVectorXd diff = points.row(i) - points.row(j);
      const double len = diff.norm();
      if (len == 0.0) {
        mult += 1.0;
      } else {
        pull += diff / len;
      }
    }
    if (pull.norm() <= mult) return points.row(j);
  }

  // Otherwise the median is off the data and Weiszfeld is well defined.
  RowVectorXd y = points.colwise().mean();
  for (int it = 0; it < 200000; ++it) {
    RowVectorXd num = RowVectorXd::Zero(points.cols());
    double den = 0.0;
    for (Index i = 0; i < n; ++i) {
      const double len = std::max((points.row(i) - y).norm(), 1e-300);
      num += points.row(i) / len;
      den += 1.0 / len;
    }
    const RowVectorXd next = num / den;
    const double step = (next - y).norm();
    y = next;
    if (step <= 1e-15 * (1.0 + y.norm())) break;
  }
  return y;
}

namespace {

struct RobustState {
  MatrixXd centers;
  std::vector<int> labels;
  double objective = std::numeric_limits<double>::infinity();
};

// Labels each point with its nearest center if closer than `threshold`.
void AssignWithin(const MatrixXd& points, const MatrixXd& centers, double threshold,
                  std::vector<int>& labels) {
  for (Index i = 0; i < points.rows(); ++i) {
    double d2 = 0.0;
    const int j = Nearest(centers, points.row(i), &d2);
    labels[i] = std::sqrt(d2) < threshold ? j + 1 : 0;
  }
}

// Block-coordinate descent on the objective itself.
RobustState Descend(const MatrixXd& points, RobustState state, double lambda, double threshold) {
  const Index n = points.rows();
  const Index k = state.centers.rows();
  for (int it = 0; it < 1000; ++it) {
    RobustState next = state;
    for (Index j = 0; j < k; ++j) {
      std::vector<Index> members;
      for (Index i = 0; i < n; ++i)
        if (next.labels[i] == j + 1) members.push_back(i);
      if (!members.empty()) {
        next.centers.row(j) = GeometricMedian(points(members, Eigen::all));
        continue;
      }
      // Unused center: place it on the point paying the most.
      Index worst = -1;
      double worst_cost = 0.0;
      for (Index i = 0; i < n; ++i) {
        double cost = lambda;
        if (next.labels[i] != 0) {
          double d2 = 0.0;
          Nearest(next.centers, points.row(i), &d2);
          cost = std::sqrt(d2);
        }
        if (cost > worst_cost) {
          worst_cost = cost;
          worst = i;
        }
      }
      if (worst >= 0) next.centers.row(j) = points.row(worst);
    }
    AssignWithin(points, next.centers, threshold, next.labels);
    next.objective = RobustObjective(points, next.centers, next.labels, lambda);
    if (!(next.objective < state.objective - 1e-15 * std::max(1.0, state.objective))) break;
    state = std::move(next);
  }
  return state;
}

// Descent plus two move types, each kept only if the objective drops:
// moving one center onto a data point, and adding or removing one point from
// a cluster before recentering it on the geometric median. Swaps let a
// center leave a cheap outlier that the k-means start gave it; membership
// moves reach off-data centers that no single center update can.
RobustState Refine(const MatrixXd& points, RobustState state, double lambda, double r_star) {
  const double threshold = std::min(lambda, r_star);
  const Index n = points.rows();
  const Index k = state.centers.rows();
  state = Descend(points, std::move(state), lambda, threshold);
  auto try_move = [&](RobustState cand) {
    AssignWithin(points, cand.centers, threshold, cand.labels);
    cand.objective = RobustObjective(points, cand.centers, cand.labels, lambda);
    if (!(cand.objective < state.objective - 1e-12 * std::max(1.0, state.objective))) return false;
    state = Descend(points, std::move(cand), lambda, threshold);
    return true;
  };
  for (bool improved = true; improved;) {
    improved = false;
    for (Index j = 0; j < k && !improved; ++j) {
      for (Index i = 0; i < n && !improved; ++i) {
        RobustState cand = state;
        cand.centers.row(j) = points.row(i);
        improved = try_move(std::move(cand));
      }
    }
    for (Index j = 0; j < k && !improved; ++j) {
      for (Index i = 0; i < n && !improved; ++i) {
        std::vector<Index> members;
        for (Index v = 0; v < n; ++v)
          if ((state.labels[v] == j + 1) != (v == i)) members.push_back(v);
        if (members.empty()) continue;
        RobustState cand = state;
        cand.centers.row(j) = GeometricMedian(points(members, Eigen::all));
        improved = try_move(std::move(cand));
      }
    }
  }
  return state;
}

}  // namespace

ClusterModel RobustKMeans(const MatrixXd& points, const RobustKmeansConfig& config, std::uint64_t seed) {
  config.Validate();
  RequireNonEmpty(points, "robust kmeans");
  const Index n = points.rows();
  if (config.k > n) throw Error(ErrorKind::kValidation, "robust kmeans: K exceeds point count");

  RobustState best;
  for (int r = 0; r < config.restarts; ++r) {
    const ClusterModel init = KMeans(points, config.k, DeriveSeed(seed, {static_cast<std::uint64_t>(r)}));
    MatrixXd centers = init.centers;
    std::vector<int> labels = init.assignments;
    RobustState run;
    for (int it = 0; it < config.max_iters; ++it) {
      UpdateMeans(points, labels, centers);
      std::vector<int> next(n);
      for (Index i = 0; i < n; ++i) {
        double d2 = 0.0;
        const int j = Nearest(centers, points.row(i), &d2);
        next[i] = std::sqrt(d2) < config.r_star ? j + 1 : 0;
      }
      const bool stable = next == labels;
      labels = std::move(next);
      const double objective = RobustObjective(points, centers, labels, config.lambda);
      // The radius rule can increase the objective; keep the best state seen.
      if (objective < run.objective) run = RobustState{centers, labels, objective};
      if (stable) break;
    }
    if (config.refine) run = Refine(points, std::move(run), config.lambda, config.r_star);
    if (run.objective < best.objective) best = std::move(run);
  }

  if (std::all_of(best.labels.begin(), best.labels.end(), [](int l) { return l == 0; }))
    throw Error(ErrorKind::kDegenerate, "robust kmeans: every point left unclustered");

  ClusterModel model;
  model.k = config.k;
  model.centers = best.centers;
  Summary s = Summarise(points, best.centers, best.labels);
  model.covariances = std::move(s.covariances);
  model.weights = std::move(s.weights);
  model.assignments = std::move(best.labels);
  model.objective = best.objective;
  return model;
}

double ClusterRadius(const ClusterModel& model, const MatrixXd& points) {
  if (static_cast<Index>(model.assignments.size()) != points.rows())
    throw Error(ErrorKind::kDimension, "cluster radius: assignments do not cover the points");
  double r = 0.0;
  for (Index i = 0; i < points.rows(); ++i) {
    const int lab = model.assignments[i];
    if (lab == 0) continue;
    r = std::max(r, (points.row(i) - model.centers.row(lab - 1)).norm());
  }
  return r;
}

double SuggestLambda(double cluster_radius, Index n_plus_m, double log_base) {
  if (n_plus_m < 1) throw Error(ErrorKind::kValidation, "suggest lambda: n+m must be >= 1");
  const double l = std::log(static_cast<double>(n_plus_m)) / std::log(log_base);
  return cluster_radius + l * l / std::sqrt(static_cast<double>(n_plus_m));
}

double SuggestLambda(const ClusterModel& clean_model, const MatrixXd& clean_points, Index n_plus_m,
                     double log_base) {
  if (clean_model.k < 1) throw Error(ErrorKind::kValidation, "suggest lambda: model has no clusters");
  return SuggestLambda(ClusterRadius(clean_model, clean_points), n_plus_m, log_base);
}

BlockMatrixEstimate EstimateBlockMatrix(const MatrixXd& centers, int p, int q) {
  if (p + q != centers.cols())
    throw Error(ErrorKind::kDimension, "estimate block matrix: signature does not match dimension");
  BlockMatrixEstimate est;
  const MatrixXd raw = centers * SignatureDiagonal(p, q).asDiagonal() * centers.transpose();
  est.clamped = (raw.array() < 0.0).any() || (raw.array() > 1.0).any();
  est.matrix = raw.cwiseMax(0.0).cwiseMin(1.0);
  return est;
}

MatrixXd SphereProject(const MatrixXd& points) {
  MatrixXd out = points;
  for (Index i = 0; i < points.rows(); ++i) {
    const double len = points.row(i).norm();
    if (!(len > 0.0))
      throw Error(ErrorKind::kDegenerate, "sphere project: row " + std::to_string(i) + " has zero norm");
    out.row(i) /= len;
  }
  return out;
}

}  // namespace vnreg

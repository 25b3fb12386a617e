#include "vnreg/nomination.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <string>

#include "vnreg/error.hpp"
#include "vnreg/linalg.hpp"
#include "vnreg/rng.hpp"

namespace vnreg {

using Eigen::Index;
using Eigen::MatrixXd;
using Eigen::RowVectorXd;

std::optional<std::size_t> NominationList::RankOf(Vertex candidate) const {
  const auto it = std::find(candidates.begin(), candidates.end(), candidate);
  if (it == candidates.end()) return std::nullopt;
  return static_cast<std::size_t>(it - candidates.begin()) + 1;
}

double MahalanobisScore(const RowVectorXd& u, const RowVectorXd& v, const MatrixXd& pinv_u,
                        const MatrixXd& pinv_v) {
  const RowVectorXd diff = u - v;
  const double du = (diff * pinv_u * diff.transpose())(0, 0);
  const double dv = (diff * pinv_v * diff.transpose())(0, 0);
  return std::max(std::sqrt(std::max(du, 0.0)), std::sqrt(std::max(dv, 0.0)));
}

namespace {

NominationList SortedList(Vertex query, std::vector<Vertex> ids, std::vector<double> scores) {
  std::vector<std::size_t> order(ids.size());
  std::iota(order.begin(), order.end(), 0);
  std::sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
    return scores[a] < scores[b] || (scores[a] == scores[b] && ids[a] < ids[b]);
  });
  NominationList list;
  list.query = query;
  list.candidates.reserve(ids.size());
  list.scores.reserve(ids.size());
  for (std::size_t i : order) {
    list.candidates.push_back(ids[i]);
    list.scores.push_back(scores[i]);
  }
  return list;
}

}  // namespace

std::vector<NominationList> MahalanobisRank(const ClusterModel& joint, const MatrixXd& points_1,
                                            const MatrixXd& points_2, std::span<const Vertex> queries,
                                            QueryAggregation aggregation) {
  const Index n1 = points_1.rows(), n2 = points_2.rows();
  if (static_cast<Index>(joint.assignments.size()) != n1 + n2)
    throw Error(ErrorKind::kDimension, "nominate: joint model must cover both point sets");
  if (points_1.cols() != points_2.cols())
    throw Error(ErrorKind::kDimension, "nominate: point sets differ in dimension");
  if (queries.empty()) throw Error(ErrorKind::kQuery, "nominate: no queries");

  std::vector<MatrixXd> pinv;
  pinv.reserve(joint.covariances.size());
  for (const MatrixXd& c : joint.covariances) pinv.push_back(SymmetricPseudoInverse(c));

  for (Vertex u : queries) {
    if (u < 0 || u >= n1)
      throw Error(ErrorKind::kQuery, "nominate: query " + std::to_string(u) + " out of range");
    if (joint.assignments[u] == 0)
      throw Error(ErrorKind::kQuery, "nominate: query " + std::to_string(u) + " is unclustered");
  }

  std::vector<Vertex> candidates;
  for (Index v = 0; v < n2; ++v)
    if (joint.assignments[n1 + v] != 0) candidates.push_back(v);

  auto score = [&](Vertex u, Vertex v) {
    return MahalanobisScore(points_1.row(u), points_2.row(v), pinv[joint.assignments[u] - 1],
                            pinv[joint.assignments[n1 + v] - 1]);
  };

  std::vector<NominationList> lists;
  if (aggregation == QueryAggregation::kPerQuery) {
    lists.reserve(queries.size());
    for (Vertex u : queries) {
      std::vector<double> s(candidates.size());
      for (std::size_t i = 0; i < candidates.size(); ++i) s[i] = score(u, candidates[i]);
      lists.push_back(SortedList(u, candidates, std::move(s)));
    }
  } else {
    std::vector<double> s(candidates.size(), std::numeric_limits<double>::infinity());
    for (Vertex u : queries)
      for (std::size_t i = 0; i < candidates.size(); ++i) s[i] = std::min(s[i], score(u, candidates[i]));
    lists.push_back(SortedList(queries.front(), candidates, std::move(s)));
  }
  return lists;
}

JointNomination NominateJointly(const MatrixXd& points_1, const MatrixXd& points_2,
                                std::span<const Vertex> queries, const JointClusterConfig& config,
                                std::uint64_t seed) {
  if (points_1.cols() != points_2.cols())
    throw Error(ErrorKind::kDimension, "nominate: point sets differ in dimension");
  MatrixXd stacked(points_1.rows() + points_2.rows(), points_1.cols());
  stacked << points_1, points_2;
  JointNomination out;
  try {
    out.joint = config.k ? FitGmm(stacked, *config.k, seed, config.gmm)
                         : GmmBic(stacked, config.k_range, seed, config.gmm);
  } catch (const Error& e) {
    RethrowWithStage(e, "joint clustering");
  }
  out.lists = MahalanobisRank(out.joint, points_1, points_2, queries);
  return out;
}

SeededNomination NominateWithSeeds(const MatrixXd& embedding_1, const MatrixXd& embedding_2,
                                   std::span<const std::pair<Vertex, Vertex>> seeds,
                                   std::span<const Vertex> queries, const JointClusterConfig& config,
                                   std::uint64_t seed) {
  if (seeds.empty()) throw Error(ErrorKind::kValidation, "seeded nomination: at least one seed pair required");
  if (embedding_1.cols() != embedding_2.cols())
    throw Error(ErrorKind::kDimension, "seeded nomination: embeddings differ in dimension");
  const Index d = embedding_1.cols();
  MatrixXd source(static_cast<Index>(seeds.size()), d), target(static_cast<Index>(seeds.size()), d);
  for (std::size_t i = 0; i < seeds.size(); ++i) {
    const auto [a, b] = seeds[i];
    if (a < 0 || a >= embedding_1.rows() || b < 0 || b >= embedding_2.rows())
      throw Error(ErrorKind::kValidation, "seeded nomination: seed pair out of range");
    source.row(static_cast<Index>(i)) = embedding_1.row(a);
    target.row(static_cast<Index>(i)) = embedding_2.row(b);
  }
  SeededNomination out;
  out.alignment = ProcrustesAlign(source, target, embedding_1);
  out.nomination = NominateJointly(out.alignment.aligned, embedding_2, queries, config, seed);
  return out;
}

EvalCurve RankAtKCurve(std::span<const NominationList> lists, const std::map<Vertex, Vertex>& truth,
                       std::size_t candidate_count, std::size_t k_max) {
  if (candidate_count == 0) throw Error(ErrorKind::kValidation, "rank-at-k: no candidates");
  EvalCurve curve;
  curve.value.assign(k_max, 0.0);
  curve.chance.resize(k_max);
  std::vector<double> hits(k_max + 1, 0.0);
  for (const NominationList& list : lists) {
    const auto it = truth.find(list.query);
    if (it == truth.end())
      throw Error(ErrorKind::kCoverage, "rank-at-k: no true match for query " + std::to_string(list.query));
    const auto rank = list.RankOf(it->second);
    if (rank && *rank <= k_max) hits[*rank - 1] += 1.0;
  }
  double running = 0.0;
  const double queries = static_cast<double>(lists.size());
  for (std::size_t k = 0; k < k_max; ++k) {
    running += hits[k];
    curve.value[k] = running;
    curve.chance[k] = queries * static_cast<double>(k + 1) / static_cast<double>(candidate_count);
  }
  return curve;
}

std::map<std::int64_t, EvalCurve> PrecisionAtK(std::span<const NominationList> lists,
                                               const std::map<Vertex, std::int64_t>& query_labels,
                                               const std::map<Vertex, std::int64_t>& candidate_labels,
                                               std::size_t k_max) {
  std::map<std::int64_t, double> class_share;
  for (const auto& [v, c] : candidate_labels) class_share[c] += 1.0;
  for (auto& [c, share] : class_share) share /= static_cast<double>(candidate_labels.size());

  std::map<std::int64_t, EvalCurve> curves;
  std::map<std::int64_t, double> counts;
  for (const NominationList& list : lists) {
    const auto q = query_labels.find(list.query);
    if (q == query_labels.end())
      throw Error(ErrorKind::kCoverage, "precision-at-k: query " + std::to_string(list.query) + " has no label");
    EvalCurve& curve = curves[q->second];
    if (curve.value.empty()) {
      curve.value.assign(k_max, 0.0);
      const auto share = class_share.find(q->second);
      curve.chance.assign(k_max, share == class_share.end() ? 0.0 : share->second);
    }
    counts[q->second] += 1.0;
    double same = 0.0;
    for (std::size_t k = 0; k < k_max; ++k) {
      if (k < list.candidates.size()) {
        const auto c = candidate_labels.find(list.candidates[k]);
        if (c != candidate_labels.end() && c->second == q->second) same += 1.0;
      }
      curve.value[k] += same / static_cast<double>(k + 1);
    }
  }
  for (auto& [c, curve] : curves)
    for (double& v : curve.value) v /= counts[c];
  return curves;
}

}  // namespace vnreg

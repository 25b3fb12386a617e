#pragma once

#include <cstdint>
#include <map>
#include <optional>
#include <span>
#include <utility>
#include <vector>

#include <Eigen/Core>

#include "vnreg/clustering.hpp"
#include "vnreg/graph.hpp"
#include "vnreg/regularization.hpp"

namespace vnreg {

/// Candidates for one query, best first. Scores never decrease down the list.
struct NominationList {
  Vertex query = 0;
  std::vector<Vertex> candidates;
  std::vector<double> scores;

  // 1-based position of `candidate`, or nullopt if it was not ranked.
  std::optional<std::size_t> RankOf(Vertex candidate) const;
};

// max of the two covariance-weighted distances, each using the pseudoinverse
// of the covariance of one endpoint's cluster.
double MahalanobisScore(const Eigen::RowVectorXd& u, const Eigen::RowVectorXd& v,
                        const Eigen::MatrixXd& pinv_u, const Eigen::MatrixXd& pinv_v);

enum class QueryAggregation {
  kPerQuery,        // one list per query
  kMinOverQueries,  // a single list scored by the closest query
};

// Ranks the clustered rows of points_2 for each query row of points_1.
// `joint` must be fitted on [points_1; points_2]. Candidate ids are row
// indices of points_2; ties go to the smaller id.
std::vector<NominationList> MahalanobisRank(const ClusterModel& joint, const Eigen::MatrixXd& points_1,
                                            const Eigen::MatrixXd& points_2,
                                            std::span<const Vertex> queries,
                                            QueryAggregation aggregation = QueryAggregation::kPerQuery);

struct JointClusterConfig {
  std::optional<int> k;  // BIC selection over k_range when unset
  KRange k_range{1, 9};
  GmmOptions gmm;
};

struct JointNomination {
  std::vector<NominationList> lists;
  ClusterModel joint;
};

// Clusters the stacked rows and ranks.
JointNomination NominateJointly(const Eigen::MatrixXd& points_1, const Eigen::MatrixXd& points_2,
                                std::span<const Vertex> queries, const JointClusterConfig& config,
                                std::uint64_t seed);

struct SeededNomination {
  JointNomination nomination;
  ProcrustesResult alignment;
};

// Aligns embedding_1 to embedding_2 by Procrustes on the seed rows
// (pairs of (row in embedding_1, row in embedding_2)), then NominateJointly.
SeededNomination NominateWithSeeds(const Eigen::MatrixXd& embedding_1, const Eigen::MatrixXd& embedding_2,
                                   std::span<const std::pair<Vertex, Vertex>> seeds,
                                   std::span<const Vertex> queries, const JointClusterConfig& config,
                                   std::uint64_t seed);

struct EvalCurve {
  std::vector<double> value;   // index k-1
  std::vector<double> chance;  // index k-1

  std::size_t k_max() const { return value.size(); }
};

// value[k] = number of queries whose true match is ranked within the top k;
// chance[k] = (#queries) * k / candidate_count. `truth` maps query id to the
// true candidate id.
EvalCurve RankAtKCurve(std::span<const NominationList> lists, const std::map<Vertex, Vertex>& truth,
                       std::size_t candidate_count, std::size_t k_max);

// Per query class: mean over that class's queries of the share of the top k
// candidates with the query's class. chance is the class's share of all
// labelled candidates.
std::map<std::int64_t, EvalCurve> PrecisionAtK(std::span<const NominationList> lists,
                                               const std::map<Vertex, std::int64_t>& query_labels,
                                               const std::map<Vertex, std::int64_t>& candidate_labels,
                                               std::size_t k_max);

}  // namespace vnreg

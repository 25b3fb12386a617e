#pragma once

#include <filesystem>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include <Eigen/Core>

#include "vnreg/clustering.hpp"
#include "vnreg/graph.hpp"
#include "vnreg/nomination.hpp"
#include "vnreg/regularization.hpp"
#include "vnreg/spectral.hpp"

namespace vnreg {

// Shortest decimal text that parses back to the same double.
std::string FormatDouble(double x);

// Matrix as CSV with header dim_1..dim_d.
void WriteMatrixCsv(const std::filesystem::path& path, const Eigen::MatrixXd& m);
Eigen::MatrixXd ReadMatrixCsv(const std::filesystem::path& path);

// <stem>.csv holds the positions, <stem>.json the signature and singular values.
void WriteEmbedding(const std::filesystem::path& stem, const Embedding& e);

std::string ClusterModelJson(const ClusterModel& model);
void WriteClusterModel(const std::filesystem::path& path, const ClusterModel& model);

// Directory with trimmed_edges.txt, vertex_map.csv, match.json,
// aligned_embedding_1.csv and embedding_2.csv.
void WriteTrimOutcome(const std::filesystem::path& dir, const TrimOutcome& outcome);

// query_id,rank,candidate_id,score. Ids are translated through the maps when
// given (index -> original id).
void WriteNominations(const std::filesystem::path& path, std::span<const NominationList> lists,
                      std::span<const Vertex> query_ids = {}, std::span<const Vertex> candidate_ids = {});

// k,value,chance
void WriteEvalCurve(const std::filesystem::path& path, const EvalCurve& curve);
EvalCurve ReadEvalCurve(const std::filesystem::path& path);

// Whitespace-separated vertex pairs, one per line; '#' comments.
std::vector<std::pair<Vertex, Vertex>> ReadVertexPairs(const std::filesystem::path& path);

// Creates parent directories; throws kIo on failure.
void EnsureDirectory(const std::filesystem::path& dir);

}  // namespace vnreg

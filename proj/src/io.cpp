#include "vnreg/io.hpp"

#include <charconv>
#include <cmath>
#include <fstream>
#include <sstream>

#include <nlohmann/json.hpp>

#include "vnreg/error.hpp"

namespace vnreg {

namespace fs = std::filesystem;
using Eigen::Index;
using Eigen::MatrixXd;
using nlohmann::json;

std::string FormatDouble(double x) {
  char buf[64];
  const auto res = std::to_chars(buf, buf + sizeof(buf), x);
  return std::string(buf, res.ptr);
}

namespace {

std::ofstream OpenOut(const fs::path& path) {
  if (path.has_parent_path()) EnsureDirectory(path.parent_path());
  std::ofstream out(path, std::ios::binary);
  if (!out) throw Error(ErrorKind::kIo, "cannot write " + path.string());
  return out;
}

std::ifstream OpenIn(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error(ErrorKind::kIo, "cannot open " + path.string());
  return in;
}

json MatrixJson(const MatrixXd& m) {
  json rows = json::array();
  for (Index i = 0; i < m.rows(); ++i) {
    json row = json::array();
    for (Index j = 0; j < m.cols(); ++j) row.push_back(m(i, j));
    rows.push_back(std::move(row));
  }
  return rows;
}

std::vector<std::string> SplitCsv(const std::string& line) {
  std::vector<std::string> fields;
  std::stringstream ss(line);
  std::string f;
  while (std::getline(ss, f, ',')) fields.push_back(f);
  return fields;
}

double ParseDouble(const std::string& s, const fs::path& path, std::size_t line_no) {
  double v = 0.0;
  const auto res = std::from_chars(s.data(), s.data() + s.size(), v);
  if (res.ec != std::errc() || res.ptr != s.data() + s.size())
    throw Error(ErrorKind::kParse, path.string() + ": line " + std::to_string(line_no) + ": bad number '" + s + "'");
  return v;
}

}  // namespace

void EnsureDirectory(const fs::path& dir) {
  std::error_code ec;
  fs::create_directories(dir, ec);
  if (ec) throw Error(ErrorKind::kIo, "cannot create directory " + dir.string() + ": " + ec.message());
}

void WriteMatrixCsv(const fs::path& path, const MatrixXd& m) {
  std::ofstream out = OpenOut(path);
  for (Index j = 0; j < m.cols(); ++j) out << (j ? "," : "") << "dim_" << j + 1;
  out << '\n';
  for (Index i = 0; i < m.rows(); ++i) {
    for (Index j = 0; j < m.cols(); ++j) out << (j ? "," : "") << FormatDouble(m(i, j));
    out << '\n';
  }
}

MatrixXd ReadMatrixCsv(const fs::path& path) {
  std::ifstream in = OpenIn(path);
  std::string line;
  if (!std::getline(in, line)) throw Error(ErrorKind::kParse, path.string() + ": missing header");
  const std::size_t cols = SplitCsv(line).size();
  std::vector<double> values;
  std::size_t rows = 0, line_no = 1;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.empty()) continue;
    const auto fields = SplitCsv(line);
    if (fields.size() != cols)
      throw Error(ErrorKind::kParse, path.string() + ": line " + std::to_string(line_no) + ": expected " +
                                         std::to_string(cols) + " fields");
    for (const auto& f : fields) values.push_back(ParseDouble(f, path, line_no));
    ++rows;
  }
  MatrixXd m(static_cast<Index>(rows), static_cast<Index>(cols));
  for (std::size_t i = 0; i < rows; ++i)
    for (std::size_t j = 0; j < cols; ++j) m(static_cast<Index>(i), static_cast<Index>(j)) = values[i * cols + j];
  return m;
}

void WriteEmbedding(const fs::path& stem, const Embedding& e) {
  fs::path csv = stem, meta = stem;
  csv += ".csv";
  meta += ".json";
  WriteMatrixCsv(csv, e.positions);
  json j;
  j["p"] = e.p;
  j["q"] = e.q;
  j["singular_values"] = std::vector<double>(e.singular_values.data(),
                                             e.singular_values.data() + e.singular_values.size());
  j["eigenvalues"] = std::vector<double>(e.eigenvalues.data(), e.eigenvalues.data() + e.eigenvalues.size());
  OpenOut(meta) << j.dump(2) << '\n';
}

std::string ClusterModelJson(const ClusterModel& model) {
  json j;
  j["K"] = model.k;
  j["centers"] = MatrixJson(model.centers);
  json covs = json::array();
  for (const MatrixXd& c : model.covariances) covs.push_back(MatrixJson(c));
  j["covariances"] = std::move(covs);
  j["weights"] = std::vector<double>(model.weights.data(), model.weights.data() + model.weights.size());
  j["assignments"] = model.assignments;
  if (!std::isnan(model.bic)) j["bic"] = model.bic;
  if (!std::isnan(model.objective)) j["objective"] = model.objective;
  return j.dump(2);
}

void WriteClusterModel(const fs::path& path, const ClusterModel& model) {
  OpenOut(path) << ClusterModelJson(model) << '\n';
}

void WriteTrimOutcome(const fs::path& dir, const TrimOutcome& outcome) {
  EnsureDirectory(dir);
  WriteEdgeList(dir / "trimmed_edges.txt", outcome.trimmed_graph);
  {
    std::ofstream out = OpenOut(dir / "vertex_map.csv");
    out << "retained_index,original_index\n";
    for (std::size_t i = 0; i < outcome.vertex_map.size(); ++i) out << i << ',' << outcome.vertex_map[i] << '\n';
  }
  json m;
  m["mapping"] = outcome.match.mapping;
  m["objective"] = outcome.match.objective;
  m["retained_blocks"] = outcome.match.retained_blocks;
  m["d1"] = outcome.d1;
  m["d2"] = outcome.d2;
  m["signature_1"] = {outcome.p1, outcome.q1};
  m["signature_2"] = {outcome.p2, outcome.q2};
  m["block_matrix_1"] = MatrixJson(outcome.block_matrix_1);
  m["block_matrix_2"] = MatrixJson(outcome.block_matrix_2);
  m["clamped"] = outcome.clamped;
  m["procrustes_rank_deficient"] = outcome.rank_deficient;
  OpenOut(dir / "match.json") << m.dump(2) << '\n';
  WriteMatrixCsv(dir / "aligned_embedding_1.csv", outcome.aligned_embedding_1);
  WriteMatrixCsv(dir / "embedding_2.csv", outcome.embedding_2);
}

void WriteNominations(const fs::path& path, std::span<const NominationList> lists,
                      std::span<const Vertex> query_ids, std::span<const Vertex> candidate_ids) {
  std::ofstream out = OpenOut(path);
  out << "query_id,rank,candidate_id,score\n";
  for (const NominationList& list : lists) {
    const Vertex q = query_ids.empty() ? list.query : query_ids[list.query];
    for (std::size_t r = 0; r < list.candidates.size(); ++r) {
      const Vertex c = candidate_ids.empty() ? list.candidates[r] : candidate_ids[list.candidates[r]];
      out << q << ',' << r + 1 << ',' << c << ',' << FormatDouble(list.scores[r]) << '\n';
    }
  }
}

void WriteEvalCurve(const fs::path& path, const EvalCurve& curve) {
  std::ofstream out = OpenOut(path);
  out << "k,value,chance\n";
  for (std::size_t k = 0; k < curve.k_max(); ++k)
    out << k + 1 << ',' << FormatDouble(curve.value[k]) << ',' << FormatDouble(curve.chance[k]) << '\n';
}

EvalCurve ReadEvalCurve(const fs::path& path) {
  std::ifstream in = OpenIn(path);
  std::string line;
  std::getline(in, line);
  EvalCurve curve;
  std::size_t line_no = 1;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.empty()) continue;
    const auto f = SplitCsv(line);
    if (f.size() != 3) throw Error(ErrorKind::kParse, path.string() + ": line " + std::to_string(line_no));
    curve.value.push_back(ParseDouble(f[1], path, line_no));
    curve.chance.push_back(ParseDouble(f[2], path, line_no));
  }
  return curve;
}

std::vector<std::pair<Vertex, Vertex>> ReadVertexPairs(const fs::path& path) {
  std::ifstream in = OpenIn(path);
  std::vector<std::pair<Vertex, Vertex>> pairs;
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    const auto first = line.find_first_not_of(" \t\r");
    if (first == std::string::npos || line[first] == '#') continue;
    std::istringstream ss(line);
    Vertex a = 0, b = 0;
    std::string rest;
    if (!(ss >> a >> b) || (ss >> rest) || a < 0 || b < 0)
      throw Error(ErrorKind::kParse, path.string() + ": line " + std::to_string(line_no) +
                                         ": expected two non-negative vertex ids");
    pairs.emplace_back(a, b);
  }
  return pairs;
}

}  // namespace vnreg

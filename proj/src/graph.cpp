#include "vnreg/graph.hpp"

#include <algorithm>
#include <charconv>
#include <fstream>
#include <istream>
#include <ostream>
#include <sstream>
#include <string>

#include "vnreg/error.hpp"

namespace vnreg {

Graph::Graph(Vertex n) : n_(n) {
  if (n < 0) throw Error(ErrorKind::kValidation, "negative vertex count");
  adjacency_.assign(static_cast<std::size_t>(n * n), 0);
}

Graph Graph::Complete(Vertex n) {
  Graph g(n);
  for (Vertex u = 0; u < n; ++u)
    for (Vertex v = u + 1; v < n; ++v) g.SetEdge(u, v, true);
  return g;
}

Graph Graph::FromEdges(Vertex n, std::span<const std::pair<Vertex, Vertex>> edges) {
  Graph g(n);
  for (const auto& [u, v] : edges) {
    if (u < 0 || v < 0 || u >= n || v >= n)
      throw Error(ErrorKind::kValidation, "edge endpoint out of range");
    if (u == v) throw Error(ErrorKind::kValidation, "self-loop not allowed");
    g.SetEdge(u, v, true);
  }
  return g;
}

void Graph::SetEdge(Vertex u, Vertex v, bool present) {
  if (u < 0 || v < 0 || u >= n_ || v >= n_) throw Error(ErrorKind::kValidation, "edge endpoint out of range");
  if (u == v) throw Error(ErrorKind::kValidation, "self-loop not allowed");
  const std::uint8_t value = present ? 1 : 0;
  adjacency_[static_cast<std::size_t>(u * n_ + v)] = value;
  adjacency_[static_cast<std::size_t>(v * n_ + u)] = value;
}

Vertex Graph::Degree(Vertex v) const {
  const auto* row = adjacency_.data() + v * n_;
  return std::count(row, row + n_, std::uint8_t{1});
}

std::vector<Vertex> Graph::Degrees() const {
  std::vector<Vertex> deg(static_cast<std::size_t>(n_));
  for (Vertex v = 0; v < n_; ++v) deg[static_cast<std::size_t>(v)] = Degree(v);
  return deg;
}

std::int64_t Graph::EdgeCount() const {
  std::int64_t twice = std::count(adjacency_.begin(), adjacency_.end(), std::uint8_t{1});
  return twice / 2;
}

std::vector<std::pair<Vertex, Vertex>> Graph::Edges() const {
  std::vector<std::pair<Vertex, Vertex>> out;
  for (Vertex u = 0; u < n_; ++u)
    for (Vertex v = u + 1; v < n_; ++v)
      if (HasEdge(u, v)) out.emplace_back(u, v);
  return out;
}

Eigen::MatrixXd Graph::ToDense() const {
  Eigen::MatrixXd a(n_, n_);
  for (Vertex j = 0; j < n_; ++j)
    for (Vertex i = 0; i < n_; ++i) a(i, j) = adjacency_[static_cast<std::size_t>(i * n_ + j)];
  return a;
}

Graph Graph::Induced(std::span<const Vertex> vertices) const {
  const auto k = static_cast<Vertex>(vertices.size());
  Graph sub(k);
  for (Vertex a = 0; a < k; ++a) {
    const Vertex u = vertices[static_cast<std::size_t>(a)];
    if (u < 0 || u >= n_) throw Error(ErrorKind::kValidation, "induced vertex out of range");
    for (Vertex b = a + 1; b < k; ++b) {
      if (HasEdge(u, vertices[static_cast<std::size_t>(b)])) sub.SetEdge(a, b, true);
    }
  }
  return sub;
}

bool Graph::IsValid() const {
  for (Vertex u = 0; u < n_; ++u) {
    if (HasEdge(u, u)) return false;
    for (Vertex v = u + 1; v < n_; ++v)
      if (HasEdge(u, v) != HasEdge(v, u)) return false;
  }
  return true;
}

namespace {

bool ParseInt(std::string_view token, std::int64_t& out) {
  const auto* first = token.data();
  const auto* last = token.data() + token.size();
  auto [ptr, ec] = std::from_chars(first, last, out);
  return ec == std::errc() && ptr == last;
}

bool IsBlankOrComment(const std::string& line) {
  const auto pos = line.find_first_not_of(" \t\r");
  return pos == std::string::npos || line[pos] == '#';
}

}  // namespace

Graph ReadEdgeList(std::istream& in, Vertex min_vertices) {
  std::vector<std::pair<Vertex, Vertex>> edges;
  Vertex max_id = -1;
  Vertex declared = min_vertices;
  std::string line;
  std::int64_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (IsBlankOrComment(line)) {
      // Header written by WriteEdgeList; keeps isolated trailing vertices.
      std::istringstream header(line);
      std::string hash, key;
      std::int64_t count = 0;
      if (header >> hash >> key >> count && hash == "#" && key == "vertices")
        declared = std::max(declared, count);
      continue;
    }
    std::istringstream fields(line);
    std::string a, b, extra;
    std::int64_t u = 0, v = 0;
    if (!(fields >> a >> b) || (fields >> extra) || !ParseInt(a, u) || !ParseInt(b, v) ||
        u < 0 || v < 0) {
      throw Error(ErrorKind::kParse,
                  "line " + std::to_string(line_no) + ": expected two non-negative vertex ids, got '" +
                      line + "'");
    }
    if (u == v) {
      throw Error(ErrorKind::kParse,
                  "line " + std::to_string(line_no) + ": self-loop " + std::to_string(u));
    }
    edges.emplace_back(u, v);
    max_id = std::max({max_id, u, v});
  }
  return Graph::FromEdges(std::max(max_id + 1, declared), edges);
}

Graph ReadEdgeList(const std::filesystem::path& path, Vertex min_vertices) {
  std::ifstream in(path);
  if (!in) throw Error(ErrorKind::kIo, "cannot open " + path.string());
  try {
    return ReadEdgeList(in, min_vertices);
  } catch (const Error& e) {
    throw Error(e.kind(), path.string() + ": " + e.what());
  }
}

void WriteEdgeList(std::ostream& out, const Graph& g) {
  out << "# vertices " << g.size() << "\n";
  for (const auto& [u, v] : g.Edges()) out << u << ' ' << v << '\n';
}

void WriteEdgeList(const std::filesystem::path& path, const Graph& g) {
  std::ofstream out(path);
  if (!out) throw Error(ErrorKind::kIo, "cannot write " + path.string());
  WriteEdgeList(out, g);
}

std::vector<std::int64_t> ReadLabels(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw Error(ErrorKind::kIo, "cannot open " + path.string());
  std::vector<std::int64_t> labels;
  std::string line;
  std::int64_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (IsBlankOrComment(line)) continue;
    std::istringstream fields(line);
    std::string token, extra;
    std::int64_t value = 0;
    if (!(fields >> token) || (fields >> extra) || !ParseInt(token, value)) {
      throw Error(ErrorKind::kParse, path.string() + ": line " + std::to_string(line_no) +
                                         ": expected one integer");
    }
    labels.push_back(value);
  }
  return labels;
}

void WriteLabels(const std::filesystem::path& path, std::span<const std::int64_t> labels) {
  std::ofstream out(path);
  if (!out) throw Error(ErrorKind::kIo, "cannot write " + path.string());
  for (auto l : labels) out << l << '\n';
}

}  // namespace vnreg

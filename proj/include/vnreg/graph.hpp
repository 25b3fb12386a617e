#pragma once

#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <span>
#include <utility>
#include <vector>

#include <Eigen/Core>

namespace vnreg {

using Vertex = std::int64_t;

/// Undirected simple graph stored as a dense symmetric 0/1 adjacency matrix.
///
/// Every mutation goes through SetEdge, which writes both triangles and
/// rejects self-loops, so the matrix is symmetric and hollow by construction.
class Graph {
 public:
  Graph() = default;
  explicit Graph(Vertex n);

  static Graph Complete(Vertex n);
  static Graph FromEdges(Vertex n, std::span<const std::pair<Vertex, Vertex>> edges);

  Vertex size() const { return n_; }

  bool HasEdge(Vertex u, Vertex v) const {
    return adjacency_[static_cast<std::size_t>(u * n_ + v)] != 0;
  }
  void SetEdge(Vertex u, Vertex v, bool present);

  Vertex Degree(Vertex v) const;
  std::vector<Vertex> Degrees() const;
  std::int64_t EdgeCount() const;

  // Edges with u < v in lexicographic order.
  std::vector<std::pair<Vertex, Vertex>> Edges() const;

  Eigen::MatrixXd ToDense() const;

  // Subgraph induced on `vertices`, relabelled 0..k-1 in the given order.
  Graph Induced(std::span<const Vertex> vertices) const;

  // Debug check of the symmetric/hollow invariant (always true unless the
  // storage was corrupted).
  bool IsValid() const;

  friend bool operator==(const Graph& a, const Graph& b) {
    return a.n_ == b.n_ && a.adjacency_ == b.adjacency_;
  }

 private:
  Vertex n_ = 0;
  std::vector<std::uint8_t> adjacency_;
};

// Edge-list text format: one "u v" pair of 0-based ids per line, '#' starts a
// comment line. The vertex count is 1 + the largest id, raised to
// `min_vertices` or to a "# vertices N" header line if present (the writer
// emits that header so isolated trailing vertices survive a round trip).
Graph ReadEdgeList(std::istream& in, Vertex min_vertices = 0);
Graph ReadEdgeList(const std::filesystem::path& path, Vertex min_vertices = 0);
void WriteEdgeList(std::ostream& out, const Graph& g);
void WriteEdgeList(const std::filesystem::path& path, const Graph& g);

// One integer per line ('#' comments allowed).
std::vector<std::int64_t> ReadLabels(const std::filesystem::path& path);
void WriteLabels(const std::filesystem::path& path, std::span<const std::int64_t> labels);

}  // namespace vnreg

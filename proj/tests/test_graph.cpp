#include <doctest/doctest.h>

#include <cmath>
#include <filesystem>
#include <numeric>
#include <sstream>

#include "vnreg/error.hpp"
#include "vnreg/graph.hpp"

using namespace vnreg;

TEST_CASE("set edge keeps the matrix symmetric and hollow") {
  Graph g(4);
  g.SetEdge(0, 3, true);
  g.SetEdge(2, 1, true);
  CHECK(g.HasEdge(3, 0));
  CHECK(g.HasEdge(1, 2));
  CHECK(g.EdgeCount() == 2);
  CHECK(g.IsValid());
  CHECK_THROWS_AS(g.SetEdge(1, 1, true), Error);
  CHECK_THROWS_AS(g.SetEdge(0, 4, true), Error);
}

TEST_CASE("complete graph degrees") {
  const Graph g = Graph::Complete(5);
  for (Vertex d : g.Degrees()) CHECK(d == 4);
  CHECK(g.EdgeCount() == 10);
}

TEST_CASE("induced subgraph relabels in the given order") {
  const std::vector<std::pair<Vertex, Vertex>> edges{{0, 1}, {1, 2}, {2, 3}};
  const Graph g = Graph::FromEdges(4, edges);
  const std::vector<Vertex> keep{3, 2, 0};
  const Graph h = g.Induced(keep);
  CHECK(h.size() == 3);
  CHECK(h.HasEdge(0, 1));   // 3-2
  CHECK(!h.HasEdge(1, 2));  // 2-0
  for (Vertex i = 0; i < 3; ++i)
    for (Vertex j = 0; j < 3; ++j) CHECK(h.HasEdge(i, j) == g.HasEdge(keep[i], keep[j]));
}

TEST_CASE("edge list round trip keeps isolated trailing vertices") {
  const std::vector<std::pair<Vertex, Vertex>> edges{{0, 2}, {1, 2}};
  const Graph g = Graph::FromEdges(6, edges);
  std::stringstream buffer;
  WriteEdgeList(buffer, g);
  const Graph back = ReadEdgeList(buffer);
  CHECK(back == g);
}

TEST_CASE("edge list parsing") {
  std::istringstream in("# comment\n0 1\n\n1 2\n");
  const Graph g = ReadEdgeList(in);
  CHECK(g.size() == 3);
  CHECK(g.EdgeCount() == 2);

  std::istringstream bad("0 1\n1 x\n");
  try {
    ReadEdgeList(bad);
    FAIL("expected a parse error");
  } catch (const Error& e) {
    CHECK(e.kind() == ErrorKind::kParse);
    CHECK(std::string(e.what()).find("line 2") != std::string::npos);
  }

  std::istringstream loop("2 2\n");
  CHECK_THROWS_AS(ReadEdgeList(loop), Error);
}

TEST_CASE("labels round trip") {
  const auto path = std::filesystem::temp_directory_path() / "vnreg_labels_test.txt";
  const std::vector<std::int64_t> labels{3, 0, -1, 7};
  WriteLabels(path, labels);
  CHECK(ReadLabels(path) == labels);
  std::filesystem::remove(path);
}

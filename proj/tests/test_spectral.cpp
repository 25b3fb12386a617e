#include <doctest/doctest.h>

#include <cmath>
#include <limits>

#include <Eigen/Dense>

#include "test_support.hpp"
#include "vnreg/error.hpp"
#include "vnreg/graph_models.hpp"
#include "vnreg/linalg.hpp"
#include "vnreg/spectral.hpp"

using namespace vnreg;
using Eigen::MatrixXd;

namespace {

// Zhu-Ghodsi profile log-likelihood written out as a sum of Gaussian log
// densities, maximised by scanning every split.
int ElbowOracle(const std::vector<double>& x) {
  const int n = static_cast<int>(x.size());
  int best_q = 1;
  double best = -std::numeric_limits<double>::infinity();
  for (int q = 1; q <= n; ++q) {
    double m1 = 0, m2 = 0;
    for (int i = 0; i < q; ++i) m1 += x[i] / q;
    for (int i = q; i < n; ++i) m2 += x[i] / (n - q);
    double ss = 0;
    for (int i = 0; i < n; ++i) ss += std::pow(x[i] - (i < q ? m1 : m2), 2);
    const double var = std::max(ss / (q < n ? n - 2 : n - 1), 1e-24 * std::max(1.0, x[0] * x[0]));
    double ll = 0;
    for (int i = 0; i < n; ++i) {
      const double z = x[i] - (i < q ? m1 : m2);
      ll += -0.5 * std::log(2 * M_PI * var) - z * z / (2 * var);
    }
    if (ll > best) {
      best = ll;
      best_q = q;
    }
  }
  return best_q;
}

Graph DisjointEdges() {
  const std::vector<std::pair<Vertex, Vertex>> e{{0, 1}, {2, 3}};
  return Graph::FromEdges(4, e);
}

}  // namespace

TEST_CASE("complete graph embedding") {
  const Embedding e = AdjacencySpectralEmbedding(Graph::Complete(4), 1);
  CHECK(e.p == 1);
  CHECK(e.q == 0);
  for (int i = 0; i < 4; ++i) CHECK(e.positions(i, 0) == doctest::Approx(std::sqrt(3.0) / 2).epsilon(1e-12));
  CHECK(e.singular_values(0) == doctest::Approx(3.0));
}

TEST_CASE("two disjoint edges") {
  const Embedding e = AdjacencySpectralEmbedding(DisjointEdges(), 2);
  CHECK(e.singular_values(0) == doctest::Approx(1.0));
  CHECK(e.singular_values(1) == doctest::Approx(1.0));
  CHECK(e.p == 2);
  CHECK(e.q == 0);
}

TEST_CASE("signature of a bipartite graph") {
  std::vector<std::pair<Vertex, Vertex>> e;
  for (Vertex i = 0; i < 3; ++i)
    for (Vertex j = 3; j < 6; ++j) e.emplace_back(i, j);
  const Graph k33 = Graph::FromEdges(6, e);
  CHECK(EstimateSignature(k33, 2) == std::pair<int, int>{1, 1});
  CHECK(EstimateSignature(Graph::Complete(4), 1) == std::pair<int, int>{1, 0});
  const Embedding emb = AdjacencySpectralEmbedding(k33, 2);
  CHECK(emb.eigenvalues(0) == doctest::Approx(3.0));
  CHECK(emb.eigenvalues(1) == doctest::Approx(-3.0));
}

TEST_CASE("rank and range errors") {
  // K_{3,3} has rank 2.
  std::vector<std::pair<Vertex, Vertex>> e;
  for (Vertex i = 0; i < 3; ++i)
    for (Vertex j = 3; j < 6; ++j) e.emplace_back(i, j);
  const Graph k33 = Graph::FromEdges(6, e);
  try {
    AdjacencySpectralEmbedding(k33, 3);
    FAIL("expected a rank error");
  } catch (const Error& err) {
    CHECK(err.kind() == ErrorKind::kRank);
  }
  try {
    EstimateSignature(k33, 3);
    FAIL("expected a degenerate-spectrum error");
  } catch (const Error& err) {
    CHECK(err.kind() == ErrorKind::kDegenerate);
  }
  CHECK_THROWS_AS(AdjacencySpectralEmbedding(k33, 0), Error);
  CHECK_THROWS_AS(AdjacencySpectralEmbedding(k33, 7), Error);
}

TEST_CASE("embedding properties on sampled graphs") {
  const MatrixXd b = (MatrixXd(2, 2) << 0.7, 0.2, 0.2, 0.3).finished();
  const MatrixXd bc = BuildContaminatedBlockMatrix(b, 0.2, 0.2);
  for (std::uint64_t seed = 0; seed < 5; ++seed) {
    const Graph g = SampleSbm(SbmSpec::WithSizes(bc, {40, 20, 20, 40, 20, 20}), seed).graph;
    const MatrixXd a = g.ToDense();
    for (int d : {1, 2, 4, 6}) {
      const Embedding e = AdjacencySpectralEmbedding(g, d);
      CAPTURE(d);
      // Reconstruction is the best rank-d approximation (Eigen's solver as the
      // second route).
      CHECK((e.Reconstruction() - a).norm() <= test::BestRankError(a, d) + 1e-8);
      // Columns are scaled orthonormal vectors.
      const MatrixXd gram = e.positions.transpose() * e.positions;
      CHECK((gram - MatrixXd(gram.diagonal().asDiagonal())).cwiseAbs().maxCoeff() < 1e-8);
      CHECK((gram.diagonal() - e.eigenvalues.cwiseAbs()).cwiseAbs().maxCoeff() < 1e-8);
      // Positive eigenvalues come first, singular values descend and stay positive.
      for (int c = 0; c < e.p; ++c) CHECK(e.eigenvalues(c) > 0);
      for (int c = e.p; c < d; ++c) CHECK(e.eigenvalues(c) < 0);
      for (int c = 1; c < d; ++c) CHECK(e.singular_values(c) <= e.singular_values(c - 1));
      CHECK(e.singular_values.minCoeff() > 0);
      // Sign convention: largest-magnitude entry of each column is positive.
      for (int c = 0; c < d; ++c) {
        Eigen::Index arg;
        e.positions.col(c).cwiseAbs().maxCoeff(&arg);
        CHECK(e.positions(arg, c) > 0);
      }
      // Deterministic.
      CHECK(AdjacencySpectralEmbedding(g, d).positions == e.positions);
    }
  }
}

TEST_CASE("spectrum reuse matches a fresh embedding") {
  const MatrixXd b = (MatrixXd(2, 2) << 0.6, 0.1, 0.1, 0.5).finished();
  const Graph g = SampleSbm(SbmSpec::WithSizes(b, {50, 50}), 3).graph;
  const AdjacencySpectrum s(g);
  CHECK(s.Embed(2).positions == AdjacencySpectralEmbedding(g, 2).positions);
  CHECK(s.Signature(2) == EstimateSignature(g, 2));
}

TEST_CASE("profile likelihood elbows") {
  SUBCASE("unambiguous gap") {
    const std::vector<double> x{10, 10, 0.1, 0.1, 0.1, 0.1, 0.1, 0.1};
    CHECK(ProfileLikelihoodElbow(x) == 2);
  }
  SUBCASE("two elbows") {
    const std::vector<double> x{9, 9, 9, 1, 1, 1, 1, 0.01, 0.01};
    CHECK(ProfileLikelihoodElbows(x, 2) == std::vector<int>{3, 7});
    CHECK(ElbowOracle(x) == 3);
    const std::vector<double> tail(x.begin() + 3, x.end());
    CHECK(3 + ElbowOracle(tail) == 7);
  }
  SUBCASE("random profiles agree with the oracle") {
    test::Rng rng(5);
    for (int t = 0; t < 200; ++t) {
      const int n = 3 + static_cast<int>(rng() % 14);
      std::vector<double> x(n);
      for (double& v : x) v = 10 * test::Uniform(rng);
      std::sort(x.begin(), x.end(), std::greater<>());
      CHECK(ProfileLikelihoodElbow(x) == ElbowOracle(x));
    }
  }
  SUBCASE("elbow past the end") {
    const std::vector<double> x{5, 1};
    CHECK_THROWS_AS(ProfileLikelihoodElbows(x, 3), Error);
  }
}

TEST_CASE("dimension selection on a planted spectrum") {
  // Two dense blocks with sparse links: two large eigenvalues then a bulk.
  const MatrixXd b = (MatrixXd(2, 2) << 0.9, 0.05, 0.05, 0.8).finished();
  const Graph g = SampleSbm(SbmSpec::WithSizes(b, {100, 100}), 8).graph;
  CHECK(SelectDimension(g, 1, 20) == 2);
}

TEST_CASE("pseudoinverse") {
  test::Rng rng(2);
  for (int t = 0; t < 20; ++t) {
    const MatrixXd f = test::Gaussian(4, 2, rng);
    const MatrixXd s = f * f.transpose();  // rank 2
    const MatrixXd pinv = SymmetricPseudoInverse(s);
    CHECK((s * pinv * s - s).norm() < 1e-8);
    CHECK((pinv * s * pinv - pinv).norm() < 1e-8);
    // Second route: Eigen's complete orthogonal decomposition.
    CHECK((pinv - s.completeOrthogonalDecomposition().pseudoInverse()).norm() < 1e-8);
  }
}

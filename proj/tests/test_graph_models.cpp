#include <doctest/doctest.h>

#include <cmath>
#include <numeric>

#include <Eigen/Dense>

#include "test_support.hpp"
#include "vnreg/error.hpp"
#include "vnreg/graph_models.hpp"
#include "vnreg/linalg.hpp"

using namespace vnreg;
using Eigen::MatrixXd;

namespace {

const MatrixXd kB = (MatrixXd(2, 2) << 0.7, 0.2, 0.2, 0.3).finished();

// Paired edge indicators of two graphs over all vertex pairs.
struct PairCounts {
  double n = 0, first = 0, second = 0, both = 0;
  double Correlation() const {
    const double p1 = first / n, p2 = second / n, p12 = both / n;
    return (p12 - p1 * p2) / std::sqrt(p1 * (1 - p1) * p2 * (1 - p2));
  }
  double SecondGivenFirst() const { return both / first; }
};

PairCounts CountPairs(const Graph& a, const Graph& b) {
  PairCounts c;
  for (Vertex i = 0; i < a.size(); ++i)
    for (Vertex j = i + 1; j < a.size(); ++j) {
      const bool x = a.HasEdge(i, j), y = b.HasEdge(i, j);
      c.n += 1;
      c.first += x;
      c.second += y;
      c.both += x && y;
    }
  return c;
}

}  // namespace

TEST_CASE("sbm with all-ones block matrix is complete") {
  const SbmSample s = SampleSbm(SbmSpec::WithSizes(MatrixXd::Ones(1, 1), {4}), 1);
  CHECK(s.graph == Graph::Complete(4));
}

TEST_CASE("zero sparsity gives the empty graph") {
  const SbmSample s = SampleSbm(SbmSpec::WithSizes(kB, {30, 30}, 0.0), 2);
  CHECK(s.graph.EdgeCount() == 0);
  GrdpgSpec g{MatrixXd::Constant(20, 2, 0.5), 2, 0, 0.0};
  CHECK(SampleGrdpg(g, 3).EdgeCount() == 0);
}

TEST_CASE("sbm spec validation") {
  SbmSpec sizes = SbmSpec::WithSizes(kB, {10, 11});
  sizes.n = 20;
  CHECK_THROWS_AS(sizes.Validate(), Error);
  CHECK_THROWS_AS(SbmSpec::WithSizes((MatrixXd(2, 2) << 0.5, 0.1, 0.2, 0.5).finished(), {5, 5}), Error);
  CHECK_THROWS_AS(SbmSpec::WithSizes(MatrixXd::Constant(1, 1, 1.5), {5}), Error);
  CHECK_THROWS_AS(SbmSpec::WithProbabilities(10, kB, {0.5, 0.6}), Error);
}

TEST_CASE("sbm within-block density matches the block matrix") {
  const SbmSpec spec = SbmSpec::WithSizes(kB, {250, 250});
  std::vector<int> labels(500);
  for (int v = 250; v < 500; ++v) labels[v] = 1;
  double sum = 0;
  const int reps = 100;
  for (int r = 0; r < reps; ++r) {
    const SbmSample s = SampleSbm(spec, 100 + r);
    CHECK(s.graph.IsValid());
    CHECK(s.membership == labels);
    sum += test::BlockDensities(s.graph, labels, 2)(0, 0);
  }
  CHECK(std::abs(sum / reps - 0.7) < 0.01);
}

TEST_CASE("sbm block densities converge on every block pair") {
  const SbmSpec spec = SbmSpec::WithSizes(kB, {500, 500});
  MatrixXd mean = MatrixXd::Zero(2, 2);
  const int reps = 50;
  for (int r = 0; r < reps; ++r) {
    const SbmSample s = SampleSbm(spec, 900 + r);
    mean += test::BlockDensities(s.graph, s.membership, 2) / reps;
  }
  CHECK((mean - kB).cwiseAbs().maxCoeff() < 0.01);
}

TEST_CASE("probabilistic memberships follow the block probabilities") {
  const SbmSample s = SampleSbm(SbmSpec::WithProbabilities(4000, kB, {0.25, 0.75}), 5);
  const double ones = std::count(s.membership.begin(), s.membership.end(), 1);
  CHECK(std::abs(ones / 4000 - 0.75) < 0.03);
}

TEST_CASE("correlated sbm coupling") {
  const SbmSpec half = SbmSpec::WithSizes(MatrixXd::Constant(1, 1, 0.5), {450});

  SUBCASE("rho = 1 gives identical graphs") {
    for (std::uint64_t seed : {1u, 2u, 3u}) {
      const CorrelatedSbmSample s = SampleCorrelatedSbm(SbmSpec::WithSizes(kB, {40, 40}), 1.0, seed);
      CHECK(s.first == s.second);
    }
  }
  SUBCASE("rho = 0 gives uncorrelated indicators") {
    const CorrelatedSbmSample s = SampleCorrelatedSbm(half, 0.0, 11);
    CHECK(std::abs(CountPairs(s.first, s.second).Correlation()) < 0.02);
  }
  SUBCASE("conditional edge probability") {
    const CorrelatedSbmSample s = SampleCorrelatedSbm(half, 0.7, 12);
    const PairCounts c = CountPairs(s.first, s.second);
    CHECK(c.n > 100000);
    CHECK(std::abs(c.SecondGivenFirst() - 0.85) < 0.01);
    CHECK(std::abs(c.Correlation() - 0.7) < 0.02);
    CHECK(std::abs(c.second / c.n - 0.5) < 0.01);
  }
  SUBCASE("rho outside [0, 1]") {
    CHECK_THROWS_AS(SampleCorrelatedSbm(half, 1.1, 1), Error);
    CHECK_THROWS_AS(SampleCorrelatedSbm(half, -0.1, 1), Error);
  }
}

TEST_CASE("grdpg with equal unit rows is complete") {
  MatrixXd x = MatrixXd::Zero(6, 3);
  x.col(0).setOnes();
  CHECK(SampleGrdpg(GrdpgSpec{x, 1, 2, 1.0}, 4) == Graph::Complete(6));
}

TEST_CASE("grdpg feasibility is validated") {
  GrdpgSpec g{MatrixXd::Constant(3, 1, 1.2), 1, 0, 1.0};
  CHECK_THROWS_AS(g.Validate(), Error);
  GrdpgSpec neg{(MatrixXd(2, 2) << 0.1, 0.9, 0.1, 0.9).finished(), 1, 1, 1.0};
  try {
    neg.Validate();
    FAIL("expected a feasibility error");
  } catch (const Error& e) {
    CHECK(e.kind() == ErrorKind::kFeasibility);
  }
}

TEST_CASE("block latent positions reproduce the block matrix") {
  const BlockLatentPositions y = SbmLatentPositions(kB);
  CHECK(y.p == 2);
  CHECK(y.q == 0);
  const MatrixXd back = y.positions * SignatureDiagonal(y.p, y.q).asDiagonal() * y.positions.transpose();
  CHECK((back - kB).norm() < 1e-12);

  const MatrixXd bc = BuildContaminatedBlockMatrix(kB, 0.2, 0.2);
  const BlockLatentPositions yc = SbmLatentPositions(bc);
  CHECK(yc.p + yc.q == 6);
  const MatrixXd back_c = yc.positions * SignatureDiagonal(yc.p, yc.q).asDiagonal() * yc.positions.transpose();
  CHECK((back_c - bc).norm() < 1e-12);
  // Independent route: sign counts of the eigenvalues of B^c.
  Eigen::SelfAdjointEigenSolver<MatrixXd> es(bc);
  CHECK(yc.p == (es.eigenvalues().array() > 1e-12).count());
  CHECK(yc.q == (es.eigenvalues().array() < -1e-12).count());
}

TEST_CASE("grdpg on block positions reduces to the sbm") {
  std::vector<int> membership(200);
  for (int v = 100; v < 200; ++v) membership[v] = 1;
  const GrdpgSpec spec = SbmAsGrdpg(kB, membership);
  MatrixXd mean = MatrixXd::Zero(2, 2);
  const int reps = 100;
  for (int r = 0; r < reps; ++r) mean += test::BlockDensities(SampleGrdpg(spec, 300 + r), membership, 2) / reps;
  CHECK((mean - kB).cwiseAbs().maxCoeff() < 0.01);
}

TEST_CASE("correlated grdpg coupling") {
  GrdpgSpec spec{MatrixXd::Constant(450, 1, std::sqrt(0.2)), 1, 0, 1.0};
  const auto [a, b] = SampleCorrelatedGrdpg(spec, 0.5, 21);
  const PairCounts c = CountPairs(a, b);
  CHECK(std::abs(c.SecondGivenFirst() - 0.6) < 0.01);
  const auto [same_a, same_b] = SampleCorrelatedGrdpg(spec, 1.0, 22);
  CHECK(same_a == same_b);
  const auto [ind_a, ind_b] = SampleCorrelatedGrdpg(spec, 0.0, 23);
  CHECK(std::abs(CountPairs(ind_a, ind_b).Correlation()) < 0.02);
}

TEST_CASE("contaminated block matrix matches the displayed 6x6 matrix") {
  const MatrixXd expected = (MatrixXd(6, 6) << 0.70, 0.76, 0.56, 0.20, 0.36, 0.16,  //
                             0.76, 0.76, 0.70, 0.36, 0.36, 0.20,                   //
                             0.56, 0.70, 0.56, 0.16, 0.20, 0.16,                   //
                             0.20, 0.36, 0.16, 0.30, 0.44, 0.24,                   //
                             0.36, 0.36, 0.20, 0.44, 0.44, 0.30,                   //
                             0.16, 0.20, 0.16, 0.24, 0.30, 0.24)
                                .finished();
  CHECK((BuildContaminatedBlockMatrix(kB, 0.2, 0.2) - expected).cwiseAbs().maxCoeff() < 1e-12);
}

TEST_CASE("contaminated block matrix formulas") {
  SUBCASE("no contamination keeps the original values") {
    const MatrixXd bc = BuildContaminatedBlockMatrix(kB, 0.0, 0.0);
    for (int i = 0; i < 6; ++i)
      for (int j = 0; j < 6; ++j) CHECK(bc(i, j) == doctest::Approx(kB(i / 3, j / 3)).epsilon(1e-15));
  }
  SUBCASE("equal entries") {
    const MatrixXd bc = BuildContaminatedBlockMatrix(MatrixXd::Constant(2, 2, 0.5), 0.4, 0.2);
    // Added-edge entries (x1, x3, x5) and deleted-edge entries (x2, x4, x6).
    CHECK(bc(0, 1) == doctest::Approx(0.7));
    CHECK(bc(0, 4) == doctest::Approx(0.7));
    CHECK(bc(3, 4) == doctest::Approx(0.7));
    CHECK(bc(0, 2) == doctest::Approx(0.4));
    CHECK(bc(0, 5) == doctest::Approx(0.4));
    CHECK(bc(3, 5) == doctest::Approx(0.4));
    // Plus-minus pairs keep the original probability.
    CHECK(bc(1, 2) == doctest::Approx(0.5));
  }
  SUBCASE("symmetric with entries in [0, 1]") {
    test::Rng rng(7);
    for (int t = 0; t < 50; ++t) {
      const int k = 1 + static_cast<int>(rng() % 4);
      MatrixXd b = test::RandomSymmetricProbabilities(k, rng);
      const MatrixXd bc = BuildContaminatedBlockMatrix(b, test::Uniform(rng), test::Uniform(rng));
      CHECK(bc.rows() == 3 * k);
      CHECK((bc - bc.transpose()).norm() == 0.0);
      CHECK(bc.minCoeff() >= 0.0);
      CHECK(bc.maxCoeff() <= 1.0);
    }
  }
}

TEST_CASE("block contamination") {
  const SbmSample s = SampleSbm(SbmSpec::WithSizes(kB, {40, 40}), 31);

  SUBCASE("zero rates leave the graph unchanged") {
    BlockContaminationSpec spec;
    spec.pi_plus = 0.3;
    spec.pi_minus = 0.3;
    CHECK(ContaminateBlock(s.graph, spec, 1).graph == s.graph);
  }
  SUBCASE("everything in W+ with certain additions gives the complete graph") {
    BlockContaminationSpec spec;
    spec.pi_plus = 1.0;
    spec.s_plus = 1.0;
    const BlockContamination c = ContaminateBlock(s.graph, spec, 2);
    CHECK(c.graph == Graph::Complete(80));
    CHECK(c.w_minus.empty());
  }
  SUBCASE("changes only touch the contaminated sets") {
    BlockContaminationSpec spec;
    spec.pi_plus = 0.2;
    spec.pi_minus = 0.2;
    spec.s_plus = 0.5;
    spec.s_minus = 0.5;
    const BlockContamination c = ContaminateBlock(s.graph, spec, 3);
    std::vector<int> role(80, 0);
    for (Vertex v : c.w_plus) role[v] = 1;
    for (Vertex v : c.w_minus) {
      CHECK(role[v] == 0);  // disjoint
      role[v] = 2;
    }
    for (Vertex i = 0; i < 80; ++i)
      for (Vertex j = i + 1; j < 80; ++j) {
        const bool before = s.graph.HasEdge(i, j), after = c.graph.HasEdge(i, j);
        if (after && !before) CHECK(((role[i] == 1 && role[j] != 2) || (role[j] == 1 && role[i] != 2)));
        if (before && !after) CHECK(((role[i] == 2 && role[j] != 1) || (role[j] == 2 && role[i] != 1)));
      }
  }
  SUBCASE("fixed sizes are exact per stratum") {
    BlockContaminationSpec spec;
    spec.s_plus = 0.2;
    spec.s_minus = 0.2;
    spec.w_plus_sizes = std::vector<Vertex>{5, 7};
    spec.w_minus_sizes = std::vector<Vertex>{3, 4};
    const BlockContamination c = ContaminateBlock(s.graph, spec, 4, s.membership);
    auto count = [&](const std::vector<Vertex>& set, int block) {
      return std::count_if(set.begin(), set.end(), [&](Vertex v) { return s.membership[v] == block; });
    };
    CHECK(count(c.w_plus, 0) == 5);
    CHECK(count(c.w_plus, 1) == 7);
    CHECK(count(c.w_minus, 0) == 3);
    CHECK(count(c.w_minus, 1) == 4);
  }
  SUBCASE("invalid probabilities") {
    BlockContaminationSpec spec;
    spec.s_plus = 1.5;
    CHECK_THROWS_AS(ContaminateBlock(s.graph, spec, 5), Error);
  }
}

TEST_CASE("block contamination yields the 3K-block sbm") {
  const SbmSpec base = SbmSpec::WithSizes(kB, {500, 500});
  BlockContaminationSpec spec;
  spec.s_plus = 0.2;
  spec.s_minus = 0.2;
  spec.w_plus_sizes = std::vector<Vertex>{100, 100};
  spec.w_minus_sizes = std::vector<Vertex>{100, 100};
  const MatrixXd expected = BuildContaminatedBlockMatrix(kB, 0.2, 0.2);
  MatrixXd mean = MatrixXd::Zero(6, 6);
  const int reps = 50;
  for (int r = 0; r < reps; ++r) {
    const SbmSample s = SampleSbm(base, 500 + r);
    const BlockContamination c = ContaminateBlock(s.graph, spec, 600 + r, s.membership);
    const std::vector<int> labels = ContaminatedLabels(s.membership, c.w_plus, c.w_minus);
    mean += test::BlockDensities(c.graph, labels, 6) / reps;
  }
  CHECK((mean - expected).cwiseAbs().maxCoeff() < 0.02);
}

TEST_CASE("diffuse contamination") {
  std::vector<int> membership(60);
  for (int v = 30; v < 60; ++v) membership[v] = 1;
  const GrdpgSpec signal = SbmAsGrdpg(kB, membership);

  SUBCASE("no noise keeps the signal rows") {
    DiffuseNoiseSpec none;
    none.m = 0;
    const DiffuseContamination c = ContaminateDiffuse(signal, none, 1);
    CHECK(c.spec.positions == signal.positions);
    CHECK(std::none_of(c.noise_mask.begin(), c.noise_mask.end(), [](bool b) { return b; }));
  }
  SUBCASE("small box is always feasible for positive rows") {
    MatrixXd y(60, 2);
    for (int v = 0; v < 60; ++v) y.row(v) = v < 30 ? Eigen::RowVector2d(0.6, 0.3) : Eigen::RowVector2d(0.2, 0.7);
    const GrdpgSpec positive{y, 2, 0, 1.0};
    DiffuseNoiseSpec box;
    box.m = 200;
    box.region = NoiseRegion::kBox;
    box.box_lower = Eigen::VectorXd::Zero(2);
    box.box_upper = Eigen::VectorXd::Constant(2, 0.1);
    const double bound = 0.1 * std::sqrt(2.0) * y.rowwise().norm().maxCoeff();
    CHECK(bound <= 1.0);
    for (std::uint64_t seed = 0; seed < 5; ++seed) {
      const DiffuseContamination c = ContaminateDiffuse(positive, box, seed);
      CHECK(c.spec.positions.rows() == 260);
      CHECK(std::count(c.noise_mask.begin(), c.noise_mask.end(), true) == 200);
      const MatrixXd z = c.spec.positions.bottomRows(200);
      CHECK(z.minCoeff() >= 0.0);
      CHECK(z.maxCoeff() <= 0.1);
      CHECK((z * y.transpose()).maxCoeff() <= bound);
      CHECK_NOTHROW(c.spec.Validate());
    }
  }
  SUBCASE("sphere orthant noise through the feasible transform") {
    const MatrixXd bc = BuildContaminatedBlockMatrix(kB, 0.2, 0.2);
    const BlockLatentPositions yc = SbmLatentPositions(bc);
    std::vector<int> m6(120);
    for (int v = 0; v < 120; ++v) m6[v] = v % 6;
    const GrdpgSpec sig6 = SbmAsGrdpg(bc, m6);
    DiffuseNoiseSpec noise;
    noise.m = 500;
    noise.region = NoiseRegion::kUnitSphereOrthant;
    noise.transform = FeasibleNoiseTransform(yc);
    const DiffuseContamination c = ContaminateDiffuse(sig6, noise, 9);
    CHECK(c.spec.positions.rows() == 620);
    CHECK_NOTHROW(c.spec.Validate());
    // Pre-transform draws lie on the unit sphere in the nonnegative orthant.
    DiffuseNoiseSpec raw;
    raw.m = 100;
    raw.region = NoiseRegion::kUnitSphereOrthant;
    const MatrixXd z = SampleNoisePositions(raw, 6, 9);
    CHECK(z.minCoeff() >= 0.0);
    CHECK((z.rowwise().norm().array() - 1.0).abs().maxCoeff() < 1e-12);
  }
  SUBCASE("infeasible region is reported") {
    DiffuseNoiseSpec box;
    box.m = 10;
    box.region = NoiseRegion::kBox;
    box.box_lower = Eigen::VectorXd::Constant(2, 5.0);
    box.box_upper = Eigen::VectorXd::Constant(2, 6.0);
    try {
      ContaminateDiffuse(signal, box, 1);
      FAIL("expected a feasibility error");
    } catch (const Error& e) {
      CHECK(e.kind() == ErrorKind::kFeasibility);
    }
  }
}

TEST_CASE("attached noise vertices keep the signal subgraph") {
  MatrixXd y(40, 2);
  for (int v = 0; v < 40; ++v) y.row(v) = v < 20 ? Eigen::RowVector2d(0.6, 0.3) : Eigen::RowVector2d(0.2, 0.7);
  const GrdpgSpec signal{y, 2, 0, 1.0};
  const Graph g = SampleGrdpg(signal, 3);
  DiffuseNoiseSpec box;
  box.m = 15;
  box.region = NoiseRegion::kBox;
  box.box_lower = Eigen::VectorXd::Zero(2);
  box.box_upper = Eigen::VectorXd::Constant(2, 0.2);
  const DiffuseContamination c = ContaminateDiffuse(signal, box, 4);
  const Graph full = AttachNoiseVertices(g, c, 5);
  CHECK(full.size() == 55);
  CHECK(full.IsValid());
  std::vector<Vertex> first(40);
  std::iota(first.begin(), first.end(), 0);
  CHECK(full.Induced(first) == g);
}

TEST_CASE("samplers are deterministic in the seed") {
  const SbmSpec spec = SbmSpec::WithSizes(kB, {30, 30});
  CHECK(SampleSbm(spec, 77).graph == SampleSbm(spec, 77).graph);
  CHECK(!(SampleSbm(spec, 77).graph == SampleSbm(spec, 78).graph));
}

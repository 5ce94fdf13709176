#include <cmath>

#include "acbc/data.hpp"
#include "acbc/error.hpp"
#include "acbc/rng.hpp"
#include "acbc/scenario.hpp"
#include "acbc/synth.hpp"
#include "case_studies.hpp"
#include "doctest.h"

using namespace acbc;
using Eigen::MatrixXd;
using Eigen::VectorXd;

namespace {

struct Case1 {
  AugmentedModel aug;
  MatrixXd G;
};

const Case1& case1() {
  static const Case1 c = [] {
    Case1 c;
    c.aug = augment(fixtures::case1_plant(), 1.0 / 1500, 1499.0 / 1500);
    const TrajectoryData t = collect_trajectory(c.aug, 11, default_excitation(c.aug), 1);
    const DataMatrices dm = assemble_M(t, c.aug.dictionary);
    c.G = t.S_plus * solve_z2(dm, t.S_plus, 2, 1).Z2;
    return c;
  }();
  return c;
}

// One state, one input, a single residual term `tail`.
AugmentedModel toy(const std::string& tail) {
  PlantModel p;
  p.dictionary = Dictionary::parse(1, 1, {"x1", "u1", tail});
  p.A = MatrixXd::Zero(1, 3);
  p.regions.state_box = Box(VectorXd::Constant(1, 0), VectorXd::Constant(1, 1));
  p.regions.initial_boxes = {Box(VectorXd::Constant(1, 0), VectorXd::Constant(1, 0.2))};
  p.regions.unsafe_boxes = {Box(VectorXd::Constant(1, 0.8), VectorXd::Constant(1, 1))};
  p.inputs = InputConstraints::box(VectorXd::Constant(1, 1.0));
  return augment(p, 0.1, 0.5);
}

double direct_count(double eps, double beta, int dim) {
  return std::ceil(2.0 / eps * (std::log(1.0 / beta) + dim * (dim + 1) / 2.0 + 1.0));
}

}  // namespace

TEST_CASE("sample count: worked examples") {
  CHECK(sample_count(0.01, 1e-10, 3) == 6006);
  CHECK(sample_count(0.05, 0.01, 3) == 465);
  // One decision from P plus c_a: 2 * ... with 1 * 2 / 2 + 1 = 2.
  CHECK(sample_count(0.01, 1e-10, 1) == static_cast<std::int64_t>(direct_count(0.01, 1e-10, 1)));
  CHECK(sample_count(0.01, 1e-10, 1) == 5006);
}

TEST_CASE("property: sample count is antitone in eps and beta, increasing in dim") {
  Rng rng(2);
  for (int k = 0; k < 2000; ++k) {
    const double e = 1e-3 + 0.5 * rng.uniform01();
    const double b = std::pow(10.0, -12 * rng.uniform01()) * 0.5;
    const int d = 1 + static_cast<int>(rng.index(20));
    const auto n = sample_count(e, b, d);
    CHECK(sample_count(e * 1.3, b, d) <= n);
    CHECK(sample_count(e, b * 1.5, d) <= n);
    CHECK(sample_count(e, b, d + 1) > n);
    CHECK(static_cast<double>(n) == direct_count(e, b, d));
  }
}

TEST_CASE("sample count: range checks") {
  CHECK_THROWS_AS(sample_count(0, 0.1, 3), Error);
  CHECK_THROWS_AS(sample_count(1, 0.1, 3), Error);
  CHECK_THROWS_AS(sample_count(0.1, 0, 3), Error);
  CHECK_THROWS_AS(sample_count(0.1, 0.1, 0), Error);
}

TEST_CASE("grid covering radius: worked examples") {
  const GridSamples a = grid_samples(Box(VectorXd::Zero(2), VectorXd::Ones(2)), {11, 11});
  CHECK(a.delta == doctest::Approx(0.05 * std::sqrt(2.0)).epsilon(1e-12));
  CHECK(a.points.cols() == 121);
  const GridSamples b = grid_samples(Box(VectorXd::Zero(1), VectorXd::Ones(1)), {2});
  CHECK(b.delta == doctest::Approx(0.5));
  const GridSamples c = grid_samples(case1().aug.state_box, {51, 51, 51});
  const VectorXd h = (VectorXd(3) << 0.2, 0.2, 30.02 / 50).finished();
  CHECK(c.delta == doctest::Approx(0.5 * h.norm()).epsilon(1e-12));
  CHECK(c.points.cols() == 51 * 51 * 51);
  // The last point sits on the upper face exactly.
  CHECK(c.points.col(c.points.cols() - 1) == case1().aug.state_box.upper);
}

TEST_CASE("property: closed-form covering radius matches brute force") {
  Rng rng(6);
  for (int trial = 0; trial < 20; ++trial) {
    const int d = 1 + static_cast<int>(rng.index(3));
    VectorXd lo(d), hi(d);
    std::vector<int> counts(d);
    for (int i = 0; i < d; ++i) {
      lo(i) = rng.uniform(-2, 1);
      hi(i) = lo(i) + rng.uniform(0.5, 3);
      counts[i] = 2 + static_cast<int>(rng.index(4));
    }
    const Box box(lo, hi);
    const GridSamples g = grid_samples(box, counts);
    // Probe a lattice four times finer, which contains every cell centre.
    std::vector<int> fine(d);
    for (int i = 0; i < d; ++i) fine[i] = 4 * (counts[i] - 1) + 1;
    const GridSamples probe = grid_samples(box, fine);
    double worst = 0;
    for (Eigen::Index k = 0; k < probe.points.cols(); ++k) {
      const double dist =
          (g.points.colwise() - probe.points.col(k)).colwise().norm().minCoeff();
      worst = std::max(worst, dist);
    }
    CHECK(worst <= g.delta + 1e-12);
    CHECK(worst >= g.delta - 1e-9);
  }
}

TEST_CASE("grid guards") {
  const Box b(VectorXd::Zero(2), VectorXd::Ones(2));
  CHECK_THROWS_AS(grid_samples(b, {1, 5}), Error);
  CHECK_THROWS_AS(grid_samples(b, {5}), Error);
  CHECK_THROWS_AS(grid_samples(Box(VectorXd::Zero(3), VectorXd::Ones(3)), {300, 300, 300}), Error);
  // A flat axis needs a single point.
  const GridSamples f = grid_samples(Box(VectorXd::Zero(2), (VectorXd(2) << 1, 0).finished()), {3, 1});
  CHECK(f.points.cols() == 3);
  CHECK(f.delta == doctest::Approx(0.25));
}

TEST_CASE("Lipschitz estimate of zeta1^2 on [0,1]") {
  const AugmentedModel a = toy("1*x1");
  // varpi = 1 gives the factor 2; G P G^T = 1/2 on the first axis.
  const MatrixXd G = (MatrixXd(2, 1) << std::sqrt(0.5), 0).finished();
  const MatrixXd P = MatrixXd::Identity(2, 2);
  const Box box(VectorXd::Zero(2), (VectorXd(2) << 1, 0).finished());
  const GridSamples grid = grid_samples(box, {101, 1});
  CHECK(scp_objective(P, G, a, 1.0, (VectorXd(2) << 0.7, 0).finished()) == doctest::Approx(0.49));
  const double L = lipschitz_estimate(P, G, a, 1.0, box, grid.points);
  CHECK(L == doctest::Approx(2.2).epsilon(1e-6));
  CHECK(lipschitz_estimate(3 * P, G, a, 1.0, box, grid.points) == doctest::Approx(3 * L));
  const AugmentedModel c = toy("cos(0*x1)");
  CHECK(lipschitz_estimate(P, G, c, 1.0, box, grid.points) <= 1e-6);
}

TEST_CASE("deterministic check") {
  CHECK(deterministic_check(-1.0, 0.5, 1.0));
  CHECK_FALSE(deterministic_check(-0.1, 1.0, 0.2));
  CHECK_FALSE(deterministic_check(0.0, 0.3, 0.7));
}

TEST_CASE("SCP: vanishing residual images give c_a = mu = 0") {
  const AugmentedModel a = toy("1*x1");
  const MatrixXd samples = (MatrixXd(2, 1) << 0.5, 0.2).finished();
  ScpSpec spec;
  spec.mode = ScpMode::WithMu;
  const ScpResult r = solve_scp(samples, MatrixXd::Zero(2, 1), a, spec);
  CHECK(r.c_a == 0.0);
  CHECK(r.mu == 0.0);
  CHECK(Eigen::SelfAdjointEigenSolver<MatrixXd>(r.P).eigenvalues()(0) >= kScpFloor - 1e-7);
}

TEST_CASE("SCP: identical images make the single constraint tight") {
  const AugmentedModel a = toy("cos(0*x1)");
  const MatrixXd G = (MatrixXd(2, 1) << 0.3, -0.4).finished();
  Rng rng(1);
  MatrixXd samples(2, 50);
  for (int k = 0; k < 50; ++k) samples.col(k) = rng.uniform(a.state_box.lower, a.state_box.upper);
  for (const auto mode : {ScpMode::CaOnly, ScpMode::WithMu}) {
    ScpSpec spec;
    spec.mode = mode;
    spec.varpi = 0.5;
    const ScpResult r = solve_scp(samples, G, a, spec);
    const VectorXd v = G * a.psi(samples.col(0));
    const double g = 3.0 * v.dot(r.P * v);
    CHECK(r.c_a + r.mu == doctest::Approx(g).epsilon(1e-9));
    // Scalarized optimum: the floor P >= I binds along v, so g = 3 |v|^2.
    CHECK(g == doctest::Approx(3.0 * v.squaredNorm()).epsilon(1e-5));
  }
}

TEST_CASE("property: SCP constraints hold and one is active") {
  const Case1& c = case1();
  for (int trial = 0; trial < 4; ++trial) {
    const MatrixXd samples = uniform_samples(c.aug.state_box, 300, 100 + trial);
    ScpSpec spec;
    spec.mode = trial % 2 ? ScpMode::WithMu : ScpMode::CaOnly;
    const ScpResult r = solve_scp(samples, c.G, c.aug, spec);
    double worst = -1e300;
    for (Eigen::Index k = 0; k < samples.cols(); ++k) {
      worst = std::max(worst, scp_objective(r.P, c.G, c.aug, 0.01, samples.col(k)) - r.c_a - r.mu);
    }
    CHECK(worst <= 1e-8);
    CHECK(worst >= -1e-6);
  }
}

TEST_CASE("property: nested sample sets never lower the SCP optimum") {
  const Case1& c = case1();
  const MatrixXd all = uniform_samples(c.aug.state_box, 800, 77);
  double prev = -1e300;
  for (const int n : {50, 100, 200, 400, 800}) {
    const ScpResult r = solve_scp(all.leftCols(n), c.G, c.aug, ScpSpec{});
    CHECK(r.solution.objective >= prev - 1e-7 * std::abs(prev));
    prev = r.solution.objective;
  }
}

TEST_CASE("probabilistic route: counts, determinism and audit") {
  const Case1& c = case1();
  ProbabilisticParams p;
  p.seed = 5;
  const ProbabilisticResult r1 = solve_probabilistic(p, c.G, c.aug, 0.01);
  const ProbabilisticResult r2 = solve_probabilistic(p, c.G, c.aug, 0.01);
  CHECK(r1.required == 6006);
  CHECK(r1.params.samples == 6006);
  CHECK((r1.scp.P.array() == r2.scp.P.array()).all());
  CHECK(r1.scp.c_a == r2.scp.c_a);
  const double frac = violation_fraction(r1.scp.P, r1.scp.c_a, c.G, c.aug, 0.01, 100000, 9);
  CHECK(frac <= 0.01);
  p.samples = 100;
  CHECK_THROWS_AS(solve_probabilistic(p, c.G, c.aug, 0.01), Error);
}

TEST_CASE("deterministic route: a passed check survives a grid twice as fine") {
  const Case1& c = case1();
  DeterministicOptions o;
  o.grid_per_axis = 21;
  o.rounds = 3;
  const DeterministicResult r = solve_deterministic(c.G, c.aug, 0.01, o);
  REQUIRE(r.passed);
  CHECK(r.scp.mu + r.lipschitz * r.delta <= 0.0);
  const int fine = 2 * r.grid_per_axis - 1;
  const GridSamples g = grid_samples(c.aug.state_box, {fine, fine, fine});
  double worst = -1e300;
  for (Eigen::Index k = 0; k < g.points.cols(); ++k) {
    worst = std::max(worst, scp_objective(r.scp.P, c.G, c.aug, 0.01, g.points.col(k)) - r.scp.c_a);
  }
  CHECK(worst <= 1e-6);
}

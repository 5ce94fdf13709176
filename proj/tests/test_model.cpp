#include <cmath>

#include "acbc/error.hpp"
#include "acbc/model.hpp"
#include "acbc/rng.hpp"
#include "case_studies.hpp"
#include "doctest.h"

using namespace acbc;
using Eigen::MatrixXd;
using Eigen::VectorXd;

namespace {

VectorXd v3(double a, double b, double c) { return (VectorXd(3) << a, b, c).finished(); }

AugmentedModel case1_aug() { return augment(fixtures::case1_plant(), 1.0 / 1500, 1499.0 / 1500); }

}  // namespace

TEST_CASE("case 1 augmentation reproduces the printed A_aug and B_aug bit for bit") {
  const AugmentedModel a = case1_aug();
  const double tau = 0.01;
  MatrixXd A = MatrixXd::Zero(3, 10);
  A(0, 0) = 1;
  A(0, 1) = tau;
  A(0, 9) = tau;
  A(1, 0) = -tau;
  A(1, 1) = 1 + tau;
  A(1, 2) = tau;
  A(1, 3) = -tau;
  const MatrixXd B = (MatrixXd(3, 1) << 0, 0, 1).finished();
  CHECK(a.A_aug.rows() == 3);
  CHECK(a.A_aug.cols() == 10);
  CHECK((a.A_aug.array() == A.array()).all());
  CHECK((a.B_aug.array() == B.array()).all());
}

TEST_CASE("case 1 augmented regions") {
  const AugmentedModel a = case1_aug();
  CHECK(a.state_box.lower.isApprox(v3(-5, -5, -15.01), 1e-14));
  CHECK(a.state_box.upper.isApprox(v3(5, 5, 15.01), 1e-14));
  REQUIRE(a.initial_boxes.size() == 1);
  CHECK(a.initial_boxes[0].upper.isApprox(v3(1, 1, 0.01), 1e-12));
  CHECK(a.initial_boxes[0].lower.isApprox(v3(-1, -1, -0.01), 1e-12));
  // Two state bands, then the lower and upper input bands.
  REQUIRE(a.unsafe_boxes.size() == 4);
  CHECK(a.unsafe_boxes[0].lower.isApprox(v3(-5, -5, -15.01), 1e-14));
  CHECK(a.unsafe_boxes[1].upper.isApprox(v3(5, 5, 15.01), 1e-14));
  CHECK(a.unsafe_boxes[2].upper(2) == 15.0 * -1.0);
  CHECK(a.unsafe_boxes[3].lower(2) == 15.0);
}

TEST_CASE("contains: closed boxes") {
  const AugmentedModel a = case1_aug();
  CHECK(contains(a.unsafe_boxes, v3(4, 4, 0)));
  CHECK_FALSE(contains(a.unsafe_boxes, v3(0, 0, 0)));
  CHECK(contains(a.unsafe_boxes, v3(3, 3, 0)));
  CHECK(contains(a.unsafe_boxes, v3(0, 0, 15)));
  CHECK_FALSE(contains(a.unsafe_boxes, v3(0, 0, 14.999)));
  CHECK_THROWS_AS(contains(a.unsafe_boxes, VectorXd::Zero(2)), Error);
}

TEST_CASE("dictionary re-indexing turns inputs into state variables") {
  const AugmentedModel a = case1_aug();
  CHECK(render_term(a.dictionary.terms()[9]) == "sin(x3)");
  CHECK(render_term(a.dictionary.terms()[5]) == "ln(1 + x3*x3)");
  CHECK(a.dictionary.m() == 0);
  CHECK(a.dictionary.n() == 3);
}

TEST_CASE("scalar plant: A_aug = [A; 0], B_aug = [0; 1]") {
  PlantModel p;
  p.dictionary = Dictionary::parse(1, 1, {"x1", "u1"});
  p.A = (MatrixXd(1, 2) << 0.3, -0.7).finished();
  p.regions.state_box = Box(VectorXd::Constant(1, -2), VectorXd::Constant(1, 2));
  p.regions.initial_boxes = {Box(VectorXd::Constant(1, -0.5), VectorXd::Constant(1, 0.5))};
  p.regions.unsafe_boxes = {Box(VectorXd::Constant(1, 1.5), VectorXd::Constant(1, 2))};
  p.inputs = InputConstraints::box(VectorXd::Constant(1, 1.0));
  const AugmentedModel a = augment(p, 0.1, 0.9);
  CHECK(a.A_aug == (MatrixXd(2, 2) << 0.3, -0.7, 0, 0).finished());
  CHECK(a.B_aug == (MatrixXd(2, 1) << 0, 1).finished());
}

TEST_CASE("property: the augmented step reproduces the plant and the integrator") {
  for (const bool second : {false, true}) {
    const PlantModel p = second ? fixtures::case2_plant() : fixtures::case1_plant();
    const AugmentedModel a = second ? augment(p, 1.0 / 3000, 2999.0 / 3000)
                                    : augment(p, 1.0 / 1500, 1499.0 / 1500);
    Rng rng(11);
    for (int k = 0; k < 500; ++k) {
      const VectorXd z = rng.uniform(a.state_box.lower, a.state_box.upper);
      const VectorXd th = rng.uniform(VectorXd::Constant(a.m, -50), VectorXd::Constant(a.m, 50));
      const VectorXd next = a.step(z, th);
      const VectorXd xp = p.step(z.head(a.n), z.tail(a.m));
      CHECK((next.head(a.n) - xp).cwiseAbs().maxCoeff() <= 1e-12);
      CHECK((next.tail(a.m).array() == th.array()).all());
    }
  }
}

TEST_CASE("property: augmented initial and unsafe sets are disjoint for valid eps") {
  Rng rng(5);
  for (int k = 0; k < 200; ++k) {
    const double e1 = 1e-4 + 0.98 * rng.uniform01();
    const double e2 = 1e-4 + 0.98 * rng.uniform01();
    for (const auto band : {InputBand::PerCoordinate, InputBand::Joint}) {
      const AugmentedModel a = augment(fixtures::case1_plant(), e1, e2, band);
      for (const Box& i : a.initial_boxes) {
        for (const Box& u : a.unsafe_boxes) CHECK_FALSE(intersects(i, u));
      }
    }
  }
}

TEST_CASE("case 2 input bands") {
  const PlantModel p = fixtures::case2_plant();
  const AugmentedModel per = augment(p, 1.0 / 3000, 2999.0 / 3000);
  const AugmentedModel joint = augment(p, 1.0 / 3000, 2999.0 / 3000, InputBand::Joint);
  CHECK(per.unsafe_boxes.size() == 2 + 2 * 5);
  CHECK(joint.unsafe_boxes.size() == 4);
  // Only one input at its bound: unsafe under the per-coordinate reading only.
  VectorXd z = VectorXd::Zero(15);
  z(10) = 30.005;
  CHECK(contains(per.unsafe_boxes, z));
  CHECK_FALSE(contains(joint.unsafe_boxes, z));
  z.tail(5).setConstant(-30.0);
  CHECK(contains(joint.unsafe_boxes, z));
  CHECK(joint.state_box.upper(14) == doctest::Approx(30.01).epsilon(1e-12));
}

TEST_CASE("augment rejects bad eps and non-box inputs") {
  const PlantModel p = fixtures::case1_plant();
  CHECK_THROWS_AS(augment(p, 0.0, 0.5), Error);
  CHECK_THROWS_AS(augment(p, 0.5, 1.0), Error);
  PlantModel q = p;
  q.inputs.rows = {VectorXd::Constant(1, 0.1), VectorXd::Constant(1, -0.05)};
  CHECK_THROWS_AS(augment(q, 0.1, 0.5), Error);
}

TEST_CASE("region validation") {
  PlantModel p = fixtures::case1_plant();
  p.regions.unsafe_boxes.push_back(Box(VectorXd::Constant(2, 0.5), VectorXd::Constant(2, 2)));
  CHECK_THROWS_AS(p.validate(), Error);
  p = fixtures::case1_plant();
  p.regions.initial_boxes = {Box(VectorXd::Constant(2, -6), VectorXd::Constant(2, 1))};
  CHECK_THROWS_AS(p.validate(), Error);
  CHECK_THROWS_AS(Box(VectorXd::Constant(2, 1), VectorXd::Constant(2, 0)), Error);
}

TEST_CASE("input constraint boundedness") {
  InputConstraints c = InputConstraints::box(VectorXd::Constant(2, 3.0));
  CHECK_NOTHROW(c.validate_bounded());
  CHECK(c.admissible((VectorXd(2) << 3, -3).finished()));
  CHECK_FALSE(c.admissible((VectorXd(2) << 3.0001, 0).finished()));
  InputConstraints half;
  half.rows = {(VectorXd(2) << 1, 0).finished(), (VectorXd(2) << 0, 1).finished()};
  CHECK_THROWS_AS(half.validate_bounded(), Error);
  InputConstraints tri;
  tri.rows = {(VectorXd(2) << 1, 0).finished(), (VectorXd(2) << 0, 1).finished(),
              (VectorXd(2) << -1, -1).finished()};
  CHECK_NOTHROW(tri.validate_bounded());
}

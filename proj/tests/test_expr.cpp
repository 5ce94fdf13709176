#include <cmath>
#include <random>

#include "acbc/error.hpp"
#include "acbc/expr.hpp"
#include "doctest.h"

using namespace acbc;

namespace {

std::vector<std::string> case1_terms() {
  return {"x1", "x2", "u1", "ln(1 + x1*x1)", "ln(1 + x2*x2)", "ln(1 + u1*u1)",
          "cos(x1)", "cos(x2)", "cos(u1)", "sin(u1)"};
}

double ev(const std::string& s, std::vector<double> x, std::vector<double> u) {
  return eval_term(parse_term(s, static_cast<int>(x.size()), static_cast<int>(u.size())), x, u);
}

// Random grammar-generated expression over (n, m).
TermExpr random_term(std::mt19937_64& rng, int n, int m, int depth) {
  std::uniform_int_distribution<int> pick(0, depth <= 0 ? 1 : 4);
  switch (pick(rng)) {
    case 0: {
      std::uniform_real_distribution<double> v(-5.0, 5.0);
      const double c = std::uniform_int_distribution<int>(0, 1)(rng) ? v(rng)
                                                                       : std::round(v(rng));
      return TermExpr::constant(c);
    }
    case 1: {
      const bool state = m == 0 || std::uniform_int_distribution<int>(0, 1)(rng);
      const int k = std::uniform_int_distribution<int>(1, state ? n : m)(rng);
      return TermExpr::variable(state ? VarKind::State : VarKind::Input, k);
    }
    case 2:
      return TermExpr::add(random_term(rng, n, m, depth - 1),
                           random_term(rng, n, m, depth - 1));
    case 3:
      return TermExpr::mul(random_term(rng, n, m, depth - 1),
                           random_term(rng, n, m, depth - 1));
    default: {
      const auto f = static_cast<FuncKind>(std::uniform_int_distribution<int>(0, 5)(rng));
      return TermExpr::func(f, random_term(rng, n, m, depth - 1));
    }
  }
}

}  // namespace

TEST_CASE("parse examples") {
  const TermExpr a = parse_term("sin(u1)", 2, 1);
  CHECK(a.kind() == TermExpr::Kind::Func);
  CHECK(a.func_kind() == FuncKind::Sin);
  CHECK(a.lhs() == TermExpr::variable(VarKind::Input, 1));

  const TermExpr b = parse_term("ln(1 + x1*x1)", 2, 1);
  const TermExpr x1 = TermExpr::variable(VarKind::State, 1);
  CHECK(b == TermExpr::func(FuncKind::Ln,
                            TermExpr::add(TermExpr::constant(1.0), TermExpr::mul(x1, x1))));

  CHECK(parse_term("x2", 2, 1) == TermExpr::variable(VarKind::State, 2));
  CHECK(parse_term("  x1 *x2+ 3 ", 2, 0) ==
        TermExpr::add(TermExpr::mul(x1, TermExpr::variable(VarKind::State, 2)),
                      TermExpr::constant(3.0)));
  CHECK(parse_term("tanh(1+x1*x1)", 1, 0).func_kind() == FuncKind::Tanh);
  CHECK(parse_term("atan(x1)", 1, 0).func_kind() == FuncKind::Atan);
  CHECK(parse_term("-2.5e-1*x1", 1, 0).lhs().value() == -0.25);
}

TEST_CASE("parse errors") {
  auto kind_of = [](const std::string& s, int n, int m) {
    try {
      parse_term(s, n, m);
    } catch (const Error& e) {
      return e.kind();
    }
    return ErrorKind::Io;  // sentinel: no error
  };
  CHECK(kind_of("sin(x1", 1, 0) == ErrorKind::Syntax);
  CHECK(kind_of("x1 +", 1, 0) == ErrorKind::Syntax);
  CHECK(kind_of("exp(x1)", 1, 0) == ErrorKind::Syntax);
  CHECK(kind_of("x0", 1, 0) == ErrorKind::Syntax);
  CHECK(kind_of("x1 x1", 1, 0) == ErrorKind::Syntax);
  CHECK(kind_of("x3", 2, 1) == ErrorKind::Dimension);
  CHECK(kind_of("u2", 2, 1) == ErrorKind::Dimension);
  CHECK(kind_of("u1", 2, 0) == ErrorKind::Dimension);
  try {
    parse_term("x1 + @", 1, 0);
    FAIL("expected throw");
  } catch (const Error& e) {
    CHECK(std::string(e.what()).find("position 5") != std::string::npos);
  }
}

TEST_CASE("eval examples") {
  CHECK(ev("cos(x1)", {0, 0}, {0}) == 1.0);
  CHECK(ev("ln(1+x1*x1)", {1, 0}, {0}) == doctest::Approx(0.693147).epsilon(1e-6));
  CHECK(ev("ln(1+x1*x1)", {1, 0}, {0}) == std::log(2.0));
  CHECK(ev("sin(u1)", {0, 0}, {0}) == 0.0);
  CHECK(ev("tan(x1)", {0.3}, {}) == std::tan(0.3));
  CHECK(ev("2*x1 + x2*3", {1, 2}, {}) == 8.0);
  CHECK_THROWS_AS(ev("ln(x1)", {0.0}, {}), Error);
  CHECK_THROWS_AS(ev("ln(x1 + -2)", {1.0}, {}), Error);
}

TEST_CASE("dictionary evaluation") {
  const Dictionary d = Dictionary::parse(2, 1, case1_terms());
  CHECK(d.size() == 10);
  CHECK(d.nonlinear_size() == 7);
  Eigen::VectorXd x(2), u(1);
  x << 0, 0;
  u << 0;
  Eigen::VectorXd expect(10);
  expect << 0, 0, 0, 0, 0, 0, 1, 1, 1, 0;
  CHECK(d.eval(x, u) == expect);
  x << 1, 0;
  expect << 1, 0, 0, std::log(2.0), 0, 0, std::cos(1.0), 1, 1, 0;
  CHECK((d.eval(x, u) - expect).cwiseAbs().maxCoeff() == 0.0);
  CHECK(eval_dictionary(d, x, u) == d.eval(x, u));
  CHECK(d.eval_nonlinear(x, u) == expect.tail(7));
}

TEST_CASE("dictionary validation") {
  CHECK_THROWS_AS(Dictionary::parse(2, 1, {"x2", "x1", "u1"}), Error);
  CHECK_THROWS_AS(Dictionary::parse(2, 1, {"x1", "x2"}), Error);
  CHECK_THROWS_AS(Dictionary::parse(1, 0, {"x1", "3"}), Error);
  CHECK_THROWS_AS(Dictionary::parse(1, 0, {"x1", "sin(2)"}), Error);
  CHECK_NOTHROW(Dictionary::parse(1, 0, {"x1", "cos(x1)"}));

  const Dictionary d = Dictionary::parse(1, 0, {"x1", "ln(x1 + 2)", "tan(x1)"});
  Eigen::VectorXd lo(1), hi(1), e(0);
  lo << -1;
  hi << 1;
  CHECK_NOTHROW(d.validate_on_box(lo, hi, e, e));
  lo << -3;
  CHECK_THROWS_AS(d.validate_on_box(lo, hi, e, e), Error);
  lo << -1;
  hi << 2;  // tan pole at pi/2
  CHECK_THROWS_AS(d.validate_on_box(lo, hi, e, e), Error);
}

TEST_CASE("interval bounds enclose samples") {
  std::mt19937_64 rng(7);
  for (int trial = 0; trial < 300; ++trial) {
    const TermExpr t = random_term(rng, 2, 1, 3);
    Eigen::VectorXd xl(2), xh(2), ul(1), uh(1);
    std::uniform_real_distribution<double> c(-3.0, 3.0), w(0.0, 2.0);
    for (int i = 0; i < 2; ++i) {
      xl(i) = c(rng);
      xh(i) = xl(i) + w(rng);
    }
    ul(0) = c(rng);
    uh(0) = ul(0) + w(rng);
    bool ok = true;
    const Interval iv = bound_term(t, xl, xh, ul, uh, ok);
    if (!ok) continue;
    std::uniform_real_distribution<double> s(0.0, 1.0);
    for (int k = 0; k < 50; ++k) {
      std::vector<double> x = {xl(0) + s(rng) * (xh(0) - xl(0)),
                               xl(1) + s(rng) * (xh(1) - xl(1))};
      std::vector<double> u = {ul(0) + s(rng) * (uh(0) - ul(0))};
      double v = 0.0;
      try {
        v = eval_term(t, x, u);
      } catch (const Error&) {
        FAIL("domain error inside a validated enclosure");
      }
      const double slack = 1e-9 * (1.0 + std::abs(v));
      CHECK(v >= iv.lo - slack);
      CHECK(v <= iv.hi + slack);
    }
  }
}

TEST_CASE("property: render/parse round trip") {
  std::mt19937_64 rng(42);
  for (int trial = 0; trial < 2000; ++trial) {
    const TermExpr t = random_term(rng, 3, 2, 4);
    const std::string s = render_term(t);
    const TermExpr back = parse_term(s, 3, 2);
    INFO(s);
    CHECK(back == t);
  }
}

TEST_CASE("property: prefix law is bitwise exact") {
  const Dictionary d = Dictionary::parse(2, 1, case1_terms());
  std::mt19937_64 rng(3);
  std::uniform_real_distribution<double> v(-1e3, 1e3);
  for (int trial = 0; trial < 1000; ++trial) {
    Eigen::VectorXd x(2), u(1);
    x << v(rng), v(rng);
    u << v(rng);
    const Eigen::VectorXd f = d.eval(x, u);
    CHECK(f(0) == x(0));
    CHECK(f(1) == x(1));
    CHECK(f(2) == u(0));
  }
}

TEST_CASE("property: central differences converge at second order") {
  const std::vector<std::string> terms = {
      "ln(1 + x1*x1)", "tanh(1 + x1*x1)", "sin(1 + x2*x2)", "atan(x1*u1)",
      "cos(u1)*x2", "tan(0.3*x1)"};
  std::mt19937_64 rng(11);
  std::uniform_real_distribution<double> v(-1.5, 1.5);
  for (const auto& s : terms) {
    const TermExpr t = parse_term(s, 2, 1);
    for (int trial = 0; trial < 20; ++trial) {
      std::vector<double> x = {v(rng), v(rng)};
      std::vector<double> u = {v(rng)};
      auto fd = [&](double h) {
        auto xp = x, xm = x;
        xp[0] += h;
        xm[0] -= h;
        return (eval_term(t, xp, u) - eval_term(t, xm, u)) / (2 * h);
      };
      // Richardson: error(h) ~ C h^2, so d(h) - d(h/2) ~ 4 (d(h/2) - d(h/4)).
      const double d1 = fd(1e-2), d2 = fd(5e-3), d3 = fd(2.5e-3);
      const double e1 = d1 - d2, e2 = d2 - d3;
      if (std::abs(e2) < 1e-9) continue;  // locally quadratic or flat
      INFO(s);
      CHECK(e1 / e2 == doctest::Approx(4.0).epsilon(0.05));
    }
  }
}

TEST_CASE("inputs_as_states") {
  const TermExpr t = parse_term("sin(u1)", 2, 1);
  CHECK(render_term(inputs_as_states(t, 2)) == "sin(x3)");
  const TermExpr s = parse_term("x1*u2 + cos(u1)", 2, 2);
  CHECK(render_term(inputs_as_states(s, 2)) == "x1*x4 + cos(x3)");
}

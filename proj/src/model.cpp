#include "acbc/model.hpp"

#include <cmath>
#include <sstream>

#include "acbc/error.hpp"
#include "acbc/sdp.hpp"

namespace acbc {

Box::Box(Eigen::VectorXd lo, Eigen::VectorXd hi)
    : lower(std::move(lo)), upper(std::move(hi)) {
  if (lower.size() != upper.size()) {
    throw Error(ErrorKind::Dimension, "box bounds differ in dimension");
  }
  for (int i = 0; i < lower.size(); ++i) {
    if (!std::isfinite(lower(i)) || !std::isfinite(upper(i))) {
      throw Error(ErrorKind::InvalidArgument, "box bounds must be finite");
    }
    if (lower(i) > upper(i)) {
      std::ostringstream os;
      os << "box lower bound exceeds upper bound on axis " << i + 1;
      throw Error(ErrorKind::InvalidArgument, os.str());
    }
  }
}

bool Box::contains(const Eigen::VectorXd& p) const {
  if (p.size() != lower.size()) {
    throw Error(ErrorKind::Dimension, "point and box differ in dimension");
  }
  return (p.array() >= lower.array()).all() && (p.array() <= upper.array()).all();
}

bool contains(const BoxUnion& region, const Eigen::VectorXd& p) {
  for (const auto& b : region) {
    if (b.contains(p)) return true;
  }
  return false;
}

bool intersects(const Box& a, const Box& b) {
  if (a.dim() != b.dim()) {
    throw Error(ErrorKind::Dimension, "boxes differ in dimension");
  }
  return (a.lower.array() <= b.upper.array()).all() &&
         (b.lower.array() <= a.upper.array()).all();
}

Box product(const Box& a, const Box& b) {
  Eigen::VectorXd lo(a.dim() + b.dim()), hi(a.dim() + b.dim());
  lo << a.lower, b.lower;
  hi << a.upper, b.upper;
  return Box(lo, hi);
}

namespace {

bool subset(const Box& inner, const Box& outer) {
  return (inner.lower.array() >= outer.lower.array()).all() &&
         (inner.upper.array() <= outer.upper.array()).all();
}

}  // namespace

void RegionSpec::validate() const {
  const int d = state_box.dim();
  if (d == 0) throw Error(ErrorKind::Config, "state box is empty");
  if (initial_boxes.empty()) throw Error(ErrorKind::Config, "no initial boxes");
  if (unsafe_boxes.empty()) throw Error(ErrorKind::Config, "no unsafe boxes");
  for (const auto& b : initial_boxes) {
    if (b.dim() != d) throw Error(ErrorKind::Config, "initial box dimension");
    if (!subset(b, state_box)) {
      throw Error(ErrorKind::Config, "initial box is not inside the state box");
    }
  }
  for (const auto& b : unsafe_boxes) {
    if (b.dim() != d) throw Error(ErrorKind::Config, "unsafe box dimension");
    if (!subset(b, state_box)) {
      throw Error(ErrorKind::Config, "unsafe box is not inside the state box");
    }
    for (const auto& i : initial_boxes) {
      if (intersects(b, i)) {
        throw Error(ErrorKind::Config, "initial and unsafe sets intersect");
      }
    }
  }
}

InputConstraints InputConstraints::box(const Eigen::VectorXd& u_max) {
  InputConstraints c;
  const int m = static_cast<int>(u_max.size());
  for (int i = 0; i < m; ++i) {
    if (!(u_max(i) > 0.0) || !std::isfinite(u_max(i))) {
      throw Error(ErrorKind::Config, "input bounds must be positive and finite");
    }
    Eigen::VectorXd r = Eigen::VectorXd::Zero(m);
    r(i) = 1.0 / u_max(i);
    c.rows.push_back(r);
    c.rows.push_back(-r);
  }
  return c;
}

bool InputConstraints::admissible(const Eigen::VectorXd& u, double tol) const {
  for (const auto& r : rows) {
    if (r.dot(u) > 1.0 + tol) return false;
  }
  return true;
}

std::optional<Eigen::VectorXd> InputConstraints::as_box() const {
  const int mm = m();
  if (mm == 0 || static_cast<int>(rows.size()) != 2 * mm) return std::nullopt;
  Eigen::VectorXd up = Eigen::VectorXd::Constant(mm, NAN);
  Eigen::VectorXd dn = Eigen::VectorXd::Constant(mm, NAN);
  for (const auto& r : rows) {
    int nz = -1;
    for (int i = 0; i < mm; ++i) {
      if (r(i) != 0.0) {
        if (nz >= 0) return std::nullopt;
        nz = i;
      }
    }
    if (nz < 0) return std::nullopt;
    Eigen::VectorXd& slot = r(nz) > 0 ? up : dn;
    if (!std::isnan(slot(nz))) return std::nullopt;
    slot(nz) = 1.0 / std::abs(r(nz));
  }
  for (int i = 0; i < mm; ++i) {
    if (std::isnan(up(i)) || std::isnan(dn(i))) return std::nullopt;
    if (std::abs(up(i) - dn(i)) > 1e-12 * up(i)) return std::nullopt;
  }
  return up;
}

void InputConstraints::validate_bounded() const {
  const int mm = m();
  if (mm == 0) return;
  const int j = static_cast<int>(rows.size());
  Eigen::MatrixXd C(mm, j);
  for (int k = 0; k < j; ++k) {
    if (rows[k].size() != mm) {
      throw Error(ErrorKind::Config, "input constraint rows differ in length");
    }
    C.col(k) = rows[k];
  }
  Eigen::FullPivLU<Eigen::MatrixXd> lu(C);
  if (lu.rank() < mm) {
    throw Error(ErrorKind::Config, "input constraint set is unbounded (rank deficient)");
  }
  // Feasibility LP: lambda >= 1, C lambda = 0.
  sdp::ProblemBuilder b;
  std::vector<int> lam(j);
  for (int k = 0; k < j; ++k) {
    lam[k] = b.scalar();
    b.add_nonneg(sdp::LinExpr::var(lam[k]) - sdp::LinExpr(1.0));
  }
  for (int i = 0; i < mm; ++i) {
    sdp::LinExpr e;
    for (int k = 0; k < j; ++k) e += sdp::LinExpr::var(lam[k], C(i, k));
    b.add_equal(e, sdp::LinExpr(0.0));
  }
  const sdp::SdpSolution s = sdp::solve(b.build());
  if (s.status != sdp::Status::Optimal) {
    throw Error(ErrorKind::Config, "input constraint set is unbounded");
  }
}

void PlantModel::validate() const {
  const int nn = n(), mm = m(), N = dictionary.size();
  if (A.rows() != nn || A.cols() != N) {
    std::ostringstream os;
    os << "A must be " << nn << " x " << N << ", got " << A.rows() << " x " << A.cols();
    throw Error(ErrorKind::Config, os.str());
  }
  if (!A.allFinite()) throw Error(ErrorKind::Config, "A has non-finite entries");
  if (regions.state_box.dim() != nn) {
    throw Error(ErrorKind::Config, "state box dimension differs from n");
  }
  regions.validate();
  if (inputs.m() != mm) {
    throw Error(ErrorKind::Config, "input constraints dimension differs from m");
  }
  inputs.validate_bounded();
}

Eigen::VectorXd PlantModel::step(const Eigen::VectorXd& x,
                                 const Eigen::VectorXd& u) const {
  return A * dictionary.eval(x, u);
}

Eigen::VectorXd AugmentedModel::features(const Eigen::VectorXd& zeta) const {
  return dictionary.eval(zeta, Eigen::VectorXd(0));
}

Eigen::VectorXd AugmentedModel::psi(const Eigen::VectorXd& zeta) const {
  return dictionary.eval_nonlinear(zeta, Eigen::VectorXd(0));
}

Eigen::VectorXd AugmentedModel::step(const Eigen::VectorXd& zeta,
                                     const Eigen::VectorXd& theta) const {
  return A_aug * features(zeta) + B_aug * theta;
}

AugmentedModel augment(const PlantModel& plant, double eps1, double eps2, InputBand band) {
  if (!(eps1 > 0.0 && eps1 < 1.0) || !(eps2 > 0.0 && eps2 < 1.0)) {
    throw Error(ErrorKind::Config, "eps1 and eps2 must lie in (0, 1)");
  }
  plant.validate();
  const auto u_max = plant.inputs.as_box();
  if (!u_max) {
    throw Error(ErrorKind::Config,
                "only symmetric box input constraints are supported by augment");
  }
  const int n = plant.n(), m = plant.m(), N = plant.dictionary.size();

  AugmentedModel a;
  a.n = n;
  a.m = m;
  a.eps1 = eps1;
  a.eps2 = eps2;
  a.u_max = *u_max;

  std::vector<TermExpr> terms;
  terms.reserve(N);
  for (const auto& t : plant.dictionary.terms()) terms.push_back(inputs_as_states(t, n));
  a.dictionary = Dictionary(n + m, 0, std::move(terms));

  a.A_aug = Eigen::MatrixXd::Zero(n + m, N);
  a.A_aug.topRows(n) = plant.A;
  a.B_aug = Eigen::MatrixXd::Zero(n + m, m);
  a.B_aug.bottomRows(m) = Eigen::MatrixXd::Identity(m, m);

  const Eigen::VectorXd outer = (1.0 + eps1) * a.u_max;
  const Eigen::VectorXd inner = (1.0 - eps2) * a.u_max;
  const Box u_range(-outer, outer);
  const Box u_init(-inner, inner);

  a.state_box = product(plant.regions.state_box, u_range);
  for (const auto& b : plant.regions.initial_boxes) {
    a.initial_boxes.push_back(product(b, u_init));
  }
  for (const auto& b : plant.regions.unsafe_boxes) {
    a.unsafe_boxes.push_back(product(b, u_range));
  }
  if (band == InputBand::Joint) {
    a.unsafe_boxes.push_back(product(plant.regions.state_box, Box(-outer, -a.u_max)));
    a.unsafe_boxes.push_back(product(plant.regions.state_box, Box(a.u_max, outer)));
  }
  for (int i = 0; i < m && band == InputBand::PerCoordinate; ++i) {
    Eigen::VectorXd lo = -outer, hi = outer;
    hi(i) = -a.u_max(i);
    a.unsafe_boxes.push_back(product(plant.regions.state_box, Box(lo, hi)));
    lo = -outer;
    hi = outer;
    lo(i) = a.u_max(i);
    a.unsafe_boxes.push_back(product(plant.regions.state_box, Box(lo, hi)));
  }

  a.dictionary.validate_on_box(a.state_box.lower, a.state_box.upper,
                               Eigen::VectorXd(0), Eigen::VectorXd(0));
  return a;
}

}  // namespace acbc

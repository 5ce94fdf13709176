#include "acbc/synth.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <sstream>

#include "acbc/error.hpp"
#include "acbc/rng.hpp"

namespace acbc {

using Eigen::MatrixXd;
using Eigen::VectorXd;
using sdp::AffineMatrix;
using sdp::LinExpr;

namespace {

struct Z2Model {
  sdp::ProblemBuilder builder;
  int t = 0;
  AffineMatrix Z2;
};

Z2Model z2_model(const MatrixXd& S_plus, const MatrixXd& M, int n, int m, NormKind norm) {
  const int N = static_cast<int>(M.rows()), T = static_cast<int>(M.cols());
  const int d = n + m, q = N - d;
  if (S_plus.rows() != d || S_plus.cols() != T) {
    throw Error(ErrorKind::Dimension, "S+ must be (n+m) x T");
  }
  if (q < 0) throw Error(ErrorKind::Dimension, "dictionary shorter than n + m");
  Z2Model z;
  z.t = z.builder.scalar();
  z.Z2 = z.builder.matrix_var(T, q);
  MatrixXd rhs = MatrixXd::Zero(N, q);
  rhs.bottomRows(q) = MatrixXd::Identity(q, q);
  z.builder.add_equal(M * z.Z2, AffineMatrix::constant(rhs));
  const AffineMatrix G = S_plus * z.Z2;
  const LinExpr t = LinExpr::var(z.t);
  if (norm == NormKind::Spectral) {
    z.builder.add_psd(AffineMatrix::blocks(AffineMatrix::identity(d, t), G, G.transpose(),
                                           AffineMatrix::identity(q, t)));
  } else {
    AffineMatrix v(d * q, 1);
    for (int r = 0; r < d; ++r)
      for (int c = 0; c < q; ++c) v(r * q + c, 0) = G(r, c);
    z.builder.add_psd(AffineMatrix::blocks(AffineMatrix::identity(1, t), v.transpose(), v,
                                           AffineMatrix::identity(d * q, t)));
  }
  z.builder.minimize(t);
  return z;
}

struct BarrierModel {
  sdp::ProblemBuilder builder;
  AffineMatrix Pi, Y;
  int kappa = 0;
};

AffineMatrix lmi_block(const MatrixXd& S_plus, const AffineMatrix& Pi, const AffineMatrix& Y,
                       double varpi) {
  const AffineMatrix SY = S_plus * Y;
  return AffineMatrix::blocks((1.0 / (1.0 + varpi)) * Pi, SY, SY.transpose(), Pi);
}

AffineMatrix pi_target(const AffineMatrix& Pi, int N) {
  const int d = Pi.rows();
  return AffineMatrix::vcat(Pi, AffineMatrix::constant(MatrixXd::Zero(N - d, d)));
}

BarrierModel barrier_model(const MatrixXd& S_plus, const MatrixXd& M, double varpi) {
  if (!(varpi > 0.0) || !std::isfinite(varpi)) {
    throw Error(ErrorKind::InvalidArgument, "varpi must be positive");
  }
  const int N = static_cast<int>(M.rows()), T = static_cast<int>(M.cols());
  const int d = static_cast<int>(S_plus.rows());
  if (S_plus.cols() != T || N < d) throw Error(ErrorKind::Dimension, "data shapes");
  BarrierModel b;
  b.Pi = b.builder.symmetric_var(d);
  b.Y = b.builder.matrix_var(T, d);
  b.kappa = b.builder.scalar();
  b.builder.add_equal(M * b.Y, pi_target(b.Pi, N));
  b.builder.add_psd(lmi_block(S_plus, b.Pi, b.Y, varpi));
  b.builder.add_psd(b.Pi - AffineMatrix::identity(d, LinExpr::var(b.kappa)));
  b.builder.add_psd(AffineMatrix::constant(MatrixXd::Identity(d, d)) - b.Pi);
  b.builder.add_nonneg(LinExpr::var(b.kappa) - LinExpr(kKappaMin));
  b.builder.minimize(LinExpr::var(b.kappa, -1.0));
  return b;
}

double min_eig(const MatrixXd& m) {
  Eigen::SelfAdjointEigenSolver<MatrixXd> es(0.5 * (m + m.transpose()), Eigen::EigenvaluesOnly);
  return es.eigenvalues()(0);
}

double max_eig(const MatrixXd& m) {
  Eigen::SelfAdjointEigenSolver<MatrixXd> es(0.5 * (m + m.transpose()), Eigen::EigenvaluesOnly);
  return es.eigenvalues()(es.eigenvalues().size() - 1);
}

}  // namespace

sdp::SdpProblem build_spectral_norm_problem(const MatrixXd& S_plus, const MatrixXd& M, int n,
                                            int m, NormKind norm) {
  return z2_model(S_plus, M, n, m, norm).builder.build();
}

Z2Result solve_z2(const DataMatrices& dm, const MatrixXd& S_plus, int n, int m,
                  NormKind norm) {
  const int N = static_cast<int>(dm.M.rows()), T = static_cast<int>(dm.M.cols());
  const int q = N - n - m;
  Z2Result r;
  if (q == 0) {
    r.Z2 = MatrixXd::Zero(T, 0);
    return r;
  }
  Z2Model z = z2_model(S_plus, dm.M, n, m, norm);
  r.solution = sdp::solve(z.builder.build());
  if (r.solution.status == sdp::Status::Infeasible) {
    throw Error(ErrorKind::Richness,
                "M Z2 = [0; I] has no solution; the data are not rich enough");
  }
  if (r.solution.status != sdp::Status::Optimal) {
    throw Error(ErrorKind::Numerical, "Z2 problem: " + r.solution.message);
  }
  r.Z2 = z.Z2.eval(r.solution.y);
  MatrixXd rhs = MatrixXd::Zero(N, q);
  rhs.bottomRows(q) = MatrixXd::Identity(q, q);
  r.eq_residual = (dm.M * r.Z2 - rhs).cwiseAbs().maxCoeff();
  const MatrixXd G = S_plus * r.Z2;
  if (norm == NormKind::Spectral) {
    Eigen::JacobiSVD<MatrixXd> svd(G);
    r.norm = svd.singularValues().size() ? svd.singularValues()(0) : 0.0;
  } else {
    r.norm = G.norm();
  }
  return r;
}

sdp::SdpProblem build_barrier_lmi_problem(const MatrixXd& S_plus, const MatrixXd& M,
                                          double varpi) {
  return barrier_model(S_plus, M, varpi).builder.build();
}

BarrierResult solve_barrier(const DataMatrices& dm, const MatrixXd& S_plus, double varpi) {
  BarrierModel b = barrier_model(S_plus, dm.M, varpi);
  BarrierResult r;
  r.solution = sdp::solve(b.builder.build());
  if (r.solution.status == sdp::Status::Infeasible) {
    throw Error(ErrorKind::Infeasible,
                "no quadratic A-CBC found with this varpi/data (barrier LMI infeasible)");
  }
  if (r.solution.status != sdp::Status::Optimal) {
    throw Error(ErrorKind::Numerical, "barrier LMI: " + r.solution.message);
  }
  r.Pi = b.Pi.eval(r.solution.y);
  r.Pi = (0.5 * (r.Pi + r.Pi.transpose())).eval();
  r.Y = b.Y.eval(r.solution.y);
  r.kappa = r.solution.y(b.kappa);
  const double pmin = min_eig(r.Pi);
  if (!(pmin >= 1e-8)) {
    std::ostringstream os;
    os << "no quadratic A-CBC found with this varpi/data (lambda_min(Pi) = " << pmin << ")";
    throw Error(ErrorKind::Infeasible, os.str());
  }
  r.P = r.Pi.llt().solve(MatrixXd::Identity(r.Pi.rows(), r.Pi.cols()));
  r.P = (0.5 * (r.P + r.P.transpose())).eval();
  const int N = static_cast<int>(dm.M.rows()), d = static_cast<int>(r.Pi.rows());
  MatrixXd target = MatrixXd::Zero(N, d);
  target.topRows(d) = r.Pi;
  r.eq_residual = (dm.M * r.Y - target).cwiseAbs().maxCoeff();
  const MatrixXd SY = S_plus * r.Y;
  MatrixXd lmi(2 * d, 2 * d);
  lmi << r.Pi / (1.0 + varpi), SY, SY.transpose(), r.Pi;
  r.lmi_min_eig = min_eig(lmi);
  return r;
}

FixedPiResult solve_y_for_fixed_pi(const DataMatrices& dm, const MatrixXd& S_plus,
                                   const MatrixXd& Pi, double varpi) {
  const int N = static_cast<int>(dm.M.rows()), T = static_cast<int>(dm.M.cols());
  const int d = static_cast<int>(Pi.rows());
  sdp::ProblemBuilder b;
  const AffineMatrix Y = b.matrix_var(T, d);
  const int s = b.scalar();
  const AffineMatrix P = AffineMatrix::constant(Pi);
  b.add_equal(dm.M * Y, pi_target(P, N));
  b.add_psd(lmi_block(S_plus, P, Y, varpi) - AffineMatrix::identity(2 * d, LinExpr::var(s)));
  b.minimize(LinExpr::var(s, -1.0));
  FixedPiResult r;
  r.solution = sdp::solve(b.build());
  if (r.solution.status == sdp::Status::Infeasible) {
    throw Error(ErrorKind::Infeasible,
                "equality M Y = [Pi; 0] has no solution for the fixed Pi");
  }
  if (r.solution.status != sdp::Status::Optimal) {
    throw Error(ErrorKind::Numerical, "fixed-Pi Y problem: " + r.solution.message);
  }
  r.Y = Y.eval(r.solution.y);
  r.margin = r.solution.y(s);
  MatrixXd target = MatrixXd::Zero(N, d);
  target.topRows(d) = Pi;
  r.eq_residual = (dm.M * r.Y - target).cwiseAbs().maxCoeff();
  const MatrixXd SY = S_plus * r.Y;
  MatrixXd lmi(2 * d, 2 * d);
  lmi << Pi / (1.0 + varpi), SY, SY.transpose(), Pi;
  r.lmi_min_eig = min_eig(lmi);
  r.feasible = r.lmi_min_eig >= -1e-8 && r.eq_residual <= 1e-7;
  return r;
}

// ---------------------------------------------------------------------------
// c_a

namespace {

double residual_sq(const MatrixXd& G, const AugmentedModel& aug, const VectorXd& z) {
  return (G * aug.psi(z)).squaredNorm();
}

// Compass search maximizing f inside the box.
template <class F>
double pattern_search(F&& f, const Box& box, VectorXd& x, double fx, VectorXd step,
                      int iterations, double tol) {
  const int d = box.dim();
  const VectorXd width = box.width();
  for (int it = 0; it < iterations; ++it) {
    bool improved = false;
    for (int i = 0; i < d; ++i) {
      if (width(i) <= 0.0) continue;
      for (int sgn : {1, -1}) {
        VectorXd y = x;
        y(i) = std::clamp(x(i) + sgn * step(i), box.lower(i), box.upper(i));
        if (y(i) == x(i)) continue;
        const double fy = f(y);
        if (fy > fx) {
          x = y;
          fx = fy;
          improved = true;
          break;
        }
      }
    }
    if (!improved) {
      step *= 0.5;
      bool done = true;
      for (int i = 0; i < d; ++i) {
        if (width(i) > 0.0 && step(i) > tol * width(i)) done = false;
      }
      if (done) break;
    }
  }
  return fx;
}

// Iterates over the per-axis grid with `res` points (1 point on flat axes).
template <class F>
void for_each_grid_point(const Box& box, int res, F&& f) {
  const int d = box.dim();
  std::vector<int> idx(d, 0), count(d);
  for (int i = 0; i < d; ++i) count[i] = box.width()(i) > 0.0 ? res : 1;
  VectorXd p(d);
  while (true) {
    for (int i = 0; i < d; ++i) {
      p(i) = count[i] == 1 ? box.lower(i)
                           : box.lower(i) + box.width()(i) * idx[i] / (count[i] - 1);
    }
    f(p);
    int k = 0;
    while (k < d && ++idx[k] == count[k]) idx[k++] = 0;
    if (k == d) break;
  }
}

double grid_size(const Box& box, int res) {
  double s = 1.0;
  for (int i = 0; i < box.dim(); ++i) s *= box.width()(i) > 0.0 ? res : 1;
  return s;
}

}  // namespace

CaResult maximize_residual(const MatrixXd& G, const AugmentedModel& aug, const Box& box,
                           const CaOptions& opts) {
  CaResult r;
  const int d = box.dim();
  r.argmax = box.center();
  if (G.size() == 0 || G.cwiseAbs().maxCoeff() == 0.0) return r;
  if (opts.grid_res < 2) throw Error(ErrorKind::InvalidArgument, "grid_res must be >= 2");

  auto f = [&](const VectorXd& z) { return residual_sq(G, aug, z); };
  struct Seed {
    double v;
    VectorXd z;
  };
  std::vector<Seed> seeds;
  const std::size_t keep = static_cast<std::size_t>(std::max(1, opts.starts));
  auto offer = [&](const VectorXd& z, double v) {
    if (seeds.size() < keep) {
      seeds.push_back({v, z});
    } else {
      auto worst = std::min_element(seeds.begin(), seeds.end(),
                                    [](const Seed& a, const Seed& b) { return a.v < b.v; });
      if (v > worst->v) *worst = {v, z};
    }
  };

  VectorXd step(d);
  if (grid_size(box, opts.grid_res) <= static_cast<double>(opts.budget)) {
    for_each_grid_point(box, opts.grid_res, [&](const VectorXd& z) { offer(z, f(z)); });
    step = box.width() / (opts.grid_res - 1);
  } else {
    r.sampled = true;
    Rng rng(opts.seed);
    for (std::int64_t k = 0; k < opts.budget; ++k) {
      const VectorXd z = rng.uniform(box.lower, box.upper);
      offer(z, f(z));
    }
    step = box.width() * 0.25;
  }
  std::stable_sort(seeds.begin(), seeds.end(),
                   [](const Seed& a, const Seed& b) { return a.v > b.v; });
  r.max_residual_sq = seeds.front().v;
  r.argmax = seeds.front().z;
  for (auto& s : seeds) {
    VectorXd x = s.z;
    const double v = pattern_search(f, box, x, s.v, step, opts.iterations, opts.tol);
    if (v > r.max_residual_sq) {
      r.max_residual_sq = v;
      r.argmax = x;
    }
  }
  return r;
}

CaResult compute_ca(const MatrixXd& P, const MatrixXd& G, const AugmentedModel& aug,
                    double varpi, const CaOptions& opts) {
  if (!(varpi > 0.0)) throw Error(ErrorKind::InvalidArgument, "varpi must be positive");
  CaResult r = maximize_residual(G, aug, aug.state_box, opts);
  const double scale = (1.0 + 1.0 / varpi) * max_eig(P);
  r.c_a = scale * r.max_residual_sq;
  if (opts.sound && G.size() > 0) {
    if (r.sampled) {
      throw Error(ErrorKind::InvalidArgument,
                  "sound c_a needs a full grid; raise the budget or lower grid_res");
    }
    const Box& box = aug.state_box;
    const VectorXd h = box.width() / (opts.grid_res - 1);
    r.delta = 0.5 * h.norm();
    double gmax = 0.0, fmax = 0.0;
    for_each_grid_point(box, opts.grid_res, [&](const VectorXd& z) {
      fmax = std::max(fmax, residual_sq(G, aug, z));
      VectorXd g(box.dim());
      for (int i = 0; i < box.dim(); ++i) {
        const double e = 1e-6 * std::max(box.width()(i), 1e-300);
        VectorXd a = z, b = z;
        a(i) += e;
        b(i) -= e;
        g(i) = box.width()(i) > 0.0
                   ? (residual_sq(G, aug, a) - residual_sq(G, aug, b)) / (2.0 * e)
                   : 0.0;
      }
      gmax = std::max(gmax, g.norm());
    });
    r.lipschitz = 1.1 * scale * gmax;
    r.c_a = std::max(r.c_a, scale * fmax + r.lipschitz * r.delta);
  }
  return r;
}

// ---------------------------------------------------------------------------
// Levels

double max_quadratic_on_box(const MatrixXd& P, const Box& b, VectorXd* arg) {
  const int d = b.dim();
  if (P.rows() != d || P.cols() != d) throw Error(ErrorKind::Dimension, "P and box differ");
  std::vector<int> free_axes;
  for (int i = 0; i < d; ++i) {
    if (b.upper(i) > b.lower(i)) free_axes.push_back(i);
  }
  if (free_axes.size() > 20) {
    throw Error(ErrorKind::InvalidArgument, "vertex enumeration refused above 2^20 vertices");
  }
  const std::uint64_t count = 1ULL << free_axes.size();
  double best = -std::numeric_limits<double>::infinity();
  VectorXd v = b.lower;
  for (std::uint64_t mask = 0; mask < count; ++mask) {
    for (std::size_t k = 0; k < free_axes.size(); ++k) {
      const int i = free_axes[k];
      v(i) = (mask >> k) & 1ULL ? b.upper(i) : b.lower(i);
    }
    const double val = v.dot(P * v);
    if (val > best) {
      best = val;
      if (arg) *arg = v;
    }
  }
  return best;
}

double min_quadratic_on_box(const MatrixXd& P, const Box& b, VectorXd* arg) {
  const int d = b.dim();
  if (P.rows() != d || P.cols() != d) throw Error(ErrorKind::Dimension, "P and box differ");
  auto clip = [&](VectorXd x) {
    return VectorXd(x.cwiseMax(b.lower).cwiseMin(b.upper));
  };
  auto obj = [&](const VectorXd& x) { return x.dot(P * x); };
  const double L = 2.0 * std::max(max_eig(P), 1e-300);

  // FISTA from the projection of the unconstrained minimizer.
  VectorXd x = clip(VectorXd::Zero(d));
  VectorXd y = x;
  double t = 1.0;
  for (int it = 0; it < 50000; ++it) {
    const VectorXd xn = clip(y - (2.0 / L) * (P * y));
    const double tn = 0.5 * (1.0 + std::sqrt(1.0 + 4.0 * t * t));
    y = xn + ((t - 1.0) / tn) * (xn - x);
    const double move = (xn - x).norm();
    x = xn;
    t = tn;
    if (move <= 1e-13 * (1.0 + x.norm())) break;
  }
  double best = obj(x);
  VectorXd best_x = x;

  // Active-set polish: fix coordinates at bounds where the gradient pushes
  // outward, solve the free block exactly, repeat while it changes.
  VectorXd cur = x;
  for (int round = 0; round < 2 * d + 2; ++round) {
    const VectorXd g = 2.0 * (P * cur);
    std::vector<int> fr, fx;
    for (int i = 0; i < d; ++i) {
      const double tol = 1e-12 * (1.0 + std::abs(cur(i)));
      const bool at_lo = cur(i) <= b.lower(i) + tol && g(i) >= 0.0;
      const bool at_hi = cur(i) >= b.upper(i) - tol && g(i) <= 0.0;
      if ((at_lo || at_hi) || b.upper(i) == b.lower(i)) {
        fx.push_back(i);
      } else {
        fr.push_back(i);
      }
    }
    VectorXd cand = cur;
    for (int i : fx) {
      cand(i) = std::abs(cur(i) - b.lower(i)) <= std::abs(cur(i) - b.upper(i)) ? b.lower(i)
                                                                               : b.upper(i);
    }
    if (!fr.empty()) {
      const int nf = static_cast<int>(fr.size());
      MatrixXd Pff(nf, nf);
      VectorXd rhs = VectorXd::Zero(nf);
      for (int a = 0; a < nf; ++a) {
        for (int c = 0; c < nf; ++c) Pff(a, c) = P(fr[a], fr[c]);
        for (int i : fx) rhs(a) -= P(fr[a], i) * cand(i);
      }
      const VectorXd sol = Pff.ldlt().solve(rhs);
      for (int a = 0; a < nf; ++a) cand(fr[a]) = sol(a);
    }
    cand = clip(cand);
    const double v = obj(cand);
    if (v < best) {
      best = v;
      best_x = cand;
    }
    if ((cand - cur).norm() <= 1e-15 * (1.0 + cur.norm())) break;
    cur = cand;
  }
  if (arg) *arg = best_x;
  return best;
}

Levels compute_levels(const MatrixXd& P, const BoxUnion& initial, const BoxUnion& unsafe) {
  if (initial.empty() || unsafe.empty()) {
    throw Error(ErrorKind::InvalidArgument, "levels need nonempty initial and unsafe sets");
  }
  Levels l;
  l.eta = -std::numeric_limits<double>::infinity();
  l.gamma = std::numeric_limits<double>::infinity();
  for (const auto& b : initial) {
    VectorXd a;
    const double v = max_quadratic_on_box(P, b, &a);
    if (v > l.eta) {
      l.eta = v;
      l.eta_arg = a;
    }
  }
  for (const auto& b : unsafe) {
    VectorXd a;
    const double v = min_quadratic_on_box(P, b, &a);
    if (v < l.gamma) {
      l.gamma = v;
      l.gamma_arg = a;
    }
  }
  return l;
}

Levels compute_levels_conservative(const MatrixXd& P, const BoxUnion& initial,
                                   const BoxUnion& unsafe) {
  Levels l;
  double far = 0.0, near = std::numeric_limits<double>::infinity();
  for (const auto& b : initial) {
    far = std::max(far, b.lower.cwiseAbs().cwiseMax(b.upper.cwiseAbs()).squaredNorm());
  }
  for (const auto& b : unsafe) {
    const VectorXd p = VectorXd::Zero(b.dim()).cwiseMax(b.lower).cwiseMin(b.upper);
    near = std::min(near, p.squaredNorm());
  }
  l.eta = max_eig(P) * far;
  l.gamma = min_eig(P) * near;
  return l;
}

Horizon horizon(double eta, double gamma, double c_a) {
  if (!(c_a >= 0.0)) throw Error(ErrorKind::InvalidArgument, "c_a must be nonnegative");
  if (!(gamma > eta)) {
    std::ostringstream os;
    os << "level sets do not separate (gamma = " << gamma << " <= eta = " << eta << ")";
    throw Error(ErrorKind::LevelSeparation, os.str());
  }
  Horizon h;
  if (c_a == 0.0) {
    h.infinite = true;
    return h;
  }
  const double q = (gamma - eta) / c_a;
  const double cap = 9.0e15;
  const double t = q >= cap ? cap : std::ceil(q) - 1.0;
  if (t < 1.0) {
    std::ostringstream os;
    os << "decay too large: (gamma - eta) / c_a = " << q << " admits no horizon T >= 1";
    throw Error(ErrorKind::LevelSeparation, os.str());
  }
  h.steps = static_cast<std::int64_t>(t);
  return h;
}

DynamicController build_controller(const MatrixXd& I, const MatrixXd& Y, const MatrixXd& P,
                                   const MatrixXd& Z2) {
  if (Y.rows() != I.cols() || Z2.rows() != I.cols() || Y.cols() != P.rows()) {
    throw Error(ErrorKind::Dimension, "controller factor shapes");
  }
  MatrixXd Z(Y.rows(), Y.cols() + Z2.cols());
  Z << Y * P, Z2;
  return DynamicController{I * Z};
}

double closed_loop_residual(const AugmentedModel& aug, const MatrixXd& K,
                            const MatrixXd& S_plus, const MatrixXd& Z1, const MatrixXd& Z2,
                            const VectorXd& zeta) {
  const VectorXd F = aug.features(zeta);
  const VectorXd data_side = S_plus * (Z1 * zeta) + S_plus * (Z2 * aug.psi(zeta));
  const VectorXd model_side = aug.A_aug * F + aug.B_aug * (K * F);
  return (data_side - model_side).norm();
}

}  // namespace acbc

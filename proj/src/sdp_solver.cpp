#include <algorithm>
#include <cmath>
#include <limits>
#include <cstdio>
#include <sstream>

#include "acbc/error.hpp"
#include "acbc/sdp.hpp"

namespace acbc::sdp {
namespace {

using Eigen::MatrixXd;
using Eigen::VectorXd;

// Dense view of one block: every coefficient matrix stored as a column of
// `F` (vec of the full symmetric matrix for Psd, the diagonal for Nonneg).
struct DenseBlock {
  BlockKind kind;
  int k;
  VectorXd f0;
  MatrixXd F;
};

std::vector<DenseBlock> densify(const SdpProblem& p) {
  std::vector<DenseBlock> out;
  out.reserve(p.blocks.size());
  for (const auto& b : p.blocks) {
    DenseBlock d{b.kind, b.dim, {}, {}};
    if (b.kind == BlockKind::Psd) {
      d.f0 = Eigen::Map<const VectorXd>(b.constant.data(), b.dim * b.dim);
      d.F = MatrixXd::Zero(b.dim * b.dim, p.num_vars);
      for (const auto& e : b.coefs) {
        d.F(e.row + e.col * b.dim, e.var) += e.value;
        if (e.row != e.col) d.F(e.col + e.row * b.dim, e.var) += e.value;
      }
    } else {
      d.f0 = b.constant.col(0);
      d.F = MatrixXd::Zero(b.dim, p.num_vars);
      for (const auto& e : b.coefs) d.F(e.row, e.var) += e.value;
    }
    out.push_back(std::move(d));
  }
  return out;
}

double min_eig_sym(const MatrixXd& m) {
  if (m.rows() == 0) return std::numeric_limits<double>::infinity();
  Eigen::SelfAdjointEigenSolver<MatrixXd> es(m, Eigen::EigenvaluesOnly);
  return es.eigenvalues()(0);
}

double min_eig_original(const SdpProblem& p, const VectorXd& y) {
  double lo = std::numeric_limits<double>::infinity();
  for (std::size_t b = 0; b < p.blocks.size(); ++b) {
    const MatrixXd v = p.block_value(b, y);
    lo = std::min(lo, p.blocks[b].kind == BlockKind::Psd ? min_eig_sym(v)
                                                        : v.minCoeff());
  }
  return lo;
}

// Orthonormal basis of the column space of `a` (columns pre-normalized by the
// caller where scales differ). Returns Q1 with rank columns.
MatrixXd range_basis(const MatrixXd& a, double threshold, int& rank,
                     Eigen::ColPivHouseholderQR<MatrixXd>* keep = nullptr) {
  Eigen::ColPivHouseholderQR<MatrixXd> qr(a);
  qr.setThreshold(threshold);
  rank = static_cast<int>(qr.rank());
  MatrixXd q = qr.householderQ() * MatrixXd::Identity(a.rows(), rank);
  if (keep) *keep = std::move(qr);
  return q;
}

struct Iterate {
  std::vector<MatrixXd> X, S;  // Psd blocks
  std::vector<VectorXd> x, s;  // Nonneg blocks (index aligned with blocks)
  VectorXd w;
};

class Ipm {
 public:
  Ipm(std::vector<DenseBlock> blocks, VectorXd c, const SolverOptions& opts)
      : blocks_(std::move(blocks)), c_(std::move(c)), opts_(opts) {
    r_ = static_cast<int>(c_.size());
    nu_ = 0;
    for (const auto& b : blocks_) nu_ += b.k;
  }

  int iterations = 0;
  double pinf = 0, dinf = 0, relgap = 0;
  std::string message;

  Status run(VectorXd& w_out) {
    init();
    Status status = Status::NumericalFailure;
    int stalls = 0;
    // Best iterate by the worst of the three residuals; the IPM can lose
    // accuracy in its last steps on badly scaled problems.
    Iterate best;
    double best_err = std::numeric_limits<double>::infinity();
    for (iterations = 0; iterations < opts_.max_iterations; ++iterations) {
      residuals();
      const double err = std::max({pinf, dinf, relgap});
      if (err < best_err) {
        best_err = err;
        best = z_;
      }
      if (pinf <= opts_.tol && dinf <= opts_.tol && relgap <= opts_.tol) {
        status = Status::Optimal;
        break;
      }
      if (certify_infeasible()) {
        status = Status::Infeasible;
        message = "infeasibility certificate found";
        break;
      }
      if (z_.w.norm() > 1e12) {
        message = "iterates diverge; problem appears unbounded";
        break;
      }
      double ap = 0.0, ad = 0.0;
      const bool ok = step(ap, ad);
      if (opts_.verbose) {
        std::fprintf(stderr, "%3d pobj=% .9e dobj=% .9e pinf=%.2e dinf=%.2e gap=%.2e ap=%.3f ad=%.3f\n",
                     iterations, c_.dot(z_.w), -g0x(), pinf, dinf, relgap, ap, ad);
      }
      if (!ok) {
        message = "Newton system could not be solved";
        break;
      }
      stalls = (std::max(ap, ad) < 1e-6) ? stalls + 1 : 0;
      if (stalls >= 4) {
        message = "step lengths stalled";
        break;
      }
    }
    residuals();
    if (status == Status::NumericalFailure && best.w.size() == r_ &&
        best_err < std::max({pinf, dinf, relgap})) {
      z_ = best;
      residuals();
    }
    if (status == Status::NumericalFailure && pinf <= opts_.stall_tol &&
        dinf <= opts_.stall_tol && relgap <= opts_.stall_tol) {
      status = Status::Optimal;
      message = "converged to reduced accuracy";
    } else if (status == Status::NumericalFailure && message.empty()) {
      message = "iteration limit reached";
    }
    w_out = z_.w;
    return status;
  }

 private:
  void init() {
    z_.w = VectorXd::Zero(r_);
    z_.X.resize(blocks_.size());
    z_.S.resize(blocks_.size());
    z_.x.resize(blocks_.size());
    z_.s.resize(blocks_.size());
    for (std::size_t b = 0; b < blocks_.size(); ++b) {
      const DenseBlock& bl = blocks_[b];
      const double k = bl.k;
      double xi = std::max(10.0, std::sqrt(k));
      double eta = std::max(10.0, std::sqrt(k));
      double fmax = bl.f0.norm();
      for (int j = 0; j < r_; ++j) {
        const double fj = bl.F.col(j).norm();
        xi = std::max(xi, k * (1.0 + std::abs(c_(j))) / (1.0 + fj));
        fmax = std::max(fmax, fj);
      }
      eta = std::max(eta, fmax);
      if (bl.kind == BlockKind::Psd) {
        z_.X[b] = xi * MatrixXd::Identity(bl.k, bl.k);
        z_.S[b] = eta * MatrixXd::Identity(bl.k, bl.k);
      } else {
        z_.x[b] = VectorXd::Constant(bl.k, xi);
        z_.s[b] = VectorXd::Constant(bl.k, eta);
      }
    }
    x0_norm_ = xnorm();
    f0_norm_ = 0.0;
    for (const auto& b : blocks_) f0_norm_ += b.f0.squaredNorm();
    f0_norm_ = std::sqrt(f0_norm_);
  }

  double xnorm() const {
    double s = 0.0;
    for (std::size_t b = 0; b < blocks_.size(); ++b) {
      s += blocks_[b].kind == BlockKind::Psd ? z_.X[b].squaredNorm()
                                             : z_.x[b].squaredNorm();
    }
    return std::sqrt(s);
  }

  // Block slack residual Rd = S - G0 - sum w G (vec form) per block.
  VectorXd rd(std::size_t b) const {
    const DenseBlock& bl = blocks_[b];
    VectorXd sv = bl.kind == BlockKind::Psd
                      ? VectorXd(Eigen::Map<const VectorXd>(z_.S[b].data(), bl.k * bl.k))
                      : z_.s[b];
    return sv - bl.f0 - bl.F * z_.w;
  }

  VectorXd atx() const {
    VectorXd a = VectorXd::Zero(r_);
    for (std::size_t b = 0; b < blocks_.size(); ++b) {
      const DenseBlock& bl = blocks_[b];
      if (bl.kind == BlockKind::Psd) {
        a += bl.F.transpose() *
             Eigen::Map<const VectorXd>(z_.X[b].data(), bl.k * bl.k);
      } else {
        a += bl.F.transpose() * z_.x[b];
      }
    }
    return a;
  }

  double g0x() const {
    double v = 0.0;
    for (std::size_t b = 0; b < blocks_.size(); ++b) {
      const DenseBlock& bl = blocks_[b];
      v += bl.kind == BlockKind::Psd
               ? bl.f0.dot(Eigen::Map<const VectorXd>(z_.X[b].data(), bl.k * bl.k))
               : bl.f0.dot(z_.x[b]);
    }
    return v;
  }

  double xs() const {
    double v = 0.0;
    for (std::size_t b = 0; b < blocks_.size(); ++b) {
      v += blocks_[b].kind == BlockKind::Psd
               ? (z_.X[b].cwiseProduct(z_.S[b])).sum()
               : z_.x[b].dot(z_.s[b]);
    }
    return v;
  }

  void residuals() {
    double rd2 = 0.0;
    for (std::size_t b = 0; b < blocks_.size(); ++b) rd2 += rd(b).squaredNorm();
    pinf = std::sqrt(rd2) / (1.0 + f0_norm_);
    dinf = (c_ - atx()).norm() / (1.0 + c_.norm());
    const double pobj = c_.dot(z_.w);
    const double dobj = -g0x();
    relgap = std::max(0.0, xs()) / (1.0 + std::abs(pobj) + std::abs(dobj));
  }

  bool certify_infeasible() const {
    const double g = g0x();
    if (!(g < 0.0)) return false;
    const double xn = xnorm();
    if (xn < 1e6 * std::max(1.0, x0_norm_)) return false;
    return atx().norm() <= 1e-8 * (-g);
  }

  static double max_step(const MatrixXd& L, const MatrixXd& d) {
    // Largest a with L L^T + a d PSD.
    const MatrixXd t1 = L.triangularView<Eigen::Lower>().solve(d);
    const MatrixXd t1t = t1.transpose();
    const MatrixXd t = L.triangularView<Eigen::Lower>().solve(t1t);
    const double lmin = min_eig_sym(0.5 * (t + t.transpose()));
    return lmin >= 0.0 ? std::numeric_limits<double>::infinity() : -1.0 / lmin;
  }

  static double max_step(const VectorXd& v, const VectorXd& d) {
    double a = std::numeric_limits<double>::infinity();
    for (int i = 0; i < v.size(); ++i) {
      if (d(i) < 0.0) a = std::min(a, -v(i) / d(i));
    }
    return a;
  }

  bool step(double& ap_out, double& ad_out) {
    const std::size_t nb = blocks_.size();
    const double mu = xs() / nu_;
    std::vector<MatrixXd> Sinv(nb), LX(nb), LS(nb), Rd(nb);
    std::vector<VectorXd> rdl(nb);
    MatrixXd H = MatrixXd::Zero(r_, r_);
    for (std::size_t b = 0; b < nb; ++b) {
      const DenseBlock& bl = blocks_[b];
      const VectorXd r = rd(b);
      if (bl.kind == BlockKind::Psd) {
        const int k = bl.k;
        Eigen::LLT<MatrixXd> ls(z_.S[b]), lx(z_.X[b]);
        if (ls.info() != Eigen::Success || lx.info() != Eigen::Success) return false;
        LS[b] = ls.matrixL();
        LX[b] = lx.matrixL();
        Sinv[b] = ls.solve(MatrixXd::Identity(k, k));
        Sinv[b] = (0.5 * (Sinv[b] + Sinv[b].transpose())).eval();
        Rd[b] = Eigen::Map<const MatrixXd>(r.data(), k, k);
        MatrixXd B(k * k, r_);
        const MatrixXd& X = z_.X[b];
        for (int j = 0; j < r_; ++j) {
          const Eigen::Map<const MatrixXd> Gj(bl.F.col(j).data(), k, k);
          Eigen::Map<MatrixXd>(B.col(j).data(), k, k) = Sinv[b] * Gj * X;
        }
        H.noalias() += bl.F.transpose() * B;
      } else {
        rdl[b] = r;
        const VectorXd d = z_.x[b].cwiseQuotient(z_.s[b]);
        H.noalias() += bl.F.transpose() * d.asDiagonal() * bl.F;
      }
    }
    H = (0.5 * (H + H.transpose())).eval();
    Eigen::LLT<MatrixXd> hf(H);
    Eigen::LDLT<MatrixXd> hf2;
    bool use_ldlt = false;
    if (hf.info() != Eigen::Success) {
      const double reg = 1e-13 * std::max(1.0, H.diagonal().cwiseAbs().maxCoeff());
      hf.compute(H + reg * MatrixXd::Identity(r_, r_));
      if (hf.info() != Eigen::Success) {
        hf2.compute(H);
        if (hf2.info() != Eigen::Success) return false;
        use_ldlt = true;
      }
    }
    auto hsolve = [&](const VectorXd& rhs) -> VectorXd {
      return use_ldlt ? VectorXd(hf2.solve(rhs)) : VectorXd(hf.solve(rhs));
    };

    const VectorXd rp = c_ - atx();

    struct Dir {
      VectorXd dw;
      std::vector<MatrixXd> dX, dS;
      std::vector<VectorXd> dx, ds;
    };

    // Direction for target sigma*mu with optional second-order corrector.
    auto direction = [&](double sigma, const Dir* aff) -> Dir {
      Dir d;
      d.dX.resize(nb);
      d.dS.resize(nb);
      d.dx.resize(nb);
      d.ds.resize(nb);
      VectorXd rhs = -rp;
      std::vector<MatrixXd> base(nb);
      std::vector<VectorXd> basel(nb);
      for (std::size_t b = 0; b < nb; ++b) {
        const DenseBlock& bl = blocks_[b];
        if (bl.kind == BlockKind::Psd) {
          const MatrixXd& X = z_.X[b];
          MatrixXd m = sigma * mu * Sinv[b] - X;
          if (aff) m -= aff->dX[b] * aff->dS[b] * Sinv[b];
          base[b] = m;
          MatrixXd t = m + X * Rd[b] * Sinv[b];
          t = (0.5 * (t + t.transpose())).eval();
          rhs += bl.F.transpose() * Eigen::Map<const VectorXd>(t.data(), bl.k * bl.k);
        } else {
          VectorXd m = (sigma * mu) * z_.s[b].cwiseInverse() - z_.x[b];
          if (aff) m -= aff->dx[b].cwiseProduct(aff->ds[b]).cwiseQuotient(z_.s[b]);
          basel[b] = m;
          const VectorXd t =
              m + z_.x[b].cwiseProduct(rdl[b]).cwiseQuotient(z_.s[b]);
          rhs += bl.F.transpose() * t;
        }
      }
      d.dw = hsolve(rhs);
      for (std::size_t b = 0; b < nb; ++b) {
        const DenseBlock& bl = blocks_[b];
        if (bl.kind == BlockKind::Psd) {
          const int k = bl.k;
          VectorXd dsv = bl.F * d.dw;
          MatrixXd dS = Eigen::Map<const MatrixXd>(dsv.data(), k, k) - Rd[b];
          dS = (0.5 * (dS + dS.transpose())).eval();
          MatrixXd dX = base[b] - z_.X[b] * dS * Sinv[b];
          d.dX[b] = (0.5 * (dX + dX.transpose())).eval();
          d.dS[b] = std::move(dS);
        } else {
          d.ds[b] = bl.F * d.dw - rdl[b];
          d.dx[b] = basel[b] - z_.x[b].cwiseProduct(d.ds[b]).cwiseQuotient(z_.s[b]);
        }
      }
      return d;
    };

    auto steps = [&](const Dir& d, double& ap, double& ad) {
      ap = std::numeric_limits<double>::infinity();
      ad = ap;
      for (std::size_t b = 0; b < nb; ++b) {
        if (blocks_[b].kind == BlockKind::Psd) {
          ap = std::min(ap, max_step(LX[b], d.dX[b]));
          ad = std::min(ad, max_step(LS[b], d.dS[b]));
        } else {
          ap = std::min(ap, max_step(z_.x[b], d.dx[b]));
          ad = std::min(ad, max_step(z_.s[b], d.ds[b]));
        }
      }
    };

    const Dir aff = direction(0.0, nullptr);
    double ap = 0.0, ad = 0.0;
    steps(aff, ap, ad);
    ap = std::min(1.0, ap);
    ad = std::min(1.0, ad);
    double mu_aff = 0.0;
    for (std::size_t b = 0; b < nb; ++b) {
      if (blocks_[b].kind == BlockKind::Psd) {
        mu_aff += ((z_.X[b] + ap * aff.dX[b]).cwiseProduct(z_.S[b] + ad * aff.dS[b])).sum();
      } else {
        mu_aff += (z_.x[b] + ap * aff.dx[b]).dot(z_.s[b] + ad * aff.ds[b]);
      }
    }
    mu_aff /= nu_;
    const double ratio = std::max(0.0, mu_aff / mu);
    const double sigma = std::min(1.0, std::pow(ratio, 3.0));

    const Dir d = direction(sigma, &aff);
    steps(d, ap, ad);
    const double gamma = 0.98;
    ap = std::min(1.0, gamma * ap);
    ad = std::min(1.0, gamma * ad);
    if (!std::isfinite(ap) || !std::isfinite(ad) || !d.dw.allFinite()) return false;

    for (std::size_t b = 0; b < nb; ++b) {
      if (blocks_[b].kind == BlockKind::Psd) {
        z_.X[b] += ap * d.dX[b];
        z_.S[b] += ad * d.dS[b];
      } else {
        z_.x[b] += ap * d.dx[b];
        z_.s[b] += ad * d.ds[b];
      }
    }
    z_.w += ad * d.dw;
    ap_out = ap;
    ad_out = ad;
    return true;
  }

  std::vector<DenseBlock> blocks_;
  VectorXd c_;
  SolverOptions opts_;
  int r_ = 0;
  double nu_ = 0.0;
  double x0_norm_ = 1.0;
  double f0_norm_ = 0.0;
  Iterate z_;
};

}  // namespace

SdpSolution solve(const SdpProblem& p, const SolverOptions& opts) {
  p.validate();
  SdpSolution sol;
  const int d = p.num_vars;
  std::vector<DenseBlock> blocks = densify(p);

  // Equality elimination: y = y0 + N z.
  VectorXd y0 = VectorXd::Zero(d);
  MatrixXd N;
  bool have_null = false;
  if (p.A_eq.rows() > 0) {
    Eigen::ColPivHouseholderQR<MatrixXd> qr(p.A_eq.transpose());
    qr.setThreshold(1e-13);
    const int rank = static_cast<int>(qr.rank());
    const int neq = static_cast<int>(p.A_eq.rows());
    // A^T P = Q R  =>  (P^T A) = R^T Q^T.
    const VectorXd bp = qr.colsPermutation().transpose() * p.b_eq;
    const MatrixXd R = qr.matrixR().topLeftCorner(rank, neq)
                           .template triangularView<Eigen::Upper>();
    VectorXd zr = VectorXd::Zero(rank);
    if (rank > 0) {
      zr = R.leftCols(rank).transpose().triangularView<Eigen::Lower>().solve(bp.head(rank));
    }
    const MatrixXd Q = qr.householderQ() * MatrixXd::Identity(d, d);
    y0 = Q.leftCols(rank) * zr;
    const double bscale = 1.0 + p.b_eq.cwiseAbs().maxCoeff();
    const double res = (p.A_eq * y0 - p.b_eq).cwiseAbs().maxCoeff();
    if (res > 1e-8 * bscale) {
      sol.status = Status::Infeasible;
      sol.y = y0;
      sol.eq_residual = res;
      sol.message = "equality constraints are inconsistent";
      return sol;
    }
    N = Q.rightCols(d - rank);
    have_null = true;
  }

  // Shift constants and project coefficients onto the null space.
  VectorXd c = p.c;
  for (auto& b : blocks) {
    b.f0 += b.F * y0;
    if (have_null) b.F = b.F * N;
  }
  if (have_null) c = N.transpose() * p.c;
  const int dn = static_cast<int>(c.size());

  // Restrict to directions that move some block or the objective.
  int total_rows = 1;
  for (const auto& b : blocks) total_rows += static_cast<int>(b.F.rows());
  MatrixXd Jt(dn, total_rows);
  {
    int col = 0;
    for (const auto& b : blocks) {
      Jt.middleCols(col, b.F.rows()) = b.F.transpose();
      col += static_cast<int>(b.F.rows());
    }
    Jt.col(col) = c;
    for (int j = 0; j < Jt.cols(); ++j) {
      const double nrm = Jt.col(j).norm();
      if (nrm > 0.0) Jt.col(j) /= nrm;
    }
  }
  int rank_j = 0;
  const MatrixXd Qj = dn > 0 ? range_basis(Jt, 1e-11, rank_j) : MatrixXd(0, 0);
  sol.reduced_vars = rank_j;

  auto finish = [&](const VectorXd& y) {
    sol.y = y;
    sol.objective = p.c.dot(y) + p.offset;
    sol.min_eig = min_eig_original(p, y);
    sol.eq_residual =
        p.A_eq.rows() > 0 ? (p.A_eq * y - p.b_eq).cwiseAbs().maxCoeff() : 0.0;
  };

  if (rank_j == 0) {
    finish(y0);
    const double feas_tol = opts.tol * (1.0 + [&] {
      double s = 0.0;
      for (const auto& b : blocks) s = std::max(s, b.f0.cwiseAbs().maxCoeff());
      return s;
    }());
    if (sol.min_eig >= -feas_tol) {
      sol.status = Status::Optimal;
      sol.message = "no free variables; fixed point is feasible";
    } else {
      sol.status = Status::Infeasible;
      sol.message = "no free variables; fixed point violates a block";
    }
    return sol;
  }

  for (auto& b : blocks) b.F = b.F * Qj;
  const VectorXd cr = Qj.transpose() * c;

  Ipm ipm(std::move(blocks), cr, opts);
  VectorXd w;
  sol.status = ipm.run(w);
  sol.iterations = ipm.iterations;
  sol.primal_infeas = ipm.pinf;
  sol.dual_infeas = ipm.dinf;
  sol.rel_gap = ipm.relgap;
  sol.message = ipm.message;
  VectorXd z = Qj * w;
  finish(have_null ? VectorXd(y0 + N * z) : VectorXd(y0 + z));
  if (sol.status == Status::Optimal && sol.message.empty()) sol.message = "optimal";
  return sol;
}

}  // namespace acbc::sdp

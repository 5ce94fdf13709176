#include <algorithm>
#include <cmath>

#include "acbc/error.hpp"
#include "acbc/sdp.hpp"

namespace acbc::sdp {

const char* to_string(Status s) noexcept {
  switch (s) {
    case Status::Optimal: return "optimal";
    case Status::Infeasible: return "infeasible";
    case Status::NumericalFailure: return "numerical_failure";
  }
  return "unknown";
}

void SdpProblem::validate() const {
  auto bad = [](const std::string& msg) {
    throw Error(ErrorKind::InvalidArgument, "malformed SDP: " + msg);
  };
  if (num_vars < 0) bad("negative variable count");
  if (c.size() != num_vars) bad("objective size");
  if (A_eq.rows() > 0 && A_eq.cols() != num_vars) bad("equality width");
  if (A_eq.rows() != b_eq.size()) bad("equality rhs size");
  for (const auto& b : blocks) {
    if (b.dim <= 0) bad("empty block");
    const int cols = b.kind == BlockKind::Psd ? b.dim : 1;
    if (b.constant.rows() != b.dim || b.constant.cols() != cols) {
      bad("block constant shape");
    }
    if (b.kind == BlockKind::Psd &&
        (b.constant - b.constant.transpose()).cwiseAbs().maxCoeff() > 0.0) {
      bad("block constant not symmetric");
    }
    for (const auto& e : b.coefs) {
      if (e.var < 0 || e.var >= num_vars) bad("coefficient variable index");
      if (e.row < 0 || e.col < e.row || e.col >= b.dim) bad("coefficient position");
      if (b.kind == BlockKind::Nonneg && e.row != e.col) bad("off-diagonal LP entry");
      if (!std::isfinite(e.value)) bad("non-finite coefficient");
    }
  }
}

Eigen::MatrixXd SdpProblem::block_value(std::size_t bi,
                                        const Eigen::VectorXd& y) const {
  const Block& b = blocks.at(bi);
  Eigen::MatrixXd v = b.constant;
  for (const auto& e : b.coefs) {
    const double w = e.value * y(e.var);
    if (b.kind == BlockKind::Nonneg) {
      v(e.row, 0) += w;
    } else {
      v(e.row, e.col) += w;
      if (e.row != e.col) v(e.col, e.row) += w;
    }
  }
  return v;
}

// ---------------------------------------------------------------------------

LinExpr LinExpr::var(int index, double coef) {
  LinExpr e;
  if (coef != 0.0) e.terms.emplace_back(index, coef);
  return e;
}

namespace {

void merge(LinExpr& a, const LinExpr& b, double sign) {
  std::vector<std::pair<int, double>> out;
  out.reserve(a.terms.size() + b.terms.size());
  auto i = a.terms.begin();
  auto j = b.terms.begin();
  while (i != a.terms.end() || j != b.terms.end()) {
    if (j == b.terms.end() || (i != a.terms.end() && i->first < j->first)) {
      out.push_back(*i++);
    } else if (i == a.terms.end() || j->first < i->first) {
      out.emplace_back(j->first, sign * j->second);
      ++j;
    } else {
      const double v = i->second + sign * j->second;
      if (v != 0.0) out.emplace_back(i->first, v);
      ++i;
      ++j;
    }
  }
  a.terms = std::move(out);
  a.constant += sign * b.constant;
}

}  // namespace

LinExpr& LinExpr::operator+=(const LinExpr& o) {
  merge(*this, o, 1.0);
  return *this;
}

LinExpr& LinExpr::operator-=(const LinExpr& o) {
  merge(*this, o, -1.0);
  return *this;
}

LinExpr& LinExpr::operator*=(double s) {
  constant *= s;
  if (s == 0.0) {
    terms.clear();
  } else {
    for (auto& t : terms) t.second *= s;
  }
  return *this;
}

bool LinExpr::operator==(const LinExpr& o) const {
  return constant == o.constant && terms == o.terms;
}

double LinExpr::eval(const Eigen::VectorXd& y) const {
  double v = constant;
  for (const auto& [i, a] : terms) v += a * y(i);
  return v;
}

LinExpr operator+(LinExpr a, const LinExpr& b) { return a += b; }
LinExpr operator-(LinExpr a, const LinExpr& b) { return a -= b; }
LinExpr operator*(double s, LinExpr a) { return a *= s; }

// ---------------------------------------------------------------------------

AffineMatrix AffineMatrix::constant(const Eigen::MatrixXd& m) {
  AffineMatrix a(static_cast<int>(m.rows()), static_cast<int>(m.cols()));
  for (int r = 0; r < a.rows(); ++r) {
    for (int c = 0; c < a.cols(); ++c) a(r, c) = LinExpr(m(r, c));
  }
  return a;
}

AffineMatrix AffineMatrix::identity(int k, const LinExpr& s) {
  AffineMatrix a(k, k);
  for (int i = 0; i < k; ++i) a(i, i) = s;
  return a;
}

AffineMatrix AffineMatrix::transpose() const {
  AffineMatrix t(cols_, rows_);
  for (int r = 0; r < rows_; ++r) {
    for (int c = 0; c < cols_; ++c) t(c, r) = (*this)(r, c);
  }
  return t;
}

Eigen::MatrixXd AffineMatrix::eval(const Eigen::VectorXd& y) const {
  Eigen::MatrixXd v(rows_, cols_);
  for (int r = 0; r < rows_; ++r) {
    for (int c = 0; c < cols_; ++c) v(r, c) = (*this)(r, c).eval(y);
  }
  return v;
}

namespace {

void same_shape(const AffineMatrix& a, const AffineMatrix& b) {
  if (a.rows() != b.rows() || a.cols() != b.cols()) {
    throw Error(ErrorKind::Dimension, "affine matrix shape mismatch");
  }
}

}  // namespace

AffineMatrix& AffineMatrix::operator+=(const AffineMatrix& o) {
  same_shape(*this, o);
  for (std::size_t i = 0; i < e_.size(); ++i) e_[i] += o.e_[i];
  return *this;
}

AffineMatrix& AffineMatrix::operator-=(const AffineMatrix& o) {
  same_shape(*this, o);
  for (std::size_t i = 0; i < e_.size(); ++i) e_[i] -= o.e_[i];
  return *this;
}

AffineMatrix& AffineMatrix::operator*=(double s) {
  for (auto& e : e_) e *= s;
  return *this;
}

AffineMatrix AffineMatrix::blocks(const AffineMatrix& a, const AffineMatrix& b,
                                  const AffineMatrix& c, const AffineMatrix& d) {
  return vcat(hcat(a, b), hcat(c, d));
}

AffineMatrix AffineMatrix::vcat(const AffineMatrix& a, const AffineMatrix& b) {
  if (a.cols() != b.cols()) {
    throw Error(ErrorKind::Dimension, "vcat column mismatch");
  }
  AffineMatrix out(a.rows() + b.rows(), a.cols());
  for (int r = 0; r < a.rows(); ++r) {
    for (int c = 0; c < a.cols(); ++c) out(r, c) = a(r, c);
  }
  for (int r = 0; r < b.rows(); ++r) {
    for (int c = 0; c < b.cols(); ++c) out(a.rows() + r, c) = b(r, c);
  }
  return out;
}

AffineMatrix AffineMatrix::hcat(const AffineMatrix& a, const AffineMatrix& b) {
  if (a.rows() != b.rows()) {
    throw Error(ErrorKind::Dimension, "hcat row mismatch");
  }
  AffineMatrix out(a.rows(), a.cols() + b.cols());
  for (int r = 0; r < a.rows(); ++r) {
    for (int c = 0; c < a.cols(); ++c) out(r, c) = a(r, c);
    for (int c = 0; c < b.cols(); ++c) out(r, a.cols() + c) = b(r, c);
  }
  return out;
}

AffineMatrix operator+(AffineMatrix a, const AffineMatrix& b) { return a += b; }
AffineMatrix operator-(AffineMatrix a, const AffineMatrix& b) { return a -= b; }
AffineMatrix operator*(double s, AffineMatrix a) { return a *= s; }

namespace {

// Accumulates sum_l w_l * e_l through a dense scratch indexed by variable.
class Accumulator {
 public:
  void add(const LinExpr& e, double w) {
    if (w == 0.0) return;
    constant_ += w * e.constant;
    for (const auto& [v, a] : e.terms) {
      if (static_cast<std::size_t>(v) >= dense_.size()) {
        dense_.resize(static_cast<std::size_t>(v) + 1, 0.0);
        seen_.resize(dense_.size(), 0);
      }
      if (!seen_[v]) {
        seen_[v] = 1;
        touched_.push_back(v);
      }
      dense_[v] += w * a;
    }
  }

  LinExpr take() {
    LinExpr out(constant_);
    std::sort(touched_.begin(), touched_.end());
    for (int v : touched_) {
      if (dense_[v] != 0.0) out.terms.emplace_back(v, dense_[v]);
      dense_[v] = 0.0;
      seen_[v] = 0;
    }
    touched_.clear();
    constant_ = 0.0;
    return out;
  }

 private:
  double constant_ = 0.0;
  std::vector<double> dense_;
  std::vector<char> seen_;
  std::vector<int> touched_;
};

}  // namespace

AffineMatrix operator*(const Eigen::MatrixXd& c, const AffineMatrix& a) {
  if (c.cols() != a.rows()) {
    throw Error(ErrorKind::Dimension, "matrix product inner dimension");
  }
  AffineMatrix out(static_cast<int>(c.rows()), a.cols());
  Accumulator acc;
  for (int r = 0; r < out.rows(); ++r) {
    for (int j = 0; j < out.cols(); ++j) {
      for (int l = 0; l < a.rows(); ++l) acc.add(a(l, j), c(r, l));
      out(r, j) = acc.take();
    }
  }
  return out;
}

AffineMatrix operator*(const AffineMatrix& a, const Eigen::MatrixXd& c) {
  if (a.cols() != c.rows()) {
    throw Error(ErrorKind::Dimension, "matrix product inner dimension");
  }
  AffineMatrix out(a.rows(), static_cast<int>(c.cols()));
  Accumulator acc;
  for (int r = 0; r < out.rows(); ++r) {
    for (int j = 0; j < out.cols(); ++j) {
      for (int l = 0; l < a.cols(); ++l) acc.add(a(r, l), c(l, j));
      out(r, j) = acc.take();
    }
  }
  return out;
}

// ---------------------------------------------------------------------------

int ProblemBuilder::scalar() { return num_vars_++; }

AffineMatrix ProblemBuilder::matrix_var(int rows, int cols) {
  AffineMatrix m(rows, cols);
  for (int r = 0; r < rows; ++r) {
    for (int c = 0; c < cols; ++c) m(r, c) = LinExpr::var(scalar());
  }
  return m;
}

AffineMatrix ProblemBuilder::symmetric_var(int k) {
  AffineMatrix m(k, k);
  for (int r = 0; r < k; ++r) {
    for (int c = r; c < k; ++c) {
      m(r, c) = LinExpr::var(scalar());
      m(c, r) = m(r, c);
    }
  }
  return m;
}

void ProblemBuilder::add_psd(const AffineMatrix& m) {
  if (m.rows() != m.cols() || m.rows() == 0) {
    throw Error(ErrorKind::Dimension, "PSD constraint needs a square matrix");
  }
  for (int r = 0; r < m.rows(); ++r) {
    for (int c = r + 1; c < m.cols(); ++c) {
      const LinExpr d = m(r, c) - m(c, r);
      bool zero = std::abs(d.constant) <= 1e-12 * (1.0 + std::abs(m(r, c).constant));
      for (const auto& t : d.terms) zero = zero && std::abs(t.second) <= 1e-12;
      if (!zero) {
        throw Error(ErrorKind::InvalidArgument,
                    "PSD constraint matrix is not symmetric");
      }
    }
  }
  psd_.push_back(m);
}

void ProblemBuilder::add_nonneg(const LinExpr& e) { nonneg_.push_back(e); }

void ProblemBuilder::add_equal(const LinExpr& lhs, const LinExpr& rhs) {
  eq_.push_back(lhs - rhs);
}

void ProblemBuilder::add_equal(const AffineMatrix& lhs, const AffineMatrix& rhs) {
  same_shape(lhs, rhs);
  for (int r = 0; r < lhs.rows(); ++r) {
    for (int c = 0; c < lhs.cols(); ++c) add_equal(lhs(r, c), rhs(r, c));
  }
}

void ProblemBuilder::minimize(const LinExpr& objective) { objective_ = objective; }

SdpProblem ProblemBuilder::build() const {
  SdpProblem p;
  p.num_vars = num_vars_;
  p.c = Eigen::VectorXd::Zero(num_vars_);
  for (const auto& [v, a] : objective_.terms) p.c(v) += a;
  p.offset = objective_.constant;

  const int neq = static_cast<int>(eq_.size());
  p.A_eq = Eigen::MatrixXd::Zero(neq, num_vars_);
  p.b_eq = Eigen::VectorXd::Zero(neq);
  for (int i = 0; i < neq; ++i) {
    for (const auto& [v, a] : eq_[i].terms) p.A_eq(i, v) += a;
    p.b_eq(i) = -eq_[i].constant;
  }

  for (const auto& m : psd_) {
    Block b;
    b.kind = BlockKind::Psd;
    b.dim = m.rows();
    b.constant = Eigen::MatrixXd::Zero(b.dim, b.dim);
    for (int r = 0; r < b.dim; ++r) {
      for (int c = r; c < b.dim; ++c) {
        const LinExpr& e = m(r, c);
        b.constant(r, c) = e.constant;
        b.constant(c, r) = e.constant;
        for (const auto& [v, a] : e.terms) b.coefs.push_back({v, r, c, a});
      }
    }
    p.blocks.push_back(std::move(b));
  }
  if (!nonneg_.empty()) {
    Block b;
    b.kind = BlockKind::Nonneg;
    b.dim = static_cast<int>(nonneg_.size());
    b.constant = Eigen::MatrixXd::Zero(b.dim, 1);
    for (int r = 0; r < b.dim; ++r) {
      b.constant(r, 0) = nonneg_[r].constant;
      for (const auto& [v, a] : nonneg_[r].terms) b.coefs.push_back({v, r, r, a});
    }
    p.blocks.push_back(std::move(b));
  }
  return p;
}

}  // namespace acbc::sdp

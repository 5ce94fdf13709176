#pragma once

#include <string>
#include <utility>
#include <vector>

#include <Eigen/Dense>

namespace acbc::sdp {

enum class BlockKind { Psd, Nonneg };

/// Upper-triangular coefficient of variable `var` at (row, col), row <= col.
/// The mirrored entry is implied.
struct Coef {
  int var = 0;
  int row = 0;
  int col = 0;
  double value = 0.0;
};

/// Affine block F0 + sum_i y_i F_i required PSD (or, for Nonneg, entrywise
/// nonnegative on the diagonal; only row == col entries are used).
struct Block {
  BlockKind kind = BlockKind::Psd;
  int dim = 0;
  Eigen::MatrixXd constant;  // dim x dim (Psd) or dim x 1 (Nonneg)
  std::vector<Coef> coefs;
};

/// minimize c^T y + offset  s.t.  A_eq y = b_eq,  every block feasible.
struct SdpProblem {
  int num_vars = 0;
  Eigen::VectorXd c;
  double offset = 0.0;
  Eigen::MatrixXd A_eq;
  Eigen::VectorXd b_eq;
  std::vector<Block> blocks;

  /// Throws Error(InvalidArgument) on inconsistent sizes or indices.
  void validate() const;

  /// Block value at y (symmetric dense for Psd, column vector for Nonneg).
  Eigen::MatrixXd block_value(std::size_t b, const Eigen::VectorXd& y) const;
};

enum class Status { Optimal, Infeasible, NumericalFailure };

const char* to_string(Status s) noexcept;

struct SdpSolution {
  Status status = Status::NumericalFailure;
  Eigen::VectorXd y;
  double objective = 0.0;
  double min_eig = 0.0;       // min over blocks of the smallest eigenvalue
  double eq_residual = 0.0;   // max |A_eq y - b_eq|
  double primal_infeas = 0.0; // relative, reduced problem
  double dual_infeas = 0.0;
  double rel_gap = 0.0;
  int iterations = 0;
  int reduced_vars = 0;
  std::string message;
};

struct SolverOptions {
  double tol = 1e-9;
  int max_iterations = 120;
  /// Relative tolerance that still counts as optimal when progress stalls.
  double stall_tol = 1e-7;
  /// Per-iteration trace on stderr.
  bool verbose = false;
};

/// Infeasible-start primal-dual interior-point method (HKM direction,
/// Mehrotra predictor-corrector) after eliminating equalities and
/// restricting to directions that affect the objective or some block.
SdpSolution solve(const SdpProblem& p, const SolverOptions& opts = {});

// -- Modelling layer -------------------------------------------------------

/// Affine scalar: constant + sum coef * y[var], terms sorted by var.
struct LinExpr {
  double constant = 0.0;
  std::vector<std::pair<int, double>> terms;

  LinExpr() = default;
  LinExpr(double c) : constant(c) {}  // NOLINT(implicit)
  static LinExpr var(int index, double coef = 1.0);

  LinExpr& operator+=(const LinExpr& o);
  LinExpr& operator-=(const LinExpr& o);
  LinExpr& operator*=(double s);
  bool operator==(const LinExpr& o) const;
  double eval(const Eigen::VectorXd& y) const;
};

LinExpr operator+(LinExpr a, const LinExpr& b);
LinExpr operator-(LinExpr a, const LinExpr& b);
LinExpr operator*(double s, LinExpr a);

/// Dense matrix of affine expressions, row-major.
class AffineMatrix {
 public:
  AffineMatrix() = default;
  AffineMatrix(int rows, int cols) : rows_(rows), cols_(cols), e_(rows * cols) {}
  static AffineMatrix constant(const Eigen::MatrixXd& m);
  /// s * I_k
  static AffineMatrix identity(int k, const LinExpr& s);

  int rows() const { return rows_; }
  int cols() const { return cols_; }
  LinExpr& operator()(int r, int c) { return e_[r * cols_ + c]; }
  const LinExpr& operator()(int r, int c) const { return e_[r * cols_ + c]; }

  AffineMatrix transpose() const;
  Eigen::MatrixXd eval(const Eigen::VectorXd& y) const;

  AffineMatrix& operator+=(const AffineMatrix& o);
  AffineMatrix& operator-=(const AffineMatrix& o);
  AffineMatrix& operator*=(double s);

  /// [a b; c d] with shape checks.
  static AffineMatrix blocks(const AffineMatrix& a, const AffineMatrix& b,
                             const AffineMatrix& c, const AffineMatrix& d);
  static AffineMatrix vcat(const AffineMatrix& a, const AffineMatrix& b);
  static AffineMatrix hcat(const AffineMatrix& a, const AffineMatrix& b);

 private:
  int rows_ = 0;
  int cols_ = 0;
  std::vector<LinExpr> e_;
};

AffineMatrix operator+(AffineMatrix a, const AffineMatrix& b);
AffineMatrix operator-(AffineMatrix a, const AffineMatrix& b);
AffineMatrix operator*(double s, AffineMatrix a);
/// Constant matrix times affine matrix.
AffineMatrix operator*(const Eigen::MatrixXd& c, const AffineMatrix& a);
AffineMatrix operator*(const AffineMatrix& a, const Eigen::MatrixXd& c);

class ProblemBuilder {
 public:
  int scalar();
  AffineMatrix matrix_var(int rows, int cols);
  AffineMatrix symmetric_var(int k);

  /// Requires a structurally symmetric square matrix.
  void add_psd(const AffineMatrix& m);
  void add_nonneg(const LinExpr& e);
  void add_equal(const LinExpr& lhs, const LinExpr& rhs);
  void add_equal(const AffineMatrix& lhs, const AffineMatrix& rhs);
  void minimize(const LinExpr& objective);

  int num_vars() const { return num_vars_; }
  SdpProblem build() const;

 private:
  int num_vars_ = 0;
  std::vector<AffineMatrix> psd_;
  std::vector<LinExpr> nonneg_;
  std::vector<LinExpr> eq_;
  LinExpr objective_;
};

}  // namespace acbc::sdp

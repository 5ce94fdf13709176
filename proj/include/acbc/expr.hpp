#pragma once

#include <cstddef>
#include <memory>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include <Eigen/Dense>

namespace acbc {

enum class VarKind { State, Input };

enum class FuncKind { Sin, Cos, Tan, Atan, Tanh, Ln };

const char* to_string(FuncKind f) noexcept;

/// Closed interval used to bound term values over a box.
struct Interval {
  double lo = 0.0;
  double hi = 0.0;
};

/// Immutable scalar expression tree over x<k> (state) and u<k> (input)
/// variables. Copies share the underlying nodes.
class TermExpr {
 public:
  enum class Kind { Const, Var, Add, Mul, Func };

  static TermExpr constant(double value);
  static TermExpr variable(VarKind kind, int index);
  static TermExpr add(TermExpr lhs, TermExpr rhs);
  static TermExpr mul(TermExpr lhs, TermExpr rhs);
  static TermExpr func(FuncKind f, TermExpr arg);

  Kind kind() const;
  double value() const;        // Const
  VarKind var_kind() const;    // Var
  int var_index() const;       // Var, 1-based
  FuncKind func_kind() const;  // Func
  const TermExpr& lhs() const; // Add, Mul; Func argument
  const TermExpr& rhs() const; // Add, Mul

  /// Structural equality (Const compared bitwise).
  bool operator==(const TermExpr& other) const;

  bool has_variables() const;
  int max_index(VarKind kind) const;

 private:
  struct Node;
  explicit TermExpr(std::shared_ptr<const Node> node) : node_(std::move(node)) {}
  std::shared_ptr<const Node> node_;
};

/// Parses `expr := number | x<k> | u<k> | expr + expr | expr * expr | fn(expr)`
/// with fn in {sin, cos, tan, atan, tanh, ln}, `*` binding tighter than `+`,
/// both left-associative, parentheses allowed. Throws Error(Syntax) with the
/// byte offset of the problem, Error(Dimension) for an out-of-range index.
TermExpr parse_term(std::string_view src, int n, int m);

/// Canonical text form; parse_term(render_term(t)) == t.
std::string render_term(const TermExpr& t);

/// Throws Error(Domain) when a ln argument is not positive.
double eval_term(const TermExpr& t, std::span<const double> x,
                 std::span<const double> u);

/// Interval enclosure of the term over x in [x_lo, x_hi], u in [u_lo, u_hi].
/// `ok` is cleared when the enclosure cannot be established (ln of a
/// possibly non-positive value, tan across a pole).
Interval bound_term(const TermExpr& t, const Eigen::VectorXd& x_lo,
                    const Eigen::VectorXd& x_hi, const Eigen::VectorXd& u_lo,
                    const Eigen::VectorXd& u_hi, bool& ok);

/// Replaces every u<k> with x<n+k>.
TermExpr inputs_as_states(const TermExpr& t, int n);

/// Ordered function library f(x,u) = [x; u; Psi(x,u)].
class Dictionary {
 public:
  Dictionary() = default;

  /// Validates the [x; u] prefix and rejects variable-free terms.
  Dictionary(int n, int m, std::vector<TermExpr> terms);

  /// Parses each source string with parse_term.
  static Dictionary parse(int n, int m, const std::vector<std::string>& sources);

  int n() const { return n_; }
  int m() const { return m_; }
  int size() const { return static_cast<int>(terms_.size()); }
  int nonlinear_size() const { return size() - n_ - m_; }
  const std::vector<TermExpr>& terms() const { return terms_; }
  std::vector<std::string> sources() const;

  Eigen::VectorXd eval(const Eigen::VectorXd& x, const Eigen::VectorXd& u) const;

  /// Only the tail Psi(x,u).
  Eigen::VectorXd eval_nonlinear(const Eigen::VectorXd& x,
                                 const Eigen::VectorXd& u) const;

  /// Proves every ln argument positive and every tan argument pole-free on
  /// the given box. Throws Error(Domain) naming the offending term.
  void validate_on_box(const Eigen::VectorXd& x_lo, const Eigen::VectorXd& x_hi,
                       const Eigen::VectorXd& u_lo,
                       const Eigen::VectorXd& u_hi) const;

 private:
  int n_ = 0;
  int m_ = 0;
  std::vector<TermExpr> terms_;
};

/// Evaluates `dict` at the stacked point zeta = (x, u).
Eigen::VectorXd eval_dictionary(const Dictionary& dict, const Eigen::VectorXd& x,
                                const Eigen::VectorXd& u);

}  // namespace acbc

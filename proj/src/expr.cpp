#include "acbc/expr.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <numbers>
#include <sstream>

#include "acbc/error.hpp"

namespace acbc {

const char* to_string(FuncKind f) noexcept {
  switch (f) {
    case FuncKind::Sin: return "sin";
    case FuncKind::Cos: return "cos";
    case FuncKind::Tan: return "tan";
    case FuncKind::Atan: return "atan";
    case FuncKind::Tanh: return "tanh";
    case FuncKind::Ln: return "ln";
  }
  return "?";
}

struct TermExpr::Node {
  Kind kind = Kind::Const;
  double value = 0.0;
  VarKind var_kind = VarKind::State;
  int index = 0;
  FuncKind func = FuncKind::Sin;
  std::vector<TermExpr> children;
};

TermExpr TermExpr::constant(double value) {
  if (!std::isfinite(value)) {
    throw Error(ErrorKind::InvalidArgument, "constant must be finite");
  }
  auto node = std::make_shared<Node>();
  node->kind = Kind::Const;
  node->value = value;
  return TermExpr(std::move(node));
}

TermExpr TermExpr::variable(VarKind kind, int index) {
  if (index < 1) {
    throw Error(ErrorKind::Dimension, "variable index must be >= 1");
  }
  auto node = std::make_shared<Node>();
  node->kind = Kind::Var;
  node->var_kind = kind;
  node->index = index;
  return TermExpr(std::move(node));
}

TermExpr TermExpr::add(TermExpr lhs, TermExpr rhs) {
  auto node = std::make_shared<Node>();
  node->kind = Kind::Add;
  node->children = {std::move(lhs), std::move(rhs)};
  return TermExpr(std::move(node));
}

TermExpr TermExpr::mul(TermExpr lhs, TermExpr rhs) {
  auto node = std::make_shared<Node>();
  node->kind = Kind::Mul;
  node->children = {std::move(lhs), std::move(rhs)};
  return TermExpr(std::move(node));
}

TermExpr TermExpr::func(FuncKind f, TermExpr arg) {
  auto node = std::make_shared<Node>();
  node->kind = Kind::Func;
  node->func = f;
  node->children = {std::move(arg)};
  return TermExpr(std::move(node));
}

TermExpr::Kind TermExpr::kind() const { return node_->kind; }
double TermExpr::value() const { return node_->value; }
VarKind TermExpr::var_kind() const { return node_->var_kind; }
int TermExpr::var_index() const { return node_->index; }
FuncKind TermExpr::func_kind() const { return node_->func; }
const TermExpr& TermExpr::lhs() const { return node_->children.at(0); }
const TermExpr& TermExpr::rhs() const { return node_->children.at(1); }

bool TermExpr::operator==(const TermExpr& other) const {
  if (node_ == other.node_) return true;
  if (kind() != other.kind()) return false;
  switch (kind()) {
    case Kind::Const:
      return std::bit_cast<std::uint64_t>(value()) ==
             std::bit_cast<std::uint64_t>(other.value());
    case Kind::Var:
      return var_kind() == other.var_kind() && var_index() == other.var_index();
    case Kind::Add:
    case Kind::Mul:
      return lhs() == other.lhs() && rhs() == other.rhs();
    case Kind::Func:
      return func_kind() == other.func_kind() && lhs() == other.lhs();
  }
  return false;
}

bool TermExpr::has_variables() const {
  switch (kind()) {
    case Kind::Const: return false;
    case Kind::Var: return true;
    case Kind::Add:
    case Kind::Mul: return lhs().has_variables() || rhs().has_variables();
    case Kind::Func: return lhs().has_variables();
  }
  return false;
}

int TermExpr::max_index(VarKind k) const {
  switch (kind()) {
    case Kind::Const: return 0;
    case Kind::Var: return var_kind() == k ? var_index() : 0;
    case Kind::Add:
    case Kind::Mul: return std::max(lhs().max_index(k), rhs().max_index(k));
    case Kind::Func: return lhs().max_index(k);
  }
  return 0;
}

// ---------------------------------------------------------------------------
// Parser

namespace {

class Parser {
 public:
  Parser(std::string_view src, int n, int m) : src_(src), n_(n), m_(m) {}

  TermExpr parse() {
    TermExpr e = parse_sum();
    skip_ws();
    if (pos_ != src_.size()) fail("unexpected character");
    return e;
  }

 private:
  [[noreturn]] void fail(const std::string& msg) const {
    std::ostringstream os;
    os << "syntax error at position " << pos_ << ": " << msg << " in \"" << src_
       << "\"";
    throw Error(ErrorKind::Syntax, os.str());
  }

  void skip_ws() {
    while (pos_ < src_.size() &&
           std::isspace(static_cast<unsigned char>(src_[pos_]))) {
      ++pos_;
    }
  }

  bool consume(char c) {
    skip_ws();
    if (pos_ < src_.size() && src_[pos_] == c) {
      ++pos_;
      return true;
    }
    return false;
  }

  TermExpr parse_sum() {
    TermExpr e = parse_product();
    while (consume('+')) e = TermExpr::add(e, parse_product());
    return e;
  }

  TermExpr parse_product() {
    TermExpr e = parse_factor();
    while (consume('*')) e = TermExpr::mul(e, parse_factor());
    return e;
  }

  TermExpr parse_factor() {
    skip_ws();
    if (pos_ >= src_.size()) fail("unexpected end of input");
    const char c = src_[pos_];
    if (c == '(') {
      ++pos_;
      TermExpr e = parse_sum();
      if (!consume(')')) fail("expected ')'");
      return e;
    }
    if (std::isdigit(static_cast<unsigned char>(c)) || c == '.' || c == '-') {
      return parse_number();
    }
    if (std::isalpha(static_cast<unsigned char>(c))) return parse_identifier();
    fail(std::string("unexpected character '") + c + "'");
  }

  TermExpr parse_number() {
    const std::size_t start = pos_;
    if (src_[pos_] == '-') ++pos_;
    auto digits = [&] {
      std::size_t k = 0;
      while (pos_ < src_.size() &&
             std::isdigit(static_cast<unsigned char>(src_[pos_]))) {
        ++pos_;
        ++k;
      }
      return k;
    };
    std::size_t count = digits();
    if (pos_ < src_.size() && src_[pos_] == '.') {
      ++pos_;
      count += digits();
    }
    if (count == 0) {
      pos_ = start;
      fail("malformed number");
    }
    if (pos_ < src_.size() && (src_[pos_] == 'e' || src_[pos_] == 'E')) {
      ++pos_;
      if (pos_ < src_.size() && (src_[pos_] == '+' || src_[pos_] == '-')) ++pos_;
      if (digits() == 0) fail("malformed exponent");
    }
    double value = 0.0;
    const auto [ptr, ec] =
        std::from_chars(src_.data() + start, src_.data() + pos_, value);
    if (ec != std::errc() || ptr != src_.data() + pos_ || !std::isfinite(value)) {
      pos_ = start;
      fail("malformed number");
    }
    return TermExpr::constant(value);
  }

  TermExpr parse_identifier() {
    const std::size_t start = pos_;
    while (pos_ < src_.size() &&
           std::isalpha(static_cast<unsigned char>(src_[pos_]))) {
      ++pos_;
    }
    const std::string_view name = src_.substr(start, pos_ - start);
    if ((name == "x" || name == "u") && pos_ < src_.size() &&
        std::isdigit(static_cast<unsigned char>(src_[pos_]))) {
      const std::size_t num_start = pos_;
      while (pos_ < src_.size() &&
             std::isdigit(static_cast<unsigned char>(src_[pos_]))) {
        ++pos_;
      }
      int index = 0;
      const auto [ptr, ec] =
          std::from_chars(src_.data() + num_start, src_.data() + pos_, index);
      if (ec != std::errc() || index < 1) {
        pos_ = num_start;
        fail("bad variable index");
      }
      const bool state = name == "x";
      const int limit = state ? n_ : m_;
      if (index > limit) {
        std::ostringstream os;
        os << "variable " << name << index << " at position " << start
           << " out of range (" << (state ? "n" : "m") << " = " << limit << ")";
        throw Error(ErrorKind::Dimension, os.str());
      }
      return TermExpr::variable(state ? VarKind::State : VarKind::Input, index);
    }
    FuncKind f;
    if (name == "sin") f = FuncKind::Sin;
    else if (name == "cos") f = FuncKind::Cos;
    else if (name == "tan") f = FuncKind::Tan;
    else if (name == "atan") f = FuncKind::Atan;
    else if (name == "tanh") f = FuncKind::Tanh;
    else if (name == "ln") f = FuncKind::Ln;
    else {
      pos_ = start;
      fail("unknown identifier '" + std::string(name) + "'");
    }
    if (!consume('(')) fail("expected '(' after function name");
    TermExpr arg = parse_sum();
    if (!consume(')')) fail("expected ')'");
    return TermExpr::func(f, std::move(arg));
  }

  std::string_view src_;
  std::size_t pos_ = 0;
  int n_;
  int m_;
};

std::string format_double(double v) {
  char buf[64];
  const auto [ptr, ec] = std::to_chars(buf, buf + sizeof(buf), v);
  return std::string(buf, ptr);
}

void render_into(const TermExpr& t, std::string& out) {
  using K = TermExpr::Kind;
  switch (t.kind()) {
    case K::Const:
      out += format_double(t.value());
      return;
    case K::Var:
      out += t.var_kind() == VarKind::State ? 'x' : 'u';
      out += std::to_string(t.var_index());
      return;
    case K::Add:
      render_into(t.lhs(), out);
      out += " + ";
      if (t.rhs().kind() == K::Add) {
        out += '(';
        render_into(t.rhs(), out);
        out += ')';
      } else {
        render_into(t.rhs(), out);
      }
      return;
    case K::Mul: {
      const bool wrap_l = t.lhs().kind() == K::Add;
      const bool wrap_r = t.rhs().kind() == K::Add || t.rhs().kind() == K::Mul;
      if (wrap_l) out += '(';
      render_into(t.lhs(), out);
      if (wrap_l) out += ')';
      out += '*';
      if (wrap_r) out += '(';
      render_into(t.rhs(), out);
      if (wrap_r) out += ')';
      return;
    }
    case K::Func:
      out += to_string(t.func_kind());
      out += '(';
      render_into(t.lhs(), out);
      out += ')';
      return;
  }
}

double apply(FuncKind f, double a) {
  switch (f) {
    case FuncKind::Sin: return std::sin(a);
    case FuncKind::Cos: return std::cos(a);
    case FuncKind::Tan: return std::tan(a);
    case FuncKind::Atan: return std::atan(a);
    case FuncKind::Tanh: return std::tanh(a);
    case FuncKind::Ln:
      if (!(a > 0.0)) {
        throw Error(ErrorKind::Domain,
                    "ln argument " + format_double(a) + " is not positive");
      }
      return std::log(a);
  }
  return 0.0;
}

// True when some point base + k*period lies in [lo, hi].
bool hits(double lo, double hi, double base, double period) {
  const double k = std::ceil((lo - base) / period);
  return base + k * period <= hi;
}

Interval sin_bounds(Interval a) {
  constexpr double pi = std::numbers::pi;
  if (a.hi - a.lo >= 2.0 * pi) return {-1.0, 1.0};
  double lo = std::min(std::sin(a.lo), std::sin(a.hi));
  double hi = std::max(std::sin(a.lo), std::sin(a.hi));
  if (hits(a.lo, a.hi, pi / 2.0, 2.0 * pi)) hi = 1.0;
  if (hits(a.lo, a.hi, -pi / 2.0, 2.0 * pi)) lo = -1.0;
  return {lo, hi};
}

}  // namespace

TermExpr parse_term(std::string_view src, int n, int m) {
  return Parser(src, n, m).parse();
}

std::string render_term(const TermExpr& t) {
  std::string out;
  render_into(t, out);
  return out;
}

double eval_term(const TermExpr& t, std::span<const double> x,
                 std::span<const double> u) {
  using K = TermExpr::Kind;
  switch (t.kind()) {
    case K::Const: return t.value();
    case K::Var: {
      const auto& v = t.var_kind() == VarKind::State ? x : u;
      const auto i = static_cast<std::size_t>(t.var_index() - 1);
      if (i >= v.size()) {
        throw Error(ErrorKind::Dimension, "variable index exceeds vector size");
      }
      return v[i];
    }
    case K::Add: return eval_term(t.lhs(), x, u) + eval_term(t.rhs(), x, u);
    case K::Mul: return eval_term(t.lhs(), x, u) * eval_term(t.rhs(), x, u);
    case K::Func: return apply(t.func_kind(), eval_term(t.lhs(), x, u));
  }
  return 0.0;
}

Interval bound_term(const TermExpr& t, const Eigen::VectorXd& x_lo,
                    const Eigen::VectorXd& x_hi, const Eigen::VectorXd& u_lo,
                    const Eigen::VectorXd& u_hi, bool& ok) {
  using K = TermExpr::Kind;
  switch (t.kind()) {
    case K::Const: return {t.value(), t.value()};
    case K::Var: {
      const int i = t.var_index() - 1;
      if (t.var_kind() == VarKind::State) return {x_lo(i), x_hi(i)};
      return {u_lo(i), u_hi(i)};
    }
    case K::Add: {
      const Interval a = bound_term(t.lhs(), x_lo, x_hi, u_lo, u_hi, ok);
      const Interval b = bound_term(t.rhs(), x_lo, x_hi, u_lo, u_hi, ok);
      return {a.lo + b.lo, a.hi + b.hi};
    }
    case K::Mul: {
      const Interval a = bound_term(t.lhs(), x_lo, x_hi, u_lo, u_hi, ok);
      const Interval b = bound_term(t.rhs(), x_lo, x_hi, u_lo, u_hi, ok);
      if (t.lhs() == t.rhs()) {  // e*e: same value on both sides
        const double lo2 = a.lo * a.lo, hi2 = a.hi * a.hi;
        if (a.lo <= 0.0 && a.hi >= 0.0) return {0.0, std::max(lo2, hi2)};
        return {std::min(lo2, hi2), std::max(lo2, hi2)};
      }
      const double p[] = {a.lo * b.lo, a.lo * b.hi, a.hi * b.lo, a.hi * b.hi};
      return {*std::min_element(p, p + 4), *std::max_element(p, p + 4)};
    }
    case K::Func: {
      const Interval a = bound_term(t.lhs(), x_lo, x_hi, u_lo, u_hi, ok);
      constexpr double pi = std::numbers::pi;
      switch (t.func_kind()) {
        case FuncKind::Sin: return sin_bounds(a);
        case FuncKind::Cos: return sin_bounds({a.lo + pi / 2.0, a.hi + pi / 2.0});
        case FuncKind::Tan:
          if (hits(a.lo, a.hi, pi / 2.0, pi)) {
            ok = false;
            return {-HUGE_VAL, HUGE_VAL};
          }
          return {std::tan(a.lo), std::tan(a.hi)};
        case FuncKind::Atan: return {std::atan(a.lo), std::atan(a.hi)};
        case FuncKind::Tanh: return {std::tanh(a.lo), std::tanh(a.hi)};
        case FuncKind::Ln:
          if (!(a.lo > 0.0)) {
            ok = false;
            return {-HUGE_VAL, a.hi > 0.0 ? std::log(a.hi) : -HUGE_VAL};
          }
          return {std::log(a.lo), std::log(a.hi)};
      }
    }
  }
  return {0.0, 0.0};
}

TermExpr inputs_as_states(const TermExpr& t, int n) {
  using K = TermExpr::Kind;
  switch (t.kind()) {
    case K::Const: return t;
    case K::Var:
      if (t.var_kind() == VarKind::Input) {
        return TermExpr::variable(VarKind::State, n + t.var_index());
      }
      return t;
    case K::Add:
      return TermExpr::add(inputs_as_states(t.lhs(), n),
                           inputs_as_states(t.rhs(), n));
    case K::Mul:
      return TermExpr::mul(inputs_as_states(t.lhs(), n),
                           inputs_as_states(t.rhs(), n));
    case K::Func:
      return TermExpr::func(t.func_kind(), inputs_as_states(t.lhs(), n));
  }
  return t;
}

// ---------------------------------------------------------------------------
// Dictionary

Dictionary::Dictionary(int n, int m, std::vector<TermExpr> terms)
    : n_(n), m_(m), terms_(std::move(terms)) {
  if (n < 1 || m < 0) {
    throw Error(ErrorKind::Dimension, "dictionary needs n >= 1 and m >= 0");
  }
  if (size() < n + m) {
    throw Error(ErrorKind::Dimension,
                "dictionary must contain at least n + m terms");
  }
  for (int i = 0; i < n + m; ++i) {
    const TermExpr& t = terms_[i];
    const VarKind want = i < n ? VarKind::State : VarKind::Input;
    const int index = i < n ? i + 1 : i - n + 1;
    if (t.kind() != TermExpr::Kind::Var || t.var_kind() != want ||
        t.var_index() != index) {
      throw Error(ErrorKind::InvalidArgument,
                  "dictionary term " + std::to_string(i + 1) + " must be " +
                      (want == VarKind::State ? "x" : "u") +
                      std::to_string(index) + " (linear prefix [x; u])");
    }
  }
  for (int i = 0; i < size(); ++i) {
    const TermExpr& t = terms_[i];
    if (!t.has_variables()) {
      throw Error(ErrorKind::InvalidArgument,
                  "dictionary term " + std::to_string(i + 1) +
                      " is constant; constant terms are not allowed");
    }
    if (t.max_index(VarKind::State) > n || t.max_index(VarKind::Input) > m) {
      throw Error(ErrorKind::Dimension, "dictionary term " +
                                            std::to_string(i + 1) +
                                            " references an undeclared variable");
    }
  }
}

Dictionary Dictionary::parse(int n, int m,
                             const std::vector<std::string>& sources) {
  std::vector<TermExpr> terms;
  terms.reserve(sources.size());
  for (const auto& s : sources) terms.push_back(parse_term(s, n, m));
  return Dictionary(n, m, std::move(terms));
}

std::vector<std::string> Dictionary::sources() const {
  std::vector<std::string> out;
  out.reserve(terms_.size());
  for (const auto& t : terms_) out.push_back(render_term(t));
  return out;
}

Eigen::VectorXd Dictionary::eval(const Eigen::VectorXd& x,
                                 const Eigen::VectorXd& u) const {
  if (x.size() != n_ || u.size() != m_) {
    throw Error(ErrorKind::Dimension, "dictionary evaluated at wrong dimension");
  }
  Eigen::VectorXd out(size());
  out.head(n_) = x;
  out.segment(n_, m_) = u;
  const std::span<const double> xs(x.data(), static_cast<std::size_t>(n_));
  const std::span<const double> us(u.data(), static_cast<std::size_t>(m_));
  for (int i = n_ + m_; i < size(); ++i) out(i) = eval_term(terms_[i], xs, us);
  return out;
}

Eigen::VectorXd Dictionary::eval_nonlinear(const Eigen::VectorXd& x,
                                           const Eigen::VectorXd& u) const {
  if (x.size() != n_ || u.size() != m_) {
    throw Error(ErrorKind::Dimension, "dictionary evaluated at wrong dimension");
  }
  Eigen::VectorXd out(nonlinear_size());
  const std::span<const double> xs(x.data(), static_cast<std::size_t>(n_));
  const std::span<const double> us(u.data(), static_cast<std::size_t>(m_));
  for (int i = 0; i < nonlinear_size(); ++i) {
    out(i) = eval_term(terms_[n_ + m_ + i], xs, us);
  }
  return out;
}

namespace {

void check_domain(const TermExpr& t, const Eigen::VectorXd& x_lo,
                  const Eigen::VectorXd& x_hi, const Eigen::VectorXd& u_lo,
                  const Eigen::VectorXd& u_hi, int term_no) {
  using K = TermExpr::Kind;
  if (t.kind() == K::Add || t.kind() == K::Mul) {
    check_domain(t.lhs(), x_lo, x_hi, u_lo, u_hi, term_no);
    check_domain(t.rhs(), x_lo, x_hi, u_lo, u_hi, term_no);
    return;
  }
  if (t.kind() != K::Func) return;
  check_domain(t.lhs(), x_lo, x_hi, u_lo, u_hi, term_no);
  bool ok = true;
  const Interval a = bound_term(t.lhs(), x_lo, x_hi, u_lo, u_hi, ok);
  constexpr double pi = std::numbers::pi;
  if (t.func_kind() == FuncKind::Ln && !(a.lo > 0.0)) {
    throw Error(ErrorKind::Domain,
                "term " + std::to_string(term_no) + ": ln argument " +
                    render_term(t.lhs()) +
                    " is not provably positive on the analysis box");
  }
  if (t.func_kind() == FuncKind::Tan && hits(a.lo, a.hi, pi / 2.0, pi)) {
    throw Error(ErrorKind::Domain, "term " + std::to_string(term_no) +
                                       ": tan argument " + render_term(t.lhs()) +
                                       " may cross a pole on the analysis box");
  }
}

}  // namespace

void Dictionary::validate_on_box(const Eigen::VectorXd& x_lo,
                                 const Eigen::VectorXd& x_hi,
                                 const Eigen::VectorXd& u_lo,
                                 const Eigen::VectorXd& u_hi) const {
  for (int i = 0; i < size(); ++i) {
    check_domain(terms_[i], x_lo, x_hi, u_lo, u_hi, i + 1);
  }
}

Eigen::VectorXd eval_dictionary(const Dictionary& dict, const Eigen::VectorXd& x,
                                const Eigen::VectorXd& u) {
  return dict.eval(x, u);
}

}  // namespace acbc

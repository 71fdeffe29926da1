#pragma once

#include <algorithm>
#include <cctype>
#include <cstdint>
#include <cstdio>
#include <cstdlib>
#include <map>
#include <span>
#include <string>
#include <string_view>
#include <tuple>
#include <vector>

#include "jmc/common.hpp"
#include "jmc/interval.hpp"

namespace jmc {

enum class Op : std::uint8_t {
  Const, VarX, VarW,          // leaves
  Neg, Exp, Ln, Sqrt, Sin, Cos, Pow,  // unary (Pow carries an integer exponent)
  Add, Sub, Mul, Div          // binary
};

inline bool is_leaf(Op op) { return op == Op::Const || op == Op::VarX || op == Op::VarW; }
inline bool is_binary(Op op) { return op >= Op::Add; }

struct ExprNode {
  Op op = Op::Const;
  std::int32_t a = -1, b = -1;  // child indices (topologically earlier)
  double value = 0.0;           // Const payload, or variable index for VarX/VarW
  int exponent = 0;             // Pow payload
};

//! Immutable expression DAG over decision variables x1..xn and uncertainty
//! variables w1..wm (g1..gm is accepted as a synonym for w when parsing).
//! Nodes are stored in topological order; structurally identical subterms are
//! merged at construction (syntactic common-subexpression elimination only).
class ExprGraph {
 public:
  ExprGraph() = default;

  int n_x() const { return nx_; }
  int n_w() const { return nw_; }
  std::int32_t root() const { return root_; }
  std::size_t size() const { return nodes_.size(); }
  const ExprNode& node(std::int32_t i) const { return nodes_[static_cast<std::size_t>(i)]; }
  const std::vector<ExprNode>& nodes() const { return nodes_; }

  // -- builder interface ----------------------------------------------------

  std::int32_t add_const(double v) { return intern({Op::Const, -1, -1, v, 0}); }

  std::int32_t add_var_x(int i) {
    if (i < 0) throw Error("negative variable index");
    nx_ = std::max(nx_, i + 1);
    return intern({Op::VarX, -1, -1, static_cast<double>(i), 0});
  }

  std::int32_t add_var_w(int j) {
    if (j < 0) throw Error("negative variable index");
    nw_ = std::max(nw_, j + 1);
    return intern({Op::VarW, -1, -1, static_cast<double>(j), 0});
  }

  std::int32_t add_unary(Op op, std::int32_t a) {
    check_child(a);
    return intern({op, a, -1, 0.0, 0});
  }

  std::int32_t add_pow(std::int32_t a, int n) {
    check_child(a);
    return intern({Op::Pow, a, -1, 0.0, n});
  }

  std::int32_t add_binary(Op op, std::int32_t a, std::int32_t b) {
    check_child(a);
    check_child(b);
    return intern({op, a, b, 0.0, 0});
  }

  void set_root(std::int32_t r) {
    check_child(r);
    root_ = r;
  }

  //! Declare dimensions beyond those implied by the variables present.
  void declare_dims(int nx, int nw) {
    nx_ = std::max(nx_, nx);
    nw_ = std::max(nw_, nw);
  }

  // -- evaluation -----------------------------------------------------------

  //! Evaluate the DAG bottom-up in an arbitrary numeric semantics. `Ops`
  //! supplies the arithmetic; LeafX/LeafW map variable indices to values.
  template <typename T, typename Ops, typename LeafX, typename LeafW>
  T eval_with(LeafX&& leafx, LeafW&& leafw) const {
    if (root_ < 0) throw Error("evaluating an empty expression");
    std::vector<T> v;
    v.reserve(nodes_.size());
    for (const ExprNode& n : nodes_) {
      switch (n.op) {
        case Op::Const: v.push_back(Ops::constant(n.value)); break;
        case Op::VarX: v.push_back(leafx(static_cast<int>(n.value))); break;
        case Op::VarW: v.push_back(leafw(static_cast<int>(n.value))); break;
        case Op::Neg: v.push_back(Ops::neg(v[n.a])); break;
        case Op::Exp: v.push_back(Ops::exp(v[n.a])); break;
        case Op::Ln: v.push_back(Ops::ln(v[n.a])); break;
        case Op::Sqrt: v.push_back(Ops::sqrt(v[n.a])); break;
        case Op::Sin: v.push_back(Ops::sin(v[n.a])); break;
        case Op::Cos: v.push_back(Ops::cos(v[n.a])); break;
        case Op::Pow: v.push_back(Ops::pow_int(v[n.a], n.exponent)); break;
        case Op::Add: v.push_back(Ops::add(v[n.a], v[n.b])); break;
        case Op::Sub: v.push_back(Ops::sub(v[n.a], v[n.b])); break;
        case Op::Mul: v.push_back(Ops::mul(v[n.a], v[n.b])); break;
        case Op::Div: v.push_back(Ops::div(v[n.a], v[n.b])); break;
      }
    }
    return v[static_cast<std::size_t>(root_)];
  }

 private:
  void check_child(std::int32_t i) const {
    if (i < 0 || static_cast<std::size_t>(i) >= nodes_.size()) throw Error("invalid node index");
  }

  std::int32_t intern(const ExprNode& n) {
    const auto key = std::make_tuple(n.op, n.a, n.b, n.value, n.exponent);
    auto it = cse_.find(key);
    if (it != cse_.end()) return it->second;
    nodes_.push_back(n);
    const auto id = static_cast<std::int32_t>(nodes_.size() - 1);
    cse_.emplace(key, id);
    return id;
  }

  std::vector<ExprNode> nodes_;
  std::map<std::tuple<Op, std::int32_t, std::int32_t, double, int>, std::int32_t> cse_;
  std::int32_t root_ = -1;
  int nx_ = 0, nw_ = 0;
};

namespace detail {

struct RealOps {
  static double constant(double c) { return c; }
  static double neg(double a) { return -a; }
  static double add(double a, double b) { return a + b; }
  static double sub(double a, double b) { return a - b; }
  static double mul(double a, double b) { return a * b; }
  static double div(double a, double b) {
    if (b == 0.0) throw DomainError("division by zero");
    return a / b;
  }
  static double exp(double a) { return std::exp(a); }
  static double ln(double a) {
    if (!(a > 0.0)) throw DomainError("ln of a nonpositive value");
    return std::log(a);
  }
  static double sqrt(double a) {
    if (a < 0.0) throw DomainError("sqrt of a negative value");
    return std::sqrt(a);
  }
  static double sin(double a) { return std::sin(a); }
  static double cos(double a) { return std::cos(a); }
  static double pow_int(double a, int n) {
    if (n < 0 && a == 0.0) throw DomainError("negative power of zero");
    const double p = ipow(a, n < 0 ? -n : n);
    return n < 0 ? 1.0 / p : p;
  }
};

struct IntervalOps {
  static Interval constant(double c) { return Interval::point(c); }
  static Interval neg(const Interval& a) { return -a; }
  static Interval add(const Interval& a, const Interval& b) { return a + b; }
  static Interval sub(const Interval& a, const Interval& b) { return a - b; }
  static Interval mul(const Interval& a, const Interval& b) { return a * b; }
  static Interval div(const Interval& a, const Interval& b) { return a / b; }
  static Interval exp(const Interval& a) { return jmc::exp(a); }
  static Interval ln(const Interval& a) { return jmc::ln(a); }
  static Interval sqrt(const Interval& a) { return jmc::sqrt(a); }
  static Interval sin(const Interval& a) { return jmc::sin(a); }
  static Interval cos(const Interval& a) { return jmc::cos(a); }
  static Interval pow_int(const Interval& a, int n) { return jmc::pow_int(a, n); }
};

}  // namespace detail

//! Real-arithmetic evaluation at (x, w). Domain violations raise DomainError.
inline double eval_real(const ExprGraph& g, std::span<const double> x, std::span<const double> w) {
  if (static_cast<int>(x.size()) < g.n_x() || static_cast<int>(w.size()) < g.n_w())
    throw Error("point dimension does not match expression");
  return g.eval_with<double, detail::RealOps>([&](int i) { return x[static_cast<std::size_t>(i)]; },
                                              [&](int j) { return w[static_cast<std::size_t>(j)]; });
}

//! Natural interval extension over X x W.
inline Interval eval_interval(const ExprGraph& g, const Box& X, const Box& W) {
  if (static_cast<int>(X.size()) < g.n_x() || static_cast<int>(W.size()) < g.n_w())
    throw Error("box dimension does not match expression");
  return g.eval_with<Interval, detail::IntervalOps>(
      [&](int i) { return X[static_cast<std::size_t>(i)]; },
      [&](int j) { return W[static_cast<std::size_t>(j)]; });
}

//! Substitute uncertainty variables: returns h with h(x, g) = f(x, psi(g)).
//! Each psi_j is an expression over uncertainty variables only.
inline ExprGraph compose(const ExprGraph& f, const std::vector<ExprGraph>& psi) {
  if (static_cast<int>(psi.size()) != f.n_w())
    throw Error("compose: expected " + std::to_string(f.n_w()) + " substitution expressions, got " +
                std::to_string(psi.size()));
  ExprGraph out;
  std::vector<std::int32_t> sub(psi.size(), -1);
  for (std::size_t j = 0; j < psi.size(); ++j) {
    const ExprGraph& p = psi[j];
    if (p.n_x() != 0) throw Error("compose: substitution expressions must not use decision variables");
    if (p.root() < 0) throw Error("compose: empty substitution expression");
    std::vector<std::int32_t> map(p.size(), -1);
    for (std::size_t k = 0; k < p.size(); ++k) {
      const ExprNode& n = p.node(static_cast<std::int32_t>(k));
      std::int32_t id;
      switch (n.op) {
        case Op::Const: id = out.add_const(n.value); break;
        case Op::VarW: id = out.add_var_w(static_cast<int>(n.value)); break;
        case Op::VarX: throw Error("compose: unexpected decision variable");
        case Op::Pow: id = out.add_pow(map[static_cast<std::size_t>(n.a)], n.exponent); break;
        default:
          id = is_binary(n.op)
                   ? out.add_binary(n.op, map[static_cast<std::size_t>(n.a)], map[static_cast<std::size_t>(n.b)])
                   : out.add_unary(n.op, map[static_cast<std::size_t>(n.a)]);
      }
      map[k] = id;
    }
    sub[j] = map[static_cast<std::size_t>(p.root())];
  }
  std::vector<std::int32_t> map(f.size(), -1);
  for (std::size_t k = 0; k < f.size(); ++k) {
    const ExprNode& n = f.node(static_cast<std::int32_t>(k));
    std::int32_t id;
    switch (n.op) {
      case Op::Const: id = out.add_const(n.value); break;
      case Op::VarX: id = out.add_var_x(static_cast<int>(n.value)); break;
      case Op::VarW: id = sub[static_cast<std::size_t>(static_cast<int>(n.value))]; break;
      case Op::Pow: id = out.add_pow(map[static_cast<std::size_t>(n.a)], n.exponent); break;
      default:
        id = is_binary(n.op)
                 ? out.add_binary(n.op, map[static_cast<std::size_t>(n.a)], map[static_cast<std::size_t>(n.b)])
                 : out.add_unary(n.op, map[static_cast<std::size_t>(n.a)]);
    }
    map[k] = id;
  }
  out.set_root(map[static_cast<std::size_t>(f.root())]);
  out.declare_dims(f.n_x(), 0);
  return out;
}

namespace detail {

// Recursive-descent parser for the expression grammar:
//   expr   := term (('+'|'-') term)*
//   term   := factor (('*'|'/') factor)*
//   factor := '-' factor | base ('^' integer)?
//   base   := number | 'x' digits | 'w' digits | 'g' digits
//           | func '(' expr ')' | '(' expr ')'
//   func   := exp | ln | sqrt | sin | cos
// '^' takes an integer literal exponent only; unary minus binds looser than
// '^' so that -x1^2 means -(x1^2), matching standard arithmetic precedence.
class Parser {
 public:
  Parser(std::string_view s, ExprGraph& g) : s_(s), g_(g) {}

  std::int32_t parse() {
    const std::int32_t r = expr();
    skip_ws();
    if (pos_ != s_.size()) fail("unexpected trailing input");
    return r;
  }

 private:
  [[noreturn]] void fail(const std::string& msg) const { throw ParseError(msg, pos_); }

  void skip_ws() {
    while (pos_ < s_.size() && std::isspace(static_cast<unsigned char>(s_[pos_]))) ++pos_;
  }

  bool eat(char c) {
    skip_ws();
    if (pos_ < s_.size() && s_[pos_] == c) { ++pos_; return true; }
    return false;
  }

  char peek() {
    skip_ws();
    return pos_ < s_.size() ? s_[pos_] : '\0';
  }

  std::int32_t expr() {
    std::int32_t acc = term();
    for (;;) {
      if (eat('+')) acc = g_.add_binary(Op::Add, acc, term());
      else if (eat('-')) acc = g_.add_binary(Op::Sub, acc, term());
      else return acc;
    }
  }

  std::int32_t term() {
    std::int32_t acc = factor();
    for (;;) {
      if (eat('*')) acc = g_.add_binary(Op::Mul, acc, factor());
      else if (eat('/')) acc = g_.add_binary(Op::Div, acc, factor());
      else return acc;
    }
  }

  std::int32_t factor() {
    if (eat('-')) return g_.add_unary(Op::Neg, factor());
    std::int32_t b = base();
    if (eat('^')) {
      const int n = integer();
      b = (n == 0) ? g_.add_const(1.0) : (n == 1 ? b : g_.add_pow(b, n));
    }
    return b;
  }

  int integer() {
    skip_ws();
    std::size_t start = pos_;
    if (pos_ < s_.size() && s_[pos_] == '-') ++pos_;
    if (pos_ >= s_.size() || !std::isdigit(static_cast<unsigned char>(s_[pos_]))) fail("expected integer exponent");
    while (pos_ < s_.size() && std::isdigit(static_cast<unsigned char>(s_[pos_]))) ++pos_;
    return std::stoi(std::string(s_.substr(start, pos_ - start)));
  }

  std::int32_t base() {
    skip_ws();
    if (pos_ >= s_.size()) fail("unexpected end of input");
    const char c = s_[pos_];
    if (std::isdigit(static_cast<unsigned char>(c)) || c == '.') return number();
    if (c == '(') {
      ++pos_;
      const std::int32_t e = expr();
      if (!eat(')')) fail("expected ')'");
      return e;
    }
    if (std::isalpha(static_cast<unsigned char>(c))) return name();
    fail(std::string("unexpected character '") + c + "'");
  }

  std::int32_t number() {
    // Bounded copy so strtod sees a null-terminated buffer.
    const std::string tmp(s_.substr(pos_, std::min<std::size_t>(64, s_.size() - pos_)));
    char* end = nullptr;
    const double v = std::strtod(tmp.c_str(), &end);
    if (end == tmp.c_str()) fail("malformed number");
    pos_ += static_cast<std::size_t>(end - tmp.c_str());
    return g_.add_const(v);
  }

  std::int32_t name() {
    std::size_t start = pos_;
    while (pos_ < s_.size() && std::isalpha(static_cast<unsigned char>(s_[pos_]))) ++pos_;
    const std::string_view id = s_.substr(start, pos_ - start);
    if (id == "x" || id == "w" || id == "g") {
      std::size_t dstart = pos_;
      while (pos_ < s_.size() && std::isdigit(static_cast<unsigned char>(s_[pos_]))) ++pos_;
      if (pos_ == dstart) fail("expected variable index after '" + std::string(id) + "'");
      const int idx = std::stoi(std::string(s_.substr(dstart, pos_ - dstart)));
      if (idx < 1) fail("variable indices start at 1");
      return id == "x" ? g_.add_var_x(idx - 1) : g_.add_var_w(idx - 1);
    }
    Op op;
    if (id == "exp") op = Op::Exp;
    else if (id == "ln") op = Op::Ln;
    else if (id == "sqrt") op = Op::Sqrt;
    else if (id == "sin") op = Op::Sin;
    else if (id == "cos") op = Op::Cos;
    else fail("unknown identifier '" + std::string(id) + "'");
    if (!eat('(')) fail("expected '(' after function name");
    const std::int32_t arg = expr();
    if (!eat(')')) fail("expected ')'");
    return g_.add_unary(op, arg);
  }

  std::string_view s_;
  ExprGraph& g_;
  std::size_t pos_ = 0;
};

}  // namespace detail

//! Parse an expression string into a DAG. Variables: x1.. decision,
//! w1.. / g1.. uncertainty. Dimensions are the largest index used.
inline ExprGraph parse(std::string_view text) {
  ExprGraph g;
  detail::Parser p(text, g);
  g.set_root(p.parse());
  return g;
}

//! Render a node back to text (diagnostics; fully parenthesized).
inline std::string to_string(const ExprGraph& g) {
  if (g.root() < 0) return "";
  std::vector<std::string> s(g.size());
  for (std::size_t k = 0; k < g.size(); ++k) {
    const ExprNode& n = g.node(static_cast<std::int32_t>(k));
    char buf[64];
    switch (n.op) {
      case Op::Const:
        std::snprintf(buf, sizeof buf, "%.17g", n.value);
        s[k] = buf;
        break;
      case Op::VarX: s[k] = "x" + std::to_string(static_cast<int>(n.value) + 1); break;
      case Op::VarW: s[k] = "w" + std::to_string(static_cast<int>(n.value) + 1); break;
      case Op::Neg: s[k] = "(-" + s[static_cast<std::size_t>(n.a)] + ")"; break;
      case Op::Exp: s[k] = "exp(" + s[static_cast<std::size_t>(n.a)] + ")"; break;
      case Op::Ln: s[k] = "ln(" + s[static_cast<std::size_t>(n.a)] + ")"; break;
      case Op::Sqrt: s[k] = "sqrt(" + s[static_cast<std::size_t>(n.a)] + ")"; break;
      case Op::Sin: s[k] = "sin(" + s[static_cast<std::size_t>(n.a)] + ")"; break;
      case Op::Cos: s[k] = "cos(" + s[static_cast<std::size_t>(n.a)] + ")"; break;
      case Op::Pow:
        s[k] = s[static_cast<std::size_t>(n.a)] + "^" + std::to_string(n.exponent);
        break;
      case Op::Add: s[k] = "(" + s[static_cast<std::size_t>(n.a)] + " + " + s[static_cast<std::size_t>(n.b)] + ")"; break;
      case Op::Sub: s[k] = "(" + s[static_cast<std::size_t>(n.a)] + " - " + s[static_cast<std::size_t>(n.b)] + ")"; break;
      case Op::Mul: s[k] = "(" + s[static_cast<std::size_t>(n.a)] + " * " + s[static_cast<std::size_t>(n.b)] + ")"; break;
      case Op::Div: s[k] = "(" + s[static_cast<std::size_t>(n.a)] + " / " + s[static_cast<std::size_t>(n.b)] + ")"; break;
    }
  }
  return s[static_cast<std::size_t>(g.root())];
}

}  // namespace jmc

#pragma once

// Expression trees over x for analytic potentials: parsing, symbolic
// differentiation, substitution and a compiled postfix evaluator.
//
// Grammar:
//   expr   := term (('+'|'-') term)*
//   term   := factor (('*'|'/') factor)*
//   factor := base ('^' factor)?
//   base   := ('+'|'-') factor | number | 'x' | 'pi' | func '(' expr ')' | '(' expr ')'
//   func   := sin | cos | exp | log | cosh | sinh | abs | sqrt

#include <array>
#include <cctype>
#include <charconv>
#include <cmath>
#include <memory>
#include <numbers>
#include <sstream>
#include <string>
#include <string_view>
#include <vector>

#include "qiso/error.hpp"

namespace qiso::expr {

enum class Op {
  constant,
  var,
  add,
  sub,
  mul,
  div,
  pow,
  neg,
  sin,
  cos,
  exp,
  log,
  cosh,
  sinh,
  abs,
  sqrt,
  sign,  // derivative of abs; not reachable from the grammar
};

struct Node;
using NodePtr = std::shared_ptr<const Node>;

struct Node {
  Op op = Op::constant;
  double value = 0.0;
  NodePtr lhs;
  NodePtr rhs;
};

inline bool is_unary(Op op) { return op >= Op::neg; }
inline bool is_binary(Op op) { return op >= Op::add && op <= Op::pow; }

// ---------------------------------------------------------------------------
// Construction with light constant folding
// ---------------------------------------------------------------------------

inline NodePtr constant(double v) {
  return std::make_shared<const Node>(Node{Op::constant, v, nullptr, nullptr});
}
inline NodePtr variable() {
  return std::make_shared<const Node>(Node{Op::var, 0.0, nullptr, nullptr});
}

inline bool is_const(const NodePtr& n, double v) {
  return n->op == Op::constant && n->value == v;
}
inline bool is_const(const NodePtr& n) { return n->op == Op::constant; }

inline double apply_unary(Op op, double a) {
  switch (op) {
    case Op::neg: return -a;
    case Op::sin: return std::sin(a);
    case Op::cos: return std::cos(a);
    case Op::exp: return std::exp(a);
    case Op::log: return std::log(a);
    case Op::cosh: return std::cosh(a);
    case Op::sinh: return std::sinh(a);
    case Op::abs: return std::abs(a);
    case Op::sqrt: return std::sqrt(a);
    case Op::sign: return a > 0.0 ? 1.0 : (a < 0.0 ? -1.0 : 0.0);
    default: return std::nan("");
  }
}

inline double apply_binary(Op op, double a, double b) {
  switch (op) {
    case Op::add: return a + b;
    case Op::sub: return a - b;
    case Op::mul: return a * b;
    case Op::div: return a / b;
    case Op::pow: return std::pow(a, b);
    default: return std::nan("");
  }
}

inline NodePtr unary(Op op, NodePtr a) {
  if (is_const(a)) return constant(apply_unary(op, a->value));
  if (op == Op::neg && a->op == Op::neg) return a->lhs;
  return std::make_shared<const Node>(Node{op, 0.0, std::move(a), nullptr});
}

inline NodePtr binary(Op op, NodePtr a, NodePtr b) {
  if (is_const(a) && is_const(b)) return constant(apply_binary(op, a->value, b->value));
  switch (op) {
    case Op::add:
      if (is_const(a, 0.0)) return b;
      if (is_const(b, 0.0)) return a;
      break;
    case Op::sub:
      if (is_const(b, 0.0)) return a;
      if (is_const(a, 0.0)) return unary(Op::neg, b);
      break;
    case Op::mul:
      if (is_const(a, 0.0) || is_const(b, 0.0)) return constant(0.0);
      if (is_const(a, 1.0)) return b;
      if (is_const(b, 1.0)) return a;
      break;
    case Op::div:
      if (is_const(a, 0.0)) return constant(0.0);
      if (is_const(b, 1.0)) return a;
      break;
    case Op::pow:
      if (is_const(b, 1.0)) return a;
      if (is_const(b, 0.0)) return constant(1.0);
      break;
    default: break;
  }
  return std::make_shared<const Node>(Node{op, 0.0, std::move(a), std::move(b)});
}

inline NodePtr operator+(NodePtr a, NodePtr b) { return binary(Op::add, std::move(a), std::move(b)); }
inline NodePtr operator-(NodePtr a, NodePtr b) { return binary(Op::sub, std::move(a), std::move(b)); }
inline NodePtr operator*(NodePtr a, NodePtr b) { return binary(Op::mul, std::move(a), std::move(b)); }
inline NodePtr operator/(NodePtr a, NodePtr b) { return binary(Op::div, std::move(a), std::move(b)); }
inline NodePtr operator-(NodePtr a) { return unary(Op::neg, std::move(a)); }

// ---------------------------------------------------------------------------
// Calculus
// ---------------------------------------------------------------------------

/// d/dx of the tree.
inline NodePtr differentiate(const NodePtr& n) {
  const auto& u = n->lhs;
  const auto& v = n->rhs;
  switch (n->op) {
    case Op::constant: return constant(0.0);
    case Op::var: return constant(1.0);
    case Op::add: return differentiate(u) + differentiate(v);
    case Op::sub: return differentiate(u) - differentiate(v);
    case Op::mul: return differentiate(u) * v + u * differentiate(v);
    case Op::div: {
      auto du = differentiate(u);
      auto dv = differentiate(v);
      return (du * v - u * dv) / (v * v);
    }
    case Op::pow: {
      auto du = differentiate(u);
      if (is_const(v)) {
        return constant(v->value) * binary(Op::pow, u, constant(v->value - 1.0)) * du;
      }
      auto dv = differentiate(v);
      return n * (dv * unary(Op::log, u) + v * du / u);
    }
    case Op::neg: return -differentiate(u);
    case Op::sin: return unary(Op::cos, u) * differentiate(u);
    case Op::cos: return -(unary(Op::sin, u) * differentiate(u));
    case Op::exp: return n * differentiate(u);
    case Op::log: return differentiate(u) / u;
    case Op::cosh: return unary(Op::sinh, u) * differentiate(u);
    case Op::sinh: return unary(Op::cosh, u) * differentiate(u);
    case Op::abs: return unary(Op::sign, u) * differentiate(u);
    case Op::sqrt: return differentiate(u) / (constant(2.0) * n);
    case Op::sign: return constant(0.0);
  }
  return constant(0.0);
}

/// Replace every occurrence of x by `replacement`.
inline NodePtr substitute(const NodePtr& n, const NodePtr& replacement) {
  switch (n->op) {
    case Op::constant: return n;
    case Op::var: return replacement;
    default: break;
  }
  if (is_unary(n->op)) return unary(n->op, substitute(n->lhs, replacement));
  return binary(n->op, substitute(n->lhs, replacement), substitute(n->rhs, replacement));
}

inline const char* function_name(Op op) {
  switch (op) {
    case Op::sin: return "sin";
    case Op::cos: return "cos";
    case Op::exp: return "exp";
    case Op::log: return "log";
    case Op::cosh: return "cosh";
    case Op::sinh: return "sinh";
    case Op::abs: return "abs";
    case Op::sqrt: return "sqrt";
    case Op::sign: return "sign";
    default: return "?";
  }
}

/// Fully parenthesized text that parses back to an equivalent tree
/// (except for `sign`, which only appears in derivatives).
inline std::string to_string(const NodePtr& n) {
  std::ostringstream out;
  out.precision(17);
  switch (n->op) {
    case Op::constant:
      if (n->value < 0.0) {
        out << "(-" << -n->value << ")";
      } else {
        out << n->value;
      }
      return out.str();
    case Op::var: return "x";
    case Op::neg: return "(-" + to_string(n->lhs) + ")";
    case Op::add: return "(" + to_string(n->lhs) + "+" + to_string(n->rhs) + ")";
    case Op::sub: return "(" + to_string(n->lhs) + "-" + to_string(n->rhs) + ")";
    case Op::mul: return "(" + to_string(n->lhs) + "*" + to_string(n->rhs) + ")";
    case Op::div: return "(" + to_string(n->lhs) + "/" + to_string(n->rhs) + ")";
    case Op::pow: return "(" + to_string(n->lhs) + "^" + to_string(n->rhs) + ")";
    default: return std::string(function_name(n->op)) + "(" + to_string(n->lhs) + ")";
  }
}

// ---------------------------------------------------------------------------
// Parser
// ---------------------------------------------------------------------------

class Parser {
 public:
  explicit Parser(std::string_view text) : text_(text) {}

  NodePtr parse() {
    auto n = parse_expr();
    skip_ws();
    if (pos_ != text_.size()) fail("unexpected '" + std::string(1, text_[pos_]) + "'");
    return n;
  }

 private:
  [[noreturn]] void fail(const std::string& what) const { throw ParseError(pos_, what); }

  void skip_ws() {
    while (pos_ < text_.size() && std::isspace(static_cast<unsigned char>(text_[pos_]))) ++pos_;
  }

  bool accept(char c) {
    skip_ws();
    if (pos_ < text_.size() && text_[pos_] == c) {
      ++pos_;
      return true;
    }
    return false;
  }

  void expect(char c) {
    if (!accept(c)) fail(std::string("expected '") + c + "'");
  }

  NodePtr parse_expr() {
    auto n = parse_term();
    for (;;) {
      if (accept('+')) {
        n = binary(Op::add, n, parse_term());
      } else if (accept('-')) {
        n = binary(Op::sub, n, parse_term());
      } else {
        return n;
      }
    }
  }

  NodePtr parse_term() {
    auto n = parse_factor();
    for (;;) {
      if (accept('*')) {
        n = binary(Op::mul, n, parse_factor());
      } else if (accept('/')) {
        n = binary(Op::div, n, parse_factor());
      } else {
        return n;
      }
    }
  }

  NodePtr parse_factor() {
    auto n = parse_base();
    if (accept('^')) return binary(Op::pow, n, parse_factor());
    return n;
  }

  NodePtr parse_base() {
    skip_ws();
    if (pos_ >= text_.size()) fail("unexpected end of input");
    if (accept('-')) return unary(Op::neg, parse_factor());
    if (accept('+')) return parse_factor();
    if (accept('(')) {
      auto n = parse_expr();
      expect(')');
      return n;
    }
    const char c = text_[pos_];
    if (std::isdigit(static_cast<unsigned char>(c)) || c == '.') return parse_number();
    if (std::isalpha(static_cast<unsigned char>(c))) {
      const std::size_t start = pos_;
      while (pos_ < text_.size() && std::isalnum(static_cast<unsigned char>(text_[pos_]))) ++pos_;
      const std::string_view id = text_.substr(start, pos_ - start);
      if (id == "x") return variable();
      if (id == "pi") return constant(std::numbers::pi);
      static constexpr std::array<Op, 8> funcs = {Op::sin,  Op::cos,  Op::exp, Op::log,
                                                  Op::cosh, Op::sinh, Op::abs, Op::sqrt};
      for (Op f : funcs) {
        if (id == function_name(f)) {
          expect('(');
          auto arg = parse_expr();
          expect(')');
          return unary(f, arg);
        }
      }
      pos_ = start;
      fail("unknown identifier '" + std::string(id) + "'");
    }
    fail("unexpected '" + std::string(1, c) + "'");
  }

  NodePtr parse_number() {
    const char* first = text_.data() + pos_;
    const char* last = text_.data() + text_.size();
    double v = 0.0;
    auto [ptr, ec] = std::from_chars(first, last, v);
    if (ec != std::errc()) fail("malformed number");
    pos_ += static_cast<std::size_t>(ptr - first);
    return constant(v);
  }

  std::string_view text_;
  std::size_t pos_ = 0;
};

inline NodePtr parse(std::string_view text) { return Parser(text).parse(); }

// ---------------------------------------------------------------------------
// Compiled evaluation
// ---------------------------------------------------------------------------

/// Postfix program for fast repeated evaluation of a tree.
class Program {
 public:
  Program() = default;
  explicit Program(const NodePtr& root) {
    int depth = 0;
    emit(root, depth);
  }

  double operator()(double x) const {
    constexpr std::size_t kInline = 64;
    if (max_depth_ <= kInline) {
      std::array<double, kInline> stack;
      return run(x, stack.data());
    }
    std::vector<double> stack(max_depth_);
    return run(x, stack.data());
  }

  struct Instr {
    Op op;
    double value;
  };
  const std::vector<Instr>& code() const { return code_; }

 private:
  void emit(const NodePtr& n, int& depth) {
    if (n->op == Op::constant || n->op == Op::var) {
      code_.push_back({n->op, n->value});
      bump(++depth);
      return;
    }
    emit(n->lhs, depth);
    if (is_binary(n->op)) {
      emit(n->rhs, depth);
      --depth;
    }
    code_.push_back({n->op, 0.0});
  }

  void bump(int depth) {
    if (static_cast<std::size_t>(depth) > max_depth_) max_depth_ = static_cast<std::size_t>(depth);
  }

  double run(double x, double* stack) const {
    std::size_t top = 0;
    for (const auto& ins : code_) {
      switch (ins.op) {
        case Op::constant: stack[top++] = ins.value; break;
        case Op::var: stack[top++] = x; break;
        case Op::add: --top; stack[top - 1] += stack[top]; break;
        case Op::sub: --top; stack[top - 1] -= stack[top]; break;
        case Op::mul: --top; stack[top - 1] *= stack[top]; break;
        case Op::div: --top; stack[top - 1] /= stack[top]; break;
        case Op::pow: --top; stack[top - 1] = std::pow(stack[top - 1], stack[top]); break;
        default: stack[top - 1] = apply_unary(ins.op, stack[top - 1]); break;
      }
    }
    return stack[0];
  }

  std::vector<Instr> code_;
  std::size_t max_depth_ = 1;
};

/// Checks that the tree is defined on [0,1] by sampling `samples` equispaced
/// points. Besides non-finite results it rejects log/sqrt of out-of-range
/// arguments and denominators that vanish or change sign between samples
/// (a pole lying between two sample points).
inline void validate_on_unit_interval(const NodePtr& root, int samples = 1024) {
  const Program prog(root);
  const auto& code = prog.code();
  std::vector<int> prev_sign(code.size(), 0);
  std::vector<double> stack;
  for (int i = 0; i < samples; ++i) {
    const double x = static_cast<double>(i) / (samples - 1);
    stack.clear();
    for (std::size_t k = 0; k < code.size(); ++k) {
      const auto& ins = code[k];
      switch (ins.op) {
        case Op::constant:
          if (!std::isfinite(ins.value)) throw DomainError(x, "non-finite constant");
          stack.push_back(ins.value);
          continue;
        case Op::var: stack.push_back(x); continue;
        default: break;
      }
      if (is_binary(ins.op)) {
        const double b = stack.back();
        stack.pop_back();
        const double a = stack.back();
        if (ins.op == Op::div) {
          const int s = b > 0.0 ? 1 : (b < 0.0 ? -1 : 0);
          if (s == 0) throw DomainError(x, "division by zero");
          if (prev_sign[k] != 0 && prev_sign[k] != s) throw DomainError(x, "pole (denominator changes sign)");
          prev_sign[k] = s;
        }
        if (ins.op == Op::pow) {
          if (a < 0.0 && b != std::floor(b)) throw DomainError(x, "negative base with non-integer exponent");
          if (a == 0.0 && b < 0.0) throw DomainError(x, "zero raised to a negative power");
        }
        stack.back() = apply_binary(ins.op, a, b);
      } else {
        const double a = stack.back();
        if (ins.op == Op::log && !(a > 0.0)) throw DomainError(x, "log of a non-positive argument");
        if (ins.op == Op::sqrt && a < 0.0) throw DomainError(x, "sqrt of a negative argument");
        stack.back() = apply_unary(ins.op, a);
      }
      if (!std::isfinite(stack.back())) throw DomainError(x, "non-finite value");
    }
  }
}

}  // namespace qiso::expr

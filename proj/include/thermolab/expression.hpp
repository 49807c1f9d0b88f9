#ifndef THERMOLAB_EXPRESSION_HPP
#define THERMOLAB_EXPRESSION_HPP

// Small arithmetic expression language over the bundle coordinates
// (x, y, theta) with symbolic partial derivatives and a compiled evaluator.

#include <array>
#include <bit>
#include <cctype>
#include <charconv>
#include <cmath>
#include <cstdint>
#include <cstdio>
#include <functional>
#include <memory>
#include <numbers>
#include <string>
#include <string_view>
#include <unordered_map>
#include <utility>
#include <vector>

#include "thermolab/errors.hpp"

namespace thermolab {

enum class Var : int { x = 0, y = 1, theta = 2 };

namespace expr {

enum class Op : std::uint8_t {
  constant,
  variable,
  neg,
  add,
  sub,
  mul,
  div,
  pow,
  sin,
  cos,
  tan,
  exp,
  log,
  sqrt,
  tanh,
  abs,
};

struct Node;
using NodePtr = std::shared_ptr<const Node>;

struct Node {
  Op op = Op::constant;
  double value = 0.0;
  int var = 0;
  NodePtr lhs;
  NodePtr rhs;
};

inline bool is_unary_function(Op op) { return op >= Op::sin; }

inline const char* function_name(Op op) {
  switch (op) {
    case Op::sin: return "sin";
    case Op::cos: return "cos";
    case Op::tan: return "tan";
    case Op::exp: return "exp";
    case Op::log: return "log";
    case Op::sqrt: return "sqrt";
    case Op::tanh: return "tanh";
    case Op::abs: return "abs";
    default: return "";
  }
}

inline double apply_unary(Op op, double a) {
  switch (op) {
    case Op::neg: return -a;
    case Op::sin: return std::sin(a);
    case Op::cos: return std::cos(a);
    case Op::tan: return std::tan(a);
    case Op::exp: return std::exp(a);
    case Op::log: return std::log(a);
    case Op::sqrt: return std::sqrt(a);
    case Op::tanh: return std::tanh(a);
    case Op::abs: return std::abs(a);
    default: return a;
  }
}

inline double apply_binary(Op op, double a, double b) {
  switch (op) {
    case Op::add: return a + b;
    case Op::sub: return a - b;
    case Op::mul: return a * b;
    case Op::div: return a / b;
    case Op::pow: return std::pow(a, b);
    default: return 0.0;
  }
}

}  // namespace expr

class CompiledExpression;

/// Immutable expression DAG. Construction through the arithmetic operators
/// folds constants and drops neutral elements, which keeps repeated symbolic
/// differentiation from growing the tree needlessly.
class Expression {
 public:
  Expression() : Expression(0.0) {}
  Expression(double c) : node_(make_constant(c)) {}  // NOLINT(google-explicit-constructor)
  explicit Expression(expr::NodePtr node) : node_(std::move(node)) {}

  static Expression variable(Var v) {
    auto n = std::make_shared<expr::Node>();
    n->op = expr::Op::variable;
    n->var = static_cast<int>(v);
    return Expression(std::move(n));
  }
  static Expression x() { return variable(Var::x); }
  static Expression y() { return variable(Var::y); }
  static Expression theta() { return variable(Var::theta); }

  static Expression parse(std::string_view text);

  const expr::NodePtr& node() const { return node_; }
  bool is_constant() const { return node_->op == expr::Op::constant; }
  bool is_constant(double c) const { return is_constant() && node_->value == c; }
  double constant_value() const { return node_->value; }

  /// Tree-walking evaluation; use CompiledExpression in hot loops.
  double evaluate(double x, double y, double theta) const {
    const std::array<double, 3> vars{x, y, theta};
    return eval_node(*node_, vars);
  }

  Expression derivative(Var v) const;

  /// Fully parenthesized text that reparses to an expression with identical
  /// evaluation (constants are printed with 17 significant digits).
  std::string to_string() const {
    std::string out;
    print_node(*node_, out);
    return out;
  }

  friend Expression operator-(const Expression& a) { return unary(expr::Op::neg, a); }
  friend Expression operator+(const Expression& a, const Expression& b) { return binary(expr::Op::add, a, b); }
  friend Expression operator-(const Expression& a, const Expression& b) { return binary(expr::Op::sub, a, b); }
  friend Expression operator*(const Expression& a, const Expression& b) { return binary(expr::Op::mul, a, b); }
  friend Expression operator/(const Expression& a, const Expression& b) { return binary(expr::Op::div, a, b); }
  friend Expression pow(const Expression& a, const Expression& b) { return binary(expr::Op::pow, a, b); }
  friend Expression sin(const Expression& a) { return unary(expr::Op::sin, a); }
  friend Expression cos(const Expression& a) { return unary(expr::Op::cos, a); }
  friend Expression tan(const Expression& a) { return unary(expr::Op::tan, a); }
  friend Expression exp(const Expression& a) { return unary(expr::Op::exp, a); }
  friend Expression log(const Expression& a) { return unary(expr::Op::log, a); }
  friend Expression sqrt(const Expression& a) { return unary(expr::Op::sqrt, a); }
  friend Expression tanh(const Expression& a) { return unary(expr::Op::tanh, a); }
  friend Expression abs(const Expression& a) { return unary(expr::Op::abs, a); }

  static Expression unary(expr::Op op, const Expression& a) {
    using expr::Op;
    if (a.is_constant()) return Expression(expr::apply_unary(op, a.constant_value()));
    if (op == Op::neg && a.node_->op == Op::neg) return Expression(a.node_->lhs);
    auto n = std::make_shared<expr::Node>();
    n->op = op;
    n->lhs = a.node_;
    return Expression(std::move(n));
  }

  static Expression binary(expr::Op op, const Expression& a, const Expression& b) {
    using expr::Op;
    if (a.is_constant() && b.is_constant()) {
      return Expression(expr::apply_binary(op, a.constant_value(), b.constant_value()));
    }
    switch (op) {
      case Op::add:
        if (a.is_constant(0.0)) return b;
        if (b.is_constant(0.0)) return a;
        if (b.node_->op == Op::neg) return binary(Op::sub, a, Expression(b.node_->lhs));
        break;
      case Op::sub:
        if (b.is_constant(0.0)) return a;
        if (a.is_constant(0.0)) return -b;
        if (a.node_ == b.node_) return Expression(0.0);
        if (b.node_->op == Op::neg) return binary(Op::add, a, Expression(b.node_->lhs));
        break;
      case Op::mul:
        if (a.is_constant(0.0) || b.is_constant(0.0)) return Expression(0.0);
        if (a.is_constant(1.0)) return b;
        if (b.is_constant(1.0)) return a;
        if (a.is_constant(-1.0)) return -b;
        if (b.is_constant(-1.0)) return -a;
        if (a.node_->op == Op::neg && b.node_->op == Op::neg) {
          return binary(Op::mul, Expression(a.node_->lhs), Expression(b.node_->lhs));
        }
        if (a.node_->op == Op::neg) return -binary(Op::mul, Expression(a.node_->lhs), b);
        if (b.node_->op == Op::neg) return -binary(Op::mul, a, Expression(b.node_->lhs));
        // Keep numeric factors on the left and merge them.
        if (b.is_constant()) return binary(Op::mul, b, a);
        if (a.is_constant() && b.node_->op == Op::mul && b.node_->lhs->op == Op::constant) {
          return binary(Op::mul, Expression(a.constant_value() * b.node_->lhs->value), Expression(b.node_->rhs));
        }
        break;
      case Op::div:
        if (a.is_constant(0.0)) return Expression(0.0);
        if (b.is_constant(1.0)) return a;
        if (b.is_constant(-1.0)) return -a;
        if (a.node_ == b.node_) return Expression(1.0);
        break;
      case Op::pow:
        if (b.is_constant(0.0)) return Expression(1.0);
        if (b.is_constant(1.0)) return a;
        if (a.is_constant(1.0)) return Expression(1.0);
        break;
      default:
        break;
    }
    auto n = std::make_shared<expr::Node>();
    n->op = op;
    n->lhs = a.node_;
    n->rhs = b.node_;
    return Expression(std::move(n));
  }

 private:
  static expr::NodePtr make_constant(double c) {
    auto n = std::make_shared<expr::Node>();
    n->op = expr::Op::constant;
    n->value = c;
    return n;
  }

  static double eval_node(const expr::Node& n, const std::array<double, 3>& vars) {
    using expr::Op;
    switch (n.op) {
      case Op::constant: return n.value;
      case Op::variable: return vars[static_cast<std::size_t>(n.var)];
      case Op::add:
      case Op::sub:
      case Op::mul:
      case Op::div:
      case Op::pow: return expr::apply_binary(n.op, eval_node(*n.lhs, vars), eval_node(*n.rhs, vars));
      default: return expr::apply_unary(n.op, eval_node(*n.lhs, vars));
    }
  }

  static void print_node(const expr::Node& n, std::string& out) {
    using expr::Op;
    switch (n.op) {
      case Op::constant: {
        char buf[40];
        std::snprintf(buf, sizeof buf, "%.17g", n.value);
        if (n.value < 0 || std::signbit(n.value)) {
          out += '(';
          out += buf;
          out += ')';
        } else {
          out += buf;
        }
        return;
      }
      case Op::variable:
        out += n.var == 0 ? "x" : n.var == 1 ? "y" : "theta";
        return;
      case Op::neg:
        out += "(-";
        print_node(*n.lhs, out);
        out += ')';
        return;
      case Op::add:
      case Op::sub:
      case Op::mul:
      case Op::div:
      case Op::pow: {
        static constexpr const char* symbols[] = {"", "", "", " + ", " - ", " * ", " / ", "^"};
        out += '(';
        print_node(*n.lhs, out);
        out += symbols[static_cast<int>(n.op)];
        print_node(*n.rhs, out);
        out += ')';
        return;
      }
      default:
        out += expr::function_name(n.op);
        out += '(';
        print_node(*n.lhs, out);
        out += ')';
        return;
    }
  }

  expr::NodePtr node_;
};

namespace expr {

class Differentiator {
 public:
  explicit Differentiator(Var v) : var_(static_cast<int>(v)) {}

  Expression operator()(const NodePtr& n) {
    if (auto it = memo_.find(n.get()); it != memo_.end()) return it->second;
    Expression d = compute(n);
    memo_.emplace(n.get(), d);
    return d;
  }

 private:
  Expression compute(const NodePtr& n) {
    const Expression self(n);
    switch (n->op) {
      case Op::constant: return Expression(0.0);
      case Op::variable: return Expression(n->var == var_ ? 1.0 : 0.0);
      default: break;
    }
    const Expression a(n->lhs);
    const Expression da = (*this)(n->lhs);
    switch (n->op) {
      case Op::neg: return -da;
      case Op::add: return da + (*this)(n->rhs);
      case Op::sub: return da - (*this)(n->rhs);
      case Op::mul: {
        const Expression b(n->rhs);
        return da * b + a * (*this)(n->rhs);
      }
      case Op::div: {
        const Expression b(n->rhs);
        const Expression db = (*this)(n->rhs);
        if (db.is_constant(0.0)) return da / b;
        return da / b - a * db / (b * b);
      }
      case Op::pow: {
        const Expression b(n->rhs);
        const Expression db = (*this)(n->rhs);
        if (db.is_constant(0.0)) {
          if (da.is_constant(0.0)) return Expression(0.0);
          return b * pow(a, b - Expression(1.0)) * da;
        }
        return self * (db * log(a) + b * da / a);
      }
      case Op::sin: return cos(a) * da;
      case Op::cos: return -(sin(a) * da);
      case Op::tan: {
        const Expression c = cos(a);
        return da / (c * c);
      }
      case Op::exp: return self * da;
      case Op::log: return da / a;
      case Op::sqrt: return da / (Expression(2.0) * self);
      case Op::tanh: return (Expression(1.0) - self * self) * da;
      case Op::abs: return a / self * da;
      default: return Expression(0.0);
    }
  }

  int var_;
  std::unordered_map<const Node*, Expression> memo_;
};

class Parser {
 public:
  explicit Parser(std::string_view text) : text_(text) {}

  Expression parse() {
    skip_space();
    if (pos_ >= text_.size()) throw ParseError("empty expression", pos_);
    Expression e = parse_sum();
    skip_space();
    if (pos_ != text_.size()) throw ParseError(std::string("unexpected character '") + text_[pos_] + "'", pos_);
    return e;
  }

 private:
  void skip_space() {
    while (pos_ < text_.size() && std::isspace(static_cast<unsigned char>(text_[pos_]))) ++pos_;
  }
  bool accept(char c) {
    skip_space();
    if (pos_ < text_.size() && text_[pos_] == c) {
      ++pos_;
      return true;
    }
    return false;
  }

  Expression parse_sum() {
    Expression lhs = parse_product();
    for (;;) {
      if (accept('+')) {
        lhs = lhs + parse_product();
      } else if (accept('-')) {
        lhs = lhs - parse_product();
      } else {
        return lhs;
      }
    }
  }

  Expression parse_product() {
    Expression lhs = parse_unary();
    for (;;) {
      if (accept('*')) {
        lhs = lhs * parse_unary();
      } else if (accept('/')) {
        lhs = lhs / parse_unary();
      } else {
        return lhs;
      }
    }
  }

  Expression parse_unary() {
    if (accept('-')) return -parse_unary();
    if (accept('+')) return parse_unary();
    return parse_power();
  }

  // '^' is right-associative and binds tighter than unary minus; its exponent
  // may carry a sign (2^-x).
  Expression parse_power() {
    Expression base = parse_primary();
    if (accept('^')) return pow(base, parse_unary());
    return base;
  }

  Expression parse_primary() {
    skip_space();
    if (pos_ >= text_.size()) throw ParseError("unexpected end of input", pos_);
    const char c = text_[pos_];
    if (c == '(') {
      ++pos_;
      Expression inner = parse_sum();
      if (!accept(')')) throw ParseError("expected ')'", pos_);
      return inner;
    }
    if (std::isdigit(static_cast<unsigned char>(c)) || c == '.') return parse_number();
    if (std::isalpha(static_cast<unsigned char>(c)) || c == '_') return parse_identifier();
    throw ParseError(std::string("unexpected character '") + c + "'", pos_);
  }

  Expression parse_number() {
    const std::size_t start = pos_;
    while (pos_ < text_.size() && (std::isdigit(static_cast<unsigned char>(text_[pos_])) || text_[pos_] == '.')) ++pos_;
    if (pos_ < text_.size() && (text_[pos_] == 'e' || text_[pos_] == 'E')) {
      std::size_t look = pos_ + 1;
      if (look < text_.size() && (text_[look] == '+' || text_[look] == '-')) ++look;
      if (look < text_.size() && std::isdigit(static_cast<unsigned char>(text_[look]))) {
        pos_ = look;
        while (pos_ < text_.size() && std::isdigit(static_cast<unsigned char>(text_[pos_]))) ++pos_;
      }
    }
    double value = 0.0;
    const auto* first = text_.data() + start;
    const auto* last = text_.data() + pos_;
    auto [ptr, ec] = std::from_chars(first, last, value);
    if (ec != std::errc() || ptr != last) throw ParseError("malformed number", start);
    return Expression(value);
  }

  Expression parse_identifier() {
    const std::size_t start = pos_;
    while (pos_ < text_.size() &&
           (std::isalnum(static_cast<unsigned char>(text_[pos_])) || text_[pos_] == '_')) {
      ++pos_;
    }
    const std::string_view name = text_.substr(start, pos_ - start);
    if (name == "x") return Expression::x();
    if (name == "y") return Expression::y();
    if (name == "theta") return Expression::theta();
    if (name == "pi") return Expression(std::numbers::pi);
    if (name == "e") return Expression(std::numbers::e);
    static constexpr std::pair<std::string_view, Op> functions[] = {
        {"sin", Op::sin},   {"cos", Op::cos},   {"tan", Op::tan},   {"exp", Op::exp},
        {"log", Op::log},   {"sqrt", Op::sqrt}, {"tanh", Op::tanh}, {"abs", Op::abs},
    };
    for (const auto& [fname, op] : functions) {
      if (name == fname) {
        if (!accept('(')) throw ParseError("expected '(' after function name", pos_);
        Expression arg = parse_sum();
        if (!accept(')')) throw ParseError("expected ')'", pos_);
        return Expression::unary(op, arg);
      }
    }
    throw UnknownIdentifier(std::string(name), start);
  }

  std::string_view text_;
  std::size_t pos_ = 0;
};

}  // namespace expr

inline Expression Expression::parse(std::string_view text) { return expr::Parser(text).parse(); }

inline Expression parse_expression(std::string_view text) { return Expression::parse(text); }

inline Expression Expression::derivative(Var v) const { return expr::Differentiator(v)(node_); }

/// Flat instruction tape for an expression DAG. Structurally identical
/// subexpressions share one slot.
class CompiledExpression {
 public:
  CompiledExpression() = default;
  explicit CompiledExpression(const Expression& e) {
    std::unordered_map<const expr::Node*, int> by_pointer;
    std::unordered_map<Key, int, KeyHash> by_structure;
    root_ = emit(e.node(), by_pointer, by_structure);
  }

  std::size_t size() const { return code_.size(); }

  double operator()(double x, double y, double theta) const {
    thread_local std::vector<double> slots;
    if (slots.size() < code_.size()) slots.resize(code_.size());
    double* s = slots.data();
    for (std::size_t i = 0; i < code_.size(); ++i) {
      const Instr& in = code_[i];
      using expr::Op;
      switch (in.op) {
        case Op::constant: s[i] = in.value; break;
        case Op::variable: s[i] = in.a == 0 ? x : in.a == 1 ? y : theta; break;
        case Op::neg: s[i] = -s[in.a]; break;
        case Op::add: s[i] = s[in.a] + s[in.b]; break;
        case Op::sub: s[i] = s[in.a] - s[in.b]; break;
        case Op::mul: s[i] = s[in.a] * s[in.b]; break;
        case Op::div: s[i] = s[in.a] / s[in.b]; break;
        case Op::pow: {
          const double e = s[in.b];
          s[i] = e == 2.0 ? s[in.a] * s[in.a] : std::pow(s[in.a], e);
          break;
        }
        default: s[i] = expr::apply_unary(in.op, s[in.a]); break;
      }
    }
    return s[root_];
  }

 private:
  struct Instr {
    expr::Op op;
    int a = -1;
    int b = -1;
    double value = 0.0;
  };
  struct Key {
    expr::Op op;
    int a;
    int b;
    double value;
    bool operator==(const Key& o) const {
      return op == o.op && a == o.a && b == o.b && std::bit_cast<std::uint64_t>(value) == std::bit_cast<std::uint64_t>(o.value);
    }
  };
  struct KeyHash {
    std::size_t operator()(const Key& k) const {
      std::size_t h = std::hash<int>()(static_cast<int>(k.op));
      h = h * 1000003u ^ std::hash<int>()(k.a);
      h = h * 1000003u ^ std::hash<int>()(k.b);
      h = h * 1000003u ^ std::hash<std::uint64_t>()(std::bit_cast<std::uint64_t>(k.value));
      return h;
    }
  };

  int emit(const expr::NodePtr& n, std::unordered_map<const expr::Node*, int>& by_pointer,
           std::unordered_map<Key, int, KeyHash>& by_structure) {
    if (auto it = by_pointer.find(n.get()); it != by_pointer.end()) return it->second;
    Key key{n->op, -1, -1, 0.0};
    if (n->op == expr::Op::constant) {
      key.value = n->value;
    } else if (n->op == expr::Op::variable) {
      key.a = n->var;
    } else {
      key.a = emit(n->lhs, by_pointer, by_structure);
      if (n->rhs) key.b = emit(n->rhs, by_pointer, by_structure);
    }
    int slot;
    if (auto it = by_structure.find(key); it != by_structure.end()) {
      slot = it->second;
    } else {
      slot = static_cast<int>(code_.size());
      code_.push_back(Instr{key.op, key.a, key.b, key.value});
      by_structure.emplace(key, slot);
    }
    by_pointer.emplace(n.get(), slot);
    return slot;
  }

  std::vector<Instr> code_;
  int root_ = 0;
};

}  // namespace thermolab

#endif

#pragma once

// Small analytic-expression language used by configs: numbers, named
// variables, + - * / ^, parentheses and a fixed whitelist of functions.
// Expressions are immutable trees and can be differentiated symbolically.

#include <cctype>
#include <cmath>
#include <memory>
#include <numbers>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "schauder/core/errors.hpp"

namespace schauder {

class Expression {
 public:
  enum class Op { constant, variable, add, sub, mul, div, pow, neg, func };
  enum class Fn { sin, cos, exp, log, sqrt, abs, sign, sinh, cosh };

  Expression() : Expression(constant_node(0.0), {}) {}

  /// Parses `text` over the given variable names. Unknown identifiers and
  /// functions outside the whitelist are rejected.
  static Expression parse(std::string_view text, std::vector<std::string> variables) {
    Parser p{text, variables};
    auto node = p.parse_all();
    return Expression(std::move(node), std::move(variables));
  }

  static Expression constant(double v, std::vector<std::string> variables = {}) {
    return Expression(constant_node(v), std::move(variables));
  }

  double operator()(std::span<const double> args) const {
    if (args.size() < variables_.size())
      throw DomainError("expression expects " + std::to_string(variables_.size()) + " arguments");
    return eval(*root_, args);
  }
  double operator()(std::initializer_list<double> args) const {
    return (*this)(std::span<const double>(args.begin(), args.size()));
  }

  Expression derivative(std::string_view var) const {
    int idx = index_of(var);
    if (idx < 0) return Expression(constant_node(0.0), variables_);
    return Expression(diff(root_, idx), variables_);
  }

  bool depends_on(std::string_view var) const {
    int idx = index_of(var);
    return idx >= 0 && uses(*root_, idx);
  }

  bool is_constant() const { return root_->op == Op::constant; }
  const std::vector<std::string>& variables() const { return variables_; }
  std::string to_string() const { return print(*root_); }

 private:
  struct Node;
  using NodePtr = std::shared_ptr<const Node>;
  struct Node {
    Op op = Op::constant;
    double value = 0.0;
    int var = -1;
    Fn fn = Fn::sin;
    NodePtr a, b;
  };

  Expression(NodePtr root, std::vector<std::string> variables)
      : root_(std::move(root)), variables_(std::move(variables)) {}

  int index_of(std::string_view var) const {
    for (std::size_t i = 0; i < variables_.size(); ++i)
      if (variables_[i] == var) return static_cast<int>(i);
    return -1;
  }

  static NodePtr constant_node(double v) {
    auto n = std::make_shared<Node>();
    n->op = Op::constant;
    n->value = v;
    return n;
  }
  static NodePtr variable_node(int idx) {
    auto n = std::make_shared<Node>();
    n->op = Op::variable;
    n->var = idx;
    return n;
  }
  static bool is_const(const NodePtr& n, double v) { return n->op == Op::constant && n->value == v; }

  static NodePtr binary(Op op, NodePtr a, NodePtr b) {
    if (a->op == Op::constant && b->op == Op::constant) {
      Node tmp;
      tmp.op = op;
      tmp.a = a;
      tmp.b = b;
      return constant_node(eval(tmp, {}));
    }
    switch (op) {
      case Op::add:
        if (is_const(a, 0)) return b;
        if (is_const(b, 0)) return a;
        break;
      case Op::sub:
        if (is_const(b, 0)) return a;
        if (is_const(a, 0)) return unary_neg(b);
        break;
      case Op::mul:
        if (is_const(a, 0) || is_const(b, 0)) return constant_node(0.0);
        if (is_const(a, 1)) return b;
        if (is_const(b, 1)) return a;
        break;
      case Op::div:
        if (is_const(a, 0)) return constant_node(0.0);
        if (is_const(b, 1)) return a;
        break;
      case Op::pow:
        if (is_const(b, 0)) return constant_node(1.0);
        if (is_const(b, 1)) return a;
        break;
      default:
        break;
    }
    auto n = std::make_shared<Node>();
    n->op = op;
    n->a = std::move(a);
    n->b = std::move(b);
    return n;
  }
  static NodePtr unary_neg(NodePtr a) {
    if (a->op == Op::constant) return constant_node(-a->value);
    if (a->op == Op::neg) return a->a;
    auto n = std::make_shared<Node>();
    n->op = Op::neg;
    n->a = std::move(a);
    return n;
  }
  static NodePtr call(Fn fn, NodePtr a) {
    auto n = std::make_shared<Node>();
    n->op = Op::func;
    n->fn = fn;
    n->a = std::move(a);
    if (n->a->op == Op::constant) return constant_node(eval(*n, {}));
    return n;
  }

  static double apply(Fn fn, double x) {
    switch (fn) {
      case Fn::sin: return std::sin(x);
      case Fn::cos: return std::cos(x);
      case Fn::exp: return std::exp(x);
      case Fn::log: return std::log(x);
      case Fn::sqrt: return std::sqrt(x);
      case Fn::abs: return std::abs(x);
      case Fn::sign: return static_cast<double>((x > 0) - (x < 0));
      case Fn::sinh: return std::sinh(x);
      case Fn::cosh: return std::cosh(x);
    }
    return 0.0;
  }

  static double eval(const Node& n, std::span<const double> args) {
    switch (n.op) {
      case Op::constant: return n.value;
      case Op::variable: return args[static_cast<std::size_t>(n.var)];
      case Op::add: return eval(*n.a, args) + eval(*n.b, args);
      case Op::sub: return eval(*n.a, args) - eval(*n.b, args);
      case Op::mul: return eval(*n.a, args) * eval(*n.b, args);
      case Op::div: return eval(*n.a, args) / eval(*n.b, args);
      case Op::pow: {
        double base = eval(*n.a, args);
        if (n.b->op == Op::constant) {
          double e = n.b->value;
          if (e == 2.0) return base * base;
          if (e == std::floor(e) && std::abs(e) <= 16) return std::pow(base, static_cast<int>(e));
          return std::pow(base, e);
        }
        return std::pow(base, eval(*n.b, args));
      }
      case Op::neg: return -eval(*n.a, args);
      case Op::func: return apply(n.fn, eval(*n.a, args));
    }
    return 0.0;
  }

  static bool uses(const Node& n, int idx) {
    if (n.op == Op::variable) return n.var == idx;
    return (n.a && uses(*n.a, idx)) || (n.b && uses(*n.b, idx));
  }

  static NodePtr diff(const NodePtr& n, int idx) {
    switch (n->op) {
      case Op::constant: return constant_node(0.0);
      case Op::variable: return constant_node(n->var == idx ? 1.0 : 0.0);
      case Op::add: return binary(Op::add, diff(n->a, idx), diff(n->b, idx));
      case Op::sub: return binary(Op::sub, diff(n->a, idx), diff(n->b, idx));
      case Op::neg: return unary_neg(diff(n->a, idx));
      case Op::mul:
        return binary(Op::add, binary(Op::mul, diff(n->a, idx), n->b),
                      binary(Op::mul, n->a, diff(n->b, idx)));
      case Op::div:
        return binary(Op::div,
                      binary(Op::sub, binary(Op::mul, diff(n->a, idx), n->b),
                             binary(Op::mul, n->a, diff(n->b, idx))),
                      binary(Op::pow, n->b, constant_node(2.0)));
      case Op::pow: {
        if (!uses(*n->b, idx)) {
          // b * a^(b-1) * a'
          auto exponent = binary(Op::sub, n->b, constant_node(1.0));
          return binary(Op::mul, binary(Op::mul, n->b, binary(Op::pow, n->a, exponent)),
                        diff(n->a, idx));
        }
        // a^b * (b' log a + b a'/a)
        auto term = binary(Op::add, binary(Op::mul, diff(n->b, idx), call(Fn::log, n->a)),
                           binary(Op::div, binary(Op::mul, n->b, diff(n->a, idx)), n->a));
        return binary(Op::mul, n, term);
      }
      case Op::func: {
        auto da = diff(n->a, idx);
        NodePtr outer;
        switch (n->fn) {
          case Fn::sin: outer = call(Fn::cos, n->a); break;
          case Fn::cos: outer = unary_neg(call(Fn::sin, n->a)); break;
          case Fn::exp: outer = n; break;
          case Fn::log: outer = binary(Op::div, constant_node(1.0), n->a); break;
          case Fn::sqrt: outer = binary(Op::div, constant_node(0.5), n); break;
          case Fn::abs: outer = call(Fn::sign, n->a); break;
          case Fn::sign: outer = constant_node(0.0); break;
          case Fn::sinh: outer = call(Fn::cosh, n->a); break;
          case Fn::cosh: outer = call(Fn::sinh, n->a); break;
        }
        return binary(Op::mul, outer, da);
      }
    }
    return constant_node(0.0);
  }

  std::string print(const Node& n) const {
    switch (n.op) {
      case Op::constant: {
        std::string s = std::to_string(n.value);
        return n.value < 0 ? "(" + s + ")" : s;
      }
      case Op::variable: return variables_[static_cast<std::size_t>(n.var)];
      case Op::add: return "(" + print(*n.a) + " + " + print(*n.b) + ")";
      case Op::sub: return "(" + print(*n.a) + " - " + print(*n.b) + ")";
      case Op::mul: return "(" + print(*n.a) + " * " + print(*n.b) + ")";
      case Op::div: return "(" + print(*n.a) + " / " + print(*n.b) + ")";
      case Op::pow: return "(" + print(*n.a) + " ^ " + print(*n.b) + ")";
      case Op::neg: return "(-" + print(*n.a) + ")";
      case Op::func: {
        static constexpr const char* names[] = {"sin", "cos", "exp", "log", "sqrt",
                                                "abs", "sign", "sinh", "cosh"};
        return std::string(names[static_cast<int>(n.fn)]) + "(" + print(*n.a) + ")";
      }
    }
    return "?";
  }

  // Recursive-descent parser:
  //   expr  := term (('+'|'-') term)*
  //   term  := unary (('*'|'/') unary)*
  //   unary := ('-'|'+') unary | power
  //   power := primary ('^' unary)?
  struct Parser {
    std::string_view text;
    const std::vector<std::string>& vars;
    std::size_t pos = 0;

    [[noreturn]] void fail(const std::string& what) const {
      throw ConfigError(0, "", "expression '" + std::string(text) + "': " + what + " at offset " +
                                   std::to_string(pos));
    }
    void skip() {
      while (pos < text.size() && std::isspace(static_cast<unsigned char>(text[pos]))) ++pos;
    }
    bool accept(char c) {
      skip();
      if (pos < text.size() && text[pos] == c) {
        ++pos;
        return true;
      }
      return false;
    }
    NodePtr parse_all() {
      auto n = expr();
      skip();
      if (pos != text.size()) fail("unexpected trailing input");
      return n;
    }
    NodePtr expr() {
      auto lhs = term();
      for (;;) {
        if (accept('+')) lhs = binary(Op::add, lhs, term());
        else if (accept('-')) lhs = binary(Op::sub, lhs, term());
        else return lhs;
      }
    }
    NodePtr term() {
      auto lhs = unary();
      for (;;) {
        if (accept('*')) lhs = binary(Op::mul, lhs, unary());
        else if (accept('/')) lhs = binary(Op::div, lhs, unary());
        else return lhs;
      }
    }
    NodePtr unary() {
      if (accept('-')) return unary_neg(unary());
      if (accept('+')) return unary();
      return power();
    }
    NodePtr power() {
      auto base = primary();
      if (accept('^')) return binary(Op::pow, base, unary());
      return base;
    }
    NodePtr primary() {
      skip();
      if (pos >= text.size()) fail("unexpected end of input");
      char c = text[pos];
      if (accept('(')) {
        auto n = expr();
        if (!accept(')')) fail("expected ')'");
        return n;
      }
      if (std::isdigit(static_cast<unsigned char>(c)) || c == '.') {
        std::size_t start = pos;
        while (pos < text.size() &&
               (std::isdigit(static_cast<unsigned char>(text[pos])) || text[pos] == '.'))
          ++pos;
        if (pos < text.size() && (text[pos] == 'e' || text[pos] == 'E')) {
          std::size_t save = pos++;
          if (pos < text.size() && (text[pos] == '+' || text[pos] == '-')) ++pos;
          if (pos < text.size() && std::isdigit(static_cast<unsigned char>(text[pos]))) {
            while (pos < text.size() && std::isdigit(static_cast<unsigned char>(text[pos]))) ++pos;
          } else {
            pos = save;
          }
        }
        try {
          return constant_node(std::stod(std::string(text.substr(start, pos - start))));
        } catch (const std::exception&) {
          fail("bad number");
        }
      }
      if (std::isalpha(static_cast<unsigned char>(c)) || c == '_') {
        std::size_t start = pos;
        while (pos < text.size() &&
               (std::isalnum(static_cast<unsigned char>(text[pos])) || text[pos] == '_'))
          ++pos;
        std::string name(text.substr(start, pos - start));
        skip();
        if (pos < text.size() && text[pos] == '(') {
          static const std::pair<const char*, Fn> table[] = {
              {"sin", Fn::sin},   {"cos", Fn::cos},   {"exp", Fn::exp},
              {"log", Fn::log},   {"sqrt", Fn::sqrt}, {"abs", Fn::abs},
              {"sign", Fn::sign}, {"sinh", Fn::sinh}, {"cosh", Fn::cosh}};
          for (const auto& [fname, fn] : table) {
            if (name == fname) {
              ++pos;
              auto arg = expr();
              if (!accept(')')) fail("expected ')' after function argument");
              return call(fn, arg);
            }
          }
          fail("function '" + name + "' is not in the whitelist");
        }
        if (name == "pi") return constant_node(std::numbers::pi);
        for (std::size_t i = 0; i < vars.size(); ++i)
          if (vars[i] == name) return variable_node(static_cast<int>(i));
        fail("unknown variable '" + name + "'");
      }
      fail(std::string("unexpected character '") + c + "'");
    }
  };

  NodePtr root_;
  std::vector<std::string> variables_;
};

}  // namespace schauder

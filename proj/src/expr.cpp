#include "hysmc/expr.hpp"

#include <charconv>
#include <cmath>

#include <fmt/format.h>

namespace hysmc {

namespace {

template <class... Ts>
struct overloaded : Ts... {
  using Ts::operator()...;
};
template <class... Ts>
overloaded(Ts...) -> overloaded<Ts...>;

bool is_comparison(BinaryOp op) {
  return op == BinaryOp::Lt || op == BinaryOp::Le || op == BinaryOp::Gt ||
         op == BinaryOp::Ge || op == BinaryOp::Eq;
}

bool is_logical(BinaryOp op) { return op == BinaryOp::And || op == BinaryOp::Or; }

}  // namespace

const char* to_string(BinaryOp op) {
  switch (op) {
    case BinaryOp::Add: return "+";
    case BinaryOp::Sub: return "-";
    case BinaryOp::Mul: return "*";
    case BinaryOp::Div: return "/";
    case BinaryOp::Lt: return "<";
    case BinaryOp::Le: return "<=";
    case BinaryOp::Gt: return ">";
    case BinaryOp::Ge: return ">=";
    case BinaryOp::Eq: return "==";
    case BinaryOp::And: return "&&";
    case BinaryOp::Or: return "||";
  }
  return "?";
}

Expr::Expr() : Expr(constant(0.0)) {}

Expr Expr::constant(double value, SourcePos pos) {
  if (!std::isfinite(value)) throw EvalError("non-finite constant in expression");
  if (value == 0.0) value = 0.0;  // drop the sign of -0
  if (value < 0) return unary(UnaryOp::Negate, constant(-value, pos), pos);
  return Expr(std::make_shared<const ExprNode>(ExprNode{node::Constant{value}, pos}));
}

Expr Expr::boolean(bool value, SourcePos pos) {
  return Expr(std::make_shared<const ExprNode>(ExprNode{node::Boolean{value}, pos}));
}

Expr Expr::variable(std::string name, SourcePos pos) {
  return Expr(std::make_shared<const ExprNode>(
      ExprNode{node::Variable{std::move(name)}, pos}));
}

Expr Expr::clock(std::string name, SourcePos pos) {
  return Expr(std::make_shared<const ExprNode>(
      ExprNode{node::LocalClock{std::move(name)}, pos}));
}

Expr Expr::location(std::string automaton, std::string location, SourcePos pos) {
  return Expr(std::make_shared<const ExprNode>(
      ExprNode{node::LocationAtom{std::move(automaton), std::move(location)}, pos}));
}

Expr Expr::unary(UnaryOp op, Expr operand, SourcePos pos) {
  return Expr(std::make_shared<const ExprNode>(
      ExprNode{node::Unary{op, std::move(operand)}, pos}));
}

Expr Expr::binary(BinaryOp op, Expr lhs, Expr rhs, SourcePos pos) {
  return Expr(std::make_shared<const ExprNode>(
      ExprNode{node::Binary{op, std::move(lhs), std::move(rhs)}, pos}));
}

SourcePos Expr::pos() const { return node_->pos; }

bool operator==(const Expr& a, const Expr& b) {
  if (a.node_ == b.node_) return true;
  const auto& x = a.node_->value;
  const auto& y = b.node_->value;
  if (x.index() != y.index()) return false;
  return std::visit(
      overloaded{
          [&](const node::Constant& c) {
            return c.value == std::get<node::Constant>(y).value;
          },
          [&](const node::Boolean& c) {
            return c.value == std::get<node::Boolean>(y).value;
          },
          [&](const node::Variable& v) {
            return v.name == std::get<node::Variable>(y).name;
          },
          [&](const node::LocalClock& v) {
            return v.name == std::get<node::LocalClock>(y).name;
          },
          [&](const node::LocationAtom& v) {
            const auto& w = std::get<node::LocationAtom>(y);
            return v.automaton == w.automaton && v.location == w.location;
          },
          [&](const node::Unary& u) {
            const auto& w = std::get<node::Unary>(y);
            return u.op == w.op && u.operand == w.operand;
          },
          [&](const node::Binary& u) {
            const auto& w = std::get<node::Binary>(y);
            return u.op == w.op && u.lhs == w.lhs && u.rhs == w.rhs;
          },
      },
      x);
}

Expr operator+(Expr a, Expr b) { return Expr::binary(BinaryOp::Add, std::move(a), std::move(b)); }
Expr operator-(Expr a, Expr b) { return Expr::binary(BinaryOp::Sub, std::move(a), std::move(b)); }
Expr operator*(Expr a, Expr b) { return Expr::binary(BinaryOp::Mul, std::move(a), std::move(b)); }
Expr operator/(Expr a, Expr b) { return Expr::binary(BinaryOp::Div, std::move(a), std::move(b)); }
Expr operator-(Expr a) { return Expr::unary(UnaryOp::Negate, std::move(a)); }
Expr exp(Expr a) { return Expr::unary(UnaryOp::Exp, std::move(a)); }
Expr operator<=(Expr a, Expr b) { return Expr::binary(BinaryOp::Le, std::move(a), std::move(b)); }
Expr operator>=(Expr a, Expr b) { return Expr::binary(BinaryOp::Ge, std::move(a), std::move(b)); }
Expr operator<(Expr a, Expr b) { return Expr::binary(BinaryOp::Lt, std::move(a), std::move(b)); }
Expr operator>(Expr a, Expr b) { return Expr::binary(BinaryOp::Gt, std::move(a), std::move(b)); }
Expr operator&&(Expr a, Expr b) { return Expr::binary(BinaryOp::And, std::move(a), std::move(b)); }
Expr operator||(Expr a, Expr b) { return Expr::binary(BinaryOp::Or, std::move(a), std::move(b)); }

// ---------------------------------------------------------------------------

Environment& Environment::bind(const std::string& name, double value) {
  values_[name] = value;
  return *this;
}

Environment& Environment::set_local_clock(double value) {
  clock_ = value;
  return *this;
}

Environment& Environment::set_location(const std::string& automaton,
                                       const std::string& location) {
  locations_[automaton] = location;
  return *this;
}

std::optional<double> Environment::lookup(const std::string& name) const {
  auto it = values_.find(name);
  if (it == values_.end()) return std::nullopt;
  return it->second;
}

std::optional<std::string> Environment::location_of(const std::string& automaton) const {
  auto it = locations_.find(automaton);
  if (it == locations_.end()) return std::nullopt;
  return it->second;
}

// ---------------------------------------------------------------------------

ExprType check_type(const Expr& expr) {
  const auto& n = expr.node();
  auto fail = [&](const std::string& what) -> ExprType {
    throw EvalError(fmt::format("{}: type error: {}", to_string(n.pos), what));
  };
  return std::visit(
      overloaded{
          [](const node::Constant&) { return ExprType::Number; },
          [](const node::Boolean&) { return ExprType::Boolean; },
          [](const node::Variable&) { return ExprType::Number; },
          [](const node::LocalClock&) { return ExprType::Number; },
          [](const node::LocationAtom&) { return ExprType::Boolean; },
          [&](const node::Unary& u) {
            if (check_type(u.operand) != ExprType::Number) {
              return fail(u.op == UnaryOp::Exp ? "exp of a boolean" : "negation of a boolean");
            }
            return ExprType::Number;
          },
          [&](const node::Binary& b) {
            ExprType l = check_type(b.lhs);
            ExprType r = check_type(b.rhs);
            if (is_logical(b.op)) {
              if (l != ExprType::Boolean || r != ExprType::Boolean) {
                return fail(fmt::format("'{}' needs boolean operands", to_string(b.op)));
              }
              return ExprType::Boolean;
            }
            if (l != ExprType::Number || r != ExprType::Number) {
              return fail(fmt::format("'{}' needs numeric operands", to_string(b.op)));
            }
            return is_comparison(b.op) ? ExprType::Boolean : ExprType::Number;
          },
      },
      n.value);
}

Value evaluate(const Expr& expr, const Environment& env) {
  const auto& n = expr.node();
  auto num = [&](const Expr& e) {
    Value v = evaluate(e, env);
    if (!std::holds_alternative<double>(v)) {
      throw EvalError(fmt::format("{}: expected a number, got a boolean", to_string(e.pos())));
    }
    return std::get<double>(v);
  };
  auto boolean = [&](const Expr& e) {
    Value v = evaluate(e, env);
    if (!std::holds_alternative<bool>(v)) {
      throw EvalError(fmt::format("{}: expected a boolean, got a number", to_string(e.pos())));
    }
    return std::get<bool>(v);
  };
  return std::visit(
      overloaded{
          [](const node::Constant& c) -> Value { return c.value; },
          [](const node::Boolean& c) -> Value { return c.value; },
          [&](const node::Variable& v) -> Value {
            auto value = env.lookup(v.name);
            if (!value) {
              throw EvalError(fmt::format("{}: unbound identifier '{}'", to_string(n.pos), v.name));
            }
            return *value;
          },
          [&](const node::LocalClock& c) -> Value {
            auto value = env.local_clock();
            if (!value) {
              throw EvalError(fmt::format("{}: local clock '{}' is unbound", to_string(n.pos), c.name));
            }
            return *value;
          },
          [&](const node::LocationAtom& a) -> Value {
            auto loc = env.location_of(a.automaton);
            if (!loc) {
              throw EvalError(fmt::format("{}: no location bound for automaton '{}'",
                                          to_string(n.pos), a.automaton));
            }
            return *loc == a.location;
          },
          [&](const node::Unary& u) -> Value {
            double x = num(u.operand);
            return u.op == UnaryOp::Negate ? -x : std::exp(x);
          },
          [&](const node::Binary& b) -> Value {
            if (is_logical(b.op)) {
              bool l = boolean(b.lhs);
              bool r = boolean(b.rhs);
              return b.op == BinaryOp::And ? (l && r) : (l || r);
            }
            double l = num(b.lhs);
            double r = num(b.rhs);
            switch (b.op) {
              case BinaryOp::Add: return l + r;
              case BinaryOp::Sub: return l - r;
              case BinaryOp::Mul: return l * r;
              case BinaryOp::Div:
                if (r == 0.0) throw EvalError(fmt::format("{}: division by zero", to_string(n.pos)));
                return l / r;
              case BinaryOp::Lt: return l < r;
              case BinaryOp::Le: return l <= r;
              case BinaryOp::Gt: return l > r;
              case BinaryOp::Ge: return l >= r;
              case BinaryOp::Eq: return l == r;
              default: break;
            }
            throw EvalError("unreachable operator");
          },
      },
      n.value);
}

double evaluate_number(const Expr& expr, const Environment& env) {
  Value v = evaluate(expr, env);
  if (!std::holds_alternative<double>(v)) throw EvalError("expression is boolean, expected number");
  return std::get<double>(v);
}

bool evaluate_bool(const Expr& expr, const Environment& env) {
  Value v = evaluate(expr, env);
  if (!std::holds_alternative<bool>(v)) throw EvalError("expression is numeric, expected boolean");
  return std::get<bool>(v);
}

namespace {

template <class F>
void walk(const Expr& expr, F&& visit) {
  visit(expr);
  const auto& v = expr.node().value;
  if (const auto* u = std::get_if<node::Unary>(&v)) {
    walk(u->operand, visit);
  } else if (const auto* b = std::get_if<node::Binary>(&v)) {
    walk(b->lhs, visit);
    walk(b->rhs, visit);
  }
}

}  // namespace

void collect_variables(const Expr& expr, std::set<std::string>& out) {
  walk(expr, [&](const Expr& e) {
    if (const auto* v = std::get_if<node::Variable>(&e.node().value)) out.insert(v->name);
  });
}

bool references_clock(const Expr& expr) {
  bool found = false;
  walk(expr, [&](const Expr& e) {
    found = found || std::holds_alternative<node::LocalClock>(e.node().value);
  });
  return found;
}

bool contains_strict_comparison(const Expr& expr) {
  bool found = false;
  walk(expr, [&](const Expr& e) {
    if (const auto* b = std::get_if<node::Binary>(&e.node().value)) {
      found = found || b->op == BinaryOp::Lt || b->op == BinaryOp::Gt;
    }
  });
  return found;
}

bool contains_location_atom(const Expr& expr) {
  bool found = false;
  walk(expr, [&](const Expr& e) {
    found = found || std::holds_alternative<node::LocationAtom>(e.node().value);
  });
  return found;
}

// ---------------------------------------------------------------------------
// Printing. Precedence levels mirror the parser:
//   or < and < comparison < additive < term ('-' term) < product < factor ('-' factor) < atom
// A string that begins with '-' is re-read by the term rule when it starts a
// product, so such strings are parenthesised on the left of '*' and '/'.

namespace {

enum Level { kOr = 1, kAnd, kCmp, kAdd, kTerm, kMul, kFactor, kAtom };

struct Printed {
  std::string text;
  int level;
  bool leading_minus;
};

std::string format_number(double value) {
  char buf[64];
  auto [end, ec] = std::to_chars(buf, buf + sizeof buf, value);
  std::string s(buf, end);
  return s;
}

Printed print(const Expr& expr);

std::string at_least(const Printed& p, int level) {
  if (p.level >= level) return p.text;
  return "(" + p.text + ")";
}

Printed print(const Expr& expr) {
  return std::visit(
      overloaded{
          [](const node::Constant& c) { return Printed{format_number(c.value), kAtom, false}; },
          [](const node::Boolean& c) {
            return Printed{c.value ? "true" : "false", kAtom, false};
          },
          [](const node::Variable& v) { return Printed{v.name, kAtom, false}; },
          [](const node::LocalClock& v) { return Printed{v.name, kAtom, false}; },
          [](const node::LocationAtom& a) {
            return Printed{a.automaton + "." + a.location, kAtom, false};
          },
          [](const node::Unary& u) {
            Printed o = print(u.operand);
            if (u.op == UnaryOp::Exp) return Printed{"exp(" + o.text + ")", kAtom, false};
            if (o.level >= kFactor) return Printed{"-" + o.text, kFactor, true};
            if (o.level >= kTerm) return Printed{"-" + o.text, kTerm, true};
            return Printed{"-(" + o.text + ")", kFactor, true};
          },
          [](const node::Binary& b) {
            Printed l = print(b.lhs);
            Printed r = print(b.rhs);
            std::string op = to_string(b.op);
            switch (b.op) {
              case BinaryOp::Or:
                return Printed{at_least(l, kOr) + " || " + at_least(r, kAnd), kOr, l.leading_minus && l.level >= kOr};
              case BinaryOp::And:
                return Printed{at_least(l, kAnd) + " && " + at_least(r, kCmp), kAnd, l.leading_minus && l.level >= kAnd};
              case BinaryOp::Add:
              case BinaryOp::Sub:
                return Printed{at_least(l, kAdd) + " " + op + " " + at_least(r, kTerm), kAdd,
                               l.leading_minus && l.level >= kAdd};
              case BinaryOp::Mul:
              case BinaryOp::Div: {
                std::string lhs = (l.level >= kMul && !l.leading_minus) ? l.text : "(" + l.text + ")";
                return Printed{lhs + op + at_least(r, kFactor), kMul, false};
              }
              default:
                return Printed{at_least(l, kAdd) + " " + op + " " + at_least(r, kAdd), kCmp,
                               l.leading_minus && l.level >= kAdd};
            }
          },
      },
      expr.node().value);
}

}  // namespace

std::string to_string(const Expr& expr) { return print(expr).text; }

}  // namespace hysmc

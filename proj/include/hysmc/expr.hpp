#pragma once

#include <map>
#include <memory>
#include <optional>
#include <set>
#include <string>
#include <variant>

#include "hysmc/error.hpp"

namespace hysmc {

enum class UnaryOp { Negate, Exp };

enum class BinaryOp { Add, Sub, Mul, Div, Lt, Le, Gt, Ge, Eq, And, Or };

enum class ExprType { Number, Boolean };

const char* to_string(BinaryOp op);

struct ExprNode;

/// Immutable expression tree. Copies share structure; equality is structural
/// and ignores source positions.
class Expr {
 public:
  /// The constant 0.
  Expr();

  static Expr constant(double value, SourcePos pos = {});
  static Expr boolean(bool value, SourcePos pos = {});
  static Expr variable(std::string name, SourcePos pos = {});
  /// Reference to the owning automaton's local clock, printed as `name`.
  static Expr clock(std::string name, SourcePos pos = {});
  /// `Automaton.location` atom; only meaningful in properties.
  static Expr location(std::string automaton, std::string location,
                       SourcePos pos = {});
  static Expr unary(UnaryOp op, Expr operand, SourcePos pos = {});
  static Expr binary(BinaryOp op, Expr lhs, Expr rhs, SourcePos pos = {});

  const ExprNode& node() const { return *node_; }
  SourcePos pos() const;

  friend bool operator==(const Expr& a, const Expr& b);
  friend bool operator!=(const Expr& a, const Expr& b) { return !(a == b); }

 private:
  explicit Expr(std::shared_ptr<const ExprNode> node) : node_(std::move(node)) {}

  std::shared_ptr<const ExprNode> node_;
};

namespace node {
struct Constant {
  double value;
};
struct Boolean {
  bool value;
};
struct Variable {
  std::string name;
};
struct LocalClock {
  std::string name;
};
struct LocationAtom {
  std::string automaton;
  std::string location;
};
struct Unary {
  UnaryOp op;
  Expr operand;
};
struct Binary {
  BinaryOp op;
  Expr lhs;
  Expr rhs;
};
}  // namespace node

struct ExprNode {
  std::variant<node::Constant, node::Boolean, node::Variable, node::LocalClock,
               node::LocationAtom, node::Unary, node::Binary>
      value;
  SourcePos pos;
};

// Convenience builders used by the case-study code and tests.
Expr operator+(Expr a, Expr b);
Expr operator-(Expr a, Expr b);
Expr operator*(Expr a, Expr b);
Expr operator/(Expr a, Expr b);
Expr operator-(Expr a);
Expr exp(Expr a);
Expr operator<=(Expr a, Expr b);
Expr operator>=(Expr a, Expr b);
Expr operator<(Expr a, Expr b);
Expr operator>(Expr a, Expr b);
Expr operator&&(Expr a, Expr b);
Expr operator||(Expr a, Expr b);

/// Bindings for the tree evaluator. Unbound lookups are errors.
class Environment {
 public:
  Environment& bind(const std::string& name, double value);
  Environment& set_local_clock(double value);
  Environment& set_location(const std::string& automaton, const std::string& location);

  std::optional<double> lookup(const std::string& name) const;
  std::optional<double> local_clock() const { return clock_; }
  std::optional<std::string> location_of(const std::string& automaton) const;

 private:
  std::map<std::string, double> values_;
  std::map<std::string, std::string> locations_;
  std::optional<double> clock_;
};

using Value = std::variant<double, bool>;

/// Throws EvalError on type mismatch; returns the type of a well-typed tree.
ExprType check_type(const Expr& expr);

/// Reference evaluator. Throws EvalError on unbound identifiers, division by
/// zero and boolean/numeric mismatch. Both operands of && and || are evaluated.
Value evaluate(const Expr& expr, const Environment& env);
double evaluate_number(const Expr& expr, const Environment& env);
bool evaluate_bool(const Expr& expr, const Environment& env);

void collect_variables(const Expr& expr, std::set<std::string>& out);
bool references_clock(const Expr& expr);
bool contains_strict_comparison(const Expr& expr);
bool contains_location_atom(const Expr& expr);

/// Canonical text, re-parseable to a structurally equal tree.
std::string to_string(const Expr& expr);

}  // namespace hysmc

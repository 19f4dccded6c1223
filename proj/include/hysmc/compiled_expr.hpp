#pragma once

#include <memory>
#include <span>
#include <string>
#include <vector>

#include "hysmc/expr.hpp"
#include "hysmc/model.hpp"

namespace hysmc {

/// Flat slot numbering of a network: declared variables (constants included)
/// in declaration order, then one local-clock slot per automaton.
struct SlotLayout {
  std::vector<std::string> variables;
  std::vector<bool> constant;
  std::vector<std::string> automata;
  std::vector<std::vector<std::string>> locations;

  static SlotLayout of(const NetworkModel& model);

  size_t variable_count() const { return variables.size(); }
  size_t slot_count() const { return variables.size() + automata.size(); }
  int clock_slot(int automaton) const { return static_cast<int>(variables.size()) + automaton; }
  int variable_slot(const std::string& name) const;
  int automaton_index(const std::string& name) const;
  int location_index(int automaton, const std::string& location) const;
};

/// Postfix program over a slot vector; booleans are 0.0/1.0.
class CompiledExpr {
 public:
  CompiledExpr() = default;

  /// Throws EvalError on division by zero.
  double eval(std::span<const double> values, std::span<const int> locations) const;
  bool test(std::span<const double> values, std::span<const int> locations) const {
    return eval(values, locations) != 0.0;
  }
  bool uses_clock() const { return uses_clock_; }
  bool empty() const { return code_.empty(); }

 private:
  friend CompiledExpr compile(const Expr&, const SlotLayout&, int);

  enum class Op : unsigned char {
    Const, Slot, LocEq, Neg, Exp, Add, Sub, Mul, Div, Lt, Le, Gt, Ge, Eq, And, Or
  };
  struct Instr {
    Op op;
    int a = 0;
    int b = 0;
    double k = 0.0;
  };

  std::vector<Instr> code_;
  int max_stack_ = 0;
  bool uses_clock_ = false;
};

/// Resolves identifiers against `layout`. Local-clock references resolve to
/// `owner`'s clock slot; throws EvalError when something cannot be resolved.
CompiledExpr compile(const Expr& expr, const SlotLayout& layout, int owner = -1);

}  // namespace hysmc

#include "hysmc/compiled_expr.hpp"

#include <algorithm>
#include <array>
#include <cmath>

#include <fmt/format.h>

namespace hysmc {

SlotLayout SlotLayout::of(const NetworkModel& model) {
  SlotLayout layout;
  for (const auto& v : model.variables) {
    layout.variables.push_back(v.name);
    layout.constant.push_back(v.is_constant());
  }
  for (const auto& a : model.automata) {
    layout.automata.push_back(a.name);
    std::vector<std::string> names;
    for (const auto& l : a.locations) names.push_back(l.name);
    layout.locations.push_back(std::move(names));
  }
  return layout;
}

namespace {

int index_of(const std::vector<std::string>& names, const std::string& name) {
  auto it = std::find(names.begin(), names.end(), name);
  return it == names.end() ? -1 : static_cast<int>(it - names.begin());
}

}  // namespace

int SlotLayout::variable_slot(const std::string& name) const { return index_of(variables, name); }

int SlotLayout::automaton_index(const std::string& name) const {
  return index_of(automata, name);
}

int SlotLayout::location_index(int automaton, const std::string& location) const {
  if (automaton < 0 || automaton >= static_cast<int>(locations.size())) return -1;
  return index_of(locations[automaton], location);
}

double CompiledExpr::eval(std::span<const double> values, std::span<const int> locations) const {
  if (code_.empty()) return 0.0;
  constexpr int kInline = 32;
  std::array<double, kInline> inline_stack;
  std::vector<double> heap_stack;
  double* st = inline_stack.data();
  if (max_stack_ > kInline) {
    heap_stack.resize(max_stack_);
    st = heap_stack.data();
  }
  int sp = 0;
  for (const Instr& in : code_) {
    switch (in.op) {
      case Op::Const: st[sp++] = in.k; break;
      case Op::Slot: st[sp++] = values[in.a]; break;
      case Op::LocEq: st[sp++] = locations[in.a] == in.b ? 1.0 : 0.0; break;
      case Op::Neg: st[sp - 1] = -st[sp - 1]; break;
      case Op::Exp: st[sp - 1] = std::exp(st[sp - 1]); break;
      default: {
        double r = st[--sp];
        double& l = st[sp - 1];
        switch (in.op) {
          case Op::Add: l = l + r; break;
          case Op::Sub: l = l - r; break;
          case Op::Mul: l = l * r; break;
          case Op::Div:
            if (r == 0.0) throw EvalError("division by zero");
            l = l / r;
            break;
          case Op::Lt: l = l < r; break;
          case Op::Le: l = l <= r; break;
          case Op::Gt: l = l > r; break;
          case Op::Ge: l = l >= r; break;
          case Op::Eq: l = l == r; break;
          case Op::And: l = (l != 0.0 && r != 0.0); break;
          case Op::Or: l = (l != 0.0 || r != 0.0); break;
          default: break;
        }
      }
    }
  }
  return st[0];
}

CompiledExpr compile(const Expr& expr, const SlotLayout& layout, int owner) {
  CompiledExpr out;
  using Op = CompiledExpr::Op;
  int depth = 0;
  auto push = [&](CompiledExpr::Instr in, int delta) {
    out.code_.push_back(in);
    depth += delta;
    out.max_stack_ = std::max(out.max_stack_, depth);
  };
  auto rec = [&](auto&& self, const Expr& e) -> void {
    const auto& v = e.node().value;
    if (const auto* c = std::get_if<node::Constant>(&v)) {
      push({Op::Const, 0, 0, c->value}, 1);
    } else if (const auto* b = std::get_if<node::Boolean>(&v)) {
      push({Op::Const, 0, 0, b->value ? 1.0 : 0.0}, 1);
    } else if (const auto* var = std::get_if<node::Variable>(&v)) {
      int slot = layout.variable_slot(var->name);
      if (slot < 0) throw EvalError(fmt::format("unbound identifier '{}'", var->name));
      push({Op::Slot, slot}, 1);
    } else if (std::holds_alternative<node::LocalClock>(v)) {
      if (owner < 0) throw EvalError("local clock referenced outside an automaton");
      out.uses_clock_ = true;
      push({Op::Slot, layout.clock_slot(owner)}, 1);
    } else if (const auto* at = std::get_if<node::LocationAtom>(&v)) {
      int a = layout.automaton_index(at->automaton);
      if (a < 0) throw EvalError(fmt::format("unknown automaton '{}'", at->automaton));
      int l = layout.location_index(a, at->location);
      if (l < 0) {
        throw EvalError(fmt::format("unknown location '{}.{}'", at->automaton, at->location));
      }
      push({Op::LocEq, a, l}, 1);
    } else if (const auto* u = std::get_if<node::Unary>(&v)) {
      self(self, u->operand);
      push({u->op == UnaryOp::Negate ? Op::Neg : Op::Exp}, 0);
    } else if (const auto* bin = std::get_if<node::Binary>(&v)) {
      self(self, bin->lhs);
      self(self, bin->rhs);
      static constexpr Op kMap[] = {Op::Add, Op::Sub, Op::Mul, Op::Div, Op::Lt, Op::Le,
                                    Op::Gt,  Op::Ge,  Op::Eq,  Op::And, Op::Or};
      push({kMap[static_cast<int>(bin->op)]}, -1);
    }
  };
  rec(rec, expr);
  return out;
}

}  // namespace hysmc

#include "hysmc/validate.hpp"

#include <algorithm>
#include <cctype>
#include <cmath>
#include <numeric>
#include <set>

#include <fmt/format.h>

namespace hysmc {

std::vector<Issue> ValidationReport::errors() const {
  std::vector<Issue> out;
  for (const auto& i : issues) {
    if (i.severity == Severity::Error) out.push_back(i);
  }
  return out;
}

std::vector<Issue> ValidationReport::warnings() const {
  std::vector<Issue> out;
  for (const auto& i : issues) {
    if (i.severity == Severity::Warning) out.push_back(i);
  }
  return out;
}

bool ValidationReport::ok() const {
  return std::none_of(issues.begin(), issues.end(),
                      [](const Issue& i) { return i.severity == Severity::Error; });
}

bool ValidationReport::has(const std::string& code) const {
  return std::any_of(issues.begin(), issues.end(),
                     [&](const Issue& i) { return i.code == code; });
}

std::string ValidationReport::to_string() const {
  std::string out;
  for (const auto& i : issues) {
    out += fmt::format("{} {} {}: {}", i.severity == Severity::Error ? "error" : "warning",
                       i.code, i.element, i.message);
    if (i.pos.known()) out += fmt::format(" [at {}", hysmc::to_string(i.pos));
    if (i.other_pos.known()) out += fmt::format(", first at {}", hysmc::to_string(i.other_pos));
    if (i.pos.known()) out += "]";
    out += "\n";
  }
  return out;
}

ModelError::ModelError(ValidationReport report)
    : Error("invalid model:\n" + report.to_string()), report_(std::move(report)) {}

void require_valid(const NetworkModel& model) {
  auto report = validate_network(model);
  if (!report.ok()) throw ModelError(std::move(report));
}

namespace {

bool is_identifier(const std::string& name) {
  if (name.empty()) return false;
  bool has_non_digit = false;
  for (char c : name) {
    if (!(std::isalnum(static_cast<unsigned char>(c)) || c == '_')) return false;
    has_non_digit = has_non_digit || !(c >= '0' && c <= '9');
  }
  if (!has_non_digit) return false;
  static const std::set<std::string> kReserved = {
      "true",     "false", "exp",       "network", "const",     "var",   "init",
      "channel",  "urgent", "automaton", "clock",   "location",  "invariant",
      "dwell",    "eager", "exponential", "edge",  "guard",     "emit",  "receive",
      "reset",    "weight", "while"};
  if (kReserved.count(name)) return false;
  // A leading digit is only an identifier if the lexer cannot read a number first.
  if (name[0] >= '0' && name[0] <= '9') {
    size_t j = 0;
    while (j < name.size() && name[j] >= '0' && name[j] <= '9') ++j;
    char next = name[j];
    if (next == '.' || next == 'e' || next == 'E') return false;
  }
  return true;
}

class Validator {
 public:
  explicit Validator(const NetworkModel& model) : model_(model) {}

  ValidationReport run() {
    check_unique_names();
    for (const auto& v : model_.variables) {
      if (!std::isfinite(v.initial)) {
        error("BAD_VALUE", v.name, "initial value is not finite", v.pos);
      }
    }
    for (const auto& a : model_.automata) check_automaton(a);
    check_flow_ownership();
    check_emitters();
    return std::move(report_);
  }

 private:
  void error(std::string code, std::string element, std::string message, SourcePos pos = {},
             SourcePos other = {}) {
    report_.issues.push_back(
        {Severity::Error, std::move(code), std::move(element), std::move(message), pos, other});
  }

  void warning(std::string code, std::string element, std::string message, SourcePos pos = {}) {
    report_.issues.push_back(
        {Severity::Warning, std::move(code), std::move(element), std::move(message), pos, {}});
  }

  template <class Range, class NameOf, class PosOf>
  void unique(const Range& items, const std::string& what, NameOf name_of, PosOf pos_of,
              const std::string& scope = "") {
    std::map<std::string, SourcePos> seen;
    for (const auto& item : items) {
      const std::string& name = name_of(item);
      auto [it, inserted] = seen.emplace(name, pos_of(item));
      if (!inserted) {
        error("DUPLICATE_NAME", scope + name, fmt::format("duplicate {} name '{}'", what, name),
              pos_of(item), it->second);
      }
    }
  }

  void check_name(const std::string& name, const std::string& element, SourcePos pos) {
    if (!is_identifier(name)) {
      error("BAD_NAME", element, fmt::format("'{}' is not a valid identifier", name), pos);
    }
  }

  void check_unique_names() {
    check_name(model_.name, "network", {});
    for (const auto& a : model_.automata) {
      check_name(a.name, a.name, a.pos);
      for (const auto& l : a.locations) check_name(l.name, a.name + "." + l.name, l.pos);
      if (a.local_clock) check_name(*a.local_clock, a.name + "." + *a.local_clock, a.pos);
    }
    for (const auto& v : model_.variables) check_name(v.name, v.name, v.pos);
    for (const auto& c : model_.channels) check_name(c.name, c.name, c.pos);

    unique(model_.automata, "automaton", [](const auto& a) -> const std::string& { return a.name; },
           [](const auto& a) { return a.pos; });
    unique(model_.variables, "variable", [](const auto& v) -> const std::string& { return v.name; },
           [](const auto& v) { return v.pos; });
    unique(model_.channels, "channel", [](const auto& c) -> const std::string& { return c.name; },
           [](const auto& c) { return c.pos; });
  }

  /// Declared-identifier, clock and type checks shared by every expression slot.
  void check_expr(const Expr& expr, const HybridAutomaton& owner, const std::string& element,
                  ExprType expected) {
    std::set<std::string> vars;
    collect_variables(expr, vars);
    for (const auto& name : vars) {
      if (!model_.find_variable(name)) {
        error("UNDECLARED_VAR", element, fmt::format("undeclared variable '{}'", name),
              expr.pos());
      }
    }
    if (references_clock(expr)) {
      bool ok = owner.local_clock.has_value();
      check_clock_names(expr, owner, ok);
      if (!ok) {
        error("NO_CLOCK", element,
              fmt::format("automaton '{}' has no local clock of that name", owner.name),
              expr.pos());
      }
    }
    if (contains_location_atom(expr)) {
      error("LOCATION_ATOM", element, "location atoms are only allowed in properties",
            expr.pos());
      return;
    }
    try {
      if (check_type(expr) != expected) {
        error("TYPE_ERROR", element,
              expected == ExprType::Number ? "expected a numeric expression"
                                           : "expected a boolean expression",
              expr.pos());
      }
    } catch (const EvalError& e) {
      error("TYPE_ERROR", element, e.what(), expr.pos());
    }
  }

  static void check_clock_names(const Expr& expr, const HybridAutomaton& owner, bool& ok) {
    const auto& v = expr.node().value;
    if (const auto* c = std::get_if<node::LocalClock>(&v)) {
      if (!owner.local_clock || *owner.local_clock != c->name) ok = false;
    } else if (const auto* u = std::get_if<node::Unary>(&v)) {
      check_clock_names(u->operand, owner, ok);
    } else if (const auto* b = std::get_if<node::Binary>(&v)) {
      check_clock_names(b->lhs, owner, ok);
      check_clock_names(b->rhs, owner, ok);
    }
  }

  void check_automaton(const HybridAutomaton& a) {
    const std::string scope = a.name + ".";
    if (a.locations.empty()) {
      error("NO_LOCATIONS", a.name, "automaton has no locations", a.pos);
    }
    unique(a.locations, "location", [](const auto& l) -> const std::string& { return l.name; },
           [](const auto& l) { return l.pos; }, scope);
    if (a.location_index(a.initial_location) < 0) {
      error("UNKNOWN_LOCATION", scope + "init",
            fmt::format("initial location '{}' does not exist", a.initial_location), a.pos);
    }
    if (a.local_clock && model_.find_variable(*a.local_clock)) {
      error("DUPLICATE_NAME", scope + *a.local_clock,
            fmt::format("clock '{}' shadows a declared variable", *a.local_clock), a.pos);
    }

    for (const auto& loc : a.locations) {
      const std::string where = fmt::format("{}location[{}]", scope, loc.name);
      std::set<std::string> flowed;
      for (const auto& f : loc.flows) {
        const std::string fe = fmt::format("{}.flow[{}]", where, f.variable);
        const VarDecl* decl = model_.find_variable(f.variable);
        if (!decl) {
          error("UNDECLARED_VAR", fe, fmt::format("flow on undeclared variable '{}'", f.variable),
                f.pos);
        } else if (decl->is_constant()) {
          error("CONST_ASSIGN", fe, fmt::format("'{}' is a constant", f.variable), f.pos);
        }
        if (!flowed.insert(f.variable).second) {
          error("DUPLICATE_FLOW", fe, fmt::format("second flow for '{}'", f.variable), f.pos);
        }
        check_expr(f.rhs, a, fe, ExprType::Number);
        if (f.gate) check_expr(*f.gate, a, fe + ".gate", ExprType::Boolean);
        if (decl && !decl->is_constant()) owners_[f.variable].insert(a.name);
      }
      if (loc.invariant) {
        check_expr(*loc.invariant, a, where + ".invariant", ExprType::Boolean);
        if (contains_strict_comparison(*loc.invariant)) {
          error("STRICT_INVARIANT", where + ".invariant",
                "invariants must be closed (use <= or >=)", loc.invariant->pos());
        }
      }
      if (loc.dwell.kind == StochasticPolicy::Kind::Exponential &&
          !(loc.dwell.rate > 0 && std::isfinite(loc.dwell.rate))) {
        error("BAD_RATE", where + ".dwell", "exponential rate must be positive", loc.pos);
      }
    }

    for (size_t i = 0; i < a.edges.size(); ++i) {
      const Edge& e = a.edges[i];
      const std::string where = fmt::format("{}edge[{}]", scope, i);
      if (a.location_index(e.source) < 0) {
        error("UNKNOWN_LOCATION", where, fmt::format("unknown source location '{}'", e.source),
              e.pos);
      }
      if (a.location_index(e.target) < 0) {
        error("UNKNOWN_LOCATION", where, fmt::format("unknown target location '{}'", e.target),
              e.pos);
      }
      if (e.guard) check_expr(*e.guard, a, where + ".guard", ExprType::Boolean);
      if (e.sync.kind != SyncKind::None && !model_.find_channel(e.sync.channel)) {
        error("UNKNOWN_CHANNEL", where, fmt::format("undeclared channel '{}'", e.sync.channel),
              e.pos);
      }
      for (const auto& r : e.resets) {
        const std::string re = fmt::format("{}.reset[{}]", where, r.target);
        const VarDecl* decl = model_.find_variable(r.target);
        bool is_clock = a.local_clock && *a.local_clock == r.target;
        if (!decl && !is_clock) {
          error("BAD_RESET_TARGET", re,
                fmt::format("'{}' is neither a variable nor the local clock", r.target), e.pos);
        } else if (decl && decl->is_constant()) {
          error("CONST_ASSIGN", re, fmt::format("'{}' is a constant", r.target), e.pos);
        }
        check_expr(r.value, a, re, ExprType::Number);
      }
      if (!(e.weight > 0 && std::isfinite(e.weight))) {
        error("BAD_WEIGHT", where, "edge weight must be positive", e.pos);
      }
    }
  }

  void check_flow_ownership() {
    for (const auto& [var, owners] : owners_) {
      if (owners.size() > 1) {
        std::string names;
        for (const auto& o : owners) names += (names.empty() ? "" : ", ") + o;
        error("VAR_MULTI_OWNER", var,
              fmt::format("variable '{}' has flows in several automata ({})", var, names));
      }
    }
  }

  void check_emitters() {
    for (const auto& a : model_.automata) {
      for (size_t i = 0; i < a.edges.size(); ++i) {
        const Edge& e = a.edges[i];
        if (e.sync.kind != SyncKind::Emit) continue;
        bool matched = false;
        for (const auto& b : model_.automata) {
          if (b.name == a.name) continue;
          for (const auto& f : b.edges) {
            matched = matched ||
                      (f.sync.kind == SyncKind::Receive && f.sync.channel == e.sync.channel);
          }
        }
        if (!matched) {
          warning("UNMATCHED_EMIT", fmt::format("{}.edge[{}]", a.name, i),
                  fmt::format("no other automaton receives '{}'", e.sync.channel), e.pos);
        }
      }
    }
  }

  const NetworkModel& model_;
  ValidationReport report_;
  std::map<std::string, std::set<std::string>> owners_;
};

}  // namespace

ValidationReport validate_network(const NetworkModel& model) { return Validator(model).run(); }

std::map<std::string, SyncBucket> sync_table(const NetworkModel& model) {
  std::vector<const HybridAutomaton*> ordered;
  for (const auto& a : model.automata) ordered.push_back(&a);
  std::stable_sort(ordered.begin(), ordered.end(),
                   [](const auto* x, const auto* y) { return x->name < y->name; });
  std::map<std::string, SyncBucket> table;
  for (const auto* a : ordered) {
    for (size_t i = 0; i < a->edges.size(); ++i) {
      const Sync& s = a->edges[i].sync;
      if (s.kind == SyncKind::None) continue;
      auto& bucket = table[s.channel];
      EdgeRef ref{a->name, static_cast<int>(i)};
      (s.kind == SyncKind::Emit ? bucket.emitters : bucket.receivers).push_back(ref);
    }
  }
  return table;
}

}  // namespace hysmc

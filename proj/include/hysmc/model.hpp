#pragma once

#include <optional>
#include <string>
#include <vector>

#include "hysmc/expr.hpp"

namespace hysmc {

/// How long an automaton stays in a location when nothing forces it out.
struct StochasticPolicy {
  enum class Kind { Eager, Exponential };

  Kind kind = Kind::Eager;
  double rate = 0.0;  ///< per time unit, exponential only

  static StochasticPolicy eager() { return {}; }
  static StochasticPolicy exponential(double rate) { return {Kind::Exponential, rate}; }

  bool operator==(const StochasticPolicy&) const = default;
};

/// d(variable)/dt = rhs, active while `gate` holds (always when absent).
struct Flow {
  std::string variable;
  Expr rhs;
  std::optional<Expr> gate;
  SourcePos pos;

  bool operator==(const Flow& o) const {
    return variable == o.variable && rhs == o.rhs && gate == o.gate;
  }
};

struct Location {
  std::string name;
  std::vector<Flow> flows;
  std::optional<Expr> invariant;
  StochasticPolicy dwell;
  SourcePos pos;

  const Flow* flow_for(const std::string& variable) const;

  bool operator==(const Location& o) const {
    return name == o.name && flows == o.flows && invariant == o.invariant && dwell == o.dwell;
  }
};

enum class SyncKind { None, Emit, Receive };

struct Sync {
  SyncKind kind = SyncKind::None;
  std::string channel;

  static Sync none() { return {}; }
  static Sync emit(std::string channel) { return {SyncKind::Emit, std::move(channel)}; }
  static Sync receive(std::string channel) { return {SyncKind::Receive, std::move(channel)}; }

  bool operator==(const Sync&) const = default;
};

/// Assignment applied when an edge fires; target is a variable or the local clock.
struct Reset {
  std::string target;
  Expr value;

  bool operator==(const Reset& o) const { return target == o.target && value == o.value; }
};

struct Edge {
  std::string source;
  std::string target;
  std::optional<Expr> guard;
  Sync sync;
  std::vector<Reset> resets;
  double weight = 1.0;
  SourcePos pos;

  bool operator==(const Edge& o) const {
    return source == o.source && target == o.target && guard == o.guard && sync == o.sync &&
           resets == o.resets && weight == o.weight;
  }
};

struct HybridAutomaton {
  std::string name;
  std::vector<Location> locations;
  std::vector<Edge> edges;
  std::string initial_location;
  std::optional<std::string> local_clock;
  SourcePos pos;

  /// Index into `locations`, or -1.
  int location_index(const std::string& location) const;
  const Location* find_location(const std::string& location) const;

  bool operator==(const HybridAutomaton& o) const {
    return name == o.name && locations == o.locations && edges == o.edges &&
           initial_location == o.initial_location && local_clock == o.local_clock;
  }
};

struct ChannelDecl {
  std::string name;
  bool urgent = false;
  SourcePos pos;

  bool operator==(const ChannelDecl& o) const { return name == o.name && urgent == o.urgent; }
};

struct VarDecl {
  enum class Kind { Variable, Constant };

  std::string name;
  double initial = 0.0;
  Kind kind = Kind::Variable;
  std::string unit;  ///< free-text annotation, documentation only
  SourcePos pos;

  bool is_constant() const { return kind == Kind::Constant; }

  bool operator==(const VarDecl& o) const {
    return name == o.name && initial == o.initial && kind == o.kind && unit == o.unit;
  }
};

struct NetworkModel {
  std::string name = "network";
  std::vector<HybridAutomaton> automata;
  std::vector<ChannelDecl> channels;
  std::vector<VarDecl> variables;

  const HybridAutomaton* find_automaton(const std::string& name) const;
  HybridAutomaton* find_automaton(const std::string& name);
  const VarDecl* find_variable(const std::string& name) const;
  VarDecl* find_variable(const std::string& name);
  const ChannelDecl* find_channel(const std::string& name) const;

  bool operator==(const NetworkModel& o) const {
    return name == o.name && automata == o.automata && channels == o.channels &&
           variables == o.variables;
  }
};

}  // namespace hysmc

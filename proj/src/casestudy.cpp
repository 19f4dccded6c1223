#include "hysmc/casestudy.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

#include <fmt/format.h>

namespace hysmc {

namespace {

Expr var(const std::string& name) { return Expr::variable(name); }
Expr num(double v) { return Expr::constant(v); }

Flow flow(const std::string& variable, Expr rhs, std::optional<Expr> gate = std::nullopt) {
  return Flow{variable, std::move(rhs), std::move(gate), {}};
}

Location location(const std::string& name, std::vector<Flow> flows,
                  std::optional<Expr> invariant = std::nullopt,
                  StochasticPolicy dwell = StochasticPolicy::eager()) {
  return Location{name, std::move(flows), std::move(invariant), dwell, {}};
}

Edge edge(const std::string& source, const std::string& target, std::optional<Expr> guard,
          Sync sync = Sync::none(), std::vector<Reset> resets = {}, double weight = 1.0) {
  return Edge{source, target, std::move(guard), std::move(sync), std::move(resets), weight, {}};
}

std::vector<Flow> robot_still() { return {flow("V", num(0)), flow("r", num(0))}; }

bool positive(double x) { return x > 0.0 && std::isfinite(x); }

void add_common_declarations(NetworkModel& m, const ScenarioParams& p) {
  using K = VarDecl::Kind;
  m.variables = {
      {"V", 0.0, K::Variable, "cm/s", {}},
      {"r", 0.0, K::Variable, "cm", {}},
      {"C", 100.0, K::Variable, "%", {}},
      {"F", 0.0, K::Variable, "fatigue, 0..1", {}},
      {"h", 0.0, K::Variable, "cm", {}},
      {"v_max", p.v_max, K::Constant, "cm/s", {}},
      {"a_max", p.a_max, K::Constant, "cm/s^2", {}},
      {"v_human", p.v_human, K::Constant, "cm/s", {}},
      {"r1", p.r1, K::Constant, "%/s", {}},
      {"r2", p.r2, K::Constant, "%/s", {}},
      {"r3", p.r3, K::Constant, "%/s", {}},
      {"lambda_f", p.lambda_f, K::Constant, "1/s", {}},
      {"mu_f", p.mu_f, K::Constant, "1/s", {}},
  };
  m.channels = {
      {"start_moving", false, {}},   {"stop_moving", false, {}}, {"start_recharging", false, {}},
      {"full_battery", true, {}},    {"dead_battery", false, {}},
  };
}

}  // namespace

void ScenarioParams::check() const {
  for (double x : {v_max, a_max, v_human, r1, r2, r3, lambda_f, mu_f, lambda_idle, lambda_move}) {
    if (!positive(x)) throw PreconditionError("scenario rates must be strictly positive");
  }
  if (!(p_recharge >= 0.0 && p_recharge <= 1.0)) {
    throw PreconditionError("p_recharge must lie in [0, 1]");
  }
}

void ControllerParams::check() const {
  if (!(f_low >= 0.0 && f_low < f_high && f_high <= 1.0)) {
    throw PreconditionError(
        fmt::format("controller thresholds need 0 <= F_low < F_high <= 1 (got {}, {})", f_low,
                    f_high));
  }
}

HybridAutomaton build_robot(const ScenarioParams& p) {
  p.check();
  HybridAutomaton a;
  a.name = "Robot";
  a.initial_location = "idle";
  Expr V = var("V");
  a.locations = {
      location("idle", robot_still(), std::nullopt, StochasticPolicy::exponential(p.lambda_idle)),
      location("starting", {flow("V", var("a_max")), flow("r", V)}, V <= var("v_max")),
      location("moving", {flow("V", num(0)), flow("r", var("v_max"))}, std::nullopt,
               StochasticPolicy::exponential(p.lambda_move)),
      location("stopping", {flow("V", -var("a_max")), flow("r", V)}, V >= num(0)),
      location("recharging", robot_still()),
      location("dead", robot_still()),
  };
  if (p.p_recharge < 1.0) {
    a.edges.push_back(edge("idle", "starting", std::nullopt, Sync::emit("start_moving"), {},
                           1.0 - p.p_recharge));
  }
  if (p.p_recharge > 0.0) {
    a.edges.push_back(edge("idle", "recharging", std::nullopt, Sync::emit("start_recharging"),
                           {}, p.p_recharge));
  }
  a.edges.push_back(edge("starting", "moving", V >= var("v_max")));
  a.edges.push_back(edge("moving", "stopping", std::nullopt, Sync::emit("stop_moving")));
  a.edges.push_back(edge("stopping", "idle", V <= num(0)));
  a.edges.push_back(edge("recharging", "idle", std::nullopt, Sync::receive("full_battery")));
  for (const char* from : {"idle", "starting", "moving", "stopping"}) {
    a.edges.push_back(
        edge(from, "dead", std::nullopt, Sync::receive("dead_battery"), {{"V", num(0)}}));
  }
  return a;
}

HybridAutomaton build_battery(const ScenarioParams& p) {
  p.check();
  HybridAutomaton a;
  a.name = "Battery";
  a.initial_location = "full_to_80";
  Expr C = var("C");
  a.locations = {
      location("full_to_80", {flow("C", -var("r1"))}, C >= num(80)),
      location("80_to_20", {flow("C", -var("r2"))}, C >= num(20)),
      location("20_to_empty", {flow("C", -var("r3"))}, C >= num(0)),
      location("empty", {flow("C", num(0))}),
      location("recharging_upto20", {flow("C", var("r3"))}, C <= num(20)),
      location("recharging_upto80", {flow("C", var("r2"))}, C <= num(80)),
      location("recharging_upto100", {flow("C", var("r1"))}, C <= num(100)),
      location("recharging_full", {flow("C", num(0))}),
  };
  a.edges = {
      edge("full_to_80", "80_to_20", C <= num(80)),
      edge("80_to_20", "20_to_empty", C <= num(20)),
      edge("20_to_empty", "empty", C <= num(0), Sync::emit("dead_battery")),
      edge("full_to_80", "recharging_upto100", std::nullopt, Sync::receive("start_recharging")),
      edge("80_to_20", "recharging_upto80", std::nullopt, Sync::receive("start_recharging")),
      edge("20_to_empty", "recharging_upto20", std::nullopt, Sync::receive("start_recharging")),
      edge("recharging_upto20", "recharging_upto80", C >= num(20)),
      edge("recharging_upto80", "recharging_upto100", C >= num(80)),
      edge("recharging_upto100", "recharging_full", C >= num(100)),
      edge("recharging_full", "full_to_80", std::nullopt, Sync::emit("full_battery")),
  };
  return a;
}

HybridAutomaton build_human(const ScenarioParams& p) {
  p.check();
  HybridAutomaton a;
  a.name = "Human";
  a.initial_location = "idle";
  a.local_clock = "t";
  Expr F = var("F");
  Expr t = Expr::clock("t");
  Expr mu = var("mu_f");
  Expr lambda = var("lambda_f");
  a.locations = {
      location("idle", {flow("F", -(mu * exp(-(mu * t))), F > num(0)), flow("h", num(0))}),
      location("moving", {flow("F", lambda * exp(-(lambda * t))), flow("h", var("v_human"))},
               F <= num(1)),
      location("passed_out", {flow("F", num(0)), flow("h", num(0))}),
  };
  a.edges = {
      edge("idle", "moving", std::nullopt, Sync::receive("start_moving"), {{"t", num(0)}}),
      edge("moving", "idle", std::nullopt, Sync::receive("stop_moving")),
      edge("moving", "passed_out", F >= num(1)),
  };
  return a;
}

NetworkModel build_scenario(const ScenarioParams& p) {
  NetworkModel m;
  m.name = "scenario";
  add_common_declarations(m, p);
  m.automata = {build_robot(p), build_battery(p), build_human(p)};
  return m;
}

NetworkModel build_fatigue_aware_scenario(const ScenarioParams& p, const ControllerParams& c) {
  c.check();
  NetworkModel m = build_scenario(p);
  m.name = "scenario_controller";
  HybridAutomaton& robot = *m.find_automaton("Robot");
  Expr F = var("F");
  for (auto& loc : robot.locations) {
    if (loc.name == "moving") loc.invariant = F <= num(c.f_high);
  }
  std::vector<Edge> edges;
  for (auto& e : robot.edges) {
    if (e.source == "idle" && e.target == "starting") e.guard = F <= num(c.f_low);
    edges.push_back(e);
    if (e.source == "moving" && e.target == "stopping") {
      edges.push_back(edge("moving", "stopping", F >= num(c.f_high), Sync::emit("stop_moving")));
    }
  }
  robot.edges = std::move(edges);
  return m;
}

NetworkModel build_battery_only(const ScenarioParams& p) {
  NetworkModel m;
  m.name = "battery";
  using K = VarDecl::Kind;
  m.variables = {
      {"C", 100.0, K::Variable, "%", {}},
      {"r1", p.r1, K::Constant, "%/s", {}},
      {"r2", p.r2, K::Constant, "%/s", {}},
      {"r3", p.r3, K::Constant, "%/s", {}},
  };
  m.channels = {{"start_recharging", false, {}},
                {"full_battery", true, {}},
                {"dead_battery", false, {}}};
  m.automata = {build_battery(p)};
  return m;
}

NetworkModel build_scripted_scenario(const ScenarioParams& p,
                                     const std::vector<SchedulePhase>& schedule) {
  p.check();
  const double t_acc = p.v_max / p.a_max;
  for (size_t i = 0; i < schedule.size(); ++i) {
    const auto& ph = schedule[i];
    if (!(ph.duration > 0.0)) throw PreconditionError("schedule durations must be positive");
    if (i > 0 && schedule[i - 1].activity == ph.activity) {
      throw PreconditionError("schedule phases must alternate between walk and rest");
    }
    if (ph.activity == Activity::Walk && !(ph.duration > t_acc)) {
      throw PreconditionError("a walk must outlast the acceleration phase");
    }
    if (ph.activity == Activity::Rest && i > 0 && !(ph.duration > t_acc)) {
      throw PreconditionError("a rest after a walk must outlast the deceleration phase");
    }
    if (ph.activity == Activity::Walk && std::isinf(ph.duration) && i + 1 != schedule.size()) {
      throw PreconditionError("only the last walk may be unbounded");
    }
    if (ph.activity == Activity::Rest && std::isinf(ph.duration)) {
      throw PreconditionError("rests must be finite");
    }
  }

  HybridAutomaton a;
  a.name = "Robot";
  a.local_clock = "clk";
  Expr V = var("V");
  Expr clk = Expr::clock("clk");

  auto entry_name = [&](size_t i) {
    if (i >= schedule.size()) return std::string("done");
    return schedule[i].activity == Activity::Walk ? fmt::format("start_{}", i)
                                                  : fmt::format("rest_{}", i);
  };
  auto entry_sync = [&](size_t i) {
    return i < schedule.size() && schedule[i].activity == Activity::Walk
               ? Sync::emit("start_moving")
               : Sync::none();
  };

  if (!schedule.empty() && schedule[0].activity == Activity::Walk) {
    a.locations.push_back(location("begin", robot_still()));
    a.edges.push_back(edge("begin", entry_name(0), std::nullopt, entry_sync(0)));
    a.initial_location = "begin";
  } else {
    a.initial_location = entry_name(0);
  }

  for (size_t i = 0; i < schedule.size(); ++i) {
    const auto& ph = schedule[i];
    if (ph.activity == Activity::Rest) {
      double limit = i > 0 ? ph.duration - t_acc : ph.duration;
      std::string name = entry_name(i);
      a.locations.push_back(location(name, robot_still(), clk <= num(limit)));
      a.edges.push_back(edge(name, entry_name(i + 1), clk >= num(limit), entry_sync(i + 1)));
      continue;
    }
    std::string start = fmt::format("start_{}", i);
    std::string move = fmt::format("move_{}", i);
    std::string stop = fmt::format("stop_{}", i);
    a.locations.push_back(
        location(start, {flow("V", var("a_max")), flow("r", V)}, V <= var("v_max")));
    a.edges.push_back(edge(start, move, V >= var("v_max")));
    if (std::isinf(ph.duration)) {
      a.locations.push_back(location(move, {flow("V", num(0)), flow("r", var("v_max"))}));
      continue;
    }
    double cruise = ph.duration - t_acc;
    a.locations.push_back(
        location(move, {flow("V", num(0)), flow("r", var("v_max"))}, clk <= num(cruise)));
    a.edges.push_back(edge(move, stop, clk >= num(cruise), Sync::emit("stop_moving")));
    a.locations.push_back(
        location(stop, {flow("V", -var("a_max")), flow("r", V)}, V >= num(0)));
    a.edges.push_back(edge(stop, entry_name(i + 1), V <= num(0), entry_sync(i + 1)));
  }
  bool needs_done = schedule.empty() || !std::isinf(schedule.back().duration) ||
                    schedule.back().activity == Activity::Rest;
  if (needs_done) a.locations.push_back(location("done", robot_still()));
  if (schedule.empty()) a.initial_location = "done";

  NetworkModel m;
  m.name = "scripted";
  add_common_declarations(m, p);
  m.channels = {{"start_moving", false, {}},
                {"stop_moving", false, {}},
                {"start_recharging", false, {}},
                {"full_battery", true, {}},
                {"dead_battery", false, {}}};
  m.automata = {std::move(a), build_battery(p), build_human(p)};
  return m;
}

void set_initial(NetworkModel& model, const std::string& variable, double value) {
  VarDecl* v = model.find_variable(variable);
  if (!v) throw PreconditionError(fmt::format("no variable named '{}'", variable));
  v->initial = value;
}

// ---------------------------------------------------------------- oracles

AnalyticOracles::AnalyticOracles(ScenarioParams p) : p_(p) { p_.check(); }

double AnalyticOracles::fatigue(double f0, FatiguePhase phase, double tau) const {
  if (phase == FatiguePhase::Walking) {
    return std::clamp(f0 + 1.0 - std::exp(-p_.lambda_f * tau), 0.0, 1.0);
  }
  return std::max(0.0, f0 - (1.0 - std::exp(-p_.mu_f * tau)));
}

double AnalyticOracles::discharge_level(double c0, double tau) const {
  double c = c0;
  double left = tau;
  while (left > 0.0 && c > 0.0) {
    double rate = c > 80.0 ? p_.r1 : c > 20.0 ? p_.r2 : p_.r3;
    double floor = c > 80.0 ? 80.0 : c > 20.0 ? 20.0 : 0.0;
    double span = (c - floor) / rate;
    if (left <= span) return c - rate * left;
    c = floor;
    left -= span;
  }
  return std::max(c, 0.0);
}

double AnalyticOracles::recharge_level(double c0, double tau) const {
  double c = c0;
  double left = tau;
  while (left > 0.0 && c < 100.0) {
    double rate = c < 20.0 ? p_.r3 : c < 80.0 ? p_.r2 : p_.r1;
    double ceil = c < 20.0 ? 20.0 : c < 80.0 ? 80.0 : 100.0;
    double span = (ceil - c) / rate;
    if (left <= span) return c + rate * left;
    c = ceil;
    left -= span;
  }
  return std::min(c, 100.0);
}

double AnalyticOracles::battery_level(double c0, const std::vector<BatterySegment>& segments,
                                      double tau) const {
  double c = c0;
  double left = tau;
  for (size_t i = 0; i < segments.size(); ++i) {
    bool last = i + 1 == segments.size();
    double d = last ? left : std::min(left, segments[i].duration);
    c = segments[i].charging ? recharge_level(c, d) : discharge_level(c, d);
    left -= d;
    if (left <= 0.0) break;
  }
  return c;
}

Kinematics AnalyticOracles::trapezoid(double v0, Motion motion, double tau) const {
  const double a = p_.a_max;
  switch (motion) {
    case Motion::Accelerating: {
      double ramp = std::min(tau, std::max(0.0, (p_.v_max - v0) / a));
      double v = v0 + a * ramp;
      return {v, v0 * ramp + 0.5 * a * ramp * ramp + v * (tau - ramp)};
    }
    case Motion::Cruising:
      return {v0, v0 * tau};
    case Motion::Decelerating: {
      double ramp = std::min(tau, v0 / a);
      return {v0 - a * ramp, v0 * ramp - 0.5 * a * ramp * ramp};
    }
  }
  return {v0, 0.0};
}

double AnalyticOracles::full_discharge_time() const {
  return 20.0 / p_.r1 + 60.0 / p_.r2 + 20.0 / p_.r3;
}

double AnalyticOracles::recharge_time(double c0) const {
  double t = 0.0;
  double c = c0;
  if (c < 20.0) {
    t += (20.0 - c) / p_.r3;
    c = 20.0;
  }
  if (c < 80.0) {
    t += (80.0 - c) / p_.r2;
    c = 80.0;
  }
  if (c < 100.0) t += (100.0 - c) / p_.r1;
  return t;
}

ScheduledState AnalyticOracles::scheduled(const std::vector<SchedulePhase>& schedule, double f0,
                                          double c0, double tau) const {
  ScheduledState s{0.0, 0.0, discharge_level(c0, tau), f0, 0.0};
  const double t_acc = acceleration_time();
  bool passed_out = false;
  bool after_walk = false;
  double start = 0.0;

  auto rest_for = [&](double dt, bool decelerate) {
    if (!passed_out) s.F = fatigue(s.F, FatiguePhase::Resting, dt);
    if (decelerate) {
      Kinematics k = trapezoid(p_.v_max, Motion::Decelerating, std::min(dt, t_acc));
      s.V = k.velocity;
      s.r += k.distance;
    }
  };

  for (const auto& ph : schedule) {
    if (tau <= start) break;
    double dt = std::min(tau, start + ph.duration) - start;
    if (ph.activity == Activity::Walk) {
      if (!passed_out) {
        double met = s.F >= 1.0 ? 0.0 : -std::log(s.F) / p_.lambda_f;
        double walked = std::min(dt, met);
        s.F = fatigue(s.F, FatiguePhase::Walking, walked);
        s.h += p_.v_human * walked;
        if (dt >= met) {
          passed_out = true;
          s.F = 1.0;
        }
      }
      Kinematics k = trapezoid(0.0, Motion::Accelerating, dt);
      s.V = k.velocity;
      s.r += k.distance;
      after_walk = true;
    } else {
      rest_for(dt, after_walk);
      after_walk = false;
    }
    start += ph.duration;
  }
  if (tau > start) rest_for(tau - start, after_walk);
  return s;
}

}  // namespace hysmc

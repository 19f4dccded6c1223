#include <gtest/gtest.h>

#include <cmath>
#include <limits>
#include <set>

#include "hysmc/casestudy.hpp"
#include "hysmc/smc.hpp"
#include "hysmc/validate.hpp"

using namespace hysmc;

namespace {

const double kLn10 = std::log(10.0);

std::string target_location(const Network& net, const Event& e) {
  const auto& a = net.model().automata[static_cast<size_t>(e.automaton)];
  return a.edges[static_cast<size_t>(e.edge)].target;
}

// Time of the first transition into `location` of automaton `aut`, or -1.
double first_entry(const Network& net, const Trace& tr, const std::string& aut,
                   const std::string& location) {
  int a = net.layout().automaton_index(aut);
  int l = net.model().find_automaton(aut)->location_index(location);
  for (const auto& e : tr.events) {
    if (e.kind == EventKind::Transition && e.locations[static_cast<size_t>(a)] == l) return e.time;
  }
  return -1;
}

double value_at(const Network& net, const Trace& tr, const std::string& var, double t) {
  size_t slot = static_cast<size_t>(net.layout().variable_slot(var));
  for (const auto& s : tr.samples) {
    if (std::fabs(s.time - t) < 1e-9) return s.values[slot];
  }
  return std::nan("");
}

SimConfig fine(double horizon) {
  SimConfig c;
  c.horizon = horizon;
  c.step = 0.5;
  c.tol_evt = 1e-9;
  c.seed = 1;
  c.sample_stride = 1;
  return c;
}

}  // namespace

TEST(Builders, RobotShape) {
  HybridAutomaton r = build_robot({});
  EXPECT_EQ(r.locations.size(), 6u);
  EXPECT_EQ(r.initial_location, "idle");
  int boundary = 0;
  std::set<std::string> to_dead;
  for (const auto& e : r.edges) {
    if (e.guard && (to_string(*e.guard) == "V >= v_max" || to_string(*e.guard) == "V <= 0")) {
      ++boundary;
    }
    if (e.target == "dead") to_dead.insert(e.source);
  }
  EXPECT_EQ(boundary, 2);
  EXPECT_EQ(to_dead.size(), 4u);
  const Location* idle = r.find_location("idle");
  ASSERT_NE(idle, nullptr);
  EXPECT_EQ(idle->dwell, StochasticPolicy::exponential(1.0 / 90.0));
  EXPECT_EQ(r.find_location("moving")->dwell, StochasticPolicy::exponential(1.0 / 600.0));
}

TEST(Builders, RechargeWeightZeroDropsEdge) {
  ScenarioParams p;
  p.p_recharge = 0.0;
  HybridAutomaton r = build_robot(p);
  for (const auto& e : r.edges) EXPECT_FALSE(e.source == "idle" && e.target == "recharging");
  EXPECT_TRUE(validate_network(build_scenario(p)).ok());
}

TEST(Builders, BatteryShape) {
  HybridAutomaton b = build_battery({});
  std::vector<std::string> names;
  for (const auto& l : b.locations) names.push_back(l.name);
  EXPECT_EQ(names, (std::vector<std::string>{"full_to_80", "80_to_20", "20_to_empty", "empty",
                                             "recharging_upto20", "recharging_upto80",
                                             "recharging_upto100", "recharging_full"}));
  EXPECT_EQ(b.initial_location, "full_to_80");
  bool emits_full = false, emits_dead = false;
  for (const auto& e : b.edges) {
    emits_full |= e.sync == Sync::emit("full_battery");
    emits_dead |= e.sync == Sync::emit("dead_battery") && e.target == "empty";
  }
  EXPECT_TRUE(emits_full);
  EXPECT_TRUE(emits_dead);
}

TEST(Builders, HumanShape) {
  HybridAutomaton h = build_human({});
  EXPECT_EQ(h.locations.size(), 3u);
  EXPECT_EQ(h.local_clock, std::optional<std::string>("t"));
  EXPECT_EQ(to_string(*h.find_location("moving")->invariant), "F <= 1");
  const Flow* f = h.find_location("idle")->flow_for("F");
  ASSERT_NE(f, nullptr);
  ASSERT_TRUE(f->gate.has_value());
  EXPECT_EQ(to_string(*f->gate), "F > 0");
}

TEST(Builders, Scenario) {
  NetworkModel m = build_scenario();
  EXPECT_EQ(m.automata.size(), 3u);
  EXPECT_EQ(m.channels.size(), 5u);
  EXPECT_TRUE(m.find_channel("full_battery")->urgent);
  EXPECT_TRUE(validate_network(m).issues.empty());
  Network net(m);
  Configuration c = net.initial_configuration();
  const SlotLayout& l = net.layout();
  EXPECT_EQ(c.values[static_cast<size_t>(l.variable_slot("C"))], 100.0);
  for (const char* v : {"F", "V", "r", "h"}) {
    EXPECT_EQ(c.values[static_cast<size_t>(l.variable_slot(v))], 0.0);
  }
  EXPECT_EQ(m.find_variable("v_max")->initial, 65.0);
  EXPECT_EQ(m.find_variable("a_max")->initial, 50.0);
  EXPECT_EQ(m.find_variable("r1")->initial, 0.035);
  EXPECT_EQ(m.find_variable("r2")->initial, 0.008);
  EXPECT_EQ(m.find_variable("r3")->initial, 0.055);
  EXPECT_EQ(m.find_variable("lambda_f")->initial, 0.005);
  EXPECT_EQ(m.find_variable("mu_f")->initial, 0.005);
}

TEST(Builders, ParameterChecks) {
  ScenarioParams p;
  p.r2 = 0;
  EXPECT_THROW(build_scenario(p), PreconditionError);
  p = {};
  p.p_recharge = 1.5;
  EXPECT_THROW(build_scenario(p), PreconditionError);
  ControllerParams c;
  c.f_low = 0.9;
  c.f_high = 0.9;
  EXPECT_THROW(build_fatigue_aware_scenario({}, c), PreconditionError);
  c = {0.5, 0.7};
  EXPECT_THROW(build_fatigue_aware_scenario({}, c), PreconditionError);
  c = {1.2, 0.2};
  EXPECT_THROW(build_fatigue_aware_scenario({}, c), PreconditionError);
  EXPECT_THROW(build_scripted_scenario({}, {{Activity::Walk, 10}, {Activity::Walk, 10}}),
               PreconditionError);
  EXPECT_THROW(build_scripted_scenario({}, {{Activity::Walk, 1.0}}), PreconditionError);
}

TEST(Builders, ControllerVariant) {
  NetworkModel m = build_fatigue_aware_scenario();
  EXPECT_TRUE(validate_network(m).issues.empty()) << validate_network(m).to_string();
  const HybridAutomaton* r = m.find_automaton("Robot");
  EXPECT_EQ(to_string(*r->find_location("moving")->invariant), "F <= 0.9");
  bool stop_edge = false, start_guard = false;
  for (const auto& e : r->edges) {
    if (e.source == "moving" && e.target == "stopping" && e.guard &&
        to_string(*e.guard) == "F >= 0.9") {
      stop_edge = true;
    }
    if (e.source == "idle" && e.target == "starting" && e.guard &&
        to_string(*e.guard) == "F <= 0.2") {
      start_guard = true;
    }
  }
  EXPECT_TRUE(stop_edge);
  EXPECT_TRUE(start_guard);
}

TEST(Oracles, ClosedForms) {
  AnalyticOracles o({});
  EXPECT_DOUBLE_EQ(o.acceleration_time(), 1.3);
  Kinematics k = o.trapezoid(0, Motion::Accelerating, 1.3);
  EXPECT_NEAR(k.velocity, 65.0, 1e-12);
  EXPECT_NEAR(k.distance, 65.0 * 65.0 / (2 * 50.0), 1e-12);
  EXPECT_NEAR(k.distance, 42.25, 1e-12);
  Kinematics cruise = o.trapezoid(0, Motion::Accelerating, 10.0);
  EXPECT_NEAR(cruise.distance, 42.25 + 65 * 8.7, 1e-9);
  Kinematics stop = o.trapezoid(65, Motion::Decelerating, 1.3);
  EXPECT_NEAR(stop.velocity, 0.0, 1e-12);
  EXPECT_NEAR(stop.distance, 42.25, 1e-12);

  EXPECT_NEAR(o.full_discharge_time(), 20 / 0.035 + 60 / 0.008 + 20 / 0.055, 1e-9);
  EXPECT_NEAR(o.full_discharge_time(), 8434.96, 0.5);
  EXPECT_NEAR(o.recharge_time(20), 60 / 0.008 + 20 / 0.035, 1e-9);
  EXPECT_NEAR(o.recharge_time(20), 8071.43, 0.005);

  EXPECT_NEAR(o.fatigue(0, FatiguePhase::Walking, 900), 0.988891, 1e-6);
  EXPECT_NEAR(o.fatigue(0.5, FatiguePhase::Resting, std::log(2.0) / 0.005), 0.0, 1e-12);
  EXPECT_EQ(o.fatigue(0.5, FatiguePhase::Resting, 1000), 0.0);
  EXPECT_NEAR(o.discharge_level(100, 20 / 0.035), 80.0, 1e-9);
  EXPECT_NEAR(o.battery_level(100, {{false, 1e9}}, 571.43), 80.0, 1e-3);
  EXPECT_NEAR(o.battery_level(20, {{true, 1e9}}, 60 / 0.008), 80.0, 1e-9);
  EXPECT_NEAR(o.battery_level(50, {{false, 100}, {true, 1e9}}, 200), 50.0, 1e-9);
}

TEST(Oracles, ScheduledStateByHand) {
  AnalyticOracles o({});
  ScheduledState s = o.scheduled({{Activity::Walk, 600}}, 0, 100, 600);
  EXPECT_NEAR(s.V, 65, 1e-12);
  EXPECT_NEAR(s.r, 42.25 + 65 * (600 - 1.3), 1e-9);
  EXPECT_NEAR(s.F, 1 - std::exp(-3.0), 1e-12);
  EXPECT_NEAR(s.h, 65 * 600, 1e-9);
  EXPECT_NEAR(s.C, 80 - 0.008 * (600 - 20 / 0.035), 1e-9);

  s = o.scheduled({{Activity::Walk, 600}, {Activity::Rest, 100}}, 0, 100, 700);
  EXPECT_NEAR(s.V, 0, 1e-12);
  EXPECT_NEAR(s.r, 2 * 42.25 + 65 * (600 - 1.3), 1e-9);
  EXPECT_NEAR(s.F, std::max(0.0, 1 - std::exp(-3.0) - (1 - std::exp(-0.5))), 1e-12);
  EXPECT_NEAR(s.h, 65 * 600, 1e-9);

  s = o.scheduled({{Activity::Walk, std::numeric_limits<double>::infinity()}}, 0.1, 100, 1000);
  EXPECT_EQ(s.F, 1.0);
  EXPECT_NEAR(s.h, 65 * kLn10 / 0.005, 1e-6);
}

TEST(CaseStudySim, BatteryLifetime) {
  Network net(build_battery_only());
  Trace tr = simulate(net, fine(9000));
  double t = first_entry(net, tr, "Battery", "empty");
  AnalyticOracles o({});
  EXPECT_NEAR(t, o.full_discharge_time(), 1e-3);
  EXPECT_NEAR(t, 8434.96, 0.5);
}

TEST(CaseStudySim, RechargeFromTwenty) {
  Network net(build_battery_only());
  Configuration start = net.initial_configuration();
  const auto* b = net.model().find_automaton("Battery");
  start.locations[0] = b->location_index("recharging_upto80");
  start.values[static_cast<size_t>(net.layout().variable_slot("C"))] = 20.0;
  hysmc::Run run(net, fine(9000), start);
  while (!run.finished()) run.macro_step();
  Trace tr = run.take_trace();
  EXPECT_NEAR(first_entry(net, tr, "Battery", "recharging_full"), 8071.43, 0.01);
}

TEST(CaseStudySim, PassOutFromTenPercent) {
  NetworkModel m = build_scripted_scenario({}, {{Activity::Walk, INFINITY}});
  set_initial(m, "F", 0.1);
  Network net(m);
  Trace tr = simulate(net, fine(600));
  double t = first_entry(net, tr, "Human", "passed_out");
  EXPECT_NEAR(t, kLn10 / 0.005, 1e-3);
  EXPECT_NEAR(t, 460.52, 0.5);
}

TEST(CaseStudySim, NineHundredSecondsOfWalking) {
  NetworkModel m = build_scripted_scenario({}, {{Activity::Walk, INFINITY}});
  Network net(m);
  Trace tr = simulate(net, fine(900));
  EXPECT_EQ(first_entry(net, tr, "Human", "passed_out"), -1);
  EXPECT_NEAR(value_at(net, tr, "F", 900), 0.9889, 1e-4);
}

TEST(CaseStudySim, RestingToZero) {
  NetworkModel m = build_scripted_scenario({}, {});
  set_initial(m, "F", 0.5);
  Network net(m);
  Trace tr = simulate(net, fine(300));
  double zero_at = -1, before = -1;
  size_t f = static_cast<size_t>(net.layout().variable_slot("F"));
  for (const auto& s : tr.samples) {
    if (s.values[f] <= 1e-7) {
      zero_at = s.time;
      break;
    }
    before = s.time;
  }
  const double expected = std::log(2.0) / 0.005;
  EXPECT_LT(before, expected);
  EXPECT_GE(zero_at, expected);
  EXPECT_NEAR(zero_at, 138.63, 0.5);
  EXPECT_NEAR(value_at(net, tr, "F", 300), 0.0, 1e-6);
  EXPECT_NEAR(value_at(net, tr, "F", 100), 0.5 - (1 - std::exp(-0.5)), 1e-6);
}

TEST(CaseStudySim, ScriptedScheduleMatchesOracle) {
  std::vector<SchedulePhase> plan = {{Activity::Walk, 300}, {Activity::Rest, 200},
                                     {Activity::Walk, 100}};
  NetworkModel m = build_scripted_scenario({}, plan);
  Network net(m);
  Trace tr = simulate(net, fine(700));
  AnalyticOracles o({});
  const SlotLayout& l = net.layout();
  double worst = 0;
  for (const auto& s : tr.samples) {
    ScheduledState x = o.scheduled(plan, 0, 100, s.time);
    auto at = [&](const char* v) { return s.values[static_cast<size_t>(l.variable_slot(v))]; };
    worst = std::max({worst, std::fabs(at("V") - x.V), std::fabs(at("r") - x.r),
                      std::fabs(at("C") - x.C), std::fabs(at("F") - x.F),
                      std::fabs(at("h") - x.h)});
  }
  EXPECT_LE(worst, 1e-4);
}

TEST(CaseStudySim, StartingPhaseTakesAccelerationTime) {
  NetworkModel m = build_scripted_scenario({}, {{Activity::Walk, 10}});
  Network net(m);
  Trace tr = simulate(net, fine(20));
  double start = first_entry(net, tr, "Robot", "start_0");
  double cruise = first_entry(net, tr, "Robot", "move_0");
  EXPECT_EQ(start, 0.0);
  EXPECT_NEAR(cruise - start, 1.3, 1e-6);
  for (const auto& e : tr.events) {
    if (target_location(net, e) == "move_0") {
      EXPECT_NEAR(e.values[static_cast<size_t>(net.layout().variable_slot("r"))], 42.25, 1e-4);
    }
  }
}

TEST(Controller, PreventsPassOut) {
  NetworkModel m = build_fatigue_aware_scenario();
  Expr goal = parse_goal("Human.passed_out && (Robot.starting || Robot.moving)", m);
  Expr any = parse_goal("Human.passed_out", m);
  SmcOptions o;
  o.epsilon = 0.1;
  o.seed = 4;
  o.sim.step = 0.5;
  for (const Expr& g : {goal, any}) {
    auto rs = sweep(m, g, {1800, 3600, 7200}, o);
    for (const auto& r : rs) EXPECT_EQ(r.k, 0u) << r.t_s;
  }
}

TEST(Controller, DegenerateThresholdMatchesScenario) {
  // stop only at exhaustion; F_low has to stay below F_high
  NetworkModel loose = build_fatigue_aware_scenario({}, {1.0, 0.99});
  NetworkModel plain = build_scenario();
  SmcOptions o;
  o.epsilon = 0.1;
  o.seed = 12;
  o.sim.step = 0.5;
  const char* prop = "Pr[<=7200](<> Human.passed_out && (Robot.starting || Robot.moving))";
  EstimateResult a = estimate_probability(loose, parse_property(prop, loose), o);
  EstimateResult b = estimate_probability(plain, parse_property(prop, plain), o);
  EXPECT_GT(a.p_hat, 0.5);
  EXPECT_LE(a.ci_lo, b.ci_hi);
  EXPECT_LE(b.ci_lo, a.ci_hi);
}

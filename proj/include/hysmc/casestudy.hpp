#pragma once

#include <string>
#include <vector>

#include "hysmc/model.hpp"

namespace hysmc {

struct ScenarioParams {
  double v_max = 65.0;    // cm/s
  double a_max = 50.0;    // cm/s^2
  double v_human = 65.0;  // cm/s
  double r1 = 0.035;      // %/s, band above 80
  double r2 = 0.008;      // %/s, band 20..80
  double r3 = 0.055;      // %/s, band below 20
  double lambda_f = 0.005;
  double mu_f = 0.005;
  double lambda_idle = 1.0 / 90.0;
  double lambda_move = 1.0 / 600.0;
  double p_recharge = 0.5;

  /// Throws PreconditionError on non-positive rates or p_recharge outside [0, 1].
  void check() const;
};

struct ControllerParams {
  double f_high = 0.9;
  double f_low = 0.2;

  void check() const;
};

HybridAutomaton build_robot(const ScenarioParams& p);
HybridAutomaton build_battery(const ScenarioParams& p);
HybridAutomaton build_human(const ScenarioParams& p);

NetworkModel build_scenario(const ScenarioParams& p = {});
NetworkModel build_fatigue_aware_scenario(const ScenarioParams& p = {},
                                          const ControllerParams& c = {});

/// Battery alone, starting full; recharge is never requested.
NetworkModel build_battery_only(const ScenarioParams& p = {});

enum class Activity { Walk, Rest };

/// Walk: from start_moving to stop_moving. Rest: from stop_moving to the next
/// start_moving. A walk of infinite duration never stops.
struct SchedulePhase {
  Activity activity;
  double duration;
};

/// Scenario whose robot follows `schedule` deterministically (clock guards
/// instead of exponential dwell), then stays idle.
NetworkModel build_scripted_scenario(const ScenarioParams& p,
                                     const std::vector<SchedulePhase>& schedule);

void set_initial(NetworkModel& model, const std::string& variable, double value);

enum class FatiguePhase { Walking, Resting };
enum class Motion { Accelerating, Cruising, Decelerating };

struct Kinematics {
  double velocity;
  double distance;
};

struct BatterySegment {
  bool charging;
  double duration;
};

struct ScheduledState {
  double V, r, C, F, h;
};

/// Closed-form reference values for the case study.
class AnalyticOracles {
 public:
  explicit AnalyticOracles(ScenarioParams p);

  const ScenarioParams& params() const { return p_; }

  double fatigue(double f0, FatiguePhase phase, double tau) const;
  /// Battery level after following `segments` from c0 for tau time units
  /// (the last segment extends indefinitely).
  double battery_level(double c0, const std::vector<BatterySegment>& segments, double tau) const;
  double discharge_level(double c0, double tau) const;
  double recharge_level(double c0, double tau) const;
  Kinematics trapezoid(double v0, Motion motion, double tau) const;

  double acceleration_time() const { return p_.v_max / p_.a_max; }
  double full_discharge_time() const;
  double recharge_time(double c0) const;

  /// Whole-network state at `tau` under a scripted schedule without recharge.
  ScheduledState scheduled(const std::vector<SchedulePhase>& schedule, double f0, double c0,
                           double tau) const;

 private:
  ScenarioParams p_;
};

}  // namespace hysmc

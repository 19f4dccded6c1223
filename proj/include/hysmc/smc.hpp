#pragma once

#include <cstdint>
#include <string>
#include <string_view>
#include <vector>

#include "hysmc/expr.hpp"
#include "hysmc/sim.hpp"

namespace hysmc {

/// Pr[<= bound] (<> goal)
struct Property {
  double bound = 0.0;
  Expr goal;
};

/// Syntax only; the goal may reference `Automaton.location` atoms.
Property parse_property(std::string_view text);
/// Syntax plus name resolution against `model`; unresolved names throw
/// SemanticError (UNKNOWN_AUTOMATON, UNKNOWN_LOCATION, UNDECLARED_VAR).
Property parse_property(std::string_view text, const NetworkModel& model);
/// A bare goal expression, resolved against `model`.
Expr parse_goal(std::string_view text, const NetworkModel& model);
void check_goal(const Expr& goal, const NetworkModel& model);

std::string to_string(const Property& property);

/// True iff the goal holds at some sample or event instant with time <= bound.
bool evaluate_on_trace(const Property& property, const Trace& trace);

/// ceil(ln(2/alpha) / (2 epsilon^2))
std::uint64_t required_runs(double epsilon, double alpha);

struct Interval {
  double lo;
  double hi;
};

/// Exact two-sided (1 - alpha) binomial interval for k successes in n trials.
Interval clopper_pearson(std::uint64_t k, std::uint64_t n, double alpha);

struct EstimateResult {
  double t_s = 0.0;
  std::uint64_t k = 0;
  std::uint64_t n = 0;
  double p_hat = 0.0;
  double ci_lo = 0.0;
  double ci_hi = 1.0;
  double epsilon = 0.0;
  double alpha = 0.0;
  std::uint64_t seed = 0;
};

struct SmcOptions {
  double epsilon = 0.05;
  double alpha = 0.05;
  std::uint64_t seed = 0;
  /// step, tolerances and sample stride for every run; horizon and seed are set per run
  SimConfig sim;
  /// 0 picks HYSMC_THREADS or the hardware concurrency
  int threads = 0;
  bool share_seeds = true;
};

int default_thread_count();

/// Seed of run `index` for bound number `bound_index` of a sweep.
std::uint64_t run_seed(std::uint64_t master, std::uint64_t index, std::size_t bound_index,
                       bool shared);

/// Earliest time within [0, horizon] at which `goal` holds on the run with
/// `seed`; +infinity when it never does. The run stops at the first hit.
double first_hit_time(const Network& net, const CompiledExpr& goal, const SimConfig& sim);

EstimateResult estimate_probability(const Network& net, const Property& property,
                                    const SmcOptions& options);
EstimateResult estimate_probability(const NetworkModel& model, const Property& property,
                                    const SmcOptions& options);

/// One estimate per bound. Bounds must be strictly increasing and positive.
std::vector<EstimateResult> sweep(const Network& net, const Expr& goal,
                                  const std::vector<double>& bounds, const SmcOptions& options);
std::vector<EstimateResult> sweep(const NetworkModel& model, const Expr& goal,
                                  const std::vector<double>& bounds, const SmcOptions& options);

}  // namespace hysmc

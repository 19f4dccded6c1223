#pragma once

#include <cstdint>
#include <functional>
#include <iosfwd>
#include <limits>
#include <memory>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "hysmc/compiled_expr.hpp"
#include "hysmc/model.hpp"
#include "hysmc/rng.hpp"

namespace hysmc {

struct SimConfig {
  double horizon = 0.0;
  double step = 0.1;
  double tol_evt = 1e-6;
  double tol_inv = 1e-9;
  std::uint64_t seed = 0;
  int sample_stride = 10;

  /// Throws PreconditionError unless 0 < tol_evt < step and horizon > 0.
  void check() const;
};

/// `values` follows SlotLayout: declared variables, then one clock per automaton.
struct Configuration {
  double time = 0.0;
  std::vector<int> locations;
  std::vector<double> values;

  bool operator==(const Configuration&) const = default;
};

struct Sample {
  double time = 0.0;
  std::vector<int> locations;
  std::vector<double> values;

  bool operator==(const Sample&) const = default;
};

enum class EventKind { Transition, Deadlock, Timelock };

struct Event {
  double time = 0.0;
  EventKind kind = EventKind::Transition;
  int automaton = -1;
  int edge = -1;
  int channel = -1;
  // state right after the macro-step that produced the event
  std::vector<int> locations;
  std::vector<double> values;

  bool operator==(const Event&) const = default;
};

struct TraceSchema {
  SlotLayout layout;
  std::vector<std::vector<std::string>> edge_labels;  // "source->target"
  std::vector<std::string> channels;
};

struct Trace {
  std::shared_ptr<const TraceSchema> schema;
  double horizon = 0.0;
  double end_time = 0.0;
  bool terminated = false;  // ended early by deadlock or timelock
  std::vector<Sample> samples;
  std::vector<Event> events;
};

void write_trace_csv(const Trace& trace, std::ostream& out);
void write_events_csv(const Trace& trace, std::ostream& out);

/// Validated, slot-resolved form of a NetworkModel. Immutable and shareable
/// between concurrently executing runs.
class Network {
 public:
  struct CFlow {
    int slot;
    CompiledExpr rhs;
    std::optional<CompiledExpr> gate;
  };
  struct CLocation {
    std::vector<CFlow> flows;
    std::optional<CompiledExpr> invariant;
    StochasticPolicy dwell;
    std::vector<int> local_edges;  // outgoing edges without a receive label
  };
  struct CEdge {
    int source;
    int target;
    std::optional<CompiledExpr> guard;
    SyncKind sync;
    int channel;
    std::vector<std::pair<int, CompiledExpr>> resets;
    double weight;
  };
  struct CAutomaton {
    std::vector<CLocation> locations;
    std::vector<CEdge> edges;
    int initial;
  };
  struct EdgeRef {
    int automaton;
    int edge;
  };

  /// Throws ModelError when validation reports errors.
  explicit Network(NetworkModel model);

  const NetworkModel& model() const { return *model_; }
  const SlotLayout& layout() const { return schema_->layout; }
  std::shared_ptr<const TraceSchema> schema() const { return schema_; }

  const std::vector<CAutomaton>& automata() const { return automata_; }
  const std::vector<int>& name_order() const { return name_order_; }
  const std::vector<EdgeRef>& receivers(int channel) const { return receivers_[channel]; }
  bool urgent(int channel) const { return urgent_[channel]; }

  Configuration initial_configuration() const;

 private:
  std::shared_ptr<const NetworkModel> model_;
  std::shared_ptr<const TraceSchema> schema_;
  std::vector<CAutomaton> automata_;
  std::vector<int> name_order_;
  std::vector<std::vector<EdgeRef>> receivers_;
  std::vector<bool> urgent_;
};

Configuration initial_configuration(const NetworkModel& model);

/// One classical RK4 step of length h; flow gates are evaluated at `config`
/// and held for the step. Throws SimulationError on non-finite results.
Configuration integrate_step(const Network& net, const Configuration& config, double h);

struct Crossing {
  double time;         // last bracketed instant where the predicate is still false
  double bracket_end;  // first bracketed instant where it holds
};

/// Earliest instant in (before, after] at which `predicate` holds, bracketed to
/// within tol_evt by bisection on re-integrated states. `owner` selects whose
/// local clock the predicate may reference.
Crossing locate_boundary(const Network& net, const Configuration& before,
                         const Configuration& after, const Expr& predicate, double tol_evt,
                         int owner = -1);

namespace detail {

/// RK4 over the slot vector with flow gates frozen by select().
class Integrator {
 public:
  explicit Integrator(const Network& net);

  void select(std::span<const int> locations, std::span<const double> y);
  void step(std::span<const double> y0, double s, std::span<double> out);

 private:
  void derivative(std::span<const double> y, std::span<double> dy) const;

  const Network* net_;
  std::vector<int> locations_;
  std::vector<const Network::CFlow*> active_;
  std::vector<double> base_dy_, k1_, k2_, k3_, k4_, tmp_;
};

}  // namespace detail

double exponential_delay(double rate, double u);
/// +infinity for eager locations.
double sample_delay(const StochasticPolicy& policy, Rng& rng);

/// Called after every accepted state change; return true to stop the run.
using RunObserver =
    std::function<bool(double time, std::span<const int> locations, std::span<const double> values)>;

class Run {
 public:
  Run(const Network& net, const SimConfig& config);
  Run(const Network& net, const SimConfig& config, Configuration start);

  void set_observer(RunObserver observer);
  void set_recording(bool on) { recording_ = on; }

  /// Advances until something fires, the horizon is reached or the run ends.
  /// Returns the events fired by this step (possibly none).
  std::vector<Event> macro_step();

  bool finished() const { return finished_; }
  const Configuration& state() const { return state_; }
  double deadline(int automaton) const { return deadlines_[automaton]; }
  Rng& rng() { return rng_; }

  Trace take_trace();

 private:
  struct Watch {
    enum Kind { Invariant, Guard, Gate } kind;
    int automaton;
    const CompiledExpr* expr;
  };

  bool notify();
  void post_events(const std::vector<Event>& events, double t0);
  void record_sample();
  void finish();
  void terminate(EventKind kind, std::vector<Event>& out);

  std::vector<int> enabled_local(int a, std::span<const double> view) const;
  bool invariant_holds(int a, std::span<const double> view) const;
  int pick(const std::vector<double>& weights);
  std::vector<Event> fire(int a, int edge, std::span<const double> choice_view);
  void resample(int a);

  std::vector<Event> try_immediate();
  bool frozen() const;
  void rebuild_watches();
  void eval_watches(std::span<const double> y, std::vector<char>& out) const;
  /// Integrates one step; returns fired events or nothing.
  std::optional<std::vector<Event>> advance();

  const Network& net_;
  SimConfig cfg_;
  Rng rng_;
  Configuration state_;
  std::vector<double> deadlines_;
  bool started_ = false;
  bool finished_ = false;
  bool recording_ = true;
  RunObserver observer_;
  Trace trace_;

  double segment_start_ = 0.0;
  long long segment_steps_ = 0;
  long long total_steps_ = 0;
  int idle_macro_steps_ = 0;

  std::vector<Watch> watches_;
  bool watches_valid_ = false;
  detail::Integrator integ_;
  std::vector<char> w0_, w1_, wm_;
  std::vector<double> y1_, ylo_, yhi_, ymid_;
};

Trace simulate(const Network& net, const SimConfig& config);
Trace simulate(const NetworkModel& model, const SimConfig& config);

}  // namespace hysmc

#include "hysmc/sim.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <ostream>

#include <fmt/format.h>

#include "hysmc/validate.hpp"

namespace hysmc {

namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();
constexpr int kMaxBisection = 64;
constexpr int kMaxZeroTimeSteps = 10000;

void check_finite(std::span<const double> y, const SlotLayout& layout, double time) {
  for (size_t i = 0; i < y.size(); ++i) {
    if (!std::isfinite(y[i])) {
      std::string name = i < layout.variable_count()
                             ? layout.variables[i]
                             : layout.automata[i - layout.variable_count()] + ".clock";
      throw SimulationError(fmt::format("non-finite value of {} at t={}", name, time));
    }
  }
}

}  // namespace

void SimConfig::check() const {
  if (!(horizon > 0.0) || !std::isfinite(horizon)) {
    throw PreconditionError("horizon must be positive and finite");
  }
  if (!(step > 0.0) || !std::isfinite(step)) throw PreconditionError("step must be positive");
  if (!(tol_evt > 0.0) || !(tol_evt < step)) {
    throw PreconditionError("event tolerance must lie in (0, step)");
  }
  if (!(tol_inv >= 0.0)) throw PreconditionError("invariant tolerance must be non-negative");
  if (sample_stride < 1) throw PreconditionError("sample stride must be at least 1");
}

// ---------------------------------------------------------------- Network

Network::Network(NetworkModel model) {
  require_valid(model);
  model_ = std::make_shared<const NetworkModel>(std::move(model));
  const NetworkModel& m = *model_;

  auto schema = std::make_shared<TraceSchema>();
  schema->layout = SlotLayout::of(m);
  const SlotLayout& layout = schema->layout;

  for (const auto& c : m.channels) {
    schema->channels.push_back(c.name);
    urgent_.push_back(c.urgent);
  }
  auto channel_index = [&](const std::string& name) {
    auto it = std::find(schema->channels.begin(), schema->channels.end(), name);
    return it == schema->channels.end() ? -1 : static_cast<int>(it - schema->channels.begin());
  };

  for (int a = 0; a < static_cast<int>(m.automata.size()); ++a) {
    const HybridAutomaton& ha = m.automata[a];
    CAutomaton ca;
    std::vector<std::string> labels;
    for (const Location& loc : ha.locations) {
      CLocation cl;
      for (const Flow& f : loc.flows) {
        CFlow cf{layout.variable_slot(f.variable), compile(f.rhs, layout, a), std::nullopt};
        if (f.gate) cf.gate = compile(*f.gate, layout, a);
        cl.flows.push_back(std::move(cf));
      }
      if (loc.invariant) cl.invariant = compile(*loc.invariant, layout, a);
      cl.dwell = loc.dwell;
      ca.locations.push_back(std::move(cl));
    }
    for (int e = 0; e < static_cast<int>(ha.edges.size()); ++e) {
      const Edge& edge = ha.edges[e];
      CEdge ce;
      ce.source = ha.location_index(edge.source);
      ce.target = ha.location_index(edge.target);
      if (edge.guard) ce.guard = compile(*edge.guard, layout, a);
      ce.sync = edge.sync.kind;
      ce.channel = edge.sync.kind == SyncKind::None ? -1 : channel_index(edge.sync.channel);
      for (const Reset& r : edge.resets) {
        int slot = ha.local_clock && r.target == *ha.local_clock ? layout.clock_slot(a)
                                                                  : layout.variable_slot(r.target);
        ce.resets.emplace_back(slot, compile(r.value, layout, a));
      }
      ce.weight = edge.weight;
      if (ce.sync != SyncKind::Receive) ca.locations[ce.source].local_edges.push_back(e);
      ca.edges.push_back(std::move(ce));
      labels.push_back(edge.source + "->" + edge.target);
    }
    ca.initial = ha.location_index(ha.initial_location);
    automata_.push_back(std::move(ca));
    schema->edge_labels.push_back(std::move(labels));
  }

  name_order_.resize(m.automata.size());
  std::iota(name_order_.begin(), name_order_.end(), 0);
  std::stable_sort(name_order_.begin(), name_order_.end(), [&](int x, int y) {
    return m.automata[x].name < m.automata[y].name;
  });

  receivers_.resize(m.channels.size());
  for (int a : name_order_) {
    for (int e = 0; e < static_cast<int>(automata_[a].edges.size()); ++e) {
      const CEdge& ce = automata_[a].edges[e];
      if (ce.sync == SyncKind::Receive) receivers_[ce.channel].push_back({a, e});
    }
  }
  schema_ = std::move(schema);
}

Configuration Network::initial_configuration() const {
  Configuration c;
  for (const auto& ca : automata_) c.locations.push_back(ca.initial);
  for (const auto& v : model_->variables) c.values.push_back(v.initial);
  c.values.resize(layout().slot_count(), 0.0);
  return c;
}

Configuration initial_configuration(const NetworkModel& model) {
  return Network(model).initial_configuration();
}

// ---------------------------------------------------------------- integration

namespace detail {

Integrator::Integrator(const Network& net) : net_(&net) {
  const SlotLayout& layout = net.layout();
  size_t n = layout.slot_count();
  base_dy_.assign(n, 0.0);
  for (size_t i = layout.variable_count(); i < n; ++i) base_dy_[i] = 1.0;
  k1_.resize(n);
  k2_.resize(n);
  k3_.resize(n);
  k4_.resize(n);
  tmp_.resize(n);
}

void Integrator::select(std::span<const int> locations, std::span<const double> y) {
  locations_.assign(locations.begin(), locations.end());
  active_.clear();
  const auto& automata = net_->automata();
  for (size_t a = 0; a < automata.size(); ++a) {
    for (const auto& f : automata[a].locations[locations_[a]].flows) {
      if (!f.gate || f.gate->test(y, locations_)) active_.push_back(&f);
    }
  }
}

void Integrator::derivative(std::span<const double> y, std::span<double> dy) const {
  std::copy(base_dy_.begin(), base_dy_.end(), dy.begin());
  for (const auto* f : active_) dy[f->slot] = f->rhs.eval(y, locations_);
}

void Integrator::step(std::span<const double> y0, double s, std::span<double> out) {
  const size_t n = base_dy_.size();
  derivative(y0, k1_);
  for (size_t i = 0; i < n; ++i) tmp_[i] = y0[i] + 0.5 * s * k1_[i];
  derivative(tmp_, k2_);
  for (size_t i = 0; i < n; ++i) tmp_[i] = y0[i] + 0.5 * s * k2_[i];
  derivative(tmp_, k3_);
  for (size_t i = 0; i < n; ++i) tmp_[i] = y0[i] + s * k3_[i];
  derivative(tmp_, k4_);
  for (size_t i = 0; i < n; ++i) {
    out[i] = y0[i] + s * ((k1_[i] + 2.0 * k2_[i] + 2.0 * k3_[i] + k4_[i]) / 6.0);
  }
}

}  // namespace detail

Configuration integrate_step(const Network& net, const Configuration& config, double h) {
  if (!(h > 0.0)) throw PreconditionError("step must be positive");
  detail::Integrator integ(net);
  integ.select(config.locations, config.values);
  Configuration out = config;
  integ.step(config.values, h, out.values);
  out.time = config.time + h;
  check_finite(out.values, net.layout(), out.time);
  return out;
}

Crossing locate_boundary(const Network& net, const Configuration& before,
                         const Configuration& after, const Expr& predicate, double tol_evt,
                         int owner) {
  if (before.locations != after.locations) {
    throw PreconditionError("bracket spans a location change");
  }
  if (!(after.time >= before.time)) throw PreconditionError("bracket is reversed");
  if (!(tol_evt > 0.0)) throw PreconditionError("event tolerance must be positive");
  CompiledExpr p = compile(predicate, net.layout(), owner);
  if (p.test(before.values, before.locations)) return {before.time, before.time};
  if (!p.test(after.values, after.locations)) {
    throw PreconditionError("predicate does not change within the bracket");
  }
  detail::Integrator integ(net);
  integ.select(before.locations, before.values);
  std::vector<double> y(before.values.size());
  double lo = 0.0;
  double hi = after.time - before.time;
  int iter = 0;
  while (hi - lo >= tol_evt) {
    if (++iter > kMaxBisection) {
      throw SimulationError(fmt::format("boundary bisection did not converge near t={}",
                                        before.time + lo));
    }
    double mid = lo + 0.5 * (hi - lo);
    integ.step(before.values, mid, y);
    if (p.test(y, before.locations)) {
      hi = mid;
    } else {
      lo = mid;
    }
  }
  return {before.time + lo, before.time + hi};
}

double exponential_delay(double rate, double u) { return -std::log(u) / rate; }

double sample_delay(const StochasticPolicy& policy, Rng& rng) {
  if (policy.kind == StochasticPolicy::Kind::Eager) return kInf;
  return exponential_delay(policy.rate, rng.uniform_open_closed());
}

// ---------------------------------------------------------------- Run

Run::Run(const Network& net, const SimConfig& config)
    : Run(net, config, net.initial_configuration()) {}

Run::Run(const Network& net, const SimConfig& config, Configuration start)
    : net_(net), cfg_(config), rng_(config.seed), state_(std::move(start)), integ_(net) {
  cfg_.check();
  const SlotLayout& layout = net.layout();
  if (state_.locations.size() != layout.automata.size() ||
      state_.values.size() != layout.slot_count()) {
    throw PreconditionError("configuration does not match the network");
  }
  if (state_.time < 0.0) throw PreconditionError("configuration time is negative");
  segment_start_ = state_.time;
  deadlines_.assign(layout.automata.size(), kInf);
  for (size_t a = 0; a < deadlines_.size(); ++a) resample(static_cast<int>(a));
  size_t n = layout.slot_count();
  y1_.resize(n);
  ylo_.resize(n);
  yhi_.resize(n);
  ymid_.resize(n);
  trace_.schema = net.schema();
  trace_.horizon = cfg_.horizon;
  record_sample();
}

void Run::set_observer(RunObserver observer) { observer_ = std::move(observer); }

bool Run::notify() {
  return observer_ && observer_(state_.time, state_.locations, state_.values);
}

void Run::record_sample() {
  if (!recording_) return;
  auto& samples = trace_.samples;
  if (!samples.empty() && samples.back().time == state_.time) {
    samples.back().locations = state_.locations;
    samples.back().values = state_.values;
  } else {
    samples.push_back({state_.time, state_.locations, state_.values});
  }
}

void Run::finish() {
  finished_ = true;
  record_sample();
  trace_.end_time = state_.time;
}

void Run::terminate(EventKind kind, std::vector<Event>& out) {
  Event ev;
  ev.time = state_.time;
  ev.kind = kind;
  ev.locations = state_.locations;
  ev.values = state_.values;
  if (recording_) trace_.events.push_back(ev);
  out.push_back(std::move(ev));
  trace_.terminated = true;
  notify();
  finish();
}

Trace Run::take_trace() {
  if (!finished_) trace_.end_time = state_.time;
  return std::move(trace_);
}

void Run::resample(int a) {
  const auto& loc = net_.automata()[a].locations[state_.locations[a]];
  deadlines_[a] = state_.time + sample_delay(loc.dwell, rng_);
}

std::vector<int> Run::enabled_local(int a, std::span<const double> view) const {
  std::vector<int> out;
  const auto& ca = net_.automata()[a];
  for (int e : ca.locations[state_.locations[a]].local_edges) {
    const auto& guard = ca.edges[e].guard;
    if (!guard || guard->test(view, state_.locations)) out.push_back(e);
  }
  return out;
}

bool Run::invariant_holds(int a, std::span<const double> view) const {
  const auto& inv = net_.automata()[a].locations[state_.locations[a]].invariant;
  return !inv || inv->test(view, state_.locations);
}

int Run::pick(const std::vector<double>& weights) {
  if (weights.size() == 1) return 0;
  double total = std::accumulate(weights.begin(), weights.end(), 0.0);
  double u = rng_.uniform() * total;
  double acc = 0.0;
  for (size_t i = 0; i < weights.size(); ++i) {
    acc += weights[i];
    if (u < acc) return static_cast<int>(i);
  }
  return static_cast<int>(weights.size()) - 1;
}

std::vector<Event> Run::fire(int a, int edge, std::span<const double> choice_view) {
  const auto& automata = net_.automata();
  const Network::CEdge& e = automata[a].edges[edge];

  int ra = -1;
  int re = -1;
  if (e.sync == SyncKind::Emit) {
    std::vector<Network::EdgeRef> candidates;
    std::vector<double> weights;
    for (const auto& r : net_.receivers(e.channel)) {
      if (r.automaton == a) continue;
      const auto& x = automata[r.automaton].edges[r.edge];
      if (state_.locations[r.automaton] != x.source) continue;
      if (x.guard && !x.guard->test(choice_view, state_.locations)) continue;
      candidates.push_back(r);
      weights.push_back(x.weight);
    }
    if (!candidates.empty()) {
      const auto& chosen = candidates[pick(weights)];
      ra = chosen.automaton;
      re = chosen.edge;
    }
  }

  // right-hand sides see the pre-transition state
  std::vector<std::pair<int, double>> assigns;
  for (const auto& [slot, expr] : e.resets) {
    assigns.emplace_back(slot, expr.eval(state_.values, state_.locations));
  }
  if (ra >= 0) {
    for (const auto& [slot, expr] : automata[ra].edges[re].resets) {
      assigns.emplace_back(slot, expr.eval(state_.values, state_.locations));
    }
  }

  const SlotLayout& layout = net_.layout();
  auto move = [&](int who, int target) {
    if (state_.locations[who] != target) {
      state_.locations[who] = target;
      state_.values[layout.clock_slot(who)] = 0.0;
    }
  };
  move(a, e.target);
  if (ra >= 0) move(ra, automata[ra].edges[re].target);
  for (const auto& [slot, v] : assigns) state_.values[slot] = v;
  check_finite(state_.values, layout, state_.time);

  resample(a);
  if (ra >= 0) resample(ra);
  watches_valid_ = false;
  segment_start_ = state_.time;
  segment_steps_ = 0;

  std::vector<Event> out;
  out.push_back({state_.time, EventKind::Transition, a, edge, e.channel, state_.locations,
                 state_.values});
  if (ra >= 0) {
    out.push_back({state_.time, EventKind::Transition, ra, re, e.channel, state_.locations,
                   state_.values});
  }
  return out;
}

std::vector<Event> Run::try_immediate() {
  const auto& automata = net_.automata();
  std::span<const double> view = state_.values;
  for (int a : net_.name_order()) {
    const auto& ca = automata[a];
    const auto& loc = ca.locations[state_.locations[a]];
    bool inv_ok = invariant_holds(a, view);
    bool due = deadlines_[a] <= state_.time;
    if (!inv_ok || due || loc.dwell.kind == StochasticPolicy::Kind::Eager) {
      auto enabled = enabled_local(a, view);
      if (!enabled.empty()) {
        std::vector<double> w;
        for (int e : enabled) w.push_back(ca.edges[e].weight);
        return fire(a, enabled[pick(w)], view);
      }
      if (!inv_ok) {
        std::vector<Event> out;
        terminate(EventKind::Timelock, out);
        return out;
      }
      if (due) resample(a);
      continue;
    }
    std::vector<int> urgent;
    std::vector<double> w;
    for (int e : loc.local_edges) {
      const auto& edge = ca.edges[e];
      if (edge.sync != SyncKind::Emit || !net_.urgent(edge.channel)) continue;
      if (edge.guard && !edge.guard->test(view, state_.locations)) continue;
      urgent.push_back(e);
      w.push_back(edge.weight);
    }
    if (!urgent.empty()) return fire(a, urgent[pick(w)], view);
  }
  return {};
}

bool Run::frozen() const {
  for (double d : deadlines_) {
    if (d < kInf) return false;
  }
  const auto& automata = net_.automata();
  for (size_t a = 0; a < automata.size(); ++a) {
    const auto& ca = automata[a];
    const auto& loc = ca.locations[state_.locations[a]];
    if (loc.invariant && loc.invariant->uses_clock()) return false;
    for (int e : loc.local_edges) {
      if (ca.edges[e].guard && ca.edges[e].guard->uses_clock()) return false;
    }
    for (const auto& f : loc.flows) {
      if (f.gate) {
        if (f.gate->uses_clock()) return false;
        if (!f.gate->test(state_.values, state_.locations)) continue;
      }
      if (f.rhs.uses_clock()) return false;
      if (f.rhs.eval(state_.values, state_.locations) != 0.0) return false;
    }
  }
  return true;
}

void Run::rebuild_watches() {
  watches_.clear();
  const auto& automata = net_.automata();
  for (size_t i = 0; i < automata.size(); ++i) {
    int a = static_cast<int>(i);
    const auto& ca = automata[a];
    const auto& loc = ca.locations[state_.locations[a]];
    if (loc.invariant) watches_.push_back({Watch::Invariant, a, &*loc.invariant});
    if (loc.dwell.kind == StochasticPolicy::Kind::Eager) {
      for (int e : loc.local_edges) {
        if (ca.edges[e].guard) watches_.push_back({Watch::Guard, a, &*ca.edges[e].guard});
      }
    }
    for (const auto& f : loc.flows) {
      if (f.gate) watches_.push_back({Watch::Gate, a, &*f.gate});
    }
  }
  watches_valid_ = true;
}

void Run::eval_watches(std::span<const double> y, std::vector<char>& out) const {
  out.resize(watches_.size());
  for (size_t i = 0; i < watches_.size(); ++i) {
    out[i] = watches_[i].expr->test(y, state_.locations) ? 1 : 0;
  }
}

std::optional<std::vector<Event>> Run::advance() {
  double t = state_.time;
  double target = cfg_.horizon;
  for (double d : deadlines_) target = std::min(target, d);
  if (target <= t) return std::nullopt;

  double next_grid = segment_start_ + static_cast<double>(segment_steps_ + 1) * cfg_.step;
  bool land = next_grid >= target - 1e-9 * cfg_.step;
  double s = land ? target - t : next_grid - t;

  if (!watches_valid_) rebuild_watches();
  integ_.select(state_.locations, state_.values);
  eval_watches(state_.values, w0_);
  integ_.step(state_.values, s, y1_);
  check_finite(y1_, net_.layout(), t + s);
  eval_watches(y1_, w1_);

  if (w0_ == w1_) {
    std::copy(y1_.begin(), y1_.end(), state_.values.begin());
    ++total_steps_;
    if (land) {
      state_.time = target;
      segment_start_ = target;
      segment_steps_ = 0;
    } else {
      state_.time = next_grid;
      ++segment_steps_;
    }
    if (state_.time >= cfg_.horizon) {
      notify();
      finish();
      return std::vector<Event>{};
    }
    if (total_steps_ % cfg_.sample_stride == 0) record_sample();
    if (notify()) {
      finish();
      return std::vector<Event>{};
    }
    return std::nullopt;
  }

  // something flips inside the step: bracket it
  std::copy(state_.values.begin(), state_.values.end(), ylo_.begin());
  std::copy(y1_.begin(), y1_.end(), yhi_.begin());
  double lo = 0.0;
  double hi = s;
  int iter = 0;
  while (hi - lo >= cfg_.tol_evt) {
    if (++iter > kMaxBisection) {
      throw SimulationError(fmt::format("boundary bisection did not converge near t={}", t + lo));
    }
    double mid = lo + 0.5 * (hi - lo);
    integ_.step(state_.values, mid, ymid_);
    eval_watches(ymid_, wm_);
    if (wm_ != w0_) {
      hi = mid;
      ymid_.swap(yhi_);
      wm_.swap(w1_);
    } else {
      lo = mid;
      ymid_.swap(ylo_);
    }
  }

  std::vector<char> flagged(deadlines_.size(), 0);
  bool violated = false;
  for (size_t i = 0; i < watches_.size(); ++i) {
    if (w0_[i] == w1_[i]) continue;
    const Watch& w = watches_[i];
    if (w.kind == Watch::Invariant && !w1_[i]) {
      flagged[w.automaton] = 1;
      violated = true;
    } else if (w.kind == Watch::Guard && w1_[i]) {
      flagged[w.automaton] = 1;
    }
  }

  segment_steps_ = 0;
  for (int a : net_.name_order()) {
    if (!flagged[a]) continue;
    auto enabled = enabled_local(a, yhi_);
    if (enabled.empty()) continue;
    std::vector<double> w;
    for (int e : enabled) w.push_back(net_.automata()[a].edges[e].weight);
    int chosen = enabled[pick(w)];
    std::copy(ylo_.begin(), ylo_.end(), state_.values.begin());
    state_.time = t + lo;
    segment_start_ = state_.time;
    return fire(a, chosen, yhi_);
  }
  if (violated) {
    std::copy(ylo_.begin(), ylo_.end(), state_.values.begin());
    state_.time = t + lo;
    segment_start_ = state_.time;
    std::vector<Event> out;
    terminate(EventKind::Timelock, out);
    return out;
  }
  // only gates (or unrelated predicates) changed: move past the flip
  std::copy(yhi_.begin(), yhi_.end(), state_.values.begin());
  state_.time = t + hi;
  segment_start_ = state_.time;
  if (notify()) {
    finish();
    return std::vector<Event>{};
  }
  return std::nullopt;
}

void Run::post_events(const std::vector<Event>& events, double t0) {
  if (recording_) {
    for (const auto& e : events) trace_.events.push_back(e);
  }
  record_sample();
  if (state_.time == t0) {
    if (++idle_macro_steps_ > kMaxZeroTimeSteps) {
      throw SimulationError(
          fmt::format("more than {} transitions at t={} without time passing",
                      kMaxZeroTimeSteps, state_.time));
    }
  } else {
    idle_macro_steps_ = 0;
  }
  if (notify()) finish();
}

std::vector<Event> Run::macro_step() {
  if (finished_) return {};
  if (!started_) {
    started_ = true;
    if (notify()) {
      finish();
      return {};
    }
  }
  for (;;) {
    if (state_.time >= cfg_.horizon) {
      finish();
      return {};
    }
    double t0 = state_.time;
    auto events = try_immediate();
    if (finished_) return events;
    if (!events.empty()) {
      post_events(events, t0);
      return events;
    }
    if (frozen()) {
      std::vector<Event> out;
      terminate(EventKind::Deadlock, out);
      return out;
    }
    auto result = advance();
    if (finished_) return result ? std::move(*result) : std::vector<Event>{};
    if (result) {
      post_events(*result, t0);
      return std::move(*result);
    }
  }
}

Trace simulate(const Network& net, const SimConfig& config) {
  Run run(net, config);
  while (!run.finished()) run.macro_step();
  return run.take_trace();
}

Trace simulate(const NetworkModel& model, const SimConfig& config) {
  Network net(model);
  return simulate(net, config);
}

// ---------------------------------------------------------------- export

void write_trace_csv(const Trace& trace, std::ostream& out) {
  const SlotLayout& layout = trace.schema->layout;
  std::vector<size_t> columns;
  for (size_t i = 0; i < layout.variable_count(); ++i) {
    if (!layout.constant[i]) columns.push_back(i);
  }
  out << "time";
  for (size_t i : columns) out << ',' << layout.variables[i];
  for (const auto& a : layout.automata) out << ',' << a << ".location";
  out << '\n';
  for (const auto& s : trace.samples) {
    out << fmt::format("{:.9g}", s.time);
    for (size_t i : columns) out << fmt::format(",{:.9g}", s.values[i]);
    for (size_t a = 0; a < s.locations.size(); ++a) {
      out << ',' << layout.locations[a][s.locations[a]];
    }
    out << '\n';
  }
}

void write_events_csv(const Trace& trace, std::ostream& out) {
  const TraceSchema& schema = *trace.schema;
  out << "time,automaton,edge,channel\n";
  for (const auto& e : trace.events) {
    out << fmt::format("{:.9g}", e.time) << ',';
    switch (e.kind) {
      case EventKind::Deadlock: out << ",deadlock,"; break;
      case EventKind::Timelock: out << ",timelock,"; break;
      case EventKind::Transition:
        out << schema.layout.automata[e.automaton] << ','
            << schema.edge_labels[e.automaton][e.edge] << ','
            << (e.channel >= 0 ? schema.channels[e.channel] : std::string());
        break;
    }
    out << '\n';
  }
}

}  // namespace hysmc

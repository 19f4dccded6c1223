#include "hysmc/smc.hpp"

#include <atomic>
#include <boost/math/special_functions/beta.hpp>
#include <cctype>
#include <charconv>
#include <cmath>
#include <cstdlib>
#include <exception>
#include <thread>

#include <fmt/format.h>

#include "hysmc/dsl.hpp"

namespace hysmc {

namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();

SourcePos position_of(std::string_view text, size_t offset) {
  SourcePos pos{1, 1};
  for (size_t i = 0; i < offset && i < text.size(); ++i) {
    if (text[i] == '\n') {
      ++pos.line;
      pos.column = 1;
    } else {
      ++pos.column;
    }
  }
  return pos;
}

class PropertyScanner {
 public:
  explicit PropertyScanner(std::string_view text) : text_(text) {}

  void skip_ws() {
    while (i_ < text_.size() && std::isspace(static_cast<unsigned char>(text_[i_]))) ++i_;
  }

  void expect(std::string_view token) {
    skip_ws();
    if (text_.substr(i_, token.size()) != token) {
      throw ParseError(position_of(text_, i_),
                       i_ >= text_.size() ? "unexpected end of input"
                                          : fmt::format("unexpected '{}'", text_.substr(i_, 1)),
                       {fmt::format("'{}'", token)});
    }
    i_ += token.size();
  }

  double number() {
    skip_ws();
    size_t start = i_;
    while (i_ < text_.size() &&
           (std::isalnum(static_cast<unsigned char>(text_[i_])) || text_[i_] == '.' ||
            ((text_[i_] == '+' || text_[i_] == '-') && i_ > start &&
             (text_[i_ - 1] == 'e' || text_[i_ - 1] == 'E')))) {
      ++i_;
    }
    double value = 0.0;
    auto [ptr, ec] = std::from_chars(text_.data() + start, text_.data() + i_, value);
    if (start == i_ || ec != std::errc() || ptr != text_.data() + i_ || !std::isfinite(value)) {
      throw ParseError(position_of(text_, start), "malformed time bound", {"number"});
    }
    if (!(value > 0.0)) {
      throw ParseError(position_of(text_, start), "time bound must be positive");
    }
    return value;
  }

  size_t offset() const { return i_; }

 private:
  std::string_view text_;
  size_t i_ = 0;
};

void check_names(const Expr& e, const NetworkModel& model) {
  const auto& v = e.node().value;
  if (const auto* var = std::get_if<node::Variable>(&v)) {
    if (!model.find_variable(var->name)) {
      throw SemanticError("UNDECLARED_VAR", fmt::format("'{}' is not declared", var->name));
    }
  } else if (const auto* at = std::get_if<node::LocationAtom>(&v)) {
    const HybridAutomaton* a = model.find_automaton(at->automaton);
    if (!a) {
      throw SemanticError("UNKNOWN_AUTOMATON",
                          fmt::format("no automaton named '{}'", at->automaton));
    }
    if (!a->find_location(at->location)) {
      throw SemanticError("UNKNOWN_LOCATION",
                          fmt::format("automaton '{}' has no location '{}'", at->automaton,
                                      at->location));
    }
  } else if (std::holds_alternative<node::LocalClock>(v)) {
    throw SemanticError("UNDECLARED_VAR", "local clocks cannot appear in properties");
  } else if (const auto* u = std::get_if<node::Unary>(&v)) {
    check_names(u->operand, model);
  } else if (const auto* b = std::get_if<node::Binary>(&v)) {
    check_names(b->lhs, model);
    check_names(b->rhs, model);
  }
}

template <typename Fn>
void parallel_for(std::uint64_t n, int threads, Fn fn) {
  int workers = static_cast<int>(std::min<std::uint64_t>(std::max(threads, 1), n));
  if (workers <= 1) {
    for (std::uint64_t i = 0; i < n; ++i) fn(i);
    return;
  }
  std::atomic<std::uint64_t> next{0};
  std::vector<std::exception_ptr> errors(n);
  std::atomic<bool> failed{false};
  auto work = [&] {
    for (;;) {
      std::uint64_t i = next.fetch_add(1);
      if (i >= n || failed.load()) return;
      try {
        fn(i);
      } catch (...) {
        errors[i] = std::current_exception();
        failed.store(true);
      }
    }
  };
  std::vector<std::thread> pool;
  for (int w = 0; w < workers; ++w) pool.emplace_back(work);
  for (auto& t : pool) t.join();
  for (auto& e : errors) {
    if (e) std::rethrow_exception(e);
  }
}

void check_statistics(double epsilon, double alpha) {
  if (!(epsilon > 0.0 && epsilon < 1.0)) throw PreconditionError("epsilon must lie in (0, 1)");
  if (!(alpha > 0.0 && alpha < 1.0)) throw PreconditionError("alpha must lie in (0, 1)");
}

EstimateResult make_result(double t_s, std::uint64_t k, std::uint64_t n,
                           const SmcOptions& options) {
  EstimateResult r;
  r.t_s = t_s;
  r.k = k;
  r.n = n;
  r.p_hat = static_cast<double>(k) / static_cast<double>(n);
  Interval ci = clopper_pearson(k, n, options.alpha);
  r.ci_lo = ci.lo;
  r.ci_hi = ci.hi;
  r.epsilon = options.epsilon;
  r.alpha = options.alpha;
  r.seed = options.seed;
  return r;
}

}  // namespace

Property parse_property(std::string_view text) {
  PropertyScanner sc(text);
  Property p;
  sc.expect("Pr");
  sc.expect("[");
  sc.expect("<=");
  p.bound = sc.number();
  sc.expect("]");
  sc.expect("(");
  sc.expect("<>");
  size_t begin = sc.offset();
  size_t close = text.find_last_of(')');
  if (close == std::string_view::npos || close < begin) {
    throw ParseError(position_of(text, text.size()), "unexpected end of input", {"')'"});
  }
  for (size_t i = close + 1; i < text.size(); ++i) {
    if (!std::isspace(static_cast<unsigned char>(text[i]))) {
      throw ParseError(position_of(text, i), "unexpected text after property", {"end of input"});
    }
  }
  ExpressionOptions opts;
  opts.allow_location_atoms = true;
  try {
    p.goal = parse_expression(text.substr(begin, close - begin), opts);
  } catch (const ParseError& e) {
    SourcePos base = position_of(text, begin);
    SourcePos pos = e.pos();
    if (pos.known()) {
      if (pos.line == 1) {
        pos = {base.line, base.column + pos.column - 1};
      } else {
        pos.line += base.line - 1;
      }
    }
    throw ParseError(pos, e.detail(), e.expected());
  }
  if (check_type(p.goal) != ExprType::Boolean) {
    throw EvalError("property goal must be a boolean expression");
  }
  return p;
}

void check_goal(const Expr& goal, const NetworkModel& model) {
  check_names(goal, model);
  if (check_type(goal) != ExprType::Boolean) {
    throw EvalError("property goal must be a boolean expression");
  }
}

Property parse_property(std::string_view text, const NetworkModel& model) {
  Property p = parse_property(text);
  check_goal(p.goal, model);
  return p;
}

Expr parse_goal(std::string_view text, const NetworkModel& model) {
  ExpressionOptions opts;
  opts.allow_location_atoms = true;
  Expr goal = parse_expression(text, opts);
  check_goal(goal, model);
  return goal;
}

std::string to_string(const Property& property) {
  return fmt::format("Pr[<={}] (<> {})", property.bound, to_string(property.goal));
}

bool evaluate_on_trace(const Property& property, const Trace& trace) {
  if (!trace.schema) throw PreconditionError("trace has no schema");
  if (trace.horizon < property.bound && !trace.terminated) {
    throw PreconditionError(fmt::format("trace horizon {} is shorter than the bound {}",
                                        trace.horizon, property.bound));
  }
  CompiledExpr goal = compile(property.goal, trace.schema->layout);
  for (const auto& s : trace.samples) {
    if (s.time > property.bound) break;
    if (goal.test(s.values, s.locations)) return true;
  }
  for (const auto& e : trace.events) {
    if (e.time > property.bound) break;
    if (goal.test(e.values, e.locations)) return true;
  }
  return false;
}

std::uint64_t required_runs(double epsilon, double alpha) {
  check_statistics(epsilon, alpha);
  double x = std::log(2.0 / alpha) / (2.0 * epsilon * epsilon);
  // absorb rounding in ln() so exact integers are not bumped up
  return static_cast<std::uint64_t>(std::ceil(x - 1e-9 * std::max(1.0, x)));
}

Interval clopper_pearson(std::uint64_t k, std::uint64_t n, double alpha) {
  if (n == 0 || k > n) throw PreconditionError("need 0 <= k <= n and n > 0");
  if (!(alpha > 0.0 && alpha < 1.0)) throw PreconditionError("alpha must lie in (0, 1)");
  double kd = static_cast<double>(k);
  double nd = static_cast<double>(n);
  double lo = k == 0 ? 0.0 : boost::math::ibeta_inv(kd, nd - kd + 1.0, alpha / 2.0);
  double hi = k == n ? 1.0 : boost::math::ibeta_inv(kd + 1.0, nd - kd, 1.0 - alpha / 2.0);
  return {lo, hi};
}

int default_thread_count() {
  int hw = static_cast<int>(std::thread::hardware_concurrency());
  if (hw <= 0) hw = 1;
  if (const char* env = std::getenv("HYSMC_THREADS")) {
    int cap = std::atoi(env);
    if (cap > 0) return std::min(cap, hw);
  }
  return hw;
}

std::uint64_t run_seed(std::uint64_t master, std::uint64_t index, std::size_t bound_index,
                       bool shared) {
  std::uint64_t base = derive_seed(master, index);
  if (shared || bound_index == 0) return base;
  return derive_seed(base, bound_index);
}

double first_hit_time(const Network& net, const CompiledExpr& goal, const SimConfig& sim) {
  Run run(net, sim);
  run.set_recording(false);
  double hit = kInf;
  run.set_observer([&](double time, std::span<const int> locs, std::span<const double> values) {
    if (goal.test(values, locs)) {
      hit = time;
      return true;
    }
    return false;
  });
  while (!run.finished()) run.macro_step();
  return hit;
}

namespace {

int thread_count(const SmcOptions& options) {
  return options.threads > 0 ? options.threads : default_thread_count();
}

std::vector<double> hit_times(const Network& net, const CompiledExpr& goal, double horizon,
                              std::uint64_t n, std::size_t bound_index,
                              const SmcOptions& options) {
  std::vector<double> hits(n, kInf);
  parallel_for(n, thread_count(options), [&](std::uint64_t i) {
    SimConfig sim = options.sim;
    sim.horizon = horizon;
    sim.seed = run_seed(options.seed, i, bound_index, options.share_seeds);
    try {
      hits[i] = first_hit_time(net, goal, sim);
    } catch (const Error& e) {
      throw SimulationError(fmt::format("run {} (seed {}): {}", i, sim.seed, e.what()));
    }
  });
  return hits;
}

}  // namespace

EstimateResult estimate_probability(const Network& net, const Property& property,
                                    const SmcOptions& options) {
  auto results = sweep(net, property.goal, {property.bound}, options);
  return results.front();
}

EstimateResult estimate_probability(const NetworkModel& model, const Property& property,
                                    const SmcOptions& options) {
  Network net(model);
  return estimate_probability(net, property, options);
}

std::vector<EstimateResult> sweep(const Network& net, const Expr& goal,
                                  const std::vector<double>& bounds, const SmcOptions& options) {
  if (bounds.empty()) throw PreconditionError("no bounds given");
  for (size_t j = 0; j < bounds.size(); ++j) {
    if (!(bounds[j] > 0.0) || !std::isfinite(bounds[j])) {
      throw PreconditionError("bounds must be positive and finite");
    }
    if (j > 0 && !(bounds[j] > bounds[j - 1])) {
      throw PreconditionError("bounds must be strictly increasing");
    }
  }
  check_goal(goal, net.model());
  std::uint64_t n = required_runs(options.epsilon, options.alpha);
  CompiledExpr compiled = compile(goal, net.layout());

  std::vector<EstimateResult> out;
  if (options.share_seeds) {
    auto hits = hit_times(net, compiled, bounds.back(), n, 0, options);
    for (double b : bounds) {
      std::uint64_t k = 0;
      for (double h : hits) k += h <= b ? 1 : 0;
      out.push_back(make_result(b, k, n, options));
    }
  } else {
    for (size_t j = 0; j < bounds.size(); ++j) {
      auto hits = hit_times(net, compiled, bounds[j], n, j, options);
      std::uint64_t k = 0;
      for (double h : hits) k += h <= bounds[j] ? 1 : 0;
      out.push_back(make_result(bounds[j], k, n, options));
    }
  }
  return out;
}

std::vector<EstimateResult> sweep(const NetworkModel& model, const Expr& goal,
                                  const std::vector<double>& bounds, const SmcOptions& options) {
  Network net(model);
  return sweep(net, goal, bounds, options);
}

}  // namespace hysmc

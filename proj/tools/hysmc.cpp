// hysmc command line: validate, simulate, check, sweep, replay.

#include <CLI11.hpp>
#include <fmt/core.h>
#include <unistd.h>

#include <chrono>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <json.hpp>
#include <sstream>

#include "hysmc/casestudy.hpp"
#include "hysmc/dsl.hpp"
#include "hysmc/smc.hpp"

#ifndef HYSMC_VERSION
#define HYSMC_VERSION "0.0.0"
#endif

using json = nlohmann::ordered_json;
namespace fs = std::filesystem;
using namespace hysmc;

namespace {

constexpr int kOk = 0;
constexpr int kDomain = 1;
constexpr int kUsage = 2;

struct UsageError : std::runtime_error {
  using std::runtime_error::runtime_error;
};
struct IoError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

std::string read_text(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError(fmt::format("cannot read '{}'", path));
  std::stringstream ss;
  ss << in.rdbuf();
  if (in.bad()) throw IoError(fmt::format("error while reading '{}'", path));
  return ss.str();
}

std::uint64_t fnv1a(std::string_view s) {
  std::uint64_t h = 0xcbf29ce484222325ull;
  for (unsigned char c : s) {
    h ^= c;
    h *= 0x100000001b3ull;
  }
  return h;
}

struct LoadedModel {
  NetworkModel model;
  std::string text;  // canonical text, hashed into the manifest
};

std::optional<NetworkModel> builtin(const std::string& name) {
  if (name == "scenario") return build_scenario();
  if (name == "scenario-controller") return build_fatigue_aware_scenario();
  return std::nullopt;
}

LoadedModel load_model(const std::string& source) {
  if (auto m = builtin(source)) return {*m, pretty_print(*m)};
  std::string text = read_text(source);
  NetworkModel m = parse_model(text);
  return {m, pretty_print(m)};
}

// Outputs are staged next to their destination and renamed together at the end.
class Staged {
 public:
  ~Staged() {
    for (const auto& [tmp, dst] : files_) {
      std::error_code ec;
      fs::remove(tmp, ec);
    }
  }

  std::ofstream open(const std::string& path) {
    std::string tmp = fmt::format("{}.tmp{}", path, static_cast<long>(::getpid()));
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    if (!out) throw IoError(fmt::format("cannot write '{}'", path));
    files_.emplace_back(tmp, path);
    return out;
  }

  void write(const std::string& path, const std::string& content) {
    auto out = open(path);
    out << content;
    out.close();
    if (!out) throw IoError(fmt::format("cannot write '{}'", path));
  }

  void commit() {
    for (const auto& [tmp, dst] : files_) {
      std::error_code ec;
      fs::rename(tmp, dst, ec);
      if (ec) throw IoError(fmt::format("cannot move output into place at '{}': {}", dst, ec.message()));
    }
    files_.clear();
  }

 private:
  std::vector<std::pair<std::string, std::string>> files_;
};

std::string num(double x) { return fmt::format("{:.9g}", x); }

struct Common {
  std::string model;
  std::optional<std::uint64_t> seed;
  std::string out;
  double step = 0.1;
  double tol_evt = 1e-6;
};

std::uint64_t pick_seed(const Common& c, std::string& source) {
  if (c.seed) {
    source = "cli";
    return *c.seed;
  }
  source = "entropy";
  return entropy_seed();
}

void check_sim_options(double step, double tol_evt) {
  if (!(step > 0) || !std::isfinite(step)) throw UsageError("--step must be positive");
  if (!(tol_evt > 0) || !(tol_evt < step)) throw UsageError("--tol-evt must lie in (0, step)");
}

// Args that reproduce a run; `--out` is appended by the caller when relevant.
json manifest(const std::string& command, const Common& c, const LoadedModel& m,
              std::uint64_t seed, const std::string& seed_source, json options,
              std::vector<std::string> replay_args, json outputs, double wall) {
  json j;
  j["command"] = command;
  j["model"] = c.model;
  j["model_digest"] = fmt::format("{:016x}", fnv1a(m.text));
  j["options"] = std::move(options);
  j["seed"] = seed;
  j["seed_source"] = seed_source;
  j["version"] = HYSMC_VERSION;
  j["wall_time_s"] = wall;
  j["outputs"] = std::move(outputs);
  j["replay_args"] = std::move(replay_args);
  return j;
}

double seconds_since(std::chrono::steady_clock::time_point t0) {
  return std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
}

// ------------------------------------------------------------------ commands

int cmd_validate(const std::string& source) {
  NetworkModel m;
  if (auto b = builtin(source)) {
    m = *b;
  } else {
    std::string text = read_text(source);
    try {
      m = parse_model(text);
    } catch (const ParseError& e) {
      std::cout << fmt::format("{}: syntax error at {}\n", source, e.what());
      return kDomain;
    } catch (const ModelError& e) {
      std::cout << e.report().to_string();
      std::cout << fmt::format("{}: {} error(s)\n", source, e.report().errors().size());
      return kDomain;
    }
  }
  ValidationReport r = validate_network(m);
  std::cout << r.to_string();
  std::cout << fmt::format("{}: {} error(s), {} warning(s)\n", source, r.errors().size(),
                           r.warnings().size());
  return r.ok() ? kOk : kDomain;
}

struct SimulateArgs {
  Common c;
  double horizon = 0;
  int stride = 10;
};

int cmd_simulate(const SimulateArgs& a) {
  auto t0 = std::chrono::steady_clock::now();
  if (!(a.horizon > 0) || !std::isfinite(a.horizon)) throw UsageError("--horizon must be positive");
  if (a.stride < 1) throw UsageError("--stride must be at least 1");
  check_sim_options(a.c.step, a.c.tol_evt);
  if (a.c.out.empty()) throw UsageError("--out is required");
  LoadedModel m = load_model(a.c.model);

  std::string seed_source;
  std::uint64_t seed = pick_seed(a.c, seed_source);
  SimConfig cfg;
  cfg.horizon = a.horizon;
  cfg.step = a.c.step;
  cfg.tol_evt = a.c.tol_evt;
  cfg.sample_stride = a.stride;
  cfg.seed = seed;
  Trace tr = simulate(m.model, cfg);

  Staged staged;
  std::string trace_path = a.c.out + "_trace.csv";
  std::string events_path = a.c.out + "_events.csv";
  {
    auto out = staged.open(trace_path);
    write_trace_csv(tr, out);
    out.close();
    if (!out) throw IoError("cannot write " + trace_path);
  }
  {
    auto out = staged.open(events_path);
    write_events_csv(tr, out);
    out.close();
    if (!out) throw IoError("cannot write " + events_path);
  }
  json options = {{"horizon", a.horizon},
                  {"step", a.c.step},
                  {"tol_evt", a.c.tol_evt},
                  {"stride", a.stride}};
  std::vector<std::string> replay = {"simulate",   a.c.model,          "--horizon", num(a.horizon),
                                     "--step",     num(a.c.step),      "--tol-evt", num(a.c.tol_evt),
                                     "--stride",   std::to_string(a.stride), "--seed",
                                     std::to_string(seed)};
  json j = manifest("simulate", a.c, m, seed, seed_source, options, replay,
                    json::array({trace_path, events_path}), seconds_since(t0));
  staged.write(a.c.out + "_manifest.json", j.dump(2) + "\n");
  staged.commit();
  std::cerr << fmt::format("simulated {} s: {} samples, {} events, seed {}\n", tr.end_time,
                           tr.samples.size(), tr.events.size(), seed);
  return kOk;
}

struct SmcArgs {
  Common c;
  double epsilon = 0.05;
  double alpha = 0.05;
  int threads = 0;
};

SmcOptions smc_options(const SmcArgs& a, std::uint64_t seed) {
  if (!(a.epsilon > 0 && a.epsilon < 1)) throw UsageError("--epsilon must lie in (0, 1)");
  if (!(a.alpha > 0 && a.alpha < 1)) throw UsageError("--alpha must lie in (0, 1)");
  if (a.threads < 0) throw UsageError("--threads must not be negative");
  check_sim_options(a.c.step, a.c.tol_evt);
  SmcOptions o;
  o.epsilon = a.epsilon;
  o.alpha = a.alpha;
  o.seed = seed;
  o.threads = a.threads;
  o.sim.step = a.c.step;
  o.sim.tol_evt = a.c.tol_evt;
  return o;
}

std::vector<std::string> smc_replay_args(const std::string& command, const SmcArgs& a,
                                         std::uint64_t seed) {
  return {command,   a.c.model,       "--epsilon", num(a.epsilon), "--alpha",
          num(a.alpha), "--step",      num(a.c.step), "--tol-evt", num(a.c.tol_evt),
          "--seed",  std::to_string(seed)};
}

json smc_manifest_options(const SmcArgs& a) {
  return {{"epsilon", a.epsilon}, {"alpha", a.alpha}, {"step", a.c.step}, {"tol_evt", a.c.tol_evt},
          {"threads", a.threads}};
}

json result_json(const EstimateResult& r) {
  json j;
  j["t_s"] = r.t_s;
  j["p_hat"] = r.p_hat;
  j["ci_lo"] = r.ci_lo;
  j["ci_hi"] = r.ci_hi;
  j["k"] = r.k;
  j["N"] = r.n;
  j["epsilon"] = r.epsilon;
  j["alpha"] = r.alpha;
  j["seed"] = r.seed;
  return j;
}

struct CheckArgs {
  SmcArgs s;
  std::string prop;
};

int cmd_check(const CheckArgs& a) {
  auto t0 = std::chrono::steady_clock::now();
  LoadedModel m = load_model(a.s.c.model);
  Property p = parse_property(a.prop, m.model);
  std::string seed_source;
  std::uint64_t seed = pick_seed(a.s.c, seed_source);
  EstimateResult r = estimate_probability(m.model, p, smc_options(a.s, seed));
  std::string body = result_json(r).dump() + "\n";
  std::cout << body;
  if (!a.s.c.out.empty()) {
    Staged staged;
    std::string result_path = a.s.c.out + "_result.json";
    staged.write(result_path, body);
    auto replay = smc_replay_args("check", a.s, seed);
    replay.insert(replay.end(), {"--prop", a.prop});
    json options = smc_manifest_options(a.s);
    options["prop"] = a.prop;
    json j = manifest("check", a.s.c, m, seed, seed_source, options, replay,
                      json::array({result_path}), seconds_since(t0));
    staged.write(a.s.c.out + "_manifest.json", j.dump(2) + "\n");
    staged.commit();
  }
  return kOk;
}

std::vector<double> parse_bounds(const std::string& text) {
  std::vector<std::string> parts;
  std::stringstream ss(text);
  std::string item;
  while (std::getline(ss, item, ':')) parts.push_back(item);
  if (!text.empty() && text.back() == ':') parts.push_back("");
  auto number = [&](const std::string& s) {
    size_t used = 0;
    double v = 0;
    try {
      v = std::stod(s, &used);
    } catch (const std::exception&) {
      throw UsageError(fmt::format("bad --bounds '{}': expected start:stop:step", text));
    }
    if (used != s.size() || !std::isfinite(v)) {
      throw UsageError(fmt::format("bad --bounds '{}': expected start:stop:step", text));
    }
    return v;
  };
  if (parts.size() == 1) {
    double v = number(parts[0]);
    if (!(v > 0)) throw UsageError("--bounds must be positive");
    return {v};
  }
  if (parts.size() != 3) {
    throw UsageError(fmt::format("bad --bounds '{}': expected start:stop:step", text));
  }
  double start = number(parts[0]), stop = number(parts[1]), step = number(parts[2]);
  if (!(start > 0)) throw UsageError("--bounds start must be positive");
  if (!(step > 0)) throw UsageError("--bounds step must be positive");
  if (stop < start) throw UsageError("--bounds stop must not be below start");
  std::vector<double> out;
  for (long i = 0;; ++i) {
    double b = start + static_cast<double>(i) * step;
    if (b > stop + 1e-9 * step) break;
    out.push_back(b);
    if (out.size() > 1000000) throw UsageError("--bounds describes too many points");
  }
  return out;
}

struct SweepArgs {
  SmcArgs s;
  std::string goal;
  std::string bounds;
  bool no_share = false;
};

int cmd_sweep(const SweepArgs& a) {
  auto t0 = std::chrono::steady_clock::now();
  std::vector<double> bounds = parse_bounds(a.bounds);
  LoadedModel m = load_model(a.s.c.model);
  Expr goal = parse_goal(a.goal, m.model);
  std::string seed_source;
  std::uint64_t seed = pick_seed(a.s.c, seed_source);
  SmcOptions o = smc_options(a.s, seed);
  o.share_seeds = !a.no_share;
  auto results = sweep(m.model, goal, bounds, o);

  std::string csv = "t_s,p_hat,ci_lo,ci_hi,k,N\n";
  for (const auto& r : results) {
    csv += fmt::format("{},{},{},{},{},{}\n", num(r.t_s), num(r.p_hat), num(r.ci_lo),
                       num(r.ci_hi), r.k, r.n);
  }
  if (a.s.c.out.empty()) {
    std::cout << csv;
    return kOk;
  }
  Staged staged;
  std::string csv_path = a.s.c.out + "_sweep.csv";
  staged.write(csv_path, csv);
  auto replay = smc_replay_args("sweep", a.s, seed);
  replay.insert(replay.end(), {"--prop-goal", a.goal, "--bounds", a.bounds});
  if (a.no_share) replay.push_back("--no-share-seeds");
  json options = smc_manifest_options(a.s);
  options["prop_goal"] = a.goal;
  options["bounds"] = a.bounds;
  options["share_seeds"] = !a.no_share;
  json j = manifest("sweep", a.s.c, m, seed, seed_source, options, replay, json::array({csv_path}),
                    seconds_since(t0));
  staged.write(a.s.c.out + "_manifest.json", j.dump(2) + "\n");
  staged.commit();
  std::cerr << fmt::format("wrote {} ({} bounds, {} runs each, seed {})\n", csv_path,
                           results.size(), results.empty() ? 0 : results.front().n, seed);
  return kOk;
}

int run(std::vector<std::string> args);

int cmd_replay(const std::string& path, const std::string& out_override) {
  json j;
  try {
    j = json::parse(read_text(path));
  } catch (const json::exception& e) {
    throw IoError(fmt::format("'{}' is not a manifest: {}", path, e.what()));
  }
  if (!j.contains("replay_args") || !j["replay_args"].is_array()) {
    throw IoError(fmt::format("'{}' has no replay_args", path));
  }
  std::vector<std::string> args = j["replay_args"].get<std::vector<std::string>>();
  if (args.empty() || args[0] == "replay") throw IoError("manifest cannot be replayed");
  std::string out = out_override;
  if (out.empty()) {
    std::string p = fs::path(path).string();
    const std::string suffix = "_manifest.json";
    if (p.size() > suffix.size() && p.compare(p.size() - suffix.size(), suffix.size(), suffix) == 0) {
      out = p.substr(0, p.size() - suffix.size());
    }
  }
  if (!out.empty()) args.insert(args.end(), {"--out", out});

  // file models are checked against the recorded digest
  std::string model = j.value("model", "");
  if (!builtin(model) && j.contains("model_digest")) {
    try {
      LoadedModel m = load_model(model);
      if (fmt::format("{:016x}", fnv1a(m.text)) != j["model_digest"].get<std::string>()) {
        std::cerr << fmt::format("warning: '{}' changed since the manifest was written\n", model);
      }
    } catch (const std::exception&) {
      // reported by the replayed command
    }
  }
  return run(args);
}

int run(std::vector<std::string> args) {
  CLI::App app{"hysmc: hybrid automata simulation and statistical model checking"};
  app.set_version_flag("--version", std::string(HYSMC_VERSION));
  app.require_subcommand(0, 1);

  std::string dump;
  app.add_option("--dump-model", dump, "Print a builtin model (scenario, scenario-controller) as DSL text");
  std::string dump_out;
  app.add_option("--dump-out", dump_out, "Write --dump-model output to this file");

  auto add_common = [](CLI::App* sub, Common& c, bool with_out) {
    sub->add_option("model", c.model, "Model file or builtin name (scenario, scenario-controller)")
        ->required();
    sub->add_option("--seed", c.seed, "Master seed (drawn from entropy when absent)");
    sub->add_option("--step", c.step, "Integration step");
    sub->add_option("--tol-evt", c.tol_evt, "Event localisation tolerance");
    if (with_out) sub->add_option("--out", c.out, "Output prefix");
  };

  std::string validate_model;
  auto* v = app.add_subcommand("validate", "Check a model and list errors and warnings");
  v->add_option("model", validate_model, "Model file or builtin name")->required();

  SimulateArgs sim;
  auto* s = app.add_subcommand("simulate", "Simulate one run and write trace CSVs");
  add_common(s, sim.c, true);
  s->add_option("--horizon", sim.horizon, "Simulated time")->required();
  s->add_option("--stride", sim.stride, "Sample every N integration steps");

  auto add_smc = [&](CLI::App* sub, SmcArgs& a) {
    add_common(sub, a.c, true);
    sub->add_option("--epsilon", a.epsilon, "Half-width of the estimate");
    sub->add_option("--alpha", a.alpha, "Error probability");
    sub->add_option("--threads", a.threads, "Worker threads (0 = automatic)");
  };

  CheckArgs chk;
  auto* c = app.add_subcommand("check", "Estimate Pr[<=t](<> goal)");
  add_smc(c, chk.s);
  c->add_option("--prop", chk.prop, "Property, e.g. \"Pr[<=7200](<> Human.passed_out)\"")->required();

  SweepArgs sw;
  auto* w = app.add_subcommand("sweep", "Estimate the property over a range of time bounds");
  add_smc(w, sw.s);
  w->add_option("--prop-goal", sw.goal, "Goal expression")->required();
  w->add_option("--bounds", sw.bounds, "start:stop:step, or a single bound")->required();
  w->add_flag("--no-share-seeds", sw.no_share, "Use independent runs for every bound");

  std::string manifest_path, replay_out;
  auto* r = app.add_subcommand("replay", "Re-run a command from its manifest");
  r->add_option("manifest", manifest_path, "Manifest JSON")->required();
  r->add_option("--out", replay_out, "Output prefix (defaults to the manifest's)");

  std::vector<std::string> reversed(args.rbegin(), args.rend());
  try {
    app.parse(reversed);
  } catch (const CLI::ParseError& e) {
    return app.exit(e) == 0 ? kOk : kUsage;
  }

  if (!dump.empty()) {
    auto m = builtin(dump);
    if (!m) throw UsageError(fmt::format("no builtin model named '{}'", dump));
    std::string text = pretty_print(*m);
    if (dump_out.empty()) {
      std::cout << text;
    } else {
      Staged staged;
      staged.write(dump_out, text);
      staged.commit();
    }
    return kOk;
  }
  if (v->parsed()) return cmd_validate(validate_model);
  if (s->parsed()) return cmd_simulate(sim);
  if (c->parsed()) return cmd_check(chk);
  if (w->parsed()) return cmd_sweep(sw);
  if (r->parsed()) return cmd_replay(manifest_path, replay_out);
  std::cout << app.help();
  return kUsage;
}

}  // namespace

int main(int argc, char** argv) {
  std::vector<std::string> args(argv + 1, argv + argc);
  try {
    return run(args);
  } catch (const UsageError& e) {
    std::cerr << "usage error: " << e.what() << "\n";
    return kUsage;
  } catch (const IoError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kUsage;
  } catch (const PreconditionError& e) {
    std::cerr << "usage error: " << e.what() << "\n";
    return kUsage;
  } catch (const ParseError& e) {
    std::cerr << "syntax error at " << e.what() << "\n";
    return kDomain;
  } catch (const Error& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kDomain;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kDomain;
  }
}

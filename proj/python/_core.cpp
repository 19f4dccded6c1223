#include <pybind11/pybind11.h>
#include <pybind11/stl.h>

#include <sstream>

#include "hysmc/casestudy.hpp"
#include "hysmc/dsl.hpp"
#include "hysmc/smc.hpp"

namespace py = pybind11;
using namespace hysmc;

namespace {

py::dict result_dict(const EstimateResult& r) {
  py::dict d;
  d["t_s"] = r.t_s;
  d["p_hat"] = r.p_hat;
  d["ci_lo"] = r.ci_lo;
  d["ci_hi"] = r.ci_hi;
  d["k"] = r.k;
  d["N"] = r.n;
  d["epsilon"] = r.epsilon;
  d["alpha"] = r.alpha;
  d["seed"] = r.seed;
  return d;
}

SmcOptions smc_options(double epsilon, double alpha, std::uint64_t seed, double step,
                       double tol_evt, int threads) {
  SmcOptions o;
  o.epsilon = epsilon;
  o.alpha = alpha;
  o.seed = seed;
  o.sim.step = step;
  o.sim.tol_evt = tol_evt;
  o.threads = threads;
  return o;
}

NetworkModel builtin(const std::string& name) {
  if (name == "scenario") return build_scenario();
  if (name == "scenario-controller") return build_fatigue_aware_scenario();
  throw PreconditionError("no builtin model named '" + name + "'");
}

}  // namespace

PYBIND11_MODULE(_core, m) {
  m.doc() = "Hybrid automata simulation and statistical model checking";

  auto base = py::register_exception<Error>(m, "HysmcError");
  py::register_exception<ParseError>(m, "ParseError", base.ptr());
  py::register_exception<ModelError>(m, "ModelError", base.ptr());
  py::register_exception<SemanticError>(m, "SemanticError", base.ptr());
  py::register_exception<PreconditionError>(m, "PreconditionError", base.ptr());
  py::register_exception<SimulationError>(m, "SimulationError", base.ptr());
  py::register_exception<EvalError>(m, "EvalError", base.ptr());

  py::class_<NetworkModel>(m, "Model")
      .def_readonly("name", &NetworkModel::name)
      .def_property_readonly("automata",
                             [](const NetworkModel& n) {
                               std::vector<std::string> out;
                               for (const auto& a : n.automata) out.push_back(a.name);
                               return out;
                             })
      .def_property_readonly("channels",
                             [](const NetworkModel& n) {
                               std::vector<std::string> out;
                               for (const auto& c : n.channels) out.push_back(c.name);
                               return out;
                             })
      .def_property_readonly("variables",
                             [](const NetworkModel& n) {
                               std::vector<std::string> out;
                               for (const auto& v : n.variables) out.push_back(v.name);
                               return out;
                             })
      .def("set_initial", &set_initial, py::arg("variable"), py::arg("value"))
      .def("__eq__", [](const NetworkModel& a, const NetworkModel& b) { return a == b; })
      .def("__str__", [](const NetworkModel& n) { return pretty_print(n); });

  m.def("parse_model", [](const std::string& text) { return parse_model(text); }, py::arg("text"));
  m.def("pretty_print", &pretty_print, py::arg("model"));
  m.def("builtin", &builtin, py::arg("name"), "'scenario' or 'scenario-controller'");
  m.def(
      "fatigue_aware_scenario",
      [](double f_high, double f_low) {
        return build_fatigue_aware_scenario({}, ControllerParams{f_high, f_low});
      },
      py::arg("f_high") = 0.9, py::arg("f_low") = 0.2);

  m.def(
      "validate",
      [](const NetworkModel& model) {
        py::list out;
        for (const auto& i : validate_network(model).issues) {
          py::dict d;
          d["severity"] = i.severity == Severity::Error ? "error" : "warning";
          d["code"] = i.code;
          d["element"] = i.element;
          d["message"] = i.message;
          out.append(d);
        }
        return out;
      },
      py::arg("model"));

  m.def(
      "simulate",
      [](const NetworkModel& model, double horizon, std::uint64_t seed, double step,
         double tol_evt, int stride) {
        SimConfig cfg;
        cfg.horizon = horizon;
        cfg.seed = seed;
        cfg.step = step;
        cfg.tol_evt = tol_evt;
        cfg.sample_stride = stride;
        Trace tr;
        {
          py::gil_scoped_release release;
          tr = simulate(model, cfg);
        }
        std::ostringstream trace, events;
        write_trace_csv(tr, trace);
        write_events_csv(tr, events);
        py::dict d;
        d["trace_csv"] = trace.str();
        d["events_csv"] = events.str();
        d["end_time"] = tr.end_time;
        d["terminated"] = tr.terminated;
        return d;
      },
      py::arg("model"), py::arg("horizon"), py::arg("seed"), py::arg("step") = 0.1,
      py::arg("tol_evt") = 1e-6, py::arg("stride") = 10,
      "One run; returns the trace and event tables as CSV text.");

  m.def(
      "check",
      [](const NetworkModel& model, const std::string& prop, double epsilon, double alpha,
         std::uint64_t seed, double step, double tol_evt, int threads) {
        Property p = parse_property(prop, model);
        EstimateResult r;
        {
          py::gil_scoped_release release;
          r = estimate_probability(model, p, smc_options(epsilon, alpha, seed, step, tol_evt, threads));
        }
        return result_dict(r);
      },
      py::arg("model"), py::arg("prop"), py::arg("epsilon") = 0.05, py::arg("alpha") = 0.05,
      py::arg("seed") = 0, py::arg("step") = 0.1, py::arg("tol_evt") = 1e-6,
      py::arg("threads") = 0);

  m.def(
      "sweep",
      [](const NetworkModel& model, const std::string& goal, const std::vector<double>& bounds,
         double epsilon, double alpha, std::uint64_t seed, bool share_seeds, double step,
         double tol_evt, int threads) {
        Expr g = parse_goal(goal, model);
        SmcOptions o = smc_options(epsilon, alpha, seed, step, tol_evt, threads);
        o.share_seeds = share_seeds;
        std::vector<EstimateResult> rs;
        {
          py::gil_scoped_release release;
          rs = sweep(model, g, bounds, o);
        }
        py::list out;
        for (const auto& r : rs) out.append(result_dict(r));
        return out;
      },
      py::arg("model"), py::arg("goal"), py::arg("bounds"), py::arg("epsilon") = 0.05,
      py::arg("alpha") = 0.05, py::arg("seed") = 0, py::arg("share_seeds") = true,
      py::arg("step") = 0.1, py::arg("tol_evt") = 1e-6, py::arg("threads") = 0);

  m.def("required_runs", &required_runs, py::arg("epsilon"), py::arg("alpha"));
  m.def(
      "clopper_pearson",
      [](std::uint64_t k, std::uint64_t n, double alpha) {
        Interval i = clopper_pearson(k, n, alpha);
        return py::make_tuple(i.lo, i.hi);
      },
      py::arg("k"), py::arg("n"), py::arg("alpha") = 0.05);
}

#include <cstdint>
#include <optional>
#include <string>

#include <pybind11/pybind11.h>
#include <pybind11/stl.h>

#include "relperf/io.hpp"
#include "relperf/parallel.hpp"

namespace py = pybind11;
using nlohmann::json;

namespace {

using Core = json (*)(const json&, std::uint64_t);

// Every entry point takes a JSON config string and returns the JSON artifact
// string the CLI would write, so the two surfaces cannot disagree.
std::string run(Core core, const std::string& config,
                std::optional<std::uint64_t> seed) {
  json cfg;
  try {
    cfg = json::parse(config);
  } catch (const json::parse_error& e) {
    throw relperf::ConfigError(std::string("config is not valid JSON: ") +
                               e.what());
  }
  const std::uint64_t s =
      relperf::effective_seed(cfg, seed ? &*seed : nullptr);
  std::string out;
  {
    py::gil_scoped_release release;  // chaos cells may fan out to threads
    out = core(cfg, s).dump();
  }
  return out;
}

void bind(py::module_& m, const char* name, Core core, const char* doc) {
  m.def(
      name,
      [core](const std::string& config, std::optional<std::uint64_t> seed) {
        return run(core, config, seed);
      },
      py::arg("config"), py::arg("seed") = py::none(), doc);
}

}  // namespace

PYBIND11_MODULE(relperf, m) {
  m.doc() =
      "Equilibria of relative-performance portfolio games on graphs and "
      "graphons. Each function takes a JSON config string (the CLI schema) "
      "and returns the JSON artifact string; seed overrides the config's.";

  py::register_exception<relperf::ConfigError>(m, "ConfigError",
                                               PyExc_ValueError);
  py::register_exception<relperf::CapabilityError>(m, "CapabilityError",
                                                   PyExc_NotImplementedError);
  py::register_exception<relperf::SolverError>(m, "SolverError",
                                               PyExc_RuntimeError);

  bind(m, "solve_finite", &relperf::run_solve_finite,
       "n-player equilibrium on an interaction graph");
  bind(m, "solve_graphon", &relperf::run_solve_graphon,
       "infinite-population equilibrium on a graphon");
  bind(m, "chaos", &relperf::run_chaos,
       "finite-vs-limit convergence experiment over an n-schedule");
  bind(m, "indifference", &relperf::run_indifference,
       "competition-indifference capital");
  bind(m, "sample_graph", &relperf::run_sample_graph,
       "draw an interaction graph from a graphon");
  bind(m, "cut_norm", &relperf::run_cut_norm,
       "cut distance between two kernels");

  m.def(
      "chaos_csv",
      [](const std::string& artifact) {
        json art;
        try {
          art = json::parse(artifact);
        } catch (const json::parse_error& e) {
          throw relperf::ConfigError(
              std::string("artifact is not valid JSON: ") + e.what());
        }
        return relperf::chaos_csv(relperf::chaos_report_from_json(
            art.contains("result") ? art.at("result") : art));
      },
      py::arg("artifact"),
      "per-cell CSV table of a chaos artifact (or its result object)");

  m.def("set_max_threads", &relperf::set_max_threads, py::arg("n"),
        "worker-thread cap for experiment cells (results do not depend on it)");
}

#include <cstdint>
#include <filesystem>
#include <iostream>
#include <sstream>
#include <string>

#include <CLI11.hpp>

#include "relperf/io.hpp"
#include "relperf/parallel.hpp"

namespace fs = std::filesystem;
using nlohmann::json;
using namespace relperf;

namespace {

struct Flags {
  std::string config_path;
  std::string out_dir = ".";
  std::string format = "json";
  std::uint64_t seed = 0;
  bool seed_given = false;
  bool verify = false;
  int threads = 1;
};

// Machine-readable failure report on stdout; the exit code carries the class.
int report_error(const std::string& kind, const std::string& message, int code) {
  std::cout << json{{"error", {{"kind", kind}, {"message", message}}}}.dump()
            << "\n";
  return code;
}

json dispatch(const std::string& cmd, const json& config, std::uint64_t seed) {
  if (cmd == "solve-finite") return run_solve_finite(config, seed);
  if (cmd == "solve-graphon") return run_solve_graphon(config, seed);
  if (cmd == "chaos") return run_chaos(config, seed);
  if (cmd == "indifference") return run_indifference(config, seed);
  if (cmd == "sample-graph") return run_sample_graph(config, seed);
  return run_cut_norm(config, seed);
}

// The per-command CSV rendition, rebuilt from the artifact itself so the two
// files can never drift apart.
std::string csv_for(const std::string& cmd, const json& artifact) {
  const json& result = artifact.at("result");
  if (cmd == "solve-finite")
    return finite_equilibrium_csv(finite_equilibrium_from_json(result));
  if (cmd == "solve-graphon") {
    const std::string method = result.at("method").get<std::string>();
    if (method == "det")
      return graphon_equilibrium_csv(
          graphon_equilibrium_from_json(result.at("equilibrium")));
    if (method == "small-time") {
      GraphonEquilibrium shaped;  // same strategy table layout
      shaped.pi = small_time_result_from_json(result.at("small_time")).pi;
      return graphon_equilibrium_csv(shaped);
    }
    const GraphonBsdeResult res = graphon_bsde_result_from_json(result.at("bsde"));
    std::ostringstream out;
    out << "label,interval,mean_field\n";
    for (int m = 0; m < res.mean_field.rows(); ++m)
      for (int k = 0; k < res.mean_field.cols(); ++k)
        out << m << ',' << k << ',' << format_double(res.mean_field(m, k))
            << '\n';
    return out.str();
  }
  if (cmd == "chaos") return chaos_csv(chaos_report_from_json(result));
  if (cmd == "indifference") {
    std::vector<std::pair<int, IndifferenceResult>> rows;
    if (result.contains("results")) {
      int i = 0;
      for (const json& r : result.at("results"))
        rows.emplace_back(i++, indifference_result_from_json(r));
    } else {
      const int agent = result.at("agent").get<int>();
      rows.emplace_back(agent,
                        indifference_result_from_json(result.at("bisection")));
      if (!result.at("closed").is_null())
        rows.emplace_back(agent,
                          indifference_result_from_json(result.at("closed")));
    }
    return indifference_csv(rows);
  }
  if (cmd == "sample-graph") {
    InteractionGraph graph;
    graph.n = result.at("n").get<int>();
    graph.beta_n = result.at("beta_n").get<double>();
    for (const json& e : result.at("edges"))
      graph.edges.emplace_back(e.at(0).get<int>(), e.at(1).get<int>());
    return edges_csv(graph);
  }
  // cut-norm
  std::ostringstream out;
  out << "value,exact\n"
      << format_double(result.at("value").get<double>()) << ','
      << (result.at("exact").get<bool>() ? "true" : "false") << '\n';
  return out.str();
}

int run(const std::string& cmd, const Flags& flags) {
  json config = load_json_file(flags.config_path);
  const std::uint64_t seed =
      effective_seed(config, flags.seed_given ? &flags.seed : nullptr);
  if (flags.verify) config["verify"] = true;

  const json artifact = dispatch(cmd, config, seed);

  std::error_code ec;
  fs::create_directories(flags.out_dir, ec);
  if (ec)
    throw ConfigError("cannot create output directory '" + flags.out_dir +
                      "': " + ec.message());
  const std::string base = (fs::path(flags.out_dir) / cmd).string();
  write_text_file(base + ".json", artifact.dump(2) + "\n");
  // chaos always emits its per-cell table; others on request
  const bool with_csv = flags.format == "csv" || cmd == "chaos";
  if (with_csv) write_text_file(base + ".csv", csv_for(cmd, artifact));

  if (cmd == "cut-norm") {
    std::cout << artifact.at("result").at("value").dump() << "\n";
  } else {
    std::cout << "wrote " << base << ".json"
              << (with_csv ? " and " + base + ".csv" : "") << "\n";
  }

  const json& result = artifact.at("result");
  if (result.is_object() && result.contains("verify_passed") &&
      !result.at("verify_passed").get<bool>())
    return report_error("solver",
                        "equilibrium verification failed: the best-response "
                        "oracle found a significant improvement (see " +
                            base + ".json)",
                        1);
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{
      "Equilibria of relative-performance portfolio games on graphs and "
      "graphons"};
  app.require_subcommand(1);

  Flags flags;
  const std::pair<const char*, const char*> commands[] = {
      {"solve-finite", "n-player equilibrium on an interaction graph"},
      {"solve-graphon", "infinite-population equilibrium on a graphon"},
      {"chaos", "finite-vs-limit convergence experiment over an n-schedule"},
      {"indifference", "competition-indifference capital"},
      {"sample-graph", "draw an interaction graph from a graphon"},
      {"cut-norm", "cut distance between two kernels"}};
  for (const auto& [name, help] : commands) {
    CLI::App* sub = app.add_subcommand(name, help);
    sub->add_option("--config", flags.config_path, "JSON run configuration")
        ->required();
    sub->add_option("--seed", flags.seed,
                    "overrides the config's seed (default 1)");
    sub->add_option("--out", flags.out_dir, "artifact directory (default .)");
    sub->add_option("--format", flags.format,
                    "json, or csv to also write <command>.csv")
        ->check(CLI::IsMember({"json", "csv"}));
    sub->add_option("--threads", flags.threads, "worker threads (default 1)")
        ->check(CLI::Range(1, 1024));
    if (std::string(name) == "solve-finite")
      sub->add_flag("--verify", flags.verify,
                    "Monte Carlo best-response check of the equilibrium");
  }

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    return 2;  // bad invocation is a config error
  }

  CLI::App* sub = app.get_subcommands().front();
  for (const CLI::Option* opt : sub->get_options())
    if (opt->get_name() == "--seed" && opt->count() > 0) flags.seed_given = true;
  set_max_threads(flags.threads);

  try {
    return run(sub->get_name(), flags);
  } catch (const ConfigError& e) {
    return report_error("config", e.what(), 2);
  } catch (const CapabilityError& e) {
    return report_error("capability", e.what(), 2);
  } catch (const SolverError& e) {
    return report_error("solver", e.what(), 1);
  } catch (const std::exception& e) {
    return report_error("internal", e.what(), 1);
  }
}

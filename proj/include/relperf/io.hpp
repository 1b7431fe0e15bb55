#pragma once

#include <cstdint>
#include <string>
#include <utility>
#include <vector>

#include <json.hpp>

#include "relperf/bsde.hpp"
#include "relperf/chaos.hpp"
#include "relperf/fixed_point.hpp"
#include "relperf/graphon_game.hpp"
#include "relperf/indifference.hpp"

namespace relperf {

// All configs are JSON objects with strict schemas: unknown keys are
// rejected and missing or mistyped fields raise ConfigError naming the
// field. Documented shapes live in the README.

nlohmann::json load_json_file(const std::string& path);
void write_text_file(const std::string& path, const std::string& content);

// ---- config parsing -------------------------------------------------------
TimeGrid time_grid_from_json(const nlohmann::json& j);
ConvexSet constraint_from_json(const nlohmann::json& j);
AgentCoeffs agent_from_json(const nlohmann::json& j);
LabelCoeffs label_coeffs_from_json(const nlohmann::json& j);
Graphon graphon_from_json(const nlohmann::json& j);
BetaRule beta_rule_from_json(const nlohmann::json& j);

// Graph specs accept explicit weights, an explicit edge list, or a
// sample-from-graphon block (which consumes the run seed).
Eigen::MatrixXd weights_from_graph_json(const nlohmann::json& j,
                                        std::uint64_t seed);

ChaosConfig chaos_config_from_json(const nlohmann::json& j, std::uint64_t seed);

// ---- result serialization (emit and parse are exact inverses) -------------
nlohmann::json to_json(const FiniteEquilibrium& eq);
FiniteEquilibrium finite_equilibrium_from_json(const nlohmann::json& j);
nlohmann::json to_json(const GraphonEquilibrium& eq);
GraphonEquilibrium graphon_equilibrium_from_json(const nlohmann::json& j);
nlohmann::json to_json(const GraphonBsdeResult& res);
GraphonBsdeResult graphon_bsde_result_from_json(const nlohmann::json& j);
nlohmann::json to_json(const SmallTimeResult& res);
SmallTimeResult small_time_result_from_json(const nlohmann::json& j);
nlohmann::json to_json(const IndifferenceResult& res);
IndifferenceResult indifference_result_from_json(const nlohmann::json& j);
nlohmann::json to_json(const ChaosReport& report);
ChaosReport chaos_report_from_json(const nlohmann::json& j);

// ---- flat CSV renditions ---------------------------------------------------
// Doubles are printed as the shortest decimal that parses back to the same
// bits (NaN as "nan"), matching the JSON artifacts digit for digit.
std::string format_double(double x);
std::string finite_equilibrium_csv(const FiniteEquilibrium& eq);
std::string graphon_equilibrium_csv(const GraphonEquilibrium& eq);
// One row per (n, rep, metric) cell: exactly schedule x reps x 4 data rows.
std::string chaos_csv(const ChaosReport& report);
// Rows are (agent or label index, result); the method column separates a
// bisection check from its closed-form companion on the same agent.
std::string indifference_csv(
    const std::vector<std::pair<int, IndifferenceResult>>& rows);
std::string edges_csv(const InteractionGraph& graph);

// ---- artifact assembly -----------------------------------------------------
std::uint64_t fnv1a64(const std::string& bytes);
// Hash of the canonical (sorted-key) config dump, prefixed by the command
// name; hex-encoded. Thread counts never enter artifacts.
std::string config_hash(const std::string& command, const nlohmann::json& config);

// Command cores shared by the CLI and the python bindings: validate the
// config, run the module, and return the full artifact
//   {"command", "config_hash", "seed", "result": {...}}.
// The seed argument is the effective run seed (CLI --seed overrides the
// config's "seed" field; both default to 1).
nlohmann::json run_solve_finite(const nlohmann::json& config, std::uint64_t seed);
nlohmann::json run_solve_graphon(const nlohmann::json& config, std::uint64_t seed);
nlohmann::json run_chaos(const nlohmann::json& config, std::uint64_t seed);
nlohmann::json run_indifference(const nlohmann::json& config, std::uint64_t seed);
nlohmann::json run_sample_graph(const nlohmann::json& config, std::uint64_t seed);
nlohmann::json run_cut_norm(const nlohmann::json& config, std::uint64_t seed);

// Resolves the effective seed: explicit CLI value wins, then the config's
// "seed" field, then 1.
std::uint64_t effective_seed(const nlohmann::json& config, const std::uint64_t* cli_seed);

}  // namespace relperf

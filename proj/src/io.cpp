#include "relperf/io.hpp"

#include <cinttypes>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <initializer_list>
#include <limits>
#include <sstream>
#include <utility>

#include "relperf/graphon.hpp"
#include "relperf/rng.hpp"

namespace relperf {
namespace {

using nlohmann::json;

constexpr double kNaN = std::numeric_limits<double>::quiet_NaN();

[[noreturn]] void fail(const std::string& ctx, const std::string& msg) {
  throw ConfigError(ctx + ": " + msg);
}

void expect_object(const json& j, const std::string& ctx) {
  if (!j.is_object()) fail(ctx, "expected an object");
}

const json& require(const json& j, const char* key, const std::string& ctx) {
  expect_object(j, ctx);
  auto it = j.find(key);
  if (it == j.end()) fail(ctx, std::string("missing field '") + key + "'");
  return *it;
}

void check_keys(const json& j, const std::string& ctx,
                std::initializer_list<const char*> allowed) {
  expect_object(j, ctx);
  for (auto it = j.begin(); it != j.end(); ++it) {
    bool known = false;
    for (const char* k : allowed)
      if (it.key() == k) {
        known = true;
        break;
      }
    if (!known) fail(ctx, "unknown key '" + it.key() + "'");
  }
}

double as_double(const json& v, const char* key, const std::string& ctx) {
  if (!v.is_number())
    fail(ctx, std::string("field '") + key + "' must be a number");
  return v.get<double>();
}

double get_double(const json& j, const char* key, const std::string& ctx) {
  return as_double(require(j, key, ctx), key, ctx);
}

double get_double_or(const json& j, const char* key, const std::string& ctx,
                     double fallback) {
  if (!j.contains(key)) return fallback;
  return as_double(j.at(key), key, ctx);
}

int get_int(const json& j, const char* key, const std::string& ctx) {
  const json& v = require(j, key, ctx);
  if (!v.is_number_integer())
    fail(ctx, std::string("field '") + key + "' must be an integer");
  return v.get<int>();
}

int get_int_or(const json& j, const char* key, const std::string& ctx,
               int fallback) {
  if (!j.contains(key)) return fallback;
  const json& v = j.at(key);
  if (!v.is_number_integer())
    fail(ctx, std::string("field '") + key + "' must be an integer");
  return v.get<int>();
}

bool get_bool_or(const json& j, const char* key, const std::string& ctx,
                 bool fallback) {
  if (!j.contains(key)) return fallback;
  const json& v = j.at(key);
  if (!v.is_boolean())
    fail(ctx, std::string("field '") + key + "' must be a boolean");
  return v.get<bool>();
}

std::string get_string(const json& j, const char* key, const std::string& ctx) {
  const json& v = require(j, key, ctx);
  if (!v.is_string())
    fail(ctx, std::string("field '") + key + "' must be a string");
  return v.get<std::string>();
}

// Fixed-length vector field: a scalar is a 1-vector, an array its entries.
Eigen::VectorXd small_vec(const json& v, const char* key,
                          const std::string& ctx) {
  if (v.is_number()) {
    Eigen::VectorXd out(1);
    out[0] = v.get<double>();
    return out;
  }
  if (v.is_array()) {
    Eigen::VectorXd out(static_cast<int>(v.size()));
    for (int i = 0; i < out.size(); ++i)
      out[i] = as_double(v.at(i), key, ctx);
    return out;
  }
  fail(ctx, std::string("field '") + key + "' must be a number or an array");
}

Eigen::VectorXd get_vec(const json& j, const char* key, const std::string& ctx) {
  return small_vec(require(j, key, ctx), key, ctx);
}

// Piecewise-constant coefficient: a number broadcasts to a constant d-vector,
// a flat array is one d-vector, an array of arrays is one d-vector per time
// interval.
PiecewiseVec piecewise_from_json(const json& v, int d, const std::string& ctx) {
  if (v.is_number())
    return PiecewiseVec(Eigen::VectorXd::Constant(d, v.get<double>()));
  if (v.is_array() && !v.empty() && v.front().is_number()) {
    if (static_cast<int>(v.size()) != d)
      fail(ctx, "expected " + std::to_string(d) + " entries, got " +
                    std::to_string(v.size()));
    Eigen::VectorXd one(d);
    for (int i = 0; i < d; ++i) one[i] = as_double(v.at(i), "entry", ctx);
    return PiecewiseVec(one);
  }
  if (v.is_array() && !v.empty() && v.front().is_array()) {
    std::vector<Eigen::VectorXd> per_interval;
    per_interval.reserve(v.size());
    for (const json& row : v) {
      if (!row.is_array() || static_cast<int>(row.size()) != d)
        fail(ctx, "each interval needs " + std::to_string(d) + " entries");
      Eigen::VectorXd one(d);
      for (int i = 0; i < d; ++i) one[i] = as_double(row.at(i), "entry", ctx);
      per_interval.push_back(std::move(one));
    }
    return PiecewiseVec(std::move(per_interval));
  }
  fail(ctx, "expected a number, a vector, or one vector per time interval");
}

int agent_dim(const json& j, const std::string& ctx) {
  if (j.contains("d")) {
    const int d = get_int(j, "d", ctx);
    if (d < 1) fail(ctx, "field 'd' must be >= 1");
    return d;
  }
  const json& s = require(j, "sigma", ctx);
  if (s.is_number()) return 1;
  if (s.is_array() && !s.empty() && s.front().is_number())
    return static_cast<int>(s.size());
  if (s.is_array() && !s.empty() && s.front().is_array())
    return static_cast<int>(s.front().size());
  fail(ctx, "cannot infer the dimension from 'sigma'; give 'd'");
}

InitialWealth xi_from_json(const json& v, const std::string& ctx) {
  if (v.is_number()) return v.get<double>();
  if (v.is_object()) {
    check_keys(v, ctx, {"mean", "sd"});
    NormalLaw law;
    law.mean = get_double(v, "mean", ctx);
    law.sd = get_double(v, "sd", ctx);
    if (law.sd < 0.0) fail(ctx, "field 'sd' must be >= 0");
    return law;
  }
  fail(ctx, "expected a number or {mean, sd}");
}

std::uint64_t get_seed(const json& j, const std::string& ctx) {
  const json& v = j.at("seed");
  if (!v.is_number_integer() ||
      (!v.is_number_unsigned() && v.get<std::int64_t>() < 0))
    fail(ctx, "field 'seed' must be a nonnegative integer");
  return v.get<std::uint64_t>();
}

// ---- result emit/parse helpers ---------------------------------------------

json vec_to_json(const Eigen::VectorXd& v) {
  json a = json::array();
  for (int i = 0; i < v.size(); ++i) a.push_back(v[i]);
  return a;
}

Eigen::VectorXd vec_from_json(const json& a, const std::string& ctx) {
  if (!a.is_array()) fail(ctx, "expected an array of numbers");
  Eigen::VectorXd v(static_cast<int>(a.size()));
  for (int i = 0; i < v.size(); ++i) {
    const json& x = a.at(i);
    v[i] = x.is_null() ? kNaN : as_double(x, "entry", ctx);
  }
  return v;
}

json dvec_to_json(const std::vector<double>& v) {
  json a = json::array();
  for (double x : v) a.push_back(x);
  return a;
}

std::vector<double> dvec_from_json(const json& a, const std::string& ctx) {
  if (!a.is_array()) fail(ctx, "expected an array of numbers");
  std::vector<double> v;
  v.reserve(a.size());
  for (const json& x : a) v.push_back(x.is_null() ? kNaN : as_double(x, "entry", ctx));
  return v;
}

json strategy_to_json(const Strategy& pi) {
  json a = json::array();
  for (const auto& v : pi) a.push_back(vec_to_json(v));
  return a;
}

Strategy strategy_from_json(const json& a, const std::string& ctx) {
  if (!a.is_array()) fail(ctx, "expected an array of vectors");
  Strategy pi;
  pi.reserve(a.size());
  for (const json& v : a) pi.push_back(vec_from_json(v, ctx));
  return pi;
}

json profile_to_json(const std::vector<Strategy>& pis) {
  json a = json::array();
  for (const auto& pi : pis) a.push_back(strategy_to_json(pi));
  return a;
}

std::vector<Strategy> profile_from_json(const json& a, const std::string& ctx) {
  if (!a.is_array()) fail(ctx, "expected an array of strategies");
  std::vector<Strategy> pis;
  pis.reserve(a.size());
  for (const json& pi : a) pis.push_back(strategy_from_json(pi, ctx));
  return pis;
}

json table_to_json(const std::vector<std::vector<double>>& rows) {
  json a = json::array();
  for (const auto& r : rows) a.push_back(dvec_to_json(r));
  return a;
}

std::vector<std::vector<double>> table_from_json(const json& a,
                                                 const std::string& ctx) {
  if (!a.is_array()) fail(ctx, "expected an array of arrays");
  std::vector<std::vector<double>> rows;
  rows.reserve(a.size());
  for (const json& r : a) rows.push_back(dvec_from_json(r, ctx));
  return rows;
}

json matrix_to_json(const Eigen::MatrixXd& m) {
  json a = json::array();
  for (int i = 0; i < m.rows(); ++i) {
    json row = json::array();
    for (int j = 0; j < m.cols(); ++j) row.push_back(m(i, j));
    a.push_back(std::move(row));
  }
  return a;
}

Eigen::MatrixXd matrix_from_json(const json& a, const std::string& ctx) {
  if (!a.is_array()) fail(ctx, "expected an array of arrays");
  const int rows = static_cast<int>(a.size());
  const int cols = rows > 0 ? static_cast<int>(a.front().size()) : 0;
  Eigen::MatrixXd m(rows, cols);
  for (int i = 0; i < rows; ++i) {
    const json& r = a.at(i);
    if (!r.is_array() || static_cast<int>(r.size()) != cols)
      fail(ctx, "rows must all have the same length");
    for (int j = 0; j < cols; ++j)
      m(i, j) = r.at(j).is_null() ? kNaN : as_double(r.at(j), "entry", ctx);
  }
  return m;
}

double num_or_nan(const json& j, const char* key, const std::string& ctx) {
  const json& v = require(j, key, ctx);
  if (v.is_null()) return kNaN;
  return as_double(v, key, ctx);
}

const char* method_name(IndifferenceMethod m) {
  return m == IndifferenceMethod::ClosedForm ? "closed" : "bisection";
}

IndifferenceMethod method_from_name(const std::string& name,
                                    const std::string& ctx) {
  if (name == "closed") return IndifferenceMethod::ClosedForm;
  if (name == "bisection") return IndifferenceMethod::Bisection;
  fail(ctx, "unknown method '" + name + "'");
}

json metric_stat_to_json(const MetricStat& s) {
  return json{{"mean", s.mean}, {"se", s.se}};
}

MetricStat metric_stat_from_json(const json& j, const std::string& ctx) {
  MetricStat s;
  s.mean = num_or_nan(j, "mean", ctx);
  s.se = num_or_nan(j, "se", ctx);
  return s;
}

json slope_to_json(const SlopeFit& s) {
  return json{{"slope", s.slope}, {"degenerate", s.degenerate}};
}

SlopeFit slope_from_json(const json& j, const std::string& ctx) {
  SlopeFit s;
  s.slope = num_or_nan(j, "slope", ctx);
  s.degenerate = require(j, "degenerate", ctx).get<bool>();
  return s;
}

json xi_error_to_json(const XiError& x) {
  return json{{"value", x.value},
              {"se", x.se},
              {"draws", x.draws},
              {"rejected_graphs", x.rejected_graphs}};
}

XiError xi_error_from_json(const json& j, const std::string& ctx) {
  XiError x;
  x.value = num_or_nan(j, "value", ctx);
  x.se = num_or_nan(j, "se", ctx);
  x.draws = get_int(j, "draws", ctx);
  x.rejected_graphs = get_int(j, "rejected_graphs", ctx);
  return x;
}

// ---- graph specs ------------------------------------------------------------

Eigen::MatrixXd weights_from_edges(const json& j, const std::string& ctx) {
  const int n = get_int(j, "n", ctx);
  if (n < 2) fail(ctx, "field 'n' must be >= 2");
  const double beta_n = get_double_or(j, "beta_n", ctx, 1.0);
  InteractionGraph graph;
  graph.n = n;
  graph.beta_n = beta_n;
  const json& edges = require(j, "edges", ctx);
  if (!edges.is_array()) fail(ctx, "field 'edges' must be an array of pairs");
  for (const json& e : edges) {
    if (!e.is_array() || e.size() != 2 || !e.at(0).is_number_integer() ||
        !e.at(1).is_number_integer())
      fail(ctx, "each edge must be a pair of 1-based vertex indices");
    int a = e.at(0).get<int>();
    int b = e.at(1).get<int>();
    if (a == b) fail(ctx, "edge endpoints must differ");
    if (a > b) std::swap(a, b);
    if (a < 1 || b > n) fail(ctx, "edge endpoints must lie in 1.." + std::to_string(n));
    graph.edges.emplace_back(a, b);
  }
  return normalized_weights(graph);
}

}  // namespace

// ---- files ------------------------------------------------------------------

nlohmann::json load_json_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open config file '" + path + "'");
  try {
    return json::parse(in);
  } catch (const json::parse_error& e) {
    throw ConfigError("config file '" + path + "' is not valid JSON: " + e.what());
  }
}

void write_text_file(const std::string& path, const std::string& content) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw ConfigError("cannot write file '" + path + "'");
  out << content;
  if (!out) throw ConfigError("failed while writing file '" + path + "'");
}

// ---- config parsing ----------------------------------------------------------

TimeGrid time_grid_from_json(const nlohmann::json& j) {
  const std::string ctx = "grid";
  check_keys(j, ctx, {"T", "steps"});
  TimeGrid grid;
  grid.T = get_double(j, "T", ctx);
  grid.steps = get_int(j, "steps", ctx);
  grid.validate();
  return grid;
}

ConvexSet constraint_from_json(const nlohmann::json& j) {
  const std::string ctx = "constraint";
  const std::string type = get_string(j, "type", ctx);
  if (type == "full_space") {
    check_keys(j, ctx, {"type"});
    return FullSpace{};
  }
  if (type == "box") {
    check_keys(j, ctx, {"type", "lower", "upper"});
    return Box{get_vec(j, "lower", ctx), get_vec(j, "upper", ctx)};
  }
  if (type == "ball") {
    check_keys(j, ctx, {"type", "center", "radius"});
    return Ball{get_vec(j, "center", ctx), get_double(j, "radius", ctx)};
  }
  if (type == "half_space") {
    check_keys(j, ctx, {"type", "normal", "offset"});
    return HalfSpace{get_vec(j, "normal", ctx), get_double(j, "offset", ctx)};
  }
  if (type == "orthant") {
    check_keys(j, ctx, {"type"});
    return Orthant{};
  }
  fail(ctx, "unknown type '" + type + "'");
}

AgentCoeffs agent_from_json(const nlohmann::json& j) {
  const std::string ctx = "agent";
  check_keys(j, ctx, {"d", "sigma", "sigma_star", "theta", "eta", "xi", "constraint"});
  AgentCoeffs a;
  a.d = agent_dim(j, ctx);
  a.sigma = piecewise_from_json(require(j, "sigma", ctx), a.d, ctx + ".sigma");
  a.sigma_star =
      piecewise_from_json(require(j, "sigma_star", ctx), a.d, ctx + ".sigma_star");
  a.theta = piecewise_from_json(require(j, "theta", ctx), a.d, ctx + ".theta");
  a.eta = get_double(j, "eta", ctx);
  a.xi = j.contains("xi") ? xi_from_json(j.at("xi"), ctx + ".xi") : InitialWealth{0.0};
  a.constraint = j.contains("constraint")
                     ? constraint_from_json(j.at("constraint"))
                     : ConvexSet{FullSpace{}};
  return a;
}

LabelCoeffs label_coeffs_from_json(const nlohmann::json& j) {
  const std::string ctx = "coeffs";
  check_keys(j, ctx, {"agent", "breaks", "segments"});
  if (j.contains("agent")) {
    if (j.contains("breaks") || j.contains("segments"))
      fail(ctx, "give either 'agent' or 'breaks'+'segments', not both");
    return LabelCoeffs::homogeneous(agent_from_json(j.at("agent")));
  }
  LabelCoeffs coeffs;
  coeffs.breaks = dvec_from_json(require(j, "breaks", ctx), ctx + ".breaks");
  const json& segments = require(j, "segments", ctx);
  if (!segments.is_array()) fail(ctx, "field 'segments' must be an array");
  for (const json& s : segments) coeffs.segments.push_back(agent_from_json(s));
  return coeffs;
}

Graphon graphon_from_json(const nlohmann::json& j) {
  const std::string ctx = "graphon";
  const std::string type = get_string(j, "type", ctx);
  if (type == "constant") {
    check_keys(j, ctx, {"type", "p"});
    ConstantGraphon g{get_double(j, "p", ctx)};
    validate_graphon(g);
    return g;
  }
  if (type == "product") {
    check_keys(j, ctx, {"type"});
    return ProductGraphon{};
  }
  if (type == "min") {
    check_keys(j, ctx, {"type"});
    return MinGraphon{};
  }
  if (type == "affine_mean") {
    check_keys(j, ctx, {"type", "a", "b"});
    AffineMeanGraphon g{get_double(j, "a", ctx), get_double(j, "b", ctx)};
    validate_graphon(g);
    return g;
  }
  if (type == "step") {
    check_keys(j, ctx, {"type", "weights"});
    StepGraphon g;
    g.weights = matrix_from_json(require(j, "weights", ctx), ctx + ".weights");
    g.n_blocks = static_cast<int>(g.weights.rows());
    validate_graphon(g);
    return g;
  }
  fail(ctx, "unknown type '" + type + "'");
}

BetaRule beta_rule_from_json(const nlohmann::json& j) {
  const std::string ctx = "beta_rule";
  const std::string type = get_string(j, "type", ctx);
  if (type == "constant") {
    check_keys(j, ctx, {"type", "beta"});
    BetaRule rule = ConstantBeta{get_double(j, "beta", ctx)};
    validate_beta_rule(rule);
    return rule;
  }
  if (type == "power") {
    check_keys(j, ctx, {"type", "gamma"});
    BetaRule rule = PowerBeta{get_double(j, "gamma", ctx)};
    validate_beta_rule(rule);
    return rule;
  }
  fail(ctx, "unknown type '" + type + "'");
}

Eigen::MatrixXd weights_from_graph_json(const nlohmann::json& j,
                                        std::uint64_t seed) {
  const std::string ctx = "graph";
  check_keys(j, ctx, {"weights", "edges", "n", "beta_n", "sample"});
  const int specs = static_cast<int>(j.contains("weights")) +
                    static_cast<int>(j.contains("edges")) +
                    static_cast<int>(j.contains("sample"));
  if (specs != 1)
    fail(ctx, "give exactly one of 'weights', 'edges', or 'sample'");
  if (j.contains("weights")) {
    if (j.contains("n") || j.contains("beta_n"))
      fail(ctx, "'weights' is already normalized; 'n'/'beta_n' do not apply");
    return matrix_from_json(j.at("weights"), ctx + ".weights");
  }
  if (j.contains("edges")) return weights_from_edges(j, ctx);
  const json& s = j.at("sample");
  const std::string sctx = ctx + ".sample";
  check_keys(s, sctx, {"graphon", "n", "beta_n"});
  const Graphon g = graphon_from_json(require(s, "graphon", sctx));
  const int n = get_int(s, "n", sctx);
  const double beta_n = get_double_or(s, "beta_n", sctx, 1.0);
  return normalized_weights(sample_interaction_graph(g, n, beta_n, seed));
}

ChaosConfig chaos_config_from_json(const nlohmann::json& j, std::uint64_t seed) {
  const std::string ctx = "chaos config";
  check_keys(j, ctx,
             {"kernel", "n_schedule", "beta_rule", "reps", "coeffs", "grid",
              "labels", "xi_draws", "cut_refine", "max_graph_retries", "seed"});
  ChaosConfig cfg;
  cfg.kernel = graphon_from_json(require(j, "kernel", ctx));
  const json& sched = require(j, "n_schedule", ctx);
  if (!sched.is_array()) fail(ctx, "field 'n_schedule' must be an array");
  for (const json& v : sched) {
    if (!v.is_number_integer()) fail(ctx, "'n_schedule' entries must be integers");
    cfg.n_schedule.push_back(v.get<int>());
  }
  cfg.beta_rule = beta_rule_from_json(require(j, "beta_rule", ctx));
  cfg.reps = get_int_or(j, "reps", ctx, 1);
  cfg.seed = seed;
  cfg.coeffs = label_coeffs_from_json(require(j, "coeffs", ctx));
  cfg.grid = time_grid_from_json(require(j, "grid", ctx));
  cfg.labels.labels = get_int_or(j, "labels", ctx, 8);
  cfg.xi_draws = get_int_or(j, "xi_draws", ctx, 200);
  cfg.cut_refine = get_int_or(j, "cut_refine", ctx, 8);
  cfg.max_graph_retries = get_int_or(j, "max_graph_retries", ctx, 100);
  cfg.validate();
  return cfg;
}

// ---- result serialization -----------------------------------------------------

nlohmann::json to_json(const FiniteEquilibrium& eq) {
  return json{{"pi", profile_to_json(eq.pi)},
              {"zeta_star", table_to_json(eq.zeta_star)},
              {"gamma0", dvec_to_json(eq.gamma0)},
              {"value0", dvec_to_json(eq.value0)},
              {"xi_bar", dvec_to_json(eq.xi_bar)},
              {"residual", eq.residual},
              {"iterations", eq.iterations}};
}

FiniteEquilibrium finite_equilibrium_from_json(const nlohmann::json& j) {
  const std::string ctx = "finite equilibrium";
  FiniteEquilibrium eq;
  eq.pi = profile_from_json(require(j, "pi", ctx), ctx);
  eq.zeta_star = table_from_json(require(j, "zeta_star", ctx), ctx);
  eq.gamma0 = dvec_from_json(require(j, "gamma0", ctx), ctx);
  eq.value0 = dvec_from_json(require(j, "value0", ctx), ctx);
  eq.xi_bar = dvec_from_json(require(j, "xi_bar", ctx), ctx);
  eq.residual = num_or_nan(j, "residual", ctx);
  eq.iterations = get_int(j, "iterations", ctx);
  return eq;
}

nlohmann::json to_json(const GraphonEquilibrium& eq) {
  return json{{"pi", profile_to_json(eq.pi)},
              {"z_star", table_to_json(eq.z_star)},
              {"y0", dvec_to_json(eq.y0)},
              {"value0", dvec_to_json(eq.value0)},
              {"benchmark", dvec_to_json(eq.benchmark)},
              {"residual", eq.residual},
              {"iterations", eq.iterations}};
}

GraphonEquilibrium graphon_equilibrium_from_json(const nlohmann::json& j) {
  const std::string ctx = "graphon equilibrium";
  GraphonEquilibrium eq;
  eq.pi = profile_from_json(require(j, "pi", ctx), ctx);
  eq.z_star = table_from_json(require(j, "z_star", ctx), ctx);
  eq.y0 = dvec_from_json(require(j, "y0", ctx), ctx);
  eq.value0 = dvec_from_json(require(j, "value0", ctx), ctx);
  eq.benchmark = dvec_from_json(require(j, "benchmark", ctx), ctx);
  eq.residual = num_or_nan(j, "residual", ctx);
  eq.iterations = get_int(j, "iterations", ctx);
  return eq;
}

nlohmann::json to_json(const GraphonBsdeResult& res) {
  return json{{"y0", dvec_to_json(res.y0)},
              {"value0", dvec_to_json(res.value0)},
              {"benchmark", dvec_to_json(res.benchmark)},
              {"mean_field", matrix_to_json(res.mean_field)},
              {"outer_gaps", dvec_to_json(res.outer_gaps)},
              {"iterations", res.iterations},
              {"converged", res.converged},
              {"diverged", res.diverged},
              {"max_martingale_residual", res.max_martingale_residual}};
}

GraphonBsdeResult graphon_bsde_result_from_json(const nlohmann::json& j) {
  const std::string ctx = "bsde result";
  GraphonBsdeResult res;
  res.y0 = dvec_from_json(require(j, "y0", ctx), ctx);
  res.value0 = dvec_from_json(require(j, "value0", ctx), ctx);
  res.benchmark = dvec_from_json(require(j, "benchmark", ctx), ctx);
  res.mean_field = matrix_from_json(require(j, "mean_field", ctx), ctx);
  res.outer_gaps = dvec_from_json(require(j, "outer_gaps", ctx), ctx);
  res.iterations = get_int(j, "iterations", ctx);
  res.converged = require(j, "converged", ctx).get<bool>();
  res.diverged = require(j, "diverged", ctx).get<bool>();
  res.max_martingale_residual = num_or_nan(j, "max_martingale_residual", ctx);
  return res;
}

nlohmann::json to_json(const SmallTimeResult& res) {
  return json{{"pi", profile_to_json(res.pi)},
              {"x_mean", table_to_json(res.x_mean)},
              {"y0", dvec_to_json(res.y0)},
              {"value0", dvec_to_json(res.value0)},
              {"benchmark", dvec_to_json(res.benchmark)},
              {"gaps", dvec_to_json(res.gaps)},
              {"factors", dvec_to_json(res.factors)},
              {"iterations", res.iterations},
              {"converged", res.converged},
              {"horizon_too_large", res.horizon_too_large}};
}

SmallTimeResult small_time_result_from_json(const nlohmann::json& j) {
  const std::string ctx = "small-time result";
  SmallTimeResult res;
  res.pi = profile_from_json(require(j, "pi", ctx), ctx);
  res.x_mean = table_from_json(require(j, "x_mean", ctx), ctx);
  res.y0 = dvec_from_json(require(j, "y0", ctx), ctx);
  res.value0 = dvec_from_json(require(j, "value0", ctx), ctx);
  res.benchmark = dvec_from_json(require(j, "benchmark", ctx), ctx);
  res.gaps = dvec_from_json(require(j, "gaps", ctx), ctx);
  res.factors = dvec_from_json(require(j, "factors", ctx), ctx);
  res.iterations = get_int(j, "iterations", ctx);
  res.converged = require(j, "converged", ctx).get<bool>();
  res.horizon_too_large = require(j, "horizon_too_large", ctx).get<bool>();
  return res;
}

nlohmann::json to_json(const IndifferenceResult& res) {
  return json{{"p", res.p},
              {"y_base_0", res.y_base_0},
              {"method", method_name(res.method)},
              {"p_log", res.p_log},
              {"p_closed", res.p_closed},
              {"se", res.se},
              {"iterations", res.iterations},
              {"hit_mc_floor", res.hit_mc_floor}};
}

IndifferenceResult indifference_result_from_json(const nlohmann::json& j) {
  const std::string ctx = "indifference result";
  IndifferenceResult res;
  res.p = num_or_nan(j, "p", ctx);
  res.y_base_0 = num_or_nan(j, "y_base_0", ctx);
  res.method = method_from_name(get_string(j, "method", ctx), ctx);
  res.p_log = num_or_nan(j, "p_log", ctx);
  res.p_closed = num_or_nan(j, "p_closed", ctx);
  res.se = num_or_nan(j, "se", ctx);
  res.iterations = get_int(j, "iterations", ctx);
  res.hit_mc_floor = require(j, "hit_mc_floor", ctx).get<bool>();
  return res;
}

nlohmann::json to_json(const ChaosReport& report) {
  json cells = json::array();
  for (const ChaosCell& c : report.cells)
    cells.push_back(json{{"n", c.n},
                         {"rep", c.rep},
                         {"ok", c.ok},
                         {"graph_ok", c.graph_ok},
                         {"strategy_error", c.strategy_error},
                         {"value_error", c.value_error},
                         {"gamma_error", c.gamma_error},
                         {"gamma_star_error", c.gamma_star_error},
                         {"rejected_graphs", c.rejected_graphs},
                         {"failure", c.failure}});
  json levels = json::array();
  for (const ChaosLevel& l : report.levels)
    levels.push_back(json{{"n", l.n},
                          {"beta_n", l.beta_n},
                          {"cells_ok", l.cells_ok},
                          {"cells_failed", l.cells_failed},
                          {"rejection_rate", l.rejection_rate},
                          {"strategy_error", metric_stat_to_json(l.strategy_error)},
                          {"value_error", metric_stat_to_json(l.value_error)},
                          {"gamma_error", metric_stat_to_json(l.gamma_error)},
                          {"gamma_star_error", metric_stat_to_json(l.gamma_star_error)},
                          {"xi", xi_error_to_json(l.xi)},
                          {"cut_distance", l.cut_distance},
                          {"cut_exact", l.cut_exact},
                          {"bound_value", l.bound_value}});
  return json{{"cells", std::move(cells)},
              {"levels", std::move(levels)},
              {"bound_constant", report.bound_constant},
              {"slopes", json{{"strategy", slope_to_json(report.slope_strategy)},
                              {"value", slope_to_json(report.slope_value)},
                              {"gamma", slope_to_json(report.slope_gamma)},
                              {"gamma_star", slope_to_json(report.slope_gamma_star)},
                              {"xi", slope_to_json(report.slope_xi)}}},
              {"spearman_strategy", report.spearman_strategy},
              {"inversions_strategy", report.inversions_strategy},
              {"inversions_value", report.inversions_value}};
}

ChaosReport chaos_report_from_json(const nlohmann::json& j) {
  const std::string ctx = "chaos report";
  ChaosReport report;
  for (const json& c : require(j, "cells", ctx)) {
    ChaosCell cell;
    cell.n = get_int(c, "n", ctx);
    cell.rep = get_int(c, "rep", ctx);
    cell.ok = require(c, "ok", ctx).get<bool>();
    cell.graph_ok = require(c, "graph_ok", ctx).get<bool>();
    cell.strategy_error = num_or_nan(c, "strategy_error", ctx);
    cell.value_error = num_or_nan(c, "value_error", ctx);
    cell.gamma_error = num_or_nan(c, "gamma_error", ctx);
    cell.gamma_star_error = num_or_nan(c, "gamma_star_error", ctx);
    cell.rejected_graphs = get_int(c, "rejected_graphs", ctx);
    cell.failure = get_string(c, "failure", ctx);
    report.cells.push_back(std::move(cell));
  }
  for (const json& l : require(j, "levels", ctx)) {
    ChaosLevel level;
    level.n = get_int(l, "n", ctx);
    level.beta_n = num_or_nan(l, "beta_n", ctx);
    level.cells_ok = get_int(l, "cells_ok", ctx);
    level.cells_failed = get_int(l, "cells_failed", ctx);
    level.rejection_rate = num_or_nan(l, "rejection_rate", ctx);
    level.strategy_error = metric_stat_from_json(require(l, "strategy_error", ctx), ctx);
    level.value_error = metric_stat_from_json(require(l, "value_error", ctx), ctx);
    level.gamma_error = metric_stat_from_json(require(l, "gamma_error", ctx), ctx);
    level.gamma_star_error =
        metric_stat_from_json(require(l, "gamma_star_error", ctx), ctx);
    level.xi = xi_error_from_json(require(l, "xi", ctx), ctx);
    level.cut_distance = num_or_nan(l, "cut_distance", ctx);
    level.cut_exact = require(l, "cut_exact", ctx).get<bool>();
    level.bound_value = num_or_nan(l, "bound_value", ctx);
    report.levels.push_back(std::move(level));
  }
  report.bound_constant = num_or_nan(j, "bound_constant", ctx);
  const json& slopes = require(j, "slopes", ctx);
  report.slope_strategy = slope_from_json(require(slopes, "strategy", ctx), ctx);
  report.slope_value = slope_from_json(require(slopes, "value", ctx), ctx);
  report.slope_gamma = slope_from_json(require(slopes, "gamma", ctx), ctx);
  report.slope_gamma_star = slope_from_json(require(slopes, "gamma_star", ctx), ctx);
  report.slope_xi = slope_from_json(require(slopes, "xi", ctx), ctx);
  report.spearman_strategy = num_or_nan(j, "spearman_strategy", ctx);
  report.inversions_strategy = get_int(j, "inversions_strategy", ctx);
  report.inversions_value = get_int(j, "inversions_value", ctx);
  return report;
}

// ---- CSV --------------------------------------------------------------------

std::string format_double(double x) {
  if (std::isnan(x)) return "nan";
  return json(x).dump();
}

std::string finite_equilibrium_csv(const FiniteEquilibrium& eq) {
  std::ostringstream out;
  out << "agent,interval,coord,pi\n";
  for (std::size_t i = 0; i < eq.pi.size(); ++i)
    for (std::size_t k = 0; k < eq.pi[i].size(); ++k)
      for (int c = 0; c < eq.pi[i][k].size(); ++c)
        out << i << ',' << k << ',' << c << ','
            << format_double(eq.pi[i][k][c]) << '\n';
  return out.str();
}

std::string graphon_equilibrium_csv(const GraphonEquilibrium& eq) {
  std::ostringstream out;
  out << "label,interval,coord,pi\n";
  for (std::size_t m = 0; m < eq.pi.size(); ++m)
    for (std::size_t k = 0; k < eq.pi[m].size(); ++k)
      for (int c = 0; c < eq.pi[m][k].size(); ++c)
        out << m << ',' << k << ',' << c << ','
            << format_double(eq.pi[m][k][c]) << '\n';
  return out.str();
}

std::string chaos_csv(const ChaosReport& report) {
  std::ostringstream out;
  out << "n,rep,metric,value\n";
  for (const ChaosCell& c : report.cells) {
    const std::pair<const char*, double> metrics[] = {
        {"strategy_error", c.strategy_error},
        {"value_error", c.value_error},
        {"gamma_error", c.gamma_error},
        {"gamma_star_error", c.gamma_star_error}};
    for (const auto& [name, value] : metrics)
      out << c.n << ',' << c.rep << ',' << name << ',' << format_double(value)
          << '\n';
  }
  return out.str();
}

std::string indifference_csv(
    const std::vector<std::pair<int, IndifferenceResult>>& rows) {
  std::ostringstream out;
  out << "agent,method,p,se\n";
  for (const auto& [agent, r] : rows)
    out << agent << ',' << method_name(r.method) << ',' << format_double(r.p)
        << ',' << format_double(r.se) << '\n';
  return out.str();
}

std::string edges_csv(const InteractionGraph& graph) {
  std::ostringstream out;
  out << "i,j\n";
  for (const auto& [i, j] : graph.edges) out << i << ',' << j << '\n';
  return out.str();
}

// ---- artifacts ----------------------------------------------------------------

std::uint64_t fnv1a64(const std::string& bytes) {
  std::uint64_t h = 14695981039346656037ULL;
  for (unsigned char c : bytes) {
    h ^= c;
    h *= 1099511628211ULL;
  }
  return h;
}

std::string config_hash(const std::string& command, const nlohmann::json& config) {
  char buf[17];
  std::snprintf(buf, sizeof buf, "%016" PRIx64,
                fnv1a64(command + "\n" + config.dump()));
  return buf;
}

std::uint64_t effective_seed(const nlohmann::json& config,
                             const std::uint64_t* cli_seed) {
  if (cli_seed != nullptr) return *cli_seed;
  if (config.is_object() && config.contains("seed"))
    return get_seed(config, "config");
  return 1;
}

namespace {

json artifact(const char* command, const json& config, std::uint64_t seed,
              json result) {
  return json{{"command", command},
              {"config_hash", config_hash(command, config)},
              {"seed", seed},
              {"result", std::move(result)}};
}

GameInputs finite_inputs_from_config(const json& config, std::uint64_t seed,
                                     const std::string& ctx) {
  GameInputs in;
  in.grid = time_grid_from_json(require(config, "grid", ctx));
  const json& agents = require(config, "agents", ctx);
  if (!agents.is_array() || agents.empty())
    fail(ctx, "field 'agents' must be a nonempty array");
  for (const json& a : agents) in.agents.push_back(agent_from_json(a));
  in.weights = weights_from_graph_json(require(config, "graph", ctx), seed);
  in.validate();
  return in;
}

GraphonGameInputs graphon_inputs_from_config(const json& config,
                                             const std::string& ctx) {
  GraphonGameInputs gin;
  gin.grid = time_grid_from_json(require(config, "grid", ctx));
  gin.kernel = graphon_from_json(require(config, "kernel", ctx));
  gin.coeffs = label_coeffs_from_json(require(config, "coeffs", ctx));
  gin.labels.labels = get_int_or(config, "labels", ctx, 8);
  gin.validate();
  return gin;
}

}  // namespace

nlohmann::json run_solve_finite(const nlohmann::json& config, std::uint64_t seed) {
  const std::string ctx = "solve-finite config";
  check_keys(config, ctx,
             {"grid", "agents", "graph", "tol", "max_iter", "verify",
              "verify_paths", "seed"});
  const GameInputs in = finite_inputs_from_config(config, seed, ctx);
  PicardOptions opts;
  opts.tol = get_double_or(config, "tol", ctx, opts.tol);
  opts.max_iter = get_int_or(config, "max_iter", ctx, opts.max_iter);
  const FiniteEquilibrium eq = solve_equilibrium_det(in, opts);
  json result = to_json(eq);
  if (get_bool_or(config, "verify", ctx, false)) {
    const int paths = get_int_or(config, "verify_paths", ctx, 100000);
    json checks = json::array();
    bool passed = true;
    for (int i = 0; i < in.n(); ++i) {
      const BestResponse br =
          best_response_oracle(in, eq, i, paths, rng::key(seed, 0xBE57, i));
      checks.push_back(json{{"agent", i},
                            {"pi_best", vec_to_json(br.pi)},
                            {"util_best", br.util_best},
                            {"util_eq", br.util_eq},
                            {"gap", br.gap},
                            {"se_gap", br.se_gap},
                            {"significant", br.significant},
                            {"inconclusive", br.inconclusive}});
      passed = passed && !br.significant;
    }
    result["verify"] = std::move(checks);
    result["verify_passed"] = passed;
  }
  return artifact("solve-finite", config, seed, std::move(result));
}

nlohmann::json run_solve_graphon(const nlohmann::json& config, std::uint64_t seed) {
  const std::string ctx = "solve-graphon config";
  check_keys(config, ctx,
             {"grid", "labels", "kernel", "coeffs", "method", "tol", "max_iter",
              "bsde", "seed"});
  const GraphonGameInputs gin = graphon_inputs_from_config(config, ctx);
  const std::string method = config.contains("method")
                                 ? get_string(config, "method", ctx)
                                 : std::string("det");
  json result;
  if (method == "det") {
    GraphonPicardOptions opts;
    opts.tol = get_double_or(config, "tol", ctx, opts.tol);
    opts.max_iter = get_int_or(config, "max_iter", ctx, opts.max_iter);
    result = json{{"method", "det"},
                  {"equilibrium", to_json(solve_graphon_equilibrium_det(gin, opts))}};
  } else if (method == "bsde") {
    GraphonBsdeOptions opts;
    if (config.contains("bsde")) {
      const json& b = config.at("bsde");
      const std::string bctx = ctx + ".bsde";
      check_keys(b, bctx,
                 {"kappa", "paths", "degree", "inner_sweeps", "outer_iters", "tol"});
      opts.kappa = get_double_or(b, "kappa", bctx, opts.kappa);
      opts.paths = get_int_or(b, "paths", bctx, opts.paths);
      opts.degree = get_int_or(b, "degree", bctx, opts.degree);
      opts.inner_sweeps = get_int_or(b, "inner_sweeps", bctx, opts.inner_sweeps);
      opts.outer_iters = get_int_or(b, "outer_iters", bctx, opts.outer_iters);
      opts.tol = get_double_or(b, "tol", bctx, opts.tol);
    }
    opts.seed = seed;
    result = json{{"method", "bsde"}, {"bsde", to_json(picard_graphon_bsde(gin, opts))}};
  } else if (method == "small-time") {
    SmallTimeOptions opts;
    opts.tol = get_double_or(config, "tol", ctx, opts.tol);
    opts.max_iter = get_int_or(config, "max_iter", ctx, opts.max_iter);
    result = json{{"method", "small-time"},
                  {"small_time", to_json(picard_graphon_fbsde_small_time(gin, opts))}};
  } else {
    fail(ctx, "unknown method '" + method + "' (expected det, bsde, or small-time)");
  }
  return artifact("solve-graphon", config, seed, std::move(result));
}

nlohmann::json run_chaos(const nlohmann::json& config, std::uint64_t seed) {
  const ChaosConfig cfg = chaos_config_from_json(config, seed);
  return artifact("chaos", config, seed, to_json(run_experiment(cfg)));
}

nlohmann::json run_indifference(const nlohmann::json& config, std::uint64_t seed) {
  const std::string ctx = "indifference config";
  const std::string mode = get_string(config, "mode", ctx);
  if (mode == "finite") {
    check_keys(config, ctx,
               {"mode", "grid", "agents", "graph", "method", "agent", "paths",
                "tol", "seed"});
    const GameInputs in = finite_inputs_from_config(config, seed, ctx);
    FiniteEquilibrium eq = solve_equilibrium_det(in);
    const std::string method = config.contains("method")
                                   ? get_string(config, "method", ctx)
                                   : std::string("closed");
    if (method == "closed") {
      if (config.contains("agent") || config.contains("paths") || config.contains("tol"))
        fail(ctx, "'agent'/'paths'/'tol' apply to method 'bisection' only");
      json results = json::array();
      for (const IndifferenceResult& r : indifference_capital_finite(in, eq))
        results.push_back(to_json(r));
      return artifact("indifference", config, seed,
                      json{{"mode", "finite"},
                           {"method", "closed"},
                           {"results", std::move(results)}});
    }
    if (method != "bisection")
      fail(ctx, "unknown method '" + method + "' (expected closed or bisection)");
    const int agent = get_int(config, "agent", ctx);
    if (agent < 0 || agent >= in.n())
      fail(ctx, "field 'agent' must index an agent (0-based)");
    BisectionOptions opts;
    opts.paths = get_int_or(config, "paths", ctx, opts.paths);
    opts.tol = get_double_or(config, "tol", ctx, opts.tol);
    opts.seed = seed;
    const IndifferenceResult bis = indifference_bisection(agent, in, eq, opts);
    json result{{"mode", "finite"},
                {"method", "bisection"},
                {"agent", agent},
                {"bisection", to_json(bis)}};
    try {
      result["closed"] = to_json(indifference_capital_finite(in, eq).at(agent));
    } catch (const CapabilityError&) {
      result["closed"] = nullptr;  // random endowment: no closed form
    }
    return artifact("indifference", config, seed, std::move(result));
  }
  if (mode == "graphon") {
    check_keys(config, ctx,
               {"mode", "grid", "labels", "kernel", "coeffs", "method", "seed"});
    if (config.contains("method") && get_string(config, "method", ctx) != "closed")
      fail(ctx, "graphon mode supports method 'closed' only");
    const GraphonGameInputs gin = graphon_inputs_from_config(config, ctx);
    const GraphonEquilibrium eq = solve_graphon_equilibrium_det(gin);
    json results = json::array();
    for (const IndifferenceResult& r : indifference_capital_graphon(gin, eq))
      results.push_back(to_json(r));
    return artifact("indifference", config, seed,
                    json{{"mode", "graphon"},
                         {"method", "closed"},
                         {"results", std::move(results)}});
  }
  fail(ctx, "field 'mode' must be 'finite' or 'graphon'");
}

nlohmann::json run_sample_graph(const nlohmann::json& config, std::uint64_t seed) {
  const std::string ctx = "sample-graph config";
  check_keys(config, ctx, {"graphon", "n", "beta_n", "seed"});
  const Graphon g = graphon_from_json(require(config, "graphon", ctx));
  const int n = get_int(config, "n", ctx);
  const double beta_n = get_double_or(config, "beta_n", ctx, 1.0);
  const InteractionGraph graph = sample_interaction_graph(g, n, beta_n, seed);
  json edges = json::array();
  for (const auto& [i, j] : graph.edges) edges.push_back(json::array({i, j}));
  return artifact("sample-graph", config, seed,
                  json{{"n", graph.n},
                       {"beta_n", graph.beta_n},
                       {"edges", std::move(edges)}});
}

nlohmann::json run_cut_norm(const nlohmann::json& config, std::uint64_t seed) {
  const std::string ctx = "cut-norm config";
  check_keys(config, ctx,
             {"a", "b", "blocks", "max_exact_blocks", "allow_heuristic",
              "restarts", "seed"});
  // Constant kernels are exactly their one-block projection; other smooth
  // kernels default to a 16-block approximation unless 'blocks' is given.
  auto as_step = [&](const char* key) {
    const Graphon g = graphon_from_json(require(config, key, ctx));
    if (const auto* step = std::get_if<StepGraphon>(&g)) return *step;
    const int fallback = std::holds_alternative<ConstantGraphon>(g) ? 1 : 16;
    return project_step(g, get_int_or(config, "blocks", ctx, fallback));
  };
  const StepGraphon a = as_step("a");
  const StepGraphon b = as_step("b");
  CutNormOptions opts;
  opts.max_exact_blocks =
      get_int_or(config, "max_exact_blocks", ctx, opts.max_exact_blocks);
  opts.allow_heuristic =
      get_bool_or(config, "allow_heuristic", ctx, opts.allow_heuristic);
  opts.heuristic_restarts = get_int_or(config, "restarts", ctx, opts.heuristic_restarts);
  opts.heuristic_seed = seed;
  const CutNormResult res = cut_norm(a, b, opts);
  return artifact("cut-norm", config, seed,
                  json{{"value", res.value}, {"exact", res.exact}});
}

}  // namespace relperf

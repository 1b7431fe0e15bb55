#pragma once

#include <cstdint>
#include <string>
#include <variant>
#include <vector>

#include "relperf/fixed_point.hpp"
#include "relperf/graphon_game.hpp"

namespace relperf {

// Interaction-graph density schedule. The weight normalization
// 1/((n-1) beta_n) concentrates only when n beta_n^2 -> infinity: any
// constant beta qualifies, and powers beta_n = n^{-gamma} need gamma < 1/2.
struct ConstantBeta {
  double beta = 1.0;
};
struct PowerBeta {
  double gamma = 0.25;  // beta_n = n^{-gamma}
};
using BetaRule = std::variant<ConstantBeta, PowerBeta>;

void validate_beta_rule(const BetaRule& rule);
double beta_value(const BetaRule& rule, int n);

// Agent i of an n-agent game lives at position i/n (1-based) and is read
// against the label bucket containing i/n, i.e. the nearest bucket midpoint.
int nearest_label(int agent, int n, int labels);

// Distance between an n-agent equilibrium and a graphon equilibrium:
//   strategy_error = mean_i sum_k |pi_i(k) - pi_{u(i)}(k)|^2 dt
//   value_error    = mean_i |V_i(0) - V_{u(i)}(0)|
// Both equilibria must live on the same time grid.
struct ComparisonError {
  double strategy_error = 0.0;
  double value_error = 0.0;
};
ComparisonError strategy_and_value_error(const FiniteEquilibrium& fin,
                                         const GraphonEquilibrium& gr,
                                         const TimeGrid& grid);

// Aggregate mismatch between the sampled-graph game and its graphon limit.
// Per agent i and interval k, with w the normalized weight matrix and
// p_j = j/n the sampled positions,
//   Gamma_i(k)  = sum_{j!=i} w_ij pi_j.theta_j
//                 - sum_{j!=i} G(p_i,p_j)/(n-1) pi_{u(j)}.theta_{u(j)}
//   Gamma*_i(k) = same with sigma_star in place of theta.
// The reference integral is discretized on the sampled positions themselves,
// so E[w_ij] = G(p_i,p_j)/(n-1) makes Gamma mean-zero given the strategies.
// Returned values are mean_i sum_k Gamma_i(k)^2 dt.
struct GammaError {
  double gamma = 0.0;
  double gamma_star = 0.0;
};
GammaError gamma_error(const GameInputs& fin_in, const FiniteEquilibrium& fin,
                       const GraphonGameInputs& gr_in,
                       const GraphonEquilibrium& gr);

// Monte Carlo estimate of the benchmark-input mismatch
//   E[ mean_i ( sum_{j!=i} w_ij xi_j - sum_{j!=i} G(p_i,p_j)/(n-1) E[xi] )^2 ]
// over independent graph draws and iid Normal(mean, sd) wealth draws.
// Graphs whose normalized rows exceed 1 are resampled (bounded retries).
struct XiError {
  double value = 0.0;
  double se = 0.0;
  int draws = 0;
  int rejected_graphs = 0;
};
XiError xi_error(int n, double beta_n, const Graphon& g, const NormalLaw& xi_law,
                 int draws, std::uint64_t seed);

// One sampled-game cell of the experiment grid. Failed cells (graph
// rejection exhausted or solver failure) carry NaN metrics and a reason.
struct ChaosCell {
  int n = 0;
  int rep = 0;
  bool ok = false;
  bool graph_ok = false;
  double strategy_error = 0.0;
  double value_error = 0.0;
  double gamma_error = 0.0;
  double gamma_star_error = 0.0;
  int rejected_graphs = 0;
  std::string failure;
};

struct MetricStat {
  double mean = 0.0;
  double se = 0.0;
};

// Per-n aggregates. bound_value = C (1/(n beta_n) + 1/n + n^2 cut^2) with C
// fitted so the bound matches mean gamma_error at the smallest n; cut is the
// cut distance between the n-block projection of the kernel and a finer
// reference projection (cut_refine times more blocks).
struct ChaosLevel {
  int n = 0;
  double beta_n = 1.0;
  int cells_ok = 0;
  int cells_failed = 0;
  double rejection_rate = 0.0;
  MetricStat strategy_error, value_error, gamma_error, gamma_star_error;
  XiError xi;
  double cut_distance = 0.0;
  bool cut_exact = true;
  double bound_value = 0.0;
};

struct ChaosConfig {
  Graphon kernel = ConstantGraphon{0.5};
  std::vector<int> n_schedule;
  BetaRule beta_rule = ConstantBeta{1.0};
  int reps = 1;
  std::uint64_t seed = 1;
  LabelCoeffs coeffs;  // homogeneous theta/eta/constraint/d, deterministic xi
  TimeGrid grid;
  LabelGrid labels;
  int xi_draws = 200;
  int cut_refine = 8;
  int max_graph_retries = 100;

  void validate() const;
};

// log-log OLS slope of level means against n; levels with nonpositive means
// are excluded, and fewer than two usable levels yields slope 0 with
// degenerate = true (e.g. strategy_error identically zero when sigma* = 0).
struct SlopeFit {
  double slope = 0.0;
  bool degenerate = false;
};

struct ChaosReport {
  std::vector<ChaosCell> cells;  // schedule-major: cell(a, r) = a*reps + r
  std::vector<ChaosLevel> levels;
  double bound_constant = 0.0;
  SlopeFit slope_strategy, slope_value, slope_gamma, slope_gamma_star, slope_xi;
  double spearman_strategy = 0.0;  // rank correlation of mean vs n
  int inversions_strategy = 0;     // adjacent non-decreases of the mean
  int inversions_value = 0;
};

// Samples a graph game per (n, rep) cell, solves it, and accumulates the
// distance metrics against the once-solved graphon game. Cells are
// independent and seeded by (seed, n, rep, attempt), so results do not
// depend on thread count. More than 20% failed cells raises SolverError.
ChaosReport run_experiment(const ChaosConfig& cfg);

}  // namespace relperf

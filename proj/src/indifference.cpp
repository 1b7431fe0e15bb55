#include "relperf/indifference.hpp"

#include <cmath>
#include <string>

#include "relperf/convex.hpp"

namespace relperf {

double baseline_y0(const AgentCoeffs& agent, const TimeGrid& grid) {
  agent.validate(grid);
  const double dt = grid.dt();
  const bool tconst = agent.sigma.constant() && agent.sigma_star.constant() &&
                      agent.theta.constant();
  double y = 0.0, term = 0.0;
  for (int k = 0; k < grid.steps; ++k) {
    if (k == 0 || !tconst) {
      const Eigen::VectorXd theta = agent.theta.at(k);
      const SigmaTransforms tr =
          varsigma_transforms(agent.sigma.at(k), agent.sigma_star.at(k));
      const Eigen::VectorXd target = tr.sigma_tilde * (agent.eta * theta);
      const double dd = dist_scaled(agent.constraint, tr.varsigma, target);
      term = (-0.5 * agent.eta * theta.squaredNorm() +
              dd * dd / (2.0 * agent.eta)) *
             dt;
    }
    y += term;
  }
  return y;
}

namespace {

// Both derivations of p, cross-checked. x_mean is the deterministic
// endowment, comp the competitive benchmark-plus-drift offset so that
// V^comp = utility(x_mean, comp, eta).
IndifferenceResult closed_form(double x_mean, double comp, double y_base,
                               double eta, const char* who) {
  const UtilityValue v_comp = utility(x_mean, comp, eta);
  const UtilityValue v_base = utility(x_mean, y_base, eta);
  IndifferenceResult r;
  r.y_base_0 = y_base;
  r.method = IndifferenceMethod::ClosedForm;
  r.p_closed = comp - y_base;
  r.p_log = eta * (std::log(-v_comp.value) - std::log(-v_base.value));
  r.p = r.p_closed;
  if (v_comp.saturated || v_base.saturated ||
      std::fabs(r.p_log - r.p_closed) > 1e-8)
    throw SolverError(std::string(who) +
                      ": log-ratio and closed forms disagree (" +
                      std::to_string(r.p_log) + " vs " +
                      std::to_string(r.p_closed) + ")");
  return r;
}

}  // namespace

std::vector<IndifferenceResult> indifference_capital_finite(
    const GameInputs& in, const FiniteEquilibrium& eq,
    std::vector<double> baseline) {
  in.validate();
  const int n = in.n();
  if (static_cast<int>(eq.gamma0.size()) != n ||
      static_cast<int>(eq.xi_bar.size()) != n)
    throw ConfigError(
        "indifference_capital_finite: equilibrium values missing");
  for (const auto& a : in.agents)
    if (!initial_wealth_deterministic(a.xi))
      throw CapabilityError(
          "indifference_capital_finite: deterministic endowments required");
  if (baseline.empty()) {
    baseline.reserve(n);
    for (const auto& a : in.agents) baseline.push_back(baseline_y0(a, in.grid));
  } else if (static_cast<int>(baseline.size()) != n) {
    throw ConfigError(
        "indifference_capital_finite: baseline needs one value per agent");
  }

  std::vector<IndifferenceResult> out;
  out.reserve(n);
  for (int i = 0; i < n; ++i)
    out.push_back(closed_form(initial_wealth_mean(in.agents[i].xi),
                              eq.xi_bar[i] + eq.gamma0[i], baseline[i],
                              in.agents[i].eta, "indifference_capital_finite"));
  return out;
}

std::vector<IndifferenceResult> indifference_capital_graphon(
    const GraphonGameInputs& in, const GraphonEquilibrium& eq,
    std::vector<double> baseline) {
  in.validate();
  const int M = in.labels.labels;
  if (static_cast<int>(eq.y0.size()) != M ||
      static_cast<int>(eq.benchmark.size()) != M)
    throw ConfigError(
        "indifference_capital_graphon: equilibrium values missing");
  if (!baseline.empty() && static_cast<int>(baseline.size()) != M)
    throw ConfigError(
        "indifference_capital_graphon: baseline needs one value per label");

  std::vector<IndifferenceResult> out;
  out.reserve(M);
  for (int l = 0; l < M; ++l) {
    const AgentCoeffs& a = in.coeffs.at(in.labels.u(l));
    if (!initial_wealth_deterministic(a.xi))
      throw CapabilityError(
          "indifference_capital_graphon: deterministic endowments required");
    const double yb =
        baseline.empty() ? baseline_y0(a, in.grid) : baseline[l];
    out.push_back(closed_form(initial_wealth_mean(a.xi),
                              eq.benchmark[l] + eq.y0[l], yb, a.eta,
                              "indifference_capital_graphon"));
  }
  return out;
}

IndifferenceResult indifference_graphon_at(const GraphonGameInputs& in,
                                           const GraphonEquilibrium& eq,
                                           double u) {
  const GraphonLabelValue v = graphon_value_at(in, eq, u);
  const AgentCoeffs& a = in.coeffs.at(u);
  if (!initial_wealth_deterministic(a.xi))
    throw CapabilityError(
        "indifference_graphon_at: deterministic endowments required");
  return closed_form(initial_wealth_mean(a.xi), v.benchmark + v.y0,
                     baseline_y0(a, in.grid), a.eta, "indifference_graphon_at");
}

IndifferenceResult indifference_bisection(int agent, const GameInputs& in,
                                          const FiniteEquilibrium& eq,
                                          const BisectionOptions& opts) {
  in.validate();
  const int n = in.n();
  if (agent < 0 || agent >= n)
    throw ConfigError("indifference_bisection: agent index out of range");
  if (static_cast<int>(eq.pi.size()) != n)
    throw ConfigError("indifference_bisection: equilibrium strategies missing");
  if (opts.paths < 2)
    throw ConfigError("indifference_bisection: paths must be >= 2");
  if (!(opts.tol > 0.0))
    throw ConfigError("indifference_bisection: tol must be positive");

  const AgentCoeffs& me = in.agents[agent];

  // Baseline optimal strategy: the same solver on the weightless one-player
  // game, so a zero-weight input reproduces the equilibrium side bit for bit.
  GameInputs solo;
  solo.agents.push_back(me);
  solo.weights = Eigen::MatrixXd::Zero(1, 1);
  solo.grid = in.grid;
  const FiniteEquilibrium base = solve_equilibrium_det(solo);

  // Common random numbers: the baseline reuses the agent's own noise stream.
  const Eigen::MatrixXd base_w =
      simulate_wealth(me, in.grid, base.pi[0], opts.paths, opts.seed, agent).x;
  Eigen::VectorXd base_xt = base_w.col(in.grid.steps);

  Eigen::VectorXd bench = Eigen::VectorXd::Zero(opts.paths);
  Eigen::VectorXd eq_xt(opts.paths);
  for (int j = 0; j < n; ++j) {
    const double w = in.weights(agent, j);
    if (j != agent && w == 0.0) continue;
    const Eigen::MatrixXd xs =
        simulate_wealth(in.agents[j], in.grid, eq.pi[j], opts.paths, opts.seed,
                        j)
            .x;
    if (j == agent) eq_xt = xs.col(in.grid.steps);
    if (w != 0.0) bench += w * xs.col(in.grid.steps);
  }

  const double eta = me.eta;
  Eigen::VectorXd eq_util(opts.paths);
  for (int p = 0; p < opts.paths; ++p)
    eq_util[p] = utility(eq_xt[p], bench[p], eta).value;

  // g(p) = mean[ utility(X^base - p, 0) - utility(X^eq, bench) ], strictly
  // decreasing in p; se_out gets the standard error of the mean.
  const auto g = [&](double p, double* se_out = nullptr) {
    double sum = 0.0, sumsq = 0.0;
    for (int q = 0; q < opts.paths; ++q) {
      const double d = utility(base_xt[q] - p, 0.0, eta).value - eq_util[q];
      sum += d;
      sumsq += d * d;
    }
    const double mean = sum / opts.paths;
    if (se_out) {
      const double var =
          std::max(0.0, (sumsq - opts.paths * mean * mean) / (opts.paths - 1));
      *se_out = std::sqrt(var / opts.paths);
    }
    return mean;
  };

  IndifferenceResult r;
  r.method = IndifferenceMethod::Bisection;
  r.y_base_0 = baseline_y0(me, in.grid);

  double lo = -10.0, hi = 10.0;
  const double glo = g(lo), ghi = g(hi);
  r.iterations = 2;
  if (!(glo > 0.0) || !(ghi < 0.0))
    throw SolverError(
        "indifference_bisection: no sign change on [-10, 10]; capital out of "
        "range");
  double mid = 0.5 * (lo + hi), gse = 0.0;
  while ((hi - lo) * 0.5 > opts.tol) {
    mid = 0.5 * (lo + hi);
    const double gm = g(mid, &gse);
    ++r.iterations;
    if (gm == 0.0) {
      lo = hi = mid;
      break;
    }
    if (std::fabs(gm) <= gse) {  // sign no longer resolvable from the sample
      lo = hi = mid;
      r.hit_mc_floor = true;
      break;
    }
    (gm > 0.0 ? lo : hi) = mid;
  }
  r.p = 0.5 * (lo + hi);
  r.p_log = r.p_closed = r.p;

  // Delta method: se(root) = se(g) / |g'| with g'(p) = -mean utility / eta.
  double se_g = 0.0;
  const double gp = g(r.p, &se_g);
  (void)gp;
  double slope = 0.0;
  for (int q = 0; q < opts.paths; ++q)
    slope -= utility(base_xt[q] - r.p, 0.0, eta).value;
  slope /= opts.paths * eta;
  r.se = slope > 0.0 ? se_g / slope : 0.0;
  return r;
}

}  // namespace relperf

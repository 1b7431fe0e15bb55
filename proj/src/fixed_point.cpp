#include "relperf/fixed_point.hpp"

#include <algorithm>
#include <cmath>
#include <string>

#include "relperf/rng.hpp"

namespace relperf {

namespace {

struct KnotData {
  std::vector<SigmaTransforms> tr;  // per agent, one interval
  std::vector<Eigen::VectorXd> sigma, sigma_star, theta;
};

KnotData knot_data(const GameInputs& in, int k) {
  KnotData d;
  d.tr.reserve(in.agents.size());
  for (const auto& a : in.agents) {
    d.tr.push_back(varsigma_transforms(a.sigma.at(k), a.sigma_star.at(k)));
    d.sigma.push_back(a.sigma.at(k));
    d.sigma_star.push_back(a.sigma_star.at(k));
    d.theta.push_back(a.theta.at(k));
  }
  return d;
}

bool coeffs_time_constant(const GameInputs& in) {
  for (const auto& a : in.agents)
    if (!(a.sigma.constant() && a.sigma_star.constant() && a.theta.constant()))
      return false;
  return true;
}

}  // namespace

void GameInputs::validate() const {
  grid.validate();
  if (agents.empty()) throw ConfigError("GameInputs: needs at least one agent");
  const int m = n();
  if (weights.rows() != m || weights.cols() != m)
    throw ConfigError("GameInputs: weights must be n x n");
  for (int i = 0; i < m; ++i) {
    if (weights(i, i) != 0.0)
      throw ConfigError("GameInputs: weights must have zero diagonal");
    double row = 0.0;
    for (int j = 0; j < m; ++j) {
      if (weights(i, j) < 0.0)
        throw ConfigError("GameInputs: weights must be nonnegative");
      row += weights(i, j);
    }
    if (row > 1.0 + 1e-12)
      throw ConfigError("GameInputs: weight row " + std::to_string(i + 1) +
                        " sums to " + std::to_string(row) + " > 1");
  }
  for (const auto& a : agents) a.validate(grid);
}

double h_alpha(const SigmaTransforms& tr, const ConvexSet& set, int n,
               const Eigen::VectorXd& alpha, double x) {
  if (n < 2) throw ConfigError("h_alpha: n must be >= 2");
  const Eigen::VectorXd p =
      project_scaled(set, tr.varsigma, alpha + tr.sigma_star_tilde * x);
  return x + tr.sigma_star_tilde.dot(p) / (n - 1);
}

double h_alpha_solve(const SigmaTransforms& tr, const ConvexSet& set, int n,
                     const Eigen::VectorXd& alpha, double y, double tol) {
  if (n < 2) throw ConfigError("h_alpha_solve: n must be >= 2");
  double x = y;
  for (int it = 0; it < 10000; ++it) {
    const Eigen::VectorXd p =
        project_scaled(set, tr.varsigma, alpha + tr.sigma_star_tilde * x);
    const double next = y - tr.sigma_star_tilde.dot(p) / (n - 1);
    const bool done = std::fabs(h_alpha(tr, set, n, alpha, next) - y) <= tol;
    x = next;
    if (done) return x;
  }
  throw SolverError("h_alpha_solve: no convergence within 10000 iterations");
}

Eigen::VectorXd phi_map(const GameInputs& in,
                        const std::vector<Eigen::VectorXd>& z_diag,
                        const Eigen::VectorXd& zeta_star, int knot) {
  in.validate();
  const int m = in.n();
  if (static_cast<int>(z_diag.size()) != m || zeta_star.size() != m)
    throw ConfigError("phi_map: z_diag and zeta_star must have one entry per agent");
  const KnotData d = knot_data(in, knot);
  std::vector<Eigen::VectorXd> proj(m);
  for (int j = 0; j < m; ++j) {
    const Eigen::VectorXd alpha =
        d.tr[j].sigma_tilde * (z_diag[j] + in.agents[j].eta * d.theta[j]);
    proj[j] = project_scaled(in.agents[j].constraint, d.tr[j].varsigma,
                             alpha + d.tr[j].sigma_star_tilde * zeta_star[j]);
  }
  Eigen::VectorXd out(m);
  for (int i = 0; i < m; ++i) {
    double acc = zeta_star[i];
    for (int j = 0; j < m; ++j)
      if (j != i && in.weights(i, j) != 0.0)
        acc -= in.weights(i, j) * d.tr[j].sigma_star_tilde.dot(proj[j]);
    out[i] = acc;
  }
  return out;
}

Eigen::VectorXd psi_map(const GameInputs& in,
                        const std::vector<Eigen::VectorXd>& z_diag,
                        const Eigen::VectorXd& z_star, int knot, double tol) {
  in.validate();
  const int m = in.n();
  if (m < 3)
    throw CapabilityError("psi_map: inversion requires n >= 3");
  if (static_cast<int>(z_diag.size()) != m || z_star.size() != m)
    throw ConfigError("psi_map: z_diag and z_star must have one entry per agent");
  const KnotData d = knot_data(in, knot);
  std::vector<Eigen::VectorXd> alpha(m);
  for (int j = 0; j < m; ++j)
    alpha[j] = d.tr[j].sigma_tilde * (z_diag[j] + in.agents[j].eta * d.theta[j]);

  // q_j(s) = sigma_star_tilde_j . P_j(alpha_j + sigma_star_tilde_j s) has
  // Lipschitz constant |sigma_star_tilde_j|^2 < 1, so the rearranged
  // iteration contracts at rate max_j |sst_j|^2 * max row sum.
  auto q = [&](int j, double s) {
    return d.tr[j].sigma_star_tilde.dot(
        project_scaled(in.agents[j].constraint, d.tr[j].varsigma,
                       alpha[j] + d.tr[j].sigma_star_tilde * s));
  };
  Eigen::VectorXd zeta = z_star;
  for (int it = 0; it < 100000; ++it) {
    Eigen::VectorXd qv(m);
    for (int j = 0; j < m; ++j) qv[j] = q(j, zeta[j]);
    Eigen::VectorXd next(m);
    for (int i = 0; i < m; ++i) {
      double acc = z_star[i];
      for (int j = 0; j < m; ++j)
        if (j != i && in.weights(i, j) != 0.0) acc += in.weights(i, j) * qv[j];
      next[i] = acc;
    }
    const double step = (next - zeta).lpNorm<Eigen::Infinity>();
    zeta = next;
    if (step <= 0.25 * tol) {
      const double resid =
          (phi_map(in, z_diag, zeta, knot) - z_star).lpNorm<Eigen::Infinity>();
      if (resid <= tol) return zeta;
    }
  }
  throw SolverError("psi_map: no convergence within 100000 iterations");
}

FiniteEquilibrium solve_equilibrium_det(const GameInputs& in,
                                        const PicardOptions& opts) {
  in.validate();
  const int m = in.n();
  const int steps = in.grid.steps;
  const bool tconst = coeffs_time_constant(in);
  const int knots_to_solve = tconst ? 1 : steps;

  FiniteEquilibrium eq;
  eq.pi.assign(m, Strategy(steps));
  eq.zeta_star.assign(m, std::vector<double>(steps, 0.0));

  double worst_resid = 0.0;
  int worst_iters = 0;
  for (int k = 0; k < knots_to_solve; ++k) {
    const KnotData d = knot_data(in, k);
    std::vector<Eigen::VectorXd> pi(m);
    for (int i = 0; i < m; ++i) pi[i] = Eigen::VectorXd::Zero(in.agents[i].d);
    Eigen::VectorXd zstar = Eigen::VectorXd::Zero(m);

    double damping = 1.0;
    double prev_step = std::numeric_limits<double>::infinity();
    double step = 0.0;
    int it = 0;
    for (; it < opts.max_iter; ++it) {
      for (int i = 0; i < m; ++i) {
        double acc = 0.0;
        for (int j = 0; j < m; ++j)
          if (j != i && in.weights(i, j) != 0.0)
            acc += in.weights(i, j) * d.sigma_star[j].dot(pi[j]);
        zstar[i] = acc;
      }
      step = 0.0;
      for (int i = 0; i < m; ++i) {
        const Eigen::VectorXd target =
            d.tr[i].sigma_tilde * (in.agents[i].eta * d.theta[i]) +
            d.tr[i].sigma_star_tilde * zstar[i];
        const Eigen::VectorXd next =
            d.tr[i].varsigma_inv *
            project_scaled(in.agents[i].constraint, d.tr[i].varsigma, target);
        const Eigen::VectorXd moved = pi[i] + damping * (next - pi[i]);
        step = std::max(step, (moved - pi[i]).lpNorm<Eigen::Infinity>());
        pi[i] = moved;
      }
      if (step <= opts.tol) break;
      if (step > prev_step) damping = 0.5;  // oscillation guard
      prev_step = step;
    }
    if (step > opts.tol)
      throw SolverError("solve_equilibrium_det: Picard iteration did not reach " +
                        std::to_string(opts.tol));
    for (int i = 0; i < m; ++i) {
      double acc = 0.0;
      for (int j = 0; j < m; ++j)
        if (j != i && in.weights(i, j) != 0.0)
          acc += in.weights(i, j) * d.sigma_star[j].dot(pi[j]);
      zstar[i] = acc;
    }
    const int fill_to = tconst ? steps : k + 1;
    for (int kk = k; kk < fill_to; ++kk)
      for (int i = 0; i < m; ++i) {
        eq.pi[i][kk] = pi[i];
        eq.zeta_star[i][kk] = zstar[i];
      }
    worst_resid = std::max(worst_resid, step);
    worst_iters = std::max(worst_iters, it + 1);
  }
  eq.residual = worst_resid;
  eq.iterations = worst_iters;
  gamma0_and_value(in, eq);
  return eq;
}

void gamma0_and_value(const GameInputs& in, FiniteEquilibrium& eq) {
  const int m = in.n();
  const int steps = in.grid.steps;
  const double dt = in.grid.dt();
  eq.gamma0.assign(m, 0.0);
  eq.value0.assign(m, 0.0);
  eq.xi_bar.assign(m, 0.0);

  std::vector<KnotData> knots;
  const bool tconst = coeffs_time_constant(in);
  knots.push_back(knot_data(in, 0));
  if (!tconst)
    for (int k = 1; k < steps; ++k) knots.push_back(knot_data(in, k));

  for (int i = 0; i < m; ++i) {
    double xi_bar = 0.0;
    for (int j = 0; j < m; ++j)
      if (j != i)
        xi_bar += in.weights(i, j) * initial_wealth_mean(in.agents[j].xi);
    eq.xi_bar[i] = xi_bar;

    double aggregate_drift = 0.0;  // sum_j w_ij int pi_j.(sigma_j theta_j) dt
    double b_int = 0.0;
    for (int k = 0; k < steps; ++k) {
      const KnotData& d = knots[tconst ? 0 : k];
      const double eta = in.agents[i].eta;
      double agg = 0.0, cross = 0.0;
      for (int j = 0; j < m; ++j) {
        if (j == i || in.weights(i, j) == 0.0) continue;
        const Eigen::VectorXd spj = d.sigma[j].cwiseProduct(eq.pi[j][k]);
        agg += in.weights(i, j) * spj.dot(d.theta[j]);
        cross += in.weights(i, j) * in.weights(i, j) * spj.squaredNorm();
      }
      const Eigen::VectorXd target =
          d.tr[i].sigma_tilde * (eta * d.theta[i]) +
          d.tr[i].sigma_star_tilde * eq.zeta_star[i][k];
      const double dd =
          dist_scaled(in.agents[i].constraint, d.tr[i].varsigma, target);
      const double b = 0.5 * eta * d.theta[i].squaredNorm() -
                       cross / (2.0 * eta) - dd * dd / (2.0 * eta);
      aggregate_drift += agg * dt;
      b_int += b * dt;
    }
    eq.gamma0[i] = aggregate_drift - b_int;
    if (initial_wealth_deterministic(in.agents[i].xi)) {
      const double xi = initial_wealth_mean(in.agents[i].xi);
      eq.value0[i] = utility(xi, eq.xi_bar[i] + eq.gamma0[i], in.agents[i].eta).value;
    } else {
      eq.value0[i] = std::numeric_limits<double>::quiet_NaN();
    }
  }
}

namespace {

// Paired Monte Carlo utilities for one agent against frozen opponents.
struct OracleContext {
  const GameInputs& in;
  int agent;
  int paths;
  std::uint64_t seed;
  Eigen::VectorXd bench;    // per path: sum_j w_ij X_j_T
  Eigen::VectorXd util_eq;  // per path utility at the equilibrium strategy
};

Eigen::VectorXd terminal_wealth(const GameInputs& in, int agent,
                                const Strategy& pi, int paths,
                                std::uint64_t seed) {
  const WealthPaths w =
      simulate_wealth(in.agents[agent], in.grid, pi, paths, seed, agent);
  return w.x.col(in.grid.steps);
}

double candidate_mean_util(const OracleContext& ctx, const Eigen::VectorXd& cand,
                           Eigen::VectorXd* per_path = nullptr) {
  const auto& agent = ctx.in.agents[ctx.agent];
  const Strategy pi(ctx.in.grid.steps, cand);
  const Eigen::VectorXd xt =
      terminal_wealth(ctx.in, ctx.agent, pi, ctx.paths, ctx.seed);
  double acc = 0.0;
  if (per_path) per_path->resize(ctx.paths);
  for (int p = 0; p < ctx.paths; ++p) {
    const double u = utility(xt[p], ctx.bench[p], agent.eta).value;
    if (per_path) (*per_path)[p] = u;
    acc += u;
  }
  return acc / ctx.paths;
}

}  // namespace

BestResponse best_response_oracle(const GameInputs& in,
                                  const FiniteEquilibrium& eq, int agent,
                                  int paths, std::uint64_t seed,
                                  const BestResponseOptions& opts) {
  in.validate();
  const int m = in.n();
  if (agent < 0 || agent >= m)
    throw ConfigError("best_response_oracle: agent index out of range");
  if (paths < 100)
    throw ConfigError("best_response_oracle: needs at least 100 paths");
  const int d = in.agents[agent].d;

  OracleContext ctx{in, agent, paths, seed, Eigen::VectorXd::Zero(paths), {}};
  for (int j = 0; j < m; ++j) {
    if (j == agent || in.weights(agent, j) == 0.0) continue;
    ctx.bench += in.weights(agent, j) *
                 terminal_wealth(in, j, eq.pi[j], paths, seed);
  }
  {
    const Eigen::VectorXd xt =
        terminal_wealth(in, agent, eq.pi[agent], paths, seed);
    ctx.util_eq.resize(paths);
    for (int p = 0; p < paths; ++p)
      ctx.util_eq[p] = utility(xt[p], ctx.bench[p], in.agents[agent].eta).value;
  }
  const double util_eq = ctx.util_eq.mean();

  // Search box half-width from the data scale (covers the unconstrained
  // optimum with a wide margin).
  double halfwidth = opts.box_halfwidth;
  if (halfwidth <= 0.0) {
    double scale = 0.0;
    for (int k = 0; k < in.grid.steps; ++k) {
      const auto tr = varsigma_transforms(in.agents[agent].sigma.at(k),
                                          in.agents[agent].sigma_star.at(k));
      double zmax = 0.0;
      for (int j = 0; j < m; ++j)
        if (j != agent)
          zmax += in.weights(agent, j) * in.agents[j].sigma_star.at(k).norm();
      const Eigen::VectorXd probe =
          tr.varsigma_inv * (tr.sigma_tilde * (in.agents[agent].eta *
                                               in.agents[agent].theta.at(k)) +
                             tr.sigma_star_tilde * zmax);
      scale = std::max(scale, probe.lpNorm<Eigen::Infinity>());
    }
    halfwidth = 1.0 + 4.0 * scale;
  }

  Eigen::VectorXd center = Eigen::VectorXd::Zero(d);
  Eigen::VectorXd best = project(in.agents[agent].constraint, center);
  double best_util = candidate_mean_util(ctx, best);
  double best_norm = best.norm();

  // Per-candidate standard error scale used for the smallest-norm tie-break.
  const auto se_of = [&](const Eigen::VectorXd& per_path) {
    const double mu = per_path.mean();
    const double var = (per_path.array() - mu).square().sum() /
                       std::max(1, paths - 1);
    return std::sqrt(var / paths);
  };
  Eigen::VectorXd tmp;
  candidate_mean_util(ctx, best, &tmp);
  double best_se = se_of(tmp);

  auto consider = [&](const Eigen::VectorXd& raw) {
    const Eigen::VectorXd cand = project(in.agents[agent].constraint, raw);
    Eigen::VectorXd per_path;
    const double u = candidate_mean_util(ctx, cand, &per_path);
    const double se = se_of(per_path);
    const double norm = cand.norm();
    if (u > best_util + best_se || (u > best_util - best_se && norm < best_norm)) {
      best = cand;
      best_util = u;
      best_norm = norm;
      best_se = se;
    }
  };

  double width = halfwidth;
  for (int round = 0; round < opts.grid_rounds; ++round) {
    const Eigen::VectorXd base = best;
    std::vector<Eigen::VectorXd> pts;
    pts.emplace_back(base);
    const int g = std::max(3, opts.grid_points);
    if (d == 1) {
      for (int a = 0; a < g; ++a) {
        Eigen::VectorXd x(1);
        x[0] = base[0] - width + 2.0 * width * a / (g - 1);
        pts.push_back(x);
      }
    } else {
      // Coordinate sweeps around the current best, one axis at a time.
      for (int c = 0; c < d; ++c)
        for (int a = 0; a < g; ++a) {
          Eigen::VectorXd x = base;
          x[c] = base[c] - width + 2.0 * width * a / (g - 1);
          pts.push_back(x);
        }
    }
    for (const auto& x : pts) consider(x);
    width *= 2.0 / (g - 1);
  }

  // Nelder-Mead polish on the negative utility.
  {
    const double h = std::max(width, 1e-4);
    std::vector<Eigen::VectorXd> simplex;
    simplex.push_back(best);
    for (int c = 0; c < d; ++c) {
      Eigen::VectorXd x = best;
      x[c] += h;
      simplex.push_back(x);
    }
    std::vector<double> f(simplex.size());
    auto eval = [&](const Eigen::VectorXd& x) {
      return -candidate_mean_util(ctx, project(in.agents[agent].constraint, x));
    };
    for (std::size_t s = 0; s < simplex.size(); ++s) f[s] = eval(simplex[s]);
    for (int it = 0; it < opts.nm_iters; ++it) {
      std::vector<std::size_t> ord(simplex.size());
      for (std::size_t s = 0; s < ord.size(); ++s) ord[s] = s;
      std::sort(ord.begin(), ord.end(),
                [&](std::size_t a, std::size_t b) { return f[a] < f[b]; });
      std::vector<Eigen::VectorXd> sx;
      std::vector<double> sf;
      for (auto s : ord) { sx.push_back(simplex[s]); sf.push_back(f[s]); }
      simplex = sx; f = sf;
      if ((simplex.back() - simplex.front()).norm() < 1e-7) break;
      Eigen::VectorXd centroid = Eigen::VectorXd::Zero(d);
      for (std::size_t s = 0; s + 1 < simplex.size(); ++s) centroid += simplex[s];
      centroid /= static_cast<double>(simplex.size() - 1);
      const Eigen::VectorXd refl = centroid + (centroid - simplex.back());
      const double fr = eval(refl);
      if (fr < f.front()) {
        const Eigen::VectorXd expan = centroid + 2.0 * (centroid - simplex.back());
        const double fe = eval(expan);
        if (fe < fr) { simplex.back() = expan; f.back() = fe; }
        else { simplex.back() = refl; f.back() = fr; }
      } else if (fr < f[f.size() - 2]) {
        simplex.back() = refl;
        f.back() = fr;
      } else {
        const Eigen::VectorXd con = centroid + 0.5 * (simplex.back() - centroid);
        const double fc = eval(con);
        if (fc < f.back()) { simplex.back() = con; f.back() = fc; }
        else {
          for (std::size_t s = 1; s < simplex.size(); ++s) {
            simplex[s] = simplex.front() + 0.5 * (simplex[s] - simplex.front());
            f[s] = eval(simplex[s]);
          }
        }
      }
    }
    std::size_t arg = 0;
    for (std::size_t s = 1; s < f.size(); ++s)
      if (f[s] < f[arg]) arg = s;
    consider(simplex[arg]);
  }

  BestResponse out;
  out.pi = best;
  out.util_best = best_util;
  out.util_eq = util_eq;
  Eigen::VectorXd per_path;
  candidate_mean_util(ctx, best, &per_path);
  const Eigen::VectorXd diff = per_path - ctx.util_eq;
  const double mu = diff.mean();
  const double var =
      (diff.array() - mu).square().sum() / std::max(1, paths - 1);
  out.se_gap = std::sqrt(var / paths);
  out.gap = best_util - util_eq;
  out.significant = out.gap > 3.0 * out.se_gap;
  out.inconclusive = out.significant && out.gap <= 6.0 * out.se_gap;
  return out;
}

}  // namespace relperf

#include "relperf/graphon_game.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <string>
#include <variant>

#include "relperf/bsde.hpp"
#include "relperf/convex.hpp"

namespace relperf {

void LabelGrid::validate() const {
  if (labels < 1) throw ConfigError("LabelGrid: labels must be >= 1");
}

LabelCoeffs LabelCoeffs::homogeneous(AgentCoeffs agent) {
  LabelCoeffs c;
  c.breaks = {1.0};
  c.segments.push_back(std::move(agent));
  return c;
}

const AgentCoeffs& LabelCoeffs::at(double u) const {
  if (breaks.empty()) throw ConfigError("LabelCoeffs: no segments");
  if (u < -1e-12 || u > 1.0 + 1e-12)
    throw ConfigError("LabelCoeffs: label must lie in [0, 1]");
  auto it = std::lower_bound(breaks.begin(), breaks.end(), u);
  if (it == breaks.end()) --it;
  return segments[static_cast<std::size_t>(it - breaks.begin())];
}

void LabelCoeffs::validate(const TimeGrid& grid) const {
  if (breaks.empty() || breaks.size() != segments.size())
    throw ConfigError("LabelCoeffs: needs one coefficient record per break");
  double prev = 0.0;
  for (double b : breaks) {
    if (!(b > prev))
      throw ConfigError("LabelCoeffs: breaks must increase within (0, 1]");
    prev = b;
  }
  if (breaks.back() != 1.0)
    throw ConfigError("LabelCoeffs: final break must equal 1");
  for (const auto& a : segments) a.validate(grid);
}

void GraphonGameInputs::validate() const {
  grid.validate();
  labels.validate();
  validate_graphon(kernel);
  coeffs.validate(grid);
}

namespace {

struct LabelKnot {
  Eigen::VectorXd sigma, sigma_star, theta;
  SigmaTransforms tr;
};

LabelKnot label_knot(const AgentCoeffs& a, int k) {
  LabelKnot d;
  d.sigma = a.sigma.at(k);
  d.sigma_star = a.sigma_star.at(k);
  d.theta = a.theta.at(k);
  d.tr = varsigma_transforms(d.sigma, d.sigma_star);
  return d;
}

struct LabelData {
  const AgentCoeffs* agent = nullptr;
  std::vector<LabelKnot> knots;  // one entry when time-constant
  bool tconst = true;

  const LabelKnot& at(int k) const { return knots[tconst ? 0 : k]; }
};

std::vector<LabelData> build_labels(const GraphonGameInputs& in) {
  const int M = in.labels.labels;
  std::vector<LabelData> out(M);
  for (int m = 0; m < M; ++m) {
    const AgentCoeffs& a = in.coeffs.at(in.labels.u(m));
    out[m].agent = &a;
    out[m].tconst =
        a.sigma.constant() && a.sigma_star.constant() && a.theta.constant();
    const int kn = out[m].tconst ? 1 : in.grid.steps;
    out[m].knots.reserve(kn);
    for (int k = 0; k < kn; ++k) out[m].knots.push_back(label_knot(a, k));
  }
  return out;
}

// Quadrature weights W(l, v) = G(u_l, u_v) / M.
Eigen::MatrixXd quad_weights(const GraphonGameInputs& in) {
  const int M = in.labels.labels;
  Eigen::MatrixXd W(M, M);
  for (int l = 0; l < M; ++l)
    for (int v = 0; v < M; ++v)
      W(l, v) = eval_graphon(in.kernel, in.labels.u(l), in.labels.u(v)) *
                in.labels.weight();
  return W;
}

bool all_time_constant(const std::vector<LabelData>& labels) {
  for (const auto& l : labels)
    if (!l.tconst) return false;
  return true;
}

GraphonLabelValue label_value(const GraphonGameInputs& in,
                              const std::vector<LabelData>& labels,
                              const GraphonEquilibrium& eq, double u) {
  const AgentCoeffs& a = in.coeffs.at(u);
  const int M = in.labels.labels;
  const int steps = in.grid.steps;
  const double dt = in.grid.dt();

  Eigen::VectorXd wrow(M);
  for (int v = 0; v < M; ++v)
    wrow[v] = eval_graphon(in.kernel, u, in.labels.u(v)) * in.labels.weight();

  const bool aconst =
      a.sigma.constant() && a.sigma_star.constant() && a.theta.constant();
  const LabelKnot base = label_knot(a, 0);

  double y0 = 0.0;
  for (int k = 0; k < steps; ++k) {
    const LabelKnot d = aconst ? base : label_knot(a, k);
    double agg = 0.0, zst = 0.0;
    for (int v = 0; v < M; ++v) {
      if (wrow[v] == 0.0) continue;
      const LabelKnot& dv = labels[v].at(k);
      agg += wrow[v] * dv.sigma.cwiseProduct(eq.pi[v][k]).dot(dv.theta);
      zst += wrow[v] * dv.sigma_star.dot(eq.pi[v][k]);
    }
    const Eigen::VectorXd target =
        d.tr.sigma_tilde * (a.eta * d.theta) + d.tr.sigma_star_tilde * zst;
    const double dd = dist_scaled(a.constraint, d.tr.varsigma, target);
    y0 += (agg - 0.5 * a.eta * d.theta.squaredNorm() +
           dd * dd / (2.0 * a.eta)) *
          dt;
  }

  GraphonLabelValue out;
  out.y0 = y0;
  double bench = 0.0;
  for (int v = 0; v < M; ++v)
    bench += wrow[v] * initial_wealth_mean(labels[v].agent->xi);
  out.benchmark = bench;
  if (initial_wealth_deterministic(a.xi)) {
    out.value0 =
        utility(initial_wealth_mean(a.xi), bench + y0, a.eta).value;
  } else {
    out.value0 = std::numeric_limits<double>::quiet_NaN();
  }
  return out;
}

void check_profile_shape(const GraphonGameInputs& in,
                         const GraphonEquilibrium& eq, const char* who) {
  const int M = in.labels.labels;
  if (static_cast<int>(eq.pi.size()) != M)
    throw ConfigError(std::string(who) +
                      ": equilibrium profile does not match the label grid");
  for (const auto& s : eq.pi)
    if (static_cast<int>(s.size()) != in.grid.steps)
      throw ConfigError(std::string(who) +
                        ": strategy profile does not match the time grid");
}

}  // namespace

GraphonEquilibrium solve_graphon_equilibrium_det(
    const GraphonGameInputs& in, const GraphonPicardOptions& opts) {
  in.validate();
  const int M = in.labels.labels;
  const int steps = in.grid.steps;
  const std::vector<LabelData> labels = build_labels(in);
  const Eigen::MatrixXd W = quad_weights(in);

  if (!opts.initial.empty()) {
    if (static_cast<int>(opts.initial.size()) != M)
      throw ConfigError(
          "solve_graphon_equilibrium_det: initial profile needs one strategy "
          "per label");
    for (int l = 0; l < M; ++l) {
      if (static_cast<int>(opts.initial[l].size()) != steps)
        throw ConfigError(
            "solve_graphon_equilibrium_det: initial strategy needs one value "
            "per interval");
      for (const auto& v : opts.initial[l])
        if (v.size() != labels[l].agent->d)
          throw ConfigError(
              "solve_graphon_equilibrium_det: initial strategy dimension "
              "mismatch");
    }
  }
  const bool tconst = all_time_constant(labels) && opts.initial.empty();
  const int knots_to_solve = tconst ? 1 : steps;

  GraphonEquilibrium eq;
  eq.pi.assign(M, Strategy(steps));
  eq.z_star.assign(M, std::vector<double>(steps, 0.0));

  double worst_resid = 0.0;
  int worst_iters = 0;
  for (int k = 0; k < knots_to_solve; ++k) {
    std::vector<Eigen::VectorXd> pi(M);
    for (int l = 0; l < M; ++l)
      pi[l] = opts.initial.empty()
                  ? Eigen::VectorXd::Zero(labels[l].agent->d).eval()
                  : opts.initial[l][k];
    Eigen::VectorXd zs = Eigen::VectorXd::Zero(M);

    double damping = 1.0;
    double prev_step = std::numeric_limits<double>::infinity();
    double step = 0.0;
    int it = 0;
    for (; it < opts.max_iter; ++it) {
      for (int l = 0; l < M; ++l) {
        double acc = 0.0;
        for (int v = 0; v < M; ++v)
          if (W(l, v) != 0.0)
            acc += W(l, v) * labels[v].at(k).sigma_star.dot(pi[v]);
        zs[l] = acc;
      }
      step = 0.0;
      for (int l = 0; l < M; ++l) {
        const LabelKnot& d = labels[l].at(k);
        const Eigen::VectorXd target =
            d.tr.sigma_tilde * (labels[l].agent->eta * d.theta) +
            d.tr.sigma_star_tilde * zs[l];
        const Eigen::VectorXd next =
            d.tr.varsigma_inv *
            project_scaled(labels[l].agent->constraint, d.tr.varsigma, target);
        const Eigen::VectorXd moved =
            damping == 1.0 ? next : (pi[l] + damping * (next - pi[l])).eval();
        step = std::max(step, (moved - pi[l]).lpNorm<Eigen::Infinity>());
        pi[l] = moved;
      }
      if (step <= opts.tol) break;
      if (step > prev_step) damping = 0.5;  // oscillation guard
      prev_step = step;
    }
    if (step > opts.tol)
      throw SolverError(
          "solve_graphon_equilibrium_det: Picard iteration did not reach " +
          std::to_string(opts.tol));
    for (int l = 0; l < M; ++l) {
      double acc = 0.0;
      for (int v = 0; v < M; ++v)
        if (W(l, v) != 0.0)
          acc += W(l, v) * labels[v].at(k).sigma_star.dot(pi[v]);
      zs[l] = acc;
    }
    const int fill_to = tconst ? steps : k + 1;
    for (int kk = k; kk < fill_to; ++kk)
      for (int l = 0; l < M; ++l) {
        eq.pi[l][kk] = pi[l];
        eq.z_star[l][kk] = zs[l];
      }
    worst_resid = std::max(worst_resid, step);
    worst_iters = std::max(worst_iters, it + 1);
  }
  eq.residual = worst_resid;
  eq.iterations = worst_iters;
  graphon_value(in, eq);
  return eq;
}

void graphon_value(const GraphonGameInputs& in, GraphonEquilibrium& eq) {
  in.validate();
  check_profile_shape(in, eq, "graphon_value");
  const int M = in.labels.labels;
  const std::vector<LabelData> labels = build_labels(in);
  eq.y0.assign(M, 0.0);
  eq.value0.assign(M, 0.0);
  eq.benchmark.assign(M, 0.0);
  for (int l = 0; l < M; ++l) {
    const GraphonLabelValue v = label_value(in, labels, eq, in.labels.u(l));
    eq.y0[l] = v.y0;
    eq.value0[l] = v.value0;
    eq.benchmark[l] = v.benchmark;
  }
}

Eigen::VectorXd graphon_strategy_at(const GraphonGameInputs& in,
                                    const GraphonEquilibrium& eq, double u,
                                    int knot) {
  in.validate();
  check_profile_shape(in, eq, "graphon_strategy_at");
  if (knot < 0 || knot >= in.grid.steps)
    throw ConfigError("graphon_strategy_at: knot out of range");
  const int M = in.labels.labels;
  const std::vector<LabelData> labels = build_labels(in);
  const AgentCoeffs& a = in.coeffs.at(u);
  const LabelKnot d = label_knot(a, knot);
  double zst = 0.0;
  for (int v = 0; v < M; ++v) {
    const double w =
        eval_graphon(in.kernel, u, in.labels.u(v)) * in.labels.weight();
    if (w != 0.0) zst += w * labels[v].at(knot).sigma_star.dot(eq.pi[v][knot]);
  }
  const Eigen::VectorXd target =
      d.tr.sigma_tilde * (a.eta * d.theta) + d.tr.sigma_star_tilde * zst;
  return d.tr.varsigma_inv *
         project_scaled(a.constraint, d.tr.varsigma, target);
}

GraphonLabelValue graphon_value_at(const GraphonGameInputs& in,
                                   const GraphonEquilibrium& eq, double u) {
  in.validate();
  check_profile_shape(in, eq, "graphon_value_at");
  const std::vector<LabelData> labels = build_labels(in);
  return label_value(in, labels, eq, u);
}

// ---------------------------------------------------------------------------

namespace {

// In one dimension every supported constraint is an interval; scaling by
// sigma > 0 scales its endpoints. Lets the LSMC driver project and measure
// distances with plain arithmetic.
struct ScalarInterval {
  double lo = -std::numeric_limits<double>::infinity();
  double hi = std::numeric_limits<double>::infinity();

  double clamp(double x) const { return std::min(std::max(x, lo), hi); }
  double dist(double x) const { return x - clamp(x); }
};

ScalarInterval scalar_interval(const ConvexSet& set, double sigma) {
  const double inf = std::numeric_limits<double>::infinity();
  ScalarInterval r;
  if (std::holds_alternative<FullSpace>(set)) {
    // unbounded both sides
  } else if (const auto* box = std::get_if<Box>(&set)) {
    r.lo = box->lower[0];
    r.hi = box->upper[0];
  } else if (const auto* ball = std::get_if<Ball>(&set)) {
    r.lo = ball->center[0] - ball->radius;
    r.hi = ball->center[0] + ball->radius;
  } else if (const auto* hs = std::get_if<HalfSpace>(&set)) {
    const double n = hs->normal[0];
    if (n > 0.0)
      r.hi = hs->offset / n;
    else if (n < 0.0)
      r.lo = hs->offset / n;
    // n == 0 with offset >= 0 is the whole line; validate_set rejects the rest
  } else {
    r.lo = 0.0;  // Orthant
  }
  if (r.lo != -inf) r.lo *= sigma;
  if (r.hi != inf) r.hi *= sigma;
  return r;
}

}  // namespace

GraphonBsdeResult picard_graphon_bsde(const GraphonGameInputs& in,
                                      const GraphonBsdeOptions& opts) {
  in.validate();
  if (opts.outer_iters < 1)
    throw ConfigError("picard_graphon_bsde: outer_iters must be >= 1");
  if (!(opts.tol > 0.0))
    throw ConfigError("picard_graphon_bsde: tol must be positive");
  for (const auto& seg : in.coeffs.segments) {
    if (seg.d != 1)
      throw CapabilityError(
          "picard_graphon_bsde: the regression state is scalar (d = 1 only)");
    for (const auto& v : seg.sigma_star.values)
      if (v.cwiseAbs().maxCoeff() != 0.0)
        throw CapabilityError(
            "picard_graphon_bsde: common-noise loadings must vanish "
            "(sigma_star = 0)");
  }

  const int M = in.labels.labels;
  const int steps = in.grid.steps;
  const std::vector<LabelData> labels = build_labels(in);
  const Eigen::MatrixXd W = quad_weights(in);

  // Per-label, per-interval scaled constraint intervals.
  std::vector<std::vector<ScalarInterval>> sets(M);
  for (int l = 0; l < M; ++l) {
    const int kn = labels[l].tconst ? 1 : steps;
    sets[l].reserve(kn);
    for (int k = 0; k < kn; ++k)
      sets[l].push_back(scalar_interval(labels[l].agent->constraint,
                                        labels[l].at(k).sigma[0]));
  }
  auto set_at = [&](int l, int k) -> const ScalarInterval& {
    return sets[l][labels[l].tconst ? 0 : k];
  };

  GraphonBsdeResult res;
  res.mean_field = Eigen::MatrixXd::Zero(M, steps);
  res.y0.assign(M, 0.0);

  Eigen::MatrixXd gbar(M, steps);  // per-label drift aggregate estimate
  int growing = 0;
  for (int r = 1; r <= opts.outer_iters; ++r) {
    for (int l = 0; l < M; ++l) {
      const double eta = labels[l].agent->eta;
      const auto driver = [&](double t, double w, double z) {
        const int k = in.grid.interval(t);
        const double th = labels[l].at(k).theta[0] + opts.kappa * w;
        const double v = z + eta * th;
        const double dd = set_at(l, k).dist(v);
        return -0.5 * eta * th * th - z * th + dd * dd / (2.0 * eta) +
               res.mean_field(l, k);
      };
      LsmcOptions lopts;
      lopts.paths = opts.paths;
      lopts.degree = opts.degree;
      lopts.picard_sweeps = opts.inner_sweeps;
      lopts.seed = opts.seed;
      lopts.stream = l;
      lopts.store_paths = true;
      const LsmcSolution sol = solve_bsde_lsmc(
          in.grid, driver, [](double) { return 0.0; }, lopts);
      res.y0[l] = sol.y0;
      for (double m : sol.diag.martingale_residual)
        res.max_martingale_residual =
            std::max(res.max_martingale_residual, m);
      // Estimated drift of the equilibrium control:
      // E[ strat(Z).sigma theta ] = E[ P_{sigma A}(Z + eta theta) theta ].
      for (int k = 0; k < steps; ++k) {
        double acc = 0.0;
        for (int p = 0; p < opts.paths; ++p) {
          const double th =
              labels[l].at(k).theta[0] + opts.kappa * sol.w_paths(p, k);
          acc += set_at(l, k).clamp(sol.z_paths(p, k) + eta * th) * th;
        }
        gbar(l, k) = acc / opts.paths;
      }
    }
    Eigen::MatrixXd m_next = W * gbar;
    const double gap = (m_next - res.mean_field).cwiseAbs().maxCoeff();
    res.mean_field = m_next;
    res.iterations = r;
    if (!res.outer_gaps.empty() && gap > res.outer_gaps.back())
      ++growing;
    else
      growing = 0;
    res.outer_gaps.push_back(gap);
    if (gap <= opts.tol) {
      res.converged = true;
      break;
    }
    if (growing >= 3) {
      res.diverged = true;
      break;
    }
  }

  res.value0.assign(M, 0.0);
  res.benchmark.assign(M, 0.0);
  for (int l = 0; l < M; ++l) {
    double bench = 0.0;
    for (int v = 0; v < M; ++v)
      bench += W(l, v) * initial_wealth_mean(labels[v].agent->xi);
    res.benchmark[l] = bench;
    const AgentCoeffs& a = *labels[l].agent;
    res.value0[l] =
        initial_wealth_deterministic(a.xi)
            ? utility(initial_wealth_mean(a.xi), bench + res.y0[l], a.eta).value
            : std::numeric_limits<double>::quiet_NaN();
  }
  return res;
}

// ---------------------------------------------------------------------------

SmallTimeResult picard_graphon_fbsde_small_time(const GraphonGameInputs& in,
                                                const SmallTimeOptions& opts) {
  in.validate();
  if (opts.max_iter < 1)
    throw ConfigError("picard_graphon_fbsde_small_time: max_iter must be >= 1");
  const int M = in.labels.labels;
  const int steps = in.grid.steps;
  const double dt = in.grid.dt();
  const std::vector<LabelData> labels = build_labels(in);
  const Eigen::MatrixXd W = quad_weights(in);

  struct Profile {
    std::vector<Strategy> pi;
    std::vector<std::vector<double>> x;
    std::vector<std::vector<double>> y;
    std::vector<double> bench;
  };

  // One forward-backward pass against the frozen profile `from`.
  const auto apply = [&](const Profile& from) {
    Profile out;
    out.pi.assign(M, Strategy(steps));
    out.x.assign(M, std::vector<double>(steps + 1, 0.0));
    out.y.assign(M, std::vector<double>(steps + 1, 0.0));
    out.bench.assign(M, 0.0);
    for (int l = 0; l < M; ++l) {
      double b = 0.0;
      for (int v = 0; v < M; ++v) b += W(l, v) * from.x[v][steps];
      out.bench[l] = b;
    }
    for (int l = 0; l < M; ++l) {
      const AgentCoeffs& a = *labels[l].agent;
      std::vector<double> f(steps, 0.0);
      for (int k = 0; k < steps; ++k) {
        const LabelKnot& d = labels[l].at(k);
        double zst = 0.0;
        for (int v = 0; v < M; ++v)
          if (W(l, v) != 0.0)
            zst += W(l, v) * labels[v].at(k).sigma_star.dot(from.pi[v][k]);
        const Eigen::VectorXd target =
            d.tr.sigma_tilde * (a.eta * d.theta) + d.tr.sigma_star_tilde * zst;
        const Eigen::VectorXd proj =
            project_scaled(a.constraint, d.tr.varsigma, target);
        out.pi[l][k] = d.tr.varsigma_inv * proj;
        const double dd = (target - proj).norm();
        f[k] = -0.5 * a.eta * d.theta.squaredNorm() + dd * dd / (2.0 * a.eta);
      }
      out.y[l][steps] = out.bench[l];
      for (int k = steps - 1; k >= 0; --k)
        out.y[l][k] = out.y[l][k + 1] + f[k] * dt;
      out.x[l][0] = initial_wealth_mean(a.xi);
      for (int k = 0; k < steps; ++k) {
        const LabelKnot& d = labels[l].at(k);
        out.x[l][k + 1] =
            out.x[l][k] +
            out.pi[l][k].dot(d.sigma.cwiseProduct(d.theta)) * dt;
      }
    }
    return out;
  };

  const auto gap_between = [&](const Profile& a, const Profile& b) {
    double g = 0.0;
    for (int l = 0; l < M; ++l) {
      for (int k = 0; k < steps; ++k)
        g = std::max(g, (a.pi[l][k] - b.pi[l][k]).lpNorm<Eigen::Infinity>());
      for (int k = 0; k <= steps; ++k) {
        g = std::max(g, std::fabs(a.x[l][k] - b.x[l][k]));
        g = std::max(g, std::fabs(a.y[l][k] - b.y[l][k]));
      }
    }
    return g;
  };

  // Start from the interaction-free pass: the image of the zero profile.
  Profile zero;
  zero.pi.assign(M, Strategy(steps));
  zero.x.assign(M, std::vector<double>(steps + 1, 0.0));
  for (int l = 0; l < M; ++l) {
    for (int k = 0; k < steps; ++k)
      zero.pi[l][k] = Eigen::VectorXd::Zero(labels[l].agent->d);
    const double x0 = initial_wealth_mean(labels[l].agent->xi);
    for (int k = 0; k <= steps; ++k) zero.x[l][k] = x0;
  }
  Profile cur = apply(zero);

  SmallTimeResult res;
  for (int r = 1; r <= opts.max_iter; ++r) {
    Profile next = apply(cur);
    const double gap = gap_between(next, cur);
    res.gaps.push_back(gap);
    res.iterations = r;
    cur = std::move(next);
    if (r >= 2) {
      const double prev = res.gaps[r - 2];
      const double factor = prev > 0.0 ? gap / prev : 0.0;
      res.factors.push_back(factor);
      if (gap <= opts.tol) {
        res.converged = true;
        break;
      }
      if (factor >= 1.0) {
        res.horizon_too_large = true;
        break;
      }
    } else if (gap <= opts.tol) {
      res.converged = true;
      break;
    }
  }

  res.pi = std::move(cur.pi);
  res.x_mean = std::move(cur.x);
  res.benchmark = std::move(cur.bench);
  res.y0.assign(M, 0.0);
  res.value0.assign(M, 0.0);
  for (int l = 0; l < M; ++l) {
    res.y0[l] = cur.y[l][0];
    const AgentCoeffs& a = *labels[l].agent;
    res.value0[l] =
        initial_wealth_deterministic(a.xi)
            ? utility(initial_wealth_mean(a.xi), res.y0[l], a.eta).value
            : std::numeric_limits<double>::quiet_NaN();
  }
  return res;
}

}  // namespace relperf

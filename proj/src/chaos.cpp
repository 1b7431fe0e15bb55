#include "relperf/chaos.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>

#include "relperf/errors.hpp"
#include "relperf/parallel.hpp"
#include "relperf/rng.hpp"

namespace relperf {

namespace {

constexpr double kNaN = std::numeric_limits<double>::quiet_NaN();

// Distinct id0 channels so graph, wealth, cut, and xi streams never collide.
constexpr std::uint64_t kGraphChannel = 0xA11CE;
constexpr std::uint64_t kXiWealthChannel = 0xBEEF;
constexpr std::uint64_t kXiGraphChannel = 0xFACE;
constexpr std::uint64_t kCutChannel = 0xC07;
constexpr std::uint64_t kXiChannel = 0x21E;

bool vectors_equal(const Eigen::VectorXd& a, const Eigen::VectorXd& b) {
  return a.size() == b.size() && (a.array() == b.array()).all();
}

bool piecewise_equal(const PiecewiseVec& a, const PiecewiseVec& b) {
  if (a.values.size() != b.values.size()) return false;
  for (std::size_t k = 0; k < a.values.size(); ++k)
    if (!vectors_equal(a.values[k], b.values[k])) return false;
  return true;
}

bool sets_equal(const ConvexSet& a, const ConvexSet& b) {
  if (a.index() != b.index()) return false;
  if (const auto* box = std::get_if<Box>(&a)) {
    const auto& other = std::get<Box>(b);
    return vectors_equal(box->lower, other.lower) &&
           vectors_equal(box->upper, other.upper);
  }
  if (const auto* ball = std::get_if<Ball>(&a)) {
    const auto& other = std::get<Ball>(b);
    return vectors_equal(ball->center, other.center) &&
           ball->radius == other.radius;
  }
  if (const auto* half = std::get_if<HalfSpace>(&a)) {
    const auto& other = std::get<HalfSpace>(b);
    return vectors_equal(half->normal, other.normal) &&
           half->offset == other.offset;
  }
  return true;  // FullSpace / Orthant carry no data
}

double deterministic_xi(const AgentCoeffs& agent, const char* where) {
  if (const double* x = std::get_if<double>(&agent.xi)) return *x;
  throw CapabilityError(std::string(where) +
                        ": requires deterministic initial wealth");
}

// Reference quadrature weights G(i/n, j/n)/(n-1) on the sampled positions.
// E[w_ij] equals this exactly, so the aggregate mismatches below are
// mean-zero given the strategies.
Eigen::MatrixXd reference_weights(const Graphon& g, int n) {
  Eigen::MatrixXd r(n, n);
  for (int i = 0; i < n; ++i) {
    const double pi_ = (i + 1.0) / n;
    for (int j = 0; j < n; ++j)
      r(i, j) = eval_graphon(g, pi_, (j + 1.0) / n) / (n - 1.0);
  }
  return r;
}

struct SampledGraphGame {
  Eigen::MatrixXd weights;
  int rejected = 0;
};

// Samples until the normalized weights satisfy the row-sum constraint,
// counting rejected graphs. Attempts are seeded by (seed, n, rep, attempt)
// so the result is independent of scheduling.
SampledGraphGame sample_admissible_weights(const Graphon& kernel, int n,
                                           double beta_n, std::uint64_t seed,
                                           std::uint64_t rep, int max_retries) {
  SampledGraphGame out;
  for (int attempt = 0; attempt < max_retries; ++attempt) {
    const std::uint64_t graph_seed =
        rng::key(seed, kGraphChannel, static_cast<std::uint64_t>(n), rep,
                 static_cast<std::uint64_t>(attempt));
    InteractionGraph graph = sample_interaction_graph(kernel, n, beta_n, graph_seed);
    try {
      out.weights = normalized_weights(graph);
      return out;
    } catch (const ConfigError&) {
      ++out.rejected;
    }
  }
  throw SolverError("graph sampling: row-sum rejection budget exhausted (" +
                    std::to_string(out.rejected) + " rejected graphs)");
}

struct LevelSeries {
  std::vector<double> n;
  std::vector<double> mean;
};

SlopeFit fit_slope(const LevelSeries& s) {
  std::vector<double> x, y;
  for (std::size_t a = 0; a < s.mean.size(); ++a) {
    if (s.mean[a] > 0.0 && std::isfinite(s.mean[a])) {
      x.push_back(std::log(s.n[a]));
      y.push_back(std::log(s.mean[a]));
    }
  }
  SlopeFit fit;
  if (x.size() < 2) {
    fit.degenerate = true;
    return fit;
  }
  const double xbar = std::accumulate(x.begin(), x.end(), 0.0) / x.size();
  const double ybar = std::accumulate(y.begin(), y.end(), 0.0) / y.size();
  double sxy = 0.0, sxx = 0.0;
  for (std::size_t k = 0; k < x.size(); ++k) {
    sxy += (x[k] - xbar) * (y[k] - ybar);
    sxx += (x[k] - xbar) * (x[k] - xbar);
  }
  fit.slope = sxy / sxx;
  return fit;
}

std::vector<double> average_ranks(const std::vector<double>& v) {
  const std::size_t m = v.size();
  std::vector<std::size_t> order(m);
  std::iota(order.begin(), order.end(), 0);
  std::sort(order.begin(), order.end(),
            [&](std::size_t a, std::size_t b) { return v[a] < v[b]; });
  std::vector<double> ranks(m, 0.0);
  std::size_t k = 0;
  while (k < m) {
    std::size_t end = k + 1;
    while (end < m && v[order[end]] == v[order[k]]) ++end;
    const double r = 0.5 * (k + end - 1) + 1.0;  // average rank, 1-based
    for (std::size_t q = k; q < end; ++q) ranks[order[q]] = r;
    k = end;
  }
  return ranks;
}

double spearman(const std::vector<double>& a, const std::vector<double>& b) {
  const std::vector<double> ra = average_ranks(a), rb = average_ranks(b);
  const std::size_t m = ra.size();
  if (m < 2) return 0.0;
  const double abar = std::accumulate(ra.begin(), ra.end(), 0.0) / m;
  const double bbar = std::accumulate(rb.begin(), rb.end(), 0.0) / m;
  double sab = 0.0, saa = 0.0, sbb = 0.0;
  for (std::size_t k = 0; k < m; ++k) {
    sab += (ra[k] - abar) * (rb[k] - bbar);
    saa += (ra[k] - abar) * (ra[k] - abar);
    sbb += (rb[k] - bbar) * (rb[k] - bbar);
  }
  if (saa == 0.0 || sbb == 0.0) return 0.0;
  return sab / std::sqrt(saa * sbb);
}

int adjacent_inversions(const std::vector<double>& means) {
  int count = 0;
  for (std::size_t a = 0; a + 1 < means.size(); ++a)
    if (!(means[a + 1] < means[a])) ++count;
  return count;
}

MetricStat stat_of(const std::vector<double>& xs) {
  MetricStat s;
  if (xs.empty()) {
    s.mean = kNaN;
    s.se = kNaN;
    return s;
  }
  s.mean = std::accumulate(xs.begin(), xs.end(), 0.0) / xs.size();
  if (xs.size() > 1) {
    double ss = 0.0;
    for (double x : xs) ss += (x - s.mean) * (x - s.mean);
    s.se = std::sqrt(ss / (xs.size() - 1.0) / xs.size());
  }
  return s;
}

}  // namespace

void validate_beta_rule(const BetaRule& rule) {
  if (const auto* c = std::get_if<ConstantBeta>(&rule)) {
    if (!(c->beta > 0.0) || c->beta > 1.0)
      throw ConfigError("beta rule: constant beta must lie in (0, 1]");
    return;
  }
  const auto& p = std::get<PowerBeta>(rule);
  if (!(p.gamma >= 0.0) || !(p.gamma < 0.5))
    throw ConfigError(
        "beta rule: power exponent gamma must lie in [0, 1/2) so that "
        "n beta_n^2 diverges");
}

double beta_value(const BetaRule& rule, int n) {
  if (const auto* c = std::get_if<ConstantBeta>(&rule)) return c->beta;
  return std::pow(static_cast<double>(n), -std::get<PowerBeta>(rule).gamma);
}

int nearest_label(int agent, int n, int labels) {
  return step_block_index((agent + 1.0) / n, labels) - 1;
}

ComparisonError strategy_and_value_error(const FiniteEquilibrium& fin,
                                         const GraphonEquilibrium& gr,
                                         const TimeGrid& grid) {
  grid.validate();
  const int n = static_cast<int>(fin.pi.size());
  const int labels = static_cast<int>(gr.pi.size());
  if (n < 1 || labels < 1)
    throw ConfigError("strategy_and_value_error: empty equilibrium");
  const int steps = grid.steps;
  if (static_cast<int>(fin.pi.front().size()) != steps ||
      static_cast<int>(gr.pi.front().size()) != steps)
    throw ConfigError(
        "strategy_and_value_error: equilibria do not share the time grid");
  if (static_cast<int>(fin.value0.size()) != n ||
      static_cast<int>(gr.value0.size()) != labels)
    throw ConfigError("strategy_and_value_error: missing values");

  const double dt = grid.dt();
  ComparisonError err;
  for (int i = 0; i < n; ++i) {
    const int l = nearest_label(i, n, labels);
    double acc = 0.0;
    for (int k = 0; k < steps; ++k) {
      if (fin.pi[i][k].size() != gr.pi[l][k].size())
        throw ConfigError("strategy_and_value_error: dimension mismatch");
      acc += (fin.pi[i][k] - gr.pi[l][k]).squaredNorm() * dt;
    }
    err.strategy_error += acc;
    err.value_error += std::abs(fin.value0[i] - gr.value0[l]);
  }
  err.strategy_error /= n;
  err.value_error /= n;
  return err;
}

GammaError gamma_error(const GameInputs& fin_in, const FiniteEquilibrium& fin,
                       const GraphonGameInputs& gr_in,
                       const GraphonEquilibrium& gr) {
  const int n = fin_in.n();
  const int labels = gr_in.labels.labels;
  const int steps = fin_in.grid.steps;
  if (static_cast<int>(fin.pi.size()) != n)
    throw ConfigError("gamma_error: equilibrium does not match the game");
  if (static_cast<int>(gr.pi.size()) != labels)
    throw ConfigError("gamma_error: graphon equilibrium label count mismatch");
  if (gr_in.grid.steps != steps || gr_in.grid.T != fin_in.grid.T)
    throw ConfigError("gamma_error: games do not share the time grid");

  // Per-interval control pairings pi.theta and sigma_star.pi, one row per
  // finite agent and per label bucket.
  auto drift = [](const AgentCoeffs& a, const Eigen::VectorXd& pi, int k) {
    return pi.dot(a.theta.at(k));
  };
  auto exposure = [](const AgentCoeffs& a, const Eigen::VectorXd& pi, int k) {
    return a.sigma_star.at(k).dot(pi);
  };

  Eigen::MatrixXd fd(n, steps), fe(n, steps);
  for (int j = 0; j < n; ++j)
    for (int k = 0; k < steps; ++k) {
      fd(j, k) = drift(fin_in.agents[j], fin.pi[j][k], k);
      fe(j, k) = exposure(fin_in.agents[j], fin.pi[j][k], k);
    }
  Eigen::MatrixXd gd(labels, steps), ge(labels, steps);
  for (int l = 0; l < labels; ++l) {
    const AgentCoeffs& cl = gr_in.coeffs.at(gr_in.labels.u(l));
    for (int k = 0; k < steps; ++k) {
      gd(l, k) = drift(cl, gr.pi[l][k], k);
      ge(l, k) = exposure(cl, gr.pi[l][k], k);
    }
  }
  std::vector<int> bucket(n);
  for (int j = 0; j < n; ++j) bucket[j] = nearest_label(j, n, labels);

  const Eigen::MatrixXd ref = reference_weights(gr_in.kernel, n);
  const double dt = fin_in.grid.dt();
  GammaError out;
  for (int i = 0; i < n; ++i) {
    for (int k = 0; k < steps; ++k) {
      double game_drift = 0.0, ref_drift = 0.0;
      double game_expo = 0.0, ref_expo = 0.0;
      for (int j = 0; j < n; ++j) {
        if (j == i) continue;
        game_drift += fin_in.weights(i, j) * fd(j, k);
        ref_drift += ref(i, j) * gd(bucket[j], k);
        game_expo += fin_in.weights(i, j) * fe(j, k);
        ref_expo += ref(i, j) * ge(bucket[j], k);
      }
      const double g = game_drift - ref_drift;
      const double gs = game_expo - ref_expo;
      out.gamma += g * g * dt;
      out.gamma_star += gs * gs * dt;
    }
  }
  out.gamma /= n;
  out.gamma_star /= n;
  return out;
}

XiError xi_error(int n, double beta_n, const Graphon& g, const NormalLaw& xi_law,
                 int draws, std::uint64_t seed) {
  if (n < 2) throw ConfigError("xi_error: need at least two agents");
  if (!(beta_n > 0.0) || beta_n > 1.0)
    throw ConfigError("xi_error: beta_n must lie in (0, 1]");
  if (draws < 1) throw ConfigError("xi_error: draws must be >= 1");
  if (!(xi_law.sd >= 0.0)) throw ConfigError("xi_error: sd must be >= 0");
  validate_graphon(g);

  const Eigen::MatrixXd ref = reference_weights(g, n);
  Eigen::VectorXd ref_benchmark(n);
  for (int i = 0; i < n; ++i) {
    double acc = 0.0;
    for (int j = 0; j < n; ++j) {
      if (j == i) continue;
      acc += ref(i, j) * xi_law.mean;
    }
    ref_benchmark(i) = acc;
  }

  XiError out;
  out.draws = draws;
  double sum = 0.0, sumsq = 0.0;
  Eigen::VectorXd xi(n);
  for (int r = 0; r < draws; ++r) {
    SampledGraphGame sampled = sample_admissible_weights(
        g, n, beta_n, rng::key(seed, kXiGraphChannel), static_cast<std::uint64_t>(r),
        100);
    out.rejected_graphs += sampled.rejected;
    const std::uint64_t wseed = rng::key(seed, kXiWealthChannel, r);
    for (int j = 0; j < n; ++j)
      xi(j) = xi_law.mean + xi_law.sd * rng::gaussian(wseed, j);
    double value = 0.0;
    for (int i = 0; i < n; ++i) {
      double acc = 0.0;
      for (int j = 0; j < n; ++j) {
        if (j == i) continue;
        acc += sampled.weights(i, j) * xi(j);
      }
      const double d = acc - ref_benchmark(i);
      value += d * d;
    }
    value /= n;
    sum += value;
    sumsq += value * value;
  }
  out.value = sum / draws;
  if (draws > 1) {
    const double var = (sumsq - sum * sum / draws) / (draws - 1.0);
    out.se = std::sqrt(std::max(0.0, var) / draws);
  }
  return out;
}

void ChaosConfig::validate() const {
  grid.validate();
  labels.validate();
  coeffs.validate(grid);
  validate_beta_rule(beta_rule);
  if (n_schedule.empty()) throw ConfigError("chaos: n_schedule is empty");
  for (std::size_t a = 0; a < n_schedule.size(); ++a) {
    if (n_schedule[a] < 2)
      throw ConfigError("chaos: every n must be >= 2");
    if (a > 0 && n_schedule[a] <= n_schedule[a - 1])
      throw ConfigError("chaos: n_schedule must be strictly increasing");
  }
  if (reps < 1) throw ConfigError("chaos: reps must be >= 1");
  if (xi_draws < 1) throw ConfigError("chaos: xi_draws must be >= 1");
  if (cut_refine < 2) throw ConfigError("chaos: cut_refine must be >= 2");
  if (max_graph_retries < 1)
    throw ConfigError("chaos: max_graph_retries must be >= 1");

  // The limit theorem is stated for populations homogeneous in market price
  // of risk, risk tolerance, dimension, and constraint set; initial wealth
  // must be deterministic for the value comparison.
  const AgentCoeffs& first = coeffs.segments.front();
  const double xi0 = deterministic_xi(first, "chaos");
  for (const AgentCoeffs& seg : coeffs.segments) {
    if (seg.d != first.d)
      throw CapabilityError("chaos: all labels must share the dimension");
    if (seg.eta != first.eta)
      throw CapabilityError("chaos: all labels must share the risk tolerance");
    if (!piecewise_equal(seg.theta, first.theta))
      throw CapabilityError(
          "chaos: all labels must share the market price of risk");
    if (!sets_equal(seg.constraint, first.constraint))
      throw CapabilityError("chaos: all labels must share the constraint set");
    if (deterministic_xi(seg, "chaos") != xi0)
      throw CapabilityError("chaos: all labels must share the initial wealth");
  }
}

ChaosReport run_experiment(const ChaosConfig& cfg) {
  cfg.validate();

  GraphonGameInputs gin;
  gin.coeffs = cfg.coeffs;
  gin.kernel = cfg.kernel;
  gin.labels = cfg.labels;
  gin.grid = cfg.grid;
  const GraphonEquilibrium graphon_eq = solve_graphon_equilibrium_det(gin);

  const int levels_n = static_cast<int>(cfg.n_schedule.size());
  ChaosReport report;
  report.cells.assign(static_cast<std::size_t>(levels_n) * cfg.reps, ChaosCell{});

  parallel_for(levels_n * cfg.reps, [&](int c) {
    const int a = c / cfg.reps;
    const int r = c % cfg.reps;
    const int n = cfg.n_schedule[a];
    const double beta_n = beta_value(cfg.beta_rule, n);
    ChaosCell& cell = report.cells[c];
    cell.n = n;
    cell.rep = r;
    cell.strategy_error = kNaN;
    cell.value_error = kNaN;
    cell.gamma_error = kNaN;
    cell.gamma_star_error = kNaN;
    SampledGraphGame sampled;
    try {
      sampled = sample_admissible_weights(cfg.kernel, n, beta_n, cfg.seed,
                                          static_cast<std::uint64_t>(r),
                                          cfg.max_graph_retries);
    } catch (const SolverError& e) {
      cell.rejected_graphs = cfg.max_graph_retries;
      cell.failure = e.what();
      return;
    }
    cell.graph_ok = true;
    cell.rejected_graphs = sampled.rejected;
    try {
      GameInputs fin_in;
      fin_in.grid = cfg.grid;
      fin_in.weights = std::move(sampled.weights);
      fin_in.agents.reserve(n);
      for (int i = 0; i < n; ++i)
        fin_in.agents.push_back(cfg.coeffs.at((i + 1.0) / n));

      const FiniteEquilibrium fin = solve_equilibrium_det(fin_in);
      const ComparisonError cmp =
          strategy_and_value_error(fin, graphon_eq, cfg.grid);
      const GammaError gam = gamma_error(fin_in, fin, gin, graphon_eq);
      cell.strategy_error = cmp.strategy_error;
      cell.value_error = cmp.value_error;
      cell.gamma_error = gam.gamma;
      cell.gamma_star_error = gam.gamma_star;
      cell.ok = true;
    } catch (const SolverError& e) {
      cell.failure = e.what();
    }
  });

  int failed = 0;
  for (const ChaosCell& cell : report.cells)
    if (!cell.ok) ++failed;
  if (5 * failed > static_cast<int>(report.cells.size()))
    throw SolverError("chaos: " + std::to_string(failed) + " of " +
                      std::to_string(report.cells.size()) +
                      " cells failed (more than 20%)");

  const NormalLaw xi_law{
      std::get<double>(cfg.coeffs.segments.front().xi), 0.0};

  report.levels.resize(levels_n);
  for (int a = 0; a < levels_n; ++a) {
    ChaosLevel& level = report.levels[a];
    level.n = cfg.n_schedule[a];
    level.beta_n = beta_value(cfg.beta_rule, level.n);

    std::vector<double> se_, ve, ge_, gse;
    int rejected = 0, obtained = 0;
    for (int r = 0; r < cfg.reps; ++r) {
      const ChaosCell& cell = report.cells[a * cfg.reps + r];
      rejected += cell.rejected_graphs;
      if (cell.graph_ok) ++obtained;
      if (!cell.ok) {
        ++level.cells_failed;
        continue;
      }
      ++level.cells_ok;
      se_.push_back(cell.strategy_error);
      ve.push_back(cell.value_error);
      ge_.push_back(cell.gamma_error);
      gse.push_back(cell.gamma_star_error);
    }
    const int attempts = rejected + obtained;
    level.rejection_rate =
        attempts > 0 ? static_cast<double>(rejected) / attempts : 0.0;
    level.strategy_error = stat_of(se_);
    level.value_error = stat_of(ve);
    level.gamma_error = stat_of(ge_);
    level.gamma_star_error = stat_of(gse);

    level.xi = xi_error(level.n, level.beta_n, cfg.kernel, xi_law, cfg.xi_draws,
                        rng::key(cfg.seed, kXiChannel, level.n));

    CutNormOptions cut_opts;
    cut_opts.allow_heuristic = true;
    cut_opts.heuristic_seed = rng::key(cfg.seed, kCutChannel, level.n);
    const CutNormResult cut =
        cut_norm(project_step(cfg.kernel, level.n),
                 project_step(cfg.kernel, cfg.cut_refine * level.n), cut_opts);
    level.cut_distance = cut.value;
    level.cut_exact = cut.exact;
  }

  // Bound C (1/(n beta_n) + 1/n + n^2 cut^2), calibrated so it matches the
  // mean aggregate mismatch at the smallest population.
  auto bound_expr = [](const ChaosLevel& level) {
    const double cut2 = level.cut_distance * level.cut_distance;
    return 1.0 / (level.n * level.beta_n) + 1.0 / level.n +
           static_cast<double>(level.n) * level.n * cut2;
  };
  const double expr0 = bound_expr(report.levels.front());
  const double gamma0 = report.levels.front().gamma_error.mean;
  report.bound_constant =
      (std::isfinite(gamma0) && expr0 > 0.0) ? gamma0 / expr0 : kNaN;
  for (ChaosLevel& level : report.levels)
    level.bound_value = report.bound_constant * bound_expr(level);

  LevelSeries strat, value, gamma_, gamma_s, xi_;
  for (const ChaosLevel& level : report.levels) {
    const double n = level.n;
    strat.n.push_back(n);
    strat.mean.push_back(level.strategy_error.mean);
    value.n.push_back(n);
    value.mean.push_back(level.value_error.mean);
    gamma_.n.push_back(n);
    gamma_.mean.push_back(level.gamma_error.mean);
    gamma_s.n.push_back(n);
    gamma_s.mean.push_back(level.gamma_star_error.mean);
    xi_.n.push_back(n);
    xi_.mean.push_back(level.xi.value);
  }
  report.slope_strategy = fit_slope(strat);
  report.slope_value = fit_slope(value);
  report.slope_gamma = fit_slope(gamma_);
  report.slope_gamma_star = fit_slope(gamma_s);
  report.slope_xi = fit_slope(xi_);
  report.spearman_strategy = spearman(strat.n, strat.mean);
  report.inversions_strategy = adjacent_inversions(strat.mean);
  report.inversions_value = adjacent_inversions(value.mean);
  return report;
}

}  // namespace relperf

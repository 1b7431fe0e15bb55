#include "relperf/bsde.hpp"

#include <algorithm>
#include <cmath>
#include <string>

#include "relperf/market.hpp"

namespace relperf {

namespace {

double integrate_backward(const TimeGrid& grid,
                          const std::function<double(double, double)>& f,
                          double terminal, int substeps,
                          std::vector<double>* knots) {
  if (knots) {
    knots->assign(grid.steps + 1, 0.0);
    (*knots)[grid.steps] = terminal;
  }
  double y = terminal;
  for (int k = grid.steps - 1; k >= 0; --k) {
    const double a = grid.t(k);
    const double b = grid.t(k + 1);
    const double h = (b - a) / substeps;
    const double eps = h * 1e-9;
    for (int s = substeps - 1; s >= 0; --s) {
      const double lo = a + s * h;
      const double hi = lo + h;
      const double mid = 0.5 * (lo + hi);
      const double k1 = f(hi - eps, y);
      const double k2 = f(mid, y + 0.5 * h * k1);
      const double k3 = f(mid, y + 0.5 * h * k2);
      const double k4 = f(lo + eps, y + h * k3);
      y += h * (k1 + 2.0 * k2 + 2.0 * k3 + k4) / 6.0;
      if (!std::isfinite(y))
        throw SolverError("solve_bsde_ode: solution became non-finite");
    }
    if (knots) (*knots)[k] = y;
  }
  return y;
}

}  // namespace

OdeSolution solve_bsde_ode(const TimeGrid& grid,
                           const std::function<double(double, double)>& f,
                           double terminal, const OdeOptions& opts) {
  grid.validate();
  if (opts.substeps < 1)
    throw ConfigError("solve_bsde_ode: substeps must be >= 1");
  OdeSolution sol;
  sol.y0 = integrate_backward(grid, f, terminal, opts.substeps, &sol.y);
  if (opts.stability_check) {
    const double fine =
        integrate_backward(grid, f, terminal, 2 * opts.substeps, nullptr);
    if (std::fabs(fine - sol.y0) > opts.stability_tol * std::max(1.0, std::fabs(sol.y0)))
      throw SolverError(
          "solve_bsde_ode: halved-step solution differs by " +
          std::to_string(std::fabs(fine - sol.y0)) +
          "; refine the grid or raise substeps");
  }
  return sol;
}

namespace {

// Least-squares fit of target on polynomials in w, evaluated back on w.
// The state is standardized first; a zero-variance state collapses the fit
// to the cross-sectional mean.
Eigen::VectorXd poly_fit(const Eigen::VectorXd& w, const Eigen::VectorXd& target,
                         int degree, bool* reduced) {
  const int p = static_cast<int>(w.size());
  const double mu = w.mean();
  const double sd = std::sqrt((w.array() - mu).square().sum() / p);
  if (!(sd > 1e-12))
    return Eigen::VectorXd::Constant(p, target.mean());
  Eigen::MatrixXd basis(p, degree + 1);
  basis.col(0).setOnes();
  const Eigen::ArrayXd s = (w.array() - mu) / sd;
  for (int q = 1; q <= degree; ++q)
    basis.col(q) = basis.col(q - 1).array() * s;
  Eigen::ColPivHouseholderQR<Eigen::MatrixXd> qr(basis);
  if (qr.rank() < degree + 1 && reduced) *reduced = true;
  const Eigen::VectorXd coef = qr.solve(target);
  return basis * coef;
}

void clip_to_band(Eigen::VectorXd& v, double sds) {
  const int p = static_cast<int>(v.size());
  const double mu = v.mean();
  const double sd = std::sqrt((v.array() - mu).square().sum() / p);
  if (!(sd > 0.0)) return;
  const double lo = mu - sds * sd, hi = mu + sds * sd;
  for (int i = 0; i < p; ++i) v[i] = std::clamp(v[i], lo, hi);
}

}  // namespace

LsmcSolution solve_bsde_lsmc(
    const TimeGrid& grid,
    const std::function<double(double t, double w, double z)>& driver,
    const std::function<double(double w)>& terminal, const LsmcOptions& opts) {
  grid.validate();
  if (opts.paths < 100)
    throw ConfigError("solve_bsde_lsmc: needs at least 100 paths");
  if (opts.degree < 0) throw ConfigError("solve_bsde_lsmc: degree must be >= 0");
  if (opts.picard_sweeps < 1)
    throw ConfigError("solve_bsde_lsmc: picard_sweeps must be >= 1");
  const int paths = opts.paths;
  const int steps = grid.steps;
  const double dt = grid.dt();
  const std::uint64_t slot = noise_slot_agent(opts.stream, 0);

  Eigen::MatrixXd w(paths, steps + 1);
  Eigen::MatrixXd dw(paths, steps);
  w.col(0).setZero();
  for (int k = 0; k < steps; ++k) {
    for (int p = 0; p < paths; ++p)
      dw(p, k) = brownian_increment(opts.seed, p, k, slot, dt);
    w.col(k + 1) = w.col(k) + dw.col(k);
  }

  Eigen::VectorXd y_terminal(paths);
  for (int p = 0; p < paths; ++p) y_terminal[p] = terminal(w(p, steps));

  LsmcSolution sol;
  Eigen::MatrixXd z_frozen = Eigen::MatrixXd::Zero(paths, steps);
  Eigen::MatrixXd z_latest = z_frozen;
  double prev_y0 = 0.0;
  int growing = 0;
  for (int sweep = 0; sweep < opts.picard_sweeps; ++sweep) {
    sol.diag.martingale_residual.assign(steps, 0.0);
    sol.y_mean.assign(steps + 1, 0.0);
    sol.z_mean.assign(steps, 0.0);
    Eigen::VectorXd y = y_terminal;
    sol.y_mean[steps] = y.mean();
    for (int k = steps - 1; k >= 0; --k) {
      const Eigen::VectorXd state = w.col(k);
      // Regressing the projection residual instead of Y itself leaves the
      // conditional expectation E[Y dW]/dt unchanged but strips the part of
      // Y that is measurable at t_k, which carries most of the MC variance.
      // A deterministic Y then yields an identically zero Z.
      const Eigen::VectorXd y_proj =
          poly_fit(state, y, opts.degree, &sol.diag.degree_reduced);
      const Eigen::VectorXd z_target =
          ((y - y_proj).array() * dw.col(k).array() / dt).matrix();
      Eigen::VectorXd z =
          poly_fit(state, z_target, opts.degree, &sol.diag.degree_reduced);
      clip_to_band(z, opts.z_clip_sds);
      z_latest.col(k) = z;
      sol.z_mean[k] = z.mean();

      const double tk = grid.t(k);
      Eigen::VectorXd y_target(paths);
      for (int p = 0; p < paths; ++p)
        y_target[p] = y[p] + driver(tk, state[p], z_frozen(p, k)) * dt;
      const Eigen::VectorXd y_next =
          poly_fit(state, y_target, opts.degree, &sol.diag.degree_reduced);
      sol.diag.martingale_residual[k] =
          std::fabs(y_target.mean() - y_next.mean());
      y = y_next;
      sol.y_mean[k] = y.mean();
    }
    sol.y0 = y.mean();
    if (!std::isfinite(sol.y0))
      throw SolverError("solve_bsde_lsmc: y0 became non-finite");
    if (sweep > 0) {
      const double gap = std::fabs(sol.y0 - prev_y0);
      if (!sol.diag.picard_gaps.empty() && gap > sol.diag.picard_gaps.back())
        ++growing;
      else
        growing = 0;
      sol.diag.picard_gaps.push_back(gap);
      if (growing >= 3)
        throw SolverError(
            "solve_bsde_lsmc: outer sweeps diverging (3 consecutive growing gaps)");
    }
    prev_y0 = sol.y0;
    z_frozen = z_latest;
  }
  if (opts.store_paths) {
    sol.w_paths = w;
    sol.z_paths = z_latest;
  }
  return sol;
}

}  // namespace relperf

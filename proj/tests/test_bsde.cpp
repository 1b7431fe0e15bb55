#include "doctest.h"

#include <cmath>
#include <vector>

#include "relperf/bsde.hpp"
#include "relperf/grids.hpp"

using namespace relperf;

TEST_CASE("backward integrator: zero and constant drivers are exact") {
  TimeGrid grid{2.0, 5};
  const auto zero = solve_bsde_ode(
      grid, [](double, double) { return 0.0; }, 0.7);
  CHECK(zero.y0 == 0.7);
  for (double v : zero.y) CHECK(v == 0.7);
  const auto c = solve_bsde_ode(
      grid, [](double, double) { return -0.3; }, 0.1);
  CHECK(c.y0 == doctest::Approx(0.1 - 0.3 * 2.0).epsilon(1e-15));
  CHECK(c.y[2] == doctest::Approx(0.1 - 0.3 * (2.0 - 2.0 * 2.0 / 5.0)).epsilon(1e-14));
}

TEST_CASE("backward integrator reads piecewise drivers from the right interval") {
  TimeGrid grid{1.0, 4};
  const std::vector<double> rates = {0.3, -0.8, 1.1, 0.25};
  auto f = [&](double t, double) { return rates[static_cast<std::size_t>(grid.interval(t))]; };
  const auto sol = solve_bsde_ode(grid, f, 0.0);
  double acc = 0.0;
  for (double r : rates) acc += r * grid.dt();
  CHECK(sol.y0 == doctest::Approx(acc).epsilon(1e-14));
  CHECK(sol.y[3] == doctest::Approx(rates[3] * grid.dt()).epsilon(1e-14));
  // The interval endpoints belong to exactly one piece; a shifted endpoint
  // would change y0 by dt * |rate jump| ~ 0.5, far above the tolerance.
}

TEST_CASE("backward integrator converges at fourth order") {
  // y(t) = exp(T - t) solves y' = -y with y(T) = 1, our convention with
  // f(t, y) = y.
  TimeGrid grid{1.0, 2};
  auto f = [](double, double y) { return y; };
  OdeOptions opts;
  opts.stability_check = false;
  std::vector<double> errs;
  for (int sub : {1, 2, 4, 8}) {
    opts.substeps = sub;
    const auto sol = solve_bsde_ode(grid, f, 1.0, opts);
    errs.push_back(std::fabs(sol.y0 - std::exp(1.0)));
  }
  for (std::size_t i = 0; i + 1 < errs.size(); ++i) {
    const double order = std::log2(errs[i] / errs[i + 1]);
    CHECK(order >= 3.5);
  }
}

TEST_CASE("stability check flags drivers that break the grid resolution") {
  TimeGrid grid{1.0, 1};
  // Discontinuity strictly inside the single interval: one-step RK4 cannot
  // integrate it, the halved-step comparison must catch that.
  auto f = [](double t, double) { return t < 0.37 ? 5.0 : -2.0; };
  CHECK_THROWS_AS(solve_bsde_ode(grid, f, 0.0), SolverError);
  OdeOptions loose;
  loose.stability_check = false;
  CHECK_NOTHROW(solve_bsde_ode(grid, f, 0.0, loose));
}

TEST_CASE("lsmc with zero driver prices a martingale") {
  TimeGrid grid{1.0, 10};
  LsmcOptions opts;
  opts.paths = 20000;
  opts.seed = 5;
  const auto sol = solve_bsde_lsmc(
      grid, [](double, double, double) { return 0.0; },
      [](double w) { return w; }, opts);
  CHECK(std::fabs(sol.y0) < 0.05);
  for (double z : sol.z_mean) CHECK(z == doctest::Approx(1.0).epsilon(0.05));
  for (double r : sol.diag.martingale_residual) CHECK(std::fabs(r) < 1e-10);
  CHECK(!sol.diag.degree_reduced);
}

TEST_CASE("lsmc recovers a linear-in-z driver") {
  // f = -z theta with terminal W_T: Y_t = W_t - theta (T - t), so
  // Y_0 = -theta T. The driver's z is frozen one sweep behind, so the value
  // needs at least two sweeps to appear.
  TimeGrid grid{1.0, 10};
  LsmcOptions opts;
  opts.paths = 20000;
  opts.seed = 11;
  const double theta = 0.3;
  const auto sol = solve_bsde_lsmc(
      grid, [&](double, double, double z) { return -z * theta; },
      [](double w) { return w; }, opts);
  CHECK(sol.y0 == doctest::Approx(-0.3).epsilon(0.05));
  REQUIRE(!sol.diag.picard_gaps.empty());
  CHECK(sol.diag.picard_gaps.back() < 0.01);
}

TEST_CASE("lsmc squared terminal recovers the quadratic variation") {
  TimeGrid grid{1.0, 8};
  LsmcOptions opts;
  opts.paths = 30000;
  opts.seed = 17;
  const auto sol = solve_bsde_lsmc(
      grid, [](double, double, double) { return 0.0; },
      [](double w) { return w * w; }, opts);
  CHECK(sol.y0 == doctest::Approx(1.0).epsilon(0.05));
  // Z_t = 2 W_t has cross-sectional mean near zero.
  for (double z : sol.z_mean) CHECK(std::fabs(z) < 0.08);
}

TEST_CASE("lsmc is deterministic in its inputs and stores paths on request") {
  TimeGrid grid{0.5, 4};
  LsmcOptions opts;
  opts.paths = 2000;
  opts.seed = 23;
  opts.store_paths = true;
  auto drv = [](double, double w, double) { return 0.1 * w; };
  auto term = [](double w) { return w; };
  const auto a = solve_bsde_lsmc(grid, drv, term, opts);
  const auto b = solve_bsde_lsmc(grid, drv, term, opts);
  CHECK(a.y0 == b.y0);
  CHECK(a.w_paths.rows() == 2000);
  CHECK(a.w_paths.cols() == 5);
  CHECK(a.z_paths.cols() == 4);
  CHECK((a.w_paths - b.w_paths).norm() == 0.0);
  opts.seed = 24;
  const auto c = solve_bsde_lsmc(grid, drv, term, opts);
  CHECK(c.y0 != a.y0);
}

TEST_CASE("solver input validation") {
  TimeGrid grid{1.0, 4};
  OdeOptions bad;
  bad.substeps = 0;
  CHECK_THROWS_AS(solve_bsde_ode(grid, [](double, double) { return 0.0; }, 0.0, bad),
                  ConfigError);
  LsmcOptions small;
  small.paths = 10;
  CHECK_THROWS_AS(solve_bsde_lsmc(grid, [](double, double, double) { return 0.0; },
                                  [](double) { return 0.0; }, small),
                  ConfigError);
}

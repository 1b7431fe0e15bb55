#pragma once

#include <Eigen/Dense>
#include <cstdint>
#include <functional>
#include <vector>

#include "relperf/errors.hpp"
#include "relperf/grids.hpp"

namespace relperf {

// Deterministic reduction of a scalar backward equation,
//   y(t) = terminal + int_t^T f(s, y(s)) ds,
// integrated by classical RK4 from T down to 0. Stage times at interval
// endpoints are nudged one-sided by h*1e-9 so drivers that are piecewise
// constant on the grid are read from the interval being integrated; the
// perturbation is far below the scheme's own error for smooth drivers.
struct OdeOptions {
  int substeps = 1;             // RK4 substeps per grid interval
  bool stability_check = true;  // re-solve at doubled substeps, compare y(0)
  double stability_tol = 1e-8;
};

struct OdeSolution {
  std::vector<double> y;  // knot values, size grid.steps + 1
  double y0 = 0.0;
};

OdeSolution solve_bsde_ode(const TimeGrid& grid,
                           const std::function<double(double, double)>& f,
                           double terminal, const OdeOptions& opts = {});

// Least-squares Monte Carlo for a scalar equation driven by a scalar
// Brownian motion W,
//   Y_t = g(W_T) + int_t^T f(s, W_s, Z_s) ds - int_t^T Z_s dW_s.
// Z is regressed from (Y_{k+1} - E^[Y_{k+1}|W_k]) dW_k / dt on a polynomial
// basis in W_k (the projection residual keeps the conditional expectation
// and drops the dominant variance term), then Y_k from Y_{k+1} + f dt on the
// same basis. The z handed to the driver is frozen at the previous outer
// sweep (zero on the first), so each sweep is one Picard step of the
// z-dependence.
struct LsmcOptions {
  int paths = 10000;
  int degree = 3;        // polynomial degree of the regression basis
  int picard_sweeps = 5; // outer sweeps refreshing the frozen z
  double z_clip_sds = 8.0;  // winsorize fitted z at mean +- this many sds
  std::uint64_t seed = 1;
  int stream = 0;            // noise stream for the driving Brownian motion
  bool store_paths = false;  // keep per-path W and fitted Z in the solution
};

struct LsmcDiagnostics {
  // |mean_p(Y_{k+1} + f dt - Y_k)| per step; zero up to roundoff because the
  // regression basis contains the constant.
  std::vector<double> martingale_residual;
  std::vector<double> picard_gaps;  // |y0 - previous y0| per sweep after the first
  bool degree_reduced = false;      // basis went rank-deficient at some step
};

struct LsmcSolution {
  double y0 = 0.0;
  std::vector<double> y_mean;  // size steps + 1, cross-sectional means of Y
  std::vector<double> z_mean;  // size steps, cross-sectional means of Z
  Eigen::MatrixXd w_paths;     // paths x (steps+1), only if store_paths
  Eigen::MatrixXd z_paths;     // paths x steps, only if store_paths
  LsmcDiagnostics diag;
};

LsmcSolution solve_bsde_lsmc(
    const TimeGrid& grid,
    const std::function<double(double t, double w, double z)>& driver,
    const std::function<double(double w)>& terminal, const LsmcOptions& opts);

}  // namespace relperf

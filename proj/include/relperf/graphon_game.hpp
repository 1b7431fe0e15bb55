#pragma once

#include <cstdint>
#include <vector>

#include <Eigen/Dense>

#include "relperf/fixed_point.hpp"
#include "relperf/graphon.hpp"
#include "relperf/market.hpp"

namespace relperf {

// Uniform midpoint quadrature over the label space (0,1]:
// M nodes u_m = (m + 1/2)/M (m zero-based), each of weight 1/M.
struct LabelGrid {
  int labels = 8;

  double u(int m) const { return (m + 0.5) / labels; }
  double weight() const { return 1.0 / labels; }
  void validate() const;
};

// Label-dependent market data: one coefficient record per right-closed label
// segment (breaks[i-1], breaks[i]], with breaks ascending and ending at 1.
struct LabelCoeffs {
  std::vector<double> breaks;
  std::vector<AgentCoeffs> segments;

  static LabelCoeffs homogeneous(AgentCoeffs agent);
  const AgentCoeffs& at(double u) const;
  void validate(const TimeGrid& grid) const;
};

struct GraphonGameInputs {
  LabelCoeffs coeffs;
  Graphon kernel = ConstantGraphon{0.5};
  LabelGrid labels;
  TimeGrid grid;

  void validate() const;
};

struct GraphonPicardOptions {
  double tol = 1e-10;
  int max_iter = 10000;
  // Optional warm start, one strategy per quadrature label; empty = zeros.
  std::vector<Strategy> initial;
};

// Deterministic-coefficient equilibrium on the label grid. pi[m][k] is the
// position of label u_m on interval k; z_star[m][k] the common-noise
// exposure of its aggregate, z_star_m = (1/M) sum_v G(u_m,u_v) pi_v . sigma_star_v.
struct GraphonEquilibrium {
  std::vector<Strategy> pi;
  std::vector<std::vector<double>> z_star;
  std::vector<double> y0;
  std::vector<double> value0;
  std::vector<double> benchmark;
  double residual = 0.0;
  int iterations = 0;
};

// Picard iteration of pi_u <- varsigma_u^{-1} P_u(sigma_tilde_u eta_u theta_u
// + sigma_star_tilde_u z_star_u) over the label grid; contraction modulus
// max_u |sigma_star_tilde_u|^2 * max_u (1/M) sum_v G(u,u_v) < 1.
GraphonEquilibrium solve_graphon_equilibrium_det(
    const GraphonGameInputs& in, const GraphonPicardOptions& opts = {});

// Fills y0 / value0 / benchmark:
//   y0_u = int [ (1/M) sum_v G(u,u_v) pi_v.(sigma_v theta_v)
//                - (eta_u/2)|theta_u|^2
//                + dist(sigma_tilde_u eta_u theta_u
//                       + sigma_star_tilde_u z_star_u, varsigma_u A_u)^2
//                  / (2 eta_u) ] dt,
//   benchmark_u = (1/M) sum_v G(u,u_v) E[xi_v],
//   value0_u = -exp(-(xi_u - benchmark_u - y0_u)/eta_u)
// (NaN when xi_u is random).
void graphon_value(const GraphonGameInputs& in, GraphonEquilibrium& eq);

// Off-grid evaluation of the solved profile: the equilibrium map applied at
// an arbitrary label, with the aggregate quadrature read from eq.pi.
Eigen::VectorXd graphon_strategy_at(const GraphonGameInputs& in,
                                    const GraphonEquilibrium& eq, double u,
                                    int knot);

struct GraphonLabelValue {
  double y0 = 0.0;
  double value0 = 0.0;
  double benchmark = 0.0;
};

GraphonLabelValue graphon_value_at(const GraphonGameInputs& in,
                                   const GraphonEquilibrium& eq, double u);

// ---------------------------------------------------------------------------
// Random market price of risk, idiosyncratic noise only (sigma_star = 0):
// theta_u(t) = theta_u + kappa W^u_t. The coupled system is solved by outer
// Picard iteration on the frozen aggregate-drift term
//   m_u(t) = (1/M) sum_v G(u,u_v) E^[ strat_v(Z_v) . sigma_v theta_v ](t),
// each outer pass re-solving every label's scalar BSDE by LSMC with the
// driver f = -(eta/2)|theta|^2 - z theta + dist(z + eta theta, sigma A)^2 /
// (2 eta) + m_u(t) and terminal value 0. Identical path draws across outer
// passes, so the reported gaps measure the fixed-point contraction alone.

struct GraphonBsdeOptions {
  double kappa = 0.0;  // loading of theta on the agent's own Brownian motion
  int paths = 4000;
  int degree = 3;
  int inner_sweeps = 4;
  int outer_iters = 12;
  double tol = 1e-7;  // on the sup-norm change of the mean-field term
  std::uint64_t seed = 1;
};

struct GraphonBsdeResult {
  std::vector<double> y0;
  std::vector<double> value0;
  std::vector<double> benchmark;
  Eigen::MatrixXd mean_field;      // labels x steps, the converged m_u(t_k)
  std::vector<double> outer_gaps;  // sup |m^r - m^{r-1}| per outer pass
  int iterations = 0;
  bool converged = false;
  bool diverged = false;  // outer gap grew three consecutive passes
  double max_martingale_residual = 0.0;
};

GraphonBsdeResult picard_graphon_bsde(const GraphonGameInputs& in,
                                      const GraphonBsdeOptions& opts = {});

// ---------------------------------------------------------------------------
// Forward-backward Picard map under deterministic coefficients. One pass,
// given the frozen forward profile (mean wealth x_u and controls pi_u):
//   1. z_star_u(t) = (1/M) sum_v G(u,u_v) pi_v.sigma_star_v   (frozen)
//   2. terminal Y_u(T) = (1/M) sum_v G(u,u_v) x_v(T)          (frozen)
//   3. backward: Y_u(t) = Y_u(T) + int_t^T [ -(eta_u/2)|theta_u|^2
//        + dist(sigma_tilde_u eta_u theta_u + sigma_star_tilde_u z_star_u,
//               varsigma_u A_u)^2 / (2 eta_u) ] ds
//      and controls pi'_u = varsigma_u^{-1} P_u(sigma_tilde_u eta_u theta_u
//                                               + sigma_star_tilde_u z_star_u)
//   4. forward: x'_u(t) = E[xi_u] + int_0^t pi'_u.(sigma_u theta_u) ds.
// The per-pass gap is the sup over labels and knots of the (pi, x, Y)
// profile change; contraction factors are successive gap ratios. A factor
// >= 1 stops the iteration and flags the horizon as too large for this
// fixed-point map.

struct SmallTimeOptions {
  double tol = 1e-10;
  int max_iter = 500;
};

struct SmallTimeResult {
  std::vector<Strategy> pi;
  std::vector<std::vector<double>> x_mean;  // labels x (steps+1)
  std::vector<double> y0;         // Y_u(0), benchmark included
  std::vector<double> value0;     // -exp(-(xi_u - Y_u(0))/eta_u)
  std::vector<double> benchmark;  // graphon average of terminal mean wealth
  std::vector<double> gaps;
  std::vector<double> factors;  // gaps[r]/gaps[r-1]
  int iterations = 0;
  bool converged = false;
  bool horizon_too_large = false;
};

SmallTimeResult picard_graphon_fbsde_small_time(const GraphonGameInputs& in,
                                                const SmallTimeOptions& opts = {});

}  // namespace relperf

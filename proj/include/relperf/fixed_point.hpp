#pragma once

#include <cstdint>
#include <vector>

#include <Eigen/Dense>

#include "relperf/market.hpp"

namespace relperf {

// n-agent game data: per-agent market coefficients plus the normalized
// interaction weight matrix (zero diagonal, nonnegative, row sums <= 1).
struct GameInputs {
  std::vector<AgentCoeffs> agents;
  Eigen::MatrixXd weights;
  TimeGrid grid;

  int n() const { return static_cast<int>(agents.size()); }
  void validate() const;
};

struct PicardOptions {
  double tol = 1e-10;
  int max_iter = 10000;
};

// Deterministic-coefficient equilibrium. pi[i][k] is agent i's position on
// interval k; zeta_star[i][k] the common-noise exposure of its aggregate,
// zeta_star_i = sum_j w_ij pi_j . sigma_star_j.
struct FiniteEquilibrium {
  std::vector<Strategy> pi;
  std::vector<std::vector<double>> zeta_star;
  std::vector<double> gamma0;
  std::vector<double> value0;
  std::vector<double> xi_bar;
  double residual = 0.0;
  int iterations = 0;
};

// H_alpha(x) = x + sigma_star_tilde . P(alpha + sigma_star_tilde x) / (n-1),
// P the projection onto varsigma * A. Strictly increasing, onto R.
double h_alpha(const SigmaTransforms& tr, const ConvexSet& set, int n,
               const Eigen::VectorXd& alpha, double x);

// Solves H_alpha(x) = y by fixed-point iteration of
// x <- y - sigma_star_tilde . P(alpha + sigma_star_tilde x) / (n-1),
// a contraction with modulus |sigma_star_tilde|^2 / (n-1).
double h_alpha_solve(const SigmaTransforms& tr, const ConvexSet& set, int n,
                     const Eigen::VectorXd& alpha, double y, double tol = 1e-12);

// Aggregate-exposure change of variables at one time interval. Component i:
//   phi_i(zeta) = zeta_i - sum_j w_ij sigma_star_tilde_j .
//                     P_j(alpha_j + sigma_star_tilde_j zeta_j),
// alpha_j = sigma_tilde_j (z_diag_j + eta_j theta_j).
Eigen::VectorXd phi_map(const GameInputs& in,
                        const std::vector<Eigen::VectorXd>& z_diag,
                        const Eigen::VectorXd& zeta_star, int knot = 0);

// Inverse of phi_map, by fixed-point iteration of the rearranged identity
// zeta <- z + sum_j w_ij q_j(zeta_j); the iteration contracts with modulus
// max_j |sigma_star_tilde_j|^2 * max row sum < 1. Requires n >= 3.
Eigen::VectorXd psi_map(const GameInputs& in,
                        const std::vector<Eigen::VectorXd>& z_diag,
                        const Eigen::VectorXd& z_star, int knot = 0,
                        double tol = 1e-12);

// Damped Picard iteration, per time knot, of
//   pi_i <- varsigma_i^{-1} P_i(sigma_tilde_i eta_i theta_i
//                                + sigma_star_tilde_i zeta_star_i),
//   zeta_star_i = sum_j w_ij sigma_star_j . pi_j.
// Residual is the final sup-norm profile update.
FiniteEquilibrium solve_equilibrium_det(const GameInputs& in,
                                        const PicardOptions& opts = {});

// Fills gamma0 / value0 / xi_bar:
//   gamma0_i = sum_j w_ij int pi_j.(sigma_j theta_j) dt - int b_i dt,
//   b_i = (eta_i/2)|theta_i|^2 - sum_j w_ij^2 |sigma_j pi_j|^2 / (2 eta_i)
//         - dist(sigma_tilde_i eta_i theta_i + sigma_star_tilde_i zeta_star_i,
//                varsigma_i A_i)^2 / (2 eta_i),
//   value0_i = -exp(-(xi_i - xi_bar_i - gamma0_i)/eta_i).
// Agents with random xi get value0 = NaN (values are reported for
// deterministic initial wealth only).
void gamma0_and_value(const GameInputs& in, FiniteEquilibrium& eq);

struct BestResponseOptions {
  int grid_points = 9;
  int grid_rounds = 3;
  int nm_iters = 120;
  double box_halfwidth = 0.0;  // 0 = derive from the data scale
};

// Monte Carlo check of the equilibrium property for one agent: searches
// constant strategies by coordinate grid refinement plus a Nelder-Mead
// polish, under common random numbers (identical counter-based draws for
// every candidate). Ties within one standard error prefer the smaller-norm
// candidate.
struct BestResponse {
  Eigen::VectorXd pi;   // best constant strategy found
  double util_best = 0.0;
  double util_eq = 0.0;
  double gap = 0.0;     // util_best - util_eq
  double se_gap = 0.0;  // stderr of the paired difference
  bool significant = false;    // gap > 3 se: improvement beyond MC noise
  bool inconclusive = false;   // significant but gap <= 6 se: marginal call
};

BestResponse best_response_oracle(const GameInputs& in,
                                  const FiniteEquilibrium& eq, int agent,
                                  int paths, std::uint64_t seed,
                                  const BestResponseOptions& opts = {});

}  // namespace relperf

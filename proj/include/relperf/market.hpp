#pragma once

#include <cstdint>
#include <variant>
#include <vector>

#include <Eigen/Dense>

#include "relperf/convex.hpp"
#include "relperf/grids.hpp"

namespace relperf {

struct NormalLaw {
  double mean = 0.0;
  double sd = 0.0;
};

// Initial wealth: a constant or an independent normal draw per path.
using InitialWealth = std::variant<double, NormalLaw>;

double initial_wealth_mean(const InitialWealth& xi);
bool initial_wealth_deterministic(const InitialWealth& xi);

// One agent's market data. sigma holds the diagonal of the idiosyncratic
// volatility matrix (entries > 0); sigma_star is the loading on the common
// Brownian motion; theta is the market price of risk. All three are
// piecewise constant on the shared time grid.
struct AgentCoeffs {
  int d = 1;
  PiecewiseVec sigma;
  PiecewiseVec sigma_star;
  PiecewiseVec theta;
  double eta = 0.5;  // risk tolerance, in (0,1)
  InitialWealth xi = 0.0;
  ConvexSet constraint = FullSpace{};

  void validate(const TimeGrid& grid) const;
};

// Convenience constructor for time-constant scalar-per-coordinate data.
AgentCoeffs make_agent(int d, const Eigen::VectorXd& sigma,
                       const Eigen::VectorXd& sigma_star,
                       const Eigen::VectorXd& theta, double eta, double xi,
                       ConvexSet constraint);

// Combined-volatility transforms at one time interval:
//   varsigma = (sigma^2 + sigma_star sigma_star')^{1/2}   (symmetric PSD root)
//   sigma_tilde = varsigma^{-1} sigma
//   sigma_star_tilde = varsigma^{-1} sigma_star, with |sigma_star_tilde| < 1
// whenever sigma_star != 0.
struct SigmaTransforms {
  Eigen::MatrixXd varsigma;
  Eigen::MatrixXd varsigma_inv;
  Eigen::MatrixXd sigma_tilde;
  Eigen::VectorXd sigma_star_tilde;
};

SigmaTransforms varsigma_transforms(const Eigen::VectorXd& sigma,
                                    const Eigen::VectorXd& sigma_star);

// Transforms for every interval of the grid (deduplicated when constant).
std::vector<SigmaTransforms> varsigma_series(const AgentCoeffs& agent,
                                             const TimeGrid& grid);

// Per-knot strategy: pi[k] is the d-vector position held on interval k.
using Strategy = std::vector<Eigen::VectorXd>;

// Euler simulation of the wealth equation
//   dX = pi.sigma(theta dt + dW) + pi.sigma_star dW*
// with counter-based noise: dW keyed on (seed, path, step, agent-slot+coord),
// dW* on (seed, path, step, star-slot). Strategies must lie in the agent's
// constraint set at every knot (projection residual <= 1e-9).
struct WealthPaths {
  Eigen::MatrixXd x;  // paths x (steps+1)
};

WealthPaths simulate_wealth(const AgentCoeffs& agent, const TimeGrid& grid,
                            const Strategy& pi, int paths, std::uint64_t seed,
                            int agent_stream = 0);

// Noise slots shared by all simulators so that mixed-agent simulations under
// common random numbers reuse identical increments.
std::uint64_t noise_slot_agent(int agent_stream, int coord);
std::uint64_t noise_slot_star();
double brownian_increment(std::uint64_t seed, int path, int step,
                          std::uint64_t slot, double dt);
double initial_wealth_draw(const InitialWealth& xi, std::uint64_t seed, int path,
                           int agent_stream);

// Exponential utility -exp(-(x_T - benchmark)/eta). The exponent is clamped
// to +-700 before exponentiation; `saturated` reports when the clamp bound.
struct UtilityValue {
  double value = 0.0;
  bool saturated = false;
};

UtilityValue utility(double x_terminal, double benchmark, double eta);

}  // namespace relperf

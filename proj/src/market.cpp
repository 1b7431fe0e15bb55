#include "relperf/market.hpp"

#include <cmath>
#include <string>

#include "relperf/rng.hpp"

namespace relperf {

double initial_wealth_mean(const InitialWealth& xi) {
  if (std::holds_alternative<double>(xi)) return std::get<double>(xi);
  return std::get<NormalLaw>(xi).mean;
}

bool initial_wealth_deterministic(const InitialWealth& xi) {
  if (std::holds_alternative<double>(xi)) return true;
  return std::get<NormalLaw>(xi).sd == 0.0;
}

void AgentCoeffs::validate(const TimeGrid& grid) const {
  if (d < 1) throw ConfigError("AgentCoeffs: d must be >= 1");
  if (!(eta > 0.0 && eta < 1.0))
    throw ConfigError("AgentCoeffs: eta must lie in (0,1)");
  sigma.validate_size(grid.steps, "sigma");
  sigma_star.validate_size(grid.steps, "sigma_star");
  theta.validate_size(grid.steps, "theta");
  for (const auto& v : sigma.values) {
    if (v.size() != d) throw ConfigError("sigma: dimension must match d");
    if ((v.array() <= 0.0).any())
      throw ConfigError("sigma: diagonal entries must be positive");
  }
  for (const auto& v : sigma_star.values)
    if (v.size() != d) throw ConfigError("sigma_star: dimension must match d");
  for (const auto& v : theta.values)
    if (v.size() != d) throw ConfigError("theta: dimension must match d");
  if (std::holds_alternative<NormalLaw>(xi) && std::get<NormalLaw>(xi).sd < 0.0)
    throw ConfigError("xi: standard deviation must be >= 0");
  validate_set(constraint, d);
}

AgentCoeffs make_agent(int d, const Eigen::VectorXd& sigma,
                       const Eigen::VectorXd& sigma_star,
                       const Eigen::VectorXd& theta, double eta, double xi,
                       ConvexSet constraint) {
  AgentCoeffs a;
  a.d = d;
  a.sigma = PiecewiseVec(sigma);
  a.sigma_star = PiecewiseVec(sigma_star);
  a.theta = PiecewiseVec(theta);
  a.eta = eta;
  a.xi = xi;
  a.constraint = std::move(constraint);
  return a;
}

SigmaTransforms varsigma_transforms(const Eigen::VectorXd& sigma,
                                    const Eigen::VectorXd& sigma_star) {
  const int d = static_cast<int>(sigma.size());
  Eigen::MatrixXd m = Eigen::MatrixXd::Zero(d, d);
  m.diagonal() = sigma.array().square();
  m += sigma_star * sigma_star.transpose();

  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(m);
  if (es.info() != Eigen::Success)
    throw SolverError("varsigma: eigendecomposition failed");
  if (es.eigenvalues().minCoeff() <= 0.0)
    throw ConfigError("varsigma: sigma^2 + sigma_star sigma_star' must be SPD");

  SigmaTransforms out;
  const Eigen::VectorXd root = es.eigenvalues().cwiseSqrt();
  out.varsigma = es.eigenvectors() * root.asDiagonal() *
                 es.eigenvectors().transpose();
  out.varsigma_inv = es.eigenvectors() * root.cwiseInverse().asDiagonal() *
                     es.eigenvectors().transpose();
  const double resid = (out.varsigma * out.varsigma - m).norm();
  if (resid > 1e-10 * std::max(1.0, m.norm()))
    throw SolverError("varsigma: square-root residual above 1e-10");
  out.sigma_tilde = out.varsigma_inv * sigma.asDiagonal().toDenseMatrix();
  out.sigma_star_tilde = out.varsigma_inv * sigma_star;
  return out;
}

std::vector<SigmaTransforms> varsigma_series(const AgentCoeffs& agent,
                                             const TimeGrid& grid) {
  std::vector<SigmaTransforms> out;
  if (agent.sigma.constant() && agent.sigma_star.constant()) {
    out.push_back(varsigma_transforms(agent.sigma.at(0), agent.sigma_star.at(0)));
    return out;
  }
  out.reserve(static_cast<std::size_t>(grid.steps));
  for (int k = 0; k < grid.steps; ++k)
    out.push_back(varsigma_transforms(agent.sigma.at(k), agent.sigma_star.at(k)));
  return out;
}

std::uint64_t noise_slot_agent(int agent_stream, int coord) {
  return (static_cast<std::uint64_t>(agent_stream) << 10) |
         static_cast<std::uint64_t>(coord);
}

std::uint64_t noise_slot_star() { return std::uint64_t(1) << 60; }

double brownian_increment(std::uint64_t seed, int path, int step,
                          std::uint64_t slot, double dt) {
  return std::sqrt(dt) * rng::gaussian(seed, static_cast<std::uint64_t>(path),
                                       static_cast<std::uint64_t>(step), slot);
}

double initial_wealth_draw(const InitialWealth& xi, std::uint64_t seed, int path,
                           int agent_stream) {
  if (std::holds_alternative<double>(xi)) return std::get<double>(xi);
  const auto& law = std::get<NormalLaw>(xi);
  if (law.sd == 0.0) return law.mean;
  // Dedicated step id outside the Euler range keeps xi draws independent of
  // the path noise.
  const std::uint64_t slot = noise_slot_agent(agent_stream, 0);
  return law.mean + law.sd * rng::gaussian(seed, static_cast<std::uint64_t>(path),
                                           ~std::uint64_t(0), slot);
}

WealthPaths simulate_wealth(const AgentCoeffs& agent, const TimeGrid& grid,
                            const Strategy& pi, int paths, std::uint64_t seed,
                            int agent_stream) {
  agent.validate(grid);
  if (static_cast<int>(pi.size()) != grid.steps)
    throw ConfigError("simulate_wealth: strategy needs one value per interval");
  for (int k = 0; k < grid.steps; ++k) {
    if (pi[k].size() != agent.d)
      throw ConfigError("simulate_wealth: strategy dimension must match d");
    const double resid = (pi[k] - project(agent.constraint, pi[k])).norm();
    if (resid > 1e-9)
      throw ConfigError("simulate_wealth: strategy leaves the constraint set at knot " +
                        std::to_string(k));
  }
  if (paths < 1) throw ConfigError("simulate_wealth: paths must be >= 1");

  const double dt = grid.dt();
  WealthPaths out;
  out.x.resize(paths, grid.steps + 1);
  for (int p = 0; p < paths; ++p) {
    double x = initial_wealth_draw(agent.xi, seed, p, agent_stream);
    out.x(p, 0) = x;
    for (int k = 0; k < grid.steps; ++k) {
      const Eigen::VectorXd& s = agent.sigma.at(k);
      const Eigen::VectorXd& ss = agent.sigma_star.at(k);
      const Eigen::VectorXd& th = agent.theta.at(k);
      const Eigen::VectorXd& pik = pi[k];
      double drift = 0.0, diff = 0.0;
      for (int c = 0; c < agent.d; ++c) {
        const double ps = pik[c] * s[c];
        drift += ps * th[c];
        diff += ps * brownian_increment(seed, p, k, noise_slot_agent(agent_stream, c), dt);
      }
      const double star = pik.dot(ss);
      if (star != 0.0)
        diff += star * brownian_increment(seed, p, k, noise_slot_star(), dt);
      x += drift * dt + diff;
      out.x(p, k + 1) = x;
    }
  }
  return out;
}

UtilityValue utility(double x_terminal, double benchmark, double eta) {
  if (!(eta > 0.0)) throw ConfigError("utility: eta must be positive");
  UtilityValue u;
  double arg = -(x_terminal - benchmark) / eta;
  if (arg > 700.0) { arg = 700.0; u.saturated = true; }
  if (arg < -700.0) { arg = -700.0; u.saturated = true; }
  u.value = -std::exp(arg);
  return u;
}

}  // namespace relperf

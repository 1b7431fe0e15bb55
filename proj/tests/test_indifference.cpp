#include <cmath>

#include "doctest.h"
#include "relperf/indifference.hpp"

using namespace relperf;

namespace {

Eigen::VectorXd vec1(double x) {
  Eigen::VectorXd v(1);
  v[0] = x;
  return v;
}

// sigma = sigma* = 1, theta = 0.2, eta = 0.5, endowment xi.
GameInputs standing_game(int n, double weight, double xi = 1.0) {
  GameInputs in;
  for (int i = 0; i < n; ++i)
    in.agents.push_back(
        make_agent(1, vec1(1.0), vec1(1.0), vec1(0.2), 0.5, xi, FullSpace{}));
  in.weights = Eigen::MatrixXd::Constant(n, n, weight);
  in.weights.diagonal().setZero();
  in.grid = TimeGrid{1.0, 1};
  return in;
}

}  // namespace

TEST_CASE("baseline value of the standing market") {
  const AgentCoeffs a =
      make_agent(1, vec1(1.0), vec1(1.0), vec1(0.2), 0.5, 1.0, FullSpace{});
  const TimeGrid grid{1.0, 1};
  // -(eta/2) theta^2 T up to the rounding of 0.2^2
  CHECK(baseline_y0(a, grid) == doctest::Approx(-0.01).epsilon(1e-14));

  // a binding box keeps distance-to-constraint in the running cost
  const AgentCoeffs boxed = make_agent(1, vec1(1.0), vec1(0.0), vec1(0.2), 0.5,
                                       1.0, Box{vec1(0.0), vec1(0.05)});
  // dist(eta theta, sigma A) = 0.05; y = -0.01 + 0.05^2/(2*0.5)
  CHECK(baseline_y0(boxed, grid) == doctest::Approx(-0.0075).epsilon(1e-14));
}

TEST_CASE("no competition means zero indifference capital, exactly") {
  const GameInputs in = standing_game(3, 0.0);
  const FiniteEquilibrium eq = solve_equilibrium_det(in);
  const auto res = indifference_capital_finite(in, eq);
  for (const auto& r : res) {
    CHECK(r.p == 0.0);
    CHECK(r.p_log == 0.0);
    CHECK(r.p_closed == 0.0);
    CHECK(r.method == IndifferenceMethod::ClosedForm);
    CHECK(r.y_base_0 == doctest::Approx(-0.01).epsilon(1e-14));
  }
}

TEST_CASE("complete-graph standing example prices competition at 1.025") {
  const GameInputs in = standing_game(3, 0.5);
  const FiniteEquilibrium eq = solve_equilibrium_det(in);
  const auto res = indifference_capital_finite(in, eq);
  for (const auto& r : res) {
    // xi_bar = 1, gamma_0 = 0.015, Y^base_0 = -0.01; the strategy feeding
    // gamma_0 is Picard-converged to 1e-10, which bounds the dust here
    CHECK(r.p == doctest::Approx(1.025).epsilon(1e-9));
    CHECK(r.p_log == doctest::Approx(1.025).epsilon(1e-9));
  }
}

TEST_CASE("doubling the endowments shifts the capital by the benchmark mean") {
  const GameInputs one = standing_game(3, 0.5, 1.0);
  const GameInputs two = standing_game(3, 0.5, 2.0);
  const auto p1 =
      indifference_capital_finite(one, solve_equilibrium_det(one));
  const auto p2 =
      indifference_capital_finite(two, solve_equilibrium_det(two));
  for (int i = 0; i < 3; ++i)
    CHECK(p2[i].p - p1[i].p == doctest::Approx(1.0).epsilon(1e-12));
}

TEST_CASE("adding c to every endowment shifts p by c times the row weight") {
  GameInputs in = standing_game(4, 0.2);
  const auto base = indifference_capital_finite(in, solve_equilibrium_det(in));
  const double c = 0.3;
  for (auto& a : in.agents) a.xi = initial_wealth_mean(a.xi) + c;
  const auto moved =
      indifference_capital_finite(in, solve_equilibrium_det(in));
  for (int i = 0; i < 4; ++i) {
    const double rowsum = in.weights.row(i).sum();
    CHECK(moved[i].p - base[i].p ==
          doctest::Approx(c * rowsum).epsilon(1e-12));
  }
}

TEST_CASE("saturated utilities are rejected instead of silently disagreeing") {
  GameInputs in;
  for (int i = 0; i < 2; ++i)
    in.agents.push_back(
        make_agent(1, vec1(1.0), vec1(0.0), vec1(0.2), 0.01, 10.0, FullSpace{}));
  in.weights = Eigen::MatrixXd::Constant(2, 2, 1.0);
  in.weights.diagonal().setZero();
  in.grid = TimeGrid{1.0, 1};
  const FiniteEquilibrium eq = solve_equilibrium_det(in);
  CHECK_THROWS_AS((void)indifference_capital_finite(in, eq), SolverError);
}

TEST_CASE("closed form requires deterministic endowments") {
  GameInputs in = standing_game(2, 1.0);
  in.agents[1].xi = NormalLaw{1.0, 0.1};
  const FiniteEquilibrium eq = solve_equilibrium_det(in);
  CHECK_THROWS_AS((void)indifference_capital_finite(in, eq), CapabilityError);
  std::vector<double> wrong(3, 0.0);
  in.agents[1].xi = 1.0;
  const FiniteEquilibrium ok = solve_equilibrium_det(in);
  CHECK_THROWS_AS(
      (void)indifference_capital_finite(in, ok, wrong), ConfigError);
}

// --- label-population form --------------------------------------------------

namespace {

GraphonGameInputs standing_population(Graphon kernel, int labels) {
  GraphonGameInputs in;
  in.coeffs = LabelCoeffs::homogeneous(
      make_agent(1, vec1(1.0), vec1(1.0), vec1(0.2), 0.5, 1.0, FullSpace{}));
  in.kernel = std::move(kernel);
  in.labels.labels = labels;
  in.grid = TimeGrid{1.0, 1};
  return in;
}

}  // namespace

TEST_CASE("zero kernel prices competition at exactly zero per label") {
  const auto in = standing_population(ConstantGraphon{0.0}, 6);
  const GraphonEquilibrium eq = solve_graphon_equilibrium_det(in);
  for (const auto& r : indifference_capital_graphon(in, eq)) {
    CHECK(r.p == 0.0);
    CHECK(r.p_log == 0.0);
  }
}

TEST_CASE("half kernel capital matches the hand-computed decomposition") {
  const auto in = standing_population(ConstantGraphon{0.5}, 6);
  const GraphonEquilibrium eq = solve_graphon_equilibrium_det(in);
  const auto res = indifference_capital_graphon(in, eq);
  for (const auto& r : res) {
    // benchmark 0.5, y0 = -1/300, baseline -0.01
    CHECK(r.p == doctest::Approx(0.5 - 1.0 / 300.0 + 0.01).epsilon(1e-10));
    CHECK(r.p == res[0].p);  // label-independent for a constant kernel
  }
  const IndifferenceResult off = indifference_graphon_at(in, eq, 0.123);
  CHECK(off.p == res[0].p);
}

// --- Monte Carlo bisection ---------------------------------------------------

TEST_CASE("bisection finds exactly zero when there is no competition") {
  const GameInputs in = standing_game(2, 0.0);
  const FiniteEquilibrium eq = solve_equilibrium_det(in);
  BisectionOptions opts;
  opts.paths = 400;
  opts.seed = 5;
  const IndifferenceResult r = indifference_bisection(0, in, eq, opts);
  CHECK(r.p == 0.0);  // first midpoint of [-10, 10] is the exact root
  CHECK(r.method == IndifferenceMethod::Bisection);
}

TEST_CASE("bisection agrees with the closed form on the standing example") {
  const GameInputs in = standing_game(3, 0.5);
  const FiniteEquilibrium eq = solve_equilibrium_det(in);
  const auto closed = indifference_capital_finite(in, eq);
  BisectionOptions opts;
  opts.paths = 30000;
  opts.seed = 17;
  opts.tol = 1e-3;
  const IndifferenceResult r = indifference_bisection(0, in, eq, opts);
  const double tol =
      std::max(0.02 * std::fabs(closed[0].p), 3.0 * r.se + opts.tol);
  CHECK(std::fabs(r.p - closed[0].p) <= tol);
  CHECK(r.se > 0.0);
}

TEST_CASE("with no drift premium the capital is eta-invariant") {
  auto game = [&](double eta) {
    GameInputs in;
    in.agents.push_back(
        make_agent(1, vec1(1.0), vec1(0.5), vec1(0.0), eta, 2.0, FullSpace{}));
    in.agents.push_back(
        make_agent(1, vec1(1.0), vec1(0.5), vec1(0.0), eta, 3.0, FullSpace{}));
    in.weights = Eigen::MatrixXd::Constant(2, 2, 1.0);
    in.weights.diagonal().setZero();
    in.grid = TimeGrid{1.0, 1};
    return in;
  };
  double p[2];
  int idx = 0;
  for (double eta : {0.3, 0.6}) {
    const GameInputs in = game(eta);
    const FiniteEquilibrium eq = solve_equilibrium_det(in);
    const auto closed = indifference_capital_finite(in, eq);
    CHECK(closed[0].p == 3.0);  // theta = 0: p = xi_bar exactly
    CHECK(closed[1].p == 2.0);
    BisectionOptions opts;
    opts.paths = 200;
    opts.seed = 9;
    opts.tol = 1e-6;
    p[idx++] = indifference_bisection(0, in, eq, opts).p;
    CHECK(std::fabs(p[idx - 1] - 3.0) <= 1e-6 + 1e-12);
  }
  CHECK(std::fabs(p[0] - p[1]) <= 2e-6);
}

TEST_CASE("capital outside the search range is a solver error") {
  const GameInputs in = standing_game(2, 1.0, 30.0);  // xi_bar = 30
  const FiniteEquilibrium eq = solve_equilibrium_det(in);
  BisectionOptions opts;
  opts.paths = 100;
  CHECK_THROWS_AS((void)indifference_bisection(0, in, eq, opts), SolverError);
}

TEST_CASE("noisy samples stop at the resolution floor") {
  const GameInputs in = standing_game(3, 0.5);
  const FiniteEquilibrium eq = solve_equilibrium_det(in);
  BisectionOptions opts;
  opts.paths = 100;
  opts.seed = 2;
  opts.tol = 1e-9;  // unreachable at 100 paths
  const IndifferenceResult r = indifference_bisection(0, in, eq, opts);
  CHECK(r.hit_mc_floor);
  CHECK(r.se > 0.0);
  CHECK(std::fabs(r.p - 1.025) < 0.5);  // still lands near the true value
}

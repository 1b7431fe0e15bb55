#include <cmath>
#include <vector>

#include "doctest.h"
#include "relperf/bsde.hpp"
#include "relperf/graphon_game.hpp"
#include "relperf/rng.hpp"

using namespace relperf;

namespace {

Eigen::VectorXd vec1(double x) {
  Eigen::VectorXd v(1);
  v[0] = x;
  return v;
}

// Scalar market used throughout: sigma = sigma* = 1, theta = 0.2, eta = 0.5,
// terminal endowment 1.
AgentCoeffs standing_agent(ConvexSet constraint = FullSpace{}) {
  return make_agent(1, vec1(1.0), vec1(1.0), vec1(0.2), 0.5, 1.0,
                    std::move(constraint));
}

GraphonGameInputs standing_inputs(Graphon kernel, int labels, int steps = 1,
                                  double T = 1.0) {
  GraphonGameInputs in;
  in.coeffs = LabelCoeffs::homogeneous(standing_agent());
  in.kernel = std::move(kernel);
  in.labels.labels = labels;
  in.grid = TimeGrid{T, steps};
  return in;
}

}  // namespace

TEST_CASE("label coefficient tables are right-closed in the label") {
  const TimeGrid grid{1.0, 1};
  LabelCoeffs two;
  two.breaks = {0.5, 1.0};
  two.segments.push_back(standing_agent());
  two.segments.push_back(
      make_agent(1, vec1(2.0), vec1(0.0), vec1(0.1), 0.4, 0.0, FullSpace{}));
  two.validate(grid);

  CHECK(two.at(0.0).eta == 0.5);
  CHECK(two.at(0.3).eta == 0.5);
  CHECK(two.at(0.5).eta == 0.5);   // break belongs to the left segment
  CHECK(two.at(0.5001).eta == 0.4);
  CHECK(two.at(1.0).eta == 0.4);
  CHECK_THROWS_AS((void)two.at(1.5), ConfigError);
  CHECK_THROWS_AS((void)two.at(-0.5), ConfigError);

  LabelCoeffs bad = two;
  bad.breaks = {0.5, 0.9};  // must end at 1
  CHECK_THROWS_AS(bad.validate(grid), ConfigError);
  bad.breaks = {0.5, 0.5};
  CHECK_THROWS_AS(bad.validate(grid), ConfigError);
  bad.breaks = {1.0};
  CHECK_THROWS_AS(bad.validate(grid), ConfigError);  // segment count mismatch
}

TEST_CASE("constant-kernel equilibria match hand-solved fixed points") {
  SUBCASE("half kernel") {
    const auto in = standing_inputs(ConstantGraphon{0.5}, 8);
    const GraphonEquilibrium eq = solve_graphon_equilibrium_det(in);
    for (int l = 0; l < 8; ++l) {
      // pi = (0.1 + 0.5 pi) / 2  =>  pi = 1/15
      CHECK(eq.pi[l][0][0] == doctest::Approx(1.0 / 15.0).epsilon(1e-10));
      CHECK(eq.z_star[l][0] == doctest::Approx(0.5 / 15.0).epsilon(1e-9));
      CHECK(eq.y0[l] == doctest::Approx(-1.0 / 300.0).epsilon(1e-10));
      CHECK(eq.benchmark[l] == 0.5);
      CHECK(eq.value0[l] ==
            doctest::Approx(-std::exp(-(1.0 - 0.5 + 1.0 / 300.0) / 0.5))
                .epsilon(1e-12));
      CHECK(eq.value0[l] < 0.0);
    }
    CHECK(eq.residual <= 1e-10);
  }
  SUBCASE("full kernel matches the complete-graph strategy") {
    const auto in = standing_inputs(ConstantGraphon{1.0}, 8);
    const GraphonEquilibrium eq = solve_graphon_equilibrium_det(in);
    for (int l = 0; l < 8; ++l) {
      CHECK(eq.pi[l][0][0] == doctest::Approx(0.1).epsilon(1e-10));
      CHECK(eq.y0[l] == doctest::Approx(0.01).epsilon(1e-10));
      CHECK(eq.benchmark[l] == doctest::Approx(1.0));
    }
  }
  SUBCASE("zero kernel decouples") {
    const auto in = standing_inputs(ConstantGraphon{0.0}, 4);
    const GraphonEquilibrium eq = solve_graphon_equilibrium_det(in);
    for (int l = 0; l < 4; ++l) {
      // no aggregate: pi = varsigma^-1 sigma_tilde eta theta = 0.1/2
      CHECK(eq.pi[l][0][0] == doctest::Approx(0.05).epsilon(1e-12));
      CHECK(eq.z_star[l][0] == 0.0);
      CHECK(eq.y0[l] == doctest::Approx(-0.01).epsilon(1e-14));
      CHECK(eq.benchmark[l] == 0.0);
    }
  }
}

TEST_CASE("without common noise the strategy is the projected Merton ratio") {
  GraphonGameInputs in = standing_inputs(ConstantGraphon{0.5}, 4);
  in.coeffs = LabelCoeffs::homogeneous(
      make_agent(1, vec1(1.0), vec1(0.0), vec1(0.2), 0.5, 1.0, FullSpace{}));
  const GraphonEquilibrium eq = solve_graphon_equilibrium_det(in);
  for (int l = 0; l < 4; ++l) {
    CHECK(eq.pi[l][0][0] == 0.1);  // sigma^-1 P(eta theta), exactly
    CHECK(eq.z_star[l][0] == 0.0);
  }

  in.coeffs = LabelCoeffs::homogeneous(make_agent(
      1, vec1(1.0), vec1(0.0), vec1(0.2), 0.5, 1.0, Box{vec1(0.0), vec1(0.05)}));
  const GraphonEquilibrium boxed = solve_graphon_equilibrium_det(in);
  for (int l = 0; l < 4; ++l) CHECK(boxed.pi[l][0][0] == 0.05);
}

TEST_CASE("time-varying drift premium solves knot by knot") {
  GraphonGameInputs in = standing_inputs(ConstantGraphon{0.5}, 4, 2);
  AgentCoeffs a = standing_agent();
  a.theta.values = {vec1(0.2), vec1(0.4)};
  in.coeffs = LabelCoeffs::homogeneous(a);
  const GraphonEquilibrium eq = solve_graphon_equilibrium_det(in);
  for (int l = 0; l < 4; ++l) {
    CHECK(eq.pi[l][0][0] == doctest::Approx(1.0 / 15.0).epsilon(1e-10));
    CHECK(eq.pi[l][1][0] == doctest::Approx(2.0 / 15.0).epsilon(1e-10));
    CHECK(eq.y0[l] == doctest::Approx(-1.0 / 120.0).epsilon(1e-10));
  }
}

TEST_CASE("constant kernels give label-independent solutions") {
  const auto in = standing_inputs(ConstantGraphon{0.7}, 16, 3);
  const GraphonEquilibrium eq = solve_graphon_equilibrium_det(in);
  for (int l = 1; l < 16; ++l) {
    for (int k = 0; k < 3; ++k) {
      CHECK(eq.pi[l][k][0] == eq.pi[0][k][0]);
      CHECK(eq.z_star[l][k] == eq.z_star[0][k]);
    }
    CHECK(eq.y0[l] == eq.y0[0]);
    CHECK(eq.value0[l] == eq.value0[0]);
    CHECK(eq.benchmark[l] == eq.benchmark[0]);
  }
  // off-grid labels reproduce the grid values exactly for a constant kernel
  const GraphonLabelValue v = graphon_value_at(in, eq, 0.123);
  CHECK(v.y0 == eq.y0[0]);
  CHECK(v.value0 == eq.value0[0]);
  CHECK(v.benchmark == eq.benchmark[0]);
  const Eigen::VectorXd s = graphon_strategy_at(in, eq, 0.123, 1);
  CHECK(s[0] == graphon_strategy_at(in, eq, in.labels.u(0), 1)[0]);
  CHECK(s[0] == doctest::Approx(eq.pi[0][1][0]).epsilon(1e-9));
}

TEST_CASE("the solved profile is a fixed point of the strategy map") {
  GraphonGameInputs in = standing_inputs(AffineMeanGraphon{1.0, 0.0}, 6, 2);
  Eigen::VectorXd sigma(2), sstar(2), theta(2), center(2);
  sigma << 1.0, 0.8;
  sstar << 0.5, 0.0;
  theta << 0.2, 0.1;
  center << 0.0, 0.0;
  in.coeffs = LabelCoeffs::homogeneous(
      make_agent(2, sigma, sstar, theta, 0.5, 1.0, Ball{center, 0.03}));
  const GraphonEquilibrium eq = solve_graphon_equilibrium_det(in);
  CHECK(eq.residual <= 1e-10);
  for (int l = 0; l < 6; ++l) {
    CHECK(eq.pi[l][0].norm() <= 0.03 + 1e-12);  // stays inside the constraint
    for (int k = 0; k < 2; ++k) {
      const Eigen::VectorXd mapped =
          graphon_strategy_at(in, eq, in.labels.u(l), k);
      CHECK((mapped - eq.pi[l][k]).lpNorm<Eigen::Infinity>() <= 1e-9);
    }
  }
}

TEST_CASE("random initial profiles reach the same fixed point") {
  GraphonGameInputs in = standing_inputs(AffineMeanGraphon{1.0, 0.0}, 6, 2);
  const GraphonEquilibrium ref = solve_graphon_equilibrium_det(in);
  for (int trial = 0; trial < 10; ++trial) {
    GraphonPicardOptions opts;
    opts.initial.assign(6, Strategy(2));
    for (int l = 0; l < 6; ++l)
      for (int k = 0; k < 2; ++k)
        opts.initial[l][k] = vec1(
            2.0 * rng::uniform01(rng::key(99, trial, l, k)) - 1.0);
    const GraphonEquilibrium eq = solve_graphon_equilibrium_det(in, opts);
    for (int l = 0; l < 6; ++l)
      for (int k = 0; k < 2; ++k)
        CHECK((eq.pi[l][k] - ref.pi[l][k]).lpNorm<Eigen::Infinity>() <= 1e-8);
  }
}

TEST_CASE("doubling the label count tightens the strategy profile") {
  const double u = 0.37;
  auto strat = [&](int labels) {
    const auto in = standing_inputs(AffineMeanGraphon{1.0, 0.0}, labels);
    const GraphonEquilibrium eq = solve_graphon_equilibrium_det(in);
    return graphon_strategy_at(in, eq, u, 0)[0];
  };
  const double s8 = strat(8), s16 = strat(16), s32 = strat(32);
  const double d1 = std::fabs(s8 - s16);
  const double d2 = std::fabs(s16 - s32);
  CHECK(d1 > 1e-12);  // refinement is actually moving the answer
  CHECK(d2 <= 0.75 * d1 + 1e-12);
}

TEST_CASE("shape validation of supplied profiles") {
  const auto in = standing_inputs(ConstantGraphon{0.5}, 4);
  GraphonEquilibrium eq = solve_graphon_equilibrium_det(in);
  GraphonEquilibrium wrong = eq;
  wrong.pi.pop_back();
  CHECK_THROWS_AS(graphon_value(in, wrong), ConfigError);
  CHECK_THROWS_AS((void)graphon_strategy_at(in, wrong, 0.5, 0), ConfigError);
  CHECK_THROWS_AS((void)graphon_strategy_at(in, eq, 0.5, 3), ConfigError);

  GraphonPicardOptions opts;
  opts.initial.assign(3, Strategy(1, vec1(0.0)));  // wrong label count
  CHECK_THROWS_AS((void)solve_graphon_equilibrium_det(in, opts), ConfigError);
}

// --- regression-based solver with Brownian-driven drift premium -----------

namespace {

GraphonGameInputs mc_inputs(Graphon kernel, int labels, int steps,
                            ConvexSet constraint = FullSpace{}) {
  GraphonGameInputs in;
  in.coeffs = LabelCoeffs::homogeneous(make_agent(
      1, vec1(1.0), vec1(0.0), vec1(0.2), 0.5, 1.0, std::move(constraint)));
  in.kernel = std::move(kernel);
  in.labels.labels = labels;
  in.grid = TimeGrid{1.0, steps};
  return in;
}

}  // namespace

TEST_CASE("regression solver collapses onto the deterministic solution") {
  GraphonBsdeOptions opts;
  opts.kappa = 0.0;
  opts.paths = 256;
  opts.degree = 2;
  opts.inner_sweeps = 2;
  opts.seed = 7;

  SUBCASE("unconstrained") {
    const auto in = mc_inputs(ConstantGraphon{0.5}, 4, 5);
    const GraphonEquilibrium det = solve_graphon_equilibrium_det(in);
    const GraphonBsdeResult res = picard_graphon_bsde(in, opts);
    CHECK(res.converged);
    CHECK(!res.diverged);
    CHECK(res.iterations == 2);
    REQUIRE(res.outer_gaps.size() == 2);
    CHECK(res.outer_gaps[1] <= 1e-12);  // fixed point after one pass
    CHECK(res.max_martingale_residual <= 1e-10);
    for (int l = 0; l < 4; ++l) {
      CHECK(std::fabs(res.y0[l] - det.y0[l]) <= 1e-9);
      CHECK(std::fabs(res.value0[l] - det.value0[l]) <= 1e-9);
      CHECK(res.benchmark[l] == det.benchmark[l]);
    }
  }
  SUBCASE("with a binding box") {
    const auto in =
        mc_inputs(ConstantGraphon{0.5}, 4, 5, Box{vec1(0.0), vec1(0.05)});
    const GraphonEquilibrium det = solve_graphon_equilibrium_det(in);
    const GraphonBsdeResult res = picard_graphon_bsde(in, opts);
    CHECK(res.converged);
    CHECK(res.outer_gaps[1] <= 1e-12);
    for (int l = 0; l < 4; ++l) {
      CHECK(det.y0[l] == doctest::Approx(-0.0025).epsilon(1e-12));
      CHECK(std::fabs(res.y0[l] - det.y0[l]) <= 1e-9);
    }
  }
}

TEST_CASE("regression solver contracts with a Brownian-driven premium") {
  const auto in = mc_inputs(ConstantGraphon{0.5}, 8, 8);
  GraphonBsdeOptions opts;
  opts.kappa = 0.1;
  opts.paths = 2000;
  opts.inner_sweeps = 3;
  opts.seed = 11;
  const GraphonBsdeResult res = picard_graphon_bsde(in, opts);
  CHECK(res.converged);
  REQUIRE(res.outer_gaps.size() >= 2);
  CHECK(res.outer_gaps[0] > 0.0);
  CHECK(res.outer_gaps[1] / res.outer_gaps[0] < 1.0);
  CHECK(res.max_martingale_residual <= 1e-10);
  for (int l = 0; l < 8; ++l) {
    CHECK(std::isfinite(res.y0[l]));
    CHECK(res.value0[l] < 0.0);
  }
}

TEST_CASE("zero kernel decouples the regression solver") {
  const auto in = mc_inputs(ConstantGraphon{0.0}, 2, 4);
  GraphonBsdeOptions opts;
  opts.kappa = 0.05;
  opts.paths = 512;
  opts.inner_sweeps = 2;
  opts.seed = 3;
  const GraphonBsdeResult res = picard_graphon_bsde(in, opts);
  CHECK(res.converged);
  CHECK(res.iterations == 1);
  REQUIRE(res.outer_gaps.size() == 1);
  CHECK(res.outer_gaps[0] == 0.0);

  // label 0 should agree with a directly assembled single-agent solve
  const double eta = 0.5, theta = 0.2, kappa = 0.05;
  LsmcOptions lo;
  lo.paths = 512;
  lo.degree = opts.degree;
  lo.picard_sweeps = 2;
  lo.seed = 3;
  lo.stream = 0;
  const LsmcSolution sol = solve_bsde_lsmc(
      in.grid,
      [&](double, double w, double z) {
        const double th = theta + kappa * w;
        return -0.5 * eta * th * th - z * th;
      },
      [](double) { return 0.0; }, lo);
  CHECK(res.y0[0] == sol.y0);
}

TEST_CASE("regression solver rejects out-of-scope inputs") {
  {
    auto in = standing_inputs(ConstantGraphon{0.5}, 2);  // sigma_star = 1
    CHECK_THROWS_AS((void)picard_graphon_bsde(in, {}), CapabilityError);
  }
  {
    GraphonGameInputs in = mc_inputs(ConstantGraphon{0.5}, 2, 2);
    Eigen::VectorXd s(2), z(2), t(2);
    s << 1.0, 1.0;
    z << 0.0, 0.0;
    t << 0.2, 0.1;
    in.coeffs = LabelCoeffs::homogeneous(
        make_agent(2, s, z, t, 0.5, 1.0, FullSpace{}));
    CHECK_THROWS_AS((void)picard_graphon_bsde(in, {}), CapabilityError);
  }
}

// --- small-horizon forward-backward iteration ------------------------------

TEST_CASE("zero kernel converges in one forward-backward pass") {
  const auto in = standing_inputs(ConstantGraphon{0.0}, 4, 4, 0.5);
  const SmallTimeResult res = picard_graphon_fbsde_small_time(in);
  CHECK(res.converged);
  CHECK(!res.horizon_too_large);
  CHECK(res.iterations == 1);
  REQUIRE(res.gaps.size() == 1);
  CHECK(res.gaps[0] == 0.0);
}

TEST_CASE("small-horizon iteration matches the algebraic solver") {
  const auto in = standing_inputs(ConstantGraphon{0.5}, 6, 4, 0.1);
  const GraphonEquilibrium det = solve_graphon_equilibrium_det(in);
  const SmallTimeResult res = picard_graphon_fbsde_small_time(in);
  CHECK(res.converged);
  REQUIRE(!res.factors.empty());
  CHECK(res.factors[0] < 1.0);
  for (int l = 0; l < 6; ++l) {
    for (int k = 0; k < 4; ++k)
      CHECK((res.pi[l][k] - det.pi[l][k]).lpNorm<Eigen::Infinity>() <= 1e-8);
    CHECK(std::fabs(res.y0[l] - (det.benchmark[l] + det.y0[l])) <= 1e-8);
    CHECK(std::fabs(res.value0[l] - det.value0[l]) <= 1e-8);
  }
}

TEST_CASE("contraction factor does not improve as the horizon grows") {
  std::vector<double> factor;
  for (double T : {0.1, 0.5, 1.0, 2.0}) {
    const int steps = std::max(4, static_cast<int>(T * 8));
    const auto in = standing_inputs(ConstantGraphon{0.5}, 4, steps, T);
    const SmallTimeResult res = picard_graphon_fbsde_small_time(in);
    CHECK(res.converged);
    REQUIRE(res.factors.size() >= 3);
    factor.push_back(res.factors[2]);
  }
  for (std::size_t i = 1; i < factor.size(); ++i)
    CHECK(factor[i] >= factor[i - 1] - 1e-9);
}

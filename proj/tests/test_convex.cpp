#include "doctest.h"

#include <cmath>

#include "relperf/convex.hpp"
#include "relperf/errors.hpp"
#include "relperf/rng.hpp"

using namespace relperf;

namespace {

Eigen::VectorXd vec2(double a, double b) {
  Eigen::VectorXd v(2);
  v << a, b;
  return v;
}

// Projection characterization: (x - p).(q - p) <= tol for feasible q.
void check_optimality(const ConvexSet& set, const Eigen::MatrixXd& scale,
                      const Eigen::VectorXd& x, const Eigen::VectorXd& p,
                      std::uint64_t seed) {
  const int d = static_cast<int>(x.size());
  for (int trial = 0; trial < 200; ++trial) {
    Eigen::VectorXd raw(d);
    for (int c = 0; c < d; ++c)
      raw[c] = 6.0 * rng::uniform01(seed, static_cast<std::uint64_t>(trial),
                                    static_cast<std::uint64_t>(c)) -
               3.0;
    const Eigen::VectorXd q = scale * project(set, raw);
    CHECK((x - p).dot(q - p) <= 1e-9);
  }
}

}  // namespace

TEST_CASE("box projection clamps coordinatewise") {
  Box box{vec2(-1.0, 0.0), vec2(1.0, 2.0)};
  CHECK(project(box, vec2(3.0, -5.0)).isApprox(vec2(1.0, 0.0)));
  CHECK(project(box, vec2(0.5, 1.5)).isApprox(vec2(0.5, 1.5)));
}

TEST_CASE("ball projection is radial") {
  Ball ball{Eigen::VectorXd::Zero(2), 1.0};
  CHECK(project(ball, vec2(3.0, 4.0)).isApprox(vec2(0.6, 0.8), 1e-14));
  CHECK(project(ball, vec2(0.3, 0.1)).isApprox(vec2(0.3, 0.1)));
}

TEST_CASE("half space and orthant projections") {
  HalfSpace hs{vec2(1.0, 0.0), 0.0};
  CHECK(project(hs, vec2(2.0, 5.0)).isApprox(vec2(0.0, 5.0)));
  CHECK(project(hs, vec2(-2.0, 5.0)).isApprox(vec2(-2.0, 5.0)));
  Orthant orth;
  CHECK(project(ConvexSet{orth}, vec2(-1.0, 2.0)).isApprox(vec2(0.0, 2.0)));
  FullSpace full;
  CHECK(project(ConvexSet{full}, vec2(-7.0, 2.0)).isApprox(vec2(-7.0, 2.0)));
}

TEST_CASE("scaled ball projection solves the ellipsoid problem") {
  Ball ball{Eigen::VectorXd::Zero(2), 1.0};
  Eigen::MatrixXd scale = Eigen::MatrixXd::Zero(2, 2);
  scale(0, 0) = 1.0;
  scale(1, 1) = 2.0;
  // Scaled set is the ellipse x^2 + (y/2)^2 <= 1.
  CHECK(project_scaled(ball, scale, vec2(2.0, 0.0)).isApprox(vec2(1.0, 0.0), 1e-10));
  CHECK(project_scaled(ball, scale, vec2(0.0, 4.0)).isApprox(vec2(0.0, 2.0), 1e-10));
  const Eigen::VectorXd x = vec2(2.0, 2.0);
  const Eigen::VectorXd p = project_scaled(ball, scale, x);
  CHECK(std::pow(p[0], 2) + std::pow(p[1] / 2.0, 2) <= 1.0 + 1e-10);
  check_optimality(ball, scale, x, p, 11);
}

TEST_CASE("scaled ball projection handles dense SPD scales") {
  Ball ball{vec2(0.1, -0.2), 0.7};
  Eigen::MatrixXd scale(2, 2);
  scale << 1.5, 0.4, 0.4, 0.9;
  const Eigen::VectorXd x = vec2(2.5, -1.0);
  const Eigen::VectorXd p = project_scaled(ball, scale, x);
  // Feasibility in the unscaled coordinates.
  const Eigen::VectorXd back = scale.inverse() * p;
  CHECK((back - ball.center).norm() <= ball.radius + 1e-9);
  check_optimality(ball, scale, x, p, 13);
}

TEST_CASE("scaled box projection, diagonal and dense scales") {
  Box box{vec2(0.0, 0.0), vec2(1.0, 1.0)};
  Eigen::MatrixXd diag = Eigen::MatrixXd::Zero(2, 2);
  diag(0, 0) = 2.0;
  diag(1, 1) = 3.0;
  CHECK(project_scaled(box, diag, vec2(5.0, -1.0)).isApprox(vec2(2.0, 0.0)));
  Eigen::MatrixXd dense(2, 2);
  dense << 1.0, 0.2, 0.2, 1.0;
  for (int trial = 0; trial < 100; ++trial) {
    const Eigen::VectorXd x =
        vec2(8.0 * rng::uniform01(31, static_cast<std::uint64_t>(trial), 0) - 4.0,
             8.0 * rng::uniform01(31, static_cast<std::uint64_t>(trial), 1) - 4.0);
    const Eigen::VectorXd p = project_scaled(box, dense, x);
    const Eigen::VectorXd back = dense.inverse() * p;
    CHECK(back.minCoeff() >= -1e-10);
    CHECK(back.maxCoeff() <= 1.0 + 1e-10);
    check_optimality(box, dense, x, p, 1000 + static_cast<std::uint64_t>(trial));
  }
}

TEST_CASE("scaled orthant projection under a dense scale") {
  Orthant orth;
  Eigen::MatrixXd dense(2, 2);
  dense << 1.3, -0.4, -0.4, 0.9;
  for (int trial = 0; trial < 100; ++trial) {
    const Eigen::VectorXd x =
        vec2(8.0 * rng::uniform01(37, static_cast<std::uint64_t>(trial), 0) - 4.0,
             8.0 * rng::uniform01(37, static_cast<std::uint64_t>(trial), 1) - 4.0);
    const Eigen::VectorXd p = project_scaled(ConvexSet{orth}, dense, x);
    const Eigen::VectorXd back = dense.inverse() * p;
    CHECK(back.minCoeff() >= -1e-10);
    check_optimality(ConvexSet{orth}, dense, x, p,
                     2000 + static_cast<std::uint64_t>(trial));
  }
}

TEST_CASE("scaled half space projection under dense SPD scale") {
  HalfSpace hs{vec2(1.0, 1.0), 0.5};
  Eigen::MatrixXd scale(2, 2);
  scale << 1.2, 0.3, 0.3, 0.8;
  const Eigen::VectorXd x = vec2(3.0, 1.0);
  const Eigen::VectorXd p = project_scaled(hs, scale, x);
  const Eigen::VectorXd back = scale.inverse() * p;
  CHECK(hs.normal.dot(back) <= hs.offset + 1e-9);
  check_optimality(hs, scale, x, p, 17);
}

TEST_CASE("projections are idempotent and distances consistent") {
  Ball ball{vec2(0.0, 0.3), 0.9};
  Eigen::MatrixXd scale(2, 2);
  scale << 1.1, 0.2, 0.2, 1.4;
  for (int trial = 0; trial < 50; ++trial) {
    const Eigen::VectorXd x =
        vec2(8.0 * rng::uniform01(3, static_cast<std::uint64_t>(trial), 0) - 4.0,
             8.0 * rng::uniform01(3, static_cast<std::uint64_t>(trial), 1) - 4.0);
    const Eigen::VectorXd p = project_scaled(ball, scale, x);
    CHECK((project_scaled(ball, scale, p) - p).norm() < 1e-8);
    CHECK(dist_scaled(ball, scale, x) == doctest::Approx((x - p).norm()).epsilon(1e-10));
  }
}

TEST_CASE("set validation flags dimension mismatches") {
  Box box{vec2(0.0, 0.0), vec2(1.0, 1.0)};
  CHECK_THROWS_AS(validate_set(ConvexSet{box}, 3), ConfigError);
  Ball bad{Eigen::VectorXd::Zero(2), -1.0};
  CHECK_THROWS_AS(validate_set(ConvexSet{bad}, 2), ConfigError);
  Box inverted{vec2(1.0, 1.0), vec2(0.0, 0.0)};
  CHECK_THROWS_AS(validate_set(ConvexSet{inverted}, 2), ConfigError);
}

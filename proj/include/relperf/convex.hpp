#pragma once

#include <string>
#include <variant>

#include <Eigen/Dense>

#include "relperf/errors.hpp"

namespace relperf {

// Closed convex strategy-constraint sets. All sets live in R^d.
struct FullSpace {};

struct Box {
  Eigen::VectorXd lower, upper;
};

struct Ball {
  Eigen::VectorXd center;
  double radius = 1.0;
};

// { x : normal . x <= offset }
struct HalfSpace {
  Eigen::VectorXd normal;
  double offset = 0.0;
};

// Nonnegative orthant { x : x >= 0 }.
struct Orthant {};

using ConvexSet = std::variant<FullSpace, Box, Ball, HalfSpace, Orthant>;

void validate_set(const ConvexSet& set, int d);
std::string set_kind(const ConvexSet& set);

// Euclidean projection of x onto the set.
Eigen::VectorXd project(const ConvexSet& set, const Eigen::VectorXd& x);

// Euclidean projection of x onto scale*A, scale symmetric positive definite.
// Any set accepts a scalar multiple of the identity; Ball, HalfSpace and
// FullSpace accept arbitrary SPD scales (Ball becomes an ellipsoid, solved by
// a safeguarded Newton iteration on the Lagrange multiplier to 1e-12). Box
// and Orthant under a dense scale solve the equivalent bound-constrained QP
// exactly by active-set enumeration, which limits them to d <= 10; beyond
// that they raise CapabilityError.
Eigen::VectorXd project_scaled(const ConvexSet& set, const Eigen::MatrixXd& scale,
                               const Eigen::VectorXd& x);

double dist_scaled(const ConvexSet& set, const Eigen::MatrixXd& scale,
                   const Eigen::VectorXd& x);

}  // namespace relperf

#pragma once

#include <vector>

#include <Eigen/Dense>

#include "relperf/errors.hpp"

namespace relperf {

// Uniform time grid on [0, T] with `steps` intervals. Knot k sits at
// t_k = k*T/steps; interval k is [t_k, t_{k+1}).
struct TimeGrid {
  double T = 1.0;
  int steps = 1;

  TimeGrid() = default;
  TimeGrid(double horizon, int n_steps) : T(horizon), steps(n_steps) { validate(); }

  void validate() const {
    if (!(T > 0.0)) throw ConfigError("TimeGrid: horizon T must be positive");
    if (steps < 1) throw ConfigError("TimeGrid: steps must be >= 1");
  }

  double dt() const { return T / steps; }
  double t(int k) const { return T * k / steps; }

  // Interval index containing time t, with right endpoints snapped down so
  // that t = t_{k+1} still reads interval k's value when approached from
  // inside (callers pass interior stage times).
  int interval(double t_) const {
    int k = static_cast<int>(t_ / dt());
    if (k < 0) k = 0;
    if (k > steps - 1) k = steps - 1;
    return k;
  }
};

// Piecewise-constant time series on a grid: either a single value (constant
// in time) or one value per interval.
template <class V>
struct Piecewise {
  std::vector<V> values;

  Piecewise() = default;
  explicit Piecewise(V constant) : values{std::move(constant)} {}
  explicit Piecewise(std::vector<V> per_interval) : values(std::move(per_interval)) {}

  bool constant() const { return values.size() == 1; }

  const V& at(int interval) const {
    return constant() ? values.front() : values[static_cast<std::size_t>(interval)];
  }

  void validate_size(int steps, const char* name) const {
    if (values.empty())
      throw ConfigError(std::string(name) + ": no values supplied");
    if (values.size() != 1 && static_cast<int>(values.size()) != steps)
      throw ConfigError(std::string(name) +
                        ": needs 1 value or one per time interval");
  }
};

using PiecewiseVec = Piecewise<Eigen::VectorXd>;

}  // namespace relperf

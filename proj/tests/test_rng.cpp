#include "doctest.h"

#include <cmath>
#include <vector>

#include "relperf/rng.hpp"

using namespace relperf;

TEST_CASE("uniform01 stays strictly inside (0,1) and is reproducible") {
  for (std::uint64_t i = 0; i < 10000; ++i) {
    const double u = rng::uniform01(42, i);
    CHECK(u > 0.0);
    CHECK(u < 1.0);
  }
  CHECK(rng::uniform01(42, 1, 2, 3, 4) == rng::uniform01(42, 1, 2, 3, 4));
  CHECK(rng::uniform01(42, 1, 2, 3, 4) != rng::uniform01(43, 1, 2, 3, 4));
  CHECK(rng::uniform01(42, 1, 2) != rng::uniform01(42, 2, 1));
  CHECK(rng::to_uniform01(0) > 0.0);
  CHECK(rng::to_uniform01(~0ULL) < 1.0);
}

TEST_CASE("normal quantile matches reference points") {
  CHECK(rng::normal_quantile(0.5) == 0.0);
  // Phi(1) and Phi(2) reference values.
  CHECK(std::fabs(rng::normal_quantile(0.841344746068542949) - 1.0) < 1e-12);
  CHECK(std::fabs(rng::normal_quantile(0.977249868051820793) - 2.0) < 1e-12);
  CHECK(std::fabs(rng::normal_quantile(0.975) - 1.959963984540054) < 1e-12);
  CHECK(std::fabs(rng::normal_quantile(0.999) - 3.090232306167814) < 1e-12);
  // Dyadic p keeps 1 - p exact, so the symmetry must hold to full precision.
  for (double p : {0.0078125, 0.0625, 0.125, 0.25, 0.375}) {
    CHECK(rng::normal_quantile(p) == -rng::normal_quantile(1.0 - p));
  }
  // Monotone over a fine sweep.
  double prev = -1e308;
  for (int i = 1; i < 2000; ++i) {
    const double v = rng::normal_quantile(i / 2000.0);
    CHECK(v > prev);
    prev = v;
  }
}

TEST_CASE("gaussian draws have standard moments") {
  const int n = 200000;
  double sum = 0.0, sq = 0.0;
  for (int i = 0; i < n; ++i) {
    const double g = rng::gaussian(7, static_cast<std::uint64_t>(i));
    sum += g;
    sq += g * g;
  }
  const double mean = sum / n;
  const double var = sq / n - mean * mean;
  CHECK(std::fabs(mean) < 4.0 / std::sqrt(static_cast<double>(n)));
  CHECK(std::fabs(var - 1.0) < 6.0 / std::sqrt(static_cast<double>(n)));
}

TEST_CASE("draws are order independent") {
  std::vector<double> forward, backward(100);
  for (int i = 0; i < 100; ++i)
    forward.push_back(rng::gaussian(9, 5, static_cast<std::uint64_t>(i)));
  for (int i = 99; i >= 0; --i)
    backward[static_cast<std::size_t>(i)] =
        rng::gaussian(9, 5, static_cast<std::uint64_t>(i));
  CHECK(forward == backward);
}

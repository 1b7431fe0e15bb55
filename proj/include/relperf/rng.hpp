#pragma once

#include <cmath>
#include <cstdint>

// Counter-based random streams. Every draw is a pure function of
// (seed, id0, id1, id2, id3), so simulations can be evaluated in any order
// and across any number of threads while producing identical numbers.

namespace relperf::rng {

// splitmix64 finalizer: bijective 64-bit mixer with good avalanche.
inline std::uint64_t mix64(std::uint64_t x) {
  x += 0x9e3779b97f4a7c15ULL;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
  return x ^ (x >> 31);
}

// Key for one draw. Distinct id tuples give independent-looking outputs;
// the chain of mixes keeps (a,b) and (b,a) distinct.
inline std::uint64_t key(std::uint64_t seed, std::uint64_t id0 = 0,
                         std::uint64_t id1 = 0, std::uint64_t id2 = 0,
                         std::uint64_t id3 = 0) {
  std::uint64_t h = mix64(seed ^ 0x243f6a8885a308d3ULL);
  h = mix64(h ^ mix64(id0 ^ 0x13198a2e03707344ULL));
  h = mix64(h ^ mix64(id1 ^ 0xa4093822299f31d0ULL));
  h = mix64(h ^ mix64(id2 ^ 0x082efa98ec4e6c89ULL));
  h = mix64(h ^ mix64(id3 ^ 0x452821e638d01377ULL));
  return h;
}

// Uniform on the open interval (0,1); never returns 0 or 1, so the value can
// feed the normal quantile directly. 52 bits keep the +0.5 offset exactly
// representable, so the top of the range stays strictly below 1.
inline double to_uniform01(std::uint64_t bits) {
  return (static_cast<double>(bits >> 12) + 0.5) * 0x1.0p-52;
}

inline double uniform01(std::uint64_t seed, std::uint64_t id0 = 0,
                        std::uint64_t id1 = 0, std::uint64_t id2 = 0,
                        std::uint64_t id3 = 0) {
  return to_uniform01(key(seed, id0, id1, id2, id3));
}

// Wichura's AS241 rational approximation to the standard normal quantile,
// accurate to ~1e-15 over (0,1).
inline double normal_quantile(double p) {
  const double q = p - 0.5;
  if (std::fabs(q) <= 0.425) {
    const double r = 0.180625 - q * q;
    return q *
           (((((((2509.0809287301226727 * r + 33430.575583588128105) * r +
                 67265.770927008700853) * r + 45921.953931549871457) * r +
               13731.693765509461125) * r + 1971.5909503065514427) * r +
             133.14166789178437745) * r + 3.387132872796366608) /
           (((((((5226.495278852545703 * r + 28729.085735721942674) * r +
                 39307.89580009271061) * r + 21213.794301586595867) * r +
               5394.1960214247511077) * r + 687.1870074920579083) * r +
             42.313330701600911252) * r + 1.0);
  }
  double r = (q < 0.0) ? p : 1.0 - p;
  r = std::sqrt(-std::log(r));
  double v;
  if (r <= 5.0) {
    r -= 1.6;
    v = (((((((7.7454501427834140764e-4 * r + 0.0227238449892691845833) * r +
              0.24178072517745061177) * r + 1.27045825245236838258) * r +
            3.64784832476320460504) * r + 5.7694972214606914055) * r +
          4.6303378461565452959) * r + 1.42343711074968357734) /
        (((((((1.05075007164441684324e-9 * r + 5.475938084995344946e-4) * r +
              0.0151986665636164571966) * r + 0.14810397642748007459) * r +
            0.68976733498510000455) * r + 1.6763848301838038494) * r +
          2.05319162663775882187) * r + 1.0);
  } else {
    r -= 5.0;
    v = (((((((2.01033439929228813265e-7 * r + 2.71155556874348757815e-5) * r +
              0.0012426609473880784386) * r + 0.026532189526576123093) * r +
            0.29656057182850489123) * r + 1.7848265399172913358) * r +
          5.4637849111641143699) * r + 6.6579046435011037772) /
        (((((((2.04426310338993978564e-15 * r + 1.4215117583164458887e-7) * r +
              1.8463183175100546818e-5) * r + 7.868691311456132591e-4) * r +
            0.0148753612908506148525) * r + 0.13692988092273580531) * r +
          0.59983220655588793769) * r + 1.0);
  }
  return (q < 0.0) ? -v : v;
}

inline double gaussian(std::uint64_t seed, std::uint64_t id0 = 0,
                       std::uint64_t id1 = 0, std::uint64_t id2 = 0,
                       std::uint64_t id3 = 0) {
  return normal_quantile(uniform01(seed, id0, id1, id2, id3));
}

}  // namespace relperf::rng

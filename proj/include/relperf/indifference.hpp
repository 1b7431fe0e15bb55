#pragma once

#include <cstdint>
#include <vector>

#include "relperf/fixed_point.hpp"
#include "relperf/graphon_game.hpp"

namespace relperf {

// Initial value Y^base_0 of the competition-free value equation: the y0 a
// player earns with the benchmark weights set to zero,
//   Y^base_0 = int_0^T [ -(eta/2)|theta|^2 + dist(sigma~ eta theta, ws A)^2
//                        / (2 eta) ] dt.
// Uses the same knot quadrature as the equilibrium value computations, so
// comparing against gamma0 of a zero-weight game is exact, not approximate.
double baseline_y0(const AgentCoeffs& agent, const TimeGrid& grid);

enum class IndifferenceMethod { ClosedForm, Bisection };

// Capital p that makes a player indifferent between entering the game with
// endowment xi (competitive value) and staying out with endowment xi - p
// (baseline value). Closed form reports both derivations; they must agree.
struct IndifferenceResult {
  double p = 0.0;
  double y_base_0 = 0.0;
  IndifferenceMethod method = IndifferenceMethod::ClosedForm;
  double p_log = 0.0;     // eta (log(-V^comp_0) - log(-V^base_0))
  double p_closed = 0.0;  // xi_bar + gamma_0 - Y^base_0
  double se = 0.0;        // Bisection: standard error of the located root
  int iterations = 0;     // Bisection: sign evaluations performed
  bool hit_mc_floor = false;  // Bisection stopped at the MC resolution
};

// Per-agent closed-form capital. `baseline` supplies Y^base_0 per agent;
// empty means compute it with baseline_y0. Deterministic endowments required
// (the log form needs finite values). The two forms disagreeing beyond 1e-8
// (e.g. a saturated utility exponent) raises SolverError.
std::vector<IndifferenceResult> indifference_capital_finite(
    const GameInputs& in, const FiniteEquilibrium& eq,
    std::vector<double> baseline = {});

// Label-population analog, p^u = benchmark^u + y0^u - Y^base_0(u).
std::vector<IndifferenceResult> indifference_capital_graphon(
    const GraphonGameInputs& in, const GraphonEquilibrium& eq,
    std::vector<double> baseline = {});

// Same at an arbitrary label u (off the quadrature grid is fine).
IndifferenceResult indifference_graphon_at(const GraphonGameInputs& in,
                                           const GraphonEquilibrium& eq,
                                           double u);

struct BisectionOptions {
  int paths = 100000;
  std::uint64_t seed = 1;
  double tol = 1e-4;  // half-width of the final bracket
};

// Monte Carlo root-finding check of the closed form: bisect p such that
//   mean utility(X^base_T - p, 0) == mean utility(X^eq_T, benchmark),
// both sides at their optimal strategies and driven by common random
// numbers (same seed, per-agent noise streams shared across the two sides).
// Stops when the bracket half-width reaches tol, or earlier when |g| at the
// midpoint drops below one standard error (the MC resolution floor). A
// bracket must exist in [-10, 10]; otherwise SolverError.
IndifferenceResult indifference_bisection(int agent, const GameInputs& in,
                                          const FiniteEquilibrium& eq,
                                          const BisectionOptions& opts = {});

}  // namespace relperf

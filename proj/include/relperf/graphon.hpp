#pragma once

#include <cstdint>
#include <utility>
#include <variant>
#include <vector>

#include <Eigen/Dense>

#include "relperf/errors.hpp"

namespace relperf {

// Symmetric kernels on [0,1]^2 with values in [0,1].
struct ConstantGraphon {
  double p = 0.5;
};
struct ProductGraphon {};  // u*v
struct MinGraphon {};      // min(u,v)
struct AffineMeanGraphon { // a*(u+v)/2 + b
  double a = 0.0;
  double b = 0.5;
};

// Piecewise-constant kernel on an N x N grid of blocks. Block (i,j) covers
// ((i-1)/N, i/N] x ((j-1)/N, j/N]; the label 0 is assigned to block 1.
struct StepGraphon {
  int n_blocks = 1;
  Eigen::MatrixXd weights;

  void validate() const;
};

using Graphon = std::variant<ConstantGraphon, ProductGraphon, MinGraphon,
                             AffineMeanGraphon, StepGraphon>;

void validate_graphon(const Graphon& g);
double eval_graphon(const Graphon& g, double u, double v);

// 1-based block containing label u on the uniform n-partition of (0,1].
// Blocks are right-closed: block k is ((k-1)/n, k/n]; values at or below 0
// map to block 1. Grid labels u = k/n land exactly in block k.
int step_block_index(double u, int n);

// N-block step approximation sampled at the upper grid corners:
// weights(i,j) = G(i/n, j/n).
StepGraphon project_step(const Graphon& g, int n);

struct CutNormResult {
  double value = 0.0;
  bool exact = true;
};

struct CutNormOptions {
  int max_exact_blocks = 24;
  bool allow_heuristic = false;  // alternating maximization above the limit
  int heuristic_restarts = 8;
  std::uint64_t heuristic_seed = 1;
};

// Cut distance sup_{E,E'} |int_{E x E'} (a - b)| between two step graphons.
// Both are refined to their common block grid; the bilinear relaxation over
// [0,1]^N attains its maximum at 0/1 vertices, so a Gray-code sweep over one
// side with greedy closure of the other side is exact. Refined grids larger
// than max_exact_blocks raise CapabilityError ("exact enumeration
// infeasible") unless allow_heuristic is set, in which case the result is
// flagged non-exact.
CutNormResult cut_norm(const StepGraphon& a, const StepGraphon& b,
                       const CutNormOptions& opts = {});

// Undirected simple graph sampled from a graphon: edge {i,j} (i<j, 1-based)
// present with probability beta_n * G_n(i/n, j/n), where G_n = project_step(g, n).
struct InteractionGraph {
  int n = 0;
  double beta_n = 1.0;
  std::vector<std::pair<int, int>> edges;  // 1-based, i < j
  StepGraphon source_step;

  Eigen::MatrixXd adjacency() const;
};

// Per-pair Bernoulli draws come from a counter-based stream keyed on
// (seed, i, j), so sampling order and threading cannot change the graph.
InteractionGraph sample_interaction_graph(const Graphon& g, int n, double beta_n,
                                          std::uint64_t seed);

// Interaction weights lambda(i,j) = adjacency(i,j) / ((n-1) beta_n).
// Rows whose weights sum above 1 (beyond rounding) are rejected by name.
Eigen::MatrixXd normalized_weights(const InteractionGraph& graph);

}  // namespace relperf

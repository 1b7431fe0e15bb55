#include "relperf/graphon.hpp"

#include <algorithm>
#include <bit>
#include <cmath>
#include <numeric>
#include <string>

#include "relperf/rng.hpp"

namespace relperf {

// Exact boundary points i/N are snapped onto block i even when the label
// arrived with floating-point noise.
int step_block_index(double u, int n) {
  const double x = u * n;
  const double r = std::round(x);
  double c = (std::fabs(x - r) <= 1e-9 * std::max(1.0, std::fabs(x))) ? r
                                                                      : std::ceil(x);
  if (c < 1.0) c = 1.0;
  if (c > n) c = n;
  return static_cast<int>(c);
}

namespace {

void check_label(double u, const char* name) {
  if (!(u >= 0.0 && u <= 1.0))
    throw ConfigError(std::string("eval_graphon: label ") + name +
                      " must lie in [0,1]");
}

}  // namespace

void StepGraphon::validate() const {
  if (n_blocks < 1) throw ConfigError("StepGraphon: n_blocks must be >= 1");
  if (weights.rows() != n_blocks || weights.cols() != n_blocks)
    throw ConfigError("StepGraphon: weights must be n_blocks x n_blocks");
  for (int i = 0; i < n_blocks; ++i)
    for (int j = 0; j < n_blocks; ++j) {
      if (!(weights(i, j) >= 0.0 && weights(i, j) <= 1.0))
        throw ConfigError("StepGraphon: weights must lie in [0,1]");
      if (weights(i, j) != weights(j, i))
        throw ConfigError("StepGraphon: weights must be symmetric");
    }
}

void validate_graphon(const Graphon& g) {
  std::visit(
      [](const auto& s) {
        using T = std::decay_t<decltype(s)>;
        if constexpr (std::is_same_v<T, ConstantGraphon>) {
          if (!(s.p >= 0.0 && s.p <= 1.0))
            throw ConfigError("ConstantGraphon: p must lie in [0,1]");
        } else if constexpr (std::is_same_v<T, AffineMeanGraphon>) {
          const double lo = std::min(s.b, s.a + s.b);
          const double hi = std::max(s.b, s.a + s.b);
          if (!(lo >= 0.0 && hi <= 1.0))
            throw ConfigError("AffineMeanGraphon: range must stay inside [0,1]");
        } else if constexpr (std::is_same_v<T, StepGraphon>) {
          s.validate();
        }
      },
      g);
}

double eval_graphon(const Graphon& g, double u, double v) {
  check_label(u, "u");
  check_label(v, "v");
  return std::visit(
      [&](const auto& s) -> double {
        using T = std::decay_t<decltype(s)>;
        if constexpr (std::is_same_v<T, ConstantGraphon>) {
          return s.p;
        } else if constexpr (std::is_same_v<T, ProductGraphon>) {
          return u * v;
        } else if constexpr (std::is_same_v<T, MinGraphon>) {
          return std::min(u, v);
        } else if constexpr (std::is_same_v<T, AffineMeanGraphon>) {
          return s.a * (u + v) / 2.0 + s.b;
        } else {
          return s.weights(step_block_index(u, s.n_blocks) - 1,
                           step_block_index(v, s.n_blocks) - 1);
        }
      },
      g);
}

StepGraphon project_step(const Graphon& g, int n) {
  validate_graphon(g);
  if (n < 1) throw ConfigError("project_step: n must be >= 1");
  StepGraphon out;
  out.n_blocks = n;
  out.weights.resize(n, n);
  for (int i = 1; i <= n; ++i)
    for (int j = i; j <= n; ++j) {
      const double w = eval_graphon(g, static_cast<double>(i) / n,
                                    static_cast<double>(j) / n);
      out.weights(i - 1, j - 1) = w;
      out.weights(j - 1, i - 1) = w;
    }
  return out;
}

namespace {

// Signed block masses of (a - b) on the common refinement, scaled by block
// area 1/L^2.
Eigen::MatrixXd refined_difference(const StepGraphon& a, const StepGraphon& b,
                                   int* out_blocks) {
  const int l = std::lcm(a.n_blocks, b.n_blocks);
  Eigen::MatrixXd m(l, l);
  const double area = 1.0 / (static_cast<double>(l) * l);
  for (int i = 0; i < l; ++i) {
    const int ia = i * a.n_blocks / l;
    const int ib = i * b.n_blocks / l;
    for (int j = 0; j < l; ++j) {
      const int ja = j * a.n_blocks / l;
      const int jb = j * b.n_blocks / l;
      m(i, j) = (a.weights(ia, ja) - b.weights(ib, jb)) * area;
    }
  }
  if (out_blocks) *out_blocks = l;
  return m;
}

// Exact maximization of |x' M y| over 0/1 vectors: sweep x in Gray-code
// order, maintaining column sums and their positive/negative parts in O(1)
// per column update; the optimal y for fixed x is the sign-based closure.
double cut_norm_exact(const Eigen::MatrixXd& m) {
  const int l = static_cast<int>(m.rows());
  std::vector<double> rows(static_cast<std::size_t>(l) * l);  // row-major copy
  for (int i = 0; i < l; ++i)
    for (int j = 0; j < l; ++j) rows[static_cast<std::size_t>(i) * l + j] = m(i, j);
  std::vector<double> colsum(static_cast<std::size_t>(l), 0.0);
  std::vector<char> in(static_cast<std::size_t>(l), 0);
  double pos = 0.0, neg = 0.0;  // sums of positive / negative column sums
  double best = 0.0;
  const std::uint64_t total = std::uint64_t(1) << l;
  for (std::uint64_t it = 1; it < total; ++it) {
    const int row = std::countr_zero(it);  // Gray code: flip lowest set bit position
    const double sign = in[static_cast<std::size_t>(row)] ? -1.0 : 1.0;
    in[static_cast<std::size_t>(row)] ^= 1;
    const double* mrow = rows.data() + static_cast<std::size_t>(row) * l;
    for (int j = 0; j < l; ++j) {
      const double old = colsum[static_cast<std::size_t>(j)];
      const double next = old + sign * mrow[j];
      if (old > 0.0) pos -= old; else neg -= old;
      if (next > 0.0) pos += next; else neg += next;
      colsum[static_cast<std::size_t>(j)] = next;
    }
    best = std::max(best, std::max(pos, -neg));
  }
  return best;
}

// Alternating maximization with deterministic multi-start; exact whenever the
// difference has one sign, a local maximum otherwise.
double cut_norm_heuristic(const Eigen::MatrixXd& m, int restarts,
                          std::uint64_t seed) {
  const int l = static_cast<int>(m.rows());
  double best = 0.0;
  for (int r = 0; r < restarts + 2; ++r) {
    Eigen::VectorXd x(l);
    if (r == 0) {
      x.setOnes();
    } else if (r == 1) {
      for (int i = 0; i < l; ++i) x[i] = (m.row(i).sum() > 0.0) ? 1.0 : 0.0;
    } else {
      for (int i = 0; i < l; ++i)
        x[i] = (rng::uniform01(seed, static_cast<std::uint64_t>(r),
                               static_cast<std::uint64_t>(i)) < 0.5)
                   ? 0.0
                   : 1.0;
    }
    for (double orient : {1.0, -1.0}) {
      Eigen::VectorXd xs = x;
      double prev = -1.0, val = 0.0;
      for (int sweep = 0; sweep < 200; ++sweep) {
        Eigen::VectorXd cols = (orient * m.transpose()) * xs;
        Eigen::VectorXd y = (cols.array() > 0.0).cast<double>();
        Eigen::VectorXd rows = orient * m * y;
        xs = (rows.array() > 0.0).cast<double>();
        val = xs.dot(orient * m * y);
        if (val <= prev + 1e-15) break;
        prev = val;
      }
      best = std::max(best, val);
    }
  }
  return best;
}

}  // namespace

CutNormResult cut_norm(const StepGraphon& a, const StepGraphon& b,
                       const CutNormOptions& opts) {
  a.validate();
  b.validate();
  int l = 0;
  const Eigen::MatrixXd m = refined_difference(a, b, &l);
  if (l <= opts.max_exact_blocks) return {cut_norm_exact(m), true};
  if (!opts.allow_heuristic)
    throw CapabilityError(
        "cut_norm: exact enumeration infeasible for " + std::to_string(l) +
        " refined blocks (limit " + std::to_string(opts.max_exact_blocks) +
        "); coarsen the inputs or set allow_heuristic");
  return {cut_norm_heuristic(m, opts.heuristic_restarts, opts.heuristic_seed),
          false};
}

Eigen::MatrixXd InteractionGraph::adjacency() const {
  Eigen::MatrixXd adj = Eigen::MatrixXd::Zero(n, n);
  for (const auto& [i, j] : edges) {
    adj(i - 1, j - 1) = 1.0;
    adj(j - 1, i - 1) = 1.0;
  }
  return adj;
}

InteractionGraph sample_interaction_graph(const Graphon& g, int n, double beta_n,
                                          std::uint64_t seed) {
  if (n < 3) throw ConfigError("sample_interaction_graph: n must be >= 3");
  if (!(beta_n > 0.0 && beta_n <= 1.0))
    throw ConfigError("sample_interaction_graph: beta_n must lie in (0,1]");
  InteractionGraph out;
  out.n = n;
  out.beta_n = beta_n;
  out.source_step = project_step(g, n);
  const double pmax = beta_n * out.source_step.weights.maxCoeff();
  if (pmax > 1.0 + 1e-12)
    throw ConfigError("sample_interaction_graph: beta_n * max weight exceeds 1");
  for (int i = 1; i <= n; ++i)
    for (int j = i + 1; j <= n; ++j) {
      const double p = beta_n * out.source_step.weights(i - 1, j - 1);
      if (rng::uniform01(seed, static_cast<std::uint64_t>(i),
                         static_cast<std::uint64_t>(j)) < p)
        out.edges.emplace_back(i, j);
    }
  return out;
}

Eigen::MatrixXd normalized_weights(const InteractionGraph& graph) {
  if (graph.n < 2) throw ConfigError("normalized_weights: graph needs n >= 2");
  const double scale = 1.0 / ((graph.n - 1) * graph.beta_n);
  Eigen::MatrixXd lambda = graph.adjacency() * scale;
  for (int i = 0; i < graph.n; ++i) {
    const double row = lambda.row(i).sum();
    if (row > 1.0 + 1e-12)
      throw ConfigError("normalized_weights: row " + std::to_string(i + 1) +
                        " sums to " + std::to_string(row) + " > 1");
  }
  return lambda;
}

}  // namespace relperf

#include "relperf/convex.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <vector>

namespace relperf {

namespace {

bool is_diagonal(const Eigen::MatrixXd& m) {
  for (int i = 0; i < m.rows(); ++i)
    for (int j = 0; j < m.cols(); ++j)
      if (i != j && m(i, j) != 0.0) return false;
  return true;
}

bool is_scalar_multiple(const Eigen::MatrixXd& m) {
  if (!is_diagonal(m)) return false;
  for (int i = 1; i < m.rows(); ++i)
    if (m(i, i) != m(0, 0)) return false;
  return true;
}

Eigen::VectorXd project_box(const Eigen::VectorXd& lo, const Eigen::VectorXd& hi,
                            const Eigen::VectorXd& x) {
  return x.cwiseMax(lo).cwiseMin(hi);
}

Eigen::VectorXd project_ball(const Eigen::VectorXd& c, double r,
                             const Eigen::VectorXd& x) {
  const Eigen::VectorXd v = x - c;
  const double nv = v.norm();
  if (nv <= r) return x;
  return c + (r / nv) * v;
}

Eigen::VectorXd project_halfspace(const Eigen::VectorXd& a, double b,
                                  const Eigen::VectorXd& x) {
  const double slack = a.dot(x) - b;
  if (slack <= 0.0) return x;
  return x - (slack / a.squaredNorm()) * a;
}

// Projection onto the ellipsoid { z : |D^{-1} z - c|^2 <= r^2 } with D
// diagonal positive. Substituting y = D^{-1} z - c reduces the KKT system to
// a single multiplier mu >= 0 with
//   phi(mu) = sum_i d_i^2 g_i^2 / (d_i^2 + mu)^2 = r^2,  g = x_tilde - D c,
// phi strictly decreasing; solved by Newton with bisection safeguard.
Eigen::VectorXd project_ellipsoid_diag(const Eigen::VectorXd& d,
                                       const Eigen::VectorXd& c, double r,
                                       const Eigen::VectorXd& x) {
  const int n = static_cast<int>(x.size());
  const Eigen::VectorXd g = x - d.cwiseProduct(c);
  auto phi = [&](double mu, double* dphi) {
    double s = 0.0, ds = 0.0;
    for (int i = 0; i < n; ++i) {
      const double di2 = d[i] * d[i];
      const double den = di2 + mu;
      const double term = di2 * g[i] * g[i] / (den * den);
      s += term;
      ds += -2.0 * term / den;
    }
    if (dphi) *dphi = ds;
    return s;
  };
  if (phi(0.0, nullptr) <= r * r * (1.0 + 1e-14)) return x;  // interior

  double lo = 0.0;
  double hi = std::max(1.0, d.maxCoeff() * g.norm() / std::max(r, 1e-300));
  while (phi(hi, nullptr) > r * r) hi *= 2.0;
  double mu = 0.5 * (lo + hi);
  for (int it = 0; it < 200; ++it) {
    double dphi;
    const double f = phi(mu, &dphi) - r * r;
    if (std::fabs(f) <= 1e-12 * r * r) break;
    if (f > 0.0) lo = mu; else hi = mu;
    double step = (dphi != 0.0) ? mu - f / dphi : 0.5 * (lo + hi);
    mu = (step > lo && step < hi) ? step : 0.5 * (lo + hi);
  }
  Eigen::VectorXd y(n);
  for (int i = 0; i < n; ++i) y[i] = d[i] * g[i] / (d[i] * d[i] + mu);
  return d.cwiseProduct(y + c);
}

// Projection onto scale * Box: the strictly convex QP min |x - S y|^2 over
// l <= y <= u, solved exactly by enumerating the 3^d bound patterns (each
// coordinate free, at its lower, or at its upper bound). The optimal active
// set appears in the enumeration and its candidate attains the global
// minimum, so comparing clamped candidates by objective needs no KKT
// tolerances. Infinite bounds skip the corresponding fixings.
Eigen::VectorXd project_box_qp(const Eigen::VectorXd& lo,
                               const Eigen::VectorXd& hi,
                               const Eigen::MatrixXd& s,
                               const Eigen::VectorXd& x) {
  const int d = static_cast<int>(x.size());
  if (d > 10)
    throw CapabilityError(
        "project_scaled: box sets under a dense scale are limited to d <= 10");
  const Eigen::MatrixXd q = s.transpose() * s;
  const Eigen::VectorXd c = s.transpose() * x;

  double best_obj = std::numeric_limits<double>::infinity();
  Eigen::VectorXd best_y = lo.cwiseMax(Eigen::VectorXd::Zero(d).cwiseMin(hi));
  std::vector<int> pat(d, 0);  // 0 free, 1 at lower, 2 at upper
  const long total = static_cast<long>(std::pow(3.0, d) + 0.5);
  for (long code = 0; code < total; ++code) {
    long rem = code;
    bool feasible_pattern = true;
    int free_count = 0;
    for (int i = 0; i < d; ++i) {
      pat[i] = static_cast<int>(rem % 3);
      rem /= 3;
      if (pat[i] == 0) ++free_count;
      if (pat[i] == 1 && !std::isfinite(lo[i])) feasible_pattern = false;
      if (pat[i] == 2 && !std::isfinite(hi[i])) feasible_pattern = false;
    }
    if (!feasible_pattern) continue;
    Eigen::VectorXd y(d);
    for (int i = 0; i < d; ++i)
      y[i] = (pat[i] == 1) ? lo[i] : (pat[i] == 2) ? hi[i] : 0.0;
    if (free_count > 0) {
      Eigen::MatrixXd qff(free_count, free_count);
      Eigen::VectorXd rhs(free_count);
      std::vector<int> freed;
      freed.reserve(static_cast<std::size_t>(free_count));
      for (int i = 0; i < d; ++i)
        if (pat[i] == 0) freed.push_back(i);
      for (int a = 0; a < free_count; ++a) {
        rhs[a] = c[freed[static_cast<std::size_t>(a)]];
        for (int i = 0; i < d; ++i)
          if (pat[i] != 0) rhs[a] -= q(freed[static_cast<std::size_t>(a)], i) * y[i];
        for (int b = 0; b < free_count; ++b)
          qff(a, b) = q(freed[static_cast<std::size_t>(a)],
                        freed[static_cast<std::size_t>(b)]);
      }
      const Eigen::VectorXd yf = qff.ldlt().solve(rhs);
      if (!yf.allFinite()) continue;
      for (int a = 0; a < free_count; ++a)
        y[freed[static_cast<std::size_t>(a)]] =
            std::clamp(yf[a], lo[freed[static_cast<std::size_t>(a)]],
                       hi[freed[static_cast<std::size_t>(a)]]);
    }
    const double obj = (x - s * y).squaredNorm();
    if (obj < best_obj) {
      best_obj = obj;
      best_y = y;
    }
  }
  return s * best_y;
}

}  // namespace

void validate_set(const ConvexSet& set, int d) {
  std::visit(
      [&](const auto& s) {
        using T = std::decay_t<decltype(s)>;
        if constexpr (std::is_same_v<T, Box>) {
          if (s.lower.size() != d || s.upper.size() != d)
            throw ConfigError("Box: bound dimensions must match d");
          if ((s.lower.array() > s.upper.array()).any())
            throw ConfigError("Box: lower bound exceeds upper bound");
        } else if constexpr (std::is_same_v<T, Ball>) {
          if (s.center.size() != d)
            throw ConfigError("Ball: center dimension must match d");
          if (!(s.radius >= 0.0)) throw ConfigError("Ball: radius must be >= 0");
        } else if constexpr (std::is_same_v<T, HalfSpace>) {
          if (s.normal.size() != d)
            throw ConfigError("HalfSpace: normal dimension must match d");
          if (s.normal.norm() == 0.0)
            throw ConfigError("HalfSpace: normal must be nonzero");
        }
      },
      set);
}

std::string set_kind(const ConvexSet& set) {
  return std::visit(
      [](const auto& s) -> std::string {
        using T = std::decay_t<decltype(s)>;
        if constexpr (std::is_same_v<T, FullSpace>) return "full_space";
        else if constexpr (std::is_same_v<T, Box>) return "box";
        else if constexpr (std::is_same_v<T, Ball>) return "ball";
        else if constexpr (std::is_same_v<T, HalfSpace>) return "half_space";
        else return "orthant";
      },
      set);
}

Eigen::VectorXd project(const ConvexSet& set, const Eigen::VectorXd& x) {
  return std::visit(
      [&](const auto& s) -> Eigen::VectorXd {
        using T = std::decay_t<decltype(s)>;
        if constexpr (std::is_same_v<T, FullSpace>) {
          return x;
        } else if constexpr (std::is_same_v<T, Box>) {
          return project_box(s.lower, s.upper, x);
        } else if constexpr (std::is_same_v<T, Ball>) {
          return project_ball(s.center, s.radius, x);
        } else if constexpr (std::is_same_v<T, HalfSpace>) {
          return project_halfspace(s.normal, s.offset, x);
        } else {
          return x.cwiseMax(0.0);
        }
      },
      set);
}

Eigen::VectorXd project_scaled(const ConvexSet& set, const Eigen::MatrixXd& scale,
                               const Eigen::VectorXd& x) {
  if (scale.rows() != x.size() || scale.cols() != x.size())
    throw ConfigError("project_scaled: scale must be d x d");
  const bool diag = is_diagonal(scale);
  const bool scalar = is_scalar_multiple(scale);

  return std::visit(
      [&](const auto& s) -> Eigen::VectorXd {
        using T = std::decay_t<decltype(s)>;
        if constexpr (std::is_same_v<T, FullSpace>) {
          return x;
        } else if constexpr (std::is_same_v<T, Box>) {
          if (diag) {
            const Eigen::VectorXd dg = scale.diagonal();
            return project_box(dg.cwiseProduct(s.lower),
                               dg.cwiseProduct(s.upper), x);
          }
          return project_box_qp(s.lower, s.upper, scale, x);
        } else if constexpr (std::is_same_v<T, Orthant>) {
          if (diag) return x.cwiseMax(0.0);
          const int d = static_cast<int>(x.size());
          const double inf = std::numeric_limits<double>::infinity();
          return project_box_qp(Eigen::VectorXd::Zero(d),
                                Eigen::VectorXd::Constant(d, inf), scale, x);
        } else if constexpr (std::is_same_v<T, HalfSpace>) {
          // scale*{a.y <= b} = { z : (scale^{-1} a).z <= b } for symmetric scale.
          const Eigen::VectorXd c = scale.ldlt().solve(s.normal);
          return project_halfspace(c, s.offset, x);
        } else {  // Ball
          if (scalar) {
            const double m = scale(0, 0);
            return project_ball(m * s.center, m * s.radius, x);
          }
          if (diag)
            return project_ellipsoid_diag(scale.diagonal(), s.center, s.radius, x);
          // Dense SPD scale: rotate to the eigenbasis, where the scale is
          // diagonal, project, rotate back (the Euclidean metric is rotation
          // invariant).
          Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(scale);
          if (es.info() != Eigen::Success || es.eigenvalues().minCoeff() <= 0.0)
            throw ConfigError("project_scaled: scale must be SPD");
          const Eigen::MatrixXd& q = es.eigenvectors();
          const Eigen::VectorXd z = project_ellipsoid_diag(
              es.eigenvalues(), q.transpose() * s.center, s.radius,
              q.transpose() * x);
          return q * z;
        }
      },
      set);
}

double dist_scaled(const ConvexSet& set, const Eigen::MatrixXd& scale,
                   const Eigen::VectorXd& x) {
  return (x - project_scaled(set, scale, x)).norm();
}

}  // namespace relperf

// Independent reference computations for the test suites. Nothing here calls
// into the solvers under test beyond the raw operator action.
#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <limits>
#include <vector>

#include <Eigen/Dense>

#include "martinbench/extension.hpp"

namespace oracle {

/// Green function at the identity for simple random walk on the (q)-regular tree.
inline double tree_green(double q, double r) {
  // clamp so the branch point r = q / (2 sqrt(q - 1)) survives rounding
  return 2 * (q - 1) / (q - 2 + std::sqrt(std::max(0.0, q * q - 4 * (q - 1) * r * r)));
}

/// First-passage generating function to a neighbour on the q-regular tree.
inline double tree_first_passage(double q, double r) {
  return (q - std::sqrt(std::max(0.0, q * q - 4 * (q - 1) * r * r))) / (2 * (q - 1) * r);
}

/// sum_{n <= terms} r^n P^n(0,0) for the distance chain of the walk on the
/// (q)-regular tree, killed when it leaves {0, ..., radius}.
inline double radial_green_series(double q, int radius, double r, int terms) {
  std::vector<double> p(static_cast<std::size_t>(radius) + 1, 0.0), next(p.size());
  p[0] = 1;
  double total = 1, rn = 1;
  for (int n = 1; n <= terms; ++n) {
    std::fill(next.begin(), next.end(), 0.0);
    for (std::size_t k = 0; k < p.size(); ++k) {
      if (p[k] == 0) continue;
      if (k == 0) {
        if (p.size() > 1) next[1] += p[0];
        continue;
      }
      next[k - 1] += p[k] / q;
      if (k + 1 < p.size()) next[k + 1] += p[k] * (q - 1) / q;
    }
    p.swap(next);
    rn *= r;
    total += rn * p[0];
  }
  return total;
}

/// Dense matrix of a linear action (columns are images of unit vectors).
inline Eigen::MatrixXd dense(const martinbench::LinearAction& op) {
  const std::size_t n = op.size();
  Eigen::MatrixXd M(n, n);
  std::vector<double> e(n, 0.0), col(n);
  for (std::size_t j = 0; j < n; ++j) {
    e[j] = 1;
    op.apply(e, col);
    for (std::size_t i = 0; i < n; ++i) M(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j)) = col[i];
    e[j] = 0;
  }
  return M;
}

/// (I - r M)^-1 by LU.
inline Eigen::MatrixXd resolvent(const Eigen::MatrixXd& M, double r) {
  Eigen::MatrixXd I = Eigen::MatrixXd::Identity(M.rows(), M.cols());
  return (I - r * M).partialPivLu().inverse();
}

inline Eigen::VectorXd vec(const std::vector<double>& v) {
  return Eigen::Map<const Eigen::VectorXd>(v.data(), static_cast<Eigen::Index>(v.size()));
}

struct LpResult {
  bool feasible = false;
  bool bounded = true;
  double value = 0;
  std::vector<double> x;
};

/// min c.x subject to A x <= b, x >= 0. Dense two-phase simplex with Bland's rule.
inline LpResult lp_minimize(const std::vector<double>& c, const std::vector<std::vector<double>>& A,
                            const std::vector<double>& b) {
  const std::size_t m = A.size(), n = c.size();
  std::size_t k = 0;
  for (double v : b) k += v < 0;
  const std::size_t cols = n + m + k, rhs = cols;
  const double eps = 1e-12;
  std::vector<std::vector<double>> T(m, std::vector<double>(cols + 1, 0.0));
  std::vector<std::size_t> basis(m);
  std::size_t art = 0;
  for (std::size_t i = 0; i < m; ++i) {
    double sign = b[i] < 0 ? -1.0 : 1.0;
    for (std::size_t j = 0; j < n; ++j) T[i][j] = sign * A[i][j];
    T[i][n + i] = sign;
    T[i][rhs] = sign * b[i];
    if (sign < 0) {
      T[i][n + m + art] = 1;
      basis[i] = n + m + art++;
    } else {
      basis[i] = n + i;
    }
  }
  auto pivot = [&](std::size_t r, std::size_t col) {
    double p = T[r][col];
    for (double& v : T[r]) v /= p;
    for (std::size_t i = 0; i < m; ++i) {
      if (i == r || T[i][col] == 0) continue;
      double f = T[i][col];
      for (std::size_t j = 0; j <= cols; ++j) T[i][j] -= f * T[r][j];
    }
    basis[r] = col;
  };
  // returns false when unbounded
  auto simplex = [&](const std::vector<double>& cost, std::size_t allowed) {
    for (int iter = 0; iter < 100000; ++iter) {
      std::size_t enter = cols;
      for (std::size_t j = 0; j < allowed && enter == cols; ++j) {
        double rc = cost[j];
        for (std::size_t i = 0; i < m; ++i) rc -= cost[basis[i]] * T[i][j];
        if (rc < -eps) enter = j;
      }
      if (enter == cols) return true;
      std::size_t leave = m;
      double best = std::numeric_limits<double>::infinity();
      for (std::size_t i = 0; i < m; ++i) {
        if (T[i][enter] <= eps) continue;
        double ratio = T[i][rhs] / T[i][enter];
        if (ratio < best - 1e-15 || (std::abs(ratio - best) <= 1e-15 && leave < m && basis[i] < basis[leave])) {
          best = ratio;
          leave = i;
        }
      }
      if (leave == m) return false;
      pivot(leave, enter);
    }
    return true;
  };
  LpResult res;
  if (k > 0) {
    std::vector<double> cost1(cols, 0.0);
    for (std::size_t j = n + m; j < cols; ++j) cost1[j] = 1;
    simplex(cost1, cols);
    double infeas = 0;
    for (std::size_t i = 0; i < m; ++i)
      if (basis[i] >= n + m) infeas += T[i][rhs];
    if (infeas > 1e-9) return res;
    for (std::size_t i = 0; i < m; ++i) {
      if (basis[i] < n + m) continue;
      for (std::size_t j = 0; j < n + m; ++j)
        if (std::abs(T[i][j]) > 1e-9) {
          pivot(i, j);
          break;
        }
    }
  }
  res.feasible = true;
  std::vector<double> cost2(cols, 0.0);
  for (std::size_t j = 0; j < n; ++j) cost2[j] = c[j];
  res.bounded = simplex(cost2, n + m);
  res.x.assign(n, 0.0);
  for (std::size_t i = 0; i < m; ++i)
    if (basis[i] < n) res.x[basis[i]] = T[i][rhs];
  for (std::size_t j = 0; j < n; ++j) res.value += c[j] * res.x[j];
  return res;
}

}  // namespace oracle

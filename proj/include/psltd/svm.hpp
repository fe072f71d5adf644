#pragma once

// Binary C-SVM dual solved by SMO with maximal-violating-pair working-set
// selection, on a precomputed kernel matrix.

#include <cmath>
#include <limits>
#include <span>
#include <sstream>
#include <vector>

#include "psltd/error.hpp"

namespace psltd {

/// Dense symmetric n x n matrix.
struct KernelMatrix {
  int n = 0;
  std::vector<double> values;

  KernelMatrix() = default;
  explicit KernelMatrix(int size) : n(size), values(static_cast<std::size_t>(size) * size, 0.0) {}

  double operator()(int i, int j) const { return values[static_cast<std::size_t>(i) * n + j]; }
  double& operator()(int i, int j) { return values[static_cast<std::size_t>(i) * n + j]; }
};

inline double squared_distance(std::span<const double> a, std::span<const double> b) {
  double s = 0.0;
  for (std::size_t d = 0; d < a.size(); ++d) {
    const double diff = a[d] - b[d];
    s += diff * diff;
  }
  return s;
}

inline double rbf(std::span<const double> a, std::span<const double> b, double gamma) {
  return std::exp(-gamma * squared_distance(a, b));
}

inline KernelMatrix squared_distances(const std::vector<std::vector<double>>& rows) {
  KernelMatrix d(static_cast<int>(rows.size()));
  for (int i = 0; i < d.n; ++i)
    for (int j = i + 1; j < d.n; ++j) d(i, j) = d(j, i) = squared_distance(rows[i], rows[j]);
  return d;
}

inline KernelMatrix rbf_from_distances(const KernelMatrix& sqdist, double gamma) {
  KernelMatrix k(sqdist.n);
  for (std::size_t i = 0; i < k.values.size(); ++i) k.values[i] = std::exp(-gamma * sqdist.values[i]);
  return k;
}

inline KernelMatrix rbf_gram(const std::vector<std::vector<double>>& rows, double gamma) {
  return rbf_from_distances(squared_distances(rows), gamma);
}

struct SmoOptions {
  double eps = 1e-3;  // stop when the maximal KKT violation gap drops below this
  long long max_iterations = 10'000'000;
};

struct SmoSolution {
  std::vector<double> alpha;
  double rho = 0.0;  // f(x) = sum_i alpha_i y_i K(x_i, x) - rho
  long long iterations = 0;
  double objective = 0.0;  // dual objective sum(alpha) - 1/2 alpha^T Q alpha
};

/// Dual objective for arbitrary alpha, evaluated directly.
inline double dual_objective(const KernelMatrix& k, std::span<const int> y,
                             std::span<const double> alpha) {
  double linear = 0.0, quad = 0.0;
  for (int i = 0; i < k.n; ++i) {
    linear += alpha[i];
    for (int j = 0; j < k.n; ++j) quad += alpha[i] * alpha[j] * y[i] * y[j] * k(i, j);
  }
  return linear - 0.5 * quad;
}

inline SmoSolution solve_smo(const KernelMatrix& k, std::span<const int> y, double c,
                             const SmoOptions& options = {}) {
  const int n = k.n;
  if (static_cast<int>(y.size()) != n) throw TrainingError("smo: label count mismatch");
  bool has_pos = false, has_neg = false;
  for (int v : y) {
    if (v == 1) has_pos = true;
    else if (v == -1) has_neg = true;
    else throw TrainingError("smo: labels must be +1 or -1");
  }
  if (!has_pos || !has_neg) throw TrainingError("smo: need at least one example of each sign");
  if (!(c > 0.0)) throw TrainingError("smo: C must be positive");

  constexpr double tau = 1e-12;
  auto q = [&](int i, int j) { return y[i] * y[j] * k(i, j); };
  std::vector<double> alpha(n, 0.0), grad(n, -1.0);
  auto in_up = [&](int t) { return (y[t] == 1 && alpha[t] < c) || (y[t] == -1 && alpha[t] > 0); };
  auto in_low = [&](int t) { return (y[t] == -1 && alpha[t] < c) || (y[t] == 1 && alpha[t] > 0); };

  long long iter = 0;
  double gap = 0.0;
  for (;; ++iter) {
    int i = -1, j = -1;
    double gmax = -std::numeric_limits<double>::infinity();
    double gmin = std::numeric_limits<double>::infinity();
    for (int t = 0; t < n; ++t) {
      const double v = -y[t] * grad[t];
      if (in_up(t) && v > gmax) {
        gmax = v;
        i = t;
      }
      if (in_low(t) && v < gmin) {
        gmin = v;
        j = t;
      }
    }
    gap = gmax - gmin;
    if (i < 0 || j < 0 || gap < options.eps) break;
    if (iter >= options.max_iterations) {
      std::ostringstream msg;
      msg << "smo: no convergence after " << iter << " iterations (violation gap " << gap
          << ", eps " << options.eps << ", C " << c << ", n " << n << ")";
      throw TrainingError(msg.str());
    }

    const double old_i = alpha[i], old_j = alpha[j];
    if (y[i] != y[j]) {
      double quad = q(i, i) + q(j, j) + 2.0 * q(i, j);
      if (quad <= 0) quad = tau;
      const double delta = (-grad[i] - grad[j]) / quad;
      const double diff = alpha[i] - alpha[j];
      alpha[i] += delta;
      alpha[j] += delta;
      if (diff > 0) {
        if (alpha[j] < 0) {
          alpha[j] = 0;
          alpha[i] = diff;
        }
      } else if (alpha[i] < 0) {
        alpha[i] = 0;
        alpha[j] = -diff;
      }
      if (diff > 0) {
        if (alpha[i] > c) {
          alpha[i] = c;
          alpha[j] = c - diff;
        }
      } else if (alpha[j] > c) {
        alpha[j] = c;
        alpha[i] = c + diff;
      }
    } else {
      double quad = q(i, i) + q(j, j) - 2.0 * q(i, j);
      if (quad <= 0) quad = tau;
      const double delta = (grad[i] - grad[j]) / quad;
      const double sum = alpha[i] + alpha[j];
      alpha[i] -= delta;
      alpha[j] += delta;
      if (sum > c) {
        if (alpha[i] > c) {
          alpha[i] = c;
          alpha[j] = sum - c;
        }
      } else if (alpha[j] < 0) {
        alpha[j] = 0;
        alpha[i] = sum;
      }
      if (sum > c) {
        if (alpha[j] > c) {
          alpha[j] = c;
          alpha[i] = sum - c;
        }
      } else if (alpha[i] < 0) {
        alpha[i] = 0;
        alpha[j] = sum;
      }
    }
    const double di = alpha[i] - old_i, dj = alpha[j] - old_j;
    for (int t = 0; t < n; ++t) grad[t] += q(t, i) * di + q(t, j) * dj;
  }

  // Bias from free vectors, or the midpoint of the feasible interval.
  double ub = std::numeric_limits<double>::infinity();
  double lb = -std::numeric_limits<double>::infinity();
  double sum_free = 0.0;
  int free_count = 0;
  for (int t = 0; t < n; ++t) {
    const double yg = y[t] * grad[t];
    if (alpha[t] >= c) {
      if (y[t] == -1) ub = std::min(ub, yg);
      else lb = std::max(lb, yg);
    } else if (alpha[t] <= 0) {
      if (y[t] == 1) ub = std::min(ub, yg);
      else lb = std::max(lb, yg);
    } else {
      ++free_count;
      sum_free += yg;
    }
  }
  SmoSolution sol;
  sol.rho = free_count > 0 ? sum_free / free_count : (ub + lb) / 2.0;
  sol.iterations = iter;
  double obj = 0.0;
  for (int t = 0; t < n; ++t) obj += alpha[t] - 0.5 * alpha[t] * (grad[t] + 1.0);
  sol.objective = obj;
  sol.alpha = std::move(alpha);
  return sol;
}

struct KktReport {
  double max_violation = 0.0;
  double equality_residual = 0.0;  // |sum alpha_i y_i|
  bool box_ok = true;
  bool passed(double tol) const { return box_ok && max_violation <= tol && equality_residual <= 1e-6; }
};

/// Checks y_i f(x_i) against the complementary-slackness conditions given
/// per-point margins y_i f(x_i).
inline KktReport kkt_audit(std::span<const double> alpha, std::span<const int> y,
                           std::span<const double> margins, double c) {
  KktReport rep;
  double eq = 0.0;
  for (std::size_t i = 0; i < alpha.size(); ++i) {
    eq += alpha[i] * y[i];
    if (alpha[i] < 0.0 || alpha[i] > c) rep.box_ok = false;
    double v = 0.0;
    if (alpha[i] <= 0.0) v = std::max(0.0, 1.0 - margins[i]);
    else if (alpha[i] >= c) v = std::max(0.0, margins[i] - 1.0);
    else v = std::abs(margins[i] - 1.0);
    rep.max_violation = std::max(rep.max_violation, v);
  }
  rep.equality_residual = std::abs(eq);
  return rep;
}

/// KKT audit of a solution against its own kernel matrix.
inline KktReport kkt_audit(const KernelMatrix& k, std::span<const int> y, const SmoSolution& sol,
                           double c) {
  std::vector<double> margins(k.n);
  for (int i = 0; i < k.n; ++i) {
    double f = -sol.rho;
    for (int j = 0; j < k.n; ++j) f += sol.alpha[j] * y[j] * k(i, j);
    margins[i] = y[i] * f;
  }
  return kkt_audit(sol.alpha, y, margins, c);
}

}  // namespace psltd

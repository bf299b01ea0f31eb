#pragma once

#include <algorithm>
#include <array>
#include <cmath>
#include <cstddef>
#include <functional>
#include <vector>

namespace aquathru {

// Small dense Levenberg-Marquardt with box constraints, sized for the
// few-parameter curve fits in this project. Analytic Jacobian required.
// Damping schedule: x2 on a rejected step, /3 on an accepted one. Stops at
// step norm < 1e-10 or 200 iterations.
template <std::size_t N>
struct LmResult {
  std::array<double, N> params{};
  double cost = 0.0;  // sum of squared residuals
  int iterations = 0;
  bool converged = false;
  bool failed = false;  // non-finite cost or residuals
  std::vector<double> cost_trace;
};

template <std::size_t N>
using LmEval = std::function<void(const std::array<double, N>& params,
                                  std::vector<double>& residuals,
                                  std::vector<std::array<double, N>>* jacobian)>;

namespace detail {

// Gaussian elimination with partial pivoting; returns false when singular.
template <std::size_t N>
bool solve_dense(std::array<std::array<double, N>, N> a, std::array<double, N> b,
                 std::array<double, N>& x) {
  for (std::size_t k = 0; k < N; ++k) {
    std::size_t pivot = k;
    for (std::size_t i = k + 1; i < N; ++i) {
      if (std::abs(a[i][k]) > std::abs(a[pivot][k])) pivot = i;
    }
    if (a[pivot][k] == 0.0 || !std::isfinite(a[pivot][k])) return false;
    std::swap(a[k], a[pivot]);
    std::swap(b[k], b[pivot]);
    for (std::size_t i = k + 1; i < N; ++i) {
      const double f = a[i][k] / a[k][k];
      for (std::size_t j = k; j < N; ++j) a[i][j] -= f * a[k][j];
      b[i] -= f * b[k];
    }
  }
  for (std::size_t k = N; k-- > 0;) {
    double s = b[k];
    for (std::size_t j = k + 1; j < N; ++j) s -= a[k][j] * x[j];
    x[k] = s / a[k][k];
  }
  for (const double v : x) {
    if (!std::isfinite(v)) return false;
  }
  return true;
}

}  // namespace detail

template <std::size_t N>
LmResult<N> levenberg_marquardt(const LmEval<N>& eval, std::array<double, N> start,
                                const std::array<double, N>& lower,
                                const std::array<double, N>& upper,
                                int max_iterations = 200, double step_tol = 1e-10) {
  LmResult<N> result;
  for (std::size_t i = 0; i < N; ++i) start[i] = std::clamp(start[i], lower[i], upper[i]);

  std::vector<double> residuals;
  std::vector<std::array<double, N>> jacobian;

  auto cost_of = [](const std::vector<double>& r) {
    double c = 0.0;
    for (const double v : r) c += v * v;
    return c;
  };

  eval(start, residuals, &jacobian);
  double cost = cost_of(residuals);
  result.cost_trace.push_back(cost);
  if (!std::isfinite(cost)) {
    result.failed = true;
    result.params = start;
    result.cost = cost;
    return result;
  }

  std::array<double, N> x = start;
  double lambda = 1e-3;

  for (int iter = 0; iter < max_iterations; ++iter) {
    result.iterations = iter + 1;

    // Normal equations: (J^T J + lambda * diag(J^T J)) step = -J^T r
    std::array<std::array<double, N>, N> jtj{};
    std::array<double, N> jtr{};
    for (std::size_t m = 0; m < residuals.size(); ++m) {
      for (std::size_t i = 0; i < N; ++i) {
        jtr[i] += jacobian[m][i] * residuals[m];
        for (std::size_t j = i; j < N; ++j) jtj[i][j] += jacobian[m][i] * jacobian[m][j];
      }
    }
    for (std::size_t i = 0; i < N; ++i) {
      for (std::size_t j = 0; j < i; ++j) jtj[i][j] = jtj[j][i];
    }

    std::array<std::array<double, N>, N> damped = jtj;
    for (std::size_t i = 0; i < N; ++i) {
      damped[i][i] += lambda * std::max(jtj[i][i], 1e-12);
    }

    std::array<double, N> step{};
    std::array<double, N> rhs{};
    for (std::size_t i = 0; i < N; ++i) rhs[i] = -jtr[i];
    if (!detail::solve_dense<N>(damped, rhs, step)) {
      lambda *= 2.0;
      continue;
    }

    std::array<double, N> candidate{};
    double step_norm_sq = 0.0;
    for (std::size_t i = 0; i < N; ++i) {
      candidate[i] = std::clamp(x[i] + step[i], lower[i], upper[i]);
      const double moved = candidate[i] - x[i];
      step_norm_sq += moved * moved;
    }

    std::vector<double> cand_residuals;
    eval(candidate, cand_residuals, nullptr);
    const double cand_cost = cost_of(cand_residuals);

    if (std::isfinite(cand_cost) && cand_cost <= cost) {
      x = candidate;
      cost = cand_cost;
      lambda /= 3.0;
      eval(x, residuals, &jacobian);
      result.cost_trace.push_back(cost);
      if (std::sqrt(step_norm_sq) < step_tol) {
        result.converged = true;
        break;
      }
    } else {
      lambda *= 2.0;
      if (lambda > 1e12) break;  // stalled against machine precision
    }
  }

  result.params = x;
  result.cost = cost;
  result.failed = !std::isfinite(cost);
  return result;
}

}  // namespace aquathru

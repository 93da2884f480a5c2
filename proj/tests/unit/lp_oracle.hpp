#pragma once

#include "ddinfer/flat_norm.hpp"

#include <Eigen/LU>

#include <functional>
#include <limits>

namespace testing {

/// Exact LP optimum by enumerating the vertices of the feasible polytope.
inline double vertex_oracle(const ddinfer::DiscreteSignedMeasure& nu) {
  const auto n = static_cast<Eigen::Index>(nu.size());
  const double ell = nu.metric.ell;
  std::vector<std::pair<ddinfer::Vec, double>> rows;  // g^T f <= h
  for (Eigen::Index i = 0; i < n; ++i) {
    ddinfer::Vec g = ddinfer::Vec::Zero(n);
    g[i] = 1.0;
    rows.emplace_back(g, 1.0);
    rows.emplace_back(-g, 1.0);
    for (Eigen::Index j = 0; j < n; ++j) {
      if (i == j) continue;
      ddinfer::Vec h = ddinfer::Vec::Zero(n);
      h[i] = 1.0;
      h[j] = -1.0;
      rows.emplace_back(h, nu.distance(static_cast<std::size_t>(i), static_cast<std::size_t>(j)) / ell);
    }
  }
  double best = -std::numeric_limits<double>::infinity();
  const std::size_t r = rows.size();
  std::vector<std::size_t> pick(static_cast<std::size_t>(n));
  std::function<void(std::size_t, std::size_t)> rec = [&](std::size_t depth, std::size_t start) {
    if (depth == static_cast<std::size_t>(n)) {
      ddinfer::Mat g(n, n);
      ddinfer::Vec h(n);
      for (Eigen::Index k = 0; k < n; ++k) {
        g.row(k) = rows[pick[static_cast<std::size_t>(k)]].first.transpose();
        h[k] = rows[pick[static_cast<std::size_t>(k)]].second;
      }
      Eigen::FullPivLU<ddinfer::Mat> lu(g);
      if (lu.rank() < n) return;
      const ddinfer::Vec f = lu.solve(h);
      for (const auto& [gr, hr] : rows)
        if (gr.dot(f) > hr + 1e-9) return;
      best = std::max(best, nu.weights.dot(f));
      return;
    }
    for (std::size_t k = start; k < r; ++k) {
      pick[depth] = k;
      rec(depth + 1, k + 1);
    }
  };
  rec(0, 0);
  return best;
}

/// Best feasible f on the grid {-1, -0.9, ..., 1}^n.
inline double grid_oracle(const ddinfer::DiscreteSignedMeasure& nu) {
  const auto n = nu.size();
  std::vector<int> k(n, -10);
  double best = -std::numeric_limits<double>::infinity();
  while (true) {
    bool ok = true;
    for (std::size_t i = 0; i < n && ok; ++i)
      for (std::size_t j = 0; j < n && ok; ++j)
        if (i != j && 0.1 * (k[i] - k[j]) > nu.distance(i, j) / nu.metric.ell + 1e-12) ok = false;
    if (ok) {
      double v = 0.0;
      for (std::size_t i = 0; i < n; ++i) v += nu.weights[static_cast<Eigen::Index>(i)] * 0.1 * k[i];
      best = std::max(best, v);
    }
    std::size_t pos = 0;
    while (pos < n && k[pos] == 10) k[pos++] = -10;
    if (pos == n) break;
    ++k[pos];
  }
  return best;
}

}  // namespace testing

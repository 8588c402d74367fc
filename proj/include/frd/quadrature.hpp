#pragma once

#include <cmath>
#include <cstddef>
#include <map>
#include <mutex>
#include <numbers>
#include <vector>

#include "frd/error.hpp"

namespace frd {

/// Gauss-Legendre rule on [-1, 1].
struct GaussRule {
  std::vector<double> nodes;
  std::vector<double> weights;
};

namespace detail {
inline GaussRule compute_gauss_legendre(int n) {
  GaussRule rule;
  rule.nodes.resize(n);
  rule.weights.resize(n);
  if (n == 1) {
    rule.nodes[0] = 0.0;
    rule.weights[0] = 2.0;
    return rule;
  }
  for (int i = 0; i < (n + 1) / 2; ++i) {
    // Tricomi initial guess, then Newton on P_n.
    double x = std::cos(std::numbers::pi * (i + 0.75) / (n + 0.5));
    double dp = 1.0;
    for (int iter = 0; iter < 100; ++iter) {
      double p0 = 1.0, p1 = x;
      for (int k = 2; k <= n; ++k) {
        const double p2 = ((2.0 * k - 1.0) * x * p1 - (k - 1.0) * p0) / k;
        p0 = p1;
        p1 = p2;
      }
      dp = n * (x * p1 - p0) / (x * x - 1.0);
      const double dx = p1 / dp;
      x -= dx;
      if (std::abs(dx) < 1e-16) break;
    }
    rule.nodes[i] = -x;
    rule.nodes[n - 1 - i] = x;
    rule.weights[i] = rule.weights[n - 1 - i] = 2.0 / ((1.0 - x * x) * dp * dp);
  }
  return rule;
}
}  // namespace detail

/// Cached n-point Gauss-Legendre rule.
inline const GaussRule& gauss_legendre(int n) {
  detail::require(n >= 1, "quadrature", "gauss_legendre", "n must be >= 1");
  static std::mutex mutex;
  static std::map<int, GaussRule> cache;
  std::lock_guard lock(mutex);
  auto it = cache.find(n);
  if (it == cache.end()) it = cache.emplace(n, detail::compute_gauss_legendre(n)).first;
  return it->second;
}

/// A quadrature node in the scale variable t with weight for the measure dt/t.
struct ScaleNode {
  double t;
  double weight;
};

/// Gauss-Legendre in log t over [t_lo, t_hi], split into panels no longer
/// than one octave (a factor `panel_ratio`), `nodes_per_panel` nodes each.
/// Weights integrate against dt/t.
inline std::vector<ScaleNode> log_scale_nodes(double t_lo, double t_hi,
                                              int nodes_per_panel,
                                              double panel_ratio = 2.0) {
  detail::require(t_lo > 0 && t_hi >= t_lo, "quadrature", "log_scale_nodes",
                  "need 0 < t_lo <= t_hi");
  std::vector<ScaleNode> out;
  if (t_hi == t_lo) return out;
  const double u0 = std::log(t_lo), u1 = std::log(t_hi);
  const int panels =
      std::max(1, static_cast<int>(std::ceil((u1 - u0) / std::log(panel_ratio) - 1e-12)));
  const double width = (u1 - u0) / panels;
  const GaussRule& rule = gauss_legendre(nodes_per_panel);
  out.reserve(static_cast<std::size_t>(panels) * nodes_per_panel);
  for (int p = 0; p < panels; ++p) {
    const double a = u0 + p * width;
    const double mid = a + 0.5 * width;
    for (int q = 0; q < nodes_per_panel; ++q) {
      out.push_back({std::exp(mid + 0.5 * width * rule.nodes[q]),
                     0.5 * width * rule.weights[q]});
    }
  }
  return out;
}

/// Composite Gauss-Legendre integral of f over [a, b] with `panels` panels.
template <typename F>
double integrate_composite(F&& f, double a, double b, int panels, int order = 16) {
  if (b <= a) return 0.0;
  const GaussRule& rule = gauss_legendre(order);
  const double width = (b - a) / panels;
  double total = 0.0;
  for (int p = 0; p < panels; ++p) {
    const double mid = a + (p + 0.5) * width;
    double panel = 0.0;
    for (int q = 0; q < order; ++q) panel += rule.weights[q] * f(mid + 0.5 * width * rule.nodes[q]);
    total += 0.5 * width * panel;
  }
  return total;
}

}  // namespace frd

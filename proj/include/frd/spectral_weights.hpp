#pragma once

#include <algorithm>
#include <cmath>
#include <concepts>
#include <cstddef>
#include <limits>
#include <numbers>
#include <ostream>
#include <span>
#include <vector>

#include "frd/chebyshev.hpp"
#include "frd/error.hpp"
#include "frd/mollifier.hpp"
#include "frd/quadrature.hpp"

namespace frd {

/// W_t(lambda) = C phi(lambda^{gamma/2} t).
class ContinuousWeight {
 public:
  ContinuousWeight(const Mollifier& m, Normalization n) : m_(&m), norm_(n) {}

  const Mollifier& mollifier() const noexcept { return *m_; }
  const Normalization& normalization() const noexcept { return norm_; }
  double gamma() const noexcept { return norm_.gamma; }

  double operator()(double lambda, double t) const {
    return norm_.constant * m_->phi(std::pow(lambda, 0.5 * norm_.gamma) * t);
  }

  void evaluate(double t, std::span<const double> lambdas, std::span<double> out) const {
    for (std::size_t i = 0; i < lambdas.size(); ++i) out[i] = (*this)(lambdas[i], t);
  }

  /// \int_0^{t_min} t^{2/gamma} W_t(lambda) dt/t, by rescaling onto phi.
  double head_integral(double lambda, double t_min) const {
    const double p = 2.0 / norm_.gamma;
    if (lambda <= 0.0) return norm_.constant * m_->phi(0.0) * std::pow(t_min, p) / p;
    return norm_.constant / lambda *
           m_->moment(p, std::pow(lambda, 0.5 * norm_.gamma) * t_min);
  }

  /// \int_{t_max}^\infty t^{2/gamma} W_t(lambda) dt/t over the tabulated
  /// range of phi.
  double tail_integral(double lambda, double t_max) const {
    if (lambda <= 0.0) return std::numeric_limits<double>::infinity();
    const double p = 2.0 / norm_.gamma;
    const double start = std::pow(lambda, 0.5 * norm_.gamma) * t_max;
    if (start >= m_->x_max()) return 0.0;
    return norm_.constant / lambda * (m_->moment(p, m_->x_max()) - m_->moment(p, start));
  }

  /// Bound on the part of the integral where phi is not tabulated.
  double untabulated_bound(double lambda) const {
    if (lambda <= 0.0) return std::numeric_limits<double>::infinity();
    return norm_.constant / lambda * m_->moment_tail_bound(2.0 / norm_.gamma);
  }

 private:
  const Mollifier* m_;
  Normalization norm_;
};

/// lambda -> multiplier * W_t^*(argument_scale * lambda). With argument_scale
/// = 3/B an operator spectrum in [0, B] lands in [0, 3].
struct RescaledWeight {
  ChebyshevWeight weight;
  double argument_scale = 1.0;
  double multiplier = 1.0;

  double operator()(double lambda) const {
    return multiplier * clenshaw_folded(weight.coeffs, 1.0 - 0.5 * argument_scale * lambda);
  }
};

/// Rescales for an operator with spectrum in [0, B]; `normalization` is the
/// constant C of the mollifier (1 keeps the bare polynomial).
inline RescaledWeight rescale_for_operator(ChebyshevWeight w, double B,
                                           double normalization = 1.0) {
  detail::require(B > 0, "spectral_weights", "rescale_for_operator", "B must be positive");
  const double s = 3.0 / B;
  return RescaledWeight{std::move(w), s, normalization * s};
}

/// The Chebyshev family t -> C (3/B) W_t^*((3/B) lambda), gamma = 1.
class DiscreteWeightFamily {
 public:
  DiscreteWeightFamily(const Mollifier& m, Normalization n, double B = 3.0)
      : m_(&m), norm_(n), B_(B) {
    detail::require(n.gamma == 1.0, "spectral_weights", "DiscreteWeightFamily",
                    "the Chebyshev family requires gamma = 1");
    detail::require(B > 0, "spectral_weights", "DiscreteWeightFamily", "B must be positive");
  }

  const Mollifier& mollifier() const noexcept { return *m_; }
  const Normalization& normalization() const noexcept { return norm_; }
  double gamma() const noexcept { return 1.0; }
  double spectral_bound() const noexcept { return B_; }
  double argument_scale() const noexcept { return 3.0 / B_; }
  double multiplier() const noexcept { return norm_.constant * 3.0 / B_; }

  RescaledWeight at(double t) const {
    return rescale_for_operator(chebyshev_coefficients(*m_, t), B_, norm_.constant);
  }

  double operator()(double lambda, double t) const { return at(t)(lambda); }

  void evaluate(double t, std::span<const double> lambdas, std::span<double> out) const {
    const RescaledWeight w = at(t);
    for (std::size_t i = 0; i < lambdas.size(); ++i) out[i] = w(lambdas[i]);
  }

  /// Same weight through the periodized sum (no Chebyshev coefficients).
  double direct(double lambda, double t) const {
    return multiplier() * eval_discrete_weight_direct(*m_, argument_scale() * lambda, t);
  }

  /// For t < 1 only c_0 = phi_hat(0)/t survives, so the integrand t^2 W_t is
  /// multiplier * phi_hat(0) * t and the head below 1 is exact.
  double head_integral(double lambda, double t_min) const {
    const double exact_to = std::min(t_min, 1.0);
    double head = multiplier() * m_->phi_hat(0.0) * exact_to;
    if (t_min > 1.0) {
      for (const ScaleNode& node : log_scale_nodes(1.0, t_min, 16))
        head += node.weight * node.t * node.t * direct(lambda, node.t);
    }
    return head;
  }

  /// Integral beyond t_max over the tabulated range of phi. Every periodized
  /// term has argument at least x t with x = arccos(1 - s lambda / 2), so the
  /// tabulated integrand vanishes past x_max / x.
  double tail_integral(double lambda, double t_max) const {
    const double arg = argument_scale() * lambda;
    if (arg <= 0.0) return std::numeric_limits<double>::infinity();
    const double x = std::acos(std::max(-1.0, 1.0 - 0.5 * arg));
    const double t_end = m_->x_max() / x;
    double tail = 0.0;
    if (t_end > t_max) {
      for (const ScaleNode& node : log_scale_nodes(t_max, t_end, 16))
        tail += node.weight * node.t * node.t * direct(lambda, node.t);
    }
    return tail;
  }

  /// Bound on the part of the integral where phi is not tabulated. The
  /// central copy contributes at most x^-2 <= (s lambda)^-1 times the
  /// moment tail; the images add less than the same amount again for
  /// s lambda <= 4.
  double untabulated_bound(double lambda) const {
    const double arg = argument_scale() * lambda;
    if (arg <= 0.0) return std::numeric_limits<double>::infinity();
    return multiplier() * 2.0 / arg * m_->moment_tail_bound(2.0);
  }

 private:
  const Mollifier* m_;
  Normalization norm_;
  double B_;
};

template <typename F>
concept WeightFamily = requires(const F& f, double lambda, double t,
                                std::span<const double> lambdas, std::span<double> out) {
  { f.gamma() } -> std::convertible_to<double>;
  { f(lambda, t) } -> std::convertible_to<double>;
  f.evaluate(t, lambdas, out);
  { f.head_integral(lambda, t) } -> std::convertible_to<double>;
  { f.tail_integral(lambda, t) } -> std::convertible_to<double>;
  { f.untabulated_bound(lambda) } -> std::convertible_to<double>;
};

struct IdentityCheckOptions {
  double t_min = 1e-3;
  double t_max = 1e3;
  int nodes_per_octave = 8;
};

/// Results of the weight checks. Matrices are indexed [lambda][t].
struct WeightCheckReport {
  std::vector<double> lambda_grid;
  std::vector<double> t_grid;
  std::vector<std::vector<double>> w_cont;
  std::vector<std::vector<double>> w_disc;
  /// |lambda (head + quadrature + tail) - 1|; head and tail are the exact
  /// contributions of (0, t_min) and (t_max, infinity) on the tabulated phi.
  std::vector<double> identity_residuals;
  /// |lambda * quadrature over [t_min, t_max] - 1|, without the certified ends.
  std::vector<double> main_residuals;
  std::vector<double> head_contributions;
  std::vector<double> tail_contributions;
  /// lambda times the bound on what lies beyond the tabulated phi.
  std::vector<double> tail_bounds;
  std::vector<double> decay_constants;
  double approx_rate_fit = std::numeric_limits<double>::quiet_NaN();

  double max_identity_residual() const {
    double r = 0.0;
    for (double v : identity_residuals) r = std::max(r, v);
    return r;
  }
};

/// Checks lambda^-1 = \int t^{2/gamma} W_t(lambda) dt/t on a lambda grid with
/// Gauss-Legendre in log t; the pieces outside [t_min, t_max] are added from
/// the family's head and tail integrals and also reported separately.
template <WeightFamily Family>
WeightCheckReport check_decomposition_identity(const Family& family,
                                               std::span<const double> lambda_grid,
                                               const IdentityCheckOptions& options = {}) {
  WeightCheckReport report;
  report.lambda_grid.assign(lambda_grid.begin(), lambda_grid.end());
  const auto nodes = log_scale_nodes(options.t_min, options.t_max, options.nodes_per_octave);
  const std::size_t nl = lambda_grid.size();
  const double p = 2.0 / family.gamma();
  std::vector<std::vector<double>> values(nodes.size(), std::vector<double>(nl));
  parallel_for(nodes.size(),
               [&](std::size_t q) { family.evaluate(nodes[q].t, lambda_grid, values[q]); });
  std::vector<double> integral(nl, 0.0);
  for (std::size_t q = 0; q < nodes.size(); ++q) {
    const double factor = nodes[q].weight * std::pow(nodes[q].t, p);
    for (std::size_t i = 0; i < nl; ++i) integral[i] += factor * values[q][i];
  }
  for (std::size_t i = 0; i < nl; ++i) {
    const double lambda = lambda_grid[i];
    const double head = family.head_integral(lambda, options.t_min);
    const double tail = family.tail_integral(lambda, options.t_max);
    report.head_contributions.push_back(lambda * head);
    report.tail_contributions.push_back(lambda * tail);
    report.tail_bounds.push_back(lambda * family.untabulated_bound(lambda));
    report.main_residuals.push_back(std::abs(lambda * integral[i] - 1.0));
    report.identity_residuals.push_back(std::abs(lambda * (head + integral[i] + tail) - 1.0));
  }
  return report;
}

/// sup over lambda of (1 + t^{2/gamma} lambda)^l W_t(lambda) at fixed t.
template <WeightFamily Family>
double decay_sup_at(const Family& family, int order, double t,
                    std::span<const double> lambda_grid) {
  std::vector<double> w(lambda_grid.size());
  family.evaluate(t, lambda_grid, w);
  const double tp = std::pow(t, 2.0 / family.gamma());
  double sup = 0.0;
  for (std::size_t i = 0; i < w.size(); ++i)
    sup = std::max(sup, std::pow(1.0 + tp * lambda_grid[i], order) * std::abs(w[i]));
  return sup;
}

/// Measured constants C_l = sup_{lambda, t} (1 + t^{2/gamma} lambda)^l W_t(lambda)
/// for each requested order.
template <WeightFamily Family>
std::vector<double> decay_constants(const Family& family, std::span<const int> orders,
                                    std::span<const double> lambda_grid,
                                    std::span<const double> t_grid) {
  std::vector<std::vector<double>> per_t(t_grid.size());
  parallel_for(t_grid.size(), [&](std::size_t j) {
    for (int l : orders) per_t[j].push_back(decay_sup_at(family, l, t_grid[j], lambda_grid));
  });
  std::vector<double> out(orders.size(), 0.0);
  for (const auto& row : per_t)
    for (std::size_t k = 0; k < row.size(); ++k) out[k] = std::max(out[k], row[k]);
  return out;
}

/// sup of (1 + t^2 lambda)^l lambda |d/dlambda W_t(lambda)| at fixed t, by
/// centred differences.
template <WeightFamily Family>
double derivative_decay_sup_at(const Family& family, int order, double t,
                               std::span<const double> lambda_grid) {
  const double tp = std::pow(t, 2.0 / family.gamma());
  double sup = 0.0;
  for (double lambda : lambda_grid) {
    const double h = 1e-4 * lambda;
    const double d = (family(lambda + h, t) - family(lambda - h, t)) / (2.0 * h);
    sup = std::max(sup, std::pow(1.0 + tp * lambda, order) * lambda * std::abs(d));
  }
  return sup;
}

/// Geometric grid of `count` points from lo to hi inclusive.
inline std::vector<double> geometric_grid(double lo, double hi, std::size_t count) {
  std::vector<double> g(count);
  for (std::size_t i = 0; i < count; ++i)
    g[i] = count == 1 ? lo : lo * std::pow(hi / lo, static_cast<double>(i) / (count - 1));
  return g;
}

/// Uniform grid of `count` points from lo to hi inclusive.
inline std::vector<double> uniform_grid(double lo, double hi, std::size_t count) {
  std::vector<double> g(count);
  for (std::size_t i = 0; i < count; ++i)
    g[i] = count == 1 ? lo : lo + (hi - lo) * static_cast<double>(i) / (count - 1);
  return g;
}

/// Least-squares slope of log y against log x.
inline double loglog_slope(std::span<const double> x, std::span<const double> y) {
  const std::size_t n = x.size();
  double sx = 0, sy = 0, sxx = 0, sxy = 0;
  for (std::size_t i = 0; i < n; ++i) {
    const double lx = std::log(x[i]), ly = std::log(y[i]);
    sx += lx;
    sy += ly;
    sxx += lx * lx;
    sxy += lx * ly;
  }
  return (n * sxy - sx * sy) / (n * sxx - sx * sx);
}

struct ApproximationFit {
  double lambda = 0.0;
  std::vector<double> t;
  std::vector<double> errors;
  /// Entries at or below the 1e-12 floor; excluded from the fit.
  std::vector<bool> degenerate;
  double slope = std::numeric_limits<double>::quiet_NaN();
};

/// |W_t^*(lambda) - W_t(lambda)| over t_list (gamma = 1, both scaled by C)
/// and the fitted log-log slope over the non-degenerate entries.
inline ApproximationFit approximation_rate(const Mollifier& m, double lambda,
                                           std::span<const double> t_list,
                                           double floor = 1e-12) {
  const Normalization norm = normalization_constant(m, 1.0);
  const ContinuousWeight cont(m, norm);
  ApproximationFit fit;
  fit.lambda = lambda;
  std::vector<double> xs, ys;
  for (double t : t_list) {
    const double disc =
        norm.constant * eval_discrete_weight(chebyshev_coefficients(m, t), lambda);
    const double err = std::abs(disc - cont(lambda, t));
    fit.t.push_back(t);
    fit.errors.push_back(err);
    fit.degenerate.push_back(err <= floor);
    if (err > floor) {
      xs.push_back(t);
      ys.push_back(err);
    }
  }
  if (xs.size() >= 2) fit.slope = loglog_slope(xs, ys);
  return fit;
}

/// CSV with one row per (lambda, t): lambda,t,W_cont,W_disc,identity_residual.
inline void write_weight_report_csv(std::ostream& os, const WeightCheckReport& r) {
  os << "lambda,t,W_cont,W_disc,identity_residual\n";
  os.precision(17);
  for (std::size_t i = 0; i < r.lambda_grid.size(); ++i) {
    for (std::size_t j = 0; j < r.t_grid.size(); ++j) {
      os << r.lambda_grid[i] << ',' << r.t_grid[j] << ','
         << (i < r.w_cont.size() ? r.w_cont[i][j] : 0.0) << ','
         << (i < r.w_disc.size() ? r.w_disc[i][j] : 0.0) << ','
         << (i < r.identity_residuals.size() ? r.identity_residuals[i] : 0.0) << '\n';
    }
  }
}

inline void write_coefficients_csv(std::ostream& os, const ChebyshevWeight& w) {
  os << "k,c_k\n";
  os.precision(17);
  for (std::size_t k = 0; k < w.coeffs.size(); ++k) os << k << ',' << w.coeffs[k] << '\n';
}

}  // namespace frd

#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <functional>
#include <limits>
#include <memory>
#include <numbers>
#include <ostream>
#include <span>
#include <vector>

#include "frd/error.hpp"
#include "frd/parallel.hpp"
#include "frd/quadrature.hpp"

namespace frd {

/// Fourier profile kappa_hat of the square-root mollifier kappa. Must be
/// real, even, non-negative and vanish for |s| >= half_width <= 1/2.
struct BumpProfile {
  double half_width = 0.5;
  std::function<double(double)> eval;

  double operator()(double s) const {
    return std::abs(s) >= half_width ? 0.0 : eval(s);
  }
};

/// kappa_hat(s) = exp(-1 / (1/4 - s^2)) on (-1/2, 1/2).
inline BumpProfile build_default_profile() {
  return BumpProfile{0.5, [](double s) {
                       const double gap = 0.25 - s * s;
                       return gap <= 0.0 ? 0.0 : std::exp(-1.0 / gap);
                     }};
}

struct MollifierOptions {
  double grid_step = 1e-3;
  double x_max = 100.0;
  /// Trapezoid intervals for kappa(x) over the profile support.
  int profile_intervals = 512;
  /// Step of the phi_hat table on [0, 1].
  double hat_step = 1e-4;
  /// Trapezoid intervals for the autoconvolution giving phi_hat.
  int hat_intervals = 512;
};

/// The weight function phi = kappa^2 together with its Fourier transform
/// phi_hat = kappa_hat * kappa_hat (supported in [-1, 1]).
///
/// Fourier convention: phi_hat(k) = (2 pi)^-1 \int phi(x) e^{-ikx} dx, so that
/// kappa(x) = \int kappa_hat(s) e^{isx} ds. phi is tabulated on [0, x_max]
/// with its derivative and read back by cubic Hermite interpolation; phi_hat
/// is tabulated on [0, 1] and interpolated by 4-point Lagrange. Both are even
/// and are evaluated at |x| resp. |k|, so symmetry holds bit for bit.
class Mollifier {
 public:
  Mollifier(BumpProfile profile, const MollifierOptions& options)
      : profile_(std::move(profile)), options_(options) {
    validate();
    tabulate_phi();
    tabulate_phi_hat();
    decay_constant_ = 0.0;
    for (std::size_t i = 0; i < phi_.size(); ++i) {
      const double x = static_cast<double>(i) * options_.grid_step;
      decay_constant_ =
          std::max(decay_constant_, std::pow(1.0 + x * x, 4) * std::abs(phi_[i]));
    }
  }

  const BumpProfile& profile() const noexcept { return profile_; }
  double grid_step() const noexcept { return options_.grid_step; }
  double x_max() const noexcept { return options_.x_max; }
  const MollifierOptions& options() const noexcept { return options_; }
  std::span<const double> phi_table() const noexcept { return phi_; }
  std::span<const double> phi_hat_table() const noexcept { return phi_hat_; }

  /// phi(x); zero beyond the tabulated range.
  double phi(double x) const {
    x = std::abs(x);
    if (x >= options_.x_max) return 0.0;
    const double h = options_.grid_step;
    const std::size_t i =
        std::min(static_cast<std::size_t>(x / h), phi_.size() - 2);
    const double u = (x - static_cast<double>(i) * h) / h;
    const double u2 = u * u, u3 = u2 * u;
    const double h00 = 2 * u3 - 3 * u2 + 1, h10 = u3 - 2 * u2 + u;
    const double h01 = -2 * u3 + 3 * u2, h11 = u3 - u2;
    return h00 * phi_[i] + h10 * h * dphi_[i] + h01 * phi_[i + 1] +
           h11 * h * dphi_[i + 1];
  }

  /// phi'(x) from the derivative of the Hermite interpolant.
  double phi_derivative(double x) const {
    const double sign = x < 0 ? -1.0 : 1.0;
    x = std::abs(x);
    if (x >= options_.x_max) return 0.0;
    const double h = options_.grid_step;
    const std::size_t i =
        std::min(static_cast<std::size_t>(x / h), phi_.size() - 2);
    const double u = (x - static_cast<double>(i) * h) / h;
    const double u2 = u * u;
    const double d00 = (6 * u2 - 6 * u) / h, d10 = 3 * u2 - 4 * u + 1;
    const double d01 = (-6 * u2 + 6 * u) / h, d11 = 3 * u2 - 2 * u;
    return sign * (d00 * phi_[i] + d10 * dphi_[i] + d01 * phi_[i + 1] +
                   d11 * dphi_[i + 1]);
  }

  /// phi_hat(k); literal zero for |k| >= 1.
  double phi_hat(double k) const {
    k = std::abs(k);
    if (k >= 1.0) return 0.0;
    const double h = options_.hat_step;
    const std::size_t last = phi_hat_.size() - 1;
    // Stencil i-1..i+2 around the cell containing k, clamped to the table.
    std::size_t i = static_cast<std::size_t>(k / h);
    std::size_t base = i == 0 ? 0 : i - 1;
    if (base + 3 > last) base = last - 3;
    double value = 0.0;
    for (std::size_t a = 0; a < 4; ++a) {
      double basis = 1.0;
      const double xa = static_cast<double>(base + a) * h;
      for (std::size_t b = 0; b < 4; ++b) {
        if (a == b) continue;
        const double xb = static_cast<double>(base + b) * h;
        basis *= (k - xb) / (xa - xb);
      }
      value += basis * phi_hat_[base + a];
    }
    return value;
  }

  /// \int_0^upper s^{power-1} phi(s) ds for power > 0, with upper clamped to
  /// x_max. Quadrature on the tabulated phi.
  double moment(double power, double upper) const {
    detail::require(power > 0, "mollifier", "moment", "power must be positive");
    upper = std::min(upper, options_.x_max);
    if (upper <= 0) return 0.0;
    const double split = std::min(upper, 1.0);
    // On [0, split] substitute w = s^power / power so the weight is absorbed.
    const double w_max = std::pow(split, power) / power;
    double head = integrate_composite(
        [&](double w) { return phi(std::pow(power * w, 1.0 / power)); }, 0.0,
        w_max, 4, 32);
    const int panels = std::max(1, static_cast<int>(std::ceil((upper - split) / 0.5)));
    double body = integrate_composite(
        [&](double s) { return std::pow(s, power - 1.0) * phi(s); }, split, upper,
        panels, 16);
    return head + body;
  }

  /// Bound on \int_{x_max}^\infty s^{power-1} phi(s) ds from the measured
  /// constant K = max (1+x^2)^4 phi(x) on the grid.
  double moment_tail_bound(double power) const {
    if (power >= 8.0) return std::numeric_limits<double>::infinity();
    return decay_constant_ * std::pow(options_.x_max, power - 8.0) / (8.0 - power);
  }

  /// max over the grid of (1+x^2)^p |phi(x)|.
  double decay_sup(int p) const {
    double sup = 0.0;
    for (std::size_t i = 0; i < phi_.size(); ++i) {
      const double x = static_cast<double>(i) * options_.grid_step;
      sup = std::max(sup, std::pow(1.0 + x * x, p) * std::abs(phi_[i]));
    }
    return sup;
  }

 private:
  void validate() const {
    detail::require(static_cast<bool>(profile_.eval), "mollifier", "build_mollifier",
                    "profile has no evaluator");
    detail::require(profile_.half_width > 0 && profile_.half_width <= 0.5,
                    "mollifier", "build_mollifier", "half_width must lie in (0, 1/2]");
    detail::require(options_.grid_step > 0, "mollifier", "build_mollifier",
                    "grid_step must be positive");
    detail::require(options_.x_max >= 50, "mollifier", "build_mollifier",
                    "x_max must be >= 50");
    detail::require(options_.profile_intervals >= 16 && options_.profile_intervals % 2 == 0,
                    "mollifier", "build_mollifier", "profile_intervals must be even and >= 16");
    detail::require(options_.hat_step > 0 && options_.hat_step <= 0.01, "mollifier",
                    "build_mollifier", "hat_step must lie in (0, 0.01]");
    const int samples = 2001;
    double peak = 0.0;
    std::vector<double> values(samples);
    for (int i = 0; i < samples; ++i) {
      const double s = profile_.half_width * (-1.0 + 2.0 * i / (samples - 1));
      values[i] = profile_(s);
      peak = std::max(peak, std::abs(values[i]));
    }
    detail::require(peak > 0, "mollifier", "build_mollifier", "profile vanishes identically");
    for (int i = 0; i < samples; ++i) {
      detail::require(values[i] >= 0, "mollifier", "build_mollifier",
                      "profile takes negative values");
      detail::require(std::abs(values[i] - values[samples - 1 - i]) <= 1e-14 * peak,
                      "mollifier", "build_mollifier", "profile is not symmetric");
    }
  }

  void tabulate_phi() {
    const double hw = profile_.half_width;
    const int m = options_.profile_intervals;
    const double ds = 2.0 * hw / m;
    // Positive trapezoid nodes; the endpoints carry kappa_hat = 0.
    std::vector<double> s_pos, w_pos;
    for (int i = 1; i < m / 2; ++i) {
      s_pos.push_back(i * ds);
      w_pos.push_back(profile_(i * ds));
    }
    const double center = profile_(0.0);
    const std::size_t count =
        static_cast<std::size_t>(std::floor(options_.x_max / options_.grid_step + 1e-9)) + 1;
    phi_.assign(count, 0.0);
    dphi_.assign(count, 0.0);
    const std::size_t chunk = 1024;
    parallel_for((count + chunk - 1) / chunk, [&](std::size_t c) {
      const std::size_t end = std::min(count, (c + 1) * chunk);
      for (std::size_t i = c * chunk; i < end; ++i) {
        const double x = static_cast<double>(i) * options_.grid_step;
        double kappa = center, dkappa = 0.0;
        for (std::size_t q = 0; q < s_pos.size(); ++q) {
          const double arg = s_pos[q] * x;
          kappa += 2.0 * w_pos[q] * std::cos(arg);
          dkappa -= 2.0 * w_pos[q] * s_pos[q] * std::sin(arg);
        }
        kappa *= ds;
        dkappa *= ds;
        phi_[i] = kappa * kappa;
        dphi_[i] = 2.0 * kappa * dkappa;
      }
    });
  }

  void tabulate_phi_hat() {
    const double hw = profile_.half_width;
    const std::size_t count =
        static_cast<std::size_t>(std::llround(1.0 / options_.hat_step)) + 1;
    phi_hat_.assign(count, 0.0);
    const int p = options_.hat_intervals;
    parallel_for(count, [&](std::size_t i) {
      const double k = static_cast<double>(i) * options_.hat_step;
      const double lo = k - hw, hi = hw;
      if (hi <= lo) return;
      const double h = (hi - lo) / p;
      double sum = 0.0;
      for (int q = 1; q < p; ++q) {
        const double s = lo + q * h;
        sum += profile_(k - s) * profile_(s);
      }
      phi_hat_[i] = sum * h;
    });
  }

  BumpProfile profile_;
  MollifierOptions options_;
  std::vector<double> phi_, dphi_, phi_hat_;
  double decay_constant_ = 0.0;
};

/// Builds and tabulates the mollifier.
inline Mollifier build_mollifier(BumpProfile profile, double grid_step = 1e-3,
                                 double x_max = 100.0) {
  MollifierOptions options;
  options.grid_step = grid_step;
  options.x_max = x_max;
  return Mollifier(std::move(profile), options);
}

/// Shared default mollifier (default profile and options), built once.
inline const Mollifier& default_mollifier() {
  static const Mollifier instance(build_default_profile(), MollifierOptions{});
  return instance;
}

struct Normalization {
  double gamma = 1.0;
  /// C with C^-1 = \int_0^\infty t^{2/gamma} phi(t) dt/t.
  double constant = 0.0;
  /// Bound on the neglected part of the integral beyond x_max.
  double tail_bound = 0.0;
};

inline Normalization normalization_constant(const Mollifier& m, double gamma) {
  detail::require(gamma > 0, "mollifier", "normalization_constant", "gamma must be positive");
  const double power = 2.0 / gamma;
  const double integral = m.moment(power, m.x_max());
  if (!(integral > 1e-200)) {
    throw Error("mollifier", "normalization_constant",
                "moment integral below positivity floor (degenerate phi)");
  }
  return Normalization{gamma, 1.0 / integral, m.moment_tail_bound(power)};
}

inline void write_phi_csv(std::ostream& os, const Mollifier& m) {
  os << "x,phi\n";
  os.precision(17);
  const auto table = m.phi_table();
  for (std::size_t i = 0; i < table.size(); ++i)
    os << static_cast<double>(i) * m.grid_step() << ',' << table[i] << '\n';
}

inline void write_phi_hat_csv(std::ostream& os, const Mollifier& m) {
  os << "k,phi_hat\n";
  os.precision(17);
  const auto table = m.phi_hat_table();
  const double h = m.options().hat_step;
  for (std::size_t i = 0; i < table.size(); ++i)
    os << static_cast<double>(i) * h << ',' << table[i] << '\n';
}

}  // namespace frd

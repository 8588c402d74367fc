#pragma once

#include <algorithm>
#include <cmath>
#include <limits>
#include <span>
#include <vector>

#include "frd/chebyshev.hpp"
#include "frd/error.hpp"
#include "frd/quadrature.hpp"
#include "frd/spectral_weights.hpp"

namespace frd {

/// Discrete scales j in [j_min, j_max]; block j integrates t over
/// [L^{j-1}, L^j], and the lowest block reaches down to t = 0.
struct ScalePlan {
  int j_min = 0;
  int j_max = 6;
  double L_ratio = 2.0;
  int nodes_per_block = 24;

  int block_count() const noexcept { return j_max - j_min + 1; }
  double lower(int j) const { return j == j_min ? 0.0 : std::pow(L_ratio, j - 1); }
  double upper(int j) const { return std::pow(L_ratio, j); }

  void validate(const char* module, const char* op) const {
    detail::require(L_ratio > 1.0, module, op, "L_ratio must exceed 1");
    detail::require(nodes_per_block >= 4, module, op, "nodes_per_block must be >= 4");
    detail::require(j_max >= j_min, module, op, "need j_min <= j_max");
  }
};

/// ceil(log_L t_min), the first scale whose block still carries t >= t_min.
inline int default_j_min(double L_ratio, double t_min = 0.25) {
  return static_cast<int>(std::ceil(std::log(t_min) / std::log(L_ratio) - 1e-12));
}

/// Smallest j whose tabulated tail beyond L^j, scaled by lambda_min, is at
/// most `relative_tail`. With relative_tail = 0 this is the scale where
/// every tabulated weight vanishes for lambda >= lambda_min. Scales past a
/// small positive target add nothing resolvable: their weights on the
/// spectrum fall below the rounding floor of the Chebyshev coefficients.
inline int default_j_max(const DiscreteWeightFamily& family, double lambda_min,
                         double L_ratio, double relative_tail = 1e-9) {
  detail::require(lambda_min > 0, "scales", "default_j_max", "lambda_min must be positive");
  const double x = std::acos(std::max(-1.0, 1.0 - 0.5 * family.argument_scale() * lambda_min));
  const double t_end = family.mollifier().x_max() / x;
  const int j_end = static_cast<int>(std::ceil(std::log(t_end) / std::log(L_ratio) - 1e-12));
  for (int j = std::min(0, j_end); j < j_end; ++j)
    if (lambda_min * family.tail_integral(lambda_min, std::pow(L_ratio, j)) <= relative_tail)
      return j;
  return j_end;
}

/// Folded Chebyshev coefficients (in theta = 1 - s lambda / 2) of
/// \int_lo^hi t^2 W(lambda) dt/t for the rescaled family. The part of the
/// interval below t = 1 has only c_0 = phi_hat(0)/t and is integrated
/// exactly; the rest uses `nodes` Gauss-Legendre points in log t.
///
/// The sum is kept in double-double: far blocks are large at lambda = 0 and
/// tiny on the spectrum, so rounding the coefficients to double would leave
/// noise of order eps * sum |c_k| there, with either sign.
inline std::vector<DoubleDouble> block_coefficients_extended(const DiscreteWeightFamily& family,
                                                             double lo, double hi, int nodes) {
  detail::require(lo >= 0 && hi > lo, "scales", "block_coefficients", "need 0 <= lo < hi");
  const Mollifier& m = family.mollifier();
  const double mult = family.multiplier();
  std::vector<DoubleDouble> coeffs(
      1, {mult * m.phi_hat(0.0) * (std::min(hi, 1.0) - std::min(lo, 1.0)), 0.0});
  const double a = std::max(lo, 1.0);
  if (hi > a) {
    for (const ScaleNode& node : log_scale_nodes(a, hi, nodes, hi / a * (1.0 + 1e-12))) {
      const ChebyshevWeight w = chebyshev_coefficients(m, node.t);
      if (w.coeffs.size() > coeffs.size()) coeffs.resize(w.coeffs.size());
      const double f = node.weight * mult * node.t * node.t;
      for (std::size_t k = 0; k < w.coeffs.size(); ++k)
        coeffs[k] = detail::dd_add(coeffs[k], detail::dd_mul({w.coeffs[k], 0.0}, f));
    }
  }
  return coeffs;
}

inline std::vector<double> block_coefficients(const DiscreteWeightFamily& family, double lo,
                                              double hi, int nodes) {
  const auto ext = block_coefficients_extended(family, lo, hi, nodes);
  std::vector<double> out(ext.size());
  for (std::size_t k = 0; k < ext.size(); ++k) out[k] = ext[k].value();
  return out;
}

inline std::vector<double> block_coefficients(const DiscreteWeightFamily& family,
                                              const ScalePlan& plan, int j) {
  return block_coefficients(family, plan.lower(j), plan.upper(j), plan.nodes_per_block);
}

/// Value of a block's spectral multiplier at lambda.
inline double block_multiplier(const std::vector<double>& coeffs, double argument_scale,
                               double lambda) {
  return clenshaw_folded(coeffs, 1.0 - 0.5 * argument_scale * lambda);
}

/// True when block j, read at the given spectral values the way blocks are
/// built (re-expanded on their range), stays above -floor times its largest
/// value there. A block that fails carries less weight on this spectrum than
/// the weight tables resolve.
inline bool block_resolvable(const DiscreteWeightFamily& family, const ScalePlan& plan, int j,
                             std::span<const double> spectrum, double floor = 1e-11) {
  detail::require(!spectrum.empty(), "scales", "block_resolvable", "empty spectrum");
  const auto [lo_it, hi_it] = std::minmax_element(spectrum.begin(), spectrum.end());
  const double lo = *lo_it, hi = *hi_it;
  const auto ext =
      block_coefficients_extended(family, plan.lower(j), plan.upper(j), plan.nodes_per_block);
  double mn = std::numeric_limits<double>::infinity(), mx = -mn;
  if (hi > lo) {
    const auto local = reexpand_folded(ext, 1.0, 0.5 * family.argument_scale(), lo, hi);
    const double p = (lo + hi) / (hi - lo), h = 2.0 / (hi - lo);
    for (double lambda : spectrum) {
      const double v = clenshaw_folded(local, p - h * lambda);
      mn = std::min(mn, v);
      mx = std::max(mx, v);
    }
  } else {
    mn = mx = clenshaw_folded_compensated(ext, 1.0 - 0.5 * family.argument_scale() * lo);
  }
  return mx > 0 && mn >= -floor * mx;
}

/// j_max of a default plan: default_j_max at lambda_min, then lowered past
/// trailing blocks that are not resolvable on `spectrum`, the eigenvalues
/// the blocks themselves carry.
inline int resolved_j_max(const DiscreteWeightFamily& family, const ScalePlan& plan,
                          double lambda_min, std::span<const double> spectrum,
                          double relative_tail = 1e-9) {
  int j = std::max(plan.j_min, default_j_max(family, lambda_min, plan.L_ratio, relative_tail));
  while (j > plan.j_min && !block_resolvable(family, plan, j, spectrum)) --j;
  return j;
}

/// Operator-norm bound on the scales above L^{j_max}, for spectrum in
/// [lambda_min, B]: the tabulated tail at lambda_min plus the bound on the
/// untabulated part of phi.
inline double truncation_bound(const DiscreteWeightFamily& family, const ScalePlan& plan,
                               double lambda_min) {
  if (!(lambda_min > 0)) return std::numeric_limits<double>::infinity();
  return family.tail_integral(lambda_min, plan.upper(plan.j_max)) +
         family.untabulated_bound(lambda_min);
}

}  // namespace frd

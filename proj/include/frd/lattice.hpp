#pragma once

#include <Eigen/Dense>
#include <Eigen/SparseCore>

#include <algorithm>
#include <array>
#include <cmath>
#include <complex>
#include <cstddef>
#include <cstdint>
#include <limits>
#include <map>
#include <numbers>
#include <span>
#include <string>
#include <vector>

#include "frd/error.hpp"
#include "frd/fft.hpp"
#include "frd/mollifier.hpp"
#include "frd/parallel.hpp"
#include "frd/quadrature.hpp"
#include "frd/scales.hpp"
#include "frd/spectral_weights.hpp"

namespace frd {

/// Constant-coefficient operator sum_ij a_ij grad_i^* grad_j + m2 on the
/// torus (Z/NZ)^d. `a` is row-major d x d.
struct LatticeSpec {
  int d = 1;
  std::vector<double> a{1.0};
  double m2 = 0.0;
  int N = 16;
  /// Admissible eigenvalue window for a, and the largest admissible mass.
  double eig_lo = 0.0;
  double eig_hi = std::numeric_limits<double>::infinity();
  double m2_max = std::numeric_limits<double>::infinity();

  std::size_t sites() const {
    std::size_t n = 1;
    for (int i = 0; i < d; ++i) n *= static_cast<std::size_t>(N);
    return n;
  }

  double coeff(int i, int j) const { return a[static_cast<std::size_t>(i * d + j)]; }

  Eigen::MatrixXd matrix() const {
    Eigen::MatrixXd m(d, d);
    for (int i = 0; i < d; ++i)
      for (int j = 0; j < d; ++j) m(i, j) = coeff(i, j);
    return m;
  }

  void validate() const {
    const char* mod = "lattice_kernels";
    const char* op = "LatticeSpec";
    detail::require(d >= 1 && d <= 3, mod, op, "d must be 1, 2 or 3, got " + std::to_string(d));
    detail::require(a.size() == static_cast<std::size_t>(d * d), mod, op,
                    "a must have d*d entries");
    detail::require(N >= 8 && (N & (N - 1)) == 0, mod, op,
                    "N must be a power of two >= 8, got " + std::to_string(N));
    detail::require(m2 >= 0 && m2 <= m2_max, mod, op,
                    "m2 outside [0, m2_max]: " + std::to_string(m2));
    for (int i = 0; i < d; ++i)
      for (int j = 0; j < i; ++j)
        detail::require(coeff(i, j) == coeff(j, i), mod, op, "a must be symmetric");
    const Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(matrix());
    const double lo = es.eigenvalues().minCoeff(), hi = es.eigenvalues().maxCoeff();
    detail::require(lo > 0, mod, op, "a is not positive definite (min eigenvalue " +
                                         std::to_string(lo) + ")");
    detail::require(lo >= eig_lo && hi <= eig_hi, mod, op,
                    "eigenvalues of a outside the configured window");
  }
};

/// Row-major multi-index helpers on the N^d grid.
inline std::array<int, 3> unravel(std::size_t index, int d, int N) {
  std::array<int, 3> k{0, 0, 0};
  for (int i = d - 1; i >= 0; --i) {
    k[i] = static_cast<int>(index % N);
    index /= N;
  }
  return k;
}

inline std::size_t ravel(const std::array<int, 3>& k, int d, int N) {
  std::size_t index = 0;
  for (int i = 0; i < d; ++i) index = index * N + static_cast<std::size_t>(((k[i] % N) + N) % N);
  return index;
}

/// Torus l-infinity distance of site `index` from the origin.
inline int torus_distance(std::size_t index, int d, int N) {
  const auto k = unravel(index, d, N);
  int r = 0;
  for (int i = 0; i < d; ++i) r = std::max(r, std::min(k[i], N - k[i]));
  return r;
}

/// a*(xi) = sum_ij a_ij (1 - e^{i xi_i})(1 - e^{-i xi_j}).
inline double lattice_symbol(const LatticeSpec& spec, const std::array<double, 3>& xi) {
  std::complex<double> s = 0.0;
  for (int i = 0; i < spec.d; ++i) {
    const std::complex<double> ui = 1.0 - std::polar(1.0, xi[i]);
    for (int j = 0; j < spec.d; ++j) {
      const std::complex<double> uj = 1.0 - std::polar(1.0, -xi[j]);
      s += spec.coeff(i, j) * ui * uj;
    }
  }
  return s.real();
}

/// lambda(xi) = a*(xi) + m2 at xi = 2 pi k / N.
struct SymbolTable {
  LatticeSpec spec;
  std::vector<double> values;
  /// Largest value on the grid; the spectral bound used for rescaling.
  double B = 0.0;
  /// Largest imaginary part met while summing the symbol.
  double max_imaginary = 0.0;
};

inline SymbolTable build_symbol_table(const LatticeSpec& spec) {
  spec.validate();
  SymbolTable table;
  table.spec = spec;
  const std::size_t n = spec.sites();
  table.values.resize(n);
  const double h = 2.0 * std::numbers::pi / spec.N;
  for (std::size_t idx = 0; idx < n; ++idx) {
    const auto k = unravel(idx, spec.d, spec.N);
    table.values[idx] = lattice_symbol(spec, {h * k[0], h * k[1], h * k[2]}) + spec.m2;
  }
  table.values[0] = spec.m2;
  table.B = *std::max_element(table.values.begin(), table.values.end());
  return table;
}

/// Same table with a different mass (shares the grid symbol).
inline SymbolTable with_mass(const SymbolTable& table, double m2) {
  SymbolTable out = table;
  out.spec.m2 = m2;
  for (double& v : out.values) v += m2 - table.spec.m2;
  out.values[0] = m2;
  out.B = *std::max_element(out.values.begin(), out.values.end());
  return out;
}

/// Real kernel x -> phi(x) on the torus (one column of a translation
/// invariant operator).
struct LatticeKernel {
  int d = 1;
  int N = 0;
  double t = 0.0;
  double m2 = 0.0;
  double B = 0.0;
  std::vector<double> values;
  double imaginary_residue = 0.0;
  /// Extremes of the Fourier multiplier that produced the kernel.
  double min_multiplier = 0.0;
  double max_multiplier = 0.0;

  double at(const std::array<int, 3>& x) const { return values[ravel(x, d, N)]; }

  double sup() const {
    double s = 0.0;
    for (double v : values) s = std::max(s, std::abs(v));
    return s;
  }

  /// max over sites with torus l-infinity distance > r.
  double max_beyond(double r) const {
    double s = 0.0;
    for (std::size_t i = 0; i < values.size(); ++i)
      if (torus_distance(i, d, N) > r) s = std::max(s, std::abs(values[i]));
    return s;
  }

  /// max_x |phi(x) - phi(-x)|.
  double asymmetry() const {
    double s = 0.0;
    for (std::size_t i = 0; i < values.size(); ++i) {
      auto k = unravel(i, d, N);
      for (int c = 0; c < d; ++c) k[c] = -k[c];
      s = std::max(s, std::abs(values[i] - values[ravel(k, d, N)]));
    }
    return s;
  }
};

/// N^-d sum_xi f(xi) e^{i xi x} for a real even multiplier f.
inline LatticeKernel inverse_transform(int d, int N, const std::vector<double>& multiplier) {
  ComplexBuffer buf(multiplier.size());
  for (std::size_t i = 0; i < multiplier.size(); ++i) buf[i] = multiplier[i];
  const FftPlan plan(d, N, FFTW_BACKWARD);
  plan.execute(buf);
  LatticeKernel k;
  k.d = d;
  k.N = N;
  k.values.resize(multiplier.size());
  const double scale = 1.0 / static_cast<double>(multiplier.size());
  double imag = 0.0;
  for (std::size_t i = 0; i < multiplier.size(); ++i) {
    k.values[i] = scale * buf[i].real();
    imag = std::max(imag, scale * std::abs(buf[i].imag()));
  }
  k.imaginary_residue = imag;
  k.min_multiplier = *std::min_element(multiplier.begin(), multiplier.end());
  k.max_multiplier = *std::max_element(multiplier.begin(), multiplier.end());
  return k;
}

/// Applies g to every symbol value in parallel.
template <typename G>
std::vector<double> map_symbol(const SymbolTable& table, G&& g) {
  std::vector<double> out(table.values.size());
  constexpr std::size_t chunk = 4096;
  const std::size_t chunks = (out.size() + chunk - 1) / chunk;
  parallel_for(chunks, [&](std::size_t c) {
    const std::size_t end = std::min(out.size(), (c + 1) * chunk);
    for (std::size_t i = c * chunk; i < end; ++i) out[i] = g(table.values[i]);
  });
  return out;
}

/// phi_t^*(x) = t^2 N^-d sum_xi w(lambda(xi)) e^{i xi x}, where w already
/// carries the rescaling multiplier. Requires N > 2t.
inline LatticeKernel lattice_kernel(const SymbolTable& table, const RescaledWeight& w) {
  const double t = w.weight.t;
  if (!(table.spec.N > 2.0 * t))
    throw WrapAroundError("lattice_kernels", "lattice_kernel",
                          "N = " + std::to_string(table.spec.N) +
                              " does not exceed 2t = " + std::to_string(2.0 * t));
  const auto mult = map_symbol(table, [&](double lambda) { return t * t * w(lambda); });
  LatticeKernel k = inverse_transform(table.spec.d, table.spec.N, mult);
  k.t = t;
  k.m2 = table.spec.m2;
  k.B = table.B;
  return k;
}

inline LatticeKernel lattice_kernel(const SymbolTable& table, double t, const Mollifier& m,
                                    const Normalization& norm) {
  return lattice_kernel(table, DiscreteWeightFamily(m, norm, table.B).at(t));
}

/// Forward difference f(x + e_dir) - f(x); backward for sign < 0.
inline LatticeKernel difference(const LatticeKernel& k, int dir, int sign = +1) {
  LatticeKernel out = k;
  for (std::size_t i = 0; i < k.values.size(); ++i) {
    auto x = unravel(i, k.d, k.N);
    x[dir] += sign;
    const double shifted = k.values[ravel(x, k.d, k.N)];
    out.values[i] = sign > 0 ? shifted - k.values[i] : k.values[i] - shifted;
  }
  return out;
}

/// max over coordinate directions of max_x |grad_+^{lx} grad_-^{ly} phi|,
/// the kernel of grad_x^{lx} grad_y^{ly} phi(x - y) up to sign.
inline double difference_sup(const LatticeKernel& k, int lx, int ly) {
  if (lx == 0 && ly == 0) return k.sup();
  double best = 0.0;
  const int ni = lx > 0 ? k.d : 1, nj = ly > 0 ? k.d : 1;
  for (int i = 0; i < ni; ++i) {
    for (int j = 0; j < nj; ++j) {
      LatticeKernel f = k;
      for (int r = 0; r < lx; ++r) f = difference(f, i, +1);
      for (int r = 0; r < ly; ++r) f = difference(f, j, -1);
      best = std::max(best, f.sup());
    }
  }
  return best;
}

/// Dense matrix of sum_ij a_ij D_i^T D_j + m2 with (D_j u)(x) = u(x + e_j) - u(x).
inline Eigen::MatrixXd dense_torus_operator(const LatticeSpec& spec) {
  spec.validate();
  const std::size_t n = spec.sites();
  detail::require(n <= 4096, "lattice_kernels", "dense_torus_operator",
                  "dense oracle limited to 4096 sites");
  std::vector<Eigen::SparseMatrix<double>> D(spec.d, Eigen::SparseMatrix<double>(n, n));
  for (int j = 0; j < spec.d; ++j) {
    std::vector<Eigen::Triplet<double>> trip;
    for (std::size_t x = 0; x < n; ++x) {
      auto k = unravel(x, spec.d, spec.N);
      k[j] += 1;
      trip.emplace_back(x, ravel(k, spec.d, spec.N), 1.0);
      trip.emplace_back(x, x, -1.0);
    }
    D[j].setFromTriplets(trip.begin(), trip.end());
  }
  Eigen::MatrixXd L = spec.m2 * Eigen::MatrixXd::Identity(n, n);
  for (int i = 0; i < spec.d; ++i)
    for (int j = 0; j < spec.d; ++j)
      if (spec.coeff(i, j) != 0.0)
        L += spec.coeff(i, j) * Eigen::MatrixXd(D[i].transpose() * D[j]);
  return L;
}

/// Column x -> G(x, 0) of the dense inverse; at m2 = 0 the pseudo-inverse on
/// mean-zero functions.
inline std::vector<double> dense_torus_green(const LatticeSpec& spec) {
  const Eigen::MatrixXd L = dense_torus_operator(spec);
  const auto n = L.rows();
  Eigen::VectorXd rhs = Eigen::VectorXd::Zero(n);
  rhs(0) = 1.0;
  Eigen::VectorXd g;
  if (spec.m2 > 0) {
    g = L.ldlt().solve(rhs);
  } else {
    rhs.array() -= 1.0 / static_cast<double>(n);
    const Eigen::MatrixXd Lp = L + Eigen::MatrixXd::Constant(n, n, 1.0 / static_cast<double>(n));
    g = Lp.ldlt().solve(rhs);
    g.array() -= g.mean();
  }
  return {g.data(), g.data() + n};
}

/// Per-scale Fourier multipliers v_j(xi) of the block covariances; the
/// zero mode is set to 0 when m2 = 0 and `deflate` holds.
struct TorusScaleMultipliers {
  ScalePlan plan;
  std::vector<std::vector<double>> per_scale;
  double truncation_bound = 0.0;
};

inline TorusScaleMultipliers torus_scale_multipliers(const SymbolTable& table,
                                                     const ScalePlan& plan,
                                                     const Mollifier& m,
                                                     const Normalization& norm,
                                                     bool deflate = true) {
  plan.validate("lattice_kernels", "torus_scale_multipliers");
  if (table.spec.m2 == 0.0 && !deflate)
    throw SingularOperatorError("lattice_kernels", "torus_scale_multipliers",
                                "m2 = 0 requires zero-mode deflation");
  const DiscreteWeightFamily family(m, norm, table.B);
  TorusScaleMultipliers out;
  out.plan = plan;
  out.per_scale.resize(plan.block_count());
  // Each block is re-expanded on the range of symbol values it is read at,
  // as for graph blocks.
  double lo = std::numeric_limits<double>::infinity(), hi = 0.0;
  for (std::size_t i = table.spec.m2 == 0.0 ? 1 : 0; i < table.values.size(); ++i) {
    lo = std::min(lo, table.values[i]);
    hi = std::max(hi, table.values[i]);
  }
  const bool local = hi > lo;
  const double p = local ? (lo + hi) / (hi - lo) : 1.0;
  const double h = local ? 2.0 / (hi - lo) : 0.5 * family.argument_scale();
  for (int j = plan.j_min; j <= plan.j_max; ++j) {
    const auto ext = block_coefficients_extended(family, plan.lower(j), plan.upper(j),
                                                 plan.nodes_per_block);
    std::vector<double> coeffs;
    if (local) {
      coeffs = reexpand_folded(ext, 1.0, 0.5 * family.argument_scale(), lo, hi);
    } else {
      for (const auto& c : ext) coeffs.push_back(c.value());
    }
    auto v = map_symbol(table, [&](double lambda) { return clenshaw_folded(coeffs, p - h * lambda); });
    if (table.spec.m2 == 0.0) v[0] = 0.0;
    out.per_scale[j - plan.j_min] = std::move(v);
  }
  double lambda_min = std::numeric_limits<double>::infinity();
  for (std::size_t i = 1; i < table.values.size(); ++i)
    lambda_min = std::min(lambda_min, table.values[i]);
  if (table.spec.m2 > 0) lambda_min = std::min(lambda_min, table.spec.m2);
  out.truncation_bound = truncation_bound(family, plan, lambda_min);
  return out;
}

/// Smallest nonzero symbol value (the gap on the working subspace).
inline double symbol_gap(const SymbolTable& table) {
  double g = table.spec.m2 > 0 ? table.spec.m2 : std::numeric_limits<double>::infinity();
  for (std::size_t i = 1; i < table.values.size(); ++i) g = std::min(g, table.values[i]);
  return g;
}

/// Default plan on a torus: as for graphs, with the symbol values (the zero
/// mode left out when m2 = 0) as the spectrum.
inline ScalePlan default_torus_plan(const SymbolTable& table, const Mollifier& m,
                                    const Normalization& norm, double L_ratio = 2.0,
                                    int nodes_per_block = 24) {
  std::vector<double> spectrum(table.values.begin() + (table.spec.m2 == 0.0 ? 1 : 0),
                               table.values.end());
  std::sort(spectrum.begin(), spectrum.end());
  spectrum.erase(std::unique(spectrum.begin(), spectrum.end()), spectrum.end());
  ScalePlan plan;
  plan.L_ratio = L_ratio;
  plan.nodes_per_block = nodes_per_block;
  plan.j_min = default_j_min(L_ratio);
  plan.j_max = resolved_j_max(DiscreteWeightFamily(m, norm, table.B), plan, spectrum.front(), spectrum);
  return plan;
}

struct TorusReconstruction {
  std::vector<double> values;
  std::vector<double> oracle;
  double max_abs_error = 0.0;
  double relative_error = 0.0;
  /// max over sites of |error| / |oracle|; meaningless where a deflated
  /// oracle crosses zero.
  double entrywise_error = 0.0;
  double truncation_bound = 0.0;
};

/// sum_j C_j(x, 0) against the dense inverse column.
inline TorusReconstruction reconstruct_torus_green(const SymbolTable& table,
                                                   const ScalePlan& plan, const Mollifier& m,
                                                   const Normalization& norm,
                                                   bool deflate = true) {
  const auto scales = torus_scale_multipliers(table, plan, m, norm, deflate);
  std::vector<double> total(table.values.size(), 0.0);
  for (const auto& v : scales.per_scale)
    for (std::size_t i = 0; i < v.size(); ++i) total[i] += v[i];
  TorusReconstruction r;
  r.values = inverse_transform(table.spec.d, table.spec.N, total).values;
  r.oracle = dense_torus_green(table.spec);
  double gmax = 0.0;
  for (std::size_t i = 0; i < r.values.size(); ++i) {
    r.max_abs_error = std::max(r.max_abs_error, std::abs(r.values[i] - r.oracle[i]));
    gmax = std::max(gmax, std::abs(r.oracle[i]));
    r.entrywise_error =
        std::max(r.entrywise_error, std::abs(r.values[i] - r.oracle[i]) / std::abs(r.oracle[i]));
  }
  r.relative_error = r.max_abs_error / gmax;
  r.truncation_bound = scales.truncation_bound;
  return r;
}

/// Continuum kernel value with the bound on the part of the frequency
/// integral beyond the tabulated range of phi.
struct ContinuumValue {
  double value = 0.0;
  double tail_bound = 0.0;
};

/// Radial profile g(rho) and g'(rho) of the continuum kernel in the
/// coordinates y = a^{-1/2} x, rho = |y|.
struct ContinuumProfile {
  double g = 0.0;
  double dg = 0.0;
  double tail_bound = 0.0;
};

inline ContinuumProfile continuum_profile(const Mollifier& m, const Normalization& norm, int d,
                                          double det_a, double m2, double t, double rho) {
  const double r_max2 = (m.x_max() / t) * (m.x_max() / t) - m2;
  const double pre = t * t * norm.constant / std::sqrt(det_a) / std::pow(2.0 * std::numbers::pi, d);
  ContinuumProfile p;
  // phi(t sqrt(r^2 + m2)) r^{d-1} beyond r_max is below t^-d times the
  // untabulated moment of order d.
  const double area = d == 1 ? 2.0 : (d == 2 ? 2.0 * std::numbers::pi : 4.0 * std::numbers::pi);
  p.tail_bound = pre * area * m.moment_tail_bound(d) / std::pow(t, d);
  if (r_max2 <= 0) return p;
  const double r_max = std::sqrt(r_max2);
  auto f = [&](double r) { return m.phi(t * std::sqrt(r * r + m2)); };
  const int panels = 256 + static_cast<int>(std::ceil(2.0 * rho * r_max / std::numbers::pi));
  double g = 0.0, dg = 0.0;
  if (d == 1) {
    g = 2.0 * integrate_composite([&](double r) { return f(r) * std::cos(rho * r); }, 0, r_max, panels);
    dg = -2.0 * integrate_composite([&](double r) { return f(r) * r * std::sin(rho * r); }, 0, r_max, panels);
  } else if (d == 2) {
    const double tp = 2.0 * std::numbers::pi;
    g = tp * integrate_composite([&](double r) { return f(r) * std::cyl_bessel_j(0.0, rho * r) * r; },
                                 0, r_max, panels);
    dg = -tp * integrate_composite(
                   [&](double r) { return f(r) * std::cyl_bessel_j(1.0, rho * r) * r * r; }, 0,
                   r_max, panels);
  } else {
    const double fp = 4.0 * std::numbers::pi;
    g = fp * integrate_composite(
                 [&](double r) {
                   const double z = rho * r;
                   return f(r) * r * r * (z == 0.0 ? 1.0 : std::sin(z) / z);
                 },
                 0, r_max, panels);
    if (rho > 0) {
      dg = fp * integrate_composite(
                    [&](double r) {
                      const double z = rho * r;
                      // d/drho of sin(z)/z = r (z cos z - sin z) / z^2
                      const double ds = z < 1e-4 ? -r * z / 3.0
                                                 : r * (z * std::cos(z) - std::sin(z)) / (z * z);
                      return f(r) * r * r * ds;
                    },
                    0, r_max, panels);
    }
  }
  p.g = pre * g;
  p.dg = pre * dg;
  return p;
}

/// phi_t(x) = t^2 (2 pi)^-d \int W_t(xi^T a xi + m2) e^{i x xi} dxi with
/// W_t = C phi(lambda^{1/2} t), or its partial derivative in direction
/// `derivative_dir` (-1 for the value). Only first derivatives are supported.
inline ContinuumValue continuum_kernel(const Mollifier& m, const Normalization& norm, int d,
                                       const std::vector<double>& a, double m2, double t,
                                       const std::array<double, 3>& x, int derivative_dir = -1) {
  detail::require(d >= 1 && d <= 3, "lattice_kernels", "continuum_kernel", "d must be 1, 2 or 3");
  detail::require(t > 0 && m2 >= 0, "lattice_kernels", "continuum_kernel", "need t > 0, m2 >= 0");
  detail::require(derivative_dir < d, "lattice_kernels", "continuum_kernel",
                  "derivative direction out of range");
  Eigen::MatrixXd A(d, d);
  for (int i = 0; i < d; ++i)
    for (int j = 0; j < d; ++j) A(i, j) = a[static_cast<std::size_t>(i * d + j)];
  const Eigen::LLT<Eigen::MatrixXd> llt(A);
  detail::require(llt.info() == Eigen::Success, "lattice_kernels", "continuum_kernel",
                  "a is not positive definite");
  Eigen::VectorXd xv(d);
  for (int i = 0; i < d; ++i) xv(i) = x[i];
  const Eigen::VectorXd ainv_x = llt.solve(xv);
  const double rho = std::sqrt(std::max(0.0, xv.dot(ainv_x)));
  const ContinuumProfile p = continuum_profile(m, norm, d, A.determinant(), m2, t, rho);
  ContinuumValue v;
  v.tail_bound = p.tail_bound;
  if (derivative_dir < 0) {
    v.value = p.g;
  } else {
    v.value = rho > 0 ? p.dg * ainv_x(derivative_dir) / rho : 0.0;
  }
  return v;
}

struct DecayFit {
  int lx = 0, ly = 0;
  std::vector<double> t;
  std::vector<double> max_abs;
  /// Compensation exponent k: max_abs is multiplied by (1 + m2 t^2)^k.
  int mass_power = 0;
  double slope = 0.0;
  double constant = 0.0;
  /// -(d - 2) - lx - ly, the predicted exponent.
  double predicted = 0.0;
};

/// Log-log fit of max_x |grad^{lx} grad^{ly} phi_t^*| over t_list.
inline DecayFit decay_fit(const LatticeSpec& spec, std::span<const double> t_list, int lx, int ly,
                          const Mollifier& m, const Normalization& norm, int mass_power = 0) {
  const SymbolTable table = build_symbol_table(spec);
  DecayFit fit;
  fit.lx = lx;
  fit.ly = ly;
  fit.mass_power = mass_power;
  fit.predicted = -(spec.d - 2.0) - lx - ly;
  for (double t : t_list) {
    const LatticeKernel k = lattice_kernel(table, t, m, norm);
    fit.t.push_back(t);
    fit.max_abs.push_back(difference_sup(k, lx, ly) *
                          std::pow(1.0 + spec.m2 * t * t, mass_power));
  }
  fit.slope = loglog_slope(fit.t, fit.max_abs);
  double mean_resid = 0.0;
  for (std::size_t i = 0; i < fit.t.size(); ++i)
    mean_resid += std::log(fit.max_abs[i]) - fit.slope * std::log(fit.t[i]);
  fit.constant = std::exp(mean_resid / static_cast<double>(fit.t.size()));
  return fit;
}

struct GapReport {
  int l = 0;
  std::vector<double> t;
  /// max_x |grad^l phi_t^*(x) - D^l phi_t(x)|.
  std::vector<double> gap;
  /// gap * t^{(d-2)+l+1}.
  std::vector<double> normalized;
  /// Lattice and continuum values at x = 0.
  std::vector<double> lattice_origin;
  std::vector<double> continuum_origin;
  double slope = 0.0;
};

/// Lattice kernel against the continuum kernel of the same rescaled
/// operator, compared at the point map x -> x (c = 1): the continuum side
/// uses (s a, s m2) and the multiplier s, s = 3/B. Differences are compared
/// in direction 0 for l = 1.
inline GapReport discrete_continuum_gap(const LatticeSpec& spec, std::span<const double> t_list,
                                        int l, const Mollifier& m, const Normalization& norm) {
  detail::require(l == 0 || l == 1, "lattice_kernels", "discrete_continuum_gap",
                  "only l = 0 or 1 is supported");
  const SymbolTable table = build_symbol_table(spec);
  const double s = 3.0 / table.B;
  const int d = spec.d;
  Eigen::MatrixXd A = s * spec.matrix();
  const Eigen::LLT<Eigen::MatrixXd> llt(A);
  const double det = A.determinant();
  GapReport rep;
  rep.l = l;
  for (double t : t_list) {
    LatticeKernel k = lattice_kernel(table, t, m, norm);
    if (l == 1) k = difference(k, 0, +1);
    // Sites inside the support box; outside it both kernels vanish.
    const int R = static_cast<int>(std::floor(t)) + 1;
    std::vector<std::array<int, 3>> sites;
    std::array<int, 3> x{0, 0, 0};
    const int span = 2 * R + 1;
    std::size_t total = 1;
    for (int i = 0; i < d; ++i) total *= span;
    for (std::size_t idx = 0; idx < total; ++idx) {
      std::size_t rem = idx;
      for (int i = d - 1; i >= 0; --i) {
        x[i] = static_cast<int>(rem % span) - R;
        rem /= span;
      }
      sites.push_back(x);
    }
    // Radial profiles are shared by every site with the same rho.
    std::map<double, std::size_t> slot;
    std::vector<double> rhos;
    std::vector<Eigen::VectorXd> ainv(sites.size());
    std::vector<double> site_rho(sites.size());
    for (std::size_t i = 0; i < sites.size(); ++i) {
      Eigen::VectorXd xv(d);
      for (int c = 0; c < d; ++c) xv(c) = sites[i][c];
      ainv[i] = llt.solve(xv);
      site_rho[i] = std::sqrt(std::max(0.0, xv.dot(ainv[i])));
      if (slot.emplace(site_rho[i], rhos.size()).second) rhos.push_back(site_rho[i]);
    }
    std::vector<ContinuumProfile> prof(rhos.size());
    parallel_for(rhos.size(), [&](std::size_t i) {
      prof[i] = continuum_profile(m, norm, d, det, s * spec.m2, t, rhos[i]);
    });
    double gap = 0.0;
    for (std::size_t i = 0; i < sites.size(); ++i) {
      const ContinuumProfile& p = prof[slot.at(site_rho[i])];
      double c = p.g;
      if (l == 1) c = site_rho[i] > 0 ? p.dg * ainv[i](0) / site_rho[i] : 0.0;
      gap = std::max(gap, std::abs(k.at(sites[i]) - s * c));
    }
    rep.t.push_back(t);
    rep.gap.push_back(gap);
    rep.normalized.push_back(gap * std::pow(t, (d - 2.0) + l + 1.0));
    rep.lattice_origin.push_back(k.at({0, 0, 0}));
    rep.continuum_origin.push_back(s * prof[slot.at(0.0)].g);
  }
  rep.slope = loglog_slope(rep.t, rep.gap);
  return rep;
}

struct MassSweep {
  double t = 0.0;
  /// Spectral bound shared by every mass: max a* + max m2.
  double B = 0.0;
  std::vector<double> m2;
  std::vector<LatticeKernel> kernels;
  /// phi_t(0) per mass.
  std::vector<double> origin;
  /// Whether origin values decrease along m2_list (reported only).
  bool monotone = true;
};

/// Kernels at fixed t for each mass, all from one symbol table.
inline MassSweep mass_family_sweep(const LatticeSpec& spec, std::span<const double> m2_list,
                                   double t, const Mollifier& m, const Normalization& norm) {
  LatticeSpec base = spec;
  base.m2 = 0.0;
  const SymbolTable table0 = build_symbol_table(base);
  MassSweep sweep;
  sweep.t = t;
  const double m2_top = m2_list.empty() ? 0.0 : *std::max_element(m2_list.begin(), m2_list.end());
  for (double m2 : m2_list)
    detail::require(m2 >= 0 && m2 <= spec.m2_max, "lattice_kernels", "mass_family_sweep",
                    "mass outside [0, m2_max]: " + std::to_string(m2));
  sweep.B = table0.B + m2_top;
  const DiscreteWeightFamily family(m, norm, sweep.B);
  const RescaledWeight w = family.at(t);
  for (double m2 : m2_list) {
    SymbolTable table = with_mass(table0, m2);
    table.B = sweep.B;
    LatticeKernel k = lattice_kernel(table, w);
    sweep.m2.push_back(m2);
    sweep.origin.push_back(k.values[0]);
    sweep.kernels.push_back(std::move(k));
  }
  for (std::size_t i = 1; i < sweep.origin.size(); ++i)
    if (sweep.m2[i] > sweep.m2[i - 1] && sweep.origin[i] > sweep.origin[i - 1]) sweep.monotone = false;
  return sweep;
}

}  // namespace frd

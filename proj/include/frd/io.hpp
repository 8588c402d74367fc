#pragma once

#include <cstdint>
#include <istream>
#include <ostream>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "frd/error.hpp"
#include "frd/graph.hpp"
#include "frd/lattice.hpp"
#include "frd/sampler.hpp"

namespace frd {

/// Version stamped on the first line of every CSV written here.
inline constexpr int kFormatVersion = 1;

namespace detail {
template <typename T>
void put(std::ostream& os, T v) {
  os.write(reinterpret_cast<const char*>(&v), sizeof(T));
}

template <typename T>
T get(std::istream& is, const char* op) {
  T v{};
  if (!is.read(reinterpret_cast<char*>(&v), sizeof(T)))
    throw Error("io", op, "truncated input");
  return v;
}

inline void csv_banner(std::ostream& os, const char* kind) {
  os << "# frd " << kind << " v" << kFormatVersion << '\n';
}
}  // namespace detail

/// Binary kernel layout: int32 d, int32 N, double t, double m2, double B,
/// then N^d doubles in row-major order (native endianness). A block is
/// stored with d = 2 and N = n.
struct KernelFile {
  std::int32_t d = 0;
  std::int32_t N = 0;
  double t = 0.0;
  double m2 = 0.0;
  double B = 0.0;
  std::vector<double> values;
};

inline void write_kernel_binary(std::ostream& os, const KernelFile& k) {
  detail::put<std::int32_t>(os, k.d);
  detail::put<std::int32_t>(os, k.N);
  detail::put(os, k.t);
  detail::put(os, k.m2);
  detail::put(os, k.B);
  os.write(reinterpret_cast<const char*>(k.values.data()),
           static_cast<std::streamsize>(k.values.size() * sizeof(double)));
}

inline void write_kernel_binary(std::ostream& os, const LatticeKernel& k) {
  write_kernel_binary(os, KernelFile{k.d, k.N, k.t, k.m2, k.B, k.values});
}

inline void write_block_binary(std::ostream& os, const ScaleBlock& b, const GraphOperator& op) {
  KernelFile f{2, static_cast<std::int32_t>(b.matrix.rows()), b.upper, op.m2, op.B, {}};
  f.values.resize(static_cast<std::size_t>(b.matrix.size()));
  for (Eigen::Index x = 0; x < b.matrix.rows(); ++x)
    for (Eigen::Index y = 0; y < b.matrix.cols(); ++y)
      f.values[static_cast<std::size_t>(x * b.matrix.cols() + y)] = b.matrix(x, y);
  write_kernel_binary(os, f);
}

inline KernelFile read_kernel_binary(std::istream& is) {
  KernelFile k;
  k.d = detail::get<std::int32_t>(is, "read_kernel_binary");
  k.N = detail::get<std::int32_t>(is, "read_kernel_binary");
  if (k.d < 1 || k.d > 3 || k.N < 1) throw Error("io", "read_kernel_binary", "bad header");
  k.t = detail::get<double>(is, "read_kernel_binary");
  k.m2 = detail::get<double>(is, "read_kernel_binary");
  k.B = detail::get<double>(is, "read_kernel_binary");
  std::size_t n = 1;
  for (int i = 0; i < k.d; ++i) n *= static_cast<std::size_t>(k.N);
  k.values.resize(n);
  if (!is.read(reinterpret_cast<char*>(k.values.data()),
               static_cast<std::streamsize>(n * sizeof(double))))
    throw Error("io", "read_kernel_binary", "truncated values");
  return k;
}

/// Columns x0..x{d-1},value with coordinates in 0..N-1.
inline void write_kernel_csv(std::ostream& os, const LatticeKernel& k) {
  detail::csv_banner(os, "kernel");
  for (int i = 0; i < k.d; ++i) os << 'x' << i << ',';
  os << "value\n";
  os.precision(17);
  for (std::size_t idx = 0; idx < k.values.size(); ++idx) {
    const auto x = unravel(idx, k.d, k.N);
    for (int i = 0; i < k.d; ++i) os << x[i] << ',';
    os << k.values[idx] << '\n';
  }
}

inline nlohmann::json block_certificate(const ScaleBlock& b) {
  return {{"j", b.j},
          {"L_ratio", b.L_ratio},
          {"lower", b.lower},
          {"upper", b.upper},
          {"nodes", b.nodes},
          {"min_eig", b.min_eig},
          {"max_eig", b.max_eig},
          {"max_out_of_range", b.max_out_of_range},
          {"sup", b.sup},
          {"asymmetry", b.asymmetry},
          {"format_version", kFormatVersion}};
}

/// Columns t,l_x,l_y,max_abs,fitted_exponent.
inline void write_decay_csv(std::ostream& os, const DecayFit& f) {
  detail::csv_banner(os, "decay");
  os << "t,l_x,l_y,max_abs,fitted_exponent\n";
  os.precision(17);
  for (std::size_t i = 0; i < f.t.size(); ++i)
    os << f.t[i] << ',' << f.lx << ',' << f.ly << ',' << f.max_abs[i] << ',' << f.slope << '\n';
}

/// Sample dump: int32 backend, int64 sites, int32 j_min, int32 j_max,
/// uint64 seed, int64 replicates, then per replicate every component
/// (j ascending) followed by the total, each `sites` doubles.
inline void write_samples_binary(std::ostream& os, const FieldSamples& s) {
  detail::put<std::int32_t>(os, static_cast<std::int32_t>(s.backend));
  detail::put<std::int64_t>(os, static_cast<std::int64_t>(s.sites));
  detail::put<std::int32_t>(os, s.j_min);
  detail::put<std::int32_t>(os, s.j_max);
  detail::put<std::uint64_t>(os, s.seed);
  detail::put<std::int64_t>(os, static_cast<std::int64_t>(s.replicates));
  const auto bytes = static_cast<std::streamsize>(s.sites * sizeof(double));
  for (std::size_t r = 0; r < s.replicates; ++r) {
    for (int j = s.j_min; j <= s.j_max; ++j)
      os.write(reinterpret_cast<const char*>(s.component(r, j).data()), bytes);
    os.write(reinterpret_cast<const char*>(s.total(r).data()), bytes);
  }
}

inline FieldSamples read_samples_binary(std::istream& is) {
  FieldSamples s;
  const char* op = "read_samples_binary";
  s.backend = static_cast<SamplerBackend>(detail::get<std::int32_t>(is, op));
  s.sites = static_cast<std::size_t>(detail::get<std::int64_t>(is, op));
  s.j_min = detail::get<std::int32_t>(is, op);
  s.j_max = detail::get<std::int32_t>(is, op);
  s.seed = detail::get<std::uint64_t>(is, op);
  s.replicates = static_cast<std::size_t>(detail::get<std::int64_t>(is, op));
  if (s.j_max < s.j_min) throw Error("io", op, "bad scale range");
  s.components.resize(s.replicates * s.scales() * s.sites);
  s.totals.resize(s.replicates * s.sites);
  const auto bytes = static_cast<std::streamsize>(s.sites * sizeof(double));
  for (std::size_t r = 0; r < s.replicates; ++r) {
    for (std::size_t j = 0; j < s.scales(); ++j)
      if (!is.read(reinterpret_cast<char*>(s.components.data() + (r * s.scales() + j) * s.sites), bytes))
        throw Error("io", op, "truncated samples");
    if (!is.read(reinterpret_cast<char*>(s.totals.data() + r * s.sites), bytes))
      throw Error("io", op, "truncated samples");
  }
  return s;
}

/// Columns x,y,empirical,oracle,standard_error,z.
inline void write_covariance_csv(std::ostream& os, const CovarianceReport& r,
                                 const Eigen::MatrixXd& oracle) {
  detail::csv_banner(os, "covariance");
  os << "x,y,empirical,oracle,standard_error,z\n";
  os.precision(17);
  for (Eigen::Index x = 0; x < r.z.rows(); ++x)
    for (Eigen::Index y = 0; y < r.z.cols(); ++y)
      os << x << ',' << y << ',' << r.empirical(x, y) << ',' << oracle(x, y) << ','
         << r.standard_error(x, y) << ',' << r.z(x, y) << '\n';
}

}  // namespace frd

#pragma once

#include <Eigen/Dense>

#include <cmath>
#include <cstddef>
#include <cstdint>
#include <random>
#include <span>
#include <string>
#include <vector>

#include "frd/error.hpp"
#include "frd/fft.hpp"
#include "frd/graph.hpp"
#include "frd/lattice.hpp"
#include "frd/parallel.hpp"
#include "frd/scales.hpp"

namespace frd {

enum class SamplerBackend : std::int32_t { torus = 0, graph = 1 };

struct SamplerConfig {
  SamplerBackend backend = SamplerBackend::graph;
  LatticeSpec lattice;
  /// Graph backend operator; must outlive the sampler call.
  const GraphOperator* op = nullptr;
  ScalePlan plan;
  std::uint64_t seed = 1;
  std::size_t replicates = 1000;
  /// Project out constants when the operator is massless.
  bool deflate = true;
};

/// Independent generator for the substream (seed, scale, replicate).
inline std::mt19937_64 substream(std::uint64_t seed, int j, std::uint64_t replicate) {
  std::seed_seq seq{static_cast<std::uint32_t>(seed), static_cast<std::uint32_t>(seed >> 32),
                    static_cast<std::uint32_t>(j), static_cast<std::uint32_t>(replicate),
                    static_cast<std::uint32_t>(replicate >> 32)};
  return std::mt19937_64(seq);
}

/// One realization: per-scale components and their sum.
struct FieldSample {
  std::vector<std::vector<double>> components;
  std::vector<double> total;
};

/// All replicates, stored flat: components[(r * scales + j) * sites + x].
struct FieldSamples {
  SamplerBackend backend = SamplerBackend::graph;
  std::size_t sites = 0;
  int j_min = 0;
  int j_max = 0;
  std::uint64_t seed = 0;
  std::size_t replicates = 0;
  std::vector<double> components;
  std::vector<double> totals;

  std::size_t scales() const { return static_cast<std::size_t>(j_max - j_min + 1); }

  std::span<const double> component(std::size_t r, int j) const {
    return {components.data() + (r * scales() + static_cast<std::size_t>(j - j_min)) * sites, sites};
  }
  std::span<const double> total(std::size_t r) const {
    return {totals.data() + r * sites, sites};
  }

  FieldSample sample(std::size_t r) const {
    FieldSample s;
    for (int j = j_min; j <= j_max; ++j) {
      const auto c = component(r, j);
      s.components.emplace_back(c.begin(), c.end());
    }
    const auto t = total(r);
    s.total.assign(t.begin(), t.end());
    return s;
  }
};

namespace detail {
inline FieldSamples allocate_samples(const SamplerConfig& cfg, std::size_t sites) {
  FieldSamples out;
  out.backend = cfg.backend;
  out.sites = sites;
  out.j_min = cfg.plan.j_min;
  out.j_max = cfg.plan.j_max;
  out.seed = cfg.seed;
  out.replicates = cfg.replicates;
  out.components.assign(cfg.replicates * out.scales() * sites, 0.0);
  out.totals.assign(cfg.replicates * sites, 0.0);
  return out;
}

inline void sum_components(FieldSamples& s, std::size_t r) {
  double* total = s.totals.data() + r * s.sites;
  for (int j = s.j_min; j <= s.j_max; ++j) {
    const auto c = s.component(r, j);
    for (std::size_t x = 0; x < s.sites; ++x) total[x] += c[x];
  }
}
}  // namespace detail

/// Fourier-mode sampler: X_j = IFFT(sqrt(v_j) FFT(w)) with real white noise w.
inline FieldSamples sample_torus(const SamplerConfig& cfg, const Mollifier& m,
                                 const Normalization& norm) {
  detail::require(cfg.backend == SamplerBackend::torus, "gff_sampler", "sample_torus",
                  "config backend is not torus");
  const SymbolTable table = build_symbol_table(cfg.lattice);
  const auto scales = torus_scale_multipliers(table, cfg.plan, m, norm, cfg.deflate);
  const int d = cfg.lattice.d, N = cfg.lattice.N;
  const std::size_t sites = table.values.size();
  std::vector<std::vector<double>> roots(scales.per_scale.size());
  for (std::size_t j = 0; j < roots.size(); ++j) {
    roots[j].resize(sites);
    for (std::size_t i = 0; i < sites; ++i)
      roots[j][i] = std::sqrt(std::max(0.0, scales.per_scale[j][i]));
  }
  FieldSamples out = detail::allocate_samples(cfg, sites);
  const FftPlan forward(d, N, FFTW_FORWARD), backward(d, N, FFTW_BACKWARD);
  const double inv = 1.0 / static_cast<double>(sites);
  parallel_for(cfg.replicates, [&](std::size_t r) {
    ComplexBuffer buf(sites);
    for (int j = cfg.plan.j_min; j <= cfg.plan.j_max; ++j) {
      auto rng = substream(cfg.seed, j, r);
      std::normal_distribution<double> normal;
      for (std::size_t i = 0; i < sites; ++i) buf[i] = normal(rng);
      forward.execute(buf);
      const auto& root = roots[static_cast<std::size_t>(j - cfg.plan.j_min)];
      for (std::size_t i = 0; i < sites; ++i) buf[i] *= root[i];
      backward.execute(buf);
      double* dst = out.components.data() +
                    (r * out.scales() + static_cast<std::size_t>(j - cfg.plan.j_min)) * sites;
      for (std::size_t i = 0; i < sites; ++i) dst[i] = inv * buf[i].real();
    }
    detail::sum_components(out, r);
  });
  return out;
}

/// Symmetric square root of a PSD block. Negative eigenvalues below
/// -clip * max are a quality failure; smaller ones are clipped to 0.
inline Eigen::MatrixXd block_square_root(const ScaleBlock& b, double clip = 1e-8) {
  const Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(b.matrix);
  Eigen::VectorXd ev = es.eigenvalues();
  const double top = ev.maxCoeff();
  const double bottom = ev.minCoeff();
  if (bottom < -clip * top)
    throw BlockQualityError("gff_sampler", "sample_graph",
                            "block j = " + std::to_string(b.j) + " has eigenvalue " +
                                std::to_string(bottom) + " below -" + std::to_string(clip) +
                                " * " + std::to_string(top));
  for (Eigen::Index i = 0; i < ev.size(); ++i) ev(i) = std::sqrt(std::max(0.0, ev(i)));
  return es.eigenvectors() * ev.asDiagonal() * es.eigenvectors().transpose();
}

/// Matrix square root sampler: X_j = C_j^{1/2} xi_j.
inline FieldSamples sample_graph(const SamplerConfig& cfg, const std::vector<ScaleBlock>& blocks) {
  detail::require(cfg.backend == SamplerBackend::graph && cfg.op != nullptr, "gff_sampler",
                  "sample_graph", "config backend is not graph");
  const std::size_t n = cfg.op->size();
  detail::require(n <= 4096, "gff_sampler", "sample_graph", "graph larger than 4096 vertices");
  detail::require(blocks.size() == static_cast<std::size_t>(cfg.plan.block_count()), "gff_sampler",
                  "sample_graph", "block count does not match the scale plan");
  std::vector<Eigen::MatrixXd> roots(blocks.size());
  parallel_for(blocks.size(), [&](std::size_t j) { roots[j] = block_square_root(blocks[j]); });
  const bool project = cfg.deflate && cfg.op->singular();
  const auto& mu = cfg.op->graph->measure();
  const double mu_total = cfg.op->graph->total_measure();
  FieldSamples out = detail::allocate_samples(cfg, n);
  parallel_for(cfg.replicates, [&](std::size_t r) {
    Eigen::VectorXd xi(n);
    for (int j = cfg.plan.j_min; j <= cfg.plan.j_max; ++j) {
      auto rng = substream(cfg.seed, j, r);
      std::normal_distribution<double> normal;
      for (std::size_t i = 0; i < n; ++i) xi(i) = normal(rng);
      Eigen::VectorXd x = roots[static_cast<std::size_t>(j - cfg.plan.j_min)] * xi;
      if (project) {
        double mean = 0.0;
        for (std::size_t i = 0; i < n; ++i) mean += mu[i] * x(i);
        x.array() -= mean / mu_total;
      }
      double* dst = out.components.data() +
                    (r * out.scales() + static_cast<std::size_t>(j - cfg.plan.j_min)) * n;
      for (std::size_t i = 0; i < n; ++i) dst[i] = x(i);
    }
    detail::sum_components(out, r);
  });
  return out;
}

/// Builds the plan's blocks and samples them.
inline FieldSamples sample_graph(const SamplerConfig& cfg, const Mollifier& m,
                                 const Normalization& norm) {
  detail::require(cfg.op != nullptr, "gff_sampler", "sample_graph", "no graph operator");
  const auto dist = cfg.op->graph->distance_table();
  std::vector<ScaleBlock> blocks;
  for (int j = cfg.plan.j_min; j <= cfg.plan.j_max; ++j)
    blocks.push_back(scale_block(*cfg.op, cfg.plan, j, m, norm, dist));
  return sample_graph(cfg, blocks);
}

struct CovarianceReport {
  std::size_t samples = 0;
  Eigen::MatrixXd empirical;
  Eigen::MatrixXd standard_error;
  Eigen::MatrixXd z;
  double max_abs_z = 0.0;
};

/// Entrywise z-scores of the empirical covariance (mean taken as zero)
/// against `oracle`, with se^2 = (c_xx c_yy + c_xy^2) / n.
/// `rows` holds one field per sample, each of length oracle.rows().
inline CovarianceReport covariance_report(std::span<const double> rows, std::size_t count,
                                          const Eigen::MatrixXd& oracle,
                                          std::size_t min_samples = 1000) {
  const auto n = oracle.rows();
  detail::require(count >= min_samples, "gff_sampler", "covariance_report",
                  "need at least " + std::to_string(min_samples) + " samples, got " +
                      std::to_string(count));
  detail::require(rows.size() == count * static_cast<std::size_t>(n), "gff_sampler",
                  "covariance_report", "sample array does not match the oracle size");
  const Eigen::Map<const Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>>
      X(rows.data(), static_cast<Eigen::Index>(count), n);
  CovarianceReport rep;
  rep.samples = count;
  rep.empirical = (X.transpose() * X) / static_cast<double>(count);
  rep.standard_error.resize(n, n);
  rep.z.resize(n, n);
  for (Eigen::Index x = 0; x < n; ++x) {
    for (Eigen::Index y = 0; y < n; ++y) {
      const double c = rep.empirical(x, y);
      const double se =
          std::sqrt((rep.empirical(x, x) * rep.empirical(y, y) + c * c) / static_cast<double>(count));
      rep.standard_error(x, y) = se;
      rep.z(x, y) = se > 0 ? (c - oracle(x, y)) / se : 0.0;
      rep.max_abs_z = std::max(rep.max_abs_z, std::abs(rep.z(x, y)));
    }
  }
  return rep;
}

/// Rows of one scale component across replicates.
inline std::vector<double> component_rows(const FieldSamples& s, int j) {
  std::vector<double> rows;
  rows.reserve(s.replicates * s.sites);
  for (std::size_t r = 0; r < s.replicates; ++r) {
    const auto c = s.component(r, j);
    rows.insert(rows.end(), c.begin(), c.end());
  }
  return rows;
}

/// Circulant matrix K(x, y) = k(x - y) from a torus kernel column.
inline Eigen::MatrixXd circulant(const std::vector<double>& column, int d, int N) {
  const auto n = static_cast<Eigen::Index>(column.size());
  Eigen::MatrixXd K(n, n);
  for (Eigen::Index x = 0; x < n; ++x) {
    const auto kx = unravel(static_cast<std::size_t>(x), d, N);
    for (Eigen::Index y = 0; y < n; ++y) {
      const auto ky = unravel(static_cast<std::size_t>(y), d, N);
      K(x, y) = column[ravel({kx[0] - ky[0], kx[1] - ky[1], kx[2] - ky[2]}, d, N)];
    }
  }
  return K;
}

}  // namespace frd

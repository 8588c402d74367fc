#include <gtest/gtest.h>

#include <Eigen/Dense>

#include <cmath>
#include <cstring>
#include <sstream>
#include <vector>

#include "frd/io.hpp"
#include "frd/sampler.hpp"

namespace {

using namespace frd;

const Mollifier& mol() { return default_mollifier(); }
Normalization norm1() { return normalization_constant(mol(), 1.0); }

SamplerConfig graph_config(const GraphOperator& op, std::size_t replicates, std::uint64_t seed) {
  SamplerConfig cfg;
  cfg.backend = SamplerBackend::graph;
  cfg.op = &op;
  cfg.plan = default_plan(op, mol(), norm1(), true);
  cfg.seed = seed;
  cfg.replicates = replicates;
  return cfg;
}

std::vector<double> total_rows(const FieldSamples& s) { return s.totals; }

TEST(Substream, DistinctKeysGiveDistinctStreams) {
  auto a = substream(7, 0, 0), b = substream(7, 1, 0), c = substream(7, 0, 1), d = substream(8, 0, 0);
  const auto x = a();
  EXPECT_NE(x, b());
  EXPECT_NE(x, c());
  EXPECT_NE(x, d());
  EXPECT_EQ(x, substream(7, 0, 0)());
  // Replicate indices above 2^32 stay distinct.
  EXPECT_NE(substream(7, 0, 1)(), substream(7, 0, (1ull << 32) + 1)());
}

TEST(SampleGraph, TwoVertexVarianceAndCovariance) {
  const WeightedGraph g(2, {{0, 1, 1.0}});
  const auto op = make_resolvent(g, 1.0);
  const auto s = sample_graph(graph_config(op, 100000, 42), mol(), norm1());
  Eigen::MatrixXd oracle(2, 2);
  oracle << 2.0 / 3, 1.0 / 3, 1.0 / 3, 2.0 / 3;
  const auto rep = covariance_report(s.totals, s.replicates, oracle);
  EXPECT_LE(std::abs(rep.z(0, 0)), 3.0);
  EXPECT_LE(std::abs(rep.z(1, 1)), 3.0);
  EXPECT_LE(std::abs(rep.z(0, 1)), 3.0);
}

TEST(SampleGraph, TotalIsExactSumOfComponents) {
  const auto g = cycle_graph(8);
  const auto op = make_resolvent(g, 0.5);
  const auto s = sample_graph(graph_config(op, 20, 3), mol(), norm1());
  for (std::size_t r = 0; r < s.replicates; ++r)
    for (std::size_t x = 0; x < s.sites; ++x) {
      double sum = 0.0;
      for (int j = s.j_min; j <= s.j_max; ++j) sum += s.component(r, j)[x];
      EXPECT_EQ(sum, s.total(r)[x]);
    }
}

std::string dump(const FieldSamples& s) {
  std::ostringstream os;
  write_samples_binary(os, s);
  return os.str();
}

TEST(SampleGraph, DeterministicAcrossThreadCounts) {
  const auto g = cycle_graph(16);
  const auto op = make_resolvent(g, 1.0);
  const auto cfg = graph_config(op, 500, 99);
  set_thread_limit(1);
  const auto one = dump(sample_graph(cfg, mol(), norm1()));
  set_thread_limit(4);
  const auto four = dump(sample_graph(cfg, mol(), norm1()));
  set_thread_limit(0);
  const auto again = dump(sample_graph(cfg, mol(), norm1()));
  EXPECT_EQ(one, four);
  EXPECT_EQ(one, again);
  auto other = cfg;
  other.seed = 100;
  EXPECT_NE(one, dump(sample_graph(other, mol(), norm1())));
}

TEST(SampleGraph, SixteenCycleCovariance) {
  const auto g = cycle_graph(16);
  const auto op = make_resolvent(g, 1.0);
  const auto s = sample_graph(graph_config(op, 10000, 2024), mol(), norm1());
  const auto rep = covariance_report(s.totals, s.replicates, dense_green(op));
  RecordProperty("max_abs_z", std::to_string(rep.max_abs_z));
  EXPECT_LE(rep.max_abs_z, 4.0);
}

TEST(SampleGraph, MasslessMeanIsProjected) {
  const auto g = cycle_graph(12);
  const auto op = make_laplacian(g);
  const auto s = sample_graph(graph_config(op, 2000, 5), mol(), norm1());
  for (std::size_t r = 0; r < 10; ++r) {
    double mean = 0.0;
    for (double v : s.total(r)) mean += v;
    EXPECT_NEAR(mean, 0.0, 1e-10);
  }
  const auto rep = covariance_report(s.totals, s.replicates, dense_green(op, true));
  EXPECT_LE(rep.max_abs_z, 4.0);
}

TEST(SampleGraph, SingleBlockReproducesItsCovariance) {
  const auto g = path_graph(4);
  const auto op = make_resolvent(g, 0.5);
  SamplerConfig cfg = graph_config(op, 20000, 11);
  cfg.plan.j_min = cfg.plan.j_max = 1;
  const auto block = scale_block(op, cfg.plan, 1, mol(), norm1());
  const auto s = sample_graph(cfg, {block});
  const auto rep = covariance_report(s.totals, s.replicates, block.matrix);
  EXPECT_LE(rep.max_abs_z, 3.0);
}

TEST(SampleGraph, LocalityOfEachScale) {
  const auto g = cycle_graph(16);
  const auto op = make_resolvent(g, 1.0);
  const auto cfg = graph_config(op, 10000, 77);
  const auto s = sample_graph(cfg, mol(), norm1());
  const auto dist = g.distance_table();
  for (int j = 0; j <= 2; ++j) {
    const auto block = scale_block(op, cfg.plan, j, mol(), norm1(), dist);
    const auto rows = component_rows(s, j);
    const auto rep = covariance_report(rows, s.replicates, block.matrix);
    const double range = std::pow(cfg.plan.L_ratio, j);
    for (std::size_t x = 0; x < 16; ++x)
      for (std::size_t y = 0; y < 16; ++y)
        if (dist[x * 16 + y] >= range) {
          EXPECT_EQ(block.matrix(x, y), 0.0);
          EXPECT_LE(std::abs(rep.z(x, y)), 4.0);
        }
  }
}

TEST(SampleGraph, BlockQualityFailure) {
  const auto g = path_graph(3);
  const auto op = make_resolvent(g, 1.0);
  SamplerConfig cfg = graph_config(op, 10, 1);
  cfg.plan.j_min = cfg.plan.j_max = 0;
  ScaleBlock bad;
  bad.matrix = Eigen::MatrixXd::Identity(3, 3);
  bad.matrix(2, 2) = -1e-3;
  EXPECT_THROW(sample_graph(cfg, {bad}), BlockQualityError);
  bad.matrix(2, 2) = -1e-12;  // within the clipping threshold
  EXPECT_NO_THROW(sample_graph(cfg, {bad}));
  cfg.plan.j_max = 1;
  EXPECT_THROW(sample_graph(cfg, {bad}), InvalidArgument);
}

TEST(CovarianceReport, StandardErrorScalesWithRootTwo) {
  const auto g = cycle_graph(8);
  const auto op = make_resolvent(g, 1.0);
  const auto s = sample_graph(graph_config(op, 8000, 8), mol(), norm1());
  const auto G = dense_green(op);
  const std::span<const double> all(s.totals);
  const auto half = covariance_report(all.first(4000 * 8), 4000, G);
  const auto full = covariance_report(all, 8000, G);
  for (Eigen::Index x = 0; x < 8; ++x)
    for (Eigen::Index y = 0; y < 8; ++y)
      EXPECT_NEAR(half.standard_error(x, y) / full.standard_error(x, y), std::sqrt(2.0),
                  0.1 * std::sqrt(2.0));
}

TEST(CovarianceReport, NeedsEnoughSamples) {
  const std::vector<double> rows(10 * 2, 0.0);
  EXPECT_THROW(covariance_report(rows, 10, Eigen::MatrixXd::Identity(2, 2)), InvalidArgument);
  EXPECT_THROW(covariance_report(rows, 10, Eigen::MatrixXd::Identity(3, 3), 1), InvalidArgument);
}

SamplerConfig torus_config(const LatticeSpec& spec, std::size_t replicates, std::uint64_t seed) {
  SamplerConfig cfg;
  cfg.backend = SamplerBackend::torus;
  cfg.lattice = spec;
  const auto table = build_symbol_table(spec);
  cfg.plan = default_torus_plan(table, mol(), norm1());
  cfg.seed = seed;
  cfg.replicates = replicates;
  return cfg;
}

TEST(SampleTorus, SiteVarianceMatchesGreen) {
  LatticeSpec spec;
  spec.d = 2;
  spec.N = 8;
  spec.a = {1, 0, 0, 1};
  spec.m2 = 0.5;
  const auto s = sample_torus(torus_config(spec, 10000, 31), mol(), norm1());
  const auto column = dense_torus_green(spec);
  const auto G = circulant(column, 2, 8);
  const auto rep = covariance_report(s.totals, s.replicates, G);
  for (Eigen::Index x : {0, 9, 27}) EXPECT_LE(std::abs(rep.z(x, x)), 3.0);
  EXPECT_LE(rep.max_abs_z, 4.5);
}

TEST(SampleTorus, ScalesAreUncorrelated) {
  LatticeSpec spec;
  spec.d = 1;
  spec.N = 16;
  spec.a = {1.0};
  spec.m2 = 0.3;
  const auto cfg = torus_config(spec, 10000, 5);
  const auto s = sample_torus(cfg, mol(), norm1());
  // Stack (X_j(0), X_{j'}(0)) and test the off-diagonal entry against 0.
  for (auto [j, k] : {std::pair{0, 1}, std::pair{1, 3}, std::pair{2, 4}}) {
    std::vector<double> rows;
    for (std::size_t r = 0; r < s.replicates; ++r) {
      rows.push_back(s.component(r, j)[0]);
      rows.push_back(s.component(r, k)[0]);
    }
    Eigen::MatrixXd oracle = Eigen::MatrixXd::Zero(2, 2);
    const auto rep = covariance_report(rows, s.replicates, oracle);
    EXPECT_LE(std::abs(rep.z(0, 1)), 3.0) << "j=" << j << " k=" << k;
  }
}

TEST(SampleTorus, DeterministicAndDeflation) {
  LatticeSpec spec;
  spec.d = 2;
  spec.N = 8;
  spec.a = {1, 0, 0, 1};
  spec.m2 = 0.0;
  auto cfg = torus_config(spec, 200, 17);
  set_thread_limit(1);
  const auto a = dump(sample_torus(cfg, mol(), norm1()));
  set_thread_limit(0);
  const auto s = sample_torus(cfg, mol(), norm1());
  EXPECT_EQ(a, dump(s));
  double mean = 0.0;
  for (double v : s.total(0)) mean += v;
  EXPECT_NEAR(mean, 0.0, 1e-10);
  cfg.deflate = false;
  EXPECT_THROW(sample_torus(cfg, mol(), norm1()), SingularOperatorError);
  cfg.backend = SamplerBackend::graph;
  EXPECT_THROW(sample_torus(cfg, mol(), norm1()), InvalidArgument);
}

}  // namespace

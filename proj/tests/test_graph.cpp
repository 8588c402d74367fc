#include <gtest/gtest.h>

#include <Eigen/Dense>

#include <cmath>
#include <random>
#include <sstream>
#include <vector>

#include "frd/graph.hpp"

namespace {

using namespace frd;

const Mollifier& mol() { return default_mollifier(); }
Normalization norm1() { return normalization_constant(mol(), 1.0); }

std::vector<double> random_vector(std::size_t n, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> g;
  std::vector<double> u(n);
  for (double& v : u) v = g(rng);
  return u;
}

double max_abs(const std::vector<double>& v) {
  double s = 0.0;
  for (double x : v) s = std::max(s, std::abs(x));
  return s;
}

TEST(WeightedGraph, MeasureAndDistances) {
  const auto g = cycle_graph(6, 2.0);
  for (double m : g.measure()) EXPECT_EQ(m, 4.0);
  EXPECT_EQ(g.total_measure(), 24.0);
  const auto d = g.distances_from(0);
  EXPECT_EQ(d, (std::vector<int>{0, 1, 2, 3, 2, 1}));
}

TEST(WeightedGraph, RejectsInvalidInput) {
  EXPECT_THROW(WeightedGraph(3, {{0, 1, 1.0}}), InvalidArgument);           // isolated vertex 2
  EXPECT_THROW(WeightedGraph(2, {{0, 1, 1.0}, {1, 0, 2.0}}), InvalidArgument);  // asymmetric
  EXPECT_THROW(WeightedGraph(2, {{0, 1, -1.0}}), InvalidArgument);
  EXPECT_THROW(WeightedGraph(2, {{0, 2, 1.0}}), InvalidArgument);
  EXPECT_NO_THROW(WeightedGraph(2, {{0, 1, 1.5}, {1, 0, 1.5}}));
}

TEST(ParseEdgeList, ReadsCommentsAndBlankLines) {
  std::istringstream in("# header\n0 1 1.0\n\n1 2 0.5  # trailing comment\n2 0 2\n");
  const auto g = parse_edge_list(in);
  EXPECT_EQ(g.size(), 3u);
  EXPECT_EQ(g.edges().size(), 3u);
  EXPECT_DOUBLE_EQ(g.measure()[0], 3.0);
  EXPECT_DOUBLE_EQ(g.measure()[1], 1.5);
}

TEST(ParseEdgeList, MalformedLines) {
  std::istringstream a("0 1\n");
  EXPECT_THROW(parse_edge_list(a), InvalidArgument);
  std::istringstream b("0 1 1.0 extra\n");
  EXPECT_THROW(parse_edge_list(b), InvalidArgument);
  std::istringstream c("0 -1 1.0\n");
  EXPECT_THROW(parse_edge_list(c), InvalidArgument);
  std::istringstream d("0 1 x\n");
  EXPECT_THROW(parse_edge_list(d), InvalidArgument);
}

TEST(LaplacianApply, ConstantsAreHarmonic) {
  const auto g = random_graph(20, 0.2, 3);
  const auto op = make_laplacian(g);
  const auto out = laplacian_apply(op, std::vector<double>(20, 1.7));
  EXPECT_LE(max_abs(out), 1e-14);
}

TEST(LaplacianApply, TwoVertexEdge) {
  const WeightedGraph g(2, {{0, 1, 1.0}});
  const auto out = laplacian_apply(make_laplacian(g), {1.0, 0.0});
  EXPECT_EQ(out, (std::vector<double>{1.0, -1.0}));
}

TEST(LaplacianApply, VariantsAndDimensionCheck) {
  const WeightedGraph g(2, {{0, 1, 1.0}});
  const auto k = laplacian_apply(make_killed(g, 0.25), {1.0, 0.0});
  EXPECT_DOUBLE_EQ(k[0], 0.25 + 0.75);
  EXPECT_DOUBLE_EQ(k[1], -0.25);
  const auto r = laplacian_apply(make_resolvent(g, 0.5), {1.0, 0.0});
  EXPECT_DOUBLE_EQ(r[0], 1.5);
  EXPECT_DOUBLE_EQ(r[1], -1.0);
  EXPECT_THROW(laplacian_apply(make_laplacian(g), {1.0}), InvalidArgument);
  EXPECT_THROW(make_killed(g, 1.0), InvalidArgument);
  EXPECT_THROW(make_killed(g, 0.0), InvalidArgument);
  EXPECT_THROW(make_resolvent(g, -0.1), InvalidArgument);
  EXPECT_THROW(make_resolvent(g, 2.0, 1.0), InvalidArgument);
}

TEST(LaplacianApply, DirichletForm) {
  const auto g = random_graph(30, 0.15, 11);
  const auto op = make_laplacian(g);
  const auto u = random_vector(30, 5);
  const auto Lu = laplacian_apply(op, u);
  double lhs = 0.0;
  for (std::size_t x = 0; x < 30; ++x) lhs += g.measure()[x] * u[x] * Lu[x];
  double rhs = 0.0;  // each unordered edge appears twice in the double sum
  for (const Edge& e : g.edges()) rhs += e.weight * (u[e.x] - u[e.y]) * (u[e.x] - u[e.y]);
  EXPECT_NEAR(lhs, rhs, 1e-12 * rhs);
}

TEST(ChebyshevApply, SupportOfDelta) {
  for (const auto& g : {cycle_graph(20), random_graph(40, 0.05, 2)}) {
    const auto op = make_resolvent(g, 0.3);
    const auto w = DiscreteWeightFamily(mol(), norm1(), op.B).at(3.0);
    for (std::size_t x : {0u, 7u}) {
      std::vector<double> delta(g.size(), 0.0);
      delta[x] = 1.0;
      const auto out = chebyshev_apply(op, w, delta);
      const auto d = g.distances_from(x);
      double beyond = 0.0, within = 0.0;
      for (std::size_t y = 0; y < g.size(); ++y)
        (d[y] > 3 ? beyond : within) = std::max(d[y] > 3 ? beyond : within, std::abs(out[y]));
      EXPECT_GT(within, 0.0);
      EXPECT_LE(beyond, 1e-12 * within);
    }
  }
}

TEST(ChebyshevApply, SubUnitScaleIsMultipleOfIdentity) {
  const auto g = random_graph(12, 0.3, 4);
  const auto op = make_laplacian(g);
  const auto w = DiscreteWeightFamily(mol(), norm1(), op.B).at(0.6);
  ASSERT_EQ(w.weight.coeffs.size(), 1u);
  const auto u = random_vector(12, 9);
  const auto out = chebyshev_apply(op, w, u);
  for (std::size_t i = 0; i < u.size(); ++i)
    EXPECT_DOUBLE_EQ(out[i], w.multiplier * w.weight.coeffs[0] * u[i]);
}

TEST(ChebyshevApply, MatchesDenseEigenOracle) {
  for (std::uint64_t seed : {1u, 2u, 3u}) {
    const auto g = random_graph(12, 0.3, seed);
    for (const auto& op : {make_laplacian(g), make_killed(g, 0.6), make_resolvent(g, 0.8)}) {
      const SpectralOracle so(op);
      for (double t : {1.5, 4.0, 9.7}) {
        const auto w = DiscreteWeightFamily(mol(), norm1(), op.B).at(t);
        const Eigen::MatrixXd W = so.function([&](double lambda) {
          return w.multiplier * eval_discrete_weight_direct(mol(), w.argument_scale * lambda, t);
        });
        const auto u = random_vector(12, seed + 100);
        const Eigen::VectorXd ref = W * Eigen::Map<const Eigen::VectorXd>(u.data(), 12);
        const auto out = chebyshev_apply(op, w, u);
        double err = 0.0;
        for (std::size_t i = 0; i < 12; ++i) err = std::max(err, std::abs(out[i] - ref(i)));
        // Relative to the size of the series, as for the scalar oracle.
        EXPECT_LE(err, 1e-9 * w.multiplier * w.weight.abs_sum() * max_abs(u)) << "t=" << t;
      }
    }
  }
}

TEST(ScaleBlock, CertificatesOnSixtyFourCycle) {
  const auto g = cycle_graph(64);
  const auto op = make_resolvent(g, 0.05);
  const ScalePlan plan{-2, 6, 2.0, 12};
  const auto dist = g.distance_table();
  for (int j = plan.j_min; j <= plan.j_max; ++j) {
    const auto b = scale_block(op, plan, j, mol(), norm1(), dist);
    EXPECT_TRUE(b.range_ok()) << "j=" << j << " out " << b.max_out_of_range;
    EXPECT_TRUE(b.psd_ok()) << "j=" << j << " min " << b.min_eig;
    EXPECT_LE(b.asymmetry, 1e-11 * b.sup);
    EXPECT_EQ(b.matrix, b.matrix.transpose());
  }
}

TEST(ScaleBlock, AnisotropicWeightsAndL3) {
  const auto g = random_graph(32, 0.08, 17);
  const auto op = make_killed(g, 0.7);
  const ScalePlan plan{-1, 3, 3.0, 12};
  for (int j = plan.j_min; j <= plan.j_max; ++j) {
    const auto b = scale_block(op, plan, j, mol(), norm1());
    EXPECT_TRUE(b.range_ok());
    EXPECT_TRUE(b.psd_ok());
  }
}

TEST(ScaleBlock, Additivity) {
  const auto g = random_graph(16, 0.2, 8);
  const auto op = make_resolvent(g, 0.4);
  const auto dist = g.distance_table();
  const auto ab = interval_block(op, 0.5, 3.0, 24, mol(), norm1(), dist);
  const auto bc = interval_block(op, 3.0, 11.0, 24, mol(), norm1(), dist);
  const auto ac = interval_block(op, 0.5, 11.0, 48, mol(), norm1(), dist);
  const double err = (ab.matrix + bc.matrix - ac.matrix).cwiseAbs().maxCoeff();
  EXPECT_LE(err, 1e-9 * ac.sup);
}

// On a cycle the heat kernel decays like t^{-1/2}; for scales well below the
// cycle length sup |C_j| grows by about L per step, and no faster.
TEST(ScaleBlock, MagnitudeTrendOnCycle) {
  const auto g = cycle_graph(64);
  const auto op = make_laplacian(g);
  const ScalePlan plan{0, 4, 2.0, 12};
  std::vector<double> js, sups;
  for (int j = 1; j <= 4; ++j) {
    const auto b = scale_block(op, plan, j, mol(), norm1());
    js.push_back(std::pow(2.0, j));
    sups.push_back(b.sup);
  }
  const double slope = loglog_slope(js, sups);
  RecordProperty("cycle_block_slope", std::to_string(slope));
  EXPECT_GT(slope, 0.5);
  EXPECT_LE(slope, 1.15);
}

TEST(Reconstruction, TwoVertexClosedForm) {
  const WeightedGraph g(2, {{0, 1, 1.0}});
  const auto op = make_resolvent(g, 1.0);
  const auto r = reconstruct_green(op, default_plan(op, mol(), norm1(), false), mol(), norm1());
  // (L + 1) = [[2, -1], [-1, 2]], mu = 1.
  EXPECT_NEAR(r.green(0, 0), 2.0 / 3.0, 1e-6);
  EXPECT_NEAR(r.green(0, 1), 1.0 / 3.0, 1e-6);
  EXPECT_NEAR(r.green(1, 1), 2.0 / 3.0, 1e-6);
  EXPECT_NEAR(r.oracle(0, 1), 1.0 / 3.0, 1e-14);
}

TEST(Reconstruction, SixteenCycleResolvent) {
  const auto g = cycle_graph(16);
  const auto op = make_resolvent(g, 1.0);
  const auto r = reconstruct_green(op, default_plan(op, mol(), norm1(), false), mol(), norm1());
  EXPECT_LE(r.relative_error, 1e-5);
  EXPECT_LE(r.truncation_bound, 1e-5);
}

TEST(Reconstruction, SixteenCycleKilled) {
  const auto g = cycle_graph(16);
  const auto op = make_killed(g, 0.9);
  const auto r = reconstruct_green(op, default_plan(op, mol(), norm1(), false), mol(), norm1());
  // Independent dense solve of (kappa L + 1 - kappa) G = M^-1.
  Eigen::MatrixXd A = dense_operator(op);
  Eigen::MatrixXd Minv = Eigen::MatrixXd::Identity(16, 16) / 2.0;
  const Eigen::MatrixXd G = A.lu().solve(Minv);
  EXPECT_LE((r.green - G).cwiseAbs().maxCoeff(), 1e-5 * G.cwiseAbs().maxCoeff());
}

TEST(Reconstruction, MasslessCycleDeflated) {
  const auto g = cycle_graph(16);
  const auto op = make_laplacian(g);
  EXPECT_THROW(reconstruct_green(op, ScalePlan{}, mol(), norm1(), false), SingularOperatorError);
  EXPECT_THROW(dense_green(op, false), SingularOperatorError);
  const auto r = reconstruct_green(op, default_plan(op, mol(), norm1(), true), mol(), norm1(), true);
  EXPECT_TRUE(r.deflated);
  // Oracle built from the spectral decomposition dropping the zero mode.
  const SpectralOracle so(op);
  const Eigen::MatrixXd P = so.function([](double l) { return l > 1e-10 ? 1.0 / l : 0.0; }) / 2.0;
  EXPECT_LE((r.green - P).cwiseAbs().maxCoeff(), 1e-4 * P.cwiseAbs().maxCoeff());
  // Mean-zero rows.
  EXPECT_LE(r.green.rowwise().sum().cwiseAbs().maxCoeff(), 1e-8);
}

TEST(Reconstruction, RandomGraphWithGap) {
  const auto g = random_graph(48, 0.08, 23);
  const auto op = make_resolvent(g, 0.05);
  const SpectralOracle so(op);
  ASSERT_GE(so.gap(false), 0.01);
  const auto r = reconstruct_green(op, default_plan(op, mol(), norm1(), false), mol(), norm1());
  EXPECT_LE(r.relative_error, 1e-4);
  for (const auto& b : r.blocks) {
    EXPECT_TRUE(b.psd_ok());
    EXPECT_TRUE(b.range_ok());
  }
}

TEST(KilledConsistency, HalfKappaIsTwiceUnitResolvent) {
  const auto g = random_graph(10, 0.3, 31);
  const Eigen::MatrixXd Gk = dense_green(make_killed(g, 0.5));
  const Eigen::MatrixXd G1 = dense_green(make_resolvent(g, 1.0));
  EXPECT_LE((Gk - 2.0 * G1).cwiseAbs().maxCoeff(), 1e-12 * G1.cwiseAbs().maxCoeff());
}

TEST(KilledConsistency, RandomGraphResidual) {
  const auto g = random_graph(10, 0.3, 31);
  ScalePlan plan;
  const auto op = make_killed(g, 0.5);
  plan = default_plan(op, mol(), norm1(), false, 2.0, 16);
  const auto k = killed_green_consistency(g, 0.5, plan, mol(), norm1());
  EXPECT_LE(k.dense_residual, 1e-8);
  EXPECT_LE(k.reconstruction_residual, 1e-6);
}

// kappa G^kappa = G_{(1-kappa)/kappa}; on mean-zero functions it tends to
// the massless pseudo-inverse as kappa -> 1.
TEST(KilledConsistency, KappaToOneApproachesMassless) {
  const auto g = cycle_graph(12);
  const Eigen::MatrixXd P = dense_green(make_laplacian(g), true);
  const Eigen::VectorXd one = Eigen::VectorXd::Ones(12);
  const Eigen::MatrixXd Pi = Eigen::MatrixXd::Identity(12, 12) - one * one.transpose() / 12.0;
  double prev = std::numeric_limits<double>::infinity();
  for (double kappa : {0.9, 0.99, 0.999}) {
    const Eigen::MatrixXd Gk = kappa * dense_green(make_killed(g, kappa));
    const double err = (Pi * Gk * Pi - P).cwiseAbs().maxCoeff();
    EXPECT_LT(err, prev);
    prev = err;
  }
  EXPECT_LE(prev, 1e-2 * P.cwiseAbs().maxCoeff());
}

}  // namespace

namespace {

using namespace frd;

TEST(Reexpansion, SamePolynomialOnInterval) {
  const std::vector<double> c{0.3, -0.2, 0.05, 0.01, -0.004};
  const double a = 0.4, b = 2.4, h = 0.75;
  const auto local = reexpand_folded(c, 1.0, h, a, b);
  ASSERT_EQ(local.size(), c.size());
  for (double lambda : {0.4, 0.9, 1.7, 2.4}) {
    const double want = clenshaw_folded(c, 1.0 - h * lambda);
    const double got = clenshaw_folded(local, (a + b - 2.0 * lambda) / (b - a));
    EXPECT_NEAR(got, want, 1e-15);
  }
}

TEST(Reexpansion, CompensatedClenshawHandlesCancellation) {
  // T_k(1) = 1: alternating coefficients cancel exactly at theta = 1.
  std::vector<double> c(201);
  for (std::size_t k = 1; k < c.size(); ++k) c[k] = (k % 2 ? 1.0 : -1.0) * 1e6;
  c[0] = 0.0;
  EXPECT_EQ(clenshaw_folded_compensated(c, 1.0), 0.0);
  EXPECT_NEAR(clenshaw_folded_compensated(c, 0.3), clenshaw_folded(c, 0.3), 1e-6);
}

}  // namespace

namespace {

using namespace frd;

TEST(BlockCoefficients, ExtendedRoundsToPlain) {
  const DiscreteWeightFamily family(mol(), norm1(), 4.0);
  const auto ext = block_coefficients_extended(family, 4.0, 8.0, 24);
  const auto plain = block_coefficients(family, 4.0, 8.0, 24);
  ASSERT_EQ(ext.size(), plain.size());
  for (std::size_t k = 0; k < ext.size(); ++k) {
    EXPECT_EQ(ext[k].value(), plain[k]);
    EXPECT_LE(std::abs(ext[k].lo), std::abs(ext[k].hi) * 1.2e-16);
  }
}

TEST(ResolvedJMax, TrimsUnresolvableBlocks) {
  const auto g = cycle_graph(16);
  const auto op = make_resolvent(g, 1.0);
  const SpectralOracle so(op);
  const DiscreteWeightFamily family(mol(), norm1(), op.B);
  const std::vector<double> spectrum(so.eigenvalues.data(),
                                     so.eigenvalues.data() + so.eigenvalues.size());
  ScalePlan plan;
  plan.j_min = default_j_min(plan.L_ratio);
  const int top = default_j_max(family, so.gap(false), plan.L_ratio);
  const int j = resolved_j_max(family, plan, so.gap(false), spectrum);
  EXPECT_LE(j, top);
  EXPECT_TRUE(block_resolvable(family, plan, j, spectrum));
  EXPECT_TRUE(block_resolvable(family, plan, 0, spectrum));
  // Far past the mass scale the weights on the spectrum are pure rounding.
  EXPECT_FALSE(block_resolvable(family, plan, top + 3, spectrum));
}

TEST(DefaultPlan, PsdAndEntrywiseAccuracy) {
  const auto path = path_graph(32, 0.7);
  const auto cyc = cycle_graph(64);
  for (const auto& op : {make_resolvent(path, 0.05), make_resolvent(cyc, 0.01)}) {
    const auto r = reconstruct_green(op, default_plan(op, mol(), norm1(), false), mol(), norm1());
    EXPECT_LE(r.entrywise_error, 1e-4);
    EXPECT_LE(r.relative_error, 1e-5);
    for (const auto& b : r.blocks) EXPECT_TRUE(b.psd_ok()) << "j=" << b.j << " min " << b.min_eig;
  }
}

TEST(Reconstruction, EntrywiseAtLeastRelative) {
  const auto g = cycle_graph(16);
  const auto op = make_resolvent(g, 1.0);
  const auto r = reconstruct_green(op, default_plan(op, mol(), norm1(), false), mol(), norm1());
  EXPECT_GE(r.entrywise_error, r.relative_error);
  EXPECT_LE(r.entrywise_error, 1e-5);
}

}  // namespace

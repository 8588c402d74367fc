#include <gtest/gtest.h>

#include <sstream>
#include <string>

#include "frd/config.hpp"
#include "frd/io.hpp"

namespace {

using namespace frd;

const Mollifier& mol() { return default_mollifier(); }
Normalization norm1() { return normalization_constant(mol(), 1.0); }

TEST(KernelBinary, RoundTrip) {
  LatticeSpec spec;
  spec.d = 2;
  spec.N = 16;
  spec.a = {1.0, 0.2, 0.2, 0.9};
  spec.m2 = 0.3;
  const auto k = lattice_kernel(build_symbol_table(spec), 5.0, mol(), norm1());
  std::stringstream ss;
  write_kernel_binary(ss, k);
  EXPECT_EQ(ss.str().size(), 2 * 4 + 3 * 8 + 256 * 8u);
  const auto back = read_kernel_binary(ss);
  EXPECT_EQ(back.d, 2);
  EXPECT_EQ(back.N, 16);
  EXPECT_EQ(back.t, 5.0);
  EXPECT_EQ(back.m2, 0.3);
  EXPECT_EQ(back.B, k.B);
  EXPECT_EQ(back.values, k.values);
}

TEST(KernelBinary, RejectsTruncatedOrBadHeader) {
  KernelFile f{1, 8, 2.0, 0.0, 4.0, std::vector<double>(8, 1.0)};
  std::stringstream ss;
  write_kernel_binary(ss, f);
  const std::string full = ss.str();
  std::stringstream cut(full.substr(0, full.size() - 3));
  EXPECT_THROW(read_kernel_binary(cut), Error);
  std::stringstream bad;
  write_kernel_binary(bad, KernelFile{7, 8, 2.0, 0.0, 4.0, {}});
  EXPECT_THROW(read_kernel_binary(bad), Error);
}

TEST(BlockBinary, RoundTripAndCertificate) {
  const auto g = cycle_graph(6);
  const auto op = make_resolvent(g, 1.0);
  const ScalePlan plan{0, 2, 2.0, 12};
  const auto b = scale_block(op, plan, 1, mol(), norm1());
  std::stringstream ss;
  write_block_binary(ss, b, op);
  const auto back = read_kernel_binary(ss);
  EXPECT_EQ(back.d, 2);
  EXPECT_EQ(back.N, 6);
  EXPECT_EQ(back.t, 2.0);
  for (Eigen::Index x = 0; x < 6; ++x)
    for (Eigen::Index y = 0; y < 6; ++y)
      EXPECT_EQ(back.values[static_cast<std::size_t>(x * 6 + y)], b.matrix(x, y));
  const auto cert = block_certificate(b);
  EXPECT_EQ(cert.at("j").get<int>(), 1);
  EXPECT_EQ(cert.at("L_ratio").get<double>(), 2.0);
  EXPECT_EQ(cert.at("min_eig").get<double>(), b.min_eig);
  EXPECT_EQ(cert.at("max_out_of_range").get<double>(), b.max_out_of_range);
}

TEST(SamplesBinary, RoundTrip) {
  const auto g = cycle_graph(5);
  const auto op = make_resolvent(g, 1.0);
  SamplerConfig cfg;
  cfg.op = &op;
  cfg.plan = ScalePlan{-1, 2, 2.0, 12};
  cfg.replicates = 7;
  cfg.seed = 123456789012345ull;
  const auto s = sample_graph(cfg, mol(), norm1());
  std::stringstream ss;
  write_samples_binary(ss, s);
  const auto back = read_samples_binary(ss);
  EXPECT_EQ(back.backend, SamplerBackend::graph);
  EXPECT_EQ(back.sites, 5u);
  EXPECT_EQ(back.j_min, -1);
  EXPECT_EQ(back.j_max, 2);
  EXPECT_EQ(back.seed, cfg.seed);
  EXPECT_EQ(back.replicates, 7u);
  EXPECT_EQ(back.components, s.components);
  EXPECT_EQ(back.totals, s.totals);
  std::stringstream cut(ss.str().substr(0, 40));
  EXPECT_THROW(read_samples_binary(cut), Error);
}

TEST(Csv, BannersAndHeaders) {
  LatticeSpec spec;
  spec.d = 1;
  spec.N = 8;
  const auto k = lattice_kernel(build_symbol_table(spec), 2.0, mol(), norm1());
  std::stringstream kc;
  write_kernel_csv(kc, k);
  std::string line;
  std::getline(kc, line);
  EXPECT_EQ(line, "# frd kernel v1");
  std::getline(kc, line);
  EXPECT_EQ(line, "x0,value");
  spec.N = 32;
  const std::vector<double> ts{4, 8};
  const auto fit = decay_fit(spec, ts, 0, 0, mol(), norm1());
  std::stringstream dc;
  write_decay_csv(dc, fit);
  std::getline(dc, line);
  EXPECT_EQ(line, "# frd decay v1");
  std::getline(dc, line);
  EXPECT_EQ(line, "t,l_x,l_y,max_abs,fitted_exponent");
}

TEST(RunConfig, JsonRoundTrip) {
  RunConfig c = default_run_config();
  c.subcommand = "sample";
  c.backend.type = "torus";
  c.backend.torus.d = 3;
  c.backend.torus.N = 16;
  c.backend.torus.a = {1, 0, 0, 0, 2, 0, 0, 0, 1};
  c.backend.graph.kind = "random";
  c.backend.op = "killed";
  c.backend.kappa = 0.25;
  c.scales.j_min = -3;
  c.sampler.replicates = 1234;
  c.tolerances.oracle = 3e-10;
  c.seed = 99;
  c.kernel_t = {4, 8};
  const auto j = to_json(c);
  const RunConfig back = run_config_from_json(j);
  EXPECT_EQ(to_json(back), j);
  EXPECT_EQ(back.scales.j_min, -3);
  EXPECT_FALSE(back.scales.j_max.has_value());
  EXPECT_EQ(j.at("scales").at("j_max"), "auto");
}

TEST(RunConfig, PartialAndInvalid) {
  const auto c = run_config_from_json(nlohmann::json::parse(R"({"seed": 5, "backend": {"m2": 2}})"));
  EXPECT_EQ(c.seed, 5u);
  EXPECT_EQ(c.backend.m2, 2.0);
  EXPECT_EQ(c.backend.op, "resolvent");
  EXPECT_EQ(c.weights.lambda_grid.size(), 60u);
  EXPECT_THROW(run_config_from_json(nlohmann::json::parse(R"({"sed": 5})")), InvalidArgument);
  EXPECT_THROW(run_config_from_json(nlohmann::json::parse(R"({"seed": "x"})")), InvalidArgument);
  EXPECT_THROW(load_run_config("/nonexistent/frd.json"), InvalidArgument);
}

TEST(RunConfig, ToleranceScaling) {
  const Tolerances t;
  const auto s = t.scaled(10.0);
  EXPECT_EQ(s.identity, 1e-4);
  EXPECT_EQ(s.approx_slope, t.approx_slope);
  EXPECT_EQ(t.scaled(0.0).oracle, 0.0);
}

TEST(RunConfig, BuildersRejectUnknownKinds) {
  GraphSource src;
  src.kind = "lattice";
  EXPECT_THROW(build_graph(src), InvalidArgument);
  src.kind = "file";
  src.path = "/nonexistent/graph.txt";
  EXPECT_THROW(build_graph(src), InvalidArgument);
  const auto g = cycle_graph(4);
  BackendConfig b;
  b.op = "heat";
  EXPECT_THROW(build_operator(b, g), InvalidArgument);
  b.op = "killed";
  b.kappa = 0.5;
  EXPECT_EQ(build_operator(b, g).kind, OperatorKind::killed);
}

}  // namespace

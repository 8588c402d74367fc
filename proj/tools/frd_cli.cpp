// frd: build, check and sample finite-range decompositions.
//
//   frd weights     [--config F] [--out D] [--lambda-grid a,b,...] [--tolerance-scale s]
//   frd decompose   [--config F] [--out D]
//   frd reconstruct [--config F] [--out D]
//   frd sample      [--config F] [--out D] [--seed S]
//
// Exit status: 0 when every check passes, 1 when a check fails, 2 on bad
// usage or configuration, 3 when a module raises an error.

#include <CLI11.hpp>

#include <cstdint>
#include <filesystem>
#include <functional>
#include <fstream>
#include <iomanip>
#include <iostream>
#include <sstream>
#include <string>
#include <vector>

#include "frd/frd.hpp"

namespace fs = std::filesystem;
using namespace frd;

namespace {

struct Check {
  std::string module;
  std::string operation;
  std::string name;
  double measured = 0.0;
  double bound = 0.0;
  bool upper = true;  // measured <= bound, else measured >= bound
  bool pass() const { return upper ? measured <= bound : measured >= bound; }
};

class CheckList {
 public:
  void add(std::string module, std::string op, std::string name, double measured, double bound,
           bool upper = true) {
    checks_.push_back({std::move(module), std::move(op), std::move(name), measured, bound, upper});
  }

  bool all_pass() const {
    for (const auto& c : checks_)
      if (!c.pass()) return false;
    return true;
  }

  void write(const fs::path& path) const {
    std::ofstream os(path);
    os << "# frd checks v" << kFormatVersion << '\n';
    os << "module,operation,check,measured,relation,bound,pass\n";
    os << std::setprecision(17);
    for (const auto& c : checks_)
      os << c.module << ',' << c.operation << ',' << c.name << ',' << c.measured << ','
         << (c.upper ? "<=" : ">=") << ',' << c.bound << ',' << (c.pass() ? 1 : 0) << '\n';
  }

  void print(std::ostream& os) const {
    for (const auto& c : checks_) {
      os << (c.pass() ? "PASS " : "FAIL ") << c.module << "::" << c.operation << ' ' << c.name
         << " measured=" << std::setprecision(6) << c.measured << (c.upper ? " <= " : " >= ")
         << c.bound << '\n';
    }
  }

 private:
  std::vector<Check> checks_;
};

std::string format_t(double t) {
  std::ostringstream ss;
  ss << t;
  return ss.str();
}

ScalePlan resolve_plan(const RunConfig& cfg, const std::function<int()>& auto_j_max) {
  ScalePlan plan;
  plan.L_ratio = cfg.scales.L_ratio;
  plan.nodes_per_block = cfg.scales.nodes_per_block;
  plan.j_min = cfg.scales.j_min.value_or(default_j_min(plan.L_ratio));
  plan.j_max = cfg.scales.j_max ? *cfg.scales.j_max : std::max(plan.j_min, auto_j_max());
  plan.validate("cli", "resolve_plan");
  return plan;
}

ScalePlan graph_plan(const RunConfig& cfg, const GraphOperator& op, const Mollifier& m,
                     const Normalization& norm) {
  return resolve_plan(cfg, [&] {
    return default_plan(op, m, norm, cfg.backend.deflate, cfg.scales.L_ratio,
                        cfg.scales.nodes_per_block)
        .j_max;
  });
}

ScalePlan torus_plan(const RunConfig& cfg, const SymbolTable& table, const Mollifier& m,
                     const Normalization& norm) {
  return resolve_plan(cfg, [&] {
    return default_torus_plan(table, m, norm, cfg.scales.L_ratio, cfg.scales.nodes_per_block)
        .j_max;
  });
}

void cmd_weights(const RunConfig& cfg, const Mollifier& m, const Normalization& norm,
                 const fs::path& out, CheckList& checks) {
  const Tolerances& tol = cfg.tolerances;
  const DiscreteWeightFamily family(m, norm, 3.0);
  WeightCheckReport rep = check_decomposition_identity(
      family, cfg.weights.lambda_grid,
      {cfg.weights.t_min, cfg.weights.t_max, cfg.weights.nodes_per_octave});
  double tail = 0.0;
  for (double b : rep.tail_bounds) tail = std::max(tail, b);
  checks.add("spectral_weights", "check_decomposition_identity", "max_residual",
             rep.max_identity_residual(), tol.identity);
  checks.add("spectral_weights", "check_decomposition_identity", "residual_plus_tail_bound",
             rep.max_identity_residual() + tail, tol.identity);

  const ContinuousWeight cont(m, norm);
  rep.t_grid = cfg.weights.t_grid;
  for (double lambda : rep.lambda_grid) {
    std::vector<double> wc, wd;
    for (double t : rep.t_grid) {
      wc.push_back(cont(lambda, t));
      wd.push_back(lambda <= 4.0 ? family(lambda, t) : 0.0);
    }
    rep.w_cont.push_back(wc);
    rep.w_disc.push_back(wd);
  }

  // Clenshaw against the periodized sum on a 20 x 20 grid.
  double oracle = 0.0;
  for (double lambda : uniform_grid(0.05, 4.0, 20)) {
    for (double t : geometric_grid(0.5, 50.0, 20)) {
      const ChebyshevWeight w = chebyshev_coefficients(m, t);
      const double diff =
          std::abs(eval_discrete_weight(w, lambda) - eval_discrete_weight_direct(m, lambda, t));
      oracle = std::max(oracle, diff / w.abs_sum());
    }
  }
  checks.add("spectral_weights", "eval_discrete_weight", "oracle_relative", oracle, tol.oracle);

  double negativity = 0.0;
  for (double t : {0.5, 1.0, 3.7, 10.0, 100.0}) {
    const ChebyshevWeight w = chebyshev_coefficients(m, t);
    for (double lambda : uniform_grid(0.0, 4.0, 1000))
      negativity = std::max(negativity, -eval_discrete_weight(w, lambda) / w.abs_sum());
  }
  checks.add("spectral_weights", "eval_discrete_weight", "negativity", negativity, tol.range);

  const ApproximationFit fit = approximation_rate(m, cfg.weights.approx_lambda, cfg.weights.approx_t);
  rep.approx_rate_fit = fit.slope;
  checks.add("spectral_weights", "approximation_rate", "slope", fit.slope, tol.approx_slope);

  const std::vector<int> orders{0, 1, 2, 3};
  const auto lambdas = geometric_grid(1e-4, 3.0, 200);
  const auto ts = geometric_grid(0.1, 1e3, 60);
  rep.decay_constants = decay_constants(family, orders, lambdas, ts);
  double worst_decay = 0.0;
  for (double c : rep.decay_constants) worst_decay = std::max(worst_decay, c);
  checks.add("spectral_weights", "decay_constants", "finite",
             std::isfinite(worst_decay) ? 0.0 : 1.0, 0.0);
  checks.add("spectral_weights", "wave_identity", "max_coefficient_difference",
             wave_identity_residual(32), 1e-12);

  {
    std::ofstream os(out / "weights_report.csv");
    os << "# frd weights v" << kFormatVersion << '\n';
    write_weight_report_csv(os, rep);
  }
  {
    std::ofstream os(out / "identity.csv");
    os << "# frd identity v" << kFormatVersion << '\n';
    os << "lambda,identity_residual,main_residual,head,tail,tail_bound\n" << std::setprecision(17);
    for (std::size_t i = 0; i < rep.lambda_grid.size(); ++i)
      os << rep.lambda_grid[i] << ',' << rep.identity_residuals[i] << ','
         << rep.main_residuals[i] << ',' << rep.head_contributions[i] << ','
         << rep.tail_contributions[i] << ',' << rep.tail_bounds[i] << '\n';
  }
  {
    std::ofstream os(out / "approximation.csv");
    os << "# frd approximation v" << kFormatVersion << '\n';
    os << "lambda,t,abs_error,degenerate,fitted_slope\n" << std::setprecision(17);
    for (std::size_t i = 0; i < fit.t.size(); ++i)
      os << fit.lambda << ',' << fit.t[i] << ',' << fit.errors[i] << ','
         << (fit.degenerate[i] ? 1 : 0) << ',' << fit.slope << '\n';
  }
  {
    std::ofstream os(out / "decay_constants.csv");
    os << "# frd decay_constants v" << kFormatVersion << '\n';
    os << "order,constant\n" << std::setprecision(17);
    for (std::size_t i = 0; i < orders.size(); ++i)
      os << orders[i] << ',' << rep.decay_constants[i] << '\n';
  }
  for (double t : cfg.kernel_t) {
    std::ofstream os(out / ("coefficients_t" + format_t(t) + ".csv"));
    os << "# frd coefficients v" << kFormatVersion << '\n';
    write_coefficients_csv(os, chebyshev_coefficients(m, t));
  }
}

void cmd_decompose_graph(const RunConfig& cfg, const Mollifier& m, const Normalization& norm,
                         const fs::path& out, CheckList& checks) {
  const WeightedGraph g = build_graph(cfg.backend.graph);
  const GraphOperator op = build_operator(cfg.backend, g);
  const ScalePlan plan = graph_plan(cfg, op, m, norm);
  const auto dist = g.distance_table();
  std::ofstream summary(out / "blocks.csv");
  summary << "# frd blocks v" << kFormatVersion << '\n';
  summary << "j,lower,upper,range_bound,min_eig,max_eig,sup,max_out_of_range,psd_ok,range_ok\n"
          << std::setprecision(17);
  for (int j = plan.j_min; j <= plan.j_max; ++j) {
    const ScaleBlock b = scale_block(op, plan, j, m, norm, dist);
    const std::string stem = "block_j" + std::to_string(j);
    {
      std::ofstream os(out / (stem + ".bin"), std::ios::binary);
      write_block_binary(os, b, op);
    }
    {
      std::ofstream os(out / (stem + ".json"));
      os << block_certificate(b).dump(2) << '\n';
    }
    const bool psd = b.psd_ok(cfg.tolerances.psd), range = b.range_ok(cfg.tolerances.range);
    summary << j << ',' << b.lower << ',' << b.upper << ',' << b.upper << ',' << b.min_eig << ','
            << b.max_eig << ',' << b.sup << ',' << b.max_out_of_range << ',' << psd << ','
            << range << '\n';
    checks.add("graph_decomposition", "scale_block", "psd_j" + std::to_string(j),
               b.min_eig / b.max_eig, -cfg.tolerances.psd, false);
    checks.add("graph_decomposition", "scale_block", "range_j" + std::to_string(j),
               b.max_out_of_range, cfg.tolerances.range);
  }
}

void cmd_decompose_torus(const RunConfig& cfg, const Mollifier& m, const Normalization& norm,
                         const fs::path& out, CheckList& checks) {
  const SymbolTable table = build_symbol_table(cfg.backend.torus);
  std::ofstream summary(out / "kernels.csv");
  summary << "# frd kernels v" << kFormatVersion << '\n';
  summary << "t,range_bound,sup,max_out_of_range,asymmetry,imaginary_residue,min_multiplier\n"
          << std::setprecision(17);
  for (double t : cfg.kernel_t) {
    const LatticeKernel k = lattice_kernel(table, t, m, norm);
    const std::string stem = "kernel_t" + format_t(t);
    {
      std::ofstream os(out / (stem + ".bin"), std::ios::binary);
      write_kernel_binary(os, k);
    }
    {
      std::ofstream os(out / (stem + ".csv"));
      write_kernel_csv(os, k);
    }
    const double sup = k.sup();
    const double oor = k.max_beyond(t) / sup;
    summary << t << ',' << std::floor(t) << ',' << sup << ',' << oor << ',' << k.asymmetry() << ','
            << k.imaginary_residue << ',' << k.min_multiplier << '\n';
    const std::string tag = "_t" + format_t(t);
    checks.add("lattice_kernels", "lattice_kernel", "range" + tag, oor, cfg.tolerances.range);
    checks.add("lattice_kernels", "lattice_kernel", "asymmetry" + tag, k.asymmetry() / sup,
               cfg.tolerances.symmetry);
    checks.add("lattice_kernels", "lattice_kernel", "imaginary" + tag, k.imaginary_residue / sup,
               cfg.tolerances.range);
    checks.add("lattice_kernels", "lattice_kernel", "psd_multiplier" + tag,
               k.min_multiplier / k.max_multiplier, -cfg.tolerances.range, false);
  }
}

void cmd_reconstruct(const RunConfig& cfg, const Mollifier& m, const Normalization& norm,
                     const fs::path& out, CheckList& checks) {
  std::ofstream os(out / "reconstruction.csv");
  os << "# frd reconstruction v" << kFormatVersion << '\n';
  os << std::setprecision(17);
  if (cfg.backend.type == "torus") {
    const SymbolTable table = build_symbol_table(cfg.backend.torus);
    const ScalePlan plan = torus_plan(cfg, table, m, norm);
    const TorusReconstruction r =
        reconstruct_torus_green(table, plan, m, norm, cfg.backend.deflate);
    os << "site,green,oracle,abs_error\n";
    for (std::size_t i = 0; i < r.values.size(); ++i)
      os << i << ',' << r.values[i] << ',' << r.oracle[i] << ','
         << std::abs(r.values[i] - r.oracle[i]) << '\n';
    checks.add("lattice_kernels", "reconstruct_torus_green", "relative_error", r.relative_error,
               cfg.tolerances.reconstruction);
    if (table.spec.m2 > 0)
      checks.add("lattice_kernels", "reconstruct_torus_green", "entrywise_error",
                 r.entrywise_error, cfg.tolerances.reconstruction);
    std::cout << "j range [" << plan.j_min << ", " << plan.j_max
              << "], truncation bound " << r.truncation_bound << '\n';
    return;
  }
  const WeightedGraph g = build_graph(cfg.backend.graph);
  const GraphOperator op = build_operator(cfg.backend, g);
  const ScalePlan plan = graph_plan(cfg, op, m, norm);
  const GreenReconstruction r = reconstruct_green(op, plan, m, norm, cfg.backend.deflate);
  os << "x,y,green,oracle,abs_error\n";
  for (Eigen::Index x = 0; x < r.green.rows(); ++x)
    for (Eigen::Index y = 0; y < r.green.cols(); ++y)
      os << x << ',' << y << ',' << r.green(x, y) << ',' << r.oracle(x, y) << ','
         << std::abs(r.green(x, y) - r.oracle(x, y)) << '\n';
  checks.add("graph_decomposition", "reconstruct_green", "relative_error", r.relative_error,
             cfg.tolerances.reconstruction);
  if (!r.deflated)
    checks.add("graph_decomposition", "reconstruct_green", "entrywise_error", r.entrywise_error,
               cfg.tolerances.reconstruction);
  std::cout << "j range [" << plan.j_min << ", " << plan.j_max << "], truncation bound "
            << r.truncation_bound << '\n';
}

void cmd_sample(const RunConfig& cfg, const Mollifier& m, const Normalization& norm,
                const fs::path& out, CheckList& checks, double tolerance_scale) {
  SamplerConfig sc;
  sc.seed = cfg.seed;
  sc.replicates = cfg.sampler.replicates;
  sc.deflate = cfg.backend.deflate;
  FieldSamples samples;
  Eigen::MatrixXd oracle;
  if (cfg.backend.type == "torus") {
    sc.backend = SamplerBackend::torus;
    sc.lattice = cfg.backend.torus;
    const SymbolTable table = build_symbol_table(sc.lattice);
    sc.plan = torus_plan(cfg, table, m, norm);
    samples = sample_torus(sc, m, norm);
    oracle = circulant(dense_torus_green(sc.lattice), sc.lattice.d, sc.lattice.N);
  } else {
    const WeightedGraph g = build_graph(cfg.backend.graph);
    const GraphOperator op = build_operator(cfg.backend, g);
    sc.backend = SamplerBackend::graph;
    sc.op = &op;
    sc.plan = graph_plan(cfg, op, m, norm);
    samples = sample_graph(sc, m, norm);
    oracle = dense_green(op, cfg.backend.deflate && op.singular());
  }
  {
    std::ofstream os(out / "samples.bin", std::ios::binary);
    write_samples_binary(os, samples);
  }
  const CovarianceReport rep = covariance_report(samples.totals, samples.replicates, oracle);
  {
    std::ofstream os(out / "covariance.csv");
    write_covariance_csv(os, rep, oracle);
  }
  checks.add("gff_sampler", "covariance_report", "max_abs_z", rep.max_abs_z,
             cfg.sampler.max_z * tolerance_scale);
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Finite-range decompositions of discrete Green's functions"};
  app.require_subcommand(1);
  std::string config_path, out_dir;
  std::uint64_t seed = 0;
  unsigned threads = 0;
  double tolerance_scale = 1.0;
  std::vector<double> lambda_grid;
  app.add_option("--config", config_path, "JSON run configuration")->check(CLI::ExistingFile);
  app.add_option("--out", out_dir, "output directory (overrides the config)");
  auto* seed_opt = app.add_option("--seed", seed, "RNG seed (overrides the config)");
  auto* threads_opt = app.add_option("--threads", threads, "worker thread limit, 0 = all cores");
  app.add_option("--tolerance-scale", tolerance_scale, "multiply every tolerance")
      ->check(CLI::NonNegativeNumber);
  app.add_option("--lambda-grid", lambda_grid, "comma separated lambda values for weights")
      ->delimiter(',');
  app.fallthrough();
  for (const char* name : {"weights", "decompose", "sample", "reconstruct"})
    app.add_subcommand(name, std::string("run the ") + name + " suite");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    return app.exit(e) == 0 ? 0 : 2;
  }

  try {
    RunConfig cfg = config_path.empty() ? default_run_config() : load_run_config(config_path);
    cfg.subcommand = app.get_subcommands().front()->get_name();
    if (!out_dir.empty()) cfg.output_dir = out_dir;
    if (seed_opt->count()) cfg.seed = seed;
    if (threads_opt->count()) cfg.threads = threads;
    if (!lambda_grid.empty()) cfg.weights.lambda_grid = lambda_grid;
    cfg.tolerances = cfg.tolerances.scaled(tolerance_scale);
    set_thread_limit(cfg.threads);

    const fs::path out(cfg.output_dir);
    fs::create_directories(out);
    {
      std::ofstream os(out / "config.json");
      os << to_json(cfg).dump(2) << '\n';
    }

    const Mollifier m(build_default_profile(), cfg.mollifier);
    const Normalization norm = normalization_constant(m, 1.0);
    CheckList checks;
    if (cfg.subcommand == "weights") {
      cmd_weights(cfg, m, norm, out, checks);
    } else if (cfg.subcommand == "decompose") {
      if (cfg.backend.type == "torus")
        cmd_decompose_torus(cfg, m, norm, out, checks);
      else
        cmd_decompose_graph(cfg, m, norm, out, checks);
    } else if (cfg.subcommand == "reconstruct") {
      cmd_reconstruct(cfg, m, norm, out, checks);
    } else {
      cmd_sample(cfg, m, norm, out, checks, tolerance_scale);
    }
    checks.write(out / "checks.csv");
    checks.print(std::cout);
    if (!checks.all_pass()) {
      std::cerr << "frd " << cfg.subcommand << ": one or more checks failed\n";
      return 1;
    }
    return 0;
  } catch (const InvalidArgument& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 2;
  } catch (const Error& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 3;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 3;
  }
}

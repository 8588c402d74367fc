#pragma once

#include <cstdint>
#include <fstream>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "frd/error.hpp"
#include "frd/graph.hpp"
#include "frd/lattice.hpp"
#include "frd/mollifier.hpp"
#include "frd/scales.hpp"

namespace frd {

/// Where the graph comes from: a generator or an edge-list file.
struct GraphSource {
  std::string kind = "cycle";  // cycle | path | random | file
  std::size_t n = 16;
  double weight = 1.0;
  double edge_probability = 0.2;
  std::uint64_t graph_seed = 1;
  std::string path;
};

struct BackendConfig {
  std::string type = "graph";  // graph | torus
  GraphSource graph;
  std::string op = "resolvent";  // laplacian | killed | resolvent
  double kappa = 0.5;
  double m2 = 1.0;
  LatticeSpec torus;
  bool deflate = true;
};

struct WeightsConfig {
  std::vector<double> lambda_grid;
  std::vector<double> t_grid;
  double t_min = 1e-3;
  double t_max = 1e3;
  int nodes_per_octave = 8;
  double approx_lambda = 1.0;
  std::vector<double> approx_t{4, 8, 16, 32, 64};
};

struct ScalesConfig {
  std::optional<int> j_min;
  std::optional<int> j_max;
  double L_ratio = 2.0;
  int nodes_per_block = 24;
};

struct SamplerSettings {
  std::size_t replicates = 10000;
  double max_z = 4.0;
};

struct Tolerances {
  double identity = 1e-5;
  double oracle = 1e-9;
  double approx_slope = -0.9;
  double range = 1e-12;
  double psd = 1e-10;
  double reconstruction = 1e-5;
  double symmetry = 1e-13;

  /// Multiplies every tolerance that bounds an error; the slope bound is a
  /// rate, not an error, and is left alone.
  Tolerances scaled(double f) const {
    Tolerances t = *this;
    t.identity *= f;
    t.oracle *= f;
    t.range *= f;
    t.psd *= f;
    t.reconstruction *= f;
    t.symmetry *= f;
    return t;
  }
};

struct RunConfig {
  std::string subcommand = "weights";
  BackendConfig backend;
  MollifierOptions mollifier;
  WeightsConfig weights;
  ScalesConfig scales;
  std::vector<double> kernel_t{8.0};
  SamplerSettings sampler;
  Tolerances tolerances;
  std::string output_dir = "frd_out";
  std::uint64_t seed = 1;
  unsigned threads = 0;
};

inline std::vector<double> default_lambda_grid() {
  std::vector<double> g;
  for (int i = 1; i <= 60; ++i) g.push_back(0.05 * i);
  return g;
}

inline RunConfig default_run_config() {
  RunConfig c;
  c.weights.lambda_grid = default_lambda_grid();
  c.weights.t_grid = geometric_grid(0.5, 50.0, 20);
  c.backend.torus.d = 2;
  c.backend.torus.a = {1.0, 0.0, 0.0, 1.0};
  c.backend.torus.N = 64;
  c.backend.torus.m2 = 0.0;
  return c;
}

namespace detail {
template <typename T>
void read_opt(const nlohmann::json& j, const char* key, T& out) {
  if (j.contains(key)) j.at(key).get_to(out);
}

inline nlohmann::json opt_int(const std::optional<int>& v) {
  return v ? nlohmann::json(*v) : nlohmann::json("auto");
}

inline void read_opt_int(const nlohmann::json& j, const char* key, std::optional<int>& out) {
  if (!j.contains(key)) return;
  const auto& v = j.at(key);
  if (v.is_string() && v.get<std::string>() == "auto")
    out.reset();
  else
    out = v.get<int>();
}
}  // namespace detail

inline nlohmann::json to_json(const RunConfig& c) {
  using nlohmann::json;
  const auto& b = c.backend;
  return json{
      {"subcommand", c.subcommand},
      {"backend",
       {{"type", b.type},
        {"graph",
         {{"kind", b.graph.kind},
          {"n", b.graph.n},
          {"weight", b.graph.weight},
          {"edge_probability", b.graph.edge_probability},
          {"graph_seed", b.graph.graph_seed},
          {"path", b.graph.path}}},
        {"operator", b.op},
        {"kappa", b.kappa},
        {"m2", b.m2},
        {"torus", {{"d", b.torus.d}, {"N", b.torus.N}, {"a", b.torus.a}, {"m2", b.torus.m2}}},
        {"deflate", b.deflate}}},
      {"mollifier",
       {{"grid_step", c.mollifier.grid_step},
        {"x_max", c.mollifier.x_max},
        {"profile_intervals", c.mollifier.profile_intervals},
        {"hat_step", c.mollifier.hat_step},
        {"hat_intervals", c.mollifier.hat_intervals}}},
      {"weights",
       {{"lambda_grid", c.weights.lambda_grid},
        {"t_grid", c.weights.t_grid},
        {"t_min", c.weights.t_min},
        {"t_max", c.weights.t_max},
        {"nodes_per_octave", c.weights.nodes_per_octave},
        {"approx_lambda", c.weights.approx_lambda},
        {"approx_t", c.weights.approx_t}}},
      {"scales",
       {{"j_min", detail::opt_int(c.scales.j_min)},
        {"j_max", detail::opt_int(c.scales.j_max)},
        {"L_ratio", c.scales.L_ratio},
        {"nodes_per_block", c.scales.nodes_per_block}}},
      {"kernel_t", c.kernel_t},
      {"sampler", {{"replicates", c.sampler.replicates}, {"max_z", c.sampler.max_z}}},
      {"tolerances",
       {{"identity", c.tolerances.identity},
        {"oracle", c.tolerances.oracle},
        {"approx_slope", c.tolerances.approx_slope},
        {"range", c.tolerances.range},
        {"psd", c.tolerances.psd},
        {"reconstruction", c.tolerances.reconstruction},
        {"symmetry", c.tolerances.symmetry}}},
      {"output_dir", c.output_dir},
      {"seed", c.seed},
      {"threads", c.threads}};
}

/// Missing keys keep their defaults; unknown keys are rejected.
inline RunConfig run_config_from_json(const nlohmann::json& j) {
  static const char* known[] = {"subcommand", "backend", "mollifier", "weights", "scales",
                                "kernel_t", "sampler", "tolerances", "output_dir", "seed",
                                "threads"};
  for (const auto& [key, value] : j.items()) {
    bool ok = false;
    for (const char* k : known) ok = ok || key == k;
    if (!ok) throw InvalidArgument("cli", "load_config", "unknown key '" + key + "'");
  }
  RunConfig c = default_run_config();
  try {
    detail::read_opt(j, "subcommand", c.subcommand);
    if (j.contains("backend")) {
      const auto& b = j.at("backend");
      detail::read_opt(b, "type", c.backend.type);
      if (b.contains("graph")) {
        const auto& g = b.at("graph");
        detail::read_opt(g, "kind", c.backend.graph.kind);
        detail::read_opt(g, "n", c.backend.graph.n);
        detail::read_opt(g, "weight", c.backend.graph.weight);
        detail::read_opt(g, "edge_probability", c.backend.graph.edge_probability);
        detail::read_opt(g, "graph_seed", c.backend.graph.graph_seed);
        detail::read_opt(g, "path", c.backend.graph.path);
      }
      detail::read_opt(b, "operator", c.backend.op);
      detail::read_opt(b, "kappa", c.backend.kappa);
      detail::read_opt(b, "m2", c.backend.m2);
      if (b.contains("torus")) {
        const auto& t = b.at("torus");
        detail::read_opt(t, "d", c.backend.torus.d);
        detail::read_opt(t, "N", c.backend.torus.N);
        detail::read_opt(t, "a", c.backend.torus.a);
        detail::read_opt(t, "m2", c.backend.torus.m2);
      }
      detail::read_opt(b, "deflate", c.backend.deflate);
    }
    if (j.contains("mollifier")) {
      const auto& m = j.at("mollifier");
      detail::read_opt(m, "grid_step", c.mollifier.grid_step);
      detail::read_opt(m, "x_max", c.mollifier.x_max);
      detail::read_opt(m, "profile_intervals", c.mollifier.profile_intervals);
      detail::read_opt(m, "hat_step", c.mollifier.hat_step);
      detail::read_opt(m, "hat_intervals", c.mollifier.hat_intervals);
    }
    if (j.contains("weights")) {
      const auto& w = j.at("weights");
      detail::read_opt(w, "lambda_grid", c.weights.lambda_grid);
      detail::read_opt(w, "t_grid", c.weights.t_grid);
      detail::read_opt(w, "t_min", c.weights.t_min);
      detail::read_opt(w, "t_max", c.weights.t_max);
      detail::read_opt(w, "nodes_per_octave", c.weights.nodes_per_octave);
      detail::read_opt(w, "approx_lambda", c.weights.approx_lambda);
      detail::read_opt(w, "approx_t", c.weights.approx_t);
    }
    if (j.contains("scales")) {
      const auto& s = j.at("scales");
      detail::read_opt_int(s, "j_min", c.scales.j_min);
      detail::read_opt_int(s, "j_max", c.scales.j_max);
      detail::read_opt(s, "L_ratio", c.scales.L_ratio);
      detail::read_opt(s, "nodes_per_block", c.scales.nodes_per_block);
    }
    detail::read_opt(j, "kernel_t", c.kernel_t);
    if (j.contains("sampler")) {
      detail::read_opt(j.at("sampler"), "replicates", c.sampler.replicates);
      detail::read_opt(j.at("sampler"), "max_z", c.sampler.max_z);
    }
    if (j.contains("tolerances")) {
      const auto& t = j.at("tolerances");
      detail::read_opt(t, "identity", c.tolerances.identity);
      detail::read_opt(t, "oracle", c.tolerances.oracle);
      detail::read_opt(t, "approx_slope", c.tolerances.approx_slope);
      detail::read_opt(t, "range", c.tolerances.range);
      detail::read_opt(t, "psd", c.tolerances.psd);
      detail::read_opt(t, "reconstruction", c.tolerances.reconstruction);
      detail::read_opt(t, "symmetry", c.tolerances.symmetry);
    }
    detail::read_opt(j, "output_dir", c.output_dir);
    detail::read_opt(j, "seed", c.seed);
    detail::read_opt(j, "threads", c.threads);
  } catch (const nlohmann::json::exception& e) {
    throw InvalidArgument("cli", "load_config", e.what());
  }
  return c;
}

inline RunConfig load_run_config(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw InvalidArgument("cli", "load_config", "cannot open " + path);
  nlohmann::json j;
  try {
    in >> j;
  } catch (const nlohmann::json::exception& e) {
    throw InvalidArgument("cli", "load_config", path + ": " + e.what());
  }
  return run_config_from_json(j);
}

inline WeightedGraph build_graph(const GraphSource& s) {
  if (s.kind == "cycle") return cycle_graph(s.n, s.weight);
  if (s.kind == "path") return path_graph(s.n, s.weight);
  if (s.kind == "random") return random_graph(s.n, s.edge_probability, s.graph_seed);
  if (s.kind == "file") {
    std::ifstream in(s.path);
    if (!in) throw InvalidArgument("graph_decomposition", "parse_edge_list", "cannot open " + s.path);
    return parse_edge_list(in);
  }
  throw InvalidArgument("cli", "build_graph", "unknown graph kind '" + s.kind + "'");
}

inline GraphOperator build_operator(const BackendConfig& b, const WeightedGraph& g) {
  if (b.op == "laplacian") return make_laplacian(g);
  if (b.op == "killed") return make_killed(g, b.kappa);
  if (b.op == "resolvent") return make_resolvent(g, b.m2);
  throw InvalidArgument("cli", "build_operator", "unknown operator kind '" + b.op + "'");
}

}  // namespace frd

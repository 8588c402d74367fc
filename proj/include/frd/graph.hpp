#pragma once

#include <Eigen/Dense>

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <istream>
#include <limits>
#include <map>
#include <queue>
#include <random>
#include <sstream>
#include <string>
#include <utility>
#include <vector>

#include "frd/chebyshev.hpp"
#include "frd/error.hpp"
#include "frd/parallel.hpp"
#include "frd/scales.hpp"
#include "frd/spectral_weights.hpp"

namespace frd {

struct Edge {
  std::size_t x = 0;
  std::size_t y = 0;
  double weight = 1.0;
};

/// Undirected graph with symmetric edge weights mu_xy and vertex measure
/// mu_x = sum_y mu_xy, stored as CSR (a self loop appears once).
class WeightedGraph {
 public:
  WeightedGraph() = default;

  /// Each edge is undirected. A pair listed twice must carry equal weights
  /// and is kept once.
  WeightedGraph(std::size_t n, const std::vector<Edge>& edges) : n_(n) {
    const char* mod = "graph_decomposition";
    const char* op = "WeightedGraph";
    detail::require(n > 0, mod, op, "graph needs at least one vertex");
    std::map<std::pair<std::size_t, std::size_t>, double> unique;
    for (const Edge& e : edges) {
      detail::require(e.x < n && e.y < n, mod, op,
                      "vertex id out of range in edge " + std::to_string(e.x) + " " +
                          std::to_string(e.y));
      detail::require(e.weight > 0 && std::isfinite(e.weight), mod, op,
                      "edge weights must be positive, got " + std::to_string(e.weight));
      const auto key = std::minmax(e.x, e.y);
      auto [it, fresh] = unique.emplace(key, e.weight);
      detail::require(fresh || it->second == e.weight, mod, op,
                      "asymmetric weights for edge " + std::to_string(key.first) + " " +
                          std::to_string(key.second));
    }
    std::vector<std::vector<std::pair<std::size_t, double>>> adj(n);
    for (const auto& [key, w] : unique) {
      adj[key.first].emplace_back(key.second, w);
      if (key.first != key.second) adj[key.second].emplace_back(key.first, w);
      edges_.push_back({key.first, key.second, w});
    }
    row_.assign(n + 1, 0);
    mu_.assign(n, 0.0);
    for (std::size_t x = 0; x < n; ++x) {
      std::sort(adj[x].begin(), adj[x].end());
      row_[x + 1] = row_[x] + adj[x].size();
      for (const auto& [y, w] : adj[x]) {
        col_.push_back(y);
        val_.push_back(w);
        mu_[x] += w;
      }
      detail::require(mu_[x] > 0, mod, op, "vertex " + std::to_string(x) + " is isolated");
    }
  }

  std::size_t size() const noexcept { return n_; }
  const std::vector<Edge>& edges() const noexcept { return edges_; }
  const std::vector<double>& measure() const noexcept { return mu_; }
  double total_measure() const {
    double s = 0.0;
    for (double m : mu_) s += m;
    return s;
  }

  template <typename Fn>
  void for_neighbors(std::size_t x, Fn&& fn) const {
    for (std::size_t p = row_[x]; p < row_[x + 1]; ++p) fn(col_[p], val_[p]);
  }

  /// Unweighted BFS distances from x; unreachable vertices get -1.
  std::vector<int> distances_from(std::size_t x) const {
    std::vector<int> dist(n_, -1);
    std::queue<std::size_t> q;
    dist[x] = 0;
    q.push(x);
    while (!q.empty()) {
      const std::size_t u = q.front();
      q.pop();
      for (std::size_t p = row_[u]; p < row_[u + 1]; ++p) {
        if (dist[col_[p]] < 0) {
          dist[col_[p]] = dist[u] + 1;
          q.push(col_[p]);
        }
      }
    }
    return dist;
  }

  /// All-pairs distances, row-major n x n.
  std::vector<int> distance_table() const {
    std::vector<int> table(n_ * n_);
    parallel_for(n_, [&](std::size_t x) {
      const auto d = distances_from(x);
      std::copy(d.begin(), d.end(), table.begin() + static_cast<std::ptrdiff_t>(x * n_));
    });
    return table;
  }

 private:
  std::size_t n_ = 0;
  std::vector<Edge> edges_;
  std::vector<std::size_t> row_;
  std::vector<std::size_t> col_;
  std::vector<double> val_;
  std::vector<double> mu_;
};

/// Parses "x y mu_xy" lines (0-based ids); blank lines and '#' comments are
/// skipped. The vertex count is one more than the largest id.
inline WeightedGraph parse_edge_list(std::istream& in) {
  std::vector<Edge> edges;
  std::size_t n = 0;
  std::string line;
  int lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    const auto hash = line.find('#');
    if (hash != std::string::npos) line.erase(hash);
    std::istringstream ss(line);
    long long x = 0, y = 0;
    double w = 0.0;
    if (!(ss >> x)) continue;
    if (!(ss >> y >> w) || x < 0 || y < 0)
      throw InvalidArgument("graph_decomposition", "parse_edge_list",
                            "malformed edge on line " + std::to_string(lineno));
    std::string extra;
    if (ss >> extra)
      throw InvalidArgument("graph_decomposition", "parse_edge_list",
                            "trailing text on line " + std::to_string(lineno));
    edges.push_back({static_cast<std::size_t>(x), static_cast<std::size_t>(y), w});
    n = std::max<std::size_t>(n, static_cast<std::size_t>(std::max(x, y)) + 1);
  }
  return WeightedGraph(n, edges);
}

inline WeightedGraph cycle_graph(std::size_t n, double weight = 1.0) {
  std::vector<Edge> edges;
  for (std::size_t x = 0; x < n; ++x) edges.push_back({x, (x + 1) % n, weight});
  return WeightedGraph(n, edges);
}

inline WeightedGraph path_graph(std::size_t n, double weight = 1.0) {
  std::vector<Edge> edges;
  for (std::size_t x = 0; x + 1 < n; ++x) edges.push_back({x, x + 1, weight});
  return WeightedGraph(n, edges);
}

/// Connected random graph: a random spanning path plus each other pair with
/// probability p; weights uniform in [w_lo, w_hi].
inline WeightedGraph random_graph(std::size_t n, double p, std::uint64_t seed,
                                  double w_lo = 0.5, double w_hi = 2.0) {
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> weight(w_lo, w_hi), coin(0.0, 1.0);
  std::vector<std::size_t> order(n);
  for (std::size_t i = 0; i < n; ++i) order[i] = i;
  std::shuffle(order.begin(), order.end(), rng);
  std::vector<Edge> edges;
  std::vector<std::vector<bool>> used(n, std::vector<bool>(n, false));
  for (std::size_t i = 0; i + 1 < n; ++i) {
    const std::size_t a = order[i], b = order[i + 1];
    edges.push_back({a, b, weight(rng)});
    used[a][b] = used[b][a] = true;
  }
  for (std::size_t x = 0; x < n; ++x)
    for (std::size_t y = x + 1; y < n; ++y)
      if (!used[x][y] && coin(rng) < p) edges.push_back({x, y, weight(rng)});
  return WeightedGraph(n, edges);
}

enum class OperatorKind { laplacian, killed, resolvent };

inline const char* to_string(OperatorKind k) {
  switch (k) {
    case OperatorKind::laplacian: return "laplacian";
    case OperatorKind::killed: return "killed";
    case OperatorKind::resolvent: return "resolvent";
  }
  return "?";
}

/// L, kappa L + (1 - kappa) or L + m2 for the probabilistic Laplacian
/// (Lu)(x) = mu_x^-1 sum_y mu_xy (u(x) - u(y)); B bounds the spectrum.
struct GraphOperator {
  const WeightedGraph* graph = nullptr;
  OperatorKind kind = OperatorKind::laplacian;
  double kappa = 1.0;
  double m2 = 0.0;
  double B = 2.0;

  std::size_t size() const { return graph->size(); }

  /// Whether 0 is an eigenvalue (constants).
  bool singular() const {
    return kind == OperatorKind::laplacian || (kind == OperatorKind::resolvent && m2 == 0.0);
  }

  void apply(const double* u, double* out) const {
    const WeightedGraph& g = *graph;
    const auto& mu = g.measure();
    for (std::size_t x = 0; x < g.size(); ++x) {
      double s = 0.0;
      g.for_neighbors(x, [&](std::size_t y, double w) { s += w * (u[x] - u[y]); });
      double v = s / mu[x];
      if (kind == OperatorKind::killed) v = kappa * v + (1.0 - kappa) * u[x];
      if (kind == OperatorKind::resolvent) v += m2 * u[x];
      out[x] = v;
    }
  }
};

inline GraphOperator make_laplacian(const WeightedGraph& g) {
  return {&g, OperatorKind::laplacian, 1.0, 0.0, 2.0};
}

inline GraphOperator make_killed(const WeightedGraph& g, double kappa) {
  detail::require(kappa > 0 && kappa < 1, "graph_decomposition", "make_killed",
                  "kappa must lie in (0, 1), got " + std::to_string(kappa));
  return {&g, OperatorKind::killed, kappa, 0.0, 2.0};
}

inline GraphOperator make_resolvent(const WeightedGraph& g, double m2,
                                    double m2_max = std::numeric_limits<double>::infinity()) {
  detail::require(m2 >= 0 && m2 <= m2_max, "graph_decomposition", "make_resolvent",
                  "m2 outside [0, m2_max]: " + std::to_string(m2));
  return {&g, OperatorKind::resolvent, 1.0, m2, 2.0 + m2};
}

inline std::vector<double> laplacian_apply(const GraphOperator& op, const std::vector<double>& u) {
  if (u.size() != op.size())
    throw InvalidArgument("graph_decomposition", "laplacian_apply",
                          "vector has size " + std::to_string(u.size()) + ", graph has " +
                              std::to_string(op.size()) + " vertices");
  std::vector<double> out(u.size());
  op.apply(u.data(), out.data());
  return out;
}

/// sum of folded Chebyshev terms c_0 + 2 sum c_k T_k(X) applied to u with
/// X = p I - h A, by Clenshaw's recurrence on vectors. Entries that the
/// recurrence never reaches stay exact zeros.
inline std::vector<double> chebyshev_apply_affine(const GraphOperator& op,
                                                  const std::vector<double>& coeffs, double p,
                                                  double h, const std::vector<double>& u) {
  const std::size_t n = op.size();
  if (u.size() != n)
    throw InvalidArgument("graph_decomposition", "chebyshev_apply", "dimension mismatch");
  std::vector<double> out(n, 0.0);
  if (coeffs.empty()) return out;
  std::vector<double> b1(n, 0.0), b2(n, 0.0), b0(n), Ab(n);
  for (std::size_t k = coeffs.size() - 1; k >= 1; --k) {
    op.apply(b1.data(), Ab.data());
    for (std::size_t x = 0; x < n; ++x)
      b0[x] = 2.0 * coeffs[k] * u[x] + 2.0 * (p * b1[x] - h * Ab[x]) - b2[x];
    std::swap(b2, b1);
    std::swap(b1, b0);
  }
  op.apply(b1.data(), Ab.data());
  for (std::size_t x = 0; x < n; ++x) out[x] = coeffs[0] * u[x] + (p * b1[x] - h * Ab[x]) - b2[x];
  return out;
}

/// Same with X = I - (s/2) A, the rescaled-weight variable.
inline std::vector<double> chebyshev_apply(const GraphOperator& op,
                                           const std::vector<double>& coeffs,
                                           double argument_scale, const std::vector<double>& u) {
  return chebyshev_apply_affine(op, coeffs, 1.0, 0.5 * argument_scale, u);
}

/// Interval known to contain the spectrum for each operator kind.
inline std::pair<double, double> spectral_interval(const GraphOperator& op) {
  switch (op.kind) {
    case OperatorKind::killed: return {1.0 - op.kappa, op.B};
    case OperatorKind::resolvent: return {op.m2, op.B};
    default: return {0.0, op.B};
  }
}

/// W(A) u for a rescaled weight, including its multiplier.
inline std::vector<double> chebyshev_apply(const GraphOperator& op, const RescaledWeight& w,
                                           const std::vector<double>& u) {
  auto out = chebyshev_apply(op, w.weight.coeffs, w.argument_scale, u);
  for (double& v : out) v *= w.multiplier;
  return out;
}

/// Dense matrix of the operator.
inline Eigen::MatrixXd dense_operator(const GraphOperator& op) {
  const std::size_t n = op.size();
  Eigen::MatrixXd A(n, n);
  std::vector<double> e(n, 0.0), col(n);
  for (std::size_t y = 0; y < n; ++y) {
    e[y] = 1.0;
    op.apply(e.data(), col.data());
    e[y] = 0.0;
    for (std::size_t x = 0; x < n; ++x) A(x, y) = col[x];
  }
  return A;
}

/// Eigendecomposition of the symmetric form S = M^{1/2} A M^{-1/2}.
struct SpectralOracle {
  Eigen::VectorXd eigenvalues;
  Eigen::MatrixXd eigenvectors;
  Eigen::VectorXd sqrt_mu;

  explicit SpectralOracle(const GraphOperator& op) {
    const auto& mu = op.graph->measure();
    const auto n = static_cast<Eigen::Index>(op.size());
    sqrt_mu.resize(n);
    for (Eigen::Index i = 0; i < n; ++i) sqrt_mu(i) = std::sqrt(mu[i]);
    Eigen::MatrixXd S = sqrt_mu.asDiagonal() * dense_operator(op) * sqrt_mu.cwiseInverse().asDiagonal();
    S = 0.5 * (S + S.transpose()).eval();
    const Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(S);
    eigenvalues = es.eigenvalues();
    eigenvectors = es.eigenvectors();
  }

  /// f(A) = M^{-1/2} f(S) M^{1/2}.
  template <typename F>
  Eigen::MatrixXd function(F&& f) const {
    Eigen::VectorXd fv(eigenvalues.size());
    for (Eigen::Index i = 0; i < fv.size(); ++i) fv(i) = f(eigenvalues(i));
    const Eigen::MatrixXd fS = eigenvectors * fv.asDiagonal() * eigenvectors.transpose();
    return sqrt_mu.cwiseInverse().asDiagonal() * fS * sqrt_mu.asDiagonal();
  }

  /// Smallest eigenvalue, or the smallest above `zero` when skipping the kernel.
  double gap(bool skip_zero, double zero = 1e-10) const {
    for (Eigen::Index i = 0; i < eigenvalues.size(); ++i)
      if (!skip_zero || eigenvalues(i) > zero) return eigenvalues(i);
    return 0.0;
  }
};

/// mu-kernel of the inverse, G = A^-1 M^-1, symmetric. With `deflate` the
/// constant mode is dropped (pseudo-inverse on mu-mean-zero functions).
inline Eigen::MatrixXd dense_green(const GraphOperator& op, bool deflate = false) {
  const SpectralOracle so(op);
  if (op.singular() && !deflate)
    throw SingularOperatorError("graph_decomposition", "dense_green",
                                "operator has constants in its kernel; enable deflation");
  Eigen::MatrixXd G = so.function([&](double lambda) {
    return deflate && std::abs(lambda) < 1e-10 ? 0.0 : 1.0 / lambda;
  });
  const auto& mu = op.graph->measure();
  for (Eigen::Index y = 0; y < G.cols(); ++y) G.col(y) /= mu[y];
  return 0.5 * (G + G.transpose());
}

/// C_j = \int_{lo}^{hi} t^2 W_t(A) dt/t M^-1 with certificates.
struct ScaleBlock {
  int j = 0;
  double L_ratio = 2.0;
  double lower = 0.0;
  double upper = 0.0;
  int nodes = 0;
  Eigen::MatrixXd matrix;
  /// Block multiplier at lambda = 0, the weight carried by constants.
  double zero_mode_weight = 0.0;
  double asymmetry = 0.0;
  double min_eig = std::numeric_limits<double>::quiet_NaN();
  double max_eig = std::numeric_limits<double>::quiet_NaN();
  /// max |C(x, y)| over d(x, y) >= upper, relative to max |C|.
  double max_out_of_range = 0.0;
  double sup = 0.0;

  bool psd_ok(double tol = 1e-10) const { return min_eig >= -tol * max_eig; }
  bool range_ok(double tol = 1e-12) const { return max_out_of_range <= tol; }
};

struct BlockOptions {
  /// Full eigen certificates up to this size; above it they are skipped.
  std::size_t certificate_limit = 2048;
};

inline ScaleBlock interval_block(const GraphOperator& op, double lo, double hi, int nodes,
                                 const Mollifier& m, const Normalization& norm,
                                 const std::vector<int>& distances, const BlockOptions& opts = {}) {
  const std::size_t n = op.size();
  const DiscreteWeightFamily family(m, norm, op.B);
  const auto ext = block_coefficients_extended(family, lo, hi, nodes);
  const auto& mu = op.graph->measure();
  ScaleBlock b;
  b.lower = lo;
  b.upper = hi;
  b.nodes = nodes;
  b.zero_mode_weight = clenshaw_folded_compensated(ext, 1.0);
  // Same polynomial, expanded on the spectral interval: its far-scale
  // blocks are tiny there but large near lambda = 0, and rounding follows
  // the coefficient size.
  const auto [lo_spec, hi_spec] = spectral_interval(op);
  const auto local = reexpand_folded(ext, 1.0, 0.5 * family.argument_scale(), lo_spec, hi_spec);
  const double p = (lo_spec + hi_spec) / (hi_spec - lo_spec), h = 2.0 / (hi_spec - lo_spec);
  Eigen::MatrixXd C(n, n);
  parallel_for(n, [&](std::size_t y) {
    std::vector<double> delta(n, 0.0);
    delta[y] = 1.0;
    const auto col = chebyshev_apply_affine(op, local, p, h, delta);
    for (std::size_t x = 0; x < n; ++x) C(x, y) = col[x] / mu[y];
  });
  b.asymmetry = (C - C.transpose()).cwiseAbs().maxCoeff();
  b.matrix = 0.5 * (C + C.transpose());
  b.sup = b.matrix.cwiseAbs().maxCoeff();
  double out = 0.0;
  for (std::size_t x = 0; x < n; ++x)
    for (std::size_t y = 0; y < n; ++y) {
      const int dxy = distances[x * n + y];
      if (dxy < 0 || dxy >= hi) out = std::max(out, std::abs(b.matrix(x, y)));
    }
  b.max_out_of_range = b.sup > 0 ? out / b.sup : 0.0;
  if (n <= opts.certificate_limit) {
    const Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(b.matrix, Eigen::EigenvaluesOnly);
    b.min_eig = es.eigenvalues().minCoeff();
    b.max_eig = es.eigenvalues().maxCoeff();
  }
  return b;
}

inline ScaleBlock scale_block(const GraphOperator& op, const ScalePlan& plan, int j,
                              const Mollifier& m, const Normalization& norm,
                              const std::vector<int>& distances, const BlockOptions& opts = {}) {
  plan.validate("graph_decomposition", "scale_block");
  ScaleBlock b = interval_block(op, plan.lower(j), plan.upper(j), plan.nodes_per_block, m, norm,
                                distances, opts);
  b.j = j;
  b.L_ratio = plan.L_ratio;
  return b;
}

inline ScaleBlock scale_block(const GraphOperator& op, const ScalePlan& plan, int j,
                              const Mollifier& m, const Normalization& norm) {
  return scale_block(op, plan, j, m, norm, op.graph->distance_table());
}

/// Default plan: j_min from t_min = 1/4; j_max from the spectral gap and the
/// full spectrum (see resolved_j_max). Blocks keep the constant mode, so it
/// stays in the spectrum they are checked on.
inline ScalePlan default_plan(const GraphOperator& op, const Mollifier& m,
                              const Normalization& norm, bool deflate, double L_ratio = 2.0,
                              int nodes_per_block = 24) {
  const SpectralOracle so(op);
  const bool skip = deflate && op.singular();
  const double gap = so.gap(skip);
  detail::require(gap > 0, "graph_decomposition", "default_plan",
                  "operator is singular; enable deflation");
  const std::vector<double> spectrum(so.eigenvalues.data(),
                                     so.eigenvalues.data() + so.eigenvalues.size());
  ScalePlan plan;
  plan.L_ratio = L_ratio;
  plan.nodes_per_block = nodes_per_block;
  plan.j_min = default_j_min(L_ratio);
  plan.j_max = resolved_j_max(DiscreteWeightFamily(m, norm, op.B), plan, gap, spectrum);
  return plan;
}

struct GreenReconstruction {
  ScalePlan plan;
  std::vector<ScaleBlock> blocks;
  Eigen::MatrixXd green;
  Eigen::MatrixXd oracle;
  double max_abs_error = 0.0;
  /// max |sum C_j - G| / max |G|.
  double relative_error = 0.0;
  /// max over entries of |sum C_j - G| / |G|.
  double entrywise_error = 0.0;
  /// Bound on the scales above L^{j_max}, as an operator norm of the
  /// mu-kernel divided by min mu.
  double truncation_bound = 0.0;
  bool deflated = false;
};

/// sum_j C_j against the dense inverse. A singular operator needs `deflate`,
/// which removes the constant mode from the sum.
inline GreenReconstruction reconstruct_green(const GraphOperator& op, const ScalePlan& plan,
                                             const Mollifier& m, const Normalization& norm,
                                             bool deflate = false, const BlockOptions& opts = {}) {
  if (op.singular() && !deflate)
    throw SingularOperatorError("graph_decomposition", "reconstruct_green",
                                std::string(to_string(op.kind)) +
                                    " operator with m2 = 0 needs mean-zero deflation");
  plan.validate("graph_decomposition", "reconstruct_green");
  const std::size_t n = op.size();
  GreenReconstruction r;
  r.plan = plan;
  r.deflated = deflate && op.singular();
  const auto dist = op.graph->distance_table();
  r.green = Eigen::MatrixXd::Zero(n, n);
  double zero_weight = 0.0;
  for (int j = plan.j_min; j <= plan.j_max; ++j) {
    r.blocks.push_back(scale_block(op, plan, j, m, norm, dist, opts));
    r.green += r.blocks.back().matrix;
    zero_weight += r.blocks.back().zero_mode_weight;
  }
  if (r.deflated) r.green.array() -= zero_weight / op.graph->total_measure();
  r.oracle = dense_green(op, r.deflated);
  r.max_abs_error = (r.green - r.oracle).cwiseAbs().maxCoeff();
  r.relative_error = r.max_abs_error / r.oracle.cwiseAbs().maxCoeff();
  r.entrywise_error = ((r.green - r.oracle).array().abs() / r.oracle.array().abs()).maxCoeff();
  const SpectralOracle so(op);
  const auto& mu = op.graph->measure();
  r.truncation_bound = truncation_bound(DiscreteWeightFamily(m, norm, op.B), plan,
                                        so.gap(r.deflated)) /
                       *std::min_element(mu.begin(), mu.end());
  return r;
}

struct KilledConsistency {
  double kappa = 0.0;
  /// |(kappa L + 1 - kappa)^-1 - kappa^-1 (L + (1 - kappa)/kappa)^-1|, both dense.
  double dense_residual = 0.0;
  /// Block reconstruction of the killed Green function against
  /// kappa^-1 G_{(1-kappa)/kappa}, relative to its max.
  double reconstruction_residual = 0.0;
};

inline KilledConsistency killed_green_consistency(const WeightedGraph& g, double kappa,
                                                  const ScalePlan& plan, const Mollifier& m,
                                                  const Normalization& norm) {
  const GraphOperator killed = make_killed(g, kappa);
  const GraphOperator resolvent = make_resolvent(g, (1.0 - kappa) / kappa);
  KilledConsistency k;
  k.kappa = kappa;
  const Eigen::MatrixXd target = dense_green(resolvent) / kappa;
  k.dense_residual = (dense_green(killed) - target).cwiseAbs().maxCoeff();
  const GreenReconstruction r = reconstruct_green(killed, plan, m, norm);
  k.reconstruction_residual =
      (r.green - target).cwiseAbs().maxCoeff() / target.cwiseAbs().maxCoeff();
  return k;
}

}  // namespace frd

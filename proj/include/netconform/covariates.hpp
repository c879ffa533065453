#ifndef NETCONFORM_COVARIATES_HPP
#define NETCONFORM_COVARIATES_HPP

#include <algorithm>
#include <cmath>
#include <limits>
#include <optional>
#include <queue>
#include <string>
#include <variant>
#include <vector>

#include <fmt/core.h>

#include "netconform/error.hpp"
#include "netconform/graph.hpp"
#include "netconform/linalg.hpp"

namespace netconform {

/// What to report when a weighted average has no weight to average over.
enum class Fallback { global_mean, zero, error };

// ---------------------------------------------------------------------------
// Shortest-path structure
// ---------------------------------------------------------------------------

struct Reached {
  int node;
  int distance;
};

/// Nodes at shortest-path distance 1..kmax from `source`, in BFS order.
inline std::vector<Reached> bfs_within(const Graph& graph, int source, int kmax) {
  std::vector<Reached> out;
  std::vector<int> dist(static_cast<std::size_t>(graph.size()), -1);
  std::queue<int> frontier;
  dist[static_cast<std::size_t>(source)] = 0;
  frontier.push(source);
  while (!frontier.empty()) {
    const int u = frontier.front();
    frontier.pop();
    const int du = dist[static_cast<std::size_t>(u)];
    if (du == kmax) continue;
    for (const auto& nb : graph.neighbors(u)) {
      auto& dv = dist[static_cast<std::size_t>(nb.node)];
      if (dv < 0) {
        dv = du + 1;
        out.push_back({nb.node, dv});
        frontier.push(nb.node);
      }
    }
  }
  return out;
}

/// Neighbor weights beta_ij as a function of shortest-path length.
///
/// `uniform_one_hop`: beta = 1 for direct neighbors (edge weights ignored),
/// 0 otherwise. `geometric`: beta = gamma^(d - 1) for 1 <= d <= kmax.
struct WeightRule {
  enum class Kind { uniform_one_hop, geometric };
  Kind kind = Kind::uniform_one_hop;
  double gamma = 0.5;
  int kmax = 1;

  static WeightRule uniform() { return {}; }
  static WeightRule geometric_decay(double gamma, int kmax) {
    require(gamma > 0.0, ErrorCode::parameter, "geometric decay gamma must be positive");
    require(kmax >= 1, ErrorCode::parameter, "kmax must be at least 1");
    return {Kind::geometric, gamma, kmax};
  }

  double weight(int distance) const {
    if (kind == Kind::uniform_one_hop) return distance == 1 ? 1.0 : 0.0;
    return distance >= 1 && distance <= kmax ? std::pow(gamma, distance - 1) : 0.0;
  }
  int reach() const { return kind == Kind::uniform_one_hop ? 1 : kmax; }
};

/// Row-normalized weights: rows[i] lists (j, beta_ij / sum_j beta_ij). A row
/// is empty when node i has no admissible neighbor.
struct NeighborWeights {
  std::vector<std::vector<std::pair<int, double>>> rows;
  // True when the raw weights are symmetric, so D^{-1} W has a real spectrum.
  bool real_spectrum = false;
  int size() const { return static_cast<int>(rows.size()); }
};

inline std::vector<bool> membership(int n, const IndexSet& set) {
  std::vector<bool> in(static_cast<std::size_t>(n), false);
  for (int k : set) {
    if (k < 0 || k >= n) fail(ErrorCode::parameter, fmt::format("node index {} out of range", k));
    in[static_cast<std::size_t>(k)] = true;
  }
  return in;
}

/// Raw (unnormalized) weights beta_ij for j not in `exclude`.
inline std::vector<std::vector<std::pair<int, double>>> raw_neighbor_weights(
    const Graph& graph, const WeightRule& rule, const IndexSet& exclude) {
  const int n = graph.size();
  const auto excluded = membership(n, exclude);
  std::vector<std::vector<std::pair<int, double>>> rows(static_cast<std::size_t>(n));
  for (int i = 0; i < n; ++i) {
    auto& row = rows[static_cast<std::size_t>(i)];
    if (rule.kind == WeightRule::Kind::uniform_one_hop) {
      for (const auto& nb : graph.neighbors(i))
        if (!excluded[static_cast<std::size_t>(nb.node)]) row.emplace_back(nb.node, 1.0);
    } else {
      for (const auto& r : bfs_within(graph, i, rule.kmax))
        if (!excluded[static_cast<std::size_t>(r.node)]) row.emplace_back(r.node, rule.weight(r.distance));
      std::sort(row.begin(), row.end());
    }
  }
  return rows;
}

inline NeighborWeights neighbor_weights(const Graph& graph, const WeightRule& rule,
                                        const IndexSet& exclude) {
  NeighborWeights m;
  m.rows = raw_neighbor_weights(graph, rule, exclude);
  m.real_spectrum = exclude.empty();
  for (auto& row : m.rows) {
    double total = 0.0;
    for (const auto& [j, w] : row) total += w;
    if (total <= 0.0) {
      row.clear();
      continue;
    }
    for (auto& [j, w] : row) w /= total;
  }
  return m;
}

// ---------------------------------------------------------------------------
// Extractors
// ---------------------------------------------------------------------------

/// D_i = sum_{j != i} A_ij.
inline Vector degrees(const Graph& graph) {
  Vector d(graph.size());
  std::vector<double> terms;
  for (int i = 0; i < graph.size(); ++i) {
    terms.clear();
    for (const auto& nb : graph.neighbors(i)) terms.push_back(nb.weight);
    d(i) = order_free_sum(terms);
  }
  return d;
}

namespace detail {

/// Order-free total of the weights in `row`. Integer weights are summed
/// directly since their partial sums are exact in any order.
inline double row_weight_total(const std::vector<std::pair<int, double>>& row, std::vector<double>& den) {
  double direct = 0.0;
  bool integral = true;
  for (const auto& [j, w] : row) {
    integral = integral && w == std::floor(w) && std::abs(w) < 1e6;
    direct += w;
  }
  if (integral) return direct;
  den.clear();
  for (const auto& [j, w] : row) den.push_back(w);
  return order_free_sum(den);
}

inline double weighted_numerator(const std::vector<std::pair<int, double>>& row, const Vector& values,
                                 std::vector<double>& num) {
  num.clear();
  for (const auto& [j, w] : row) num.push_back(w * values(j));
  return order_free_sum(num);
}

inline double mean_over(const Vector& values, const IndexSet& set) {
  std::vector<double> terms;
  terms.reserve(set.size());
  for (int k : set) terms.push_back(values(k));
  require(!terms.empty(), ErrorCode::degeneracy, "global-mean fallback over an empty set");
  return order_free_sum(terms) / static_cast<double>(terms.size());
}

inline IndexSet all_nodes(int n) {
  IndexSet s(static_cast<std::size_t>(n));
  for (int i = 0; i < n; ++i) s[static_cast<std::size_t>(i)] = i;
  return s;
}

/// Applies weighted means row by row with a fallback for empty rows.
/// `fallback_set` is the node set whose mean is used for Fallback::global_mean.
inline Matrix averages_with_fallback(const std::vector<std::vector<std::pair<int, double>>>& rows,
                                     const Matrix& x, Fallback fallback,
                                     const IndexSet& fallback_set, const std::string& what) {
  const auto n = static_cast<Eigen::Index>(rows.size());
  Matrix out(n, x.cols());
  std::vector<double> num, den;
  std::vector<double> totals(rows.size());
  for (std::size_t i = 0; i < rows.size(); ++i) totals[i] = row_weight_total(rows[i], den);
  for (Eigen::Index c = 0; c < x.cols(); ++c) {
    const Vector col = x.col(c);
    std::optional<double> global;
    for (Eigen::Index i = 0; i < n; ++i) {
      const auto& row = rows[static_cast<std::size_t>(i)];
      const double total = totals[static_cast<std::size_t>(i)];
      if (total > 0.0) {
        out(i, c) = weighted_numerator(row, col, num) / total;
        continue;
      }
      switch (fallback) {
        case Fallback::zero: out(i, c) = 0.0; break;
        case Fallback::global_mean:
          if (!global) global = mean_over(col, fallback_set);
          out(i, c) = *global;
          break;
        case Fallback::error:
          fail(ErrorCode::degeneracy, fmt::format("{}: node {} has zero total weight", what, i));
      }
    }
  }
  return out;
}

}  // namespace detail

/// Z_i = sum_j A_ij X_j / D_i; nodes with D_i = 0 take the fallback.
inline Matrix neighborhood_average(const Graph& graph, const Matrix& x,
                                   Fallback fallback = Fallback::global_mean) {
  require(x.rows() == graph.size(), ErrorCode::parameter, "X rows must equal the node count");
  std::vector<std::vector<std::pair<int, double>>> rows(static_cast<std::size_t>(graph.size()));
  for (int i = 0; i < graph.size(); ++i)
    for (const auto& nb : graph.neighbors(i)) rows[static_cast<std::size_t>(i)].emplace_back(nb.node, nb.weight);
  return detail::averages_with_fallback(rows, x, fallback, detail::all_nodes(graph.size()),
                                        "neighborhood average");
}

/// Split analog of the neighborhood average: for each target k,
/// sum_{j in base} A_kj X_j / sum_{j in base} A_kj. Rows are returned in
/// `targets` order. The global-mean fallback averages over `base`.
inline Matrix split_neighborhood_average(const Graph& graph, const Matrix& x, const IndexSet& base,
                                         const IndexSet& targets,
                                         Fallback fallback = Fallback::global_mean) {
  require(x.rows() == graph.size(), ErrorCode::parameter, "X rows must equal the node count");
  require(!base.empty(), ErrorCode::parameter, "split statistic needs a nonempty base set");
  const auto in_base = membership(graph.size(), base);
  std::vector<std::vector<std::pair<int, double>>> rows(targets.size());
  for (std::size_t t = 0; t < targets.size(); ++t) {
    const int k = targets[t];
    require(k >= 0 && k < graph.size(), ErrorCode::parameter, "target index out of range");
    for (const auto& nb : graph.neighbors(k))
      if (in_base[static_cast<std::size_t>(nb.node)]) rows[t].emplace_back(nb.node, nb.weight);
  }
  return detail::averages_with_fallback(rows, x, fallback, base, "split neighborhood average");
}

/// Y~_i = sum_{j != i} beta_ij Y_j / sum_{j != i} beta_ij over non-excluded j.
/// The global-mean fallback averages Y over the non-excluded nodes.
inline Vector neighbor_weighted_response(const Graph& graph, const Vector& y, const WeightRule& rule,
                                         const IndexSet& exclude,
                                         Fallback fallback = Fallback::global_mean) {
  require(y.size() == graph.size(), ErrorCode::parameter, "response length must equal the node count");
  const auto rows = raw_neighbor_weights(graph, rule, exclude);
  const auto excluded = membership(graph.size(), exclude);
  IndexSet kept;
  for (int i = 0; i < graph.size(); ++i)
    if (!excluded[static_cast<std::size_t>(i)]) kept.push_back(i);
  // Excluded responses may be unknown (NaN); they never enter a sum.
  Vector safe = y;
  for (int i = 0; i < graph.size(); ++i)
    if (excluded[static_cast<std::size_t>(i)]) safe(i) = 0.0;
  Matrix col = safe;
  return detail::averages_with_fallback(rows, col, fallback, kept, "neighbor-weighted response").col(0);
}

struct KHopProfile {
  Eigen::MatrixXi counts;        // n x kmax, counts(i, k-1) = D~_i^(k)
  std::vector<Matrix> averages;  // kmax entries of n x p; NaN where the level is empty
  int kmax = 0;

  bool reached(int node, int k) const { return counts(node, k - 1) > 0; }
};

inline KHopProfile khop_stats(const Graph& graph, const Matrix& x, int kmax) {
  require(kmax >= 1, ErrorCode::parameter, "kmax must be at least 1");
  require(x.rows() == graph.size(), ErrorCode::parameter, "X rows must equal the node count");
  const int n = graph.size();
  KHopProfile prof;
  prof.kmax = kmax;
  prof.counts = Eigen::MatrixXi::Zero(n, kmax);
  prof.averages.assign(static_cast<std::size_t>(kmax),
                       Matrix::Constant(n, x.cols(), std::numeric_limits<double>::quiet_NaN()));
  std::vector<std::vector<double>> level_terms(static_cast<std::size_t>(kmax));
  for (int i = 0; i < n; ++i) {
    const auto reached = bfs_within(graph, i, kmax);
    for (const auto& r : reached) ++prof.counts(i, r.distance - 1);
    for (Eigen::Index c = 0; c < x.cols(); ++c) {
      for (auto& t : level_terms) t.clear();
      for (const auto& r : reached) level_terms[static_cast<std::size_t>(r.distance - 1)].push_back(x(r.node, c));
      for (int k = 0; k < kmax; ++k) {
        auto& terms = level_terms[static_cast<std::size_t>(k)];
        if (!terms.empty())
          prof.averages[static_cast<std::size_t>(k)](i, c) =
              order_free_sum(terms) / static_cast<double>(terms.size());
      }
    }
  }
  return prof;
}

// ---------------------------------------------------------------------------
// Adjacency spectral embedding
// ---------------------------------------------------------------------------

struct EigenSystem {
  Vector pos_values;     // descending, > 0
  Vector neg_magnitudes; // descending, > 0
  Matrix pos_vectors;    // n x p, orthonormal columns
  Matrix neg_vectors;    // n x q
  /// Smallest gap among the selected eigenvalues and their nearest
  /// unselected neighbors; +inf when nothing was selected.
  double min_gap = std::numeric_limits<double>::infinity();
};

struct SpectralEmbedding {
  Matrix uhat;  // n x p
  Matrix vhat;  // n x q
  EigenSystem eigen;
};

/// Rank (p, q) adjacency spectral embedding. Uhat_ir = sqrt(lambda_r) u_ri over
/// the p largest positive eigenvalues and Vhat_is = sqrt(gamma_s) v_si over the
/// q most negative ones, with the largest-magnitude-entry-positive sign
/// convention applied to every eigenvector.
inline SpectralEmbedding adjacency_spectral_embedding(const Graph& graph, int p, int q) {
  const int n = graph.size();
  require(p >= 0 && q >= 0 && p + q >= 1, ErrorCode::parameter, "need p, q >= 0 with p + q >= 1");
  require(p + q <= n, ErrorCode::parameter, fmt::format("p + q = {} exceeds n = {}", p + q, n));
  const Matrix& a = graph.adjacency();
  SpectralEmbedding out;
  const auto counts_message = [&]() {
    const Vector all = symmetric_eigenvalues(a);
    const auto positive = (all.array() > 0.0).count();
    const auto negative = (all.array() < 0.0).count();
    return fmt::format("requested p={} q={}, available positive={} negative={}", p, q, positive,
                       negative);
  };

  if (p > 0) {
    const int first = std::max(0, n - p - 1);
    auto top = symmetric_eigen_range(a, first, n - 1);
    const int have = static_cast<int>(top.values.size());
    if (top.values(have - p) <= 0.0) fail(ErrorCode::rank, counts_message());
    out.eigen.pos_values.resize(p);
    out.eigen.pos_vectors.resize(n, p);
    for (int r = 0; r < p; ++r) {
      out.eigen.pos_values(r) = top.values(have - 1 - r);
      out.eigen.pos_vectors.col(r) = top.vectors.col(have - 1 - r);
    }
    for (int r = 0; r + 1 < have; ++r)
      if (r + 1 >= have - p)
        out.eigen.min_gap = std::min(out.eigen.min_gap, top.values(r + 1) - top.values(r));
  } else {
    out.eigen.pos_vectors.resize(n, 0);
  }

  if (q > 0) {
    const int last = std::min(n - 1, q);
    auto bottom = symmetric_eigen_range(a, 0, last);
    if (bottom.values(q - 1) >= 0.0) fail(ErrorCode::rank, counts_message());
    out.eigen.neg_magnitudes.resize(q);
    out.eigen.neg_vectors.resize(n, q);
    for (int s = 0; s < q; ++s) {
      out.eigen.neg_magnitudes(s) = -bottom.values(s);
      out.eigen.neg_vectors.col(s) = bottom.vectors.col(s);
    }
    for (int s = 0; s + 1 < static_cast<int>(bottom.values.size()) && s < q; ++s)
      out.eigen.min_gap = std::min(out.eigen.min_gap, bottom.values(s + 1) - bottom.values(s));
  } else {
    out.eigen.neg_vectors.resize(n, 0);
  }

  apply_sign_convention(out.eigen.pos_vectors);
  apply_sign_convention(out.eigen.neg_vectors);
  out.uhat = out.eigen.pos_vectors * out.eigen.pos_values.cwiseSqrt().asDiagonal();
  out.vhat = out.eigen.neg_vectors * out.eigen.neg_magnitudes.cwiseSqrt().asDiagonal();
  return out;
}

// ---------------------------------------------------------------------------
// Covariate specifications
// ---------------------------------------------------------------------------

struct DegreeExtractor {};
struct AseExtractor {
  int p = 3;
  int q = 0;
};
struct NeighborhoodAverageExtractor {
  std::vector<int> columns;  // empty = all X columns
  Fallback fallback = Fallback::global_mean;
};
struct KHopExtractor {
  int kmax = 2;
  std::vector<int> columns;
  Fallback fallback = Fallback::global_mean;
};
/// Averages over the context's base set; `use_response` averages the
/// context response instead of X columns.
struct SplitAverageExtractor {
  std::vector<int> columns;
  bool use_response = false;
  Fallback fallback = Fallback::global_mean;
};
struct NeighborResponseExtractor {
  WeightRule rule;
  Fallback fallback = Fallback::global_mean;
};

using Extractor = std::variant<DegreeExtractor, AseExtractor, NeighborhoodAverageExtractor,
                               KHopExtractor, SplitAverageExtractor, NeighborResponseExtractor>;

struct CovariateSpec {
  std::vector<Extractor> extractors;
};

/// Split indices and responses some extractors depend on.
struct CovariateContext {
  IndexSet base;                  // split statistics average over these nodes
  IndexSet exclude;               // nodes left out of neighbor-weighted responses
  std::optional<Vector> response; // needed by response-based extractors
};

struct CovariateMatrix {
  Matrix values;
  std::vector<std::string> names;
  double min_spectral_gap = std::numeric_limits<double>::infinity();
};

namespace detail {

inline Matrix select_columns(const Matrix& x, const std::vector<int>& columns) {
  if (columns.empty()) return x;
  Matrix out(x.rows(), static_cast<Eigen::Index>(columns.size()));
  for (std::size_t c = 0; c < columns.size(); ++c) {
    require(columns[c] >= 0 && columns[c] < x.cols(), ErrorCode::parameter,
            fmt::format("covariate column {} does not exist", columns[c]));
    out.col(static_cast<Eigen::Index>(c)) = x.col(columns[c]);
  }
  return out;
}

inline std::vector<int> resolved_columns(const Matrix& x, const std::vector<int>& columns) {
  if (!columns.empty()) return columns;
  std::vector<int> all(static_cast<std::size_t>(x.cols()));
  for (int c = 0; c < x.cols(); ++c) all[static_cast<std::size_t>(c)] = c;
  return all;
}

inline void append(CovariateMatrix& out, const Matrix& block, std::vector<std::string> names) {
  Matrix joined(block.rows(), out.values.cols() + block.cols());
  joined << out.values, block;
  out.values = std::move(joined);
  for (auto& name : names) out.names.push_back(std::move(name));
}

}  // namespace detail

/// Column-concatenation of every extractor's output, in spec order.
inline CovariateMatrix apply_covariate_spec(const CovariateSpec& spec, const Graph& graph,
                                            const Matrix& x, const CovariateContext& context = {}) {
  const int n = graph.size();
  require(x.rows() == n, ErrorCode::parameter, "X rows must equal the node count");
  CovariateMatrix out;
  out.values.resize(n, 0);
  for (const auto& extractor : spec.extractors) {
    std::visit(
        [&](const auto& e) {
          using T = std::decay_t<decltype(e)>;
          if constexpr (std::is_same_v<T, DegreeExtractor>) {
            detail::append(out, degrees(graph), {"degree"});
          } else if constexpr (std::is_same_v<T, AseExtractor>) {
            const auto emb = adjacency_spectral_embedding(graph, e.p, e.q);
            std::vector<std::string> names;
            for (int r = 0; r < e.p; ++r) names.push_back(fmt::format("ase_u{}", r + 1));
            for (int s = 0; s < e.q; ++s) names.push_back(fmt::format("ase_v{}", s + 1));
            Matrix block(n, e.p + e.q);
            block << emb.uhat, emb.vhat;
            detail::append(out, block, std::move(names));
            out.min_spectral_gap = std::min(out.min_spectral_gap, emb.eigen.min_gap);
          } else if constexpr (std::is_same_v<T, NeighborhoodAverageExtractor>) {
            std::vector<std::string> names;
            for (int c : detail::resolved_columns(x, e.columns)) names.push_back(fmt::format("nbr_avg_x{}", c));
            detail::append(out, neighborhood_average(graph, detail::select_columns(x, e.columns), e.fallback),
                           std::move(names));
          } else if constexpr (std::is_same_v<T, KHopExtractor>) {
            const Matrix xs = detail::select_columns(x, e.columns);
            const auto prof = khop_stats(graph, xs, e.kmax);
            const auto cols = detail::resolved_columns(x, e.columns);
            for (int k = 1; k <= e.kmax; ++k) {
              Matrix counts = prof.counts.col(k - 1).template cast<double>();
              detail::append(out, counts, {fmt::format("khop{}_count", k)});
              Matrix avg = prof.averages[static_cast<std::size_t>(k - 1)];
              for (Eigen::Index c = 0; c < avg.cols(); ++c) {
                std::optional<double> global;
                for (int i = 0; i < n; ++i) {
                  if (prof.reached(i, k)) continue;
                  switch (e.fallback) {
                    case Fallback::zero: avg(i, c) = 0.0; break;
                    case Fallback::global_mean:
                      if (!global) global = detail::mean_over(Vector(xs.col(c)), detail::all_nodes(n));
                      avg(i, c) = *global;
                      break;
                    case Fallback::error:
                      fail(ErrorCode::degeneracy, fmt::format("k-hop level {} empty at node {}", k, i));
                  }
                }
              }
              std::vector<std::string> names;
              for (int c : cols) names.push_back(fmt::format("khop{}_avg_x{}", k, c));
              detail::append(out, avg, std::move(names));
            }
          } else if constexpr (std::is_same_v<T, SplitAverageExtractor>) {
            const IndexSet targets = detail::all_nodes(n);
            if (e.use_response) {
              require(context.response.has_value(), ErrorCode::parameter,
                      "split response average needs a response vector");
              Vector safe = *context.response;
              const auto in_base = membership(n, context.base);
              for (int i = 0; i < n; ++i)
                if (!in_base[static_cast<std::size_t>(i)]) safe(i) = 0.0;
              Matrix col = safe;
              detail::append(out, split_neighborhood_average(graph, col, context.base, targets, e.fallback),
                             {"split_avg_y"});
            } else {
              std::vector<std::string> names;
              for (int c : detail::resolved_columns(x, e.columns)) names.push_back(fmt::format("split_avg_x{}", c));
              detail::append(out,
                             split_neighborhood_average(graph, detail::select_columns(x, e.columns),
                                                        context.base, targets, e.fallback),
                             std::move(names));
            }
          } else if constexpr (std::is_same_v<T, NeighborResponseExtractor>) {
            require(context.response.has_value(), ErrorCode::parameter,
                    "neighbor-weighted response needs a response vector");
            Matrix col = neighbor_weighted_response(graph, *context.response, e.rule, context.exclude, e.fallback);
            detail::append(out, col, {"nbr_response"});
          }
        },
        extractor);
  }
  return out;
}

inline bool is_spectral(const CovariateSpec& spec) {
  return std::any_of(spec.extractors.begin(), spec.extractors.end(),
                     [](const Extractor& e) { return std::holds_alternative<AseExtractor>(e); });
}

struct EquivarianceReport {
  double max_discrepancy = 0.0;
  double tolerance = 0.0;
  bool passed = false;
  bool skipped = false;  // spectrum not simple enough for the comparison to be meaningful
  double min_spectral_gap = std::numeric_limits<double>::infinity();
};

/// Eigengap below which spectral extractors are not compared.
inline constexpr double equivariance_min_eigengap = 1e-6;

/// Compares zeta(A^sigma, X^sigma) with the row-permuted zeta(A, X).
inline EquivarianceReport check_equivariance(const CovariateSpec& spec, const Graph& graph,
                                             const Matrix& x, const Permutation& sigma, double tol,
                                             const CovariateContext& context = {}) {
  require(sigma.size() == graph.size(), ErrorCode::parameter, "permutation size must equal n");
  const CovariateMatrix original = apply_covariate_spec(spec, graph, x, context);

  CovariateContext permuted_context;
  permuted_context.base = sigma.relabel(context.base);
  permuted_context.exclude = sigma.relabel(context.exclude);
  if (context.response) permuted_context.response = sigma.rows(*context.response);
  const CovariateMatrix permuted =
      apply_covariate_spec(spec, sigma.apply(graph), sigma.rows(x), permuted_context);

  EquivarianceReport report;
  report.tolerance = tol;
  report.min_spectral_gap = std::min(original.min_spectral_gap, permuted.min_spectral_gap);
  if (is_spectral(spec) && report.min_spectral_gap <= equivariance_min_eigengap) {
    report.skipped = true;
    return report;
  }
  const Matrix expected = sigma.rows(original.values);
  report.max_discrepancy =
      expected.size() == 0 ? 0.0 : (expected - permuted.values).cwiseAbs().maxCoeff();
  report.passed = report.max_discrepancy <= tol;
  return report;
}

}  // namespace netconform

#endif  // NETCONFORM_COVARIATES_HPP

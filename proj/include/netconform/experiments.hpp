#ifndef NETCONFORM_EXPERIMENTS_HPP
#define NETCONFORM_EXPERIMENTS_HPP

#include <algorithm>
#include <atomic>
#include <cmath>
#include <cstdint>
#include <exception>
#include <map>
#include <mutex>
#include <numbers>
#include <numeric>
#include <optional>
#include <string>
#include <thread>
#include <vector>

#include <fmt/core.h>

#include "netconform/conformal.hpp"
#include "netconform/covariates.hpp"
#include "netconform/error.hpp"
#include "netconform/graph.hpp"
#include "netconform/graphgen.hpp"
#include "netconform/linalg.hpp"
#include "netconform/regress.hpp"
#include "netconform/rng.hpp"
#include "netconform/stats.hpp"

namespace netconform {

enum class Scenario { rdpg_linear, sar, heteroscedastic, synthetic_classification };

inline std::string scenario_name(Scenario s) {
  switch (s) {
    case Scenario::rdpg_linear: return "rdpg_linear";
    case Scenario::sar: return "sar";
    case Scenario::heteroscedastic: return "heteroscedastic";
    case Scenario::synthetic_classification: return "synthetic_classification";
  }
  return "?";
}

inline Scenario scenario_from_name(const std::string& name) {
  if (name == "rdpg_linear") return Scenario::rdpg_linear;
  if (name == "sar") return Scenario::sar;
  if (name == "heteroscedastic") return Scenario::heteroscedastic;
  if (name == "synthetic_classification") return Scenario::synthetic_classification;
  fail(ErrorCode::config, fmt::format("unknown scenario '{}'", name));
}

struct ExperimentConfig {
  Scenario scenario = Scenario::rdpg_linear;
  int n = 1000;  // labelled nodes per replicate, split evenly into train and calibration
  std::vector<double> sparsity_exponents{0.1};  // nu_n = n^(-e)
  double alpha = 0.1;
  int replicates = 200;
  std::uint64_t seed = 0;
  int test_per_replicate = 1;
  int threads = 1;
  // Level of the parametric-normal comparator; unset means alpha for
  // rdpg_linear and 0.05 for sar.
  std::optional<double> parametric_alpha;

  // sar
  std::vector<int> sar_models{1, 2, 3};
  int population = 3000;
  double sar_rho = 0.7;

  // heteroscedastic
  bool homoscedastic = false;
  int curve_points = 50;
  double curve_bandwidth = 0.0;  // 0 = 8% of the observed z range
  int cv_folds = 5;

  // synthetic_classification: block_in, block_out, label rates, features
  double block_in = 0.5;
  double block_out = 0.1;
  double label_prob_block0 = 0.2;
  double label_prob_block1 = 0.8;
  int feature_dim = 3;
  double feature_shift = 1.0;
  bool randomized_scores = false;

  void validate() const {
    require(replicates >= 1, ErrorCode::config, "replicates must be at least 1");
    require(alpha > 0.0 && alpha < 1.0, ErrorCode::config, "alpha must lie in (0, 1)");
    require(n >= 4, ErrorCode::config, "n must be at least 4");
    require(test_per_replicate >= 1, ErrorCode::config, "need at least one test node per replicate");
    require(!sparsity_exponents.empty(), ErrorCode::config, "need at least one sparsity exponent");
    for (double e : sparsity_exponents) require(e >= 0.0, ErrorCode::config, "sparsity exponent must be >= 0");
    for (int m : sar_models) require(m >= 1 && m <= 3, ErrorCode::config, "SAR model ids are 1, 2, 3");
    if (parametric_alpha)
      require(*parametric_alpha > 0.0 && *parametric_alpha < 1.0, ErrorCode::config,
              "parametric_alpha must lie in (0, 1)");
  }

  double comparator_alpha() const {
    if (parametric_alpha) return *parametric_alpha;
    return scenario == Scenario::sar ? 0.05 : alpha;
  }

  double sparsity(double exponent) const { return std::pow(static_cast<double>(n), -exponent); }
  int train_size() const { return n / 2; }
  int calibration_size() const { return n - n / 2; }
};

inline std::string sparsity_label(double exponent) { return fmt::format("nu=n^-{:g}", exponent); }

struct CoverageReport {
  std::string method;
  std::string cell;
  long hits = 0;
  long total = 0;
  double coverage = 0.0;
  Interval coverage_ci;
  double mean_width = 0.0;  // mean set size for classification
  long infinite_widths = 0;
  int replicates = 0;
};

struct ConditionalRecord {
  std::string method;
  std::string cell;
  double z_true = 0.0;
  bool hit = false;
  double width = 0.0;
};

struct CurveRow {
  std::string method;
  std::string cell;
  double z = 0.0;
  double coverage_smooth = 0.0;
  bool defined = true;
};

struct ExperimentResult {
  std::vector<CoverageReport> reports;
  std::vector<ConditionalRecord> records;
  std::vector<CurveRow> curves;
  std::map<std::string, long> error_counts;  // error code -> failed replicates
  long flagged = 0;                          // isolated SAR nodes, forced singleton sets, ...
};

// ---------------------------------------------------------------------------
// Replicate machinery
// ---------------------------------------------------------------------------

/// Runs fn(rep) for rep in [0, count) on up to `threads` workers. Results are
/// stored by index, so the reduction order never depends on scheduling.
template <class Outcome, class Fn>
std::vector<Outcome> run_replicates(int count, int threads, Fn fn) {
  std::vector<Outcome> out(static_cast<std::size_t>(count));
  const int workers = std::max(1, std::min(threads <= 0 ? static_cast<int>(std::thread::hardware_concurrency()) : threads, count));
  if (workers == 1) {
    for (int r = 0; r < count; ++r) out[static_cast<std::size_t>(r)] = fn(r);
    return out;
  }
  std::atomic<int> next{0};
  std::exception_ptr failure;
  std::mutex failure_mutex;
  std::vector<std::thread> pool;
  for (int w = 0; w < workers; ++w) {
    pool.emplace_back([&] {
      for (int r = next++; r < count; r = next++) {
        try {
          out[static_cast<std::size_t>(r)] = fn(r);
        } catch (...) {
          std::lock_guard lock(failure_mutex);
          if (!failure) failure = std::current_exception();
        }
      }
    });
  }
  for (auto& t : pool) t.join();
  if (failure) std::rethrow_exception(failure);
  return out;
}

/// One scored test node.
struct TestOutcome {
  bool hit = false;
  double width = 0.0;
  double z_true = 0.0;
};

struct ReplicateOutcome {
  std::map<std::string, std::vector<TestOutcome>> by_method;
  std::optional<ErrorCode> error;
  long flagged = 0;
};

/// Random split of `count` nodes into (train, calibration, test) of the given sizes.
struct NodeSplit {
  IndexSet train, calibration, test;
};

inline NodeSplit random_split(int count, int train, int calibration, int test, RngStream& rng) {
  require(train + calibration + test <= count, ErrorCode::parameter, "split sizes exceed node count");
  std::vector<int> order(static_cast<std::size_t>(count));
  std::iota(order.begin(), order.end(), 0);
  std::shuffle(order.begin(), order.end(), rng);
  NodeSplit s;
  auto it = order.begin();
  s.train.assign(it, it + train);
  it += train;
  s.calibration.assign(it, it + calibration);
  it += calibration;
  s.test.assign(it, it + test);
  for (auto* set : {&s.train, &s.calibration, &s.test}) std::sort(set->begin(), set->end());
  return s;
}

inline CoverageReport summarize(const std::string& method, const std::string& cell,
                                const std::vector<TestOutcome>& outcomes, int replicates) {
  CoverageReport rep;
  rep.method = method;
  rep.cell = cell;
  rep.replicates = replicates;
  rep.total = static_cast<long>(outcomes.size());
  double width_sum = 0.0;
  for (const auto& o : outcomes) {
    rep.hits += o.hit ? 1 : 0;
    if (std::isinf(o.width)) ++rep.infinite_widths;
    else width_sum += o.width;
  }
  if (rep.total > 0) {
    rep.coverage = static_cast<double>(rep.hits) / static_cast<double>(rep.total);
    rep.coverage_ci = binomial_ci(rep.hits, rep.total, 0.95);
    rep.mean_width = rep.infinite_widths > 0 ? infinity : width_sum / static_cast<double>(rep.total);
  }
  return rep;
}

/// Collects replicate outcomes for one cell into reports (and conditional
/// records), in `methods` order.
inline void collect_cell(ExperimentResult& result, const std::string& cell,
                         const std::vector<std::string>& methods,
                         const std::vector<ReplicateOutcome>& outcomes, bool keep_records) {
  int ok = 0;
  for (const auto& o : outcomes) {
    if (o.error) {
      ++result.error_counts[std::string(code_name(*o.error))];
      continue;
    }
    ++ok;
    result.flagged += o.flagged;
  }
  for (const auto& method : methods) {
    std::vector<TestOutcome> all;
    for (const auto& o : outcomes) {
      if (o.error) continue;
      auto it = o.by_method.find(method);
      if (it == o.by_method.end()) continue;
      for (const auto& t : it->second) {
        all.push_back(t);
        if (keep_records) result.records.push_back({method, cell, t.z_true, t.hit, t.width});
      }
    }
    result.reports.push_back(summarize(method, cell, all, ok));
  }
}

template <class Fn>
ReplicateOutcome guarded(Fn fn) {
  try {
    return fn();
  } catch (const Error& e) {
    ReplicateOutcome o;
    o.error = e.code();
    return o;
  }
}

// ---------------------------------------------------------------------------
// Data generators
// ---------------------------------------------------------------------------

/// One simulated network dataset. `latent` holds the population quantity
/// each scenario conditions on (xi, Z, Z_true or block).
struct SimulatedNetwork {
  Graph graph;
  Matrix x;
  Vector y;
  Vector latent;
  std::vector<std::string> x_names;
  long isolated = 0;
};

/// Rank-3 min-graphon latent positions; X = U Z1 + W, U ~ U[1, 2], W ~ N(0, 1);
/// Y = 3 + 2X + 10 Z1 + 15 Z2 - 17 Z3 + eps; A ~ Bernoulli(nu Z Z^T).
inline SimulatedNetwork simulate_rdpg_linear(int nodes, double nu, const RngStream& base) {
  static const auto eigen = min_graphon_eigenpairs(3);
  RngStream latent_rng = base.substream("latent");
  RngStream cov_rng = base.substream("covariates");
  RngStream edge_rng = base.substream("edges");
  const auto pos = sample_latent_positions(nodes, latent_rng);
  const Matrix z = eigen.latent_positions(pos.xi);
  Matrix x(nodes, 1);
  Vector y(nodes);
  for (int i = 0; i < nodes; ++i) {
    const double u = cov_rng.uniform(1.0, 2.0);
    x(i, 0) = u * z(i, 0) + cov_rng.normal();
    y(i) = 3.0 + 2.0 * x(i, 0) + 10.0 * z(i, 0) + 15.0 * z(i, 1) - 17.0 * z(i, 2) + cov_rng.normal();
  }
  return {sample_bernoulli_graph(rdpg_mean_matrix(z, nu), edge_rng), x, y, pos.xi, {"x"}, 0};
}

/// Draws (X1, X2, Z) ~ N(mu, Sigma) with the fixed mean and covariance of the
/// SAR study.
inline Matrix sar_exogenous_draws(int count, RngStream& rng) {
  Eigen::Vector3d mu(1.0, 3.0, 0.0);
  Eigen::Matrix3d sigma;
  sigma << 1.0, 0.6, 0.3, 0.6, 4.0, -0.4, 0.3, -0.4, 1.0;
  const Eigen::Matrix3d l = sigma.llt().matrixL();
  Matrix out(count, 3);
  for (int i = 0; i < count; ++i) {
    Eigen::Vector3d e(rng.normal(), rng.normal(), rng.normal());
    out.row(i) = (mu + l * e).transpose();
  }
  return out;
}

inline SarModelSpec sar_study_spec(double rho) {
  SarModelSpec spec;
  spec.beta = Eigen::Vector2d(4.0, 5.0);
  spec.neighbor_beta = Eigen::Vector2d(2.0, 3.0);
  spec.rho = rho;
  spec.noise_sd = 1.0;
  return spec;
}

/// Gaussian latent space graph on Z with responses from the SAR model.
inline SimulatedNetwork simulate_sar(int population, double nu, const SarModelSpec& spec, const RngStream& base) {
  RngStream cov_rng = base.substream("covariates");
  RngStream edge_rng = base.substream("edges");
  RngStream noise_rng = base.substream("noise");
  const Matrix draws = sar_exogenous_draws(population, cov_rng);
  const Matrix x = draws.leftCols(2);
  Graph graph = sample_bernoulli_graph(gaussian_latent_space_probs(draws.col(2), nu), edge_rng);
  const SarResponse sar = generate_sar_response(graph, x, spec, noise_rng);
  return {std::move(graph), x, sar.y, draws.col(2), {"x1", "x2"}, static_cast<long>(sar.isolated.size())};
}

/// Y = 4 + 5 sin(3 pi Z) + s(Z) eps with Z = xi^2 - xi + 1/2 and
/// s(Z) = exp(15 Z)/250 (or 1 when homoscedastic); graphon |u - v|.
inline SimulatedNetwork simulate_heteroscedastic(int nodes, double nu, bool homoscedastic, const RngStream& base) {
  RngStream latent_rng = base.substream("latent");
  RngStream noise_rng = base.substream("noise");
  RngStream edge_rng = base.substream("edges");
  const auto pos = sample_latent_positions(nodes, latent_rng);
  Vector z_true(nodes), y(nodes);
  for (int i = 0; i < nodes; ++i) {
    const double xi = pos.xi(i);
    z_true(i) = xi * xi - xi + 0.5;
    const double scale = homoscedastic ? 1.0 : std::exp(15.0 * z_true(i)) / 250.0;
    y(i) = 4.0 + 5.0 * std::sin(3.0 * std::numbers::pi * z_true(i)) + scale * noise_rng.normal();
  }
  return {sample_graphon_graph(GraphonSpec::abs_diff(), nu, pos, edge_rng), Matrix(nodes, 0), y, z_true, {}, 0};
}

struct SbmClassificationSpec {
  double block_in = 0.5;
  double block_out = 0.1;
  double label_prob_block0 = 0.2;
  double label_prob_block1 = 0.8;
  int feature_dim = 3;
  double feature_shift = 1.0;
};

/// Two equiprobable blocks, block-dependent label rates, Gaussian features
/// with the first coordinate shifted by +-feature_shift according to the label.
inline SimulatedNetwork simulate_sbm_classification(int nodes, double nu, const SbmClassificationSpec& spec,
                                                    const RngStream& base) {
  require(spec.feature_dim >= 1, ErrorCode::parameter, "need at least one feature");
  RngStream node_rng = base.substream("nodes");
  RngStream edge_rng = base.substream("edges");
  Vector block(nodes), labels(nodes);
  Matrix x(nodes, spec.feature_dim);
  for (int i = 0; i < nodes; ++i) {
    block(i) = node_rng.uniform() <= 0.5 ? 1.0 : 0.0;
    const double rate = block(i) > 0.5 ? spec.label_prob_block1 : spec.label_prob_block0;
    labels(i) = node_rng.uniform() <= rate ? 1.0 : 0.0;
    for (int c = 0; c < spec.feature_dim; ++c) x(i, c) = node_rng.normal();
    x(i, 0) += spec.feature_shift * (2.0 * labels(i) - 1.0);
  }
  Matrix p(nodes, nodes);
  for (int i = 0; i < nodes; ++i)
    for (int j = 0; j < nodes; ++j)
      p(i, j) = i == j ? 0.0 : std::min(1.0, nu * (block(i) == block(j) ? spec.block_in : spec.block_out));
  std::vector<std::string> names;
  for (int c = 0; c < spec.feature_dim; ++c) names.push_back(fmt::format("f{}", c));
  return {sample_bernoulli_graph(p, edge_rng), x, labels, block, names, 0};
}

// ---------------------------------------------------------------------------
// Linear model with RDPG embeddings
// ---------------------------------------------------------------------------

/// Conformal (absolute residual, OLS on [X, ASE(3,0)]) versus the parametric
/// normal interval of the same fit.
inline ExperimentResult run_rdpg_linear(const ExperimentConfig& cfg) {
  cfg.validate();
  require(cfg.scenario == Scenario::rdpg_linear, ErrorCode::config, "scenario must be rdpg_linear");
  ExperimentResult result;
  const int nodes = cfg.n + cfg.test_per_replicate;
  const std::vector<std::string> methods{"conformal", "parametric_normal"};

  for (double exponent : cfg.sparsity_exponents) {
    const double nu = std::min(1.0, cfg.sparsity(exponent));
    const std::string tag = "rdpg/" + sparsity_label(exponent);
    auto outcomes = run_replicates<ReplicateOutcome>(cfg.replicates, cfg.threads, [&](int rep) {
      return guarded([&] {
        const RngStream base = RngStream(cfg.seed, static_cast<std::uint64_t>(rep)).substream(tag);
        RngStream split_rng = base.substream("split");
        RngStream conf_rng = base.substream("conformal");
        const auto sim = simulate_rdpg_linear(nodes, nu, base);
        const auto emb = adjacency_spectral_embedding(sim.graph, 3, 0);
        const auto split = random_split(nodes, cfg.train_size(), cfg.calibration_size(),
                                        cfg.test_per_replicate, split_rng);
        ConformalData data{sim.x, emb.uhat, sim.y, split.train, split.calibration, split.test};
        const auto conf = split_conformal(data, ScoreSpec{}, cfg.alpha, conf_rng);
        ReplicateOutcome o;
        for (std::size_t k = 0; k < split.test.size(); ++k) {
          const int i = split.test[k];
          o.by_method["conformal"].push_back({conf.covered[k], conf.intervals[k].width(), sim.latent(i)});
          const auto normal = parametric_normal_interval(*conf.linear, data.features(i), cfg.comparator_alpha());
          o.by_method["parametric_normal"].push_back(
              {normal.lower <= sim.y(i) && sim.y(i) <= normal.upper, normal.upper - normal.lower, sim.latent(i)});
        }
        return o;
      });
    });
    collect_cell(result, sparsity_label(exponent), methods, outcomes, false);
  }
  return result;
}

// ---------------------------------------------------------------------------
// Spatial autoregressive model
// ---------------------------------------------------------------------------

inline std::string sar_cell(int model, double exponent) {
  return fmt::format("model={};{}", model, sparsity_label(exponent));
}

/// Design blocks for SAR models 1-3: none; neighbor averages of X; those plus
/// the neighbor-weighted response with the test nodes excluded.
inline Matrix sar_network_covariates(int model, const Matrix& x_avg, const Vector& y_avg) {
  Matrix z(x_avg.rows(), model == 1 ? 0 : (model == 2 ? 2 : 3));
  if (model >= 2) z.leftCols(2) = x_avg;
  if (model == 3) z.col(2) = y_avg;
  return z;
}

/// Population N = max(population, n + tests); models 1-3 are fitted on the
/// same replicate so the cells share draws.
inline ExperimentResult run_sar(const ExperimentConfig& cfg) {
  cfg.validate();
  require(cfg.scenario == Scenario::sar, ErrorCode::config, "scenario must be sar");
  ExperimentResult result;
  const int tests = cfg.test_per_replicate;
  const int population = std::max(cfg.population, cfg.n + tests);
  const SarModelSpec spec = sar_study_spec(cfg.sar_rho);
  const std::vector<std::string> methods{"conformal", "parametric_normal"};

  for (double exponent : cfg.sparsity_exponents) {
    const double nu = std::min(1.0, cfg.sparsity(exponent));
    const std::string tag = "sar/" + sparsity_label(exponent);
    auto outcomes = run_replicates<ReplicateOutcome>(cfg.replicates, cfg.threads, [&](int rep) {
      return guarded([&] {
        const RngStream base = RngStream(cfg.seed, static_cast<std::uint64_t>(rep)).substream(tag);
        RngStream split_rng = base.substream("split");
        const auto sim = simulate_sar(population, nu, spec, base);
        const auto split = random_split(population, cfg.train_size(), cfg.calibration_size(), tests, split_rng);
        const Matrix x_avg = neighborhood_average(sim.graph, sim.x, Fallback::zero);
        const Vector y_avg =
            neighbor_weighted_response(sim.graph, sim.y, WeightRule::uniform(), split.test, Fallback::zero);
        ReplicateOutcome o;
        o.flagged = sim.isolated;
        for (int model : cfg.sar_models) {
          ConformalData data{sim.x, sar_network_covariates(model, x_avg, y_avg), sim.y,
                             split.train, split.calibration, split.test};
          RngStream conf_rng = base.substream(fmt::format("conformal/{}", model));
          const auto conf = split_conformal(data, ScoreSpec{}, cfg.alpha, conf_rng);
          for (std::size_t k = 0; k < split.test.size(); ++k) {
            const int i = split.test[k];
            o.by_method[fmt::format("conformal/{}", model)].push_back(
                {conf.covered[k], conf.intervals[k].width(), sim.latent(i)});
            const auto normal = parametric_normal_interval(*conf.linear, data.features(i), cfg.comparator_alpha());
            o.by_method[fmt::format("parametric_normal/{}", model)].push_back(
                {normal.lower <= sim.y(i) && sim.y(i) <= normal.upper, normal.upper - normal.lower, sim.latent(i)});
          }
        }
        return o;
      });
    });
    for (int model : cfg.sar_models) {
      std::vector<ReplicateOutcome> per_model = outcomes;
      for (auto& o : per_model) {
        std::map<std::string, std::vector<TestOutcome>> kept;
        for (const auto& method : methods) {
          auto it = o.by_method.find(fmt::format("{}/{}", method, model));
          if (it != o.by_method.end()) kept[method] = it->second;
        }
        o.by_method = std::move(kept);
      }
      ExperimentResult part;
      collect_cell(part, sar_cell(model, exponent), methods, per_model, false);
      for (auto& r : part.reports) result.reports.push_back(std::move(r));
      if (model == cfg.sar_models.front()) {
        for (const auto& [code, count] : part.error_counts) result.error_counts[code] += count;
        result.flagged += part.flagged;
      }
    }
  }
  return result;
}

// ---------------------------------------------------------------------------
// Heteroscedastic conditional-coverage study
// ---------------------------------------------------------------------------

/// Kernel smooth of hit indicators against the population covariate.
inline SmoothCurve conditional_coverage_curve(const std::vector<ConditionalRecord>& records,
                                              const std::vector<double>& grid, double bandwidth) {
  require(!records.empty(), ErrorCode::parameter, "no conditional records to smooth");
  std::vector<double> xs, hits;
  for (const auto& r : records) {
    xs.push_back(r.z_true);
    hits.push_back(r.hit ? 1.0 : 0.0);
  }
  return kernel_smoother_curve(xs, hits, grid, bandwidth);
}

inline std::vector<double> linear_grid(double lo, double hi, int points) {
  std::vector<double> g;
  for (int k = 0; k < points; ++k) g.push_back(points == 1 ? lo : lo + (hi - lo) * k / (points - 1));
  return g;
}

/// Three methods on the same replicate: CDF-distance score with a CV kernel
/// CDF, absolute residual with OLS, absolute residual with a CV kernel mean.
/// The observed covariate is degree / (nodes - 1).
inline ExperimentResult run_heteroscedastic(const ExperimentConfig& cfg) {
  cfg.validate();
  require(cfg.scenario == Scenario::heteroscedastic, ErrorCode::config, "scenario must be heteroscedastic");
  ExperimentResult result;
  const int nodes = cfg.n + cfg.test_per_replicate;
  const std::vector<std::string> methods{"cdf_kernel", "resid_linear", "resid_flexible"};

  for (double exponent : cfg.sparsity_exponents) {
    const double nu = std::min(1.0, cfg.sparsity(exponent));
    const std::string tag = "hetero/" + sparsity_label(exponent);
    auto outcomes = run_replicates<ReplicateOutcome>(cfg.replicates, cfg.threads, [&](int rep) {
      return guarded([&] {
        const RngStream base = RngStream(cfg.seed, static_cast<std::uint64_t>(rep)).substream(tag);
        RngStream split_rng = base.substream("split");
        const auto sim = simulate_heteroscedastic(nodes, nu, cfg.homoscedastic, base);
        const Matrix zhat = degrees(sim.graph) / static_cast<double>(nodes - 1);
        const auto split = random_split(nodes, cfg.train_size(), cfg.calibration_size(),
                                        cfg.test_per_replicate, split_rng);
        ConformalData data{sim.x, zhat, sim.y, split.train, split.calibration, split.test};

        ReplicateOutcome o;
        const auto record = [&](const std::string& method, const ConformalResult& conf) {
          for (std::size_t k = 0; k < split.test.size(); ++k)
            o.by_method[method].push_back({conf.covered[k], conf.intervals[k].width(), sim.latent(split.test[k])});
        };
        ScoreSpec cdf_spec;
        cdf_spec.kind = ScoreSpec::Kind::cdf_distance;
        cdf_spec.folds = cfg.cv_folds;
        RngStream r1 = base.substream("cdf_kernel");
        record("cdf_kernel", split_conformal(data, cdf_spec, cfg.alpha, r1));

        RngStream r2 = base.substream("resid_linear");
        record("resid_linear", split_conformal(data, ScoreSpec{}, cfg.alpha, r2));

        ScoreSpec flex;
        flex.mean_model = ScoreSpec::MeanModel::kernel;
        flex.folds = cfg.cv_folds;
        RngStream r3 = base.substream("resid_flexible");
        record("resid_flexible", split_conformal(data, flex, cfg.alpha, r3));
        return o;
      });
    });
    const std::string cell = sparsity_label(exponent);
    const auto first_record = result.records.size();
    collect_cell(result, cell, methods, outcomes, true);

    double lo = infinity, hi = -infinity;
    for (std::size_t r = first_record; r < result.records.size(); ++r) {
      lo = std::min(lo, result.records[r].z_true);
      hi = std::max(hi, result.records[r].z_true);
    }
    if (!(lo < hi)) continue;
    const auto grid = linear_grid(lo, hi, cfg.curve_points);
    const double bandwidth = cfg.curve_bandwidth > 0.0 ? cfg.curve_bandwidth : 0.08 * (hi - lo);
    for (const auto& method : methods) {
      std::vector<ConditionalRecord> subset;
      for (std::size_t r = first_record; r < result.records.size(); ++r)
        if (result.records[r].method == method) subset.push_back(result.records[r]);
      if (subset.empty()) continue;
      const auto curve = conditional_coverage_curve(subset, grid, bandwidth);
      for (std::size_t g = 0; g < grid.size(); ++g)
        result.curves.push_back({method, cell, grid[g], curve.values[g], curve.defined[g]});
    }
  }
  return result;
}

// ---------------------------------------------------------------------------
// Synthetic network classification
// ---------------------------------------------------------------------------

inline SbmClassificationSpec sbm_spec(const ExperimentConfig& cfg) {
  return {cfg.block_in, cfg.block_out, cfg.label_prob_block0, cfg.label_prob_block1, cfg.feature_dim,
          cfg.feature_shift};
}

/// Logistic models on three covariate sets: features only; plus degree and
/// ASE(2,0); plus degree and the split neighborhood label average over the
/// training nodes. Widths are prediction set sizes.
inline ExperimentResult run_synthetic_classification(const ExperimentConfig& cfg) {
  cfg.validate();
  require(cfg.scenario == Scenario::synthetic_classification, ErrorCode::config,
          "scenario must be synthetic_classification");
  ExperimentResult result;
  const int nodes = cfg.n + cfg.test_per_replicate;
  const std::vector<std::string> methods{"logistic_x", "logistic_x_net", "logistic_x_label"};
  const auto spec = sbm_spec(cfg);

  for (double exponent : cfg.sparsity_exponents) {
    const double nu = std::min(1.0, cfg.sparsity(exponent));
    const std::string tag = "classify/" + sparsity_label(exponent);
    auto outcomes = run_replicates<ReplicateOutcome>(cfg.replicates, cfg.threads, [&](int rep) {
      return guarded([&] {
        const RngStream base = RngStream(cfg.seed, static_cast<std::uint64_t>(rep)).substream(tag);
        RngStream split_rng = base.substream("split");
        const auto sim = simulate_sbm_classification(nodes, nu, spec, base);
        const auto split = random_split(nodes, cfg.train_size(), cfg.calibration_size(),
                                        cfg.test_per_replicate, split_rng);
        CovariateContext ctx;
        ctx.base = split.train;
        ctx.response = sim.y;
        const CovariateSpec net{{DegreeExtractor{}, AseExtractor{2, 0}}};
        const CovariateSpec lab{{DegreeExtractor{}, SplitAverageExtractor{{}, true, Fallback::global_mean}}};
        const std::vector<std::pair<std::string, Matrix>> sets{
            {"logistic_x", Matrix(nodes, 0)},
            {"logistic_x_net", apply_covariate_spec(net, sim.graph, sim.x, ctx).values},
            {"logistic_x_label", apply_covariate_spec(lab, sim.graph, sim.x, ctx).values},
        };
        ReplicateOutcome o;
        for (const auto& [method, z] : sets) {
          ConformalData data{sim.x, z, sim.y, split.train, split.calibration, split.test};
          ScoreSpec score;
          score.kind = ScoreSpec::Kind::classification_adaptive;
          score.jitter_relative = 1e-9;
          score.randomized = cfg.randomized_scores;
          RngStream conf_rng = base.substream(method);
          const auto conf = split_conformal(data, score, cfg.alpha, conf_rng);
          for (std::size_t k = 0; k < split.test.size(); ++k) {
            o.by_method[method].push_back({conf.covered[k], static_cast<double>(conf.sets[k].labels.size()),
                                           sim.latent(split.test[k])});
            o.flagged += conf.sets[k].forced_singleton ? 1 : 0;
          }
        }
        return o;
      });
    });
    collect_cell(result, sparsity_label(exponent), methods, outcomes, false);
  }
  return result;
}

inline ExperimentResult run_experiment(const ExperimentConfig& cfg) {
  switch (cfg.scenario) {
    case Scenario::rdpg_linear: return run_rdpg_linear(cfg);
    case Scenario::sar: return run_sar(cfg);
    case Scenario::heteroscedastic: return run_heteroscedastic(cfg);
    case Scenario::synthetic_classification: return run_synthetic_classification(cfg);
  }
  fail(ErrorCode::config, "unknown scenario");
}

}  // namespace netconform

#endif  // NETCONFORM_EXPERIMENTS_HPP

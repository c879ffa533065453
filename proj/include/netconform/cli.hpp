#ifndef NETCONFORM_CLI_HPP
#define NETCONFORM_CLI_HPP

#include <cmath>
#include <cstdint>
#include <filesystem>
#include <iostream>
#include <map>
#include <optional>
#include <set>
#include <string>
#include <utility>
#include <vector>

#include <Eigen/Core>
#include <boost/version.hpp>
#include <fmt/core.h>
#include <json.hpp>

#include "netconform/config.hpp"
#include "netconform/conformal.hpp"
#include "netconform/covariates.hpp"
#include "netconform/error.hpp"
#include "netconform/experiments.hpp"
#include "netconform/io.hpp"
#include "netconform/regress.hpp"
#include "netconform/rng.hpp"

namespace netconform {

inline constexpr const char* version = "0.1.0";

enum class Command { simulate, extract, conform, experiment, classify };

inline Command command_from_name(const std::string& name) {
  if (name == "simulate") return Command::simulate;
  if (name == "extract") return Command::extract;
  if (name == "conform") return Command::conform;
  if (name == "experiment") return Command::experiment;
  if (name == "classify") return Command::classify;
  fail(ErrorCode::config, fmt::format("unknown command '{}'", name));
}

inline std::string command_name(Command c) {
  switch (c) {
    case Command::simulate: return "simulate";
    case Command::extract: return "extract";
    case Command::conform: return "conform";
    case Command::experiment: return "experiment";
    case Command::classify: return "classify";
  }
  return "?";
}

struct RunSpec {
  Command command = Command::experiment;
  fs::path config_path;
  fs::path out_dir;
  std::optional<std::uint64_t> seed;  // overrides the config value
  std::optional<int> replicates;
};

/// Everything a command produces, held in memory until the command succeeds.
struct Artifacts {
  std::vector<std::pair<std::string, std::string>> files;  // (name, content)
  Json manifest = Json::object();

  void add(std::string name, std::string content) { files.emplace_back(std::move(name), std::move(content)); }
};

namespace detail {

inline Json versions() {
  return {{"netconform", version},
          {"eigen", fmt::format("{}.{}.{}", EIGEN_WORLD_VERSION, EIGEN_MAJOR_VERSION, EIGEN_MINOR_VERSION)},
          {"boost", fmt::format("{}.{}.{}", BOOST_VERSION / 100000, BOOST_VERSION / 100 % 1000, BOOST_VERSION % 100)},
          {"fmt", fmt::format("{}.{}.{}", FMT_VERSION / 10000, FMT_VERSION / 100 % 100, FMT_VERSION % 100)},
          {"nlohmann_json", fmt::format("{}.{}.{}", NLOHMANN_JSON_VERSION_MAJOR, NLOHMANN_JSON_VERSION_MINOR,
                                        NLOHMANN_JSON_VERSION_PATCH)}};
}

/// JSON cannot hold infinities; unbounded ends become null.
inline Json bound(double v) { return std::isfinite(v) ? Json(v) : Json(nullptr); }

inline fs::path resolve(const fs::path& base, const std::string& p) {
  const fs::path path(p);
  return path.is_absolute() ? path : base / path;
}

inline fs::path input_path(const Json& cfg, const fs::path& base, const std::string& key) {
  const fs::path p = resolve(base, config_required<std::string>(cfg, key));
  require(fs::exists(p), ErrorCode::io, fmt::format("input '{}' does not exist", p.string()));
  return p;
}

/// Selected feature columns by name; default is every column except `y_column`.
inline std::pair<Matrix, std::vector<std::string>> select_columns(const DenseTable& table, const Json& cfg,
                                                                  const std::string& y_column) {
  std::vector<std::string> names;
  if (cfg.contains("x_columns")) {
    names = config_required<std::vector<std::string>>(cfg, "x_columns");
  } else {
    for (const auto& h : table.header)
      if (h != y_column) names.push_back(h);
  }
  Matrix x(table.values.rows(), static_cast<Eigen::Index>(names.size()));
  for (std::size_t c = 0; c < names.size(); ++c) x.col(static_cast<Eigen::Index>(c)) = table.values.col(table.column(names[c]));
  return {x, names};
}

inline IndexSet index_list(const Json& cfg, const std::string& key, int n) {
  IndexSet out = config_value<std::vector<int>>(cfg, key, {});
  for (int i : out) require(i >= 0 && i < n, ErrorCode::config, fmt::format("{}: node {} out of range", key, i));
  std::sort(out.begin(), out.end());
  out.erase(std::unique(out.begin(), out.end()), out.end());
  return out;
}

inline std::string score_kind_name(ScoreSpec::Kind k) {
  switch (k) {
    case ScoreSpec::Kind::abs_residual: return "abs_residual";
    case ScoreSpec::Kind::cdf_distance: return "cdf_distance";
    case ScoreSpec::Kind::classification_adaptive: return "classification_adaptive";
  }
  return "?";
}

inline Json linear_model_json(const LinearModel& m) {
  return {{"intercept", m.intercept},
          {"coefficients", std::vector<double>(m.coefficients.data(), m.coefficients.data() + m.coefficients.size())},
          {"residual_sd", m.residual_sd}};
}

inline Json logistic_model_json(const LogisticModel& m) {
  return {{"intercept", m.intercept},
          {"coefficients", std::vector<double>(m.coefficients.data(), m.coefficients.data() + m.coefficients.size())},
          {"converged", m.converged},
          {"iterations", m.iterations}};
}

}  // namespace detail

// ---------------------------------------------------------------------------
// Commands
// ---------------------------------------------------------------------------

/// Draws one network dataset from a scenario generator.
inline Artifacts command_simulate(const Json& cfg) {
  const auto scenario = scenario_from_name(config_required<std::string>(cfg, "scenario"));
  const std::uint64_t seed = config_seed(cfg);
  const int nodes = config_value<int>(cfg, "nodes", config_value<int>(cfg, "n", 200) + 1);
  require(nodes >= 2, ErrorCode::config, "need at least two nodes");
  const double exponent = config_value<double>(cfg, "sparsity_exponent", 0.1);
  require(exponent >= 0.0, ErrorCode::config, "sparsity exponent must be >= 0");
  const double nu = std::min(1.0, std::pow(static_cast<double>(config_value<int>(cfg, "n", nodes)), -exponent));
  const RngStream base = RngStream(seed, 0).substream("simulate/" + scenario_name(scenario));

  SimulatedNetwork sim;
  switch (scenario) {
    case Scenario::rdpg_linear: sim = simulate_rdpg_linear(nodes, nu, base); break;
    case Scenario::sar:
      sim = simulate_sar(nodes, nu, sar_study_spec(config_value<double>(cfg, "rho", 0.7)), base);
      break;
    case Scenario::heteroscedastic:
      sim = simulate_heteroscedastic(nodes, nu, config_value<bool>(cfg, "homoscedastic", false), base);
      break;
    case Scenario::synthetic_classification: {
      ExperimentConfig ec = experiment_config_from_json(cfg);
      sim = simulate_sbm_classification(nodes, nu, sbm_spec(ec), base);
      break;
    }
  }
  Artifacts out;
  DenseTable table{sim.x_names, Matrix(nodes, sim.x.cols() + 1)};
  table.header.push_back("y");
  table.values << sim.x, sim.y;
  out.add("nodes.csv", format_dense_csv(table));
  out.add("latent.csv", format_dense_csv(DenseTable{{"latent"}, sim.latent}));
  out.add("edges.tsv", format_edge_list(sim.graph));
  out.manifest["nodes"] = nodes;
  out.manifest["edges"] = sim.graph.edge_count();
  out.manifest["isolated_nodes"] = sim.isolated;
  return out;
}

/// Network covariates for every node of an input graph.
inline Artifacts command_extract(const Json& cfg, const fs::path& base_dir) {
  config_seed(cfg);
  const auto table = read_dense_csv(detail::input_path(cfg, base_dir, "nodes"));
  const auto edges_path = detail::input_path(cfg, base_dir, "graph");
  const Graph graph = read_edge_list(edges_path, static_cast<int>(table.values.rows()));
  const std::string y_column = config_value<std::string>(cfg, "y_column", "y");
  const auto [x, names] = detail::select_columns(table, cfg, y_column);
  const CovariateSpec spec = covariate_spec_from_json(cfg.value("covariates", Json::array()));
  require(!spec.extractors.empty(), ErrorCode::config, "no covariates requested");

  CovariateContext ctx;
  if (cfg.contains("base")) ctx.base = detail::index_list(cfg, "base", graph.size());
  ctx.exclude = detail::index_list(cfg, "exclude", graph.size());
  if (std::find(table.header.begin(), table.header.end(), y_column) != table.header.end())
    ctx.response = Vector(table.values.col(table.column(y_column)));
  const auto cov = apply_covariate_spec(spec, graph, x, ctx);

  Artifacts out;
  out.add("features.csv", format_dense_csv(DenseTable{cov.names, cov.values}));
  out.manifest["columns"] = cov.names;
  if (std::isfinite(cov.min_spectral_gap)) out.manifest["min_spectral_gap"] = cov.min_spectral_gap;
  return out;
}

/// Split conformal prediction on a user dataset. Nodes whose response is
/// missing are always test nodes.
inline Artifacts command_conform(const Json& cfg, const fs::path& base_dir) {
  const std::uint64_t seed = config_seed(cfg);
  const double alpha = config_alpha(cfg);
  const auto table = read_dense_csv(detail::input_path(cfg, base_dir, "nodes"));
  const Graph graph = read_edge_list(detail::input_path(cfg, base_dir, "graph"), static_cast<int>(table.values.rows()));
  const std::string y_column = config_value<std::string>(cfg, "y_column", "y");
  const Vector y = table.values.col(table.column(y_column));
  const auto [x, names] = detail::select_columns(table, cfg, y_column);
  const int n = graph.size();

  IndexSet known, unknown;
  for (int i = 0; i < n; ++i) (std::isfinite(y(i)) ? known : unknown).push_back(i);
  RngStream rng = RngStream(seed, 0).substream("conform");
  RngStream split_rng = rng.substream("split");
  const auto request = split_request_from_json(cfg.value("splits", Json()), SplitRequest{std::nullopt, std::array<double, 3>{0.5, 0.5, 0.0}});
  const Splits local = make_splits(static_cast<int>(known.size()), request, split_rng);
  Splits splits;
  for (int i : local.train) splits.train.push_back(known[static_cast<std::size_t>(i)]);
  for (int i : local.calibration) splits.calibration.push_back(known[static_cast<std::size_t>(i)]);
  for (int i : local.test) splits.test.push_back(known[static_cast<std::size_t>(i)]);
  splits.test.insert(splits.test.end(), unknown.begin(), unknown.end());
  std::sort(splits.test.begin(), splits.test.end());
  require(!splits.test.empty(), ErrorCode::config, "no test nodes: leave some responses empty or request a test split");

  CovariateContext ctx;
  ctx.base = splits.train;
  ctx.exclude = splits.test;
  ctx.response = y;
  const auto cov = apply_covariate_spec(covariate_spec_from_json(cfg.value("covariates", Json::array())), graph, x, ctx);
  const ScoreSpec score = score_spec_from_json(cfg.value("score", Json()));
  ConformalData data{x, cov.values, y, splits.train, splits.calibration, splits.test};
  RngStream conf_rng = rng.substream("conformal");
  const auto res = split_conformal(data, score, alpha, conf_rng);

  Json preds = Json::array();
  std::vector<TestOutcome> scored;
  for (std::size_t k = 0; k < splits.test.size(); ++k) {
    const int i = splits.test[k];
    Json p = {{"node", i}, {"point", res.point_predictions[k]}};
    if (score.kind == ScoreSpec::Kind::classification_adaptive) {
      p["set"] = res.sets[k].labels;
      p["forced_singleton"] = res.sets[k].forced_singleton;
    } else {
      p["lower"] = detail::bound(res.intervals[k].lower);
      p["upper"] = detail::bound(res.intervals[k].upper);
    }
    if (std::isfinite(y(i))) {
      p["y"] = y(i);
      p["covered"] = static_cast<bool>(res.covered[k]);
      const double width = score.kind == ScoreSpec::Kind::classification_adaptive
                               ? static_cast<double>(res.sets[k].labels.size())
                               : res.intervals[k].width();
      scored.push_back({res.covered[k], width, 0.0});
    }
    preds.push_back(std::move(p));
  }
  Json doc = {{"alpha", alpha},
              {"score", detail::score_kind_name(score.kind)},
              {"threshold", detail::bound(res.calibration.threshold)},
              {"quantile_index", res.calibration.quantile_index},
              {"calibration_size", splits.calibration.size()},
              {"covariates", cov.names},
              {"jitter_epsilon", res.jitter_epsilon},
              {"predictions", preds}};
  if (std::isfinite(res.bandwidth)) doc["bandwidth"] = res.bandwidth;
  if (res.linear) doc["model"] = detail::linear_model_json(*res.linear);
  if (res.logistic) doc["model"] = detail::logistic_model_json(*res.logistic);

  Artifacts out;
  out.add("predictions.json", doc.dump(2) + "\n");
  if (!scored.empty())
    out.add("report.csv", format_report_csv({summarize(detail::score_kind_name(score.kind), "holdout", scored, 1)}));
  return out;
}

inline Artifacts command_experiment(const Json& cfg) {
  const ExperimentConfig ec = experiment_config_from_json(cfg);
  const ExperimentResult result = run_experiment(ec);
  Artifacts out;
  out.add("report.csv", format_report_csv(result.reports));
  out.add("curves.csv", format_curves_csv(result.curves));
  if (!result.records.empty()) out.add("records.csv", format_records_csv(result.records));
  Json errors = Json::object();
  for (const auto& [code, count] : result.error_counts) errors[code] = count;
  out.manifest["error_counts"] = errors;
  out.manifest["flagged"] = result.flagged;
  Json cells = Json::array();
  for (const auto& r : result.reports)
    cells.push_back({{"method", r.method}, {"cell", r.cell}, {"hits", r.hits}, {"total", r.total},
                     {"infinite_widths", r.infinite_widths}});
  out.manifest["cells"] = cells;
  return out;
}

/// Cora covariate sets: 1 = top principal components of the word matrix;
/// 2 = degree and ASE(3, 0); 4 = degree and the split neighborhood label
/// average over the training nodes.
inline Artifacts command_classify(const Json& cfg, const fs::path& base_dir) {
  const std::uint64_t seed = config_seed(cfg);
  const double alpha = config_alpha(cfg);
  CoraOptions options;
  options.target_class = config_value<std::string>(cfg, "target_class", "Neural_Networks");
  const auto cora = load_cora_format(detail::input_path(cfg, base_dir, "content"),
                                     detail::input_path(cfg, base_dir, "cites"), options);
  const auto& data = cora.dataset;
  const int n = data.size();
  const int holdout = config_value<int>(cfg, "holdout", std::min(500, n / 3));
  require(holdout >= 1 && holdout < n - 1, ErrorCode::config, "holdout must leave at least two labelled nodes");
  const double train_fraction = config_value<double>(cfg, "train_fraction", 0.5);
  require(train_fraction > 0.0 && train_fraction < 1.0, ErrorCode::config, "train_fraction must lie in (0, 1)");
  const int remaining = n - holdout;
  const int train = std::clamp(static_cast<int>(std::floor(train_fraction * remaining)), 1, remaining - 1);
  RngStream rng = RngStream(seed, 0).substream("classify");
  RngStream split_rng = rng.substream("split");
  const Splits splits = make_splits(n, SplitRequest{std::array<int, 3>{train, remaining - train, holdout}, std::nullopt},
                                    split_rng);

  const int components =
      std::min<int>(config_value<int>(cfg, "pca_components", 20), static_cast<int>(std::min<Eigen::Index>(data.x.cols(), n - 1)));
  require(components >= 1, ErrorCode::config, "pca_components must be at least 1");
  const PcaResult pca = pca_top_k(data.x, components);

  std::vector<std::vector<int>> sets = {{1, 4}};
  if (cfg.contains("covariate_sets")) sets = config_required<std::vector<std::vector<int>>>(cfg, "covariate_sets");
  require(!sets.empty(), ErrorCode::config, "no covariate sets requested");

  CovariateContext ctx;
  ctx.base = splits.train;
  ctx.exclude = splits.test;
  ctx.response = data.y;

  ScoreSpec score;
  score.kind = ScoreSpec::Kind::classification_adaptive;
  score.jitter_relative = config_value<double>(cfg, "jitter_relative", 1e-9);
  score.randomized = config_value<bool>(cfg, "randomized", false);

  Artifacts out;
  std::vector<CoverageReport> reports;
  Json results = Json::array();
  for (const auto& set : sets) {
    std::set<int> members(set.begin(), set.end());
    for (int s : members) {
      require(s != 3, ErrorCode::config, "covariate set 3 (logit latent space fit) is not supported");
      require(s == 1 || s == 2 || s == 4, ErrorCode::config, fmt::format("unknown covariate set {}", s));
    }
    CovariateSpec spec;
    if (members.count(2) || members.count(4)) spec.extractors.push_back(DegreeExtractor{});
    if (members.count(2)) spec.extractors.push_back(AseExtractor{3, 0});
    if (members.count(4)) spec.extractors.push_back(SplitAverageExtractor{{}, true, Fallback::global_mean});
    const Matrix x = members.count(1) ? pca.scores : Matrix(n, 0);
    const Matrix z = spec.extractors.empty() ? Matrix(n, 0) : apply_covariate_spec(spec, data.graph, data.x, ctx).values;
    require(x.cols() + z.cols() > 0, ErrorCode::config, "covariate set is empty");

    std::string cell = "sets=";
    for (int s : members) cell += (cell.back() == '=' ? "" : "+") + std::to_string(s);
    ConformalData cd{x, z, data.y, splits.train, splits.calibration, splits.test};
    RngStream conf_rng = rng.substream(cell);
    const auto res = split_conformal(cd, score, alpha, conf_rng);

    Json preds = Json::array();
    std::vector<TestOutcome> scored;
    long errors = 0;
    for (std::size_t k = 0; k < splits.test.size(); ++k) {
      const int i = splits.test[k];
      const auto& ps = res.sets[k];
      std::vector<std::string> labels;
      for (int l : ps.labels) labels.push_back(data.categories[static_cast<std::size_t>(l)]);
      const int predicted = res.point_predictions[k] > 0.5 ? 1 : 0;
      errors += predicted != static_cast<int>(data.y(i)) ? 1 : 0;
      scored.push_back({res.covered[k], static_cast<double>(ps.labels.size()), 0.0});
      preds.push_back({{"node", i},
                       {"id", data.node_ids[static_cast<std::size_t>(i)]},
                       {"set", labels},
                       {"forced_singleton", ps.forced_singleton},
                       {"probability", res.point_predictions[k]},
                       {"label", data.categories[static_cast<std::size_t>(data.y(i))]},
                       {"covered", static_cast<bool>(res.covered[k])}});
    }
    auto report = summarize("logistic", cell, scored, 1);
    results.push_back({{"covariate_set", std::vector<int>(members.begin(), members.end())},
                       {"threshold", detail::bound(res.calibration.threshold)},
                       {"coverage", report.coverage},
                       {"mean_set_size", report.mean_width},
                       {"error_rate", static_cast<double>(errors) / static_cast<double>(splits.test.size())},
                       {"model", detail::logistic_model_json(*res.logistic)},
                       {"predictions", preds}});
    reports.push_back(std::move(report));
  }
  Json doc = {{"alpha", alpha}, {"target_class", *options.target_class}, {"categories", data.categories},
              {"pca_components", components}, {"results", results}};
  out.add("predictions.json", doc.dump(2) + "\n");
  out.add("report.csv", format_report_csv(reports));
  out.manifest["nodes"] = n;
  out.manifest["edges"] = data.graph.edge_count();
  out.manifest["skipped_citations"] = cora.skipped_citations;
  out.manifest["self_citations"] = cora.self_citations;
  out.manifest["split_sizes"] = {splits.train.size(), splits.calibration.size(), splits.test.size()};
  return out;
}

// ---------------------------------------------------------------------------
// Dispatch
// ---------------------------------------------------------------------------

/// Loads the config, applies flag overrides and runs the command. Data files
/// are written only after the command has succeeded, each one atomically. A
/// failed run writes nothing but a manifest carrying the error code, and
/// reports "error[<code>]: message" on `err`. Returns 0 on success, 1 on error.
inline int run_command(const RunSpec& spec, std::ostream& err = std::cerr) {
  Json cfg;
  std::string code;
  std::string message;
  try {
    require(!spec.out_dir.empty(), ErrorCode::config, "an output directory is required");
    require(fs::exists(spec.config_path), ErrorCode::io,
            fmt::format("config '{}' does not exist", spec.config_path.string()));
    cfg = load_config(spec.config_path);
    require(cfg.is_object(), ErrorCode::config, "config must be a table");
    if (spec.seed) cfg["seed"] = *spec.seed;
    if (spec.replicates) cfg["replicates"] = *spec.replicates;
    const fs::path base_dir = fs::absolute(spec.config_path).parent_path();

    Artifacts art;
    switch (spec.command) {
      case Command::simulate: art = command_simulate(cfg); break;
      case Command::extract: art = command_extract(cfg, base_dir); break;
      case Command::conform: art = command_conform(cfg, base_dir); break;
      case Command::experiment: art = command_experiment(cfg); break;
      case Command::classify: art = command_classify(cfg, base_dir); break;
    }
    Json manifest = {{"command", command_name(spec.command)},
                     {"status", "ok"},
                     {"config", cfg},
                     {"seed", config_seed(cfg)},
                     {"versions", detail::versions()},
                     {"error_counts", Json::object()}};
    manifest.update(art.manifest);
    Json files = Json::array();
    for (const auto& [name, content] : art.files) files.push_back(name);
    manifest["outputs"] = files;
    std::vector<fs::path> written;
    try {
      for (const auto& [name, content] : art.files) {
        write_file_atomic(spec.out_dir / name, content);
        written.push_back(spec.out_dir / name);
      }
    } catch (...) {
      // Leave no subset of a run's outputs behind.
      std::error_code ignored;
      for (const auto& path : written) fs::remove(path, ignored);
      throw;
    }
    write_file_atomic(spec.out_dir / "manifest.json", manifest.dump(2) + "\n");
    return 0;
  } catch (const Error& e) {
    code = code_name(e.code());
    message = e.what();
  } catch (const std::exception& e) {
    code = code_name(ErrorCode::io);
    message = e.what();
  }
  err << "error[" << code << "]: " << message << "\n";
  if (!spec.out_dir.empty()) {
    try {
      Json manifest = {{"command", command_name(spec.command)},
                       {"status", "error"},
                       {"error", {{"code", code}, {"message", message}}},
                       {"error_counts", {{code, 1}}},
                       {"versions", detail::versions()},
                       {"outputs", Json::array()}};
      if (!cfg.is_null()) manifest["config"] = cfg;
      write_file_atomic(spec.out_dir / "manifest.json", manifest.dump(2) + "\n");
    } catch (const std::exception&) {
      // The error has already been reported; an unwritable directory adds nothing.
    }
  }
  return 1;
}

}  // namespace netconform

#endif  // NETCONFORM_CLI_HPP

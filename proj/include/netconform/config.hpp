#ifndef NETCONFORM_CONFIG_HPP
#define NETCONFORM_CONFIG_HPP

#include <cctype>
#include <charconv>
#include <cstdint>
#include <filesystem>
#include <limits>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include <fmt/core.h>
#include <json.hpp>

#include "netconform/covariates.hpp"
#include "netconform/error.hpp"
#include "netconform/experiments.hpp"
#include "netconform/io.hpp"

namespace netconform {

using Json = nlohmann::json;

// ---------------------------------------------------------------------------
// TOML subset
// ---------------------------------------------------------------------------
//
// Supported: comments, [table] and [a.b] headers, [[array.of.tables]],
// bare/quoted/dotted keys, basic and literal strings, integers, floats
// (including inf and nan), booleans, arrays (may span lines) and inline
// tables. Dates and multi-line strings are rejected.

namespace detail {

class TomlReader {
 public:
  explicit TomlReader(std::string_view text) : text_(text) {}

  Json parse() {
    Json root = Json::object();
    Json* table = &root;
    while (true) {
      skip_blank_lines();
      if (done()) break;
      if (peek() == '[') {
        table = header(root);
      } else {
        key_value(*table);
      }
      end_of_line();
    }
    return root;
  }

 private:
  std::string_view text_;
  std::size_t pos_ = 0;
  long line_ = 1;

  bool done() const { return pos_ >= text_.size(); }
  char peek() const { return done() ? '\0' : text_[pos_]; }
  char get() {
    const char c = text_[pos_++];
    if (c == '\n') ++line_;
    return c;
  }

  [[noreturn]] void error(const std::string& what) const {
    fail(ErrorCode::parse, fmt::format("config line {}: {}", line_, what));
  }

  void skip_space() {
    while (!done() && (peek() == ' ' || peek() == '\t')) ++pos_;
  }
  void skip_comment() {
    if (peek() == '#')
      while (!done() && peek() != '\n') ++pos_;
  }
  void skip_blank_lines() {
    while (!done()) {
      skip_space();
      skip_comment();
      if (peek() == '\r') ++pos_;
      if (peek() == '\n') {
        get();
        continue;
      }
      break;
    }
  }
  // Whitespace, comments and newlines inside arrays.
  void skip_all() {
    while (!done()) {
      skip_space();
      skip_comment();
      if (peek() == '\n' || peek() == '\r') {
        get();
        continue;
      }
      break;
    }
  }
  void end_of_line() {
    skip_space();
    skip_comment();
    if (peek() == '\r') ++pos_;
    if (done()) return;
    if (peek() != '\n') error(fmt::format("unexpected '{}'", peek()));
    get();
  }
  void expect(char c) {
    if (peek() != c) error(fmt::format("expected '{}'", c));
    get();
  }

  std::string key_part() {
    skip_space();
    if (peek() == '"' || peek() == '\'') return string_value();
    std::string key;
    while (!done() && (std::isalnum(static_cast<unsigned char>(peek())) || peek() == '_' || peek() == '-'))
      key += get();
    if (key.empty()) error("expected a key");
    return key;
  }

  std::vector<std::string> dotted_key() {
    std::vector<std::string> parts{key_part()};
    skip_space();
    while (peek() == '.') {
      get();
      parts.push_back(key_part());
      skip_space();
    }
    return parts;
  }

  Json* descend(Json& base, const std::vector<std::string>& parts, std::size_t count) {
    Json* node = &base;
    for (std::size_t k = 0; k < count; ++k) {
      Json& next = (*node)[parts[k]];
      if (next.is_null()) next = Json::object();
      if (next.is_array() && !next.empty() && next.back().is_object()) {
        node = &next.back();
      } else if (next.is_object()) {
        node = &next;
      } else {
        error(fmt::format("key '{}' is not a table", parts[k]));
      }
    }
    return node;
  }

  Json* header(Json& root) {
    get();
    const bool array = peek() == '[';
    if (array) get();
    const auto parts = dotted_key();
    expect(']');
    if (array) expect(']');
    Json* parent = descend(root, parts, parts.size() - 1);
    Json& slot = (*parent)[parts.back()];
    if (array) {
      if (slot.is_null()) slot = Json::array();
      if (!slot.is_array()) error(fmt::format("'{}' is not an array of tables", parts.back()));
      slot.push_back(Json::object());
      return &slot.back();
    }
    if (slot.is_null()) slot = Json::object();
    if (!slot.is_object()) error(fmt::format("'{}' redefined", parts.back()));
    return &slot;
  }

  void key_value(Json& table) {
    const auto parts = dotted_key();
    skip_space();
    expect('=');
    skip_space();
    Json* target = descend(table, parts, parts.size() - 1);
    if (target->contains(parts.back())) error(fmt::format("duplicate key '{}'", parts.back()));
    (*target)[parts.back()] = value();
  }

  std::string string_value() {
    const char quote = get();
    if (peek() == quote && pos_ + 1 < text_.size() && text_[pos_ + 1] == quote)
      error("multi-line strings are not supported");
    std::string out;
    while (true) {
      if (done() || peek() == '\n') error("unterminated string");
      const char c = get();
      if (c == quote) return out;
      if (c == '\\' && quote == '"') {
        const char e = get();
        switch (e) {
          case 'n': out += '\n'; break;
          case 't': out += '\t'; break;
          case '\\': out += '\\'; break;
          case '"': out += '"'; break;
          default: error(fmt::format("unsupported escape '\\{}'", e));
        }
      } else {
        out += c;
      }
    }
  }

  Json scalar() {
    std::string token;
    while (!done() && peek() != ',' && peek() != ']' && peek() != '}' && peek() != '\n' && peek() != '#' &&
           peek() != ' ' && peek() != '\t' && peek() != '\r')
      token += get();
    if (token.empty()) error("expected a value");
    if (token == "true") return true;
    if (token == "false") return false;
    std::string clean;
    for (char c : token)
      if (c != '_') clean += c;
    if (clean == "inf" || clean == "+inf") return std::numeric_limits<double>::infinity();
    if (clean == "-inf") return -std::numeric_limits<double>::infinity();
    if (clean == "nan" || clean == "+nan" || clean == "-nan") return std::numeric_limits<double>::quiet_NaN();
    const bool is_float = clean.find_first_of(".eE") != std::string::npos;
    const char* begin = clean.data();
    const char* end = begin + clean.size();
    if (*begin == '+') ++begin;
    if (is_float) {
      double v = 0.0;
      const auto [ptr, ec] = std::from_chars(begin, end, v);
      if (ec != std::errc() || ptr != end) error(fmt::format("cannot parse '{}'", token));
      return v;
    }
    std::int64_t v = 0;
    const auto [ptr, ec] = std::from_chars(begin, end, v);
    if (ec != std::errc() || ptr != end) error(fmt::format("cannot parse '{}'", token));
    return v;
  }

  Json value() {
    const char c = peek();
    if (c == '"' || c == '\'') return string_value();
    if (c == '[') {
      get();
      Json arr = Json::array();
      skip_all();
      while (peek() != ']') {
        arr.push_back(value());
        skip_all();
        if (peek() == ',') {
          get();
          skip_all();
        } else if (peek() != ']') {
          error("expected ',' or ']' in array");
        }
      }
      get();
      return arr;
    }
    if (c == '{') {
      get();
      Json obj = Json::object();
      skip_space();
      while (peek() != '}') {
        const auto parts = dotted_key();
        skip_space();
        expect('=');
        skip_space();
        (*descend(obj, parts, parts.size() - 1))[parts.back()] = value();
        skip_space();
        if (peek() == ',') {
          get();
          skip_space();
        } else if (peek() != '}') {
          error("expected ',' or '}' in inline table");
        }
      }
      get();
      return obj;
    }
    return scalar();
  }
};

}  // namespace detail

inline Json parse_toml(std::string_view text) { return detail::TomlReader(text).parse(); }

/// Parses a .json file as JSON and anything else as TOML.
inline Json load_config(const fs::path& path) {
  const std::string text = read_text_file(path);
  if (path.extension() == ".json") {
    try {
      return Json::parse(text);
    } catch (const Json::parse_error& e) {
      fail(ErrorCode::parse, fmt::format("{}: {}", path.string(), e.what()));
    }
  }
  return parse_toml(text);
}

// ---------------------------------------------------------------------------
// Typed access
// ---------------------------------------------------------------------------

template <class T>
T config_value(const Json& cfg, const std::string& key, T fallback) {
  if (!cfg.contains(key)) return fallback;
  try {
    return cfg.at(key).get<T>();
  } catch (const Json::exception&) {
    fail(ErrorCode::config, fmt::format("config key '{}' has the wrong type", key));
  }
}

template <class T>
T config_required(const Json& cfg, const std::string& key) {
  require(cfg.contains(key), ErrorCode::config, fmt::format("config key '{}' is required", key));
  try {
    return cfg.at(key).get<T>();
  } catch (const Json::exception&) {
    fail(ErrorCode::config, fmt::format("config key '{}' has the wrong type", key));
  }
}

/// Seeds are never taken from the clock.
inline std::uint64_t config_seed(const Json& cfg) {
  require(cfg.contains("seed"), ErrorCode::config, "a seed is required");
  const auto& s = cfg.at("seed");
  require(s.is_number_integer(), ErrorCode::config, "seed must be an integer");
  return s.get<std::uint64_t>();
}

inline Fallback fallback_from_name(const std::string& name) {
  if (name == "global_mean") return Fallback::global_mean;
  if (name == "zero") return Fallback::zero;
  if (name == "error") return Fallback::error;
  fail(ErrorCode::config, fmt::format("unknown fallback '{}'", name));
}

inline WeightRule weight_rule_from_json(const Json& j) {
  const auto kind = config_value<std::string>(j, "rule", "uniform");
  if (kind == "uniform") return WeightRule::uniform();
  if (kind == "geometric")
    return WeightRule::geometric_decay(config_value<double>(j, "gamma", 0.5), config_value<int>(j, "kmax", 2));
  fail(ErrorCode::config, fmt::format("unknown weight rule '{}'", kind));
}

/// One extractor descriptor, e.g. {type = "ase", p = 3, q = 0}.
inline Extractor extractor_from_json(const Json& j) {
  require(j.is_object(), ErrorCode::config, "covariate descriptors must be tables");
  const auto type = config_required<std::string>(j, "type");
  const auto columns = config_value<std::vector<int>>(j, "columns", {});
  const auto fallback = fallback_from_name(config_value<std::string>(j, "fallback", "global_mean"));
  if (type == "degree") return DegreeExtractor{};
  if (type == "ase") return AseExtractor{config_value<int>(j, "p", 3), config_value<int>(j, "q", 0)};
  if (type == "neighborhood_average") return NeighborhoodAverageExtractor{columns, fallback};
  if (type == "khop") return KHopExtractor{config_value<int>(j, "kmax", 2), columns, fallback};
  if (type == "split_neighborhood_average")
    return SplitAverageExtractor{columns, config_value<bool>(j, "response", false), fallback};
  if (type == "neighbor_weighted_response") return NeighborResponseExtractor{weight_rule_from_json(j), fallback};
  fail(ErrorCode::config, fmt::format("unknown covariate type '{}'", type));
}

inline CovariateSpec covariate_spec_from_json(const Json& list) {
  CovariateSpec spec;
  if (list.is_null()) return spec;
  require(list.is_array(), ErrorCode::config, "covariates must be a list");
  for (const auto& j : list) spec.extractors.push_back(extractor_from_json(j));
  return spec;
}

inline ScoreSpec score_spec_from_json(const Json& j) {
  ScoreSpec spec;
  if (j.is_null()) return spec;
  const auto kind = config_value<std::string>(j, "kind", "abs_residual");
  if (kind == "abs_residual") spec.kind = ScoreSpec::Kind::abs_residual;
  else if (kind == "cdf_distance") spec.kind = ScoreSpec::Kind::cdf_distance;
  else if (kind == "classification_adaptive") spec.kind = ScoreSpec::Kind::classification_adaptive;
  else fail(ErrorCode::config, fmt::format("unknown score kind '{}'", kind));
  const auto mean = config_value<std::string>(j, "mean_model", "ols");
  if (mean == "ols") spec.mean_model = ScoreSpec::MeanModel::ols;
  else if (mean == "kernel") spec.mean_model = ScoreSpec::MeanModel::kernel;
  else fail(ErrorCode::config, fmt::format("unknown mean model '{}'", mean));
  spec.kernel = KernelSpec::from_name(config_value<std::string>(j, "kernel", "gaussian"));
  spec.bandwidth_grid = config_value<std::vector<double>>(j, "bandwidths", {});
  spec.folds = config_value<int>(j, "folds", 5);
  if (j.contains("jitter")) spec.jitter_epsilon = config_required<double>(j, "jitter");
  if (j.contains("jitter_relative")) spec.jitter_relative = config_required<double>(j, "jitter_relative");
  if (spec.kind == ScoreSpec::Kind::classification_adaptive && !spec.jitter_epsilon && !spec.jitter_relative)
    spec.jitter_relative = 1e-9;
  spec.randomized = config_value<bool>(j, "randomized", false);
  return spec;
}

inline SplitRequest split_request_from_json(const Json& j, SplitRequest fallback) {
  if (j.is_null()) return fallback;
  SplitRequest req;
  if (j.contains("sizes")) {
    const auto v = config_required<std::vector<int>>(j, "sizes");
    require(v.size() == 3, ErrorCode::config, "splits.sizes needs three entries");
    req.sizes = std::array<int, 3>{v[0], v[1], v[2]};
  }
  if (j.contains("fractions")) {
    const auto v = config_required<std::vector<double>>(j, "fractions");
    require(v.size() == 3, ErrorCode::config, "splits.fractions needs three entries");
    req.fractions = std::array<double, 3>{v[0], v[1], v[2]};
  }
  return req;
}

inline double config_alpha(const Json& cfg) {
  const double alpha = config_value<double>(cfg, "alpha", 0.1);
  require(alpha > 0.0 && alpha < 1.0, ErrorCode::config, "alpha must lie in (0, 1)");
  return alpha;
}

/// Experiment settings. Either `sparsity_exponent` (one value) or
/// `sparsity_exponents` (a list) selects the grid.
inline ExperimentConfig experiment_config_from_json(const Json& cfg) {
  ExperimentConfig out;
  out.scenario = scenario_from_name(config_required<std::string>(cfg, "scenario"));
  out.seed = config_seed(cfg);
  out.n = config_value<int>(cfg, "n", out.n);
  out.alpha = config_alpha(cfg);
  out.replicates = config_value<int>(cfg, "replicates", out.replicates);
  if (cfg.contains("sparsity_exponent")) out.sparsity_exponents = {config_required<double>(cfg, "sparsity_exponent")};
  if (cfg.contains("sparsity_exponents"))
    out.sparsity_exponents = config_required<std::vector<double>>(cfg, "sparsity_exponents");
  out.test_per_replicate = config_value<int>(cfg, "test_nodes", out.test_per_replicate);
  out.threads = config_value<int>(cfg, "threads", out.threads);
  if (cfg.contains("model")) out.sar_models = {config_required<int>(cfg, "model")};
  if (cfg.contains("models")) out.sar_models = config_required<std::vector<int>>(cfg, "models");
  out.population = config_value<int>(cfg, "population", out.population);
  out.sar_rho = config_value<double>(cfg, "rho", out.sar_rho);
  if (cfg.contains("parametric_alpha")) out.parametric_alpha = config_required<double>(cfg, "parametric_alpha");
  out.homoscedastic = config_value<bool>(cfg, "homoscedastic", out.homoscedastic);
  out.curve_points = config_value<int>(cfg, "curve_points", out.curve_points);
  out.curve_bandwidth = config_value<double>(cfg, "curve_bandwidth", out.curve_bandwidth);
  out.cv_folds = config_value<int>(cfg, "folds", out.cv_folds);
  out.block_in = config_value<double>(cfg, "block_in", out.block_in);
  out.block_out = config_value<double>(cfg, "block_out", out.block_out);
  out.label_prob_block0 = config_value<double>(cfg, "label_prob_block0", out.label_prob_block0);
  out.label_prob_block1 = config_value<double>(cfg, "label_prob_block1", out.label_prob_block1);
  out.feature_dim = config_value<int>(cfg, "feature_dim", out.feature_dim);
  out.feature_shift = config_value<double>(cfg, "feature_shift", out.feature_shift);
  out.randomized_scores = config_value<bool>(cfg, "randomized", out.randomized_scores);
  out.validate();
  return out;
}

}  // namespace netconform

#endif  // NETCONFORM_CONFIG_HPP

#ifndef NETCONFORM_CONFORMAL_HPP
#define NETCONFORM_CONFORMAL_HPP

#include <algorithm>
#include <cmath>
#include <functional>
#include <limits>
#include <numeric>
#include <optional>
#include <vector>

#include <fmt/core.h>

#include "netconform/error.hpp"
#include "netconform/linalg.hpp"
#include "netconform/regress.hpp"
#include "netconform/rng.hpp"

namespace netconform {

inline constexpr double infinity = std::numeric_limits<double>::infinity();

struct PredictionInterval {
  double lower = -infinity;
  double upper = infinity;

  double width() const { return upper - lower; }
  bool contains(double y) const { return lower <= y && y <= upper; }
  bool finite() const { return std::isfinite(lower) && std::isfinite(upper); }
};

struct PredictionSet {
  std::vector<int> labels;
  bool forced_singleton = false;  // threshold was below every label's score

  bool contains(int label) const {
    return std::find(labels.begin(), labels.end(), label) != labels.end();
  }
};

struct CalibrationRecord {
  std::vector<double> scores;
  double alpha = 0.1;
  double threshold = infinity;
  long quantile_index = 0;  // 1-based order statistic; > n means infinite threshold
};

// ---------------------------------------------------------------------------
// Scores
// ---------------------------------------------------------------------------

inline Vector concat(const Vector& x, const Vector& z) {
  Vector out(x.size() + z.size());
  out << x, z;
  return out;
}

/// |y - mu(x ++ z)|
inline double score_abs_residual(const LinearModel& model, double y, const Vector& x, const Vector& z) {
  return std::abs(y - predict_linear(model, concat(x, z)));
}

/// |1/2 - F(y | x, z)|
inline double score_cdf_distance(const ConditionalCdfModel& cdf, double y, const Vector& x,
                                 const Vector& z) {
  return std::abs(0.5 - kernel_cdf_eval(cdf, y, x, z));
}

inline void check_simplex(const std::vector<double>& probs) {
  require(!probs.empty(), ErrorCode::parameter, "probability vector is empty");
  double total = 0.0;
  for (double p : probs) {
    require(p >= 0.0 && p <= 1.0, ErrorCode::parameter, "probabilities must lie in [0, 1]");
    total += p;
  }
  require(std::abs(total - 1.0) <= 1e-8, ErrorCode::parameter,
          fmt::format("probabilities sum to {} instead of 1", total));
}

/// Labels ranked by descending probability, ties by label order.
inline std::vector<int> rank_labels(const std::vector<double>& probs) {
  std::vector<int> order(probs.size());
  std::iota(order.begin(), order.end(), 0);
  std::stable_sort(order.begin(), order.end(), [&](int a, int b) {
    return probs[static_cast<std::size_t>(a)] > probs[static_cast<std::size_t>(b)];
  });
  return order;
}

/// Adaptive classification score: cumulative sorted probability through the
/// rank of `label`. With `u` set, the randomized variant subtracts
/// u * p(label) from that total.
inline double score_classification_adaptive(const std::vector<double>& probs, int label,
                                            std::optional<double> u = std::nullopt) {
  check_simplex(probs);
  require(label >= 0 && label < static_cast<int>(probs.size()), ErrorCode::parameter,
          "label outside the alphabet");
  double running = 0.0;
  for (int l : rank_labels(probs)) {
    running += probs[static_cast<std::size_t>(l)];
    if (l == label) {
      if (u) running -= *u * probs[static_cast<std::size_t>(l)];
      return std::min(running, 1.0);
    }
  }
  return 1.0;
}

// ---------------------------------------------------------------------------
// Calibration
// ---------------------------------------------------------------------------

/// k = ceil((1 - alpha)(n + 1)); d is the k-th smallest score, or +inf when
/// k > n.
inline CalibrationRecord conformal_quantile(std::vector<double> scores, double alpha) {
  require(!scores.empty(), ErrorCode::parameter, "calibration set is empty");
  require(alpha > 0.0 && alpha < 1.0, ErrorCode::parameter, "alpha must lie in (0, 1)");
  CalibrationRecord rec;
  rec.alpha = alpha;
  const auto n = static_cast<long>(scores.size());
  const double target = (1.0 - alpha) * static_cast<double>(n + 1);
  // Guard against (1 - alpha)(n + 1) landing a rounding error above an integer.
  rec.quantile_index = static_cast<long>(std::ceil(target - 1e-9));
  rec.quantile_index = std::max(rec.quantile_index, 1L);
  std::vector<double> sorted = scores;
  std::sort(sorted.begin(), sorted.end());
  rec.threshold = rec.quantile_index <= n ? sorted[static_cast<std::size_t>(rec.quantile_index - 1)] : infinity;
  rec.scores = std::move(scores);
  return rec;
}

/// Adds independent Uniform[0, epsilon) noise to each score.
inline std::vector<double> jitter_scores(std::vector<double> scores, double epsilon, RngStream& rng) {
  require(epsilon > 0.0, ErrorCode::parameter, "jitter epsilon must be positive");
  for (double& s : scores) s += epsilon * (1.0 - rng.uniform());
  return scores;
}

// ---------------------------------------------------------------------------
// Inversion
// ---------------------------------------------------------------------------

inline PredictionInterval invert_abs_residual(double center, double d) {
  require(d >= 0.0, ErrorCode::parameter, "threshold must be non-negative");
  if (std::isinf(d)) return {};
  return {center - d, center + d};
}

/// Smallest interval holding {y : 1/2 - d <= F(y) <= 1/2 + d}. F is monotone, so
/// the set runs from the first response with F >= 1/2 - d up to (not
/// including) the first response with F > 1/2 + d; the interval reports that
/// supremum as `upper`.
inline PredictionInterval invert_cdf_distance(const StepCdf& cdf, double d) {
  require(d >= 0.0, ErrorCode::parameter, "threshold must be non-negative");
  PredictionInterval out;
  if (std::isinf(d)) return out;
  const auto n = cdf.responses.size();
  if (0.5 - d > 0.0) {
    Eigen::Index k = 0;
    while (k < n && cdf.cumulative(k) < 0.5 - d) ++k;
    out.lower = k < n ? cdf.responses(k) : infinity;
  }
  Eigen::Index k = 0;
  while (k < n && !(cdf.cumulative(k) > 0.5 + d)) ++k;
  out.upper = k < n ? cdf.responses(k) : infinity;
  if (out.upper < out.lower) out.upper = out.lower;
  return out;
}

/// {labels : score(label) <= d}. An empty result becomes the singleton of the
/// top-ranked label with `forced_singleton` set.
inline PredictionSet prediction_set_adaptive(const std::vector<double>& probs, double d,
                                             std::optional<double> u = std::nullopt) {
  check_simplex(probs);
  PredictionSet set;
  for (int l = 0; l < static_cast<int>(probs.size()); ++l)
    if (score_classification_adaptive(probs, l, u) <= d) set.labels.push_back(l);
  if (set.labels.empty()) {
    set.labels.push_back(rank_labels(probs).front());
    set.forced_singleton = true;
  }
  return set;
}

// ---------------------------------------------------------------------------
// Split conformal pipeline
// ---------------------------------------------------------------------------

/// Aligned node data for one conformal run. `z` holds network covariates
/// already computed on the full graph (test nodes included).
struct ConformalData {
  Matrix x;
  Matrix z;
  Vector y;  // labels 0..K-1 for classification; test entries may be NaN
  IndexSet train;
  IndexSet calibration;
  IndexSet test;

  Vector features(int i) const { return concat(x.row(i).transpose(), z.row(i).transpose()); }
};

struct ScoreSpec {
  enum class Kind { abs_residual, cdf_distance, classification_adaptive };
  enum class MeanModel { ols, kernel };
  Kind kind = Kind::abs_residual;
  MeanModel mean_model = MeanModel::ols;       // abs_residual only
  KernelSpec kernel;                            // cdf_distance and kernel mean
  std::vector<double> bandwidth_grid;           // empty = default grid
  int folds = 5;
  std::optional<double> jitter_epsilon;         // absolute noise scale
  std::optional<double> jitter_relative;        // epsilon = value * score range
  bool randomized = false;                      // classification only
  int num_classes = 2;
};

struct ConformalResult {
  CalibrationRecord calibration;
  std::vector<PredictionInterval> intervals;  // regression kinds
  std::vector<PredictionSet> sets;            // classification
  std::vector<double> test_scores;            // score at the observed test response (NaN if unknown)
  std::vector<bool> covered;                  // only meaningful when test responses are known
  std::vector<double> point_predictions;      // regression: mu(x); classification: P(label 1)
  std::optional<LinearModel> linear;
  std::optional<LogisticModel> logistic;
  double bandwidth = std::numeric_limits<double>::quiet_NaN();
  double jitter_epsilon = 0.0;
};

namespace detail {

inline KernelData kernel_data(const ConformalData& data, const IndexSet& rows) {
  KernelData out;
  const auto k = static_cast<Eigen::Index>(rows.size());
  out.x.resize(k, data.x.cols());
  out.z.resize(k, data.z.cols());
  out.y.resize(k);
  for (Eigen::Index r = 0; r < k; ++r) {
    const int i = rows[static_cast<std::size_t>(r)];
    out.x.row(r) = data.x.row(i);
    out.z.row(r) = data.z.row(i);
    out.y(r) = data.y(i);
  }
  return out;
}

inline Matrix design(const ConformalData& data, const IndexSet& rows) {
  Matrix out(static_cast<Eigen::Index>(rows.size()), data.x.cols() + data.z.cols());
  for (std::size_t r = 0; r < rows.size(); ++r)
    out.row(static_cast<Eigen::Index>(r)) = data.features(rows[r]).transpose();
  return out;
}

inline Vector response(const ConformalData& data, const IndexSet& rows) {
  Vector out(static_cast<Eigen::Index>(rows.size()));
  for (std::size_t r = 0; r < rows.size(); ++r) out(static_cast<Eigen::Index>(r)) = data.y(rows[r]);
  return out;
}

inline std::vector<double> class_probs(const LogisticModel& model, const Vector& features) {
  const double p1 = predict_probability(model, features);
  return {1.0 - p1, p1};
}

}  // namespace detail

/// Split conformal prediction: fit on `train`, score `calibration`, take the
/// conformal quantile and invert the score at each test point.
inline ConformalResult split_conformal(const ConformalData& data, const ScoreSpec& spec, double alpha,
                                       RngStream& rng) {
  const auto n = data.y.size();
  require(data.x.rows() == n && data.z.rows() == n, ErrorCode::parameter, "data blocks must align");
  require(!data.calibration.empty(), ErrorCode::parameter, "calibration set is empty");
  require(!data.train.empty(), ErrorCode::parameter, "training set is empty");
  {
    std::vector<int> all = data.train;
    all.insert(all.end(), data.calibration.begin(), data.calibration.end());
    all.insert(all.end(), data.test.begin(), data.test.end());
    std::sort(all.begin(), all.end());
    require(std::adjacent_find(all.begin(), all.end()) == all.end(), ErrorCode::parameter,
            "train, calibration and test indices must be disjoint");
    for (int i : all) require(i >= 0 && i < n, ErrorCode::parameter, "split index out of range");
  }

  ConformalResult result;
  RngStream fit_rng = rng.substream("fit");
  RngStream jitter_rng = rng.substream("jitter");
  RngStream tie_rng = rng.substream("randomized-score");

  std::vector<double> scores;
  std::vector<double> test_scores(data.test.size(), std::numeric_limits<double>::quiet_NaN());
  const auto known = [&](int i) { return std::isfinite(data.y(i)); };

  // Per-kind score and inversion, both expressed as callables of a row.
  std::function<double(int, double)> score;  // (row, y) -> score
  std::function<PredictionInterval(int, double)> invert;
  std::function<double(int)> center;

  ConditionalCdfModel cdf_model;
  KernelMeanModel mean_model;
  LogisticModel logistic_model;

  switch (spec.kind) {
    case ScoreSpec::Kind::abs_residual: {
      if (spec.mean_model == ScoreSpec::MeanModel::ols) {
        result.linear = fit_ols(detail::design(data, data.train), detail::response(data, data.train));
        center = [&](int i) { return predict_linear(*result.linear, data.features(i)); };
      } else {
        const KernelData kd = detail::kernel_data(data, data.train);
        auto grid = spec.bandwidth_grid.empty() ? default_bandwidth_grid(kd) : spec.bandwidth_grid;
        const auto sel = select_bandwidth_cv_mean(kd, spec.kernel, grid, spec.folds, fit_rng);
        result.bandwidth = sel.bandwidth;
        mean_model = KernelMeanModel(kd, spec.kernel, sel.bandwidth);
        center = [&](int i) {
          return mean_model.predict(data.x.row(i).transpose(), data.z.row(i).transpose());
        };
      }
      score = [&](int i, double y) { return std::abs(y - center(i)); };
      invert = [&](int i, double d) { return invert_abs_residual(center(i), d); };
      break;
    }
    case ScoreSpec::Kind::cdf_distance: {
      const KernelData kd = detail::kernel_data(data, data.train);
      double h = 0.0;
      if (spec.bandwidth_grid.size() == 1) {
        h = spec.bandwidth_grid.front();
      } else {
        auto grid = spec.bandwidth_grid.empty() ? default_bandwidth_grid(kd) : spec.bandwidth_grid;
        h = select_bandwidth_cv(kd, spec.kernel, grid, spec.folds, fit_rng).bandwidth;
      }
      result.bandwidth = h;
      cdf_model = ConditionalCdfModel(kd, spec.kernel, h);
      score = [&](int i, double y) {
        return std::abs(0.5 - cdf_model.step_cdf(data.x.row(i).transpose(), data.z.row(i).transpose())(y));
      };
      invert = [&](int i, double d) {
        return invert_cdf_distance(cdf_model.step_cdf(data.x.row(i).transpose(), data.z.row(i).transpose()), d);
      };
      center = [&](int i) {
        const auto cdf = cdf_model.step_cdf(data.x.row(i).transpose(), data.z.row(i).transpose());
        return invert_cdf_distance(cdf, 0.0).lower;
      };
      break;
    }
    case ScoreSpec::Kind::classification_adaptive: {
      require(spec.num_classes == 2, ErrorCode::parameter,
              "the logistic classifier supports two classes");
      logistic_model = fit_logistic(detail::design(data, data.train), detail::response(data, data.train));
      result.logistic = logistic_model;
      center = [&](int i) { return predict_probability(logistic_model, data.features(i)); };
      break;
    }
  }

  const bool classification = spec.kind == ScoreSpec::Kind::classification_adaptive;
  std::vector<double> calibration_u, test_u;
  if (classification && spec.randomized) {
    for (std::size_t k = 0; k < data.calibration.size(); ++k) calibration_u.push_back(tie_rng.uniform());
    for (std::size_t k = 0; k < data.test.size(); ++k) test_u.push_back(tie_rng.uniform());
  }
  const auto u_at = [](const std::vector<double>& us, std::size_t k) -> std::optional<double> {
    if (us.empty()) return std::nullopt;
    return us[k];
  };

  for (std::size_t k = 0; k < data.calibration.size(); ++k) {
    const int i = data.calibration[k];
    require(known(i), ErrorCode::parameter, "calibration responses must be known");
    if (classification) {
      scores.push_back(score_classification_adaptive(detail::class_probs(logistic_model, data.features(i)),
                                                     static_cast<int>(data.y(i)), u_at(calibration_u, k)));
    } else {
      scores.push_back(score(i, data.y(i)));
    }
  }

  double epsilon = 0.0;
  if (spec.jitter_epsilon) epsilon = *spec.jitter_epsilon;
  if (spec.jitter_relative) {
    const auto [lo, hi] = std::minmax_element(scores.begin(), scores.end());
    epsilon = *spec.jitter_relative * std::max(*hi - *lo, 1e-300);
  }
  std::vector<double> test_jitter(data.test.size(), 0.0);
  if (epsilon > 0.0) {
    scores = jitter_scores(std::move(scores), epsilon, jitter_rng);
    for (double& j : test_jitter) j = epsilon * (1.0 - jitter_rng.uniform());
  }
  result.jitter_epsilon = epsilon;
  result.calibration = conformal_quantile(scores, alpha);
  const double d = result.calibration.threshold;

  for (std::size_t k = 0; k < data.test.size(); ++k) {
    const int i = data.test[k];
    // Jittered test score s + u <= d  <=>  s <= d - u.
    const double effective = std::isinf(d) ? d : std::max(d - test_jitter[k], 0.0);
    const double unjittered_d = std::isinf(d) ? d : d - test_jitter[k];
    if (classification) {
      const auto probs = detail::class_probs(logistic_model, data.features(i));
      result.sets.push_back(prediction_set_adaptive(probs, unjittered_d, u_at(test_u, k)));
      result.point_predictions.push_back(probs[1]);
      if (known(i)) {
        test_scores[k] = score_classification_adaptive(probs, static_cast<int>(data.y(i)), u_at(test_u, k));
        result.covered.push_back(result.sets.back().contains(static_cast<int>(data.y(i))));
      } else {
        result.covered.push_back(false);
      }
    } else {
      result.intervals.push_back(invert(i, effective));
      result.point_predictions.push_back(center(i));
      if (known(i)) {
        test_scores[k] = score(i, data.y(i));
        result.covered.push_back(test_scores[k] + test_jitter[k] <= d);
      } else {
        result.covered.push_back(false);
      }
    }
  }
  result.test_scores = std::move(test_scores);
  return result;
}

}  // namespace netconform

#endif  // NETCONFORM_CONFORMAL_HPP

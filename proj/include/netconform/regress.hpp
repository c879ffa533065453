#ifndef NETCONFORM_REGRESS_HPP
#define NETCONFORM_REGRESS_HPP

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <string>
#include <vector>

#include <fmt/core.h>

#include "netconform/error.hpp"
#include "netconform/linalg.hpp"
#include "netconform/rng.hpp"
#include "netconform/stats.hpp"

namespace netconform {

// ---------------------------------------------------------------------------
// Linear regression
// ---------------------------------------------------------------------------

struct LinearModel {
  double intercept = 0.0;
  Vector coefficients;
  double residual_sd = 0.0;
};

/// Least squares with an intercept, via column-pivoted Householder QR.
/// residual_sd = sqrt(RSS / (n - p - 1)).
inline LinearModel fit_ols(const Matrix& design, const Vector& y) {
  const auto n = design.rows();
  const auto p = design.cols();
  require(y.size() == n, ErrorCode::parameter, "response length must match design rows");
  require(n > p, ErrorCode::fit, fmt::format("OLS needs n > p (n={}, p={})", n, p));
  Matrix full(n, p + 1);
  full.col(0).setOnes();
  full.rightCols(p) = design;
  Eigen::ColPivHouseholderQR<Matrix> qr(full);
  qr.setThreshold(1e-10);
  if (qr.rank() < p + 1) {
    std::string dependent;
    const auto& perm = qr.colsPermutation().indices();
    for (Eigen::Index k = qr.rank(); k < p + 1; ++k) {
      const int col = perm(k);
      if (!dependent.empty()) dependent += ", ";
      dependent += col == 0 ? std::string("intercept") : fmt::format("column {}", col - 1);
    }
    fail(ErrorCode::fit, fmt::format("design is rank deficient; dependent: {}", dependent));
  }
  const Vector beta = qr.solve(y);
  LinearModel model;
  model.intercept = beta(0);
  model.coefficients = beta.tail(p);
  const Vector resid = y - full * beta;
  const auto dof = n - p - 1;
  model.residual_sd = dof > 0 ? std::sqrt(resid.squaredNorm() / static_cast<double>(dof)) : 0.0;
  return model;
}

inline double predict_linear(const LinearModel& model, const Vector& x) {
  require(x.size() == model.coefficients.size(), ErrorCode::parameter,
          fmt::format("expected {} features, got {}", model.coefficients.size(), x.size()));
  return model.intercept + model.coefficients.dot(x);
}

inline Vector predict_linear(const LinearModel& model, const Matrix& design) {
  require(design.cols() == model.coefficients.size(), ErrorCode::parameter, "feature count mismatch");
  return (design * model.coefficients).array() + model.intercept;
}

/// mu(x) -/+ z_{1 - alpha/2} sigma_hat.
inline Interval parametric_normal_interval(const LinearModel& model, const Vector& x, double alpha) {
  require(alpha > 0.0 && alpha < 1.0, ErrorCode::parameter, "alpha must lie in (0, 1)");
  const double center = predict_linear(model, x);
  const double half = normal_quantile(1.0 - alpha / 2.0) * model.residual_sd;
  return {center - half, center + half};
}

// ---------------------------------------------------------------------------
// Logistic regression
// ---------------------------------------------------------------------------

struct LogisticModel {
  double intercept = 0.0;
  Vector coefficients;
  bool converged = false;
  int iterations = 0;
  double gradient_norm = 0.0;  // sup norm of the mean log-likelihood gradient
};

inline constexpr double logistic_clamp = 30.0;

inline double logistic(double eta) {
  eta = std::clamp(eta, -logistic_clamp, logistic_clamp);
  return 1.0 / (1.0 + std::exp(-eta));
}

inline double predict_probability(const LogisticModel& model, const Vector& x) {
  require(x.size() == model.coefficients.size(), ErrorCode::parameter, "feature count mismatch");
  return logistic(model.intercept + model.coefficients.dot(x));
}

/// Maximum likelihood by iteratively reweighted least squares with step
/// halving. Stops when the sup norm of the mean gradient is <= 1e-8 or after
/// 100 iterations. Linear predictors are clamped to [-30, 30]; a fit whose
/// predictors reach the clamp (perfect separation) is reported unconverged,
/// as is the constant fit returned when only one class is present.
inline LogisticModel fit_logistic(const Matrix& design, const Vector& labels) {
  const auto n = design.rows();
  const auto p = design.cols();
  require(labels.size() == n, ErrorCode::parameter, "label length must match design rows");
  bool has0 = false, has1 = false;
  for (Eigen::Index i = 0; i < n; ++i) {
    require(labels(i) == 0.0 || labels(i) == 1.0, ErrorCode::parameter, "labels must be 0 or 1");
    (labels(i) == 1.0 ? has1 : has0) = true;
  }
  require(n > 0, ErrorCode::fit, "logistic regression needs at least one observation");
  if (!(has0 && has1)) {
    // The likelihood has no finite maximizer; use the saturated constant fit.
    LogisticModel model;
    model.intercept = has1 ? logistic_clamp : -logistic_clamp;
    model.coefficients = Vector::Zero(p);
    return model;
  }

  Matrix full(n, p + 1);
  full.col(0).setOnes();
  full.rightCols(p) = design;
  const auto nd = static_cast<double>(n);

  const auto loglik = [&](const Vector& beta) {
    const Vector eta = full * beta;
    double ll = 0.0;
    for (Eigen::Index i = 0; i < n; ++i) {
      const double e = std::clamp(eta(i), -logistic_clamp, logistic_clamp);
      // log(1 + exp(e)) computed stably
      const double softplus = e > 0 ? e + std::log1p(std::exp(-e)) : std::log1p(std::exp(e));
      ll += labels(i) * e - softplus;
    }
    return ll / nd;
  };

  Vector beta = Vector::Zero(p + 1);
  LogisticModel model;
  double current = loglik(beta);
  for (int it = 1; it <= 100; ++it) {
    const Vector eta = full * beta;
    Vector prob(n), w(n);
    for (Eigen::Index i = 0; i < n; ++i) {
      prob(i) = logistic(eta(i));
      w(i) = std::max(prob(i) * (1.0 - prob(i)), 1e-12);
    }
    const Vector grad = full.transpose() * (labels - prob) / nd;
    model.gradient_norm = grad.cwiseAbs().maxCoeff();
    model.iterations = it - 1;
    if (model.gradient_norm <= 1e-8) break;
    Matrix hessian = full.transpose() * w.asDiagonal() * full / nd;
    hessian.diagonal().array() += 1e-12;
    const Vector step = hessian.ldlt().solve(grad);
    double scale = 1.0;
    Vector candidate = beta + step;
    double value = loglik(candidate);
    for (int h = 0; h < 40 && !(value >= current); ++h) {
      scale /= 2.0;
      candidate = beta + scale * step;
      value = loglik(candidate);
    }
    if (!(value >= current)) break;
    beta = std::move(candidate);
    current = value;
    model.iterations = it;
  }
  const Vector eta = full * beta;
  Vector prob(n);
  for (Eigen::Index i = 0; i < n; ++i) prob(i) = logistic(eta(i));
  model.gradient_norm = (full.transpose() * (labels - prob) / nd).cwiseAbs().maxCoeff();
  const bool clamped = eta.size() > 0 && eta.cwiseAbs().maxCoeff() >= logistic_clamp;
  model.converged = model.gradient_norm <= 1e-8 && !clamped;
  model.intercept = beta(0);
  model.coefficients = beta.tail(p);
  return model;
}

// ---------------------------------------------------------------------------
// Principal components
// ---------------------------------------------------------------------------

struct PcaResult {
  Matrix scores;    // n x k
  Matrix loadings;  // m x k, orthonormal columns
  Vector variances; // descending
  Vector center;    // column means

  Matrix project(const Matrix& rows) const {
    return (rows.rowwise() - center.transpose()) * loadings;
  }
};

/// Top-k principal components of the column-centered matrix, from the
/// sample covariance. Loadings follow the largest-entry-positive sign rule.
inline PcaResult pca_top_k(const Matrix& data, int k) {
  const auto n = data.rows();
  const auto m = data.cols();
  require(k >= 1 && k <= std::min(n, m), ErrorCode::parameter,
          fmt::format("PCA rank {} must lie in [1, min(n, m) = {}]", k, std::min(n, m)));
  require(n >= 2, ErrorCode::parameter, "PCA needs at least two rows");
  PcaResult out;
  out.center = column_means(data);
  const Matrix centered = data.rowwise() - out.center.transpose();
  Matrix cov = Matrix::Zero(m, m);
  cov.selfadjointView<Eigen::Lower>().rankUpdate(centered.transpose());
  cov.triangularView<Eigen::StrictlyUpper>() = cov.transpose();
  cov /= static_cast<double>(n - 1);
  const int dim = static_cast<int>(m);
  const auto top = symmetric_eigen_range(cov, dim - k, dim - 1);
  out.loadings.resize(m, k);
  out.variances.resize(k);
  for (int r = 0; r < k; ++r) {
    out.loadings.col(r) = top.vectors.col(k - 1 - r);
    out.variances(r) = std::max(0.0, top.values(k - 1 - r));
  }
  apply_sign_convention(out.loadings);
  out.scores = centered * out.loadings;
  return out;
}

// ---------------------------------------------------------------------------
// Kernels
// ---------------------------------------------------------------------------

/// Radial profile H: [0, inf) -> [0, inf), decreasing with H(0) = 1.
struct KernelSpec {
  enum class Profile { gaussian, epanechnikov, boxcar };
  Profile profile = Profile::gaussian;

  double operator()(double t) const {
    switch (profile) {
      case Profile::gaussian: return std::exp(-0.5 * t * t);
      case Profile::epanechnikov: return t < 1.0 ? 1.0 - t * t : 0.0;
      case Profile::boxcar: return t <= 1.0 ? 1.0 : 0.0;
    }
    return 0.0;
  }

  static constexpr bool decreasing = true;
  double bound() const { return 1.0; }
  /// Lipschitz constant of H on [0, inf); infinite for the boxcar.
  double lipschitz() const {
    switch (profile) {
      case Profile::gaussian: return std::exp(-0.5);
      case Profile::epanechnikov: return 2.0;
      case Profile::boxcar: return std::numeric_limits<double>::infinity();
    }
    return 0.0;
  }

  std::string name() const {
    switch (profile) {
      case Profile::gaussian: return "gaussian";
      case Profile::epanechnikov: return "epanechnikov";
      case Profile::boxcar: return "boxcar";
    }
    return "?";
  }

  static KernelSpec from_name(const std::string& name) {
    if (name == "gaussian") return {Profile::gaussian};
    if (name == "epanechnikov") return {Profile::epanechnikov};
    if (name == "boxcar") return {Profile::boxcar};
    fail(ErrorCode::config, fmt::format("unknown kernel '{}'", name));
  }
};

/// Training triples for kernel regressors. Either covariate block may have
/// zero columns.
struct KernelData {
  Matrix x;
  Matrix z;
  Vector y;

  Eigen::Index size() const { return y.size(); }

  void validate() const {
    require(x.rows() == y.size() && z.rows() == y.size(), ErrorCode::parameter,
            "kernel training blocks must have matching rows");
  }

  /// ||X_i - x|| + ||Z_i - z||
  double distance(Eigen::Index i, const Vector& qx, const Vector& qz) const {
    const double dx = x.cols() > 0 ? (x.row(i).transpose() - qx).norm() : 0.0;
    const double dz = z.cols() > 0 ? (z.row(i).transpose() - qz).norm() : 0.0;
    return dx + dz;
  }

  double distance(Eigen::Index i, Eigen::Index j) const {
    const double dx = x.cols() > 0 ? (x.row(i) - x.row(j)).norm() : 0.0;
    const double dz = z.cols() > 0 ? (z.row(i) - z.row(j)).norm() : 0.0;
    return dx + dz;
  }

  KernelData subset(const std::vector<Eigen::Index>& rows) const {
    KernelData out;
    const auto k = static_cast<Eigen::Index>(rows.size());
    out.x.resize(k, x.cols());
    out.z.resize(k, z.cols());
    out.y.resize(k);
    for (Eigen::Index r = 0; r < k; ++r) {
      out.x.row(r) = x.row(rows[static_cast<std::size_t>(r)]);
      out.z.row(r) = z.row(rows[static_cast<std::size_t>(r)]);
      out.y(r) = y(rows[static_cast<std::size_t>(r)]);
    }
    return out;
  }

  /// Rows sorted by (y, x, z) lexicographically; independent of row labels.
  std::vector<Eigen::Index> canonical_order() const {
    std::vector<Eigen::Index> order(static_cast<std::size_t>(size()));
    std::iota(order.begin(), order.end(), Eigen::Index{0});
    std::sort(order.begin(), order.end(), [&](Eigen::Index a, Eigen::Index b) {
      if (y(a) != y(b)) return y(a) < y(b);
      for (Eigen::Index c = 0; c < x.cols(); ++c)
        if (x(a, c) != x(b, c)) return x(a, c) < x(b, c);
      for (Eigen::Index c = 0; c < z.cols(); ++c)
        if (z(a, c) != z(b, c)) return z(a, c) < z(b, c);
      return false;
    });
    return order;
  }
};

/// Weighted empirical CDF at one query point: F(y) = cumulative(k) for
/// responses[k] <= y < responses[k + 1].
struct StepCdf {
  Vector responses;   // sorted ascending, ties kept
  Vector cumulative;  // nondecreasing, last entry 1
  bool fallback = false;

  double operator()(double y) const {
    const auto* begin = responses.data();
    const auto* end = begin + responses.size();
    const auto pos = std::upper_bound(begin, end, y) - begin;
    return pos == 0 ? 0.0 : cumulative(pos - 1);
  }
};

/// Kernel estimate of the conditional CDF:
///   F(y | x, z) = sum_i K((||X_i - x|| + ||Z_i - z||) / h) 1(Y_i <= y) / sum_i K(.)
/// When every weight underflows to zero the unconditional empirical CDF of
/// the training responses is returned instead.
class ConditionalCdfModel {
 public:
  ConditionalCdfModel() = default;

  ConditionalCdfModel(KernelData data, KernelSpec kernel, double bandwidth)
      : kernel_(kernel), bandwidth_(bandwidth) {
    require(bandwidth > 0.0 && std::isfinite(bandwidth), ErrorCode::parameter,
            "bandwidth must be positive and finite");
    data.validate();
    require(data.size() > 0, ErrorCode::parameter, "conditional CDF model needs training data");
    std::vector<Eigen::Index> order(static_cast<std::size_t>(data.size()));
    std::iota(order.begin(), order.end(), Eigen::Index{0});
    std::stable_sort(order.begin(), order.end(),
                     [&](Eigen::Index a, Eigen::Index b) { return data.y(a) < data.y(b); });
    data_ = data.subset(order);
  }

  const KernelData& data() const { return data_; }
  const KernelSpec& kernel() const { return kernel_; }
  double bandwidth() const { return bandwidth_; }

  /// Kernel weights in response-sorted order.
  Vector weights(const Vector& x, const Vector& z) const {
    Vector w(data_.size());
    for (Eigen::Index i = 0; i < data_.size(); ++i) w(i) = kernel_(data_.distance(i, x, z) / bandwidth_);
    return w;
  }

  StepCdf step_cdf(const Vector& x, const Vector& z) const { return from_weights(weights(x, z)); }

  StepCdf from_weights(const Vector& w) const {
    StepCdf cdf;
    cdf.responses = data_.y;
    cdf.cumulative.resize(w.size());
    double total = w.sum();
    Vector use = w;
    if (!(total > 0.0)) {
      use.setOnes();
      total = static_cast<double>(w.size());
      cdf.fallback = true;
    }
    double running = 0.0;
    for (Eigen::Index i = 0; i < use.size(); ++i) {
      running += use(i);
      cdf.cumulative(i) = running / total;
    }
    // Tied responses share the value after the last tie.
    for (Eigen::Index i = use.size() - 1; i > 0; --i)
      if (cdf.responses(i - 1) == cdf.responses(i)) cdf.cumulative(i - 1) = cdf.cumulative(i);
    if (use.size() > 0) cdf.cumulative(use.size() - 1) = 1.0;
    return cdf;
  }

 private:
  KernelData data_;
  KernelSpec kernel_;
  double bandwidth_ = 1.0;
};

inline double kernel_cdf_eval(const ConditionalCdfModel& model, double y, const Vector& x,
                              const Vector& z) {
  return std::clamp(model.step_cdf(x, z)(y), 0.0, 1.0);
}

/// Nadaraya-Watson mean regressor with the same summed-norm kernel. Falls back
/// to the training mean when all weights vanish.
class KernelMeanModel {
 public:
  KernelMeanModel() = default;
  KernelMeanModel(KernelData data, KernelSpec kernel, double bandwidth)
      : data_(std::move(data)), kernel_(kernel), bandwidth_(bandwidth) {
    require(bandwidth > 0.0, ErrorCode::parameter, "bandwidth must be positive");
    data_.validate();
    require(data_.size() > 0, ErrorCode::parameter, "kernel mean model needs training data");
    mean_ = data_.y.mean();
  }

  double predict(const Vector& x, const Vector& z) const {
    double num = 0.0, den = 0.0;
    for (Eigen::Index i = 0; i < data_.size(); ++i) {
      const double w = kernel_(data_.distance(i, x, z) / bandwidth_);
      num += w * data_.y(i);
      den += w;
    }
    return den > 0.0 ? num / den : mean_;
  }

  double bandwidth() const { return bandwidth_; }
  const KernelSpec& kernel() const { return kernel_; }

 private:
  KernelData data_;
  KernelSpec kernel_;
  double bandwidth_ = 1.0;
  double mean_ = 0.0;
};

// ---------------------------------------------------------------------------
// Bandwidth selection
// ---------------------------------------------------------------------------

/// Median of pairwise summed-norm distances; uses at most 400 rows picked
/// evenly from the canonical order.
inline double median_pairwise_distance(const KernelData& data) {
  const auto order = data.canonical_order();
  std::vector<Eigen::Index> rows;
  const std::size_t limit = 400;
  if (order.size() <= limit) {
    rows = order;
  } else {
    for (std::size_t k = 0; k < limit; ++k) rows.push_back(order[k * order.size() / limit]);
  }
  std::vector<double> d;
  for (std::size_t a = 0; a < rows.size(); ++a)
    for (std::size_t b = a + 1; b < rows.size(); ++b) d.push_back(data.distance(rows[a], rows[b]));
  require(!d.empty(), ErrorCode::selection, "need at least two points for a bandwidth grid");
  auto mid = d.begin() + static_cast<std::ptrdiff_t>(d.size() / 2);
  std::nth_element(d.begin(), mid, d.end());
  return *mid;
}

/// 15 log-spaced bandwidths from 0.05 to 2 times the median pairwise distance.
inline std::vector<double> default_bandwidth_grid(const KernelData& data, int points = 15) {
  double scale = median_pairwise_distance(data);
  if (!(scale > 0.0)) scale = 1.0;
  const double lo = std::log(0.05 * scale), hi = std::log(2.0 * scale);
  std::vector<double> grid;
  for (int k = 0; k < points; ++k)
    grid.push_back(std::exp(points == 1 ? hi : lo + (hi - lo) * k / (points - 1)));
  return grid;
}

/// Fold index per row. Rows are ranked in canonical order and the ranks are
/// shuffled with `rng`, so relabeling rows does not change any row's fold.
inline std::vector<int> assign_folds(const KernelData& data, int folds, RngStream& rng) {
  auto order = data.canonical_order();
  std::vector<std::size_t> slots(order.size());
  std::iota(slots.begin(), slots.end(), std::size_t{0});
  std::shuffle(slots.begin(), slots.end(), rng);
  std::vector<int> fold(order.size());
  for (std::size_t r = 0; r < order.size(); ++r)
    fold[static_cast<std::size_t>(order[r])] = static_cast<int>(slots[r] % static_cast<std::size_t>(folds));
  return fold;
}

/// Sorted training responses thinned evenly to at most `max_levels`.
inline std::vector<double> evaluation_levels(const Vector& y, std::size_t max_levels = 200) {
  std::vector<double> sorted(y.data(), y.data() + y.size());
  std::sort(sorted.begin(), sorted.end());
  sorted.erase(std::unique(sorted.begin(), sorted.end()), sorted.end());
  if (sorted.size() <= max_levels) return sorted;
  std::vector<double> out;
  for (std::size_t k = 0; k < max_levels; ++k)
    out.push_back(sorted[k * (sorted.size() - 1) / (max_levels - 1)]);
  return out;
}

struct BandwidthSelection {
  double bandwidth = 0.0;
  std::vector<double> grid;
  std::vector<double> losses;      // NaN for degenerate bandwidths
  std::vector<bool> degenerate;
};

/// K-fold Brier-type loss of the conditional CDF estimator at bandwidth h:
///   mean over held-out i and levels g of (1(Y_i <= g) - F_{-fold(i)}(g | X_i, Z_i))^2.
/// `degenerate` is set when any held-out point fell back to the unconditional CDF.
inline double cdf_cv_loss(const KernelData& data, const KernelSpec& kernel, double h,
                          const std::vector<int>& fold, int folds, const std::vector<double>& levels,
                          const Matrix& distances, bool& degenerate) {
  degenerate = false;
  double total = 0.0;
  long count = 0;
  for (int f = 0; f < folds; ++f) {
    std::vector<Eigen::Index> train;
    for (Eigen::Index i = 0; i < data.size(); ++i)
      if (fold[static_cast<std::size_t>(i)] != f) train.push_back(i);
    std::stable_sort(train.begin(), train.end(),
                     [&](Eigen::Index a, Eigen::Index b) { return data.y(a) < data.y(b); });
    if (train.empty()) continue;
    std::vector<double> cum(train.size());
    for (Eigen::Index i = 0; i < data.size(); ++i) {
      if (fold[static_cast<std::size_t>(i)] != f) continue;
      double running = 0.0;
      for (std::size_t t = 0; t < train.size(); ++t) {
        running += kernel(distances(i, train[t]) / h);
        cum[t] = running;
      }
      double denom = running;
      const bool uniform = !(denom > 0.0);
      if (uniform) {
        degenerate = true;
        for (std::size_t t = 0; t < train.size(); ++t) cum[t] = static_cast<double>(t + 1);
        denom = static_cast<double>(train.size());
      }
      std::size_t pos = 0;
      for (double g : levels) {
        while (pos < train.size() && data.y(train[pos]) <= g) ++pos;
        const double fhat = pos == 0 ? 0.0 : cum[pos - 1] / denom;
        const double indicator = data.y(i) <= g ? 1.0 : 0.0;
        total += (indicator - fhat) * (indicator - fhat);
        ++count;
      }
    }
  }
  return count > 0 ? total / static_cast<double>(count) : 0.0;
}

inline Matrix pairwise_distances(const KernelData& data) {
  const auto n = data.size();
  Matrix d(n, n);
  for (Eigen::Index i = 0; i < n; ++i) {
    d(i, i) = 0.0;
    for (Eigen::Index j = i + 1; j < n; ++j) d(i, j) = d(j, i) = data.distance(i, j);
  }
  return d;
}

/// Grid bandwidth minimizing the K-fold Brier-type loss. Ties go to the
/// larger bandwidth; degenerate bandwidths are never selected.
inline BandwidthSelection select_bandwidth_cv(const KernelData& data, const KernelSpec& kernel,
                                              std::vector<double> grid, int folds, RngStream& rng) {
  data.validate();
  require(!grid.empty(), ErrorCode::parameter, "bandwidth grid must be nonempty");
  require(folds >= 2, ErrorCode::parameter, "need at least two folds");
  require(data.size() >= folds, ErrorCode::selection, "fewer rows than folds");
  for (double h : grid) require(h > 0.0, ErrorCode::parameter, "bandwidths must be positive");
  BandwidthSelection sel;
  sel.grid = grid;
  if (grid.size() == 1) {
    sel.bandwidth = grid.front();
    sel.losses = {std::numeric_limits<double>::quiet_NaN()};
    sel.degenerate = {false};
    return sel;
  }
  const auto fold = assign_folds(data, folds, rng);
  const auto levels = evaluation_levels(data.y);
  const Matrix distances = pairwise_distances(data);
  double best = std::numeric_limits<double>::infinity();
  bool found = false;
  for (double h : grid) {
    bool degenerate = false;
    const double loss = cdf_cv_loss(data, kernel, h, fold, folds, levels, distances, degenerate);
    sel.losses.push_back(degenerate ? std::numeric_limits<double>::quiet_NaN() : loss);
    sel.degenerate.push_back(degenerate);
    if (degenerate) continue;
    if (!found || loss < best || (loss == best && h > sel.bandwidth)) {
      best = loss;
      sel.bandwidth = h;
      found = true;
    }
  }
  require(found, ErrorCode::selection, "every candidate bandwidth produced a degenerate fit");
  return sel;
}

/// K-fold squared-error bandwidth choice for the kernel mean regressor.
inline BandwidthSelection select_bandwidth_cv_mean(const KernelData& data, const KernelSpec& kernel,
                                                   std::vector<double> grid, int folds,
                                                   RngStream& rng) {
  data.validate();
  require(!grid.empty(), ErrorCode::parameter, "bandwidth grid must be nonempty");
  require(folds >= 2, ErrorCode::parameter, "need at least two folds");
  BandwidthSelection sel;
  sel.grid = grid;
  const auto fold = assign_folds(data, folds, rng);
  const Matrix distances = pairwise_distances(data);
  double best = std::numeric_limits<double>::infinity();
  bool found = false;
  for (double h : grid) {
    double sse = 0.0;
    bool degenerate = false;
    for (Eigen::Index i = 0; i < data.size(); ++i) {
      double num = 0.0, den = 0.0;
      for (Eigen::Index j = 0; j < data.size(); ++j) {
        if (fold[static_cast<std::size_t>(j)] == fold[static_cast<std::size_t>(i)]) continue;
        const double w = kernel(distances(i, j) / h);
        num += w * data.y(j);
        den += w;
      }
      if (!(den > 0.0)) {
        degenerate = true;
        break;
      }
      const double r = data.y(i) - num / den;
      sse += r * r;
    }
    const double loss = sse / static_cast<double>(data.size());
    sel.losses.push_back(degenerate ? std::numeric_limits<double>::quiet_NaN() : loss);
    sel.degenerate.push_back(degenerate);
    if (degenerate) continue;
    if (!found || loss < best || (loss == best && h > sel.bandwidth)) {
      best = loss;
      sel.bandwidth = h;
      found = true;
    }
  }
  require(found, ErrorCode::selection, "every candidate bandwidth produced a degenerate fit");
  return sel;
}

// ---------------------------------------------------------------------------
// Coverage smoothing
// ---------------------------------------------------------------------------

struct SmoothCurve {
  std::vector<double> grid;
  std::vector<double> values;  // NaN where undefined
  std::vector<bool> defined;
};

/// Gaussian Nadaraya-Watson smooth of a 0/1 indicator over `grid`. Grid points
/// with no effective weight are marked undefined.
inline SmoothCurve kernel_smoother_curve(const std::vector<double>& xs, const std::vector<double>& hits,
                                         const std::vector<double>& grid, double bandwidth) {
  require(bandwidth > 0.0, ErrorCode::parameter, "smoother bandwidth must be positive");
  require(xs.size() == hits.size(), ErrorCode::parameter, "xs and hits must have equal length");
  const KernelSpec gauss{};
  SmoothCurve curve;
  curve.grid = grid;
  for (double g : grid) {
    double num = 0.0, den = 0.0;
    for (std::size_t i = 0; i < xs.size(); ++i) {
      const double w = gauss((xs[i] - g) / bandwidth);
      num += w * hits[i];
      den += w;
    }
    const bool ok = den > 0.0;
    curve.defined.push_back(ok);
    curve.values.push_back(ok ? std::clamp(num / den, 0.0, 1.0) : std::numeric_limits<double>::quiet_NaN());
  }
  return curve;
}

}  // namespace netconform

#endif  // NETCONFORM_REGRESS_HPP

#ifndef NETCONFORM_GRAPHGEN_HPP
#define NETCONFORM_GRAPHGEN_HPP

#include <cmath>
#include <numbers>
#include <optional>
#include <string>
#include <vector>

#include <fmt/core.h>

#include "netconform/covariates.hpp"
#include "netconform/error.hpp"
#include "netconform/graph.hpp"
#include "netconform/linalg.hpp"
#include "netconform/rng.hpp"

namespace netconform {

// ---------------------------------------------------------------------------
// Latent positions and graphons
// ---------------------------------------------------------------------------

struct LatentPositions {
  Vector xi;               // graphon positions in [0, 1]
  std::optional<Matrix> z; // dot-product / latent-space positions, n x d

  int size() const { return static_cast<int>(xi.size()); }
};

enum class GraphonKind { min, abs_diff, constant, inner_product, tabulated };

/// Symmetric non-negative kernel w on [0,1]^2.
///
/// `inner_product` reads node vectors from LatentPositions::z instead of the
/// scalar positions. `tabulated` holds values on a uniform (g x g) grid over
/// [0,1]^2 and interpolates bilinearly.
struct GraphonSpec {
  GraphonKind kind = GraphonKind::min;
  double constant = 1.0;
  Matrix table;

  static GraphonSpec min_kernel() { return {GraphonKind::min, 1.0, {}}; }
  static GraphonSpec abs_diff() { return {GraphonKind::abs_diff, 1.0, {}}; }
  static GraphonSpec constant_kernel(double c) { return {GraphonKind::constant, c, {}}; }
  static GraphonSpec inner_product() { return {GraphonKind::inner_product, 1.0, {}}; }
  static GraphonSpec tabulated(Matrix grid) {
    GraphonSpec spec{GraphonKind::tabulated, 1.0, std::move(grid)};
    spec.validate();
    return spec;
  }

  void validate() const {
    if (kind == GraphonKind::constant) {
      require(constant >= 0.0, ErrorCode::parameter, "constant graphon must be non-negative");
    }
    if (kind == GraphonKind::tabulated) {
      require(table.rows() >= 2 && table.rows() == table.cols(), ErrorCode::parameter,
              "tabulated graphon needs a square grid with at least 2 points per side");
      for (Eigen::Index i = 0; i < table.rows(); ++i)
        for (Eigen::Index j = 0; j < table.cols(); ++j) {
          require(table(i, j) >= 0.0, ErrorCode::parameter, "graphon values must be non-negative");
          require(table(i, j) == table(j, i), ErrorCode::parameter, "graphon grid must be symmetric");
        }
    }
  }

  /// w(u, v) for the scalar kinds.
  double operator()(double u, double v) const {
    switch (kind) {
      case GraphonKind::min: return std::min(u, v);
      case GraphonKind::abs_diff: return std::abs(u - v);
      case GraphonKind::constant: return constant;
      case GraphonKind::tabulated: return interpolate(u, v);
      case GraphonKind::inner_product:
        fail(ErrorCode::parameter, "inner-product graphon must be evaluated on latent vectors");
    }
    return 0.0;
  }

  double value(const LatentPositions& pos, int i, int j) const {
    if (kind == GraphonKind::inner_product) {
      require(pos.z.has_value(), ErrorCode::parameter,
              "inner-product graphon needs latent vectors z");
      return std::max(0.0, pos.z->row(i).dot(pos.z->row(j)));
    }
    return (*this)(pos.xi(i), pos.xi(j));
  }

 private:
  double interpolate(double u, double v) const {
    const double step = 1.0 / static_cast<double>(table.rows() - 1);
    const auto cell = [&](double t) {
      const auto last = static_cast<double>(table.rows() - 2);
      return static_cast<Eigen::Index>(std::clamp(std::floor(t / step), 0.0, last));
    };
    const Eigen::Index a = cell(u), b = cell(v);
    const double fu = u / step - static_cast<double>(a);
    const double fv = v / step - static_cast<double>(b);
    return (1 - fu) * (1 - fv) * table(a, b) + fu * (1 - fv) * table(a + 1, b) +
           (1 - fu) * fv * table(a, b + 1) + fu * fv * table(a + 1, b + 1);
  }
};

inline LatentPositions sample_latent_positions(int n, RngStream& rng) {
  require(n >= 1, ErrorCode::parameter, "need at least one latent position");
  LatentPositions pos;
  pos.xi.resize(n);
  for (int i = 0; i < n; ++i) pos.xi(i) = rng.uniform();
  return pos;
}

/// Symmetric matrix of i.i.d. Uniform(0,1] edge variables, drawn for i < j in
/// row-major order (the same order the rng-driven samplers consume them).
inline Matrix sample_pair_uniforms(int n, RngStream& rng) {
  Matrix eta = Matrix::Zero(n, n);
  for (int i = 0; i < n; ++i)
    for (int j = i + 1; j < n; ++j) eta(i, j) = eta(j, i) = rng.uniform();
  return eta;
}

inline double edge_probability(const GraphonSpec& w, double rho, const LatentPositions& pos,
                               int i, int j) {
  return std::min(rho * w.value(pos, i, j), 1.0);
}

/// A_ij = 1(eta_ij <= min(rho w(xi_i, xi_j), 1)) with the supplied edge
/// variables.
inline Graph sample_graphon_graph(const GraphonSpec& w, double rho, const LatentPositions& pos,
                                  const Matrix& eta) {
  require(rho >= 0.0, ErrorCode::parameter, "sparsity factor rho must be non-negative");
  const int n = pos.size();
  require(n >= 2, ErrorCode::parameter, "graphon sampling needs at least two nodes");
  require(eta.rows() == n && eta.cols() == n, ErrorCode::parameter, "edge variables must be n x n");
  Matrix a = Matrix::Zero(n, n);
  for (int i = 0; i < n; ++i)
    for (int j = i + 1; j < n; ++j)
      if (eta(i, j) <= edge_probability(w, rho, pos, i, j)) a(i, j) = a(j, i) = 1.0;
  return Graph(std::move(a));
}

inline Graph sample_graphon_graph(const GraphonSpec& w, double rho, const LatentPositions& pos,
                                  RngStream& rng) {
  require(rho >= 0.0, ErrorCode::parameter, "sparsity factor rho must be non-negative");
  const int n = pos.size();
  require(n >= 2, ErrorCode::parameter, "graphon sampling needs at least two nodes");
  Matrix a = Matrix::Zero(n, n);
  for (int i = 0; i < n; ++i)
    for (int j = i + 1; j < n; ++j)
      if (rng.uniform() <= edge_probability(w, rho, pos, i, j)) a(i, j) = a(j, i) = 1.0;
  return Graph(std::move(a));
}

/// P_ij = clamp(nu <z_i, z_j>, 0, 1), hollow.
inline Matrix rdpg_mean_matrix(const Matrix& z, double nu) {
  require(nu > 0.0, ErrorCode::parameter, "nu must be positive");
  Matrix p = (nu * (z * z.transpose())).cwiseMax(0.0).cwiseMin(1.0);
  p.diagonal().setZero();
  return p;
}

/// P_ij = nu exp(-(z_i - z_j)^2 / 4), hollow.
inline Matrix gaussian_latent_space_probs(const Vector& z, double nu) {
  require(nu > 0.0 && nu <= 1.0, ErrorCode::parameter, "nu must lie in (0, 1]");
  const auto n = z.size();
  Matrix p = Matrix::Zero(n, n);
  for (Eigen::Index i = 0; i < n; ++i)
    for (Eigen::Index j = i + 1; j < n; ++j) {
      const double d = z(i) - z(j);
      p(i, j) = p(j, i) = nu * std::exp(-d * d / 4.0);
    }
  return p;
}

inline void check_probability_matrix(const Matrix& p) {
  require(p.rows() == p.cols(), ErrorCode::parameter, "probability matrix must be square");
  for (Eigen::Index i = 0; i < p.rows(); ++i)
    for (Eigen::Index j = 0; j < p.cols(); ++j)
      if (!(p(i, j) >= 0.0 && p(i, j) <= 1.0))
        fail(ErrorCode::parameter, fmt::format("edge probability out of [0,1] at ({},{}): {}", i, j, p(i, j)));
}

/// Independent Bernoulli(P_ij) edges for i < j, mirrored.
inline Graph sample_bernoulli_graph(const Matrix& p, RngStream& rng) {
  check_probability_matrix(p);
  const auto n = p.rows();
  Matrix a = Matrix::Zero(n, n);
  for (Eigen::Index i = 0; i < n; ++i)
    for (Eigen::Index j = i + 1; j < n; ++j)
      if (rng.uniform() <= p(i, j)) a(i, j) = a(j, i) = 1.0;
  return Graph(std::move(a));
}

/// Closed-form eigenpairs of the graphon min(u, v):
/// lambda_k = (2 / ((2k - 1) pi))^2, phi_k(x) = sin((2k - 1) pi x / 2).
///
/// phi_k is used exactly as written; its squared L2 norm on [0,1] is 1/2.
struct MinGraphonEigenpairs {
  int rank = 0;

  double value(int k) const {
    const double f = (2.0 * k - 1.0) * std::numbers::pi;
    return (2.0 / f) * (2.0 / f);
  }

  double function(int k, double x) const {
    return std::sin((2.0 * k - 1.0) * std::numbers::pi * x / 2.0);
  }

  /// Latent positions Z_ik = sqrt(lambda_k) phi_k(xi_i), k = 1..rank.
  Matrix latent_positions(const Vector& xi) const {
    Matrix z(xi.size(), rank);
    for (Eigen::Index i = 0; i < xi.size(); ++i)
      for (int k = 1; k <= rank; ++k) z(i, k - 1) = std::sqrt(value(k)) * function(k, xi(i));
    return z;
  }
};

inline MinGraphonEigenpairs min_graphon_eigenpairs(int k) {
  require(k >= 1, ErrorCode::parameter, "need at least one eigenpair");
  return {k};
}

// ---------------------------------------------------------------------------
// Spatial autoregressive responses
// ---------------------------------------------------------------------------

struct SarModelSpec {
  Vector beta;           // coefficients on X
  Vector neighbor_beta;  // coefficients on neighbor-averaged X; empty means none
  double rho = 0.7;
  double noise_sd = 1.0;
  double intercept = 0.0;
  WeightRule weight_rule;
  bool allow_isolated = true;  // isolated nodes get no neighbor terms

  void validate(Eigen::Index p) const {
    require(beta.size() == p, ErrorCode::parameter, "beta length must match X columns");
    require(neighbor_beta.size() == 0 || neighbor_beta.size() == p, ErrorCode::parameter,
            "neighbor_beta length must match X columns");
    require(noise_sd > 0.0, ErrorCode::parameter, "noise_sd must be positive");
  }
};

struct SarResponse {
  Vector y;
  Vector noise;
  IndexSet isolated;      // nodes whose neighbor row is empty
  double residual = 0.0;  // sup norm of (I - rho M) y - c
  std::string solver;
};

/// Solves y = c + rho M y for the row-normalized neighbor weights M.
///
/// |rho| < 1 uses fixed-point iteration, which contracts because every row of
/// M sums to one or zero; with symmetric raw weights the iteration is
/// Chebyshev-accelerated. Otherwise a dense LU with a reciprocal condition
/// check is used.
inline SarResponse solve_sar_system(const NeighborWeights& m, double rho, const Vector& c) {
  const int n = static_cast<int>(c.size());
  require(m.size() == n, ErrorCode::parameter, "weight rows must match the response length");
  SarResponse out;
  const auto apply = [&](const Vector& y) {
    Vector r(n);
    for (int i = 0; i < n; ++i) {
      double s = 0.0;
      for (const auto& [j, w] : m.rows[static_cast<std::size_t>(i)]) s += w * y(j);
      r(i) = s;
    }
    return r;
  };
  const auto residual = [&](const Vector& y) {
    return n == 0 ? 0.0 : (y - rho * apply(y) - c).cwiseAbs().maxCoeff();
  };

  if (std::abs(rho) < 1.0 && m.real_spectrum) {
    // Chebyshev acceleration of the fixed-point map; rho M has its spectrum
    // in [-|rho|, |rho|].
    out.solver = "chebyshev";
    const double target = 1e-10 * std::max(1.0, c.cwiseAbs().maxCoeff());
    const double s2 = rho * rho;
    Vector prev = c;
    Vector y = c + rho * apply(c);
    double omega = 2.0 / (2.0 - s2);
    for (int it = 0; it < 100000; ++it) {
      const Vector mapped = c + rho * apply(y);
      if ((mapped - y).cwiseAbs().maxCoeff() <= target) {
        y = mapped;
        break;
      }
      Vector next = omega * (mapped - prev) + prev;
      prev = std::move(y);
      y = std::move(next);
      omega = 1.0 / (1.0 - 0.25 * s2 * omega);
    }
    out.y = std::move(y);
  } else if (std::abs(rho) < 1.0) {
    out.solver = "fixed_point";
    Vector y = c;
    const double target = 1e-10 * std::max(1.0, c.cwiseAbs().maxCoeff());
    for (int it = 0; it < 100000; ++it) {
      Vector next = c + rho * apply(y);
      const double step = (next - y).cwiseAbs().maxCoeff();
      y = std::move(next);
      if (step <= target) break;
    }
    out.y = std::move(y);
  } else {
    out.solver = "dense_lu";
    Matrix system = Matrix::Identity(n, n);
    for (int i = 0; i < n; ++i)
      for (const auto& [j, w] : m.rows[static_cast<std::size_t>(i)]) system(i, j) -= rho * w;
    Eigen::PartialPivLU<Matrix> lu(system);
    const double rcond = lu.rcond();
    require(rcond > 1e-12, ErrorCode::solvability,
            fmt::format("I - rho M is numerically singular (rcond {:.3g})", rcond));
    out.y = lu.solve(c);
  }
  out.residual = residual(out.y);
  require(out.residual <= 1e-8, ErrorCode::solvability,
          fmt::format("SAR solve residual {:.3g} exceeds 1e-8", out.residual));
  return out;
}

/// Responses of the linear spatial autoregressive model with the supplied
/// noise realization:
///   y_i = intercept + X_i beta + (M X)_i neighbor_beta + rho (M y)_i + noise_i.
inline SarResponse generate_sar_response(const Graph& graph, const Matrix& x,
                                         const SarModelSpec& spec, const Vector& noise) {
  const int n = graph.size();
  require(x.rows() == n && noise.size() == n, ErrorCode::parameter,
          "X rows and noise length must equal the node count");
  spec.validate(x.cols());
  const NeighborWeights m = neighbor_weights(graph, spec.weight_rule, {});
  IndexSet isolated;
  for (int i = 0; i < n; ++i)
    if (m.rows[static_cast<std::size_t>(i)].empty()) isolated.push_back(i);
  require(spec.allow_isolated || isolated.empty(), ErrorCode::degeneracy,
          fmt::format("{} isolated node(s) and the weight rule has no fallback", isolated.size()));

  Vector c = Vector::Constant(n, spec.intercept) + x * spec.beta + noise;
  if (spec.neighbor_beta.size() > 0) {
    for (int i = 0; i < n; ++i) {
      Vector avg = Vector::Zero(x.cols());
      for (const auto& [j, w] : m.rows[static_cast<std::size_t>(i)]) avg += w * x.row(j).transpose();
      c(i) += avg.dot(spec.neighbor_beta);
    }
  }
  SarResponse out = solve_sar_system(m, spec.rho, c);
  out.noise = noise;
  out.isolated = std::move(isolated);
  return out;
}

inline SarResponse generate_sar_response(const Graph& graph, const Matrix& x,
                                         const SarModelSpec& spec, RngStream& rng) {
  Vector noise(graph.size());
  for (int i = 0; i < graph.size(); ++i) noise(i) = rng.normal(0.0, spec.noise_sd);
  return generate_sar_response(graph, x, spec, noise);
}

}  // namespace netconform

#endif  // NETCONFORM_GRAPHGEN_HPP

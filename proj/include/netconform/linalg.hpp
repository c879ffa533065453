#ifndef NETCONFORM_LINALG_HPP
#define NETCONFORM_LINALG_HPP

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <limits>
#include <span>
#include <vector>

#include <Eigen/Dense>
#include <Eigen/Eigenvalues>
#include <fmt/core.h>

#include "netconform/error.hpp"

namespace netconform {

using Matrix = Eigen::MatrixXd;
using Vector = Eigen::VectorXd;
using IndexSet = std::vector<int>;

/// Sum whose result does not depend on the order of `terms`.
///
/// Terms are sorted before accumulation, so any relabeling of the inputs
/// yields a bit-identical total. Permutation-equivariant statistics are
/// built on this.
inline double order_free_sum(std::vector<double>& terms) {
  std::sort(terms.begin(), terms.end());
  double total = 0.0;
  for (double t : terms) total += t;
  return total;
}

/// Flip each column so its entry of largest magnitude is positive; ties go
/// to the lowest row index.
inline void apply_sign_convention(Matrix& vectors) {
  for (Eigen::Index c = 0; c < vectors.cols(); ++c) {
    Eigen::Index best = 0;
    double best_abs = -1.0;
    for (Eigen::Index r = 0; r < vectors.rows(); ++r) {
      const double a = std::abs(vectors(r, c));
      if (a > best_abs) {
        best_abs = a;
        best = r;
      }
    }
    if (vectors.rows() > 0 && vectors(best, c) < 0.0) vectors.col(c) *= -1.0;
  }
}

struct SymmetricEigenpairs {
  Vector values;   // ascending
  Matrix vectors;  // columns match `values`
};

namespace detail {

/// (T - shift I) x = b for symmetric tridiagonal T (diagonal d, off-diagonal
/// e), by LU with partial pivoting. Exactly singular pivots are nudged to
/// `tiny` so inverse iteration can proceed.
class ShiftedTridiagonalLu {
 public:
  ShiftedTridiagonalLu(const Vector& d, const Vector& e, double shift, double tiny)
      : n_(d.size()), dl_(e), dd_(d.array() - shift), du_(e), du2_(Vector::Zero(std::max<Eigen::Index>(n_ - 2, 0))),
        swap_(static_cast<std::size_t>(std::max<Eigen::Index>(n_ - 1, 0)), false) {
    for (Eigen::Index i = 0; i + 1 < n_; ++i) {
      if (std::abs(dd_(i)) >= std::abs(dl_(i))) {
        if (dd_(i) == 0.0) dd_(i) = tiny;
        const double fact = dl_(i) / dd_(i);
        dl_(i) = fact;
        dd_(i + 1) -= fact * du_(i);
      } else {
        const double fact = dd_(i) / dl_(i);
        dd_(i) = dl_(i);
        dl_(i) = fact;
        const double temp = du_(i);
        du_(i) = dd_(i + 1);
        dd_(i + 1) = temp - fact * dd_(i + 1);
        if (i + 2 < n_) {
          du2_(i) = du_(i + 1);
          du_(i + 1) = -fact * du_(i + 1);
        }
        swap_[static_cast<std::size_t>(i)] = true;
      }
    }
    if (n_ > 0 && dd_(n_ - 1) == 0.0) dd_(n_ - 1) = tiny;
  }

  void solve_in_place(Vector& b) const {
    for (Eigen::Index i = 0; i + 1 < n_; ++i) {
      if (swap_[static_cast<std::size_t>(i)]) {
        const double temp = b(i) - dl_(i) * b(i + 1);
        b(i) = b(i + 1);
        b(i + 1) = temp;
      } else {
        b(i + 1) -= dl_(i) * b(i);
      }
    }
    for (Eigen::Index i = n_ - 1; i >= 0; --i) {
      double v = b(i);
      if (i + 1 < n_) v -= du_(i) * b(i + 1);
      if (i + 2 < n_) v -= du2_(i) * b(i + 2);
      b(i) = v / dd_(i);
    }
  }

 private:
  Eigen::Index n_;
  Vector dl_, dd_, du_, du2_;
  std::vector<bool> swap_;
};

/// Eigenvectors of tridiagonal T for the given ascending eigenvalues, by
/// inverse iteration. Vectors whose eigenvalues lie within 1e-3 |T| of each
/// other are kept orthogonal by modified Gram-Schmidt.
inline Matrix tridiagonal_eigenvectors(const Vector& d, const Vector& e, const Vector& values) {
  const auto n = d.size();
  double scale = d.cwiseAbs().maxCoeff();
  if (n > 1) scale = std::max(scale, e.cwiseAbs().maxCoeff());
  scale = std::max(scale, std::numeric_limits<double>::min());
  const double eps = std::numeric_limits<double>::epsilon();
  const double cluster = 1e-3 * scale;
  Matrix out(n, values.size());
  for (Eigen::Index k = 0; k < values.size(); ++k) {
    Eigen::Index first_in_cluster = k;
    while (first_in_cluster > 0 && values(first_in_cluster) - values(first_in_cluster - 1) <= cluster)
      --first_in_cluster;
    // Nearby eigenvalues get slightly separated shifts, as in LAPACK's stein.
    double shift = values(k);
    if (k > first_in_cluster) shift = std::max(shift, values(k - 1) + 10.0 * eps * scale);
    const ShiftedTridiagonalLu lu(d, e, shift, eps * scale);
    Vector x(n);
    std::uint64_t state = 0x9e3779b97f4a7c15ULL + static_cast<std::uint64_t>(k);
    for (Eigen::Index i = 0; i < n; ++i) {
      state = state * 6364136223846793005ULL + 1442695040888963407ULL;
      x(i) = static_cast<double>(state >> 11) * 0x1.0p-53 - 0.5;
    }
    x.normalize();
    for (int it = 0; it < 6; ++it) {
      lu.solve_in_place(x);
      for (Eigen::Index j = first_in_cluster; j < k; ++j) x -= out.col(j).dot(x) * out.col(j);
      const double norm = x.norm();
      require(std::isfinite(norm) && norm > 0.0, ErrorCode::fit, "inverse iteration broke down");
      x /= norm;
    }
    out.col(k) = x;
  }
  return out;
}

}  // namespace detail

/// Eigenpairs with ascending indices [first, last] (0-based, inclusive) of a
/// dense symmetric matrix. The matrix is reduced to tridiagonal form by
/// Householder reflections; all eigenvalues come from the tridiagonal QR
/// iteration and only the requested vectors are computed (inverse iteration,
/// then back-transformation). Every returned pair is checked against the
/// original matrix.
inline SymmetricEigenpairs symmetric_eigen_range(const Matrix& a, int first, int last,
                                                 bool want_vectors = true) {
  const int n = static_cast<int>(a.rows());
  require(a.rows() == a.cols(), ErrorCode::parameter, "eigen solve needs a square matrix");
  require(0 <= first && first <= last && last < n, ErrorCode::parameter,
          "eigen index range out of bounds");
  const int count = last - first + 1;
  SymmetricEigenpairs out;
  if (n <= 32) {
    Eigen::SelfAdjointEigenSolver<Matrix> es(a, want_vectors ? Eigen::ComputeEigenvectors : Eigen::EigenvaluesOnly);
    require(es.info() == Eigen::Success, ErrorCode::fit, "symmetric eigen solver did not converge");
    out.values = es.eigenvalues().segment(first, count);
    if (want_vectors) out.vectors = es.eigenvectors().middleCols(first, count);
    return out;
  }
  Eigen::Tridiagonalization<Matrix> tri(a);
  const Vector diag = tri.diagonal();
  const Vector sub = tri.subDiagonal();
  Eigen::SelfAdjointEigenSolver<Matrix> values_only;
  values_only.computeFromTridiagonal(diag, sub, Eigen::EigenvaluesOnly);
  require(values_only.info() == Eigen::Success, ErrorCode::fit, "symmetric eigen solver did not converge");
  out.values = values_only.eigenvalues().segment(first, count);
  if (!want_vectors) return out;

  const Matrix y = detail::tridiagonal_eigenvectors(diag, sub, out.values);
  out.vectors = tri.matrixQ() * y;
  const double norm = std::max(a.cwiseAbs().rowwise().sum().maxCoeff(), 1.0);
  const double residual = (a * out.vectors - out.vectors * out.values.asDiagonal()).cwiseAbs().maxCoeff();
  require(residual <= 1e-10 * norm, ErrorCode::fit,
          fmt::format("eigenvector residual {:.3g} exceeds tolerance", residual));
  return out;
}

/// All eigenvalues (ascending) of a dense symmetric matrix.
inline Vector symmetric_eigenvalues(const Matrix& a) {
  const int n = static_cast<int>(a.rows());
  if (n == 0) return Vector();
  return symmetric_eigen_range(a, 0, n - 1, false).values;
}

inline Vector column_means(const Matrix& m) {
  if (m.rows() == 0) return Vector::Zero(m.cols());
  return m.colwise().mean().transpose();
}

}  // namespace netconform

#endif  // NETCONFORM_LINALG_HPP

#include <vector>

#include <gtest/gtest.h>

#include "netconform/linalg.hpp"
#include "netconform/rng.hpp"

using namespace netconform;

namespace {

Matrix random_symmetric(int n, std::uint64_t seed) {
  RngStream rng(seed, 0);
  Matrix a(n, n);
  for (int i = 0; i < n; ++i)
    for (int j = 0; j <= i; ++j) a(i, j) = a(j, i) = rng.normal();
  return a;
}

Matrix random_orthogonal(int n, std::uint64_t seed) {
  Eigen::HouseholderQR<Matrix> qr(random_symmetric(n, seed));
  return qr.householderQ() * Matrix::Identity(n, n);
}

void expect_valid_pairs(const Matrix& a, const SymmetricEigenpairs& pairs, double tol) {
  const auto k = pairs.values.size();
  const Matrix gram = pairs.vectors.transpose() * pairs.vectors;
  EXPECT_LE((gram - Matrix::Identity(k, k)).cwiseAbs().maxCoeff(), tol);
  const Matrix resid = a * pairs.vectors - pairs.vectors * pairs.values.asDiagonal();
  EXPECT_LE(resid.cwiseAbs().maxCoeff(), tol * std::max(1.0, a.norm()));
}

}  // namespace

TEST(OrderFreeSum, IndependentOfTermOrder) {
  std::vector<double> terms{1e16, 1.0, -1e16, 3.5, 1e-3, 2.0};
  std::vector<double> reversed(terms.rbegin(), terms.rend());
  const double a = order_free_sum(terms);
  const double b = order_free_sum(reversed);
  EXPECT_EQ(a, b);
}

TEST(SymmetricEigenRange, AgreesWithDenseSolverForLargeMatrix) {
  const Matrix a = random_symmetric(150, 11);
  Eigen::SelfAdjointEigenSolver<Matrix> dense(a);
  const auto top = symmetric_eigen_range(a, 145, 149);
  for (int r = 0; r < 5; ++r) {
    EXPECT_NEAR(top.values(r), dense.eigenvalues()(145 + r), 1e-9);
    const double overlap = std::abs(top.vectors.col(r).dot(dense.eigenvectors().col(145 + r)));
    EXPECT_NEAR(overlap, 1.0, 1e-8);
  }
  expect_valid_pairs(a, top, 1e-9);
  const auto bottom = symmetric_eigen_range(a, 0, 2);
  for (int r = 0; r < 3; ++r) EXPECT_NEAR(bottom.values(r), dense.eigenvalues()(r), 1e-9);
  expect_valid_pairs(a, bottom, 1e-9);
}

TEST(SymmetricEigenRange, SmallMatricesUseDirectSolver) {
  const Matrix a = random_symmetric(12, 4);
  const auto all = symmetric_eigen_range(a, 0, 11);
  expect_valid_pairs(a, all, 1e-10);
  for (int r = 1; r < 12; ++r) EXPECT_LE(all.values(r - 1), all.values(r));
}

TEST(SymmetricEigenRange, RepeatedEigenvaluesGiveOrthonormalVectors) {
  const int n = 80;
  Vector spectrum(n);
  for (int i = 0; i < n; ++i) spectrum(i) = i < n - 4 ? 0.01 * i : 5.0;  // top eigenvalue has multiplicity 4
  const Matrix q = random_orthogonal(n, 21);
  const Matrix a = q * spectrum.asDiagonal() * q.transpose();
  const Matrix sym = 0.5 * (a + a.transpose());
  const auto top = symmetric_eigen_range(sym, n - 4, n - 1);
  for (int r = 0; r < 4; ++r) EXPECT_NEAR(top.values(r), 5.0, 1e-10);
  expect_valid_pairs(sym, top, 1e-9);
}

TEST(SymmetricEigenRange, CompleteGraphSpectrum) {
  // K_n has eigenvalue n-1 once and -1 with multiplicity n-1.
  const int n = 60;
  Matrix a = Matrix::Ones(n, n);
  a.diagonal().setZero();
  const auto top = symmetric_eigen_range(a, n - 3, n - 1);
  EXPECT_NEAR(top.values(2), n - 1.0, 1e-10);
  EXPECT_NEAR(top.values(1), -1.0, 1e-10);
  expect_valid_pairs(a, top, 1e-9);
  EXPECT_NEAR(std::abs(top.vectors.col(2).sum()), std::sqrt(static_cast<double>(n)), 1e-9);
}

TEST(SymmetricEigenRange, RejectsBadRanges) {
  const Matrix a = Matrix::Identity(4, 4);
  EXPECT_THROW(symmetric_eigen_range(a, 2, 1), Error);
  EXPECT_THROW(symmetric_eigen_range(a, 0, 4), Error);
  EXPECT_THROW(symmetric_eigen_range(Matrix(3, 4), 0, 1), Error);
}

TEST(SignConvention, LargestEntryBecomesPositive) {
  Matrix v(3, 2);
  v << 0.1, 0.5, -0.9, -0.5, 0.2, 0.3;
  apply_sign_convention(v);
  EXPECT_GT(v(1, 0), 0.0);
  EXPECT_DOUBLE_EQ(v(0, 0), -0.1);
  // tie between rows 0 and 1 goes to row 0
  EXPECT_DOUBLE_EQ(v(0, 1), 0.5);
}

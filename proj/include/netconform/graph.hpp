#ifndef NETCONFORM_GRAPH_HPP
#define NETCONFORM_GRAPH_HPP

#include <algorithm>
#include <numeric>
#include <string>
#include <vector>

#include <fmt/core.h>

#include "netconform/error.hpp"
#include "netconform/linalg.hpp"
#include "netconform/rng.hpp"

namespace netconform {

struct Neighbor {
  int node;
  double weight;
};

/// Undirected graph on n nodes stored as a symmetric hollow adjacency matrix
/// with non-negative entries. Neighbor lists are built once at construction.
class Graph {
 public:
  Graph() = default;

  explicit Graph(Matrix adjacency) : adjacency_(std::move(adjacency)) {
    const auto n = adjacency_.rows();
    require(adjacency_.cols() == n, ErrorCode::parameter, "adjacency matrix must be square");
    neighbors_.resize(static_cast<std::size_t>(n));
    binary_ = true;
    for (Eigen::Index i = 0; i < n; ++i) {
      if (adjacency_(i, i) != 0.0)
        fail(ErrorCode::parameter, fmt::format("adjacency diagonal must be zero (node {})", i));
      for (Eigen::Index j = 0; j < n; ++j) {
        const double a = adjacency_(i, j);
        if (a != adjacency_(j, i))
          fail(ErrorCode::parameter, fmt::format("adjacency must be symmetric (entry {},{})", i, j));
        if (!(a >= 0.0 && std::isfinite(a)))
          fail(ErrorCode::parameter,
               fmt::format("adjacency entries must be finite and non-negative (entry {},{})", i, j));
        if (a != 0.0) {
          neighbors_[static_cast<std::size_t>(i)].push_back({static_cast<int>(j), a});
          if (a != 1.0) binary_ = false;
        }
      }
    }
  }

  static Graph empty(int n) { return Graph(Matrix::Zero(n, n)); }

  int size() const { return static_cast<int>(adjacency_.rows()); }
  const Matrix& adjacency() const { return adjacency_; }
  double operator()(int i, int j) const { return adjacency_(i, j); }
  bool is_binary() const { return binary_; }

  /// Neighbors of `i` in increasing node order.
  const std::vector<Neighbor>& neighbors(int i) const {
    return neighbors_[static_cast<std::size_t>(i)];
  }

  std::size_t edge_count() const {
    std::size_t twice = 0;
    for (const auto& list : neighbors_) twice += list.size();
    return twice / 2;
  }

  friend bool operator==(const Graph& a, const Graph& b) { return a.adjacency_ == b.adjacency_; }

 private:
  Matrix adjacency_;
  std::vector<std::vector<Neighbor>> neighbors_;
  bool binary_ = true;
};

/// Bijection on {0, ..., n-1}. Relabeling convention: the permuted object at
/// position i is the original object at position sigma[i], so
/// A'(i, j) = A(sigma[i], sigma[j]) and X'(i) = X(sigma[i]).
class Permutation {
 public:
  explicit Permutation(std::vector<int> sigma) : sigma_(std::move(sigma)) {
    std::vector<int> sorted = sigma_;
    std::sort(sorted.begin(), sorted.end());
    for (std::size_t i = 0; i < sorted.size(); ++i) {
      require(sorted[i] == static_cast<int>(i), ErrorCode::parameter,
              "permutation must be a bijection on 0..n-1");
    }
  }

  static Permutation identity(int n) {
    std::vector<int> s(static_cast<std::size_t>(n));
    std::iota(s.begin(), s.end(), 0);
    return Permutation(std::move(s));
  }

  static Permutation random(int n, RngStream& rng) {
    std::vector<int> s(static_cast<std::size_t>(n));
    std::iota(s.begin(), s.end(), 0);
    std::shuffle(s.begin(), s.end(), rng);
    return Permutation(std::move(s));
  }

  int size() const { return static_cast<int>(sigma_.size()); }
  int operator[](int i) const { return sigma_[static_cast<std::size_t>(i)]; }
  const std::vector<int>& indices() const { return sigma_; }

  Permutation inverse() const {
    std::vector<int> inv(sigma_.size());
    for (std::size_t i = 0; i < sigma_.size(); ++i) inv[static_cast<std::size_t>(sigma_[i])] = static_cast<int>(i);
    return Permutation(std::move(inv));
  }

  /// Rows permuted: out.row(i) = m.row(sigma[i]).
  Matrix rows(const Matrix& m) const {
    Matrix out(m.rows(), m.cols());
    for (int i = 0; i < size(); ++i) out.row(i) = m.row((*this)[i]);
    return out;
  }

  Vector rows(const Vector& v) const {
    Vector out(v.size());
    for (int i = 0; i < size(); ++i) out(i) = v((*this)[i]);
    return out;
  }

  /// Rows and columns permuted: out(i, j) = m(sigma[i], sigma[j]).
  Matrix symmetric(const Matrix& m) const {
    Matrix out(m.rows(), m.cols());
    for (int i = 0; i < size(); ++i)
      for (int j = 0; j < size(); ++j) out(i, j) = m((*this)[i], (*this)[j]);
    return out;
  }

  Graph apply(const Graph& g) const { return Graph(symmetric(g.adjacency())); }

  /// Index set relabeled into the permuted numbering: {i : sigma[i] in set}.
  IndexSet relabel(const IndexSet& set) const {
    const Permutation inv = inverse();
    IndexSet out;
    out.reserve(set.size());
    for (int k : set) out.push_back(inv[k]);
    std::sort(out.begin(), out.end());
    return out;
  }

 private:
  std::vector<int> sigma_;
};

}  // namespace netconform

#endif  // NETCONFORM_GRAPH_HPP

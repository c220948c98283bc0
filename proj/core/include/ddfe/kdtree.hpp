#pragma once

#include <cstddef>
#include <span>
#include <vector>

namespace ddfe {

/// Exact Euclidean nearest-neighbour index over points in R^k.
///
/// Ties are resolved towards the lowest point index, matching a linear scan
/// over the same coordinates bit for bit.
class KdTree {
 public:
  struct Hit {
    std::size_t index = 0;
    double dist_sq = 0.0;
  };

  KdTree() = default;
  /// `coords` holds `count` rows of `k` values each.
  KdTree(std::vector<double> coords, std::size_t k, std::size_t leaf_size = 8);

  std::size_t size() const noexcept { return k_ ? coords_.size() / k_ : 0; }
  std::size_t dim() const noexcept { return k_; }
  std::span<const double> point(std::size_t i) const { return {coords_.data() + i * k_, k_}; }

  Hit nearest(std::span<const double> query) const;
  /// Reference scan over the same coordinates.
  Hit nearest_linear(std::span<const double> query) const;

 private:
  struct Node {
    std::size_t begin = 0;  // range into order_
    std::size_t end = 0;
    std::size_t axis = 0;
    double split = 0.0;
    int left = -1;
    int right = -1;
  };

  int build(std::size_t begin, std::size_t end);
  void search(int node, std::span<const double> q, Hit& best) const;
  double dist_sq(std::size_t i, std::span<const double> q) const;

  std::vector<double> coords_;
  std::size_t k_ = 0;
  std::size_t leaf_size_ = 8;
  std::vector<std::size_t> order_;
  std::vector<Node> nodes_;
};

}  // namespace ddfe

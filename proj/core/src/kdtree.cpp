#include "ddfe/kdtree.hpp"

#include <algorithm>
#include <limits>
#include <numeric>
#include <stdexcept>

namespace ddfe {

KdTree::KdTree(std::vector<double> coords, std::size_t k, std::size_t leaf_size)
    : coords_(std::move(coords)), k_(k), leaf_size_(std::max<std::size_t>(leaf_size, 1)) {
  if (k_ == 0 || coords_.size() % k_ != 0) throw std::invalid_argument("kd-tree coordinates do not match dimension");
  order_.resize(size());
  std::iota(order_.begin(), order_.end(), std::size_t{0});
  if (!order_.empty()) build(0, order_.size());
}

int KdTree::build(std::size_t begin, std::size_t end) {
  const int id = static_cast<int>(nodes_.size());
  nodes_.push_back({begin, end, 0, 0.0, -1, -1});
  if (end - begin <= leaf_size_) return id;

  // Split on the axis of largest spread at the median.
  std::size_t axis = 0;
  double spread = -1.0;
  for (std::size_t a = 0; a < k_; ++a) {
    double lo = std::numeric_limits<double>::infinity(), hi = -lo;
    for (std::size_t i = begin; i < end; ++i) {
      const double v = coords_[order_[i] * k_ + a];
      lo = std::min(lo, v);
      hi = std::max(hi, v);
    }
    if (hi - lo > spread) {
      spread = hi - lo;
      axis = a;
    }
  }
  if (spread <= 0.0) return id;  // all points coincide

  const std::size_t mid = begin + (end - begin) / 2;
  std::nth_element(order_.begin() + begin, order_.begin() + mid, order_.begin() + end,
                   [&](std::size_t x, std::size_t y) { return coords_[x * k_ + axis] < coords_[y * k_ + axis]; });
  nodes_[id].axis = axis;
  nodes_[id].split = coords_[order_[mid] * k_ + axis];
  const int left = build(begin, mid);
  const int right = build(mid, end);
  nodes_[id].left = left;
  nodes_[id].right = right;
  return id;
}

double KdTree::dist_sq(std::size_t i, std::span<const double> q) const {
  double s = 0.0;
  const double* p = coords_.data() + i * k_;
  for (std::size_t a = 0; a < k_; ++a) {
    const double d = p[a] - q[a];
    s += d * d;
  }
  return s;
}

void KdTree::search(int node, std::span<const double> q, Hit& best) const {
  const Node& nd = nodes_[node];
  if (nd.left < 0) {
    for (std::size_t i = nd.begin; i < nd.end; ++i) {
      const std::size_t idx = order_[i];
      const double d = dist_sq(idx, q);
      if (d < best.dist_sq || (d == best.dist_sq && idx < best.index)) best = {idx, d};
    }
    return;
  }
  // Left holds coordinates <= split, right holds >= split.
  const double diff = q[nd.axis] - nd.split;
  const int near = diff <= 0.0 ? nd.left : nd.right;
  const int far = diff <= 0.0 ? nd.right : nd.left;
  search(near, q, best);
  // Non-strict test keeps equal-distance candidates reachable for the index tie-break.
  if (diff * diff <= best.dist_sq) search(far, q, best);
}

KdTree::Hit KdTree::nearest(std::span<const double> query) const {
  if (order_.empty()) throw std::invalid_argument("nearest-neighbour query on an empty index");
  if (query.size() != k_) throw std::invalid_argument("query dimension mismatch");
  Hit best{std::numeric_limits<std::size_t>::max(), std::numeric_limits<double>::infinity()};
  search(0, query, best);
  return best;
}

KdTree::Hit KdTree::nearest_linear(std::span<const double> query) const {
  if (order_.empty()) throw std::invalid_argument("nearest-neighbour query on an empty index");
  if (query.size() != k_) throw std::invalid_argument("query dimension mismatch");
  Hit best{0, dist_sq(0, query)};
  for (std::size_t i = 1; i < size(); ++i) {
    const double d = dist_sq(i, query);
    if (d < best.dist_sq) best = {i, d};
  }
  return best;
}

}  // namespace ddfe

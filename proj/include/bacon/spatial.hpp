#pragma once

#include <algorithm>
#include <limits>
#include <numeric>
#include <vector>

#include "bacon/mesh.hpp"

namespace bacon::mesh {

struct Aabb {
  Vec3 lo = Vec3::Constant(std::numeric_limits<double>::infinity());
  Vec3 hi = Vec3::Constant(-std::numeric_limits<double>::infinity());

  void grow(const Vec3& p) {
    lo = lo.cwiseMin(p);
    hi = hi.cwiseMax(p);
  }
  void grow(const Aabb& b) {
    lo = lo.cwiseMin(b.lo);
    hi = hi.cwiseMax(b.hi);
  }
  double distance_sq(const Vec3& p) const {
    const Vec3 d = (lo - p).cwiseMax(p - hi).cwiseMax(0.0);
    return d.squaredNorm();
  }
  // Slab test for o + t d, t >= 0. inv_d may hold infinities.
  bool hit_by_ray(const Vec3& o, const Vec3& inv_d) const {
    double t0 = 0.0, t1 = std::numeric_limits<double>::infinity();
    for (int a = 0; a < 3; ++a) {
      double n = (lo[a] - o[a]) * inv_d[a], f = (hi[a] - o[a]) * inv_d[a];
      if (std::isnan(n) || std::isnan(f)) {
        // Ray parallel to and exactly on a slab plane: treat as inside.
        if (o[a] < lo[a] || o[a] > hi[a]) return false;
        continue;
      }
      if (n > f) std::swap(n, f);
      t0 = std::max(t0, n);
      t1 = std::min(t1, f);
      if (t0 > t1) return false;
    }
    return true;
  }
};

// Bounding-volume hierarchy over the faces of a mesh. Built by median split on
// the widest centroid axis; immutable afterwards, so queries are thread-safe.
class TriangleBvh {
 public:
  struct Nearest {
    double distance_sq = std::numeric_limits<double>::infinity();
    std::size_t face = 0;
    Vec3 point = Vec3::Zero();
  };

  TriangleBvh() = default;
  explicit TriangleBvh(const TriangleMesh& m, std::size_t leaf_size = 4) : mesh_(&m), leaf_(std::max<std::size_t>(1, leaf_size)) {
    order_.resize(m.faces.size());
    std::iota(order_.begin(), order_.end(), std::size_t{0});
    centroids_.reserve(m.faces.size());
    for (std::size_t f = 0; f < m.faces.size(); ++f) {
      auto [a, b, c] = m.triangle(f);
      centroids_.push_back((a + b + c) / 3.0);
    }
    if (!order_.empty()) build(0, order_.size());
  }

  Nearest nearest(const Vec3& p) const {
    Nearest best;
    if (nodes_.empty()) return best;
    std::vector<std::size_t> stack{0};
    while (!stack.empty()) {
      const auto& n = nodes_[stack.back()];
      stack.pop_back();
      if (n.box.distance_sq(p) >= best.distance_sq) continue;
      if (n.count) {
        for (std::size_t i = n.start; i < n.start + n.count; ++i) {
          auto [a, b, c] = mesh_->triangle(order_[i]);
          const Vec3 q = closest_point_on_triangle(p, a, b, c);
          const double d = (p - q).squaredNorm();
          if (d < best.distance_sq || (d == best.distance_sq && order_[i] < best.face)) best = {d, order_[i], q};
        }
        continue;
      }
      // Visit the nearer child first.
      const auto l = n.left, r = n.right;
      const double dl = nodes_[l].box.distance_sq(p), dr = nodes_[r].box.distance_sq(p);
      if (dl < dr) {
        stack.push_back(r);
        stack.push_back(l);
      } else {
        stack.push_back(l);
        stack.push_back(r);
      }
    }
    return best;
  }

  // Number of faces crossed by the ray o + t d, t > 0.
  std::size_t count_crossings(const Vec3& o, const Vec3& d) const {
    if (nodes_.empty()) return 0;
    const Vec3 inv = d.cwiseInverse();
    std::size_t hits = 0;
    std::vector<std::size_t> stack{0};
    while (!stack.empty()) {
      const auto& n = nodes_[stack.back()];
      stack.pop_back();
      if (!n.box.hit_by_ray(o, inv)) continue;
      if (n.count) {
        for (std::size_t i = n.start; i < n.start + n.count; ++i) {
          auto [a, b, c] = mesh_->triangle(order_[i]);
          hits += ray_hits_triangle(o, d, a, b, c);
        }
      } else {
        stack.push_back(n.left);
        stack.push_back(n.right);
      }
    }
    return hits;
  }

  std::size_t node_count() const { return nodes_.size(); }

 private:
  struct Node {
    Aabb box;
    std::size_t left = 0, right = 0;
    std::size_t start = 0, count = 0;  // count > 0 marks a leaf
  };

  std::size_t build(std::size_t start, std::size_t end) {
    const std::size_t id = nodes_.size();
    nodes_.emplace_back();
    Aabb box, cbox;
    for (std::size_t i = start; i < end; ++i) {
      auto [a, b, c] = mesh_->triangle(order_[i]);
      box.grow(a);
      box.grow(b);
      box.grow(c);
      cbox.grow(centroids_[order_[i]]);
    }
    nodes_[id].box = box;
    if (end - start <= leaf_) {
      nodes_[id].start = start;
      nodes_[id].count = end - start;
      return id;
    }
    int axis = 0;
    (cbox.hi - cbox.lo).maxCoeff(&axis);
    const std::size_t mid = start + (end - start) / 2;
    std::nth_element(order_.begin() + static_cast<std::ptrdiff_t>(start), order_.begin() + static_cast<std::ptrdiff_t>(mid),
                     order_.begin() + static_cast<std::ptrdiff_t>(end), [&](std::size_t x, std::size_t y) {
                       const double cx = centroids_[x][axis], cy = centroids_[y][axis];
                       return cx < cy || (cx == cy && x < y);
                     });
    const auto l = build(start, mid);
    const auto r = build(mid, end);
    nodes_[id].left = l;
    nodes_[id].right = r;
    return id;
  }

  const TriangleMesh* mesh_ = nullptr;
  std::size_t leaf_ = 4;
  std::vector<std::size_t> order_;
  std::vector<Vec3> centroids_;
  std::vector<Node> nodes_;
};

// Static 3D kd-tree for nearest-point queries.
class KdTree {
 public:
  KdTree() = default;
  explicit KdTree(std::vector<Vec3> points) : pts_(std::move(points)) {
    idx_.resize(pts_.size());
    std::iota(idx_.begin(), idx_.end(), std::size_t{0});
    build(0, idx_.size(), 0);
  }

  std::size_t size() const { return pts_.size(); }

  // Squared distance to the nearest stored point (infinity when empty).
  double nearest_sq(const Vec3& q) const {
    double best = std::numeric_limits<double>::infinity();
    if (!pts_.empty()) search(q, 0, idx_.size(), 0, best);
    return best;
  }

 private:
  void build(std::size_t lo, std::size_t hi, int axis) {
    if (hi - lo <= 1) return;
    const std::size_t mid = lo + (hi - lo) / 2;
    std::nth_element(idx_.begin() + static_cast<std::ptrdiff_t>(lo), idx_.begin() + static_cast<std::ptrdiff_t>(mid),
                     idx_.begin() + static_cast<std::ptrdiff_t>(hi), [&](std::size_t a, std::size_t b) { return pts_[a][axis] < pts_[b][axis]; });
    build(lo, mid, (axis + 1) % 3);
    build(mid + 1, hi, (axis + 1) % 3);
  }

  void search(const Vec3& q, std::size_t lo, std::size_t hi, int axis, double& best) const {
    if (lo >= hi) return;
    const std::size_t mid = lo + (hi - lo) / 2;
    const Vec3& p = pts_[idx_[mid]];
    best = std::min(best, (p - q).squaredNorm());
    const double diff = q[axis] - p[axis];
    const int next = (axis + 1) % 3;
    if (diff < 0) {
      search(q, lo, mid, next, best);
      if (diff * diff < best) search(q, mid + 1, hi, next, best);
    } else {
      search(q, mid + 1, hi, next, best);
      if (diff * diff < best) search(q, lo, mid, next, best);
    }
  }

  std::vector<Vec3> pts_;
  std::vector<std::size_t> idx_;
};

}  // namespace bacon::mesh

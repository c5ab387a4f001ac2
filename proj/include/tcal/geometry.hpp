#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <numeric>
#include <span>
#include <string>
#include <vector>

#include "tcal/error.hpp"

namespace tcal {

// Axis-aligned box in image coordinates (origin top-left). Zero-area or
// non-finite boxes cannot be constructed.
class Box {
 public:
  Box(double x_min, double y_min, double x_max, double y_max)
      : x_min_(x_min), y_min_(y_min), x_max_(x_max), y_max_(y_max) {
    if (!std::isfinite(x_min) || !std::isfinite(y_min) || !std::isfinite(x_max) ||
        !std::isfinite(y_max)) {
      throw ValidationError("box has non-finite coordinate");
    }
    if (!(x_min < x_max) || !(y_min < y_max)) {
      throw ValidationError("degenerate box [" + std::to_string(x_min) + "," +
                            std::to_string(y_min) + "," + std::to_string(x_max) + "," +
                            std::to_string(y_max) + "]");
    }
  }

  double x_min() const { return x_min_; }
  double y_min() const { return y_min_; }
  double x_max() const { return x_max_; }
  double y_max() const { return y_max_; }
  double width() const { return x_max_ - x_min_; }
  double height() const { return y_max_ - y_min_; }
  double area() const { return width() * height(); }
  double center_x() const { return 0.5 * (x_min_ + x_max_); }
  double center_y() const { return 0.5 * (y_min_ + y_max_); }

  Box translated(double dx, double dy) const {
    return Box(x_min_ + dx, y_min_ + dy, x_max_ + dx, y_max_ + dy);
  }

  // True when the box has no overlap with [0,width) x [0,height).
  bool outside_image(double width, double height) const {
    return x_max_ <= 0.0 || y_max_ <= 0.0 || x_min_ >= width || y_min_ >= height;
  }

  friend bool operator==(const Box&, const Box&) = default;

 private:
  double x_min_;
  double y_min_;
  double x_max_;
  double y_max_;
};

inline double intersection_area(const Box& a, const Box& b) {
  const double w = std::min(a.x_max(), b.x_max()) - std::max(a.x_min(), b.x_min());
  const double h = std::min(a.y_max(), b.y_max()) - std::max(a.y_min(), b.y_min());
  if (w <= 0.0 || h <= 0.0) return 0.0;
  return w * h;
}

inline double iou(const Box& a, const Box& b) {
  if (&a == &b || a == b) return 1.0;
  const double inter = intersection_area(a, b);
  if (inter == 0.0) return 0.0;
  return inter / (a.area() + b.area() - inter);
}

struct ScoredBox {
  Box box;
  double score;
};

// Greedy non-maximum suppression. Returns indices into `dets` of the kept
// boxes in descending score order; equal scores keep input order.
inline std::vector<std::size_t> nms_indices(std::span<const ScoredBox> dets, double iou_thresh) {
  std::vector<std::size_t> order(dets.size());
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::stable_sort(order.begin(), order.end(),
                   [&](std::size_t a, std::size_t b) { return dets[a].score > dets[b].score; });
  std::vector<std::size_t> kept;
  for (std::size_t idx : order) {
    bool suppressed = false;
    for (std::size_t k : kept) {
      if (iou(dets[idx].box, dets[k].box) > iou_thresh) {
        suppressed = true;
        break;
      }
    }
    if (!suppressed) kept.push_back(idx);
  }
  return kept;
}

inline std::vector<ScoredBox> nms(std::span<const ScoredBox> dets, double iou_thresh = 0.5) {
  std::vector<ScoredBox> out;
  for (std::size_t i : nms_indices(dets, iou_thresh)) out.push_back(dets[i]);
  return out;
}

// Single-link clustering: connected components of the graph with an edge
// wherever IoU > iou_thresh. Clusters are ordered by their smallest member
// and members are sorted ascending.
inline std::vector<std::vector<std::size_t>> greedy_cluster(std::span<const Box> boxes,
                                                            double iou_thresh) {
  const std::size_t n = boxes.size();
  std::vector<std::size_t> parent(n);
  std::iota(parent.begin(), parent.end(), std::size_t{0});
  auto find = [&](std::size_t x) {
    while (parent[x] != x) {
      parent[x] = parent[parent[x]];
      x = parent[x];
    }
    return x;
  };
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t j = i + 1; j < n; ++j) {
      if (iou(boxes[i], boxes[j]) > iou_thresh) {
        const std::size_t ri = find(i);
        const std::size_t rj = find(j);
        if (ri != rj) parent[std::max(ri, rj)] = std::min(ri, rj);
      }
    }
  }
  std::vector<std::vector<std::size_t>> clusters;
  std::vector<std::size_t> slot(n, n);
  for (std::size_t i = 0; i < n; ++i) {
    const std::size_t r = find(i);
    if (slot[r] == n) {
      slot[r] = clusters.size();
      clusters.emplace_back();
    }
    clusters[slot[r]].push_back(i);
  }
  return clusters;
}

// Coordinate-wise mean of the selected boxes.
inline Box mean_box(std::span<const Box> boxes, std::span<const std::size_t> members) {
  if (members.empty()) throw ValidationError("mean_box of empty cluster");
  double x0 = 0, y0 = 0, x1 = 0, y1 = 0;
  for (std::size_t m : members) {
    x0 += boxes[m].x_min();
    y0 += boxes[m].y_min();
    x1 += boxes[m].x_max();
    y1 += boxes[m].y_max();
  }
  const double n = static_cast<double>(members.size());
  return Box(x0 / n, y0 / n, x1 / n, y1 / n);
}

}  // namespace tcal

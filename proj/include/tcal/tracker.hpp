#pragma once

#include <cstdlib>
#include <span>
#include <string>
#include <vector>

#include "tcal/dataset.hpp"
#include "tcal/geometry.hpp"

namespace tcal {

struct TrackerConfig {
  int window = 3;

  void validate() const {
    if (window < 1) throw ValidationError("tracker window must be >= 1");
  }
};

// A detection box from `source_frame` carried to `target_frame`.
struct TrackedBox {
  int source_frame = 0;
  int source_index = 0;
  int target_frame = 0;
  int class_id = 0;
  Box box;
};

// Anything that can move a box between two frames of one video.
class BoxTracker {
 public:
  virtual ~BoxTracker() = default;
  virtual Box propagate(const Box& box, int from, int to) const = 0;
};

// Pure translation by the grid motion vector under the current box center,
// applied one frame pair at a time.
class MotionFieldTracker final : public BoxTracker {
 public:
  explicit MotionFieldTracker(std::span<const MotionField> fields) : fields_(fields) {}

  Box step_forward(const Box& box, int from) const {
    const Vec2 v = field(from).forward_at(box.center_x(), box.center_y());
    return box.translated(v.dx, v.dy);
  }

  Box step_backward(const Box& box, int from) const {
    const Vec2 v = field(from - 1).backward_at(box.center_x(), box.center_y());
    return box.translated(v.dx, v.dy);
  }

  Box propagate(const Box& box, int from, int to) const override {
    Box cur = box;
    for (int t = from; t < to; ++t) cur = step_forward(cur, t);
    for (int t = from; t > to; --t) cur = step_backward(cur, t);
    return cur;
  }

 private:
  const MotionField& field(int pair) const {
    if (pair < 0 || static_cast<std::size_t>(pair) >= fields_.size()) {
      throw ValidationError("missing motion field for frame pair " + std::to_string(pair) + "->" +
                            std::to_string(pair + 1));
    }
    return fields_[pair];
  }

  std::span<const MotionField> fields_;
};

// Tracked boxes grouped by target frame: out[j] holds every detection from a
// frame i with 1 <= |i-j| <= window carried into frame j. Boxes that end up
// entirely outside the image are dropped when `drop_outside` is set.
inline std::vector<std::vector<TrackedBox>> propagate_all(std::span<const FrameDetections> dets,
                                                          const BoxTracker& tracker, const TrackerConfig& config,
                                                          double width, double height, bool drop_outside = true) {
  config.validate();
  const int num_frames = static_cast<int>(dets.size());
  std::vector<std::vector<TrackedBox>> out(num_frames);
  const auto* motion = dynamic_cast<const MotionFieldTracker*>(&tracker);
  for (int i = 0; i < num_frames; ++i) {
    for (int k = 0; k < static_cast<int>(dets[i].size()); ++k) {
      const Detection& d = dets[i][k];
      for (int dir : {-1, 1}) {
        Box cur = d.box();
        for (int step = 1; step <= config.window; ++step) {
          const int j = i + dir * step;
          if (j < 0 || j >= num_frames) break;
          // Motion-field tracking composes per step; other trackers are asked directly.
          if (motion != nullptr) {
            cur = dir > 0 ? motion->step_forward(cur, j - 1) : motion->step_backward(cur, j + 1);
          } else {
            cur = tracker.propagate(d.box(), i, j);
          }
          if (drop_outside && cur.outside_image(width, height)) continue;
          out[j].push_back(TrackedBox{i, k, j, d.class_id(), cur});
        }
      }
    }
  }
  return out;
}

}  // namespace tcal

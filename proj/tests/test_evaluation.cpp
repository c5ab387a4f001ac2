#include <gtest/gtest.h>

#include "fixtures.hpp"

using namespace tcal;
using namespace tcal::testing;

namespace {

struct Case {
  std::vector<FrameDetections> dets;
  std::vector<FrameGroundTruth> gt;
  EvalReport run(int nc = 1, EvalConfig cfg = {}) const {
    std::vector<EvalVideo> v{{dets, gt}};
    return evaluate(v, nc, cfg);
  }
};

}  // namespace

TEST(Evaluation, GroundTruthAsDetectionsIsPerfect) {
  WorldConfig wc;
  wc.num_videos = 3;
  wc.min_frames = wc.max_frames = 80;
  const World w = generate_world(wc);
  std::vector<std::vector<FrameDetections>> dets;
  std::vector<EvalVideo> ev;
  for (const auto& v : w.dataset.videos) {
    std::vector<FrameDetections> d;
    for (const auto& frame : *v.gt) {
      FrameDetections fd;
      for (const auto& o : frame) fd.push_back(make_det(o.box, o.class_id, 0.9, 4));
      d.push_back(fd);
    }
    dets.push_back(d);
  }
  for (std::size_t i = 0; i < dets.size(); ++i) ev.push_back({dets[i], *w.dataset.videos[i].gt});
  const auto r = evaluate(ev, 4);
  EXPECT_DOUBLE_EQ(r.mAP, 1.0);
  EXPECT_EQ(r.fp, 0);
  EXPECT_EQ(r.fn, 0);
}

TEST(Evaluation, NoDetectionsIsZero) {
  Case c;
  c.dets.resize(1);
  c.gt = {{{1, 0, Box(0, 0, 10, 10)}}};
  const auto r = c.run();
  EXPECT_EQ(r.mAP, 0.0);
  EXPECT_EQ(r.fn, 1);
}

TEST(Evaluation, HandComputedHalf) {
  // Two GT objects; the top detection hits one, the second is spurious.
  // precision (1, 1/2), recall (1/2, 1/2) -> AP = 1/2; 11-point: 6/11.
  Case c;
  c.gt = {{{1, 0, Box(0, 0, 10, 10)}, {2, 0, Box(100, 100, 110, 110)}}};
  c.dets = {{make_det(Box(0, 0, 10, 10), 0, 0.9), make_det(Box(50, 50, 60, 60), 0, 0.8)}};
  EXPECT_DOUBLE_EQ(c.run().mAP, 0.5);
  EXPECT_NEAR(c.run(1, EvalConfig{0.5, 0.5, ApInterpolation::kElevenPoint}).mAP, 6.0 / 11.0, 1e-12);
}

TEST(Evaluation, EnvelopeAcrossFalsePositive) {
  // hits: 1 0 1, two GT -> envelope precision (1, 2/3, 2/3) -> 0.5 + 0.5 * 2/3
  const std::vector<bool> hits{true, false, true};
  EXPECT_NEAR(average_precision(hits, 2, ApInterpolation::kAllPoints), 0.5 + 1.0 / 3.0, 1e-12);
}

TEST(Evaluation, ThresholdAtExactlyHalfIsMiss) {
  Case c;
  c.gt = {{{1, 0, Box(0, 0, 10, 10)}}};
  // IoU exactly 1/2: 10x10 vs 10x5 inside.
  c.dets = {{make_det(Box(0, 0, 10, 5), 0, 0.9)}};
  EXPECT_EQ(c.run().tp, 0);
}

TEST(Evaluation, ClassesWithoutGtExcluded) {
  Case c;
  c.gt = {{{1, 0, Box(0, 0, 10, 10)}}};
  c.dets = {{make_det(Box(0, 0, 10, 10), 0, 0.9, 2), make_det(Box(50, 50, 60, 60), 1, 0.9, 2)}};
  const auto r = c.run(2);
  EXPECT_FALSE(r.class_ap[1]);
  EXPECT_DOUBLE_EQ(r.mAP, 1.0);
}

TEST(Evaluation, InvariantToCommonRescaling) {
  Rng rng(4);
  Case c;
  c.gt.resize(5);
  c.dets.resize(5);
  for (int f = 0; f < 5; ++f) {
    for (int i = 0; i < 4; ++i) {
      const double x = rng.uniform(0, 200), y = rng.uniform(0, 150);
      c.gt[f].push_back({i, 0, Box(x, y, x + 30, y + 30)});
      if (rng.uniform() < 0.7) {
        c.dets[f].push_back(make_det(Box(x + rng.uniform(-5, 5), y, x + 30, y + 30), 0, rng.uniform(0.5, 1.0)));
      }
    }
  }
  Case scaled = c;
  for (int f = 0; f < 5; ++f) {
    for (auto& o : scaled.gt[f]) o.box = Box(o.box.x_min() * 2, o.box.y_min() * 2, o.box.x_max() * 2, o.box.y_max() * 2);
    for (auto& d : scaled.dets[f]) {
      const Box& b = d.box();
      d = Detection(Box(b.x_min() * 2, b.y_min() * 2, b.x_max() * 2, b.y_max() * 2), d.scores());
    }
  }
  EXPECT_NEAR(c.run().mAP, scaled.run().mAP, 1e-12);
}

TEST(Evaluation, LowestScoredFalsePositiveNeverHelps) {
  Rng rng(6);
  for (int trial = 0; trial < 200; ++trial) {
    std::vector<bool> hits;
    int tp = 0;
    for (int i = 0; i < 10; ++i) {
      hits.push_back(rng.uniform() < 0.6);
      tp += hits.back();
    }
    const int num_gt = tp + static_cast<int>(rng.below(4));
    if (num_gt == 0) continue;
    const double before = average_precision(hits, num_gt, ApInterpolation::kAllPoints);
    hits.push_back(false);
    EXPECT_LE(average_precision(hits, num_gt, ApInterpolation::kAllPoints), before + 1e-15);
  }
}

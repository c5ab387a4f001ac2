#include <gtest/gtest.h>

#include "fixtures.hpp"

using namespace tcal;
using namespace tcal::testing;

namespace {

WorldConfig small_world(int videos = 6, int frames = 80) {
  WorldConfig wc;
  wc.num_videos = videos;
  wc.min_frames = wc.max_frames = frames;
  return wc;
}

// Detector that is perfect at skill 1.
DetectorParams clean_at_full_skill() {
  DetectorParams p;
  p.p_miss_min = 0.0;
  p.fp_rate_min = 0.0;
  p.sigma_min = 0.0;
  return p;
}

double test_map(const World& w, double skill, const DetectorParams& p, std::uint64_t seed) {
  const auto test = w.videos(true);
  std::vector<double> s(w.config.strata.size(), skill);
  const auto dets = detect_videos(w, test, s, p, seed);
  std::vector<EvalVideo> ev;
  for (std::size_t i = 0; i < test.size(); ++i) ev.push_back({dets[i], *w.dataset.videos[test[i]].gt});
  return evaluate(ev, w.dataset.manifest.num_classes()).mAP;
}

}  // namespace

TEST(World, NoSpawnMeansEmptyFramesAndZeroMotion) {
  WorldConfig wc = small_world(3, 30);
  for (auto& s : wc.strata) std::fill(s.spawn_prob.begin(), s.spawn_prob.end(), 0.0);
  const World w = generate_world(wc);
  for (const auto& v : w.dataset.videos) {
    for (const auto& f : *v.gt) EXPECT_TRUE(f.empty());
    ASSERT_EQ(v.motion->size(), 29u);
    for (const auto& m : *v.motion) {
      for (const auto& vec : m.fwd) EXPECT_EQ(vec, (Vec2{0, 0}));
    }
  }
}

TEST(World, DeterministicAndSplit) {
  const World a = generate_world(small_world(10, 50));
  const World b = generate_world(small_world(10, 50));
  EXPECT_TRUE(a.dataset == b.dataset);
  EXPECT_EQ(a.stratum, b.stratum);
  EXPECT_EQ(a.videos(true).size(), 2u);
  EXPECT_EQ(a.videos(false).size(), 8u);
  WorldConfig other = small_world(10, 50);
  other.seed = 2;
  EXPECT_FALSE(generate_world(other).dataset == a.dataset);
}

// Each object's displacement between frames agrees with the motion vector
// in the cell under its center, apart from cells shared with another object.
TEST(World, MotionMatchesObjectDisplacement) {
  const World w = generate_world(small_world(4, 200));
  int checked = 0;
  int agree = 0;
  for (const auto& v : w.dataset.videos) {
    const auto& gt = *v.gt;
    for (int t = 0; t + 1 < v.meta.num_frames; ++t) {
      for (const auto& o : gt[t]) {
        for (const auto& n : gt[t + 1]) {
          if (n.track_id != o.track_id) continue;
          const Vec2 d{n.box.x_min() - o.box.x_min(), n.box.y_min() - o.box.y_min()};
          const Vec2 f = (*v.motion)[t].forward_at(o.box.center_x(), o.box.center_y());
          const Vec2 b = (*v.motion)[t].backward_at(n.box.center_x(), n.box.center_y());
          ++checked;
          auto near = [](Vec2 a, Vec2 b) { return std::abs(a.dx - b.dx) < 1e-5 && std::abs(a.dy - b.dy) < 1e-5; };
          agree += near(f, d) && near(b, Vec2{-d.dx, -d.dy});
        }
      }
    }
  }
  ASSERT_GT(checked, 500);
  EXPECT_GT(static_cast<double>(agree) / checked, 0.95);
}

TEST(World, ObjectsRespectSizeAndImage) {
  const World w = generate_world(small_world(4, 150));
  for (const auto& v : w.dataset.videos) {
    for (const auto& f : *v.gt) {
      for (const auto& o : f) {
        EXPECT_FALSE(o.box.outside_image(v.meta.width, v.meta.height));
        EXPECT_LT(o.class_id, 4);
      }
    }
  }
}

TEST(Detector, PerfectAtFullSkill) {
  const World w = generate_world(small_world(5, 100));
  EXPECT_DOUBLE_EQ(test_map(w, 1.0, clean_at_full_skill(), 3), 1.0);
}

TEST(Detector, CertainMissYieldsNoTruePositives) {
  const World w = generate_world(small_world(5, 100));
  DetectorParams p;
  p.p_miss_max = 1.0;
  p.fp_rate_max = 0.0;
  // every object starts a miss run at its first frame that lasts its lifetime
  p.flicker = 0.0;
  p.min_run = p.max_run = 1000;
  for (std::size_t v = 0; v < w.dataset.videos.size(); ++v) {
    const auto dets = detect_video(w, v, 0.0, p, 1);
    std::vector<EvalVideo> ev{{dets, *w.dataset.videos[v].gt}};
    EXPECT_EQ(evaluate(ev, 4).tp, 0);
  }
}

TEST(Detector, SeedDeterminism) {
  const World w = generate_world(small_world(2, 60));
  EXPECT_EQ(detect_video(w, 0, 0.3, DetectorParams{}, 9), detect_video(w, 0, 0.3, DetectorParams{}, 9));
  EXPECT_NE(detect_video(w, 0, 0.3, DetectorParams{}, 9), detect_video(w, 0, 0.3, DetectorParams{}, 10));
}

TEST(Detector, InjectedErrorsAreLogged) {
  const World w = generate_world(small_world(2, 120));
  DetectionLog log;
  const auto dets = detect_video(w, 0, 0.0, DetectorParams{}, 4, &log);
  EXPECT_FALSE(log.misses.empty());
  EXPECT_FALSE(log.false_positives.empty());
  for (const auto& fp : log.false_positives) {
    ASSERT_LT(fp.detection_index, static_cast<int>(dets[fp.frame].size()));
  }
}

TEST(Detector, HigherSkillHigherMap) {
  const World w = generate_world(small_world(10, 150));
  int wins = 0;
  double low_sum = 0.0;
  double high_sum = 0.0;
  for (std::uint64_t seed = 1; seed <= 20; ++seed) {
    const double low = test_map(w, 0.2, DetectorParams{}, seed);
    const double high = test_map(w, 0.6, DetectorParams{}, seed);
    low_sum += low;
    high_sum += high;
    wins += high > low;
  }
  EXPECT_GT(high_sum, low_sum);
  EXPECT_GE(wins, 18);
}

TEST(Learning, MassAndSkill) {
  const LearningModel m;
  EXPECT_DOUBLE_EQ(m.mass(100, true, 0), 1.0);
  EXPECT_DOUBLE_EQ(m.mass(100, false, 0), 0.2);
  EXPECT_DOUBLE_EQ(m.mass(100, true, 2), 3.0);
  EXPECT_DOUBLE_EQ(m.mass(3, true, 0), 0.25);
  EXPECT_DOUBLE_EQ(skill_from_mass(50, 50), 0.5);
  EXPECT_EQ(skill_from_mass(0, 50), 0.0);
}

TEST(Loop, ErrorStratumAttractsOracleAndTc) {
  WorldConfig wc = small_world(12, 120);
  wc.strata = {{"clean", 0.5, {0.015, 0.015, 0.01, 0.0}}, {"noisy", 0.5, {0.015, 0.015, 0.01, 0.0}}};
  const World w = generate_world(wc);
  const auto train = w.videos(false);
  LoopConfig cfg;
  cfg.detector = clean_at_full_skill();
  const auto dets = detect_videos(w, train, {1.0, 0.0}, cfg.detector, 7);
  std::vector<VideoMeta> pool;
  for (auto v : train) pool.push_back(w.dataset.videos[v].meta);
  for (const char* name : {"oracle_fp", "tc"}) {
    const MethodSpec spec = method_spec(name, 1);
    const auto scores = score_pool(w, train, dets, spec, cfg);
    const auto sel = select_batch(scores, pool, {}, SelectionConfig{20, 1, Allocation::kGlobal, 1});
    for (const auto& f : sel.frames) {
      std::size_t v = 0;
      while (w.dataset.videos[v].meta.id != f.video_id) ++v;
      EXPECT_EQ(w.stratum[v], 1) << name;
    }
  }
}

TEST(Loop, InvariantsHold) {
  const World w = generate_world(small_world(8, 100));
  LoopConfig cfg;
  cfg.cycles = 3;
  const auto r = run_loop(w, method_spec("tc", 2), cfg);
  ASSERT_EQ(r.curve.size(), 4u);
  ASSERT_EQ(r.selections.size(), 3u);
  const int batch = static_cast<int>(r.selections[0].selection.frames.size());
  int total = 0;
  for (const auto& [id, frames] : r.labeled) total += static_cast<int>(frames.size());
  for (const auto& s : r.selections) EXPECT_EQ(static_cast<int>(s.selection.frames.size()), batch);
  for (std::size_t c = 1; c < r.curve.size(); ++c) EXPECT_GT(r.curve[c].labeled_fraction, r.curve[c - 1].labeled_fraction);
  int pool = 0;
  for (auto v : w.videos(false)) pool += w.dataset.videos[v].meta.num_frames;
  EXPECT_NEAR(r.curve.back().labeled_fraction * pool, total, 1e-9);
  for (auto v : w.videos(true)) EXPECT_FALSE(r.labeled.count(w.dataset.videos[v].meta.id));
}

TEST(Loop, SingleCycleTwoCurvePoints) {
  const World w = generate_world(small_world(6, 80));
  LoopConfig cfg;
  cfg.cycles = 1;
  const auto r = run_loop(w, method_spec("random", 1), cfg);
  EXPECT_EQ(r.curve.size(), 2u);
  const std::string csv = curve_csv_header(w.dataset.manifest.classes) + curve_csv_rows(r);
  EXPECT_EQ(std::count(csv.begin(), csv.end(), '\n'), 3);
}

TEST(Loop, BudgetBeyondPoolRejected) {
  const World w = generate_world(small_world(5, 30));
  LoopConfig cfg;
  cfg.cycles = 100;
  cfg.budget_per_cycle = 0.5;
  EXPECT_THROW(run_loop(w, method_spec("random", 1), cfg), ValidationError);
}

TEST(Loop, SameSeedSameResult) {
  const World w = generate_world(small_world(6, 80));
  LoopConfig cfg;
  cfg.cycles = 2;
  const auto a = run_loop(w, method_spec("entropy", 1), cfg);
  const auto b = run_loop(w, method_spec("entropy", 1), cfg);
  EXPECT_EQ(curve_csv_rows(a), curve_csv_rows(b));
  EXPECT_EQ(run_selection_csv_rows(a), run_selection_csv_rows(b));
}

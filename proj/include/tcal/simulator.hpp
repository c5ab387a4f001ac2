#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <iterator>
#include <limits>
#include <map>
#include <numbers>
#include <optional>
#include <set>
#include <string>
#include <vector>

#include "tcal/acquisition.hpp"
#include "tcal/dataset.hpp"
#include "tcal/energy.hpp"
#include "tcal/estimate.hpp"
#include "tcal/evaluation.hpp"
#include "tcal/rng.hpp"

namespace tcal {

// ---------------------------------------------------------------- world ----

struct ClassSpec {
  std::string name;
  double aspect = 1.0;  // width / height
};

struct Stratum {
  std::string name;
  double weight = 1.0;              // share of training videos
  std::vector<double> spawn_prob;   // per class, per frame
};

struct WorldConfig {
  std::uint64_t seed = 1;
  int num_videos = 20;
  int min_frames = 150;
  int max_frames = 250;
  int width = 320;
  int height = 240;
  double fps = 25.0;
  std::vector<ClassSpec> classes = {{"car", 1.6}, {"pedestrian", 0.45}, {"cyclist", 0.7}, {"wheelchair", 0.9}};
  std::vector<Stratum> strata = {
      {"city", 0.55, {0.015, 0.012, 0.006, 0.0}},
      {"town", 0.25, {0.008, 0.020, 0.010, 0.0}},
      {"night", 0.12, {0.012, 0.006, 0.004, 0.0}},
      {"mobility", 0.08, {0.0, 0.010, 0.004, 0.012}},
  };
  double test_fraction = 0.2;
  double min_size = 24.0;   // object height range in pixels
  double max_size = 64.0;
  double min_speed = 0.5;   // pixels per frame
  double max_speed = 4.0;
  double max_turn = 0.1;    // heading change per frame, radians
  int min_lifetime = 30;
  int max_lifetime = 150;
  int cell_size = 16;
  double motion_noise = 0.0;  // std-dev of per-cell motion noise, pixels
  double max_overlap = 0.3;   // objects overlapping an earlier one beyond this IoU end

  void validate() const {
    if (classes.empty()) throw ValidationError("world: at least one class required");
    if (strata.empty()) throw ValidationError("world: at least one stratum required");
    if (num_videos < 1) throw ValidationError("world: num_videos must be >= 1");
    if (min_frames < 1 || max_frames < min_frames) throw ValidationError("world: invalid frame range");
    if (width < 1 || height < 1) throw ValidationError("world: invalid image size");
    if (!(test_fraction >= 0.0 && test_fraction < 1.0)) throw ValidationError("world: test_fraction in [0,1)");
    if (!(min_size > 1.0 && max_size >= min_size)) throw ValidationError("world: invalid size range");
    if (max_size * 1.7 >= std::min(width, height)) throw ValidationError("world: objects too large for the image");
    if (!(min_speed >= 0.0 && max_speed >= min_speed)) throw ValidationError("world: invalid speed range");
    if (min_lifetime < 1 || max_lifetime < min_lifetime) throw ValidationError("world: invalid lifetime range");
    if (cell_size < 1) throw ValidationError("world: cell_size must be >= 1");
    for (const auto& c : classes) {
      if (!(c.aspect > 0.0)) throw ValidationError("world: class aspect must be positive");
    }
    for (const auto& s : strata) {
      if (s.spawn_prob.size() != classes.size()) {
        throw ValidationError("world: stratum '" + s.name + "' needs one spawn probability per class");
      }
      if (!(s.weight >= 0.0)) throw ValidationError("world: stratum weight must be non-negative");
      for (double p : s.spawn_prob) {
        if (!(p >= 0.0 && p <= 1.0)) throw ValidationError("world: spawn probabilities must be in [0,1]");
      }
    }
  }

  int num_test_videos() const {
    return std::min(num_videos - 1, static_cast<int>(std::lround(test_fraction * num_videos)));
  }
};

struct World {
  WorldConfig config;
  Dataset dataset;          // ground truth and motion; no detections
  std::vector<int> stratum;  // per video
  std::vector<bool> is_test;

  std::vector<std::size_t> videos(bool test) const {
    std::vector<std::size_t> out;
    for (std::size_t v = 0; v < is_test.size(); ++v) {
      if (is_test[v] == test) out.push_back(v);
    }
    return out;
  }
};

namespace detail {

inline void paint_cells(std::vector<Vec2>& grid, int cols, int rows, int cell, const Box& b, Vec2 v) {
  const int c0 = std::clamp(static_cast<int>(std::floor(b.x_min() / cell)), 0, cols - 1);
  const int c1 = std::clamp(static_cast<int>(std::ceil(b.x_max() / cell)) - 1, 0, cols - 1);
  const int r0 = std::clamp(static_cast<int>(std::floor(b.y_min() / cell)), 0, rows - 1);
  const int r1 = std::clamp(static_cast<int>(std::ceil(b.y_max() / cell)) - 1, 0, rows - 1);
  for (int r = r0; r <= r1; ++r) {
    for (int c = c0; c <= c1; ++c) grid[static_cast<std::size_t>(r) * cols + c] = v;
  }
}

inline bool inside_image(const Box& b, double w, double h) {
  return b.x_min() >= 0.0 && b.y_min() >= 0.0 && b.x_max() <= w && b.y_max() <= h;
}

}  // namespace detail

// Stratum of every video: the last num_test_videos() videos are the test split
// and cycle through the strata; training videos get largest-remainder counts
// by stratum weight in a seeded random order.
inline std::vector<int> assign_strata(const WorldConfig& config, std::vector<bool>& is_test) {
  const int n_test = config.num_test_videos();
  const int n_train = config.num_videos - n_test;
  std::vector<int> weights;
  double total = 0.0;
  for (const auto& s : config.strata) total += s.weight;
  std::vector<int> counts(config.strata.size(), 0);
  {
    std::vector<int> scaled;
    for (const auto& s : config.strata) scaled.push_back(static_cast<int>(std::lround(s.weight / total * 1e6)));
    counts = proportional_quotas(scaled, n_train);
  }
  std::vector<int> train;
  for (std::size_t s = 0; s < counts.size(); ++s) train.insert(train.end(), counts[s], static_cast<int>(s));
  Rng rng = Rng::stream(config.seed, "world_strata");
  for (std::size_t i = train.size(); i > 1; --i) std::swap(train[i - 1], train[rng.below(i)]);
  std::vector<int> out = train;
  is_test.assign(config.num_videos, false);
  for (int t = 0; t < n_test; ++t) {
    out.push_back(t % static_cast<int>(config.strata.size()));
    is_test[n_train + t] = true;
  }
  return out;
}

inline World generate_world(const WorldConfig& config) {
  config.validate();
  World world;
  world.config = config;
  world.stratum = assign_strata(config, world.is_test);
  auto& ds = world.dataset;
  ds.manifest.name = "synthetic_s" + std::to_string(config.seed);
  for (const auto& c : config.classes) ds.manifest.classes.push_back(c.name);
  const double W = config.width;
  const double H = config.height;
  const int cols = MotionField::grid_cols(config.width, config.cell_size);
  const int rows = MotionField::grid_rows(config.height, config.cell_size);

  for (int v = 0; v < config.num_videos; ++v) {
    Rng rng = Rng::stream(config.seed, "world_video", v);
    char id[32];
    std::snprintf(id, sizeof(id), "v%03d", v);
    VideoMeta meta{id,
                   config.min_frames + static_cast<int>(rng.below(config.max_frames - config.min_frames + 1)),
                   config.width, config.height, config.fps};
    ds.manifest.videos.push_back(meta);
    const Stratum& stratum = config.strata[world.stratum[v]];

    struct Object {
      int track_id;
      int class_id;
      Box box;
      double heading;
      double speed;
      int life;
    };
    std::vector<Object> active;
    int next_track = 0;
    std::vector<FrameGroundTruth> gt(meta.num_frames);
    std::vector<MotionField> motion;
    for (int t = 0; t < meta.num_frames; ++t) {
      if (t > 0) {
        MotionField m = MotionField::zeros(t - 1, config.width, config.height, config.cell_size);
        m.bwd = m.fwd;
        std::vector<Object> moved;
        std::vector<Box> placed;
        for (Object o : active) {
          o.heading += rng.uniform(-config.max_turn, config.max_turn);
          const double dx = quantize(o.speed * std::cos(o.heading));
          const double dy = quantize(o.speed * std::sin(o.heading));
          const Box prev = o.box;
          if (--o.life <= 0) continue;
          const Box next = quantize(prev.translated(dx, dy));
          if (!detail::inside_image(next, W, H)) continue;
          bool blocked = false;
          for (const Box& p : placed) blocked = blocked || iou(p, next) > config.max_overlap;
          if (blocked) continue;
          o.box = next;
          placed.push_back(next);
          detail::paint_cells(m.fwd, cols, rows, config.cell_size, prev, Vec2{dx, dy});
          detail::paint_cells(*m.bwd, cols, rows, config.cell_size, next, Vec2{-dx, -dy});
          moved.push_back(o);
        }
        if (config.motion_noise > 0.0) {
          Rng noise = Rng::stream(config.seed, "world_motion_noise", v, t);
          for (auto* grid : {&m.fwd, &*m.bwd}) {
            for (auto& cell : *grid) {
              cell.dx = quantize(cell.dx + config.motion_noise * noise.normal());
              cell.dy = quantize(cell.dy + config.motion_noise * noise.normal());
            }
          }
        }
        motion.push_back(std::move(m));
        active = std::move(moved);
      }
      for (int c = 0; c < static_cast<int>(config.classes.size()); ++c) {
        // Draws happen unconditionally so that one class's spawn probability
        // does not shift another class's random stream.
        const double u = rng.uniform();
        const double h = rng.uniform(config.min_size, config.max_size);
        const double x = rng.uniform();
        const double y = rng.uniform();
        const double heading = rng.uniform(0.0, 2.0 * std::numbers::pi);
        const double speed = rng.uniform(config.min_speed, config.max_speed);
        const int life = config.min_lifetime + static_cast<int>(rng.below(config.max_lifetime - config.min_lifetime + 1));
        if (!(u < stratum.spawn_prob[c])) continue;
        const double w = std::min(h * config.classes[c].aspect, W - 1.0);
        const double hh = std::min(h, H - 1.0);
        const double x0 = x * (W - w);
        const double y0 = y * (H - hh);
        const Box box = quantize(Box(x0, y0, x0 + w, y0 + hh));
        bool blocked = false;
        for (const Object& o : active) blocked = blocked || iou(o.box, box) > config.max_overlap;
        if (blocked) continue;
        active.push_back({next_track++, c, box, heading, speed, life});
      }
      for (const Object& o : active) gt[t].push_back({o.track_id, o.class_id, o.box});
    }
    VideoData vd;
    vd.meta = meta;
    vd.gt = std::move(gt);
    vd.motion = std::move(motion);
    ds.videos.push_back(std::move(vd));
  }
  return world;
}

// ------------------------------------------------------------- detector ----

// Parametric stand-in for a trained detector. Error rates fall linearly with
// the stratum skill s = n / (n + kappa), where n is the effective amount of
// labeled data of that stratum (see LearningModel).
struct DetectorParams {
  double kappa = 50.0;
  double p_miss_max = 0.5;
  double p_miss_min = 0.05;
  double fp_rate_max = 0.5;   // spurious detections per frame at skill 0
  double fp_rate_min = 0.02;
  double sigma_max = 4.0;     // localization jitter, pixels
  double sigma_min = 1.0;
  double flicker = 0.7;       // probability an error lasts a single frame
  double conf_min = 0.6;      // true-positive peak probability at skill 0
  double conf_max = 0.9;
  double conf_noise = 0.15;   // scaled by (1 - s)
  double fp_conf = 0.6;
  double fp_conf_noise = 0.1;
  int min_run = 2;            // persistent error length range, frames
  int max_run = 6;

  double p_miss(double s) const { return p_miss_max - (p_miss_max - p_miss_min) * s; }
  double fp_rate(double s) const { return fp_rate_max - (fp_rate_max - fp_rate_min) * s; }
  double sigma(double s) const { return sigma_max - (sigma_max - sigma_min) * s; }
  double confidence(double s) const { return conf_min + (conf_max - conf_min) * s; }

  void validate() const {
    auto prob = [](double p) { return p >= 0.0 && p <= 1.0; };
    if (!(kappa > 0.0)) throw ValidationError("detector: kappa must be positive");
    if (!prob(p_miss_max) || !prob(p_miss_min)) throw ValidationError("detector: miss probabilities in [0,1]");
    if (!prob(flicker)) throw ValidationError("detector: flicker probability in [0,1]");
    if (!(fp_rate_max >= 0.0 && fp_rate_min >= 0.0)) throw ValidationError("detector: FP rates must be >= 0");
    if (!(sigma_max >= 0.0 && sigma_min >= 0.0)) throw ValidationError("detector: jitter must be >= 0");
    if (!prob(conf_min) || !prob(conf_max) || !prob(fp_conf)) throw ValidationError("detector: confidences in [0,1]");
    if (min_run < 2 || max_run < min_run) throw ValidationError("detector: persistent run range must start at 2");
  }
};

inline double skill_from_mass(double n, double kappa) { return n <= 0.0 ? 0.0 : n / (n + kappa); }

// Ground-truth record of what the detector got wrong, for harness checks.
struct InjectedMiss {
  int frame;
  int track_id;
  bool isolated;  // single-frame miss
  bool interior;  // object detected in the frames right before and after
};

struct InjectedFalsePositive {
  int frame;
  int detection_index;
  bool isolated;
};

struct DetectionLog {
  std::vector<InjectedMiss> misses;
  std::vector<InjectedFalsePositive> false_positives;
};

namespace detail {

inline std::vector<double> peaked_scores(Rng& rng, int num_classes, int peak_class, double peak) {
  std::vector<double> w(num_classes + 1, 0.0);
  const double rest = 1.0 - peak;
  const double background_share = 0.6 + 0.3 * rng.uniform();
  double other_total = 0.0;
  std::vector<double> other(num_classes, 0.0);
  for (int c = 0; c < num_classes; ++c) {
    other[c] = c == peak_class ? 0.0 : 0.05 + rng.uniform();
    other_total += other[c];
  }
  for (int c = 0; c < num_classes; ++c) {
    w[c] = c == peak_class ? peak : (other_total > 0.0 ? rest * (1.0 - background_share) * other[c] / other_total : 0.0);
  }
  w[num_classes] = other_total > 0.0 ? rest * background_share : rest;
  return quantize_distribution(w);
}

inline Box jitter_box(const Box& b, double sigma, Rng& rng) {
  const double n0 = rng.normal(), n1 = rng.normal(), n2 = rng.normal(), n3 = rng.normal();
  if (sigma <= 0.0) return b;
  double x0 = b.x_min() + sigma * n0;
  double y0 = b.y_min() + sigma * n1;
  double x1 = b.x_max() + sigma * n2;
  double y1 = b.y_max() + sigma * n3;
  if (x1 - x0 < 2.0 || y1 - y0 < 2.0) return b;
  return quantize(Box(x0, y0, x1, y1));
}

}  // namespace detail

// Runs the surrogate detector over one video. Every random draw comes from a
// stream keyed by (seed, video, frame, object) and is consumed whether or not
// it matters at the current skill, so a higher skill only ever removes errors.
inline std::vector<FrameDetections> detect_video(const World& world, std::size_t video, double skill,
                                                 const DetectorParams& params, std::uint64_t seed,
                                                 DetectionLog* log_out = nullptr) {
  params.validate();
  const VideoData& vd = world.dataset.videos[video];
  const auto& gt = *vd.gt;
  const int L = vd.meta.num_frames;
  const int nc = world.dataset.manifest.num_classes();
  const auto& cfg = world.config;
  const double W = vd.meta.width;
  const double H = vd.meta.height;
  std::vector<FrameDetections> out(L);

  // Miss pattern per track.
  std::map<int, int> run_left;
  std::map<int, int> cooldown_until;
  std::vector<std::vector<bool>> missed(L);
  std::vector<InjectedMiss> misses;
  for (int t = 0; t < L; ++t) {
    missed[t].assign(gt[t].size(), false);
    for (std::size_t i = 0; i < gt[t].size(); ++i) {
      const int track = gt[t][i].track_id;
      Rng r = Rng::stream(seed, "detect_miss", video, track, t);
      const double u = r.uniform();
      const double iso = r.uniform();
      const int len = params.min_run + static_cast<int>(r.below(params.max_run - params.min_run + 1));
      if (run_left[track] > 0) {
        missed[t][i] = true;
        --run_left[track];
        if (run_left[track] == 0) cooldown_until[track] = t + 1;
        continue;
      }
      auto cd = cooldown_until.find(track);
      if (cd != cooldown_until.end() && cd->second >= t) continue;
      if (u < params.p_miss(skill)) {
        missed[t][i] = true;
        if (iso < params.flicker) {
          cooldown_until[track] = t + 1;
          misses.push_back({t, track, true, false});
        } else {
          run_left[track] = len - 1;
          misses.push_back({t, track, false, false});
        }
      }
    }
  }
  auto detected_at = [&](int t, int track) {
    if (t < 0 || t >= L) return false;
    for (std::size_t i = 0; i < gt[t].size(); ++i) {
      if (gt[t][i].track_id == track) return !missed[t][i];
    }
    return false;
  };
  for (auto& m : misses) m.interior = m.isolated && detected_at(m.frame - 1, m.track_id) && detected_at(m.frame + 1, m.track_id);

  // True positives.
  for (int t = 0; t < L; ++t) {
    for (std::size_t i = 0; i < gt[t].size(); ++i) {
      const auto& o = gt[t][i];
      Rng r = Rng::stream(seed, "detect_tp", video, o.track_id, t);
      const Box box = detail::jitter_box(o.box, params.sigma(skill), r);
      const double peak =
          std::clamp(params.confidence(skill) + (1.0 - skill) * params.conf_noise * r.normal(), 0.35, 0.99);
      auto scores = detail::peaked_scores(r, nc, o.class_id, peak);
      if (!missed[t][i]) out[t].emplace_back(box, std::move(scores));
    }
  }

  // Spurious detections, possibly lasting several frames.
  std::vector<InjectedFalsePositive> fps;
  for (int t = 0; t < L; ++t) {
    Rng r = Rng::stream(seed, "detect_fp", video, t);
    const int count = poisson_from_uniform(params.fp_rate(skill), r.uniform());
    for (int j = 0; j < count; ++j) {
      Rng s = Rng::stream(seed, "detect_fp_slot", video, t, j);
      const int cls = static_cast<int>(s.below(nc));
      const double h = s.uniform(cfg.min_size, cfg.max_size);
      const double w = std::min(h * cfg.classes[cls].aspect, W - 1.0);
      const double hh = std::min(h, H - 1.0);
      const double x0 = s.uniform() * (W - w);
      const double y0 = s.uniform() * (H - hh);
      const bool isolated = s.uniform() < params.flicker;
      const int len = isolated ? 1 : params.min_run + static_cast<int>(s.below(params.max_run - params.min_run + 1));
      const double peak = std::clamp(params.fp_conf + params.fp_conf_noise * s.normal(), 0.35, 0.95);
      const auto scores = detail::peaked_scores(s, nc, cls, peak);
      const Box box = quantize(Box(x0, y0, x0 + w, y0 + hh));
      for (int k = 0; k < len && t + k < L; ++k) {
        fps.push_back({t + k, static_cast<int>(out[t + k].size()), isolated});
        out[t + k].emplace_back(box, scores);
      }
    }
  }
  if (log_out != nullptr) {
    log_out->misses = std::move(misses);
    log_out->false_positives = std::move(fps);
  }
  return out;
}

// ------------------------------------------------------------- AL loop -----

// How much one labeled frame is worth to the surrogate: frames close to an
// already labeled frame of the same video add little, empty frames add a
// little, and each detector error present in the frame when it was labeled
// adds error_weight.
struct LearningModel {
  double redundancy_radius = 12.0;  // frames; about half a second at 25 fps
  double empty_weight = 0.2;
  double error_weight = 1.0;

  double mass(int distance_to_labeled, bool has_objects, int errors) const {
    const double redundancy =
        redundancy_radius <= 0.0 ? 1.0 : std::min(1.0, distance_to_labeled / redundancy_radius);
    return redundancy * ((has_objects ? 1.0 : empty_weight) + error_weight * errors);
  }

  void validate() const {
    if (!(redundancy_radius >= 0.0 && empty_weight >= 0.0 && error_weight >= 0.0)) {
      throw ValidationError("learning model weights must be non-negative");
    }
  }
};

// An acquisition strategy as run in the loop.
struct MethodSpec {
  std::string name;  // label used in output files
  Method method = Method::kRandom;
  int k = 1;
  Allocation allocation = Allocation::kProportional;
  TcVariant tc_variant = TcVariant::kFP;
};

// Named strategies: "random" is plain uniform sampling, "random_r" adds the
// exclusion zone and per-video quotas, every other method uses both.
inline MethodSpec method_spec(const std::string& name, int k) {
  if (name == "random") return {name, Method::kRandom, 0, Allocation::kGlobal, TcVariant::kFP};
  if (name == "random_r") return {name, Method::kRandom, k, Allocation::kProportional, TcVariant::kFP};
  if (name == "tc_fn") return {name, Method::kTC, k, Allocation::kProportional, TcVariant::kFN};
  if (name == "tc_fpfn") return {name, Method::kTC, k, Allocation::kProportional, TcVariant::kBoth};
  return {name, parse_method(name), k, Allocation::kProportional, TcVariant::kFP};
}

struct LoopConfig {
  std::uint64_t seed = 1;
  int cycles = 5;
  double initial_fraction = 0.02;
  double budget_per_cycle = 0.02;  // fraction of training frames per cycle
  TCConfig tc;
  DetectorParams detector;
  LearningModel learning;
  EnergyModel energy;

  void validate() const {
    if (cycles < 0) throw ValidationError("loop: cycles must be >= 0");
    if (!(initial_fraction > 0.0 && initial_fraction < 1.0)) throw ValidationError("loop: initial_fraction in (0,1)");
    if (!(budget_per_cycle > 0.0 && budget_per_cycle < 1.0)) throw ValidationError("loop: budget_per_cycle in (0,1)");
    tc.validate();
    detector.validate();
    learning.validate();
    energy.validate();
  }
};

struct CurvePoint {
  int cycle = 0;
  double labeled_fraction = 0.0;
  EvalReport report;
  std::vector<double> skill;  // per stratum
};

struct CycleSelection {
  int cycle = 0;
  SelectionResult selection;
};

struct RunResult {
  std::string method;
  std::uint64_t seed = 0;
  std::vector<CurvePoint> curve;
  std::vector<CycleSelection> selections;
  LabeledSet labeled;
  std::vector<double> stratum_mass;
};

struct ALState {
  LabeledSet labeled;
  std::vector<double> mass;  // per stratum
  int cycle = 0;
  int total_frames = 0;
  int labeled_count = 0;

  std::vector<double> skill(double kappa) const {
    std::vector<double> s;
    for (double m : mass) s.push_back(skill_from_mass(m, kappa));
    return s;
  }
};

namespace detail {

inline int distance_to_labeled(const std::set<int>& frames, int f) {
  int best = std::numeric_limits<int>::max();
  auto it = frames.lower_bound(f);
  if (it != frames.end()) best = std::min(best, *it - f);
  if (it != frames.begin()) best = std::min(best, f - *std::prev(it));
  return best;
}

}  // namespace detail

// Detections for a set of videos at the current skill levels.
inline std::vector<std::vector<FrameDetections>> detect_videos(const World& world,
                                                               const std::vector<std::size_t>& videos,
                                                               const std::vector<double>& skill,
                                                               const DetectorParams& params, std::uint64_t seed) {
  std::vector<std::vector<FrameDetections>> out;
  for (std::size_t v : videos) out.push_back(detect_video(world, v, skill[world.stratum[v]], params, seed));
  return out;
}

// Scores every frame of the training videos for the given strategy.
inline std::vector<FrameScore> score_pool(const World& world, const std::vector<std::size_t>& train,
                                          const std::vector<std::vector<FrameDetections>>& dets,
                                          const MethodSpec& spec, const LoopConfig& config) {
  std::vector<FrameScore> scores;
  for (std::size_t i = 0; i < train.size(); ++i) {
    VideoData vd = world.dataset.videos[train[i]];
    vd.dets = dets[i];
    std::vector<FrameScore> s;
    switch (spec.method) {
      case Method::kTC: {
        Dataset one;
        one.manifest = world.dataset.manifest;
        one.videos.push_back(std::move(vd));
        const auto est = estimate_errors(one, config.tc, config.energy);
        s = tc_scores(est.videos[0], spec.tc_variant);
        break;
      }
      case Method::kOracleFP: s = oracle_scores(vd, ErrorKind::kFP, config.tc); break;
      case Method::kOracleFN: s = oracle_scores(vd, ErrorKind::kFN, config.tc); break;
      case Method::kLeastConfidence:
      case Method::kEntropy:
      case Method::kMargin: s = uncertainty_scores(vd, spec.method, config.tc); break;
      case Method::kRandom: s = random_scores(vd.meta); break;
    }
    scores.insert(scores.end(), s.begin(), s.end());
  }
  return scores;
}

// Closed active-learning loop on a generated world.
inline RunResult run_loop(const World& world, const MethodSpec& spec, const LoopConfig& config) {
  config.validate();
  const auto train = world.videos(false);
  const auto test = world.videos(true);
  if (train.empty() || test.empty()) throw ValidationError("loop: world needs training and test videos");
  std::vector<VideoMeta> pool;
  int total = 0;
  for (std::size_t v : train) {
    pool.push_back(world.dataset.videos[v].meta);
    total += world.dataset.videos[v].meta.num_frames;
  }
  const int batch = std::max(1, static_cast<int>(std::lround(config.budget_per_cycle * total)));
  const int initial = std::max(1, static_cast<int>(std::lround(config.initial_fraction * total)));
  if (initial + batch * config.cycles > total) {
    throw ValidationError("loop: budget of " + std::to_string(initial + batch * config.cycles) +
                          " frames exceeds the pool of " + std::to_string(total));
  }
  const std::uint64_t det_seed = splitmix64(config.seed ^ hash_name("detector"));
  const int num_strata = static_cast<int>(world.config.strata.size());

  ALState state;
  state.mass.assign(num_strata, 0.0);
  state.total_frames = total;

  auto frame_errors = [&](std::size_t train_idx, const std::vector<FrameDetections>& dets, int f) {
    const auto& vd = world.dataset.videos[train[train_idx]];
    const FrameMatch m = match_frame(filter_detections(std::span(&dets[f], 1), config.tc).frames[0], (*vd.gt)[f]);
    return m.false_positives() + m.false_negatives();
  };
  std::map<std::string, std::size_t> train_index;
  for (std::size_t i = 0; i < train.size(); ++i) train_index[pool[i].id] = i;

  // Adds one frame to the labeled set, crediting its mass to the stratum.
  auto label = [&](std::size_t train_idx, int f, const std::vector<std::vector<FrameDetections>>& dets) {
    const auto& vd = world.dataset.videos[train[train_idx]];
    auto& frames = state.labeled[vd.meta.id];
    if (frames.count(f)) throw ValidationError("loop: frame labeled twice");
    const int dist = detail::distance_to_labeled(frames, f);
    const double m = config.learning.mass(dist, !(*vd.gt)[f].empty(), frame_errors(train_idx, dets[train_idx], f));
    state.mass[world.stratum[train[train_idx]]] += m;
    frames.insert(f);
    ++state.labeled_count;
  };

  auto evaluate_now = [&](int cycle) {
    const auto skill = state.skill(config.detector.kappa);
    const auto dets = detect_videos(world, test, skill, config.detector, det_seed);
    std::vector<EvalVideo> ev;
    for (std::size_t i = 0; i < test.size(); ++i) ev.push_back({dets[i], *world.dataset.videos[test[i]].gt});
    CurvePoint p;
    p.cycle = cycle;
    p.labeled_fraction = static_cast<double>(state.labeled_count) / total;
    p.report = evaluate(ev, world.dataset.manifest.num_classes(), EvalConfig{0.5, config.tc.nms_threshold});
    p.skill = skill;
    return p;
  };

  RunResult result;
  result.method = spec.name;
  result.seed = config.seed;

  // Initial labeled set: uniform over training frames, identical for every
  // method run with the same seed.
  {
    std::vector<std::pair<std::size_t, int>> all;
    for (std::size_t i = 0; i < train.size(); ++i) {
      for (int f = 0; f < pool[i].num_frames; ++f) all.emplace_back(i, f);
    }
    Rng rng = Rng::stream(config.seed, "initial_labels");
    for (std::size_t i = all.size(); i > 1; --i) std::swap(all[i - 1], all[rng.below(i)]);
    const auto dets = detect_videos(world, train, state.skill(config.detector.kappa), config.detector, det_seed);
    for (int i = 0; i < initial; ++i) label(all[i].first, all[i].second, dets);
  }
  result.curve.push_back(evaluate_now(0));

  for (int cycle = 1; cycle <= config.cycles; ++cycle) {
    state.cycle = cycle;
    const int before = state.labeled_count;
    const auto dets = detect_videos(world, train, state.skill(config.detector.kappa), config.detector, det_seed);
    const auto scores = score_pool(world, train, dets, spec, config);
    SelectionConfig sc{batch, spec.k, spec.allocation,
                       splitmix64(config.seed ^ hash_name("selection") ^ static_cast<std::uint64_t>(cycle))};
    SelectionResult sel = select_batch(scores, pool, state.labeled, sc);
    for (const auto& f : sel.frames) label(train_index.at(f.video_id), f.frame, dets);
    if (state.labeled_count - before != batch) throw ValidationError("loop: batch size invariant violated");
    result.selections.push_back({cycle, std::move(sel)});
    result.curve.push_back(evaluate_now(cycle));
  }
  result.labeled = state.labeled;
  result.stratum_mass = state.mass;
  return result;
}

// ---------------------------------------------------------------- output ---

inline std::string curve_csv_header(const std::vector<std::string>& classes) {
  std::string h = "method,seed,cycle,labeled_fraction,mAP";
  for (const auto& c : classes) h += ",AP_" + c;
  return h + "\n";
}

inline std::string curve_csv_rows(const RunResult& r) {
  std::string out;
  for (const auto& p : r.curve) {
    out += r.method + "," + std::to_string(r.seed) + "," + std::to_string(p.cycle) + "," +
           detail::fmt6(p.labeled_fraction) + "," + detail::fmt6(p.report.mAP);
    for (const auto& ap : p.report.class_ap) out += "," + (ap ? detail::fmt6(*ap) : std::string("nan"));
    out += "\n";
  }
  return out;
}

inline std::string run_selection_csv_header() { return "method,seed,cycle,video_id,frame,score,rank\n"; }

inline std::string run_selection_csv_rows(const RunResult& r) {
  std::string out;
  for (const auto& cs : r.selections) {
    for (const auto& f : cs.selection.frames) {
      out += r.method + "," + std::to_string(r.seed) + "," + std::to_string(cs.cycle) + "," + f.video_id + "," +
             std::to_string(f.frame) + "," + detail::fmt6(f.score) + "," + std::to_string(f.rank) + "\n";
    }
  }
  return out;
}

}  // namespace tcal

#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <map>
#include <optional>
#include <set>
#include <span>
#include <string>
#include <vector>

#include "tcal/dataset.hpp"
#include "tcal/estimate.hpp"
#include "tcal/evaluation.hpp"
#include "tcal/rng.hpp"

namespace tcal {

enum class Method { kTC, kOracleFP, kOracleFN, kLeastConfidence, kEntropy, kMargin, kRandom };

inline const char* method_name(Method m) {
  switch (m) {
    case Method::kTC: return "tc";
    case Method::kOracleFP: return "oracle_fp";
    case Method::kOracleFN: return "oracle_fn";
    case Method::kLeastConfidence: return "least_confidence";
    case Method::kEntropy: return "entropy";
    case Method::kMargin: return "margin";
    case Method::kRandom: return "random";
  }
  return "?";
}

inline Method parse_method(const std::string& s) {
  for (Method m : {Method::kTC, Method::kOracleFP, Method::kOracleFN, Method::kLeastConfidence, Method::kEntropy,
                   Method::kMargin, Method::kRandom}) {
    if (s == method_name(m)) return m;
  }
  throw ValidationError("unknown acquisition method '" + s + "'");
}

// Which estimated error count the TC acquisition ranks by.
enum class TcVariant { kFP, kFN, kBoth };

inline TcVariant parse_tc_variant(const std::string& s) {
  if (s == "fp") return TcVariant::kFP;
  if (s == "fn") return TcVariant::kFN;
  if (s == "fp+fn") return TcVariant::kBoth;
  throw ValidationError("unknown TC variant '" + s + "' (expected fp, fn or fp+fn)");
}

// Higher score = selected earlier. Frames in tier 1 carry no evidence for the
// method and rank after every tier-0 frame.
struct FrameScore {
  std::string video_id;
  int frame = 0;
  double score = 0.0;
  Method method = Method::kRandom;
  int tier = 0;
};

inline std::vector<FrameScore> tc_scores(const VideoErrors& errors, TcVariant variant = TcVariant::kFP) {
  std::vector<FrameScore> out;
  for (std::size_t f = 0; f < errors.frames.size(); ++f) {
    const auto& fr = errors.frames[f];
    const int count = variant == TcVariant::kFP ? fr.fp : variant == TcVariant::kFN ? fr.fn : fr.fp + fr.fn;
    out.push_back({errors.video_id, static_cast<int>(f), static_cast<double>(count), Method::kTC, 0});
  }
  return out;
}

enum class ErrorKind { kFP, kFN };

// Ground-truth error counts per frame, on detections that survived NMS and
// the score threshold.
inline std::vector<FrameScore> oracle_scores(const VideoData& v, ErrorKind kind, const TCConfig& filter = {}) {
  if (!v.gt) throw ValidationError("oracle scoring needs ground truth for video '" + v.meta.id + "'");
  if (!v.dets) throw ValidationError("oracle scoring needs detections for video '" + v.meta.id + "'");
  const FilteredDetections fd = filter_detections(*v.dets, filter);
  std::vector<FrameScore> out;
  for (int f = 0; f < v.meta.num_frames; ++f) {
    const FrameMatch m = match_frame(fd.frames[f], (*v.gt)[f]);
    const int count = kind == ErrorKind::kFP ? m.false_positives() : m.false_negatives();
    out.push_back({v.meta.id, f, static_cast<double>(count),
                   kind == ErrorKind::kFP ? Method::kOracleFP : Method::kOracleFN, 0});
  }
  return out;
}

// Per-detection uncertainty measures.
inline double least_confidence(const Detection& d) { return d.score(); }

inline double entropy(const Detection& d) {
  double h = 0.0;
  for (double p : d.scores()) {
    if (p > 0.0) h -= p * std::log(p);
  }
  return h;
}

inline double margin(const Detection& d) {
  double first = 0.0;
  double second = 0.0;
  for (double p : d.scores()) {
    if (p > first) {
      second = first;
      first = p;
    } else if (p > second) {
      second = p;
    }
  }
  return first - second;
}

// Frame-level uncertainty score, sign-normalized so that higher is selected
// first. Frames without detections go to tier 1.
inline FrameScore uncertainty_score(const std::string& video_id, int frame, std::span<const Detection> dets,
                                    Method method) {
  FrameScore s{video_id, frame, 0.0, method, dets.empty() ? 1 : 0};
  if (dets.empty()) return s;
  double sum = 0.0;
  for (const Detection& d : dets) {
    switch (method) {
      case Method::kLeastConfidence: sum += least_confidence(d); break;
      case Method::kEntropy: sum += entropy(d); break;
      case Method::kMargin: sum += margin(d); break;
      default: throw ValidationError("uncertainty_score: not an uncertainty method");
    }
  }
  const double n = static_cast<double>(dets.size());
  switch (method) {
    case Method::kLeastConfidence: s.score = -(sum / n); break;  // low mean confidence first
    case Method::kEntropy: s.score = sum / n; break;             // high mean entropy first
    default: s.score = -sum; break;                              // low summed margin first
  }
  return s;
}

inline std::vector<FrameScore> uncertainty_scores(const VideoData& v, Method method, const TCConfig& filter = {}) {
  if (!v.dets) throw ValidationError("uncertainty scoring needs detections for video '" + v.meta.id + "'");
  const FilteredDetections fd = filter_detections(*v.dets, filter);
  std::vector<FrameScore> out;
  for (int f = 0; f < v.meta.num_frames; ++f) out.push_back(uncertainty_score(v.meta.id, f, fd.frames[f], method));
  return out;
}

inline std::vector<FrameScore> random_scores(const VideoMeta& meta) {
  std::vector<FrameScore> out;
  for (int f = 0; f < meta.num_frames; ++f) out.push_back({meta.id, f, 0.0, Method::kRandom, 0});
  return out;
}

enum class Allocation { kProportional, kGlobal };

inline Allocation parse_allocation(const std::string& s) {
  if (s == "proportional") return Allocation::kProportional;
  if (s == "global") return Allocation::kGlobal;
  throw ValidationError("unknown allocation '" + s + "' (expected proportional or global)");
}

struct SelectionConfig {
  int batch_size = 1;
  int k = 1;  // exclusion radius around labeled and selected frames
  Allocation allocation = Allocation::kProportional;
  std::uint64_t seed = 0;

  void validate() const {
    if (batch_size < 1) throw ValidationError("batch size must be positive");
    if (k < 0) throw ValidationError("representativeness radius k must be >= 0");
  }
};

// Labeled frames per video id.
using LabeledSet = std::map<std::string, std::set<int>>;

struct SelectedFrame {
  std::string video_id;
  int frame = 0;
  double score = 0.0;
  int rank = 0;        // 1-based position in the batch
  bool spill = false;  // chosen after the exclusion zones ran out
};

struct SelectionResult {
  std::vector<SelectedFrame> frames;
  int spill_events = 0;
};

// Integer quotas proportional to `weights` summing to `total`; remainders go
// to the largest fractional parts, earlier entries first on ties.
inline std::vector<int> proportional_quotas(std::span<const int> weights, int total) {
  long long sum = 0;
  for (int w : weights) sum += w;
  std::vector<int> q(weights.size(), 0);
  if (sum == 0) return q;
  std::vector<std::pair<double, std::size_t>> rem;
  int assigned = 0;
  for (std::size_t i = 0; i < weights.size(); ++i) {
    const double exact = static_cast<double>(total) * weights[i] / static_cast<double>(sum);
    q[i] = static_cast<int>(std::floor(exact));
    assigned += q[i];
    rem.emplace_back(exact - q[i], i);
  }
  std::stable_sort(rem.begin(), rem.end(), [](const auto& a, const auto& b) { return a.first > b.first; });
  for (std::size_t r = 0; assigned < total; ++r, ++assigned) ++q[rem[r % rem.size()].second];
  return q;
}

// Picks a batch from the scored unlabeled pool:
//  1. frames within k of a labeled frame of the same video are excluded;
//  2. with proportional allocation every video gets a quota proportional to
//     its length;
//  3. inside a video frames are taken best-first, each pick excluding its own
//     k-neighborhood;
//  4. ties are broken by a seeded random key;
//  5. unfilled quota spills to the global ranking, and only if that runs dry
//     are exclusion zones ignored (counted as spill events).
inline SelectionResult select_batch(std::span<const FrameScore> scores, std::span<const VideoMeta> pool,
                                    const LabeledSet& labeled, const SelectionConfig& config) {
  config.validate();
  std::map<std::string, std::size_t> video_index;
  for (std::size_t v = 0; v < pool.size(); ++v) video_index[pool[v].id] = v;

  struct Cand {
    std::size_t video;
    int frame;
    double score;
    int tier;
    std::uint64_t tiebreak;
  };
  std::vector<Cand> cands;
  {
    std::vector<FrameScore> sorted(scores.begin(), scores.end());
    std::sort(sorted.begin(), sorted.end(), [&](const FrameScore& a, const FrameScore& b) {
      return std::pair(video_index.at(a.video_id), a.frame) < std::pair(video_index.at(b.video_id), b.frame);
    });
    Rng rng = Rng::stream(config.seed, "select_tiebreak");
    for (const auto& s : sorted) {
      if (!video_index.count(s.video_id)) throw ValidationError("score for video '" + s.video_id + "' outside pool");
      const std::size_t v = video_index.at(s.video_id);
      auto it = labeled.find(s.video_id);
      const bool is_labeled = it != labeled.end() && it->second.count(s.frame);
      const std::uint64_t key = rng.next();  // drawn for every frame so keys do not depend on labels
      if (!std::isfinite(s.score)) throw ValidationError("non-finite acquisition score");
      if (!is_labeled) cands.push_back({v, s.frame, s.score, s.tier, key});
    }
  }
  if (static_cast<int>(cands.size()) < config.batch_size) {
    throw ValidationError("unlabeled pool exhausted: " + std::to_string(cands.size()) + " frames left, batch needs " +
                          std::to_string(config.batch_size) + " (short by " +
                          std::to_string(config.batch_size - static_cast<int>(cands.size())) + ")");
  }
  auto better = [](const Cand& a, const Cand& b) {
    if (a.tier != b.tier) return a.tier < b.tier;
    if (a.score != b.score) return a.score > b.score;
    if (a.tiebreak != b.tiebreak) return a.tiebreak < b.tiebreak;
    return std::pair(a.video, a.frame) < std::pair(b.video, b.frame);
  };
  std::sort(cands.begin(), cands.end(), better);

  // blocked[v] holds frames inside an exclusion zone.
  std::vector<std::set<int>> taken(pool.size());
  for (std::size_t v = 0; v < pool.size(); ++v) {
    auto it = labeled.find(pool[v].id);
    if (it != labeled.end()) taken[v] = it->second;
  }
  auto blocked = [&](const Cand& c) {
    const auto& t = taken[c.video];
    auto it = t.lower_bound(c.frame - config.k);
    return it != t.end() && *it <= c.frame + config.k;
  };
  std::vector<bool> used(cands.size(), false);
  SelectionResult result;
  auto pick = [&](std::size_t i, bool spill) {
    used[i] = true;
    taken[cands[i].video].insert(cands[i].frame);
    result.frames.push_back({pool[cands[i].video].id, cands[i].frame, cands[i].score,
                             static_cast<int>(result.frames.size()) + 1, spill});
  };

  if (config.allocation == Allocation::kProportional) {
    std::vector<int> lengths;
    for (const auto& m : pool) lengths.push_back(m.num_frames);
    std::vector<int> quota = proportional_quotas(lengths, config.batch_size);
    for (std::size_t i = 0; i < cands.size(); ++i) {
      const Cand& c = cands[i];
      if (quota[c.video] > 0 && !blocked(c)) {
        pick(i, false);
        --quota[c.video];
      }
    }
  }
  // Global ranking: the whole batch in global mode, leftover quota otherwise.
  for (std::size_t i = 0; i < cands.size() && static_cast<int>(result.frames.size()) < config.batch_size; ++i) {
    if (!used[i] && !blocked(cands[i])) pick(i, false);
  }
  for (std::size_t i = 0; i < cands.size() && static_cast<int>(result.frames.size()) < config.batch_size; ++i) {
    if (!used[i]) {
      pick(i, true);
      ++result.spill_events;
    }
  }
  if (result.spill_events > 0) {
    log(LogLevel::kWarn, "selection spill: " + std::to_string(result.spill_events) +
                             " frame(s) chosen inside exclusion zones");
  }
  return result;
}

inline std::string selection_csv_header() { return "method,cycle,video_id,frame,score,rank\n"; }

inline std::string selection_csv_rows(const SelectionResult& r, const std::string& method, int cycle) {
  std::string out;
  for (const auto& f : r.frames) {
    out += method + "," + std::to_string(cycle) + "," + f.video_id + "," + std::to_string(f.frame) + "," +
           detail::fmt6(f.score) + "," + std::to_string(f.rank) + "\n";
  }
  return out;
}

}  // namespace tcal

#pragma once

#include <algorithm>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "tcal/dataset.hpp"
#include "tcal/geometry.hpp"
#include "tcal/tcgraph.hpp"

namespace tcal {

inline constexpr double kMatchIoU = 0.5;

// Greedy matching of one frame: detections in descending score order each
// take the best-overlapping unmatched GT object of their class with
// IoU > kMatchIoU. A GT object is never matched twice.
struct FrameMatch {
  std::vector<int> det_to_gt;  // -1 for false positives
  std::vector<bool> gt_matched;

  int false_positives() const {
    return static_cast<int>(std::count(det_to_gt.begin(), det_to_gt.end(), -1));
  }
  int false_negatives() const {
    return static_cast<int>(std::count(gt_matched.begin(), gt_matched.end(), false));
  }
};

inline FrameMatch match_frame(const FrameDetections& dets, const FrameGroundTruth& gt) {
  FrameMatch m;
  m.det_to_gt.assign(dets.size(), -1);
  m.gt_matched.assign(gt.size(), false);
  std::vector<int> order(dets.size());
  for (int i = 0; i < static_cast<int>(dets.size()); ++i) order[i] = i;
  std::stable_sort(order.begin(), order.end(),
                   [&](int a, int b) { return dets[a].score() > dets[b].score(); });
  for (int d : order) {
    int best = -1;
    double best_iou = kMatchIoU;
    for (int g = 0; g < static_cast<int>(gt.size()); ++g) {
      if (m.gt_matched[g] || gt[g].class_id != dets[d].class_id()) continue;
      const double o = iou(dets[d].box(), gt[g].box);
      if (o > best_iou) {
        best_iou = o;
        best = g;
      }
    }
    if (best >= 0) {
      m.det_to_gt[d] = best;
      m.gt_matched[best] = true;
    }
  }
  return m;
}

enum class ApInterpolation { kAllPoints, kElevenPoint };

struct EvalConfig {
  double score_threshold = 0.5;
  double nms_threshold = 0.5;
  ApInterpolation interpolation = ApInterpolation::kAllPoints;
};

struct EvalReport {
  std::vector<std::optional<double>> class_ap;  // nullopt for classes without GT
  double mAP = 0.0;
  int tp = 0;
  int fp = 0;
  int fn = 0;
};

// Area under the precision envelope for detections already sorted by
// descending score; `hits[i]` tells whether detection i is a true positive.
inline double average_precision(const std::vector<bool>& hits, int num_gt, ApInterpolation interp) {
  if (num_gt <= 0) return 0.0;
  std::vector<double> precision;
  std::vector<double> recall;
  int tp = 0;
  for (std::size_t i = 0; i < hits.size(); ++i) {
    if (hits[i]) ++tp;
    precision.push_back(static_cast<double>(tp) / static_cast<double>(i + 1));
    recall.push_back(static_cast<double>(tp) / num_gt);
  }
  if (interp == ApInterpolation::kElevenPoint) {
    double ap = 0.0;
    for (int t = 0; t <= 10; ++t) {
      const double r = t / 10.0;
      double p = 0.0;
      for (std::size_t i = 0; i < recall.size(); ++i) {
        if (recall[i] >= r) p = std::max(p, precision[i]);
      }
      ap += p / 11.0;
    }
    return ap;
  }
  // Envelope: precision at recall r is the best precision at any recall >= r.
  for (std::size_t i = precision.size(); i-- > 1;) precision[i - 1] = std::max(precision[i - 1], precision[i]);
  double ap = 0.0;
  double prev_recall = 0.0;
  for (std::size_t i = 0; i < recall.size(); ++i) {
    ap += (recall[i] - prev_recall) * precision[i];
    prev_recall = recall[i];
  }
  return ap;
}

// Detections and ground truth for one video, frame-aligned.
struct EvalVideo {
  std::span<const FrameDetections> dets;
  std::span<const FrameGroundTruth> gt;
};

inline EvalReport evaluate(std::span<const EvalVideo> videos, int num_classes, const EvalConfig& config = {}) {
  struct Scored {
    double score;
    bool hit;
  };
  std::vector<std::vector<Scored>> per_class(num_classes);
  std::vector<int> gt_count(num_classes, 0);
  EvalReport report;
  for (const EvalVideo& v : videos) {
    if (v.dets.size() != v.gt.size()) throw ValidationError("evaluate: detections and ground truth not aligned");
    for (std::size_t f = 0; f < v.gt.size(); ++f) {
      for (const auto& o : v.gt[f]) {
        if (o.class_id < 0 || o.class_id >= num_classes) {
          throw ValidationError("evaluate: GT class id " + std::to_string(o.class_id) + " out of range");
        }
        ++gt_count[o.class_id];
      }
      FrameDetections kept;
      for (int i : filter_frame(v.dets[f], config.score_threshold, config.nms_threshold)) {
        if (v.dets[f][i].class_id() >= num_classes) {
          throw ValidationError("evaluate: detection class id " + std::to_string(v.dets[f][i].class_id()) +
                                " out of range");
        }
        kept.push_back(v.dets[f][i]);
      }
      const FrameMatch m = match_frame(kept, v.gt[f]);
      for (std::size_t d = 0; d < kept.size(); ++d) {
        per_class[kept[d].class_id()].push_back({kept[d].score(), m.det_to_gt[d] >= 0});
      }
      report.fp += m.false_positives();
      report.fn += m.false_negatives();
      report.tp += static_cast<int>(kept.size()) - m.false_positives();
    }
  }
  double sum = 0.0;
  int present = 0;
  for (int c = 0; c < num_classes; ++c) {
    if (gt_count[c] == 0) {
      report.class_ap.push_back(std::nullopt);
      continue;
    }
    auto& dets = per_class[c];
    std::stable_sort(dets.begin(), dets.end(), [](const Scored& a, const Scored& b) { return a.score > b.score; });
    std::vector<bool> hits;
    for (const auto& d : dets) hits.push_back(d.hit);
    const double ap = average_precision(hits, gt_count[c], config.interpolation);
    report.class_ap.push_back(ap);
    sum += ap;
    ++present;
  }
  report.mAP = present > 0 ? sum / present : 0.0;
  return report;
}

inline EvalReport evaluate_dataset(const Dataset& ds, const EvalConfig& config = {}) {
  std::vector<EvalVideo> videos;
  for (const auto& v : ds.videos) {
    if (!v.gt) throw ValidationError("evaluate: video '" + v.meta.id + "' has no ground truth");
    if (!v.dets) throw ValidationError("evaluate: video '" + v.meta.id + "' has no detections");
    videos.push_back({*v.dets, *v.gt});
  }
  return evaluate(videos, ds.manifest.num_classes(), config);
}

inline json eval_report_json(const EvalReport& r, const std::vector<std::string>& classes) {
  json j;
  j["mAP"] = r.mAP;
  j["tp"] = r.tp;
  j["fp"] = r.fp;
  j["fn"] = r.fn;
  j["class_ap"] = json::object();
  for (std::size_t c = 0; c < r.class_ap.size(); ++c) {
    j["class_ap"][classes[c]] = r.class_ap[c] ? json(*r.class_ap[c]) : json(nullptr);
  }
  return j;
}

}  // namespace tcal

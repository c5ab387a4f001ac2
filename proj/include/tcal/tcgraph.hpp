#pragma once

#include <algorithm>
#include <map>
#include <set>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "tcal/dataset.hpp"
#include "tcal/geometry.hpp"
#include "tcal/tracker.hpp"

namespace tcal {

struct TCConfig {
  double link_threshold = 0.5;     // IoU a tracked box needs to link two detections
  double cluster_threshold = 0.5;  // IoU for clustering unmatched tracked boxes
  double score_threshold = 0.5;    // detections below this never enter the graph
  double nms_threshold = 0.5;
  int window = 3;

  void validate() const {
    auto in_unit = [](double v) { return v > 0.0 && v <= 1.0; };
    if (!in_unit(link_threshold)) throw ValidationError("link threshold must be in (0,1]");
    if (!in_unit(cluster_threshold)) throw ValidationError("cluster threshold must be in (0,1]");
    if (!in_unit(score_threshold)) throw ValidationError("detection score threshold must be in (0,1]");
    if (!in_unit(nms_threshold)) throw ValidationError("NMS threshold must be in (0,1]");
    if (window < 1) throw ValidationError("window must be >= 1");
  }

  TrackerConfig tracker() const { return TrackerConfig{window}; }
};

enum class NodeKind { kDetection, kCandidate };

// Reference to a detection: frame and index into that frame's detection list.
struct DetectionRef {
  int frame = 0;
  int index = 0;
  friend auto operator<=>(const DetectionRef&, const DetectionRef&) = default;
};

struct Node {
  NodeKind kind = NodeKind::kDetection;
  int frame = 0;
  int class_id = 0;
  Box box;
  DetectionRef detection;                 // detection nodes
  std::vector<DetectionRef> originators;  // candidate nodes, sorted and unique

  bool is_detection() const { return kind == NodeKind::kDetection; }
  bool is_candidate() const { return kind == NodeKind::kCandidate; }
};

using Edge = std::pair<int, int>;  // first < second

// Graphical model for one (video, class) pair.
struct TCGraph {
  std::string video_id;
  int class_id = 0;
  std::vector<Node> nodes;
  std::vector<Edge> edges;

  std::size_t size() const { return nodes.size(); }

  // Throws if any structural invariant is broken.
  void validate() const {
    std::set<Edge> seen;
    std::vector<int> degree(nodes.size(), 0);
    for (const auto& [a, b] : edges) {
      if (a < 0 || b < 0 || a >= static_cast<int>(nodes.size()) || b >= static_cast<int>(nodes.size())) {
        throw ValidationError("edge endpoint out of range");
      }
      if (a == b) throw ValidationError("self edge");
      if (a > b) throw ValidationError("edge not normalized");
      if (!seen.insert({a, b}).second) throw ValidationError("duplicate edge");
      if (nodes[a].is_candidate() && nodes[b].is_candidate()) throw ValidationError("candidate-candidate edge");
      if (nodes[a].class_id != nodes[b].class_id) throw ValidationError("cross-class edge");
      ++degree[a];
      ++degree[b];
    }
    for (std::size_t n = 0; n < nodes.size(); ++n) {
      if (nodes[n].is_candidate() && (nodes[n].originators.empty() || degree[n] == 0)) {
        throw ValidationError("candidate without originating detection");
      }
    }
  }
};

// Detections of one frame that survive per-class NMS and the score threshold,
// as indices into the frame's detection list (ascending).
inline std::vector<int> filter_frame(const FrameDetections& dets, double score_thresh, double nms_thresh) {
  std::map<int, std::vector<int>> by_class;
  for (int i = 0; i < static_cast<int>(dets.size()); ++i) by_class[dets[i].class_id()].push_back(i);
  std::vector<int> keep;
  for (const auto& [cls, idx] : by_class) {
    std::vector<ScoredBox> boxes;
    for (int i : idx) boxes.push_back({dets[i].box(), dets[i].score()});
    for (std::size_t k : nms_indices(boxes, nms_thresh)) {
      if (dets[idx[k]].score() >= score_thresh) keep.push_back(idx[k]);
    }
  }
  std::sort(keep.begin(), keep.end());
  return keep;
}

// Applies filter_frame to every frame, returning the surviving detections and
// for each of them its index in the unfiltered list.
struct FilteredDetections {
  std::vector<FrameDetections> frames;
  std::vector<std::vector<int>> original_index;
};

inline FilteredDetections filter_detections(std::span<const FrameDetections> dets, const TCConfig& config) {
  FilteredDetections out;
  for (const auto& frame : dets) {
    auto keep = filter_frame(frame, config.score_threshold, config.nms_threshold);
    FrameDetections kept;
    for (int i : keep) kept.push_back(frame[i]);
    out.frames.push_back(std::move(kept));
    out.original_index.push_back(std::move(keep));
  }
  return out;
}

// Marks which tracked boxes overlap a same-class local detection (IoU > theta)
// and returns the detection-detection links that overlap implies. Links are
// pairs of DetectionRef with the earlier frame first.
struct LinkResult {
  std::set<std::pair<DetectionRef, DetectionRef>> links;
  // matched[j][t] is true when tracked box t of frame j overlaps a local detection.
  std::vector<std::vector<bool>> matched;
};

inline LinkResult link_detections(std::span<const FrameDetections> dets,
                                  std::span<const std::vector<TrackedBox>> tracked, double theta) {
  LinkResult r;
  r.matched.resize(tracked.size());
  for (std::size_t j = 0; j < tracked.size(); ++j) {
    r.matched[j].assign(tracked[j].size(), false);
    for (std::size_t t = 0; t < tracked[j].size(); ++t) {
      const TrackedBox& tb = tracked[j][t];
      for (int l = 0; l < static_cast<int>(dets[j].size()); ++l) {
        const Detection& local = dets[j][l];
        if (local.class_id() != tb.class_id) continue;
        if (iou(local.box(), tb.box) > theta) {
          r.matched[j][t] = true;
          DetectionRef a{tb.source_frame, tb.source_index};
          DetectionRef b{static_cast<int>(j), l};
          if (b < a) std::swap(a, b);
          r.links.insert({a, b});
        }
      }
    }
  }
  return r;
}

// Candidate nodes from the tracked boxes that matched no local detection,
// clustered per frame and class.
inline std::vector<Node> generate_candidates(std::span<const std::vector<TrackedBox>> tracked,
                                             const std::vector<std::vector<bool>>& matched, double cluster_theta) {
  std::vector<Node> out;
  for (std::size_t j = 0; j < tracked.size(); ++j) {
    std::map<int, std::vector<std::size_t>> unmatched_by_class;
    for (std::size_t t = 0; t < tracked[j].size(); ++t) {
      if (!matched[j][t]) unmatched_by_class[tracked[j][t].class_id].push_back(t);
    }
    for (const auto& [cls, members] : unmatched_by_class) {
      std::vector<Box> boxes;
      for (std::size_t t : members) boxes.push_back(tracked[j][t].box);
      for (const auto& cluster : greedy_cluster(boxes, cluster_theta)) {
        Node n{NodeKind::kCandidate, static_cast<int>(j), cls, mean_box(boxes, cluster), {}, {}};
        for (std::size_t m : cluster) {
          const TrackedBox& tb = tracked[j][members[m]];
          n.originators.push_back({tb.source_frame, tb.source_index});
        }
        std::sort(n.originators.begin(), n.originators.end());
        n.originators.erase(std::unique(n.originators.begin(), n.originators.end()), n.originators.end());
        out.push_back(std::move(n));
      }
    }
  }
  return out;
}

// Builds one graph per class present in the video. `dets` must already be
// filtered (see filter_detections); node DetectionRefs index into `dets`.
inline std::vector<TCGraph> build_video_graphs(const std::string& video_id, std::span<const FrameDetections> dets,
                                               const BoxTracker& tracker, const TCConfig& config, double width,
                                               double height) {
  config.validate();
  const auto tracked = propagate_all(dets, tracker, config.tracker(), width, height);
  const LinkResult links = link_detections(dets, tracked, config.link_threshold);
  const std::vector<Node> candidates = generate_candidates(tracked, links.matched, config.cluster_threshold);

  std::map<int, TCGraph> graphs;
  std::map<DetectionRef, int> node_of;
  for (int f = 0; f < static_cast<int>(dets.size()); ++f) {
    for (int k = 0; k < static_cast<int>(dets[f].size()); ++k) {
      const Detection& d = dets[f][k];
      TCGraph& g = graphs[d.class_id()];
      node_of[{f, k}] = static_cast<int>(g.nodes.size());
      g.nodes.push_back(Node{NodeKind::kDetection, f, d.class_id(), d.box(), {f, k}, {}});
    }
  }
  for (const auto& [a, b] : links.links) {
    TCGraph& g = graphs[dets[a.frame][a.index].class_id()];
    g.edges.emplace_back(node_of.at(a), node_of.at(b));
  }
  for (const Node& c : candidates) {
    TCGraph& g = graphs[c.class_id];
    const int id = static_cast<int>(g.nodes.size());
    g.nodes.push_back(c);
    for (const DetectionRef& o : c.originators) g.edges.emplace_back(node_of.at(o), id);
  }
  std::vector<TCGraph> out;
  for (auto& [cls, g] : graphs) {
    g.video_id = video_id;
    g.class_id = cls;
    for (auto& e : g.edges) {
      if (e.first > e.second) std::swap(e.first, e.second);
    }
    std::sort(g.edges.begin(), g.edges.end());
    g.edges.erase(std::unique(g.edges.begin(), g.edges.end()), g.edges.end());
    out.push_back(std::move(g));
  }
  return out;
}

// Debug dump: one {"node": ...} line per node, then one {"edge": [a,b]} per edge.
inline std::string graph_jsonl(const TCGraph& g) {
  std::string out;
  for (std::size_t i = 0; i < g.nodes.size(); ++i) {
    const Node& n = g.nodes[i];
    json j;
    j["id"] = i;
    j["video"] = g.video_id;
    j["kind"] = n.is_detection() ? "detection" : "candidate";
    j["frame"] = n.frame;
    j["class"] = n.class_id;
    j["box"] = {n.box.x_min(), n.box.y_min(), n.box.x_max(), n.box.y_max()};
    if (n.is_detection()) {
      j["detection"] = n.detection.index;
    } else {
      j["originators"] = json::array();
      for (const auto& o : n.originators) j["originators"].push_back({o.frame, o.index});
    }
    out += json{{"node", j}}.dump() + "\n";
  }
  for (const auto& [a, b] : g.edges) out += json{{"edge", {a, b}}}.dump() + "\n";
  return out;
}

}  // namespace tcal

#pragma once

#include <vector>

#include "tcal/tcal.hpp"

namespace tcal::testing {

// Detection with `score` on `cls`, the rest on background.
inline Detection make_det(const Box& box, int cls, double score, int num_classes = 1) {
  std::vector<double> s(num_classes + 1, 0.0);
  s[cls] = score;
  s[num_classes] = 1.0 - score;
  return Detection(box, s);
}

inline VideoData make_video(const std::string& id, int frames, int width = 320, int height = 240) {
  VideoData v;
  v.meta = VideoMeta{id, frames, width, height, 25.0};
  v.dets = std::vector<FrameDetections>(frames);
  v.gt = std::vector<FrameGroundTruth>(frames);
  std::vector<MotionField> motion;
  for (int t = 0; t + 1 < frames; ++t) motion.push_back(MotionField::zeros(t, width, height, 16));
  v.motion = motion;
  return v;
}

inline Dataset make_dataset(std::vector<VideoData> videos, std::vector<std::string> classes = {"object"}) {
  Dataset ds;
  ds.manifest.name = "fixture";
  ds.manifest.classes = std::move(classes);
  for (const auto& v : videos) ds.manifest.videos.push_back(v.meta);
  ds.videos = std::move(videos);
  return ds;
}

// Hand-built graphs for the canonical energy scenarios.
inline Node det_node(int frame) { return Node{NodeKind::kDetection, frame, 0, Box(0, 0, 10, 10), {frame, 0}, {}}; }
inline Node cand_node(int frame, std::vector<DetectionRef> origin) {
  return Node{NodeKind::kCandidate, frame, 0, Box(0, 0, 10, 10), {}, std::move(origin)};
}

// One detection in frame 1 with a spawned candidate in frames 0 and 2.
inline TCGraph flicker_graph() {
  TCGraph g;
  g.nodes = {det_node(1), cand_node(0, {{1, 0}}), cand_node(2, {{1, 0}})};
  g.edges = {{0, 1}, {0, 2}};
  return g;
}

// Detections in frames 0 and 2, a candidate in frame 1 linked to both.
inline TCGraph gap_graph() {
  TCGraph g;
  g.nodes = {det_node(0), det_node(2), cand_node(1, {{0, 0}, {2, 0}})};
  g.edges = {{0, 2}, {1, 2}};
  return g;
}

// One detection, one candidate.
inline TCGraph tie_graph() {
  TCGraph g;
  g.nodes = {det_node(0), cand_node(1, {{0, 0}})};
  g.edges = {{0, 1}};
  return g;
}

// Four frames, zero motion: a static object detected in frames 0, 1 and 3
// (missed in 2) plus an isolated detection in frame 1 elsewhere.
inline VideoData figure2_video() {
  VideoData v = make_video("fig2", 4);
  (*v.dets)[0].push_back(make_det(Box(10, 10, 50, 50), 0, 0.9));
  (*v.dets)[1].push_back(make_det(Box(10, 10, 50, 50), 0, 0.9));
  (*v.dets)[1].push_back(make_det(Box(200, 100, 240, 140), 0, 0.8));
  (*v.dets)[3].push_back(make_det(Box(10, 10, 50, 50), 0, 0.9));
  return v;
}

// Seven frames, a single detection in frame 3: every neighbor frame within
// the window gets a candidate.
inline VideoData flicker_video() {
  VideoData v = make_video("flicker", 7);
  (*v.dets)[3].push_back(make_det(Box(100, 100, 140, 140), 0, 0.9));
  return v;
}

// Random graph respecting the construction rules: candidates connect only to
// detections, every candidate has at least one edge.
inline TCGraph random_graph(Rng& rng, int max_nodes) {
  TCGraph g;
  const int n = 1 + static_cast<int>(rng.below(max_nodes));
  std::vector<int> dets;
  for (int i = 0; i < n; ++i) {
    const bool candidate = i > 0 && rng.uniform() < 0.4;
    if (candidate) {
      g.nodes.push_back(cand_node(i, {}));
    } else {
      g.nodes.push_back(det_node(i));
      dets.push_back(i);
    }
  }
  const double p = rng.uniform(0.1, 0.7);
  std::set<Edge> edges;
  for (int a = 0; a < n; ++a) {
    for (int b = a + 1; b < n; ++b) {
      if (g.nodes[a].is_detection() && g.nodes[b].is_detection() && rng.uniform() < p) edges.insert({a, b});
    }
  }
  for (int i = 0; i < n; ++i) {
    if (!g.nodes[i].is_candidate()) continue;
    const int links = 1 + static_cast<int>(rng.below(3));
    for (int l = 0; l < links; ++l) {
      const int d = dets[rng.below(dets.size())];
      edges.insert({std::min(d, i), std::max(d, i)});
      g.nodes[i].originators.push_back({d, 0});
    }
    std::sort(g.nodes[i].originators.begin(), g.nodes[i].originators.end());
    g.nodes[i].originators.erase(std::unique(g.nodes[i].originators.begin(), g.nodes[i].originators.end()),
                                 g.nodes[i].originators.end());
  }
  g.edges.assign(edges.begin(), edges.end());
  return g;
}

inline bool labels_feasible(const TCGraph& g, const LabelSolution& s) {
  for (std::size_t n = 0; n < g.nodes.size(); ++n) {
    if (!label_allowed(g.nodes[n], s.labels[n])) return false;
  }
  return true;
}

}  // namespace tcal::testing

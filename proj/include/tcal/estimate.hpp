#pragma once

#include <filesystem>
#include <memory>
#include <string>
#include <vector>

#include "tcal/dataset.hpp"
#include "tcal/energy.hpp"
#include "tcal/parallel.hpp"
#include "tcal/tcgraph.hpp"
#include "tcal/tracker.hpp"

namespace tcal {

struct ClassBox {
  int class_id = 0;
  Box box;
};

struct FrameErrorReport {
  int fp = 0;
  int fn = 0;
  std::vector<ClassBox> fp_boxes;
  std::vector<ClassBox> fn_boxes;
};

struct VideoErrors {
  std::string video_id;
  std::vector<FrameErrorReport> frames;
};

struct EstimateResult {
  std::vector<VideoErrors> videos;
  std::vector<TCGraph> graphs;
  std::vector<LabelSolution> solutions;  // parallel to graphs
};

// Builds every (video, class) graph of one video from its raw detections.
inline std::vector<TCGraph> build_graphs_for_video(const VideoData& v, const TCConfig& config,
                                                   const BoxTracker* tracker = nullptr) {
  if (!v.dets) throw ValidationError("video '" + v.meta.id + "' has no detections");
  const FilteredDetections filtered = filter_detections(*v.dets, config);
  std::unique_ptr<MotionFieldTracker> own;
  if (tracker == nullptr) {
    static const std::vector<MotionField> kNoMotion;
    if (!v.motion && v.meta.num_frames > 1) {
      throw ValidationError("video '" + v.meta.id + "' has no motion fields");
    }
    own = std::make_unique<MotionFieldTracker>(v.motion ? std::span<const MotionField>(*v.motion)
                                                        : std::span<const MotionField>(kNoMotion));
    tracker = own.get();
  }
  auto graphs = build_video_graphs(v.meta.id, filtered.frames, *tracker, config, v.meta.width, v.meta.height);
  // Point detection nodes back at the unfiltered detection lists.
  for (auto& g : graphs) {
    for (auto& n : g.nodes) {
      if (n.is_detection()) {
        n.detection.index = filtered.original_index[n.detection.frame][n.detection.index];
      } else {
        for (auto& o : n.originators) o.index = filtered.original_index[o.frame][o.index];
      }
    }
  }
  return graphs;
}

// Full error estimation over a dataset: graphs are built per video and solved
// per (video, class) component, each stage on up to `jobs` threads.
inline EstimateResult estimate_errors(const Dataset& ds, const TCConfig& config, const EnergyModel& model = {},
                                      int jobs = 1) {
  config.validate();
  model.validate();
  const std::size_t nv = ds.videos.size();
  std::vector<std::vector<TCGraph>> per_video(nv);
  parallel_for(nv, jobs, [&](std::size_t i) { per_video[i] = build_graphs_for_video(ds.videos[i], config); });

  EstimateResult r;
  std::vector<std::size_t> graph_video;
  for (std::size_t i = 0; i < nv; ++i) {
    for (auto& g : per_video[i]) {
      r.graphs.push_back(std::move(g));
      graph_video.push_back(i);
    }
  }
  r.solutions.resize(r.graphs.size());
  parallel_for(r.graphs.size(), jobs, [&](std::size_t i) { r.solutions[i] = solve(r.graphs[i], model); });

  for (const auto& v : ds.videos) r.videos.push_back({v.meta.id, std::vector<FrameErrorReport>(v.meta.num_frames)});
  for (std::size_t i = 0; i < r.graphs.size(); ++i) {
    const TCGraph& g = r.graphs[i];
    auto& frames = r.videos[graph_video[i]].frames;
    for (std::size_t n = 0; n < g.nodes.size(); ++n) {
      const Node& node = g.nodes[n];
      FrameErrorReport& fr = frames[node.frame];
      if (r.solutions[i].labels[n] == Label::kFP) {
        ++fr.fp;
        fr.fp_boxes.push_back({node.class_id, node.box});
      } else if (r.solutions[i].labels[n] == Label::kFN) {
        ++fr.fn;
        fr.fn_boxes.push_back({node.class_id, node.box});
      }
    }
  }
  return r;
}

inline std::string errors_jsonl(const VideoErrors& ve) {
  auto boxes = [](const std::vector<ClassBox>& bs) {
    std::string s = "[";
    for (std::size_t i = 0; i < bs.size(); ++i) {
      if (i) s += ',';
      s += "{\"class\":" + std::to_string(bs[i].class_id) + ",\"box\":" + detail::box_json(bs[i].box) + "}";
    }
    return s + "]";
  };
  std::string out;
  for (std::size_t f = 0; f < ve.frames.size(); ++f) {
    const auto& fr = ve.frames[f];
    out += "{\"frame\":" + std::to_string(f) + ",\"fp\":" + std::to_string(fr.fp) + ",\"fn\":" +
           std::to_string(fr.fn) + ",\"fp_boxes\":" + boxes(fr.fp_boxes) + ",\"fn_boxes\":" + boxes(fr.fn_boxes) +
           "}\n";
  }
  return out;
}

inline void save_errors(const std::vector<VideoErrors>& videos, const fs::path& dir) {
  std::error_code ec;
  fs::create_directories(dir, ec);
  if (ec) throw IoError("cannot create " + dir.string() + ": " + ec.message());
  for (const auto& v : videos) detail::write_text(dir / (v.video_id + ".jsonl"), errors_jsonl(v));
}

// Reads errors/<id>.jsonl; only the counts are needed for acquisition, the
// boxes are parsed and validated as well.
inline VideoErrors load_errors(const fs::path& file, const VideoMeta& meta) {
  VideoErrors ve{meta.id, std::vector<FrameErrorReport>(meta.num_frames)};
  detail::for_each_jsonl(file, [&](const json& j, const detail::LineContext& ctx) {
    const int frame = detail::frame_of(j, meta, ctx);
    FrameErrorReport& fr = ve.frames[frame];
    if (!j.contains("fp") || !j["fp"].is_number_integer() || !j.contains("fn") || !j["fn"].is_number_integer()) {
      detail::fail(ctx, "missing integer 'fp'/'fn'");
    }
    fr.fp = j["fp"].get<int>();
    fr.fn = j["fn"].get<int>();
    for (const char* key : {"fp_boxes", "fn_boxes"}) {
      if (!j.contains(key)) continue;
      for (const auto& b : j[key]) {
        if (!b.is_object() || !b.contains("class") || !b.contains("box")) detail::fail(ctx, "bad error box entry");
        ClassBox cb{b["class"].get<int>(), detail::parse_box(b["box"], ctx)};
        (std::string(key) == "fp_boxes" ? fr.fp_boxes : fr.fn_boxes).push_back(cb);
      }
    }
  });
  return ve;
}

}  // namespace tcal

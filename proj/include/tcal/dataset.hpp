#pragma once

#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <map>
#include <optional>
#include <set>
#include <span>
#include <sstream>
#include <string>
#include <vector>

#include <json.hpp>

#include "tcal/error.hpp"
#include "tcal/geometry.hpp"

namespace tcal {

namespace fs = std::filesystem;
using json = nlohmann::json;

inline constexpr double kScoreSumTolerance = 1e-6;

struct VideoMeta {
  std::string id;
  int num_frames = 1;
  int width = 1;
  int height = 1;
  double fps = 25.0;

  friend bool operator==(const VideoMeta&, const VideoMeta&) = default;
};

struct DatasetManifest {
  std::string name;
  std::vector<std::string> classes;
  std::vector<VideoMeta> videos;

  int num_classes() const { return static_cast<int>(classes.size()); }

  void validate() const {
    if (classes.empty()) throw ValidationError("manifest: classes must be non-empty");
    std::set<std::string> ids;
    for (const auto& v : videos) {
      if (v.id.empty()) throw ValidationError("manifest: empty video id");
      if (!ids.insert(v.id).second) throw ValidationError("manifest: duplicate video id '" + v.id + "'");
      if (v.num_frames < 1) throw ValidationError("manifest: video '" + v.id + "' has num_frames < 1");
      if (v.width < 1 || v.height < 1) {
        throw ValidationError("manifest: video '" + v.id + "' has non-positive size");
      }
      if (!(v.fps > 0.0) || !std::isfinite(v.fps)) {
        throw ValidationError("manifest: video '" + v.id + "' has invalid fps");
      }
    }
  }

  friend bool operator==(const DatasetManifest&, const DatasetManifest&) = default;
};

struct GroundTruthObject {
  int track_id = 0;
  int class_id = 0;
  Box box;

  friend bool operator==(const GroundTruthObject&, const GroundTruthObject&) = default;
};

// A detector output: box plus a probability vector over the foreground
// classes followed by one background entry.
class Detection {
 public:
  Detection(Box box, std::vector<double> scores) : box_(box), scores_(std::move(scores)) {
    if (scores_.size() < 2) {
      throw ValidationError("detection scores need at least one class plus background");
    }
    double sum = 0.0;
    for (double p : scores_) {
      if (!std::isfinite(p) || p < 0.0) throw ValidationError("detection score is negative or non-finite");
      sum += p;
    }
    if (std::abs(sum - 1.0) > kScoreSumTolerance) {
      std::ostringstream os;
      os << "detection scores sum to " << sum << ", not 1";
      throw ValidationError(os.str());
    }
    class_id_ = 0;
    for (int c = 1; c < num_classes(); ++c) {
      if (scores_[c] > scores_[class_id_]) class_id_ = c;
    }
  }

  const Box& box() const { return box_; }
  const std::vector<double>& scores() const { return scores_; }
  int num_classes() const { return static_cast<int>(scores_.size()) - 1; }
  int class_id() const { return class_id_; }
  double score() const { return scores_[class_id_]; }
  double background() const { return scores_.back(); }

  friend bool operator==(const Detection&, const Detection&) = default;

 private:
  Box box_;
  std::vector<double> scores_;
  int class_id_ = 0;
};

struct Vec2 {
  double dx = 0.0;
  double dy = 0.0;
  friend bool operator==(const Vec2&, const Vec2&) = default;
};

// Displacements on a coarse grid for frame t -> t+1 (and optionally t+1 -> t).
struct MotionField {
  int frame_index = 0;
  int cell_size = 16;
  int cols = 0;
  int rows = 0;
  std::vector<Vec2> fwd;
  std::optional<std::vector<Vec2>> bwd;

  static int grid_cols(int width, int cell) { return (width + cell - 1) / cell; }
  static int grid_rows(int height, int cell) { return (height + cell - 1) / cell; }

  static MotionField zeros(int frame, int width, int height, int cell) {
    MotionField m;
    m.frame_index = frame;
    m.cell_size = cell;
    m.cols = grid_cols(width, cell);
    m.rows = grid_rows(height, cell);
    m.fwd.assign(static_cast<std::size_t>(m.cols) * m.rows, Vec2{});
    return m;
  }

  static MotionField uniform(int frame, int width, int height, int cell, Vec2 v) {
    MotionField m = zeros(frame, width, height, cell);
    std::fill(m.fwd.begin(), m.fwd.end(), v);
    return m;
  }

  std::size_t cell_index(double x, double y) const {
    const int c = std::clamp(static_cast<int>(std::floor(x / cell_size)), 0, cols - 1);
    const int r = std::clamp(static_cast<int>(std::floor(y / cell_size)), 0, rows - 1);
    return static_cast<std::size_t>(r) * cols + c;
  }

  Vec2 forward_at(double x, double y) const { return fwd[cell_index(x, y)]; }

  // Backward vectors fall back to the negated forward vector at the query point.
  Vec2 backward_at(double x, double y) const {
    if (bwd) return (*bwd)[cell_index(x, y)];
    const Vec2 f = forward_at(x, y);
    return Vec2{-f.dx, -f.dy};
  }

  friend bool operator==(const MotionField&, const MotionField&) = default;
};

using FrameGroundTruth = std::vector<GroundTruthObject>;
using FrameDetections = std::vector<Detection>;

struct VideoData {
  VideoMeta meta;
  std::optional<std::vector<FrameGroundTruth>> gt;
  std::optional<std::vector<FrameDetections>> dets;
  // One field per consecutive frame pair (num_frames - 1 entries).
  std::optional<std::vector<MotionField>> motion;

  friend bool operator==(const VideoData&, const VideoData&) = default;
};

struct Dataset {
  DatasetManifest manifest;
  std::vector<VideoData> videos;

  const VideoData& video(const std::string& id) const {
    for (const auto& v : videos) {
      if (v.meta.id == id) return v;
    }
    throw ValidationError("unknown video id '" + id + "'");
  }

  friend bool operator==(const Dataset&, const Dataset&) = default;
};

// Rounds to the 6-decimal grid used by the text formats, so that saved values
// reload bit-identically.
inline double quantize(double v) {
  const double q = std::round(v * 1e6) / 1e6;
  return q == 0.0 ? 0.0 : q;
}

inline Box quantize(const Box& b) {
  return Box(quantize(b.x_min()), quantize(b.y_min()), quantize(b.x_max()), quantize(b.y_max()));
}

// Converts an arbitrary non-negative weight vector into a probability vector
// whose entries lie on the 1e-6 grid and sum to exactly one million micro
// units (largest-remainder rounding).
inline std::vector<double> quantize_distribution(std::span<const double> weights) {
  double total = 0.0;
  for (double w : weights) total += w;
  if (!(total > 0.0)) throw ValidationError("distribution has zero mass");
  constexpr long long kUnits = 1'000'000;
  std::vector<long long> micro(weights.size());
  std::vector<std::pair<double, std::size_t>> remainders;
  long long assigned = 0;
  for (std::size_t i = 0; i < weights.size(); ++i) {
    const double exact = weights[i] / total * kUnits;
    micro[i] = static_cast<long long>(std::floor(exact));
    assigned += micro[i];
    remainders.emplace_back(exact - static_cast<double>(micro[i]), i);
  }
  std::stable_sort(remainders.begin(), remainders.end(),
                   [](const auto& a, const auto& b) { return a.first > b.first; });
  for (std::size_t r = 0; assigned < kUnits; ++r, ++assigned) ++micro[remainders[r % remainders.size()].second];
  std::vector<double> out(weights.size());
  for (std::size_t i = 0; i < weights.size(); ++i) out[i] = static_cast<double>(micro[i]) / kUnits;
  return out;
}

namespace detail {

inline std::string fmt6(double v) {
  char buf[64];
  std::snprintf(buf, sizeof(buf), "%.6f", v);
  std::string s(buf);
  if (s == "-0.000000") s = "0.000000";
  return s;
}

inline std::string box_json(const Box& b) {
  return "[" + fmt6(b.x_min()) + "," + fmt6(b.y_min()) + "," + fmt6(b.x_max()) + "," + fmt6(b.y_max()) + "]";
}

inline std::string vec_list_json(const std::vector<Vec2>& vs) {
  std::string s = "[";
  for (std::size_t i = 0; i < vs.size(); ++i) {
    if (i) s += ',';
    s += "[" + fmt6(vs[i].dx) + "," + fmt6(vs[i].dy) + "]";
  }
  return s + "]";
}

struct LineContext {
  std::string file;
  int line = 0;
  std::string where() const { return file + ":" + std::to_string(line); }
};

[[noreturn]] inline void fail(const LineContext& ctx, const std::string& msg) {
  throw ValidationError(ctx.where() + ": " + msg);
}

inline Box parse_box(const json& j, const LineContext& ctx) {
  if (!j.is_array() || j.size() != 4) fail(ctx, "box must be an array of 4 numbers");
  for (const auto& v : j) {
    if (!v.is_number()) fail(ctx, "box must be an array of 4 numbers");
  }
  try {
    return Box(j[0].get<double>(), j[1].get<double>(), j[2].get<double>(), j[3].get<double>());
  } catch (const ValidationError& e) {
    fail(ctx, e.what());
  }
}

inline std::vector<Vec2> parse_vec_list(const json& j, std::size_t expected, const LineContext& ctx,
                                        const char* key) {
  if (!j.is_array()) fail(ctx, std::string(key) + " must be an array");
  if (j.size() != expected) {
    fail(ctx, std::string(key) + " has " + std::to_string(j.size()) + " cells, expected " +
                  std::to_string(expected));
  }
  std::vector<Vec2> out;
  out.reserve(expected);
  for (const auto& v : j) {
    if (!v.is_array() || v.size() != 2 || !v[0].is_number() || !v[1].is_number()) {
      fail(ctx, std::string(key) + " entries must be [dx,dy]");
    }
    const Vec2 vec{v[0].get<double>(), v[1].get<double>()};
    if (!std::isfinite(vec.dx) || !std::isfinite(vec.dy)) fail(ctx, "non-finite motion vector");
    out.push_back(vec);
  }
  return out;
}

// Calls fn(json, ctx) for every non-blank line of a JSONL file.
template <typename Fn>
void for_each_jsonl(const fs::path& path, Fn&& fn) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open " + path.string());
  std::string line;
  LineContext ctx{path.string(), 0};
  while (std::getline(in, line)) {
    ++ctx.line;
    if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
    json j;
    try {
      j = json::parse(line);
    } catch (const json::parse_error& e) {
      fail(ctx, std::string("malformed JSON: ") + e.what());
    }
    if (!j.is_object()) fail(ctx, "line must be a JSON object");
    fn(j, ctx);
  }
}

inline int frame_of(const json& j, const VideoMeta& meta, const LineContext& ctx) {
  if (!j.contains("frame") || !j["frame"].is_number_integer()) fail(ctx, "missing integer 'frame'");
  const int frame = j["frame"].get<int>();
  if (frame < 0 || frame >= meta.num_frames) {
    fail(ctx, "frame " + std::to_string(frame) + " outside video '" + meta.id + "' of " +
                  std::to_string(meta.num_frames) + " frames");
  }
  return frame;
}

inline void write_text(const fs::path& path, const std::string& text) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw IoError("cannot write " + path.string());
  out << text;
  if (!out) throw IoError("write failed for " + path.string());
}

}  // namespace detail

inline DatasetManifest load_manifest(const fs::path& root) {
  const fs::path path = root / "dataset.json";
  std::ifstream in(path);
  if (!in) throw IoError("cannot open " + path.string());
  json j;
  try {
    j = json::parse(in);
  } catch (const json::parse_error& e) {
    throw ValidationError(path.string() + ": malformed JSON: " + e.what());
  }
  DatasetManifest m;
  try {
    m.name = j.at("name").get<std::string>();
    m.classes = j.at("classes").get<std::vector<std::string>>();
    for (const auto& v : j.at("videos")) {
      VideoMeta meta;
      meta.id = v.at("id").get<std::string>();
      meta.num_frames = v.at("num_frames").get<int>();
      meta.width = v.at("width").get<int>();
      meta.height = v.at("height").get<int>();
      meta.fps = v.at("fps").get<double>();
      m.videos.push_back(meta);
    }
  } catch (const json::exception& e) {
    throw ValidationError(path.string() + ": " + e.what());
  }
  try {
    m.validate();
  } catch (const ValidationError& e) {
    throw ValidationError(path.string() + ": " + e.what());
  }
  return m;
}

inline std::vector<FrameGroundTruth> load_ground_truth(const fs::path& file, const VideoMeta& meta,
                                                       int num_classes) {
  std::vector<FrameGroundTruth> frames(meta.num_frames);
  std::vector<bool> seen(meta.num_frames, false);
  detail::for_each_jsonl(file, [&](const json& j, const detail::LineContext& ctx) {
    const int frame = detail::frame_of(j, meta, ctx);
    if (seen[frame]) detail::fail(ctx, "duplicate frame " + std::to_string(frame));
    seen[frame] = true;
    if (!j.contains("objects") || !j["objects"].is_array()) detail::fail(ctx, "missing 'objects' array");
    for (const auto& o : j["objects"]) {
      if (!o.is_object() || !o.contains("track_id") || !o["track_id"].is_number_integer() ||
          !o.contains("class") || !o["class"].is_number_integer() || !o.contains("box")) {
        detail::fail(ctx, "object needs integer 'track_id', integer 'class' and 'box'");
      }
      const int cls = o["class"].get<int>();
      if (cls < 0 || cls >= num_classes) detail::fail(ctx, "class id " + std::to_string(cls) + " out of range");
      frames[frame].push_back({o["track_id"].get<int>(), cls, detail::parse_box(o["box"], ctx)});
    }
  });
  return frames;
}

inline std::vector<FrameDetections> load_detections(const fs::path& file, const VideoMeta& meta,
                                                    int num_classes) {
  std::vector<FrameDetections> frames(meta.num_frames);
  std::vector<bool> seen(meta.num_frames, false);
  detail::for_each_jsonl(file, [&](const json& j, const detail::LineContext& ctx) {
    const int frame = detail::frame_of(j, meta, ctx);
    if (seen[frame]) detail::fail(ctx, "duplicate frame " + std::to_string(frame));
    seen[frame] = true;
    if (!j.contains("detections") || !j["detections"].is_array()) {
      detail::fail(ctx, "missing 'detections' array");
    }
    for (const auto& d : j["detections"]) {
      if (!d.is_object() || !d.contains("box") || !d.contains("scores") || !d["scores"].is_array()) {
        detail::fail(ctx, "detection needs 'box' and 'scores'");
      }
      std::vector<double> scores;
      for (const auto& s : d["scores"]) {
        if (!s.is_number()) detail::fail(ctx, "scores must be numbers");
        scores.push_back(s.get<double>());
      }
      if (static_cast<int>(scores.size()) != num_classes + 1) {
        detail::fail(ctx, "frame " + std::to_string(frame) + ": expected " + std::to_string(num_classes + 1) +
                              " scores (classes + background), got " + std::to_string(scores.size()));
      }
      const Box box = detail::parse_box(d["box"], ctx);
      try {
        frames[frame].emplace_back(box, std::move(scores));
      } catch (const ValidationError& e) {
        detail::fail(ctx, "frame " + std::to_string(frame) + ": " + e.what());
      }
    }
  });
  return frames;
}

inline std::vector<MotionField> load_motion(const fs::path& file, const VideoMeta& meta) {
  std::vector<std::optional<MotionField>> fields(std::max(meta.num_frames - 1, 0));
  detail::for_each_jsonl(file, [&](const json& j, const detail::LineContext& ctx) {
    const int frame = detail::frame_of(j, meta, ctx);
    if (frame >= meta.num_frames - 1) detail::fail(ctx, "motion frame " + std::to_string(frame) + " has no successor");
    if (fields[frame]) detail::fail(ctx, "duplicate motion frame " + std::to_string(frame));
    if (!j.contains("cell") || !j["cell"].is_number_integer() || j["cell"].get<int>() < 1) {
      detail::fail(ctx, "missing positive integer 'cell'");
    }
    MotionField m = MotionField::zeros(frame, meta.width, meta.height, j["cell"].get<int>());
    if (!j.contains("fwd")) detail::fail(ctx, "missing 'fwd'");
    m.fwd = detail::parse_vec_list(j["fwd"], m.fwd.size(), ctx, "fwd");
    if (j.contains("bwd")) m.bwd = detail::parse_vec_list(j["bwd"], m.fwd.size(), ctx, "bwd");
    fields[frame] = std::move(m);
  });
  std::vector<MotionField> out;
  for (std::size_t t = 0; t < fields.size(); ++t) {
    if (!fields[t]) {
      throw ValidationError(file.string() + ": missing motion for frame pair " + std::to_string(t) + "->" +
                            std::to_string(t + 1));
    }
    out.push_back(std::move(*fields[t]));
  }
  return out;
}

// Loads dataset.json plus whichever of gt/, det/ and motion/ exist under
// `root`. A present directory must hold a file for every video.
inline Dataset load_dataset(const fs::path& root) {
  Dataset ds;
  ds.manifest = load_manifest(root);
  const int nc = ds.manifest.num_classes();
  for (const auto& meta : ds.manifest.videos) {
    VideoData v;
    v.meta = meta;
    const std::string file = meta.id + ".jsonl";
    if (fs::is_directory(root / "gt")) v.gt = load_ground_truth(root / "gt" / file, meta, nc);
    if (fs::is_directory(root / "det")) v.dets = load_detections(root / "det" / file, meta, nc);
    if (fs::is_directory(root / "motion")) v.motion = load_motion(root / "motion" / file, meta);
    ds.videos.push_back(std::move(v));
  }
  return ds;
}

// Loads detections for every manifest video from `dir/<id>.jsonl`.
inline void attach_detections(Dataset& ds, const fs::path& dir) {
  for (auto& v : ds.videos) {
    v.dets = load_detections(dir / (v.meta.id + ".jsonl"), v.meta, ds.manifest.num_classes());
  }
}

inline std::string ground_truth_jsonl(const std::vector<FrameGroundTruth>& frames) {
  std::string out;
  for (std::size_t f = 0; f < frames.size(); ++f) {
    out += "{\"frame\":" + std::to_string(f) + ",\"objects\":[";
    for (std::size_t i = 0; i < frames[f].size(); ++i) {
      const auto& o = frames[f][i];
      if (i) out += ',';
      out += "{\"track_id\":" + std::to_string(o.track_id) + ",\"class\":" + std::to_string(o.class_id) +
             ",\"box\":" + detail::box_json(o.box) + "}";
    }
    out += "]}\n";
  }
  return out;
}

inline std::string detections_jsonl(const std::vector<FrameDetections>& frames) {
  std::string out;
  for (std::size_t f = 0; f < frames.size(); ++f) {
    out += "{\"frame\":" + std::to_string(f) + ",\"detections\":[";
    for (std::size_t i = 0; i < frames[f].size(); ++i) {
      const auto& d = frames[f][i];
      if (i) out += ',';
      out += "{\"box\":" + detail::box_json(d.box()) + ",\"scores\":[";
      for (std::size_t s = 0; s < d.scores().size(); ++s) {
        if (s) out += ',';
        out += detail::fmt6(d.scores()[s]);
      }
      out += "]}";
    }
    out += "]}\n";
  }
  return out;
}

inline std::string motion_jsonl(const std::vector<MotionField>& fields) {
  std::string out;
  for (const auto& m : fields) {
    out += "{\"frame\":" + std::to_string(m.frame_index) + ",\"cell\":" + std::to_string(m.cell_size) +
           ",\"fwd\":" + detail::vec_list_json(m.fwd);
    if (m.bwd) out += ",\"bwd\":" + detail::vec_list_json(*m.bwd);
    out += "}\n";
  }
  return out;
}

inline void save_manifest(const DatasetManifest& m, const fs::path& root) {
  json j;
  j["name"] = m.name;
  j["classes"] = m.classes;
  j["videos"] = json::array();
  for (const auto& v : m.videos) {
    j["videos"].push_back(
        {{"id", v.id}, {"num_frames", v.num_frames}, {"width", v.width}, {"height", v.height}, {"fps", v.fps}});
  }
  detail::write_text(root / "dataset.json", j.dump(2) + "\n");
}

inline void save_detections(const Dataset& ds, const fs::path& dir) {
  std::error_code ec;
  fs::create_directories(dir, ec);
  if (ec) throw IoError("cannot create " + dir.string() + ": " + ec.message());
  for (const auto& v : ds.videos) {
    if (v.dets) detail::write_text(dir / (v.meta.id + ".jsonl"), detections_jsonl(*v.dets));
  }
}

// Writes the dataset under `root`. Numbers are written with six fractional
// digits; values already on that grid (see quantize) reload exactly.
inline void save_dataset(const Dataset& ds, const fs::path& root) {
  ds.manifest.validate();
  std::error_code ec;
  fs::create_directories(root, ec);
  if (ec) throw IoError("cannot create " + root.string() + ": " + ec.message());
  save_manifest(ds.manifest, root);
  auto ensure_dir = [&](const fs::path& dir) {
    fs::create_directories(dir, ec);
    if (ec) throw IoError("cannot create " + dir.string() + ": " + ec.message());
  };
  for (const auto& v : ds.videos) {
    const std::string file = v.meta.id + ".jsonl";
    if (v.gt) {
      ensure_dir(root / "gt");
      detail::write_text(root / "gt" / file, ground_truth_jsonl(*v.gt));
    }
    if (v.dets) {
      ensure_dir(root / "det");
      detail::write_text(root / "det" / file, detections_jsonl(*v.dets));
    }
    if (v.motion) {
      ensure_dir(root / "motion");
      detail::write_text(root / "motion" / file, motion_jsonl(*v.motion));
    }
  }
}

}  // namespace tcal

#pragma once

#include <filesystem>
#include <fstream>
#include <set>
#include <string>
#include <vector>

#include <json.hpp>

#include "tcal/simulator.hpp"

namespace tcal {

namespace config_detail {

// Reads fields out of a JSON object and rejects keys nobody asked for.
class Reader {
 public:
  Reader(const json& j, std::string where) : j_(j), where_(std::move(where)) {
    if (!j_.is_object()) throw ValidationError(where_ + ": expected an object");
  }

  template <typename T>
  void field(const char* key, T& value) {
    seen_.insert(key);
    if (!j_.contains(key)) return;
    try {
      read(j_.at(key), value, where_ + "." + key);
    } catch (const json::exception& e) {
      throw ValidationError(where_ + "." + key + ": " + e.what());
    }
  }

  void finish() const {
    for (const auto& [k, v] : j_.items()) {
      if (!seen_.count(k)) throw ValidationError(where_ + ": unknown key '" + k + "'");
    }
  }

 private:
  template <typename T>
  static void read(const json& j, T& value, const std::string& where);

  const json& j_;
  std::string where_;
  std::set<std::string> seen_;
};

class Writer {
 public:
  template <typename T>
  void field(const char* key, const T& value);
  json result = json::object();
};

}  // namespace config_detail

// Field lists, shared by reading and writing.
template <typename V>
void visit_fields(ClassSpec& c, V& v) {
  v.field("name", c.name);
  v.field("aspect", c.aspect);
}

template <typename V>
void visit_fields(Stratum& s, V& v) {
  v.field("name", s.name);
  v.field("weight", s.weight);
  v.field("spawn_prob", s.spawn_prob);
}

template <typename V>
void visit_fields(WorldConfig& w, V& v) {
  v.field("seed", w.seed);
  v.field("num_videos", w.num_videos);
  v.field("min_frames", w.min_frames);
  v.field("max_frames", w.max_frames);
  v.field("width", w.width);
  v.field("height", w.height);
  v.field("fps", w.fps);
  v.field("classes", w.classes);
  v.field("strata", w.strata);
  v.field("test_fraction", w.test_fraction);
  v.field("min_size", w.min_size);
  v.field("max_size", w.max_size);
  v.field("min_speed", w.min_speed);
  v.field("max_speed", w.max_speed);
  v.field("max_turn", w.max_turn);
  v.field("min_lifetime", w.min_lifetime);
  v.field("max_lifetime", w.max_lifetime);
  v.field("cell_size", w.cell_size);
  v.field("motion_noise", w.motion_noise);
  v.field("max_overlap", w.max_overlap);
}

template <typename V>
void visit_fields(DetectorParams& d, V& v) {
  v.field("kappa", d.kappa);
  v.field("p_miss_max", d.p_miss_max);
  v.field("p_miss_min", d.p_miss_min);
  v.field("fp_rate_max", d.fp_rate_max);
  v.field("fp_rate_min", d.fp_rate_min);
  v.field("sigma_max", d.sigma_max);
  v.field("sigma_min", d.sigma_min);
  v.field("flicker", d.flicker);
  v.field("conf_min", d.conf_min);
  v.field("conf_max", d.conf_max);
  v.field("conf_noise", d.conf_noise);
  v.field("fp_conf", d.fp_conf);
  v.field("fp_conf_noise", d.fp_conf_noise);
  v.field("min_run", d.min_run);
  v.field("max_run", d.max_run);
}

template <typename V>
void visit_fields(LearningModel& l, V& v) {
  v.field("redundancy_radius", l.redundancy_radius);
  v.field("empty_weight", l.empty_weight);
  v.field("error_weight", l.error_weight);
}

template <typename V>
void visit_fields(TCConfig& t, V& v) {
  v.field("theta", t.link_threshold);
  v.field("cluster_theta", t.cluster_threshold);
  v.field("tau_det", t.score_threshold);
  v.field("nms", t.nms_threshold);
  v.field("window", t.window);
}

template <typename V>
void visit_fields(EnergyModel& e, V& v) {
  v.field("epsilon", e.epsilon);
}

// Settings for `simulate`: the loop schedule plus the comparison batch.
struct SimulateConfig {
  std::uint64_t seed = 1;
  int seeds = 1;
  int cycles = 5;
  double initial_fraction = 0.02;
  double budget_per_cycle = 0.02;
  int k = 1;
  std::vector<std::string> methods = {"random", "random_r", "least_confidence", "entropy", "margin", "tc",
                                      "oracle_fp", "oracle_fn"};
};

template <typename V>
void visit_fields(SimulateConfig& s, V& v) {
  v.field("seed", s.seed);
  v.field("seeds", s.seeds);
  v.field("cycles", s.cycles);
  v.field("initial_fraction", s.initial_fraction);
  v.field("budget_per_cycle", s.budget_per_cycle);
  v.field("k", s.k);
  v.field("methods", s.methods);
}

struct RunConfig {
  WorldConfig world;
  DetectorParams detector;
  LearningModel learning;
  TCConfig tc;
  EnergyModel energy;
  SimulateConfig loop;

  void validate() const {
    world.validate();
    detector.validate();
    learning.validate();
    tc.validate();
    energy.validate();
    if (loop.seeds < 1) throw ValidationError("loop.seeds must be >= 1");
    if (loop.k < 0) throw ValidationError("loop.k must be >= 0");
    if (loop.methods.empty()) throw ValidationError("loop.methods must be non-empty");
    for (const auto& m : loop.methods) method_spec(m, loop.k);
  }

  LoopConfig loop_config(std::uint64_t seed) const {
    LoopConfig lc;
    lc.seed = seed;
    lc.cycles = loop.cycles;
    lc.initial_fraction = loop.initial_fraction;
    lc.budget_per_cycle = loop.budget_per_cycle;
    lc.tc = tc;
    lc.detector = detector;
    lc.learning = learning;
    lc.energy = energy;
    return lc;
  }
};

template <typename V>
void visit_fields(RunConfig& r, V& v) {
  v.field("world", r.world);
  v.field("detector", r.detector);
  v.field("learning", r.learning);
  v.field("tc", r.tc);
  v.field("energy", r.energy);
  v.field("loop", r.loop);
}

namespace config_detail {

template <typename T>
concept Visitable = requires(T& t, Reader& r) { visit_fields(t, r); };

template <typename T>
concept VisitableList = requires { typename T::value_type; } && !std::is_same_v<T, std::string> &&
                        Visitable<typename T::value_type>;

template <typename T>
void Reader::read(const json& j, T& value, const std::string& where) {
  if constexpr (Visitable<T>) {
    Reader sub(j, where);
    visit_fields(value, sub);
    sub.finish();
  } else if constexpr (VisitableList<T>) {
    if (!j.is_array()) throw ValidationError(where + ": expected an array");
    T out;
    for (std::size_t i = 0; i < j.size(); ++i) {
      typename T::value_type item{};
      read(j[i], item, where + "[" + std::to_string(i) + "]");
      out.push_back(std::move(item));
    }
    value = std::move(out);
  } else {
    value = j.get<T>();
  }
}

template <typename T>
void Writer::field(const char* key, const T& value) {
  if constexpr (Visitable<T>) {
    Writer sub;
    visit_fields(const_cast<T&>(value), sub);
    result[key] = sub.result;
  } else if constexpr (VisitableList<T>) {
    json arr = json::array();
    for (const auto& item : value) {
      Writer sub;
      visit_fields(const_cast<typename T::value_type&>(item), sub);
      arr.push_back(sub.result);
    }
    result[key] = arr;
  } else {
    result[key] = value;
  }
}

}  // namespace config_detail

inline RunConfig parse_run_config(const json& j) {
  RunConfig cfg;
  config_detail::Reader reader(j, "config");
  visit_fields(cfg, reader);
  reader.finish();
  cfg.validate();
  return cfg;
}

inline RunConfig load_run_config(const fs::path& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open " + path.string());
  json j;
  try {
    j = json::parse(in);
  } catch (const json::parse_error& e) {
    throw ValidationError(path.string() + ": malformed JSON: " + e.what());
  }
  return parse_run_config(j);
}

inline json run_config_json(const RunConfig& cfg) {
  config_detail::Writer w;
  visit_fields(const_cast<RunConfig&>(cfg), w);
  return w.result;
}

}  // namespace tcal

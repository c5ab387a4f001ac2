// tcal: temporal-coherence error estimation and active-learning harness.

#include <CLI11.hpp>

#include <filesystem>
#include <fstream>
#include <iostream>
#include <sstream>
#include <string>
#include <vector>

#include "tcal/acquisition.hpp"
#include "tcal/config.hpp"
#include "tcal/dataset.hpp"
#include "tcal/estimate.hpp"
#include "tcal/evaluation.hpp"
#include "tcal/parallel.hpp"
#include "tcal/simulator.hpp"

namespace fs = std::filesystem;
using tcal::json;

namespace {

constexpr int kExitValidation = 2;
constexpr int kExitIo = 3;

void write_file(const fs::path& path, const std::string& text) {
  if (path.has_parent_path()) {
    std::error_code ec;
    fs::create_directories(path.parent_path(), ec);
    if (ec) throw tcal::IoError("cannot create " + path.parent_path().string() + ": " + ec.message());
  }
  tcal::detail::write_text(path, text);
}

tcal::RunConfig base_config(const std::string& config_path) {
  if (config_path.empty()) return tcal::RunConfig{};
  return tcal::load_run_config(config_path);
}

tcal::Dataset load_with_detections(const fs::path& dataset, const std::string& det_dir) {
  tcal::Dataset ds = tcal::load_dataset(dataset);
  if (!det_dir.empty()) tcal::attach_detections(ds, det_dir);
  for (const auto& v : ds.videos) {
    if (!v.dets) throw tcal::ValidationError("no detections for video '" + v.meta.id + "' (use --det)");
  }
  return ds;
}

// Labeled frames as a CSV of video_id,frame (header optional).
tcal::LabeledSet load_labeled(const std::string& path) {
  tcal::LabeledSet labeled;
  if (path.empty()) return labeled;
  std::ifstream in(path);
  if (!in) throw tcal::IoError("cannot open " + path);
  std::string line;
  int line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.empty() || line == "video_id,frame") continue;
    const auto comma = line.find(',');
    if (comma == std::string::npos) {
      throw tcal::ValidationError(path + ":" + std::to_string(line_no) + ": expected video_id,frame");
    }
    try {
      labeled[line.substr(0, comma)].insert(std::stoi(line.substr(comma + 1)));
    } catch (const std::exception&) {
      throw tcal::ValidationError(path + ":" + std::to_string(line_no) + ": bad frame number");
    }
  }
  return labeled;
}

struct GenOptions {
  std::string config;
  std::string out;
  std::optional<std::uint64_t> seed;
  std::optional<int> videos;
};

void cmd_gen(const GenOptions& o) {
  tcal::RunConfig cfg = base_config(o.config);
  if (o.seed) cfg.world.seed = *o.seed;
  if (o.videos) cfg.world.num_videos = *o.videos;
  cfg.validate();
  const tcal::World world = tcal::generate_world(cfg.world);
  tcal::save_dataset(world.dataset, o.out);
  json split = json::array();
  for (std::size_t v = 0; v < world.is_test.size(); ++v) {
    split.push_back({{"id", world.dataset.manifest.videos[v].id},
                     {"split", world.is_test[v] ? "test" : "train"},
                     {"stratum", cfg.world.strata[world.stratum[v]].name}});
  }
  write_file(fs::path(o.out) / "world.json", json{{"config", tcal::run_config_json(cfg)["world"]}, {"videos", split}}.dump(2) + "\n");
}

struct EstimateOptions {
  std::string dataset;
  std::string det;
  std::string out;
  std::string graph_dump;
  tcal::TCConfig tc;
  double epsilon = 1e-6;
  int jobs = 1;
};

void cmd_estimate(const EstimateOptions& o) {
  const tcal::Dataset ds = load_with_detections(o.dataset, o.det);
  tcal::EnergyModel model{o.epsilon};
  const auto result = tcal::estimate_errors(ds, o.tc, model, o.jobs);
  tcal::save_errors(result.videos, o.out);
  if (!o.graph_dump.empty()) {
    std::map<std::string, std::string> per_video;
    for (const auto& g : result.graphs) per_video[g.video_id] += tcal::graph_jsonl(g);
    for (const auto& v : ds.videos) write_file(fs::path(o.graph_dump) / (v.meta.id + ".jsonl"), per_video[v.meta.id]);
  }
  int fp = 0, fn = 0;
  for (const auto& v : result.videos) {
    for (const auto& f : v.frames) {
      fp += f.fp;
      fn += f.fn;
    }
  }
  tcal::log(tcal::LogLevel::kInfo, "estimated " + std::to_string(fp) + " FP and " + std::to_string(fn) + " FN over " +
                                       std::to_string(result.graphs.size()) + " components");
}

struct SelectOptions {
  std::string dataset;
  std::string det;
  std::string errors;
  std::string labeled;
  std::string method = "tc";
  std::string allocation;
  std::string tc_variant = "fp";
  std::string out = "selection.csv";
  int batch = 1;
  int k = 1;
  int cycle = 1;
  std::uint64_t seed = 0;
  tcal::TCConfig tc;
};

void cmd_select(const SelectOptions& o) {
  tcal::MethodSpec spec = tcal::method_spec(o.method, o.k);
  spec.tc_variant = tcal::parse_tc_variant(o.tc_variant);
  if (!o.allocation.empty()) spec.allocation = tcal::parse_allocation(o.allocation);
  tcal::Dataset ds = tcal::load_dataset(o.dataset);
  if (!o.det.empty()) tcal::attach_detections(ds, o.det);
  std::vector<tcal::FrameScore> scores;
  std::vector<tcal::VideoMeta> pool;
  std::vector<tcal::VideoErrors> estimated;
  if (spec.method == tcal::Method::kTC) {
    if (!o.errors.empty()) {
      for (const auto& v : ds.videos) estimated.push_back(tcal::load_errors(fs::path(o.errors) / (v.meta.id + ".jsonl"), v.meta));
    } else {
      estimated = tcal::estimate_errors(ds, o.tc).videos;
    }
  }
  for (std::size_t i = 0; i < ds.videos.size(); ++i) {
    const auto& v = ds.videos[i];
    pool.push_back(v.meta);
    std::vector<tcal::FrameScore> s;
    switch (spec.method) {
      case tcal::Method::kTC: s = tcal::tc_scores(estimated[i], spec.tc_variant); break;
      case tcal::Method::kOracleFP: s = tcal::oracle_scores(v, tcal::ErrorKind::kFP, o.tc); break;
      case tcal::Method::kOracleFN: s = tcal::oracle_scores(v, tcal::ErrorKind::kFN, o.tc); break;
      case tcal::Method::kRandom: s = tcal::random_scores(v.meta); break;
      default: s = tcal::uncertainty_scores(v, spec.method, o.tc); break;
    }
    scores.insert(scores.end(), s.begin(), s.end());
  }
  const tcal::SelectionConfig sc{o.batch, spec.k, spec.allocation, o.seed};
  const auto result = tcal::select_batch(scores, pool, load_labeled(o.labeled), sc);
  write_file(o.out, tcal::selection_csv_header() + tcal::selection_csv_rows(result, spec.name, o.cycle));
}

struct EvalOptions {
  std::string dataset;
  std::string det;
  std::string out = "eval.json";
  std::string ap = "all";
  double score_thresh = 0.5;
  double nms = 0.5;
};

void cmd_eval(const EvalOptions& o) {
  const tcal::Dataset ds = load_with_detections(o.dataset, o.det);
  tcal::EvalConfig cfg{o.score_thresh, o.nms, tcal::ApInterpolation::kAllPoints};
  if (o.ap == "11") {
    cfg.interpolation = tcal::ApInterpolation::kElevenPoint;
  } else if (o.ap != "all") {
    throw tcal::ValidationError("--ap must be 'all' or '11'");
  }
  const auto report = tcal::evaluate_dataset(ds, cfg);
  write_file(o.out, tcal::eval_report_json(report, ds.manifest.classes).dump(2) + "\n");
}

struct SimulateOptions {
  std::string config;
  std::string out;
  std::string methods;
  std::optional<std::uint64_t> seed;
  std::optional<int> seeds;
  std::optional<int> cycles;
  std::optional<int> videos;
  std::optional<int> k;
  bool no_world = false;
  int jobs = 1;
};

std::vector<std::string> split_list(const std::string& s) {
  std::vector<std::string> out;
  std::stringstream ss(s);
  std::string item;
  while (std::getline(ss, item, ',')) {
    if (!item.empty()) out.push_back(item);
  }
  return out;
}

void cmd_simulate(const SimulateOptions& o) {
  tcal::RunConfig cfg = base_config(o.config);
  if (!o.methods.empty()) cfg.loop.methods = split_list(o.methods);
  if (o.seed) cfg.loop.seed = *o.seed;
  if (o.seeds) cfg.loop.seeds = *o.seeds;
  if (o.cycles) cfg.loop.cycles = *o.cycles;
  if (o.videos) cfg.world.num_videos = *o.videos;
  if (o.k) cfg.loop.k = *o.k;
  cfg.validate();

  const fs::path out(o.out);
  std::vector<std::uint64_t> seeds;
  for (int s = 0; s < cfg.loop.seeds; ++s) seeds.push_back(cfg.loop.seed + static_cast<std::uint64_t>(s));

  // Each run seed generates its own world from the "world" sub-stream.
  std::vector<tcal::World> worlds(seeds.size());
  tcal::parallel_for(seeds.size(), o.jobs, [&](std::size_t i) {
    tcal::WorldConfig wc = cfg.world;
    wc.seed = tcal::splitmix64(seeds[i] ^ tcal::hash_name("world"));
    worlds[i] = tcal::generate_world(wc);
  });
  struct Job {
    std::size_t seed_index;
    std::string method;
  };
  std::vector<Job> jobs;
  for (std::size_t s = 0; s < seeds.size(); ++s) {
    for (const auto& m : cfg.loop.methods) jobs.push_back({s, m});
  }
  std::vector<tcal::RunResult> results(jobs.size());
  tcal::parallel_for(jobs.size(), o.jobs, [&](std::size_t i) {
    const auto& job = jobs[i];
    results[i] = tcal::run_loop(worlds[job.seed_index], tcal::method_spec(job.method, cfg.loop.k),
                                cfg.loop_config(seeds[job.seed_index]));
    tcal::log(tcal::LogLevel::kInfo, "finished " + job.method + " seed " + std::to_string(seeds[job.seed_index]));
  });

  std::string curve = tcal::curve_csv_header(worlds.front().dataset.manifest.classes);
  std::string selection = tcal::run_selection_csv_header();
  for (const auto& r : results) {
    curve += tcal::curve_csv_rows(r);
    selection += tcal::run_selection_csv_rows(r);
  }
  write_file(out / "curve.csv", curve);
  write_file(out / "selection.csv", selection);
  json manifest;
  manifest["config"] = tcal::run_config_json(cfg);
  manifest["seeds"] = seeds;
  manifest["runs"] = json::array();
  for (const auto& r : results) {
    manifest["runs"].push_back({{"method", r.method},
                                {"seed", r.seed},
                                {"final_mAP", r.curve.back().report.mAP},
                                {"spill_events", [&] {
                                   int n = 0;
                                   for (const auto& c : r.selections) n += c.selection.spill_events;
                                   return n;
                                 }()}});
  }
  write_file(out / "run.json", manifest.dump(2) + "\n");
  if (!o.no_world) {
    for (std::size_t s = 0; s < seeds.size(); ++s) {
      tcal::save_dataset(worlds[s].dataset, out / ("world_s" + std::to_string(seeds[s])));
    }
  }
}

void add_tc_flags(CLI::App* cmd, tcal::TCConfig& tc) {
  cmd->add_option("--theta", tc.link_threshold, "IoU threshold for linking detections")->capture_default_str();
  cmd->add_option("--cluster-theta", tc.cluster_threshold, "IoU threshold for clustering candidates")
      ->capture_default_str();
  cmd->add_option("--window", tc.window, "frames tracked in each direction")->capture_default_str();
  cmd->add_option("--tau-det", tc.score_threshold, "detection score threshold")->capture_default_str();
  cmd->add_option("--nms", tc.nms_threshold, "NMS IoU threshold")->capture_default_str();
}

void print_error(const char* kind, const std::string& msg) {
  std::cerr << json{{"error", kind}, {"message", msg}}.dump() << '\n';
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Temporal-coherence error estimation and active learning for video object detection"};
  app.require_subcommand(1);

  GenOptions gen;
  auto* gen_cmd = app.add_subcommand("gen", "generate a synthetic world (ground truth + motion fields)");
  gen_cmd->add_option("--config", gen.config, "run config JSON");
  gen_cmd->add_option("--out", gen.out, "output dataset directory")->required();
  gen_cmd->add_option("--seed", gen.seed, "world seed (overrides config)");
  gen_cmd->add_option("--videos", gen.videos, "number of videos (overrides config)");

  EstimateOptions est;
  auto* est_cmd = app.add_subcommand("estimate", "estimate per-frame FP/FN from temporal coherence");
  est_cmd->add_option("--dataset", est.dataset, "dataset directory")->required();
  est_cmd->add_option("--det", est.det, "detections directory (default: <dataset>/det)");
  est_cmd->add_option("--out", est.out, "output errors directory")->required();
  est_cmd->add_option("--epsilon", est.epsilon, "tie-breaking perturbation on error labels")->capture_default_str();
  est_cmd->add_option("--jobs", est.jobs, "worker threads")->capture_default_str();
  est_cmd->add_option("--graph-dump", est.graph_dump, "write graph JSONL per video here");
  add_tc_flags(est_cmd, est.tc);

  SelectOptions sel;
  auto* sel_cmd = app.add_subcommand("select", "select a batch of frames to annotate");
  sel_cmd->add_option("--dataset", sel.dataset, "dataset directory")->required();
  sel_cmd->add_option("--det", sel.det, "detections directory (default: <dataset>/det)");
  sel_cmd->add_option("--errors", sel.errors, "error estimates directory for tc (computed if absent)");
  sel_cmd->add_option("--labeled", sel.labeled, "CSV of already labeled frames (video_id,frame)");
  sel_cmd->add_option("--method", sel.method,
                      "tc|tc_fn|tc_fpfn|oracle_fp|oracle_fn|least_confidence|entropy|margin|random|random_r")
      ->capture_default_str();
  sel_cmd->add_option("--batch", sel.batch, "frames to select")->capture_default_str();
  sel_cmd->add_option("--k", sel.k, "exclusion radius around labeled frames")->capture_default_str();
  sel_cmd->add_option("--seed", sel.seed, "tie-breaking seed")->capture_default_str();
  sel_cmd->add_option("--allocation", sel.allocation, "proportional|global (default depends on method)");
  sel_cmd->add_option("--tc-variant", sel.tc_variant, "fp|fn|fp+fn")->capture_default_str();
  sel_cmd->add_option("--cycle", sel.cycle, "cycle number written to the CSV")->capture_default_str();
  sel_cmd->add_option("--out", sel.out, "output CSV")->capture_default_str();
  add_tc_flags(sel_cmd, sel.tc);

  EvalOptions ev;
  auto* ev_cmd = app.add_subcommand("eval", "evaluate detections (per-class AP at IoU > 0.5, mAP)");
  ev_cmd->add_option("--dataset", ev.dataset, "dataset directory with gt/")->required();
  ev_cmd->add_option("--det", ev.det, "detections directory (default: <dataset>/det)");
  ev_cmd->add_option("--out", ev.out, "output JSON")->capture_default_str();
  ev_cmd->add_option("--score-thresh", ev.score_thresh, "drop detections below this score")->capture_default_str();
  ev_cmd->add_option("--nms", ev.nms, "NMS IoU threshold")->capture_default_str();
  ev_cmd->add_option("--ap", ev.ap, "AP interpolation: all|11")->capture_default_str();

  SimulateOptions sim;
  auto* sim_cmd = app.add_subcommand("simulate", "run the closed active-learning loop on synthetic worlds");
  sim_cmd->add_option("--config", sim.config, "run config JSON");
  sim_cmd->add_option("--out", sim.out, "output directory")->required();
  sim_cmd->add_option("--methods", sim.methods, "comma-separated methods (default: all)");
  sim_cmd->add_option("--seed", sim.seed, "first run seed (default 1)");
  sim_cmd->add_option("--seeds", sim.seeds, "number of consecutive seeds (default 1)");
  sim_cmd->add_option("--cycles", sim.cycles, "active-learning cycles (default 5)");
  sim_cmd->add_option("--videos", sim.videos, "videos per world (default 20)");
  sim_cmd->add_option("--k", sim.k, "exclusion radius (default 1)");
  sim_cmd->add_flag("--no-world", sim.no_world, "do not write the generated datasets");
  sim_cmd->add_option("--jobs", sim.jobs, "parallel runs")->capture_default_str();

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::CallForAllHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    print_error("usage", e.what());
    return kExitValidation;
  }

  try {
    if (*gen_cmd) cmd_gen(gen);
    if (*est_cmd) cmd_estimate(est);
    if (*sel_cmd) cmd_select(sel);
    if (*ev_cmd) cmd_eval(ev);
    if (*sim_cmd) cmd_simulate(sim);
  } catch (const tcal::ValidationError& e) {
    print_error("validation", e.what());
    return kExitValidation;
  } catch (const tcal::IoError& e) {
    print_error("io", e.what());
    return kExitIo;
  } catch (const std::exception& e) {
    print_error("internal", e.what());
    return 1;
  }
  return 0;
}

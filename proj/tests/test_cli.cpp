#include <gtest/gtest.h>

#include <sys/wait.h>

#include <cstdlib>
#include <fstream>
#include <sstream>

#include "fixtures.hpp"

using namespace tcal;
using namespace tcal::testing;

namespace {

fs::path scratch(const std::string& name) {
  const fs::path p = fs::temp_directory_path() / ("tcal_cli_" + name);
  fs::remove_all(p);
  fs::create_directories(p);
  return p;
}

int run(const std::string& args, const fs::path& log) {
  const std::string cmd = std::string(TCAL_CLI) + " " + args + " > " + log.string() + " 2>&1";
  const int status = std::system(cmd.c_str());
  return WIFEXITED(status) ? WEXITSTATUS(status) : -1;
}

std::string slurp(const fs::path& p) {
  std::ifstream in(p);
  std::stringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

}  // namespace

TEST(Cli, HelpListsSubcommands) {
  const auto dir = scratch("help");
  EXPECT_EQ(run("--help", dir / "out"), 0);
  const std::string out = slurp(dir / "out");
  for (const char* sub : {"gen", "estimate", "select", "eval", "simulate"}) {
    EXPECT_NE(out.find(sub), std::string::npos) << sub;
  }
}

TEST(Cli, ExitCodes) {
  const auto dir = scratch("codes");
  EXPECT_EQ(run("estimate --dataset " + (dir / "missing").string() + " --out " + (dir / "e").string(), dir / "log"), 3);
  EXPECT_NE(slurp(dir / "log").find("\"error\":\"io\""), std::string::npos);
  std::ofstream(dir / "bad.json") << R"({"world":{"bogus":1}})";
  EXPECT_EQ(run("simulate --config " + (dir / "bad.json").string() + " --out " + (dir / "s").string(), dir / "log"), 2);
  EXPECT_NE(slurp(dir / "log").find("unknown key 'bogus'"), std::string::npos);
}

TEST(Cli, GenIsDeterministic) {
  const auto dir = scratch("gen");
  ASSERT_EQ(run("gen --out " + (dir / "a").string() + " --videos 3 --seed 5", dir / "log"), 0);
  ASSERT_EQ(run("gen --out " + (dir / "b").string() + " --videos 3 --seed 5", dir / "log"), 0);
  for (const auto& e : fs::recursive_directory_iterator(dir / "a")) {
    if (!e.is_regular_file()) continue;
    const auto rel = fs::relative(e.path(), dir / "a");
    EXPECT_EQ(slurp(e.path()), slurp(dir / "b" / rel)) << rel;
  }
}

TEST(Cli, EstimateFixtures) {
  const auto dir = scratch("estimate");
  save_dataset(make_dataset({flicker_video(), figure2_video(), make_video("empty", 4)}), dir / "ds");
  ASSERT_EQ(run("estimate --dataset " + (dir / "ds").string() + " --out " + (dir / "err").string() +
                    " --window 2 --graph-dump " + (dir / "graphs").string(),
                dir / "log"),
            0)
      << slurp(dir / "log");
  const Dataset ds = load_dataset(dir / "ds");
  const auto flicker = load_errors(dir / "err" / "flicker.jsonl", ds.videos[0].meta);
  EXPECT_EQ(flicker.frames[3].fp, 1);
  const auto fig2 = load_errors(dir / "err" / "fig2.jsonl", ds.videos[1].meta);
  EXPECT_EQ(fig2.frames[1].fp, 1);
  EXPECT_EQ(fig2.frames[2].fn, 1);
  EXPECT_EQ(fig2.frames[0].fp + fig2.frames[0].fn + fig2.frames[3].fp + fig2.frames[3].fn, 0);
  const auto empty = load_errors(dir / "err" / "empty.jsonl", ds.videos[2].meta);
  for (const auto& f : empty.frames) EXPECT_EQ(f.fp + f.fn, 0);
  EXPECT_TRUE(fs::exists(dir / "graphs" / "fig2.jsonl"));
}

TEST(Cli, SelectAndEval) {
  const auto dir = scratch("select");
  save_dataset(make_dataset({flicker_video(), figure2_video()}), dir / "ds");
  std::ofstream(dir / "labeled.csv") << "video_id,frame\nfig2,0\n";
  ASSERT_EQ(run("select --dataset " + (dir / "ds").string() + " --method tc --batch 2 --k 1 --labeled " +
                    (dir / "labeled.csv").string() + " --out " + (dir / "sel.csv").string(),
                dir / "log"),
            0)
      << slurp(dir / "log");
  const std::string csv = slurp(dir / "sel.csv");
  EXPECT_EQ(csv.rfind("method,cycle,video_id,frame,score,rank\n", 0), 0u);
  EXPECT_NE(csv.find(",flicker,3,"), std::string::npos) << csv;
  ASSERT_EQ(run("eval --dataset " + (dir / "ds").string() + " --out " + (dir / "eval.json").string(), dir / "log"), 0)
      << slurp(dir / "log");
  const json report = json::parse(slurp(dir / "eval.json"));
  EXPECT_TRUE(report.contains("mAP"));
}

TEST(Cli, SelectPoolExhausted) {
  const auto dir = scratch("exhausted");
  save_dataset(make_dataset({make_video("tiny", 2)}), dir / "ds");
  EXPECT_EQ(run("select --dataset " + (dir / "ds").string() + " --method random --batch 5 --out " +
                    (dir / "sel.csv").string(),
                dir / "log"),
            2);
}

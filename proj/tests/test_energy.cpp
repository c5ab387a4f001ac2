#include <gtest/gtest.h>

#include <numeric>

#include "fixtures.hpp"

using namespace tcal;
using namespace tcal::testing;

namespace {
constexpr Cost kErr = 10'000'010;  // 1 + 1e-6 in 1e-7 units
constexpr Cost kOne = 10'000'000;
}  // namespace

TEST(MaxFlow, TextbookNetwork) {
  // Six-node network with max flow 23.
  MaxFlow f(6);
  f.add_edge(0, 1, 16);
  f.add_edge(0, 2, 13);
  f.add_edge(1, 3, 12);
  f.add_edge(2, 1, 4);
  f.add_edge(2, 4, 14);
  f.add_edge(3, 2, 9);
  f.add_edge(3, 5, 20);
  f.add_edge(4, 3, 7);
  f.add_edge(4, 5, 4);
  EXPECT_EQ(f.solve(0, 5), 23);
  const auto side = f.source_side(0);
  EXPECT_TRUE(side[0]);
  EXPECT_FALSE(side[5]);
}

TEST(Energy, TablesMatchPresenceGrouping) {
  const EnergyModel m;
  EXPECT_EQ(m.error_cost(), kErr);
  for (int a = 0; a < 4; ++a) {
    for (int b = 0; b < 4; ++b) {
      const bool pa = a == 0 || a == 3;
      const bool pb = b == 0 || b == 3;
      EXPECT_EQ(m.pairwise(Label(a), Label(b)), pa == pb ? 0 : kOne);
    }
  }
}

TEST(Energy, FlickerIsFalsePositive) {
  const TCGraph g = flicker_graph();
  const auto s = solve(g);
  EXPECT_EQ(s.labels, (std::vector<Label>{Label::kFP, Label::kTN, Label::kTN}));
  EXPECT_EQ(s.energy_units, kErr);
  EXPECT_EQ(s.per_frame.at(1), (FrameErrors{1, 0}));
}

TEST(Energy, GapIsFalseNegative) {
  const auto s = solve(gap_graph());
  EXPECT_EQ(s.labels, (std::vector<Label>{Label::kTP, Label::kTP, Label::kFN}));
  EXPECT_EQ(s.energy_units, kErr);
  EXPECT_EQ(s.per_frame.at(1), (FrameErrors{0, 1}));
}

TEST(Energy, TieGoesToNoError) {
  const auto s = solve(tie_graph());
  EXPECT_EQ(s.labels, (std::vector<Label>{Label::kTP, Label::kTN}));
  EXPECT_EQ(s.energy_units, kOne);
}

TEST(Energy, FigureTwoLabels) {
  TCConfig cfg;
  cfg.window = 2;
  const auto g = build_graphs_for_video(figure2_video(), cfg)[0];
  const auto s = solve(g);
  EXPECT_EQ(s.energy_units, 2 * kErr);
  EXPECT_EQ(s.per_frame.at(1), (FrameErrors{1, 0}));
  EXPECT_EQ(s.per_frame.at(2), (FrameErrors{0, 1}));
  for (std::size_t n = 0; n < g.nodes.size(); ++n) {
    if (g.nodes[n].is_detection() && g.nodes[n].box == Box(200, 100, 240, 140)) {
      EXPECT_EQ(s.labels[n], Label::kFP);
    }
  }
}

TEST(Energy, ForbiddenLabelsRejected) {
  const TCGraph g = tie_graph();
  EXPECT_FALSE(evaluate_energy(g, {Label::kTN, Label::kTN}));
  EXPECT_FALSE(evaluate_energy(g, {Label::kTP, Label::kTP}));
  EXPECT_EQ(*evaluate_energy(g, {Label::kFP, Label::kFN}), 2 * kErr + kOne);
}

TEST(Energy, MinCutMatchesBruteForce) {
  Rng rng(1234);
  for (int trial = 0; trial < 1000; ++trial) {
    const TCGraph g = random_graph(rng, 12);
    g.validate();
    const auto cut = solve(g);
    const auto brute = brute_force_min(g);
    ASSERT_EQ(cut.energy_units, brute.energy_units) << "trial " << trial;
    ASSERT_TRUE(labels_feasible(g, cut));
    ASSERT_EQ(*evaluate_energy(g, cut.labels), cut.energy_units);
  }
}

TEST(Energy, EpsilonZeroStillOptimal) {
  Rng rng(99);
  EnergyModel m;
  m.epsilon = 0.0;
  for (int trial = 0; trial < 200; ++trial) {
    const TCGraph g = random_graph(rng, 10);
    EXPECT_EQ(solve(g, m).energy_units, brute_force_min(g, m).energy_units);
  }
}

TEST(Energy, PermutationInvariant) {
  Rng rng(77);
  for (int trial = 0; trial < 200; ++trial) {
    const TCGraph g = random_graph(rng, 14);
    std::vector<int> perm(g.nodes.size());
    std::iota(perm.begin(), perm.end(), 0);
    for (std::size_t i = perm.size(); i > 1; --i) std::swap(perm[i - 1], perm[rng.below(i)]);
    TCGraph p;
    p.nodes = g.nodes;
    for (std::size_t i = 0; i < perm.size(); ++i) p.nodes[perm[i]] = g.nodes[i];
    for (auto [a, b] : g.edges) {
      a = perm[a];
      b = perm[b];
      p.edges.emplace_back(std::min(a, b), std::max(a, b));
    }
    const auto s = solve(g);
    const auto sp = solve(p);
    for (std::size_t i = 0; i < perm.size(); ++i) EXPECT_EQ(s.labels[i], sp.labels[perm[i]]);
  }
}

// More detections agreeing with a candidate can only push it toward FN.
TEST(Energy, SupportIsMonotone) {
  for (int k = 1; k <= 5; ++k) {
    TCGraph g;
    std::vector<DetectionRef> origin;
    for (int d = 0; d < k; ++d) {
      g.nodes.push_back(det_node(d));
      origin.push_back({d, 0});
    }
    for (int a = 0; a < k; ++a) {
      for (int b = a + 1; b < k; ++b) g.edges.push_back({a, b});
    }
    g.nodes.push_back(cand_node(k, origin));
    for (int d = 0; d < k; ++d) g.edges.push_back({d, k});
    const auto s = solve(g);
    EXPECT_EQ(s.labels.back(), k == 1 ? Label::kTN : Label::kFN) << k;
  }
}

TEST(Energy, BruteForceSizeLimit) {
  TCGraph g;
  for (int i = 0; i < 21; ++i) g.nodes.push_back(det_node(i));
  EXPECT_THROW(brute_force_min(g), ValidationError);
  EXPECT_NO_THROW(solve(g));
}

TEST(Energy, InvalidEpsilon) {
  EnergyModel m;
  m.epsilon = -1;
  EXPECT_THROW(solve(tie_graph(), m), ValidationError);
}

#pragma once

#include <array>
#include <bit>
#include <cmath>
#include <cstdint>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "tcal/maxflow.hpp"
#include "tcal/tcgraph.hpp"

namespace tcal {

enum class Label : std::uint8_t { kTP = 0, kFP = 1, kTN = 2, kFN = 3 };

inline const char* label_name(Label l) {
  static constexpr const char* kNames[] = {"TP", "FP", "TN", "FN"};
  return kNames[static_cast<int>(l)];
}

// Costs are integers in units of 1e-7 so that min-cut arithmetic is exact.
inline constexpr std::int64_t kCostScale = 10'000'000;

using Cost = std::int64_t;

inline constexpr Cost kForbidden = -1;

// Unary and pairwise tables of the energy. The error labels (FP for
// detections, FN for candidates) cost 1 + epsilon; epsilon breaks ties in
// favour of reporting no error.
struct EnergyModel {
  double epsilon = 1e-6;

  Cost unit() const { return kCostScale; }
  Cost error_cost() const { return kCostScale + static_cast<Cost>(std::llround(epsilon * kCostScale)); }

  // kForbidden marks labels outside the node's domain.
  std::array<Cost, 4> detection_unary() const { return {0, error_cost(), kForbidden, kForbidden}; }
  std::array<Cost, 4> candidate_unary() const { return {kForbidden, kForbidden, 0, error_cost()}; }

  // Rows/columns in TP, FP, TN, FN order.
  static constexpr std::array<std::array<int, 4>, 4> kPairwise = {{
      {0, 1, 1, 0},
      {1, 0, 0, 1},
      {1, 0, 0, 1},
      {0, 1, 1, 0},
  }};

  Cost unary(const Node& n, Label l) const {
    return (n.is_detection() ? detection_unary() : candidate_unary())[static_cast<int>(l)];
  }
  Cost pairwise(Label a, Label b) const {
    return kPairwise[static_cast<int>(a)][static_cast<int>(b)] * unit();
  }

  void validate() const {
    if (!(epsilon >= 0.0) || !(epsilon < 0.5)) throw ValidationError("epsilon must be in [0, 0.5)");
  }
};

inline bool label_allowed(const Node& n, Label l) {
  return n.is_detection() ? (l == Label::kTP || l == Label::kFP) : (l == Label::kTN || l == Label::kFN);
}

// Energy of a full four-label assignment, evaluated from the tables directly.
// Returns nullopt for assignments that use a forbidden label.
inline std::optional<Cost> evaluate_energy(const TCGraph& g, const std::vector<Label>& labels,
                                           const EnergyModel& model = {}) {
  Cost e = 0;
  for (std::size_t n = 0; n < g.nodes.size(); ++n) {
    const Cost u = model.unary(g.nodes[n], labels[n]);
    if (u == kForbidden) return std::nullopt;
    e += u;
  }
  for (const auto& [a, b] : g.edges) e += model.pairwise(labels[a], labels[b]);
  return e;
}

// Binary form: each node is "present" (TP / FN) or "absent" (FP / TN), and
// every edge costs one unit when its endpoints disagree.
struct BinaryEnergy {
  std::vector<Cost> cost_present;
  std::vector<Cost> cost_absent;
  std::vector<Edge> edges;
  Cost edge_weight = kCostScale;

  std::size_t size() const { return cost_present.size(); }

  Cost energy(const std::vector<bool>& present) const {
    Cost e = 0;
    for (std::size_t n = 0; n < size(); ++n) e += present[n] ? cost_present[n] : cost_absent[n];
    for (const auto& [a, b] : edges) {
      if (present[a] != present[b]) e += edge_weight;
    }
    return e;
  }
};

inline BinaryEnergy reduce_to_binary(const TCGraph& g, const EnergyModel& model = {}) {
  model.validate();
  BinaryEnergy b;
  b.edge_weight = model.unit();
  b.edges = g.edges;
  for (const Node& n : g.nodes) {
    if (n.is_detection()) {
      b.cost_present.push_back(model.unary(n, Label::kTP));
      b.cost_absent.push_back(model.unary(n, Label::kFP));
    } else {
      b.cost_present.push_back(model.unary(n, Label::kFN));
      b.cost_absent.push_back(model.unary(n, Label::kTN));
    }
  }
  return b;
}

struct BinarySolution {
  std::vector<bool> present;
  Cost energy = 0;
};

// Exact minimizer via s-t min-cut. Source side = present. Among several
// minimizers the one with the smallest present set is returned, which does not
// depend on node numbering.
inline BinarySolution min_cut_solve(const BinaryEnergy& b) {
  const int n = static_cast<int>(b.size());
  const int source = n;
  const int sink = n + 1;
  MaxFlow flow(n + 2);
  for (int v = 0; v < n; ++v) {
    if (b.cost_absent[v] > 0) flow.add_edge(source, v, b.cost_absent[v]);
    if (b.cost_present[v] > 0) flow.add_edge(v, sink, b.cost_present[v]);
  }
  for (const auto& [u, v] : b.edges) flow.add_edge(u, v, b.edge_weight, b.edge_weight);
  BinarySolution sol;
  sol.energy = flow.solve(source, sink);
  const auto side = flow.source_side(source);
  sol.present.assign(side.begin(), side.begin() + n);
  return sol;
}

struct FrameErrors {
  int fp = 0;
  int fn = 0;
  friend bool operator==(const FrameErrors&, const FrameErrors&) = default;
};

struct LabelSolution {
  std::vector<Label> labels;
  Cost energy_units = 0;
  std::map<int, FrameErrors> per_frame;  // frames with at least one node

  double energy() const { return static_cast<double>(energy_units) / kCostScale; }
};

inline std::map<int, FrameErrors> count_errors(const TCGraph& g, const std::vector<Label>& labels) {
  std::map<int, FrameErrors> counts;
  for (std::size_t n = 0; n < g.nodes.size(); ++n) {
    FrameErrors& fe = counts[g.nodes[n].frame];
    if (labels[n] == Label::kFP) ++fe.fp;
    if (labels[n] == Label::kFN) ++fe.fn;
  }
  return counts;
}

inline LabelSolution assign_labels(const TCGraph& g, const std::vector<bool>& present, Cost energy_units) {
  LabelSolution s;
  s.energy_units = energy_units;
  for (std::size_t n = 0; n < g.nodes.size(); ++n) {
    if (g.nodes[n].is_detection()) {
      s.labels.push_back(present[n] ? Label::kTP : Label::kFP);
    } else {
      s.labels.push_back(present[n] ? Label::kFN : Label::kTN);
    }
  }
  s.per_frame = count_errors(g, s.labels);
  return s;
}

inline LabelSolution solve(const TCGraph& g, const EnergyModel& model = {}) {
  const BinarySolution b = min_cut_solve(reduce_to_binary(g, model));
  return assign_labels(g, b.present, b.energy);
}

inline constexpr std::size_t kBruteForceMaxNodes = 20;

// Exhaustive search over feasible four-label assignments. Ties go to the
// fewest error labels, then the lexicographically smallest label vector.
inline LabelSolution brute_force_min(const TCGraph& g, const EnergyModel& model = {}) {
  const std::size_t n = g.nodes.size();
  if (n > kBruteForceMaxNodes) {
    throw ValidationError("brute_force_min supports at most 20 nodes, got " + std::to_string(n));
  }
  auto labels_of = [&](std::uint32_t error_mask) {
    std::vector<Label> labels(n);
    for (std::size_t v = 0; v < n; ++v) {
      const bool err = (error_mask >> v) & 1U;
      labels[v] = g.nodes[v].is_detection() ? (err ? Label::kFP : Label::kTP) : (err ? Label::kFN : Label::kTN);
    }
    return labels;
  };
  std::optional<Cost> best;
  int best_errors = 0;
  std::vector<Label> best_labels;
  for (std::uint32_t mask = 0; mask < (1U << n); ++mask) {
    auto labels = labels_of(mask);
    const Cost e = *evaluate_energy(g, labels, model);
    const int errors = std::popcount(mask);
    if (!best || e < *best || (e == *best && (errors < best_errors ||
                                               (errors == best_errors && labels < best_labels)))) {
      best = e;
      best_errors = errors;
      best_labels = std::move(labels);
    }
  }
  LabelSolution s;
  s.labels = std::move(best_labels);
  s.energy_units = best.value_or(0);
  s.per_frame = count_errors(g, s.labels);
  return s;
}

}  // namespace tcal

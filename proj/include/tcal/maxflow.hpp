#pragma once

#include <algorithm>
#include <cstdint>
#include <limits>
#include <queue>
#include <vector>

namespace tcal {

// Dinic's max-flow on integer capacities. Integer arithmetic keeps the cut
// value exact.
class MaxFlow {
 public:
  using Cap = std::int64_t;

  explicit MaxFlow(int num_nodes) : adj_(num_nodes), level_(num_nodes), iter_(num_nodes) {}

  int num_nodes() const { return static_cast<int>(adj_.size()); }

  void add_edge(int from, int to, Cap cap, Cap reverse_cap = 0) {
    adj_[from].push_back(static_cast<int>(arcs_.size()));
    arcs_.push_back({to, cap});
    adj_[to].push_back(static_cast<int>(arcs_.size()));
    arcs_.push_back({from, reverse_cap});
  }

  Cap solve(int source, int sink) {
    Cap flow = 0;
    while (bfs(source, sink)) {
      std::fill(iter_.begin(), iter_.end(), 0);
      while (Cap pushed = dfs(source, sink, std::numeric_limits<Cap>::max())) flow += pushed;
    }
    return flow;
  }

  // After solve(): nodes reachable from the source in the residual graph.
  std::vector<bool> source_side(int source) const {
    std::vector<bool> seen(adj_.size(), false);
    std::vector<int> stack{source};
    seen[source] = true;
    while (!stack.empty()) {
      const int u = stack.back();
      stack.pop_back();
      for (int a : adj_[u]) {
        const Arc& arc = arcs_[a];
        if (arc.cap > 0 && !seen[arc.to]) {
          seen[arc.to] = true;
          stack.push_back(arc.to);
        }
      }
    }
    return seen;
  }

 private:
  struct Arc {
    int to;
    Cap cap;  // residual
  };

  bool bfs(int source, int sink) {
    std::fill(level_.begin(), level_.end(), -1);
    std::queue<int> q;
    level_[source] = 0;
    q.push(source);
    while (!q.empty()) {
      const int u = q.front();
      q.pop();
      for (int a : adj_[u]) {
        if (arcs_[a].cap > 0 && level_[arcs_[a].to] < 0) {
          level_[arcs_[a].to] = level_[u] + 1;
          q.push(arcs_[a].to);
        }
      }
    }
    return level_[sink] >= 0;
  }

  Cap dfs(int u, int sink, Cap limit) {
    if (u == sink) return limit;
    for (int& i = iter_[u]; i < static_cast<int>(adj_[u].size()); ++i) {
      const int a = adj_[u][i];
      Arc& arc = arcs_[a];
      if (arc.cap <= 0 || level_[arc.to] != level_[u] + 1) continue;
      const Cap pushed = dfs(arc.to, sink, std::min(limit, arc.cap));
      if (pushed > 0) {
        arc.cap -= pushed;
        arcs_[a ^ 1].cap += pushed;
        return pushed;
      }
    }
    return 0;
  }

  std::vector<std::vector<int>> adj_;
  std::vector<Arc> arcs_;
  std::vector<int> level_;
  std::vector<int> iter_;
};

}  // namespace tcal

#pragma once

// shared fixtures and random-instance generators for the test suites

#include <algorithm>
#include <map>
#include <numeric>
#include <random>
#include <vector>

#include "dstq/graph.hpp"
#include "dstq/lcst.hpp"

namespace tutil {

using namespace dstq;

// diamond fixture: cheap hub 1 between root 0 and terminals {2, 3},
// expensive direct edges; optimum 3 via the hub
inline DstInstance g1() {
  return parse_dst(
      "dst 4 5\n"
      "root 0\n"
      "terminals 2 3\n"
      "edge 0 1 1\n"
      "edge 1 2 1\n"
      "edge 1 3 1\n"
      "edge 0 2 3\n"
      "edge 0 3 3\n");
}

inline RootedTree random_rooted_tree(std::mt19937_64& rng, int n) {
  RootedTree t;
  t.root = 0;
  for (int v = 1; v < n; ++v) t.parent[v] = static_cast<int>(rng() % v);
  return t;
}

// random instance whose terminals are always reachable (spine tree + noise)
inline DstInstance random_dst(std::mt19937_64& rng, int n, int k, int extra_edges,
                              int max_cost = 9) {
  DstInstance inst;
  inst.n = n;
  inst.root = 0;
  std::map<std::pair<int, int>, Rational> cost;
  for (int v = 1; v < n; ++v)
    cost[{static_cast<int>(rng() % v), v}] = Rational(1 + static_cast<long>(rng() % max_cost));
  for (int i = 0; i < extra_edges; ++i) {
    int h = static_cast<int>(rng() % n), t = static_cast<int>(rng() % n);
    if (h == t || cost.count({h, t})) continue;
    cost[{h, t}] = Rational(1 + static_cast<long>(rng() % max_cost));
  }
  for (const auto& [ht, c] : cost) inst.edges.push_back({ht.first, ht.second, c});
  std::sort(inst.edges.begin(), inst.edges.end());
  std::vector<int> pool(n - 1);
  std::iota(pool.begin(), pool.end(), 1);
  std::shuffle(pool.begin(), pool.end(), rng);
  inst.terminals.assign(pool.begin(), pool.begin() + k);
  std::sort(inst.terminals.begin(), inst.terminals.end());
  return inst;
}

inline DstInstance random_metric(std::mt19937_64& rng, int n, int k, int extra_edges = 6,
                                 int max_cost = 9) {
  return metric_closure(random_dst(rng, n, k, extra_edges, max_cost)).closure;
}

// random labeled-tree instance; demands go on internal nodes against labels
// that some descendant serves, so most draws are feasible
inline LcstInstance random_lcst(std::mt19937_64& rng, int n, int num_globals, int extra_labels,
                                int max_cost = 9) {
  LcstInstance inst;
  inst.root = 0;
  inst.num_globals = num_globals;
  inst.num_labels = num_globals + extra_labels;
  inst.nodes.resize(n);
  for (int v = 1; v < n; ++v) inst.nodes[v].parent = static_cast<int>(rng() % v);
  for (int v = 0; v < n; ++v)
    inst.nodes[v].cost = Rational(static_cast<long>(rng() % (max_cost + 1)));
  // scatter services
  for (int l = 0; l < inst.num_labels; ++l) {
    int copies = 1 + static_cast<int>(rng() % 2);
    for (int i = 0; i < copies; ++i) {
      int v = static_cast<int>(rng() % n);
      auto& s = inst.nodes[v].ser;
      if (std::find(s.begin(), s.end(), l) == s.end()) s.push_back(l);
    }
  }
  // demands: local labels only, each on an ancestor of some server
  std::vector<std::vector<int>> children(n);
  for (int v = 1; v < n; ++v) children[inst.nodes[v].parent].push_back(v);
  for (int l = num_globals; l < inst.num_labels; ++l) {
    if (rng() % 3 == 0) continue;  // some labels stay demand-free
    std::vector<int> servers;
    for (int v = 0; v < n; ++v) {
      const auto& s = inst.nodes[v].ser;
      if (std::find(s.begin(), s.end(), l) != s.end()) servers.push_back(v);
    }
    if (servers.empty()) continue;
    int w = servers[rng() % servers.size()];
    std::vector<int> anc;
    for (int v = w; v != -1; v = inst.nodes[v].parent) anc.push_back(v);
    int d = anc[rng() % anc.size()];
    auto& dm = inst.nodes[d].dem;
    if (std::find(dm.begin(), dm.end(), l) == dm.end()) dm.push_back(l);
  }
  for (auto& nd : inst.nodes) {
    std::sort(nd.dem.begin(), nd.dem.end());
    std::sort(nd.ser.begin(), nd.ser.end());
  }
  return inst;
}

}  // namespace tutil

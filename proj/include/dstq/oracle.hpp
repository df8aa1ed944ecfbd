#pragma once

// Exact optima for directed Steiner tree at desk scale. Two independent
// value backends (terminal-subset DP, edge-subset enumeration) plus a shared
// deterministic tree-reconstruction rule, and the canonical optimum tree over
// the metric closure used to seed decompositions.

#include <algorithm>
#include <map>
#include <optional>
#include <set>
#include <vector>

#include "dstq/errors.hpp"
#include "dstq/graph.hpp"
#include "dstq/rational.hpp"

namespace dstq {

constexpr int kOracleTerminalCap = 12;

// Dreyfus-Wagner style DP over terminal subsets. Returns nullopt when some
// terminal is unreachable. O(3^k n + 2^k n^2) with exact rationals.
inline std::optional<Rational> steiner_value_dp(int n, const std::vector<Edge>& edges, int root,
                                                const std::vector<int>& terminals) {
  int k = static_cast<int>(terminals.size());
  require(k <= kOracleTerminalCap, Errc::caps, "oracle terminal cap exceeded");
  if (k == 0) return Rational(0);
  // all-pairs shortest paths restricted to the given edge set
  std::vector<std::vector<std::optional<Rational>>> dist(
      n, std::vector<std::optional<Rational>>(n));
  for (int v = 0; v < n; ++v) dist[v][v] = Rational(0);
  for (const auto& e : edges)
    if (!dist[e.head][e.tail] || e.cost < *dist[e.head][e.tail]) dist[e.head][e.tail] = e.cost;
  for (int w = 0; w < n; ++w)
    for (int u = 0; u < n; ++u) {
      if (!dist[u][w]) continue;
      for (int v = 0; v < n; ++v)
        if (dist[w][v]) {
          Rational c = *dist[u][w] + *dist[w][v];
          if (!dist[u][v] || c < *dist[u][v]) dist[u][v] = c;
        }
    }
  int full = (1 << k) - 1;
  // f[S][v] = min cost arborescence rooted at v covering terminal set S
  std::vector<std::vector<std::optional<Rational>>> f(
      full + 1, std::vector<std::optional<Rational>>(n));
  for (int i = 0; i < k; ++i)
    for (int v = 0; v < n; ++v)
      if (dist[v][terminals[i]]) f[1 << i][v] = *dist[v][terminals[i]];
  for (int S = 1; S <= full; ++S) {
    if ((S & (S - 1)) == 0) continue;
    std::vector<std::optional<Rational>> merged(n);
    int low = S & (-S);
    for (int A = (S - 1) & S; A > 0; A = (A - 1) & S) {
      if (!(A & low)) continue;  // enumerate each split once
      int B = S ^ A;
      for (int v = 0; v < n; ++v)
        if (f[A][v] && f[B][v]) {
          Rational c = *f[A][v] + *f[B][v];
          if (!merged[v] || c < *merged[v]) merged[v] = c;
        }
    }
    for (int v = 0; v < n; ++v)
      for (int u = 0; u < n; ++u)
        if (merged[u] && dist[v][u]) {
          Rational c = *dist[v][u] + *merged[u];
          if (!f[S][v] || c < *f[S][v]) f[S][v] = c;
        }
  }
  return f[full][root];
}

// Independent reference: enumerate all edge subsets (m <= 20), keep the
// cheapest feasible one.
inline std::optional<Rational> steiner_value_enum(int n, const std::vector<Edge>& edges, int root,
                                                 const std::vector<int>& terminals) {
  int m = static_cast<int>(edges.size());
  require(m <= 20, Errc::caps, "enumeration oracle edge cap exceeded");
  if (terminals.empty()) return Rational(0);
  std::optional<Rational> best;
  for (std::uint32_t mask = 0; mask < (1u << m); ++mask) {
    Rational cost(0);
    std::vector<std::vector<int>> adj(n);
    for (int i = 0; i < m; ++i)
      if (mask & (1u << i)) {
        cost += edges[i].cost;
        adj[edges[i].head].push_back(edges[i].tail);
      }
    if (best && !(cost < *best)) continue;
    std::vector<char> seen(n, 0);
    std::vector<int> stack{root};
    seen[root] = 1;
    while (!stack.empty()) {
      int u = stack.back();
      stack.pop_back();
      for (int v : adj[u])
        if (!seen[v]) {
          seen[v] = 1;
          stack.push_back(v);
        }
    }
    bool ok = true;
    for (int t : terminals) ok = ok && seen[t];
    if (ok && (!best || cost < *best)) best = cost;
  }
  return best;
}

enum class OracleBackend { dp, enumeration };

struct ExactResult {
  Rational value;
  std::vector<Edge> tree;  // sorted; every edge necessary for the optimum
};

// Canonical optimum: compute the optimal value, then scan edges in ascending
// (head, tail) order and permanently drop every edge whose removal keeps the
// value. What survives is the unique optimum of the reduced graph: each kept
// edge was necessary when tested and remains so as the graph shrinks. Both
// backends share this rule, so they agree on the tree, not just the value.
inline ExactResult exact_opt(const DstInstance& inst, OracleBackend backend = OracleBackend::dp) {
  auto value_of = [&](const std::vector<Edge>& es) {
    return backend == OracleBackend::dp
               ? steiner_value_dp(inst.n, es, inst.root, inst.terminals)
               : steiner_value_enum(inst.n, es, inst.root, inst.terminals);
  };
  auto opt = value_of(inst.edges);
  require(opt.has_value(), Errc::infeasible, "some terminal is unreachable from the root");
  std::vector<Edge> kept = inst.edges;  // already sorted by (head, tail)
  for (size_t i = 0; i < kept.size();) {
    std::vector<Edge> without;
    without.reserve(kept.size() - 1);
    for (size_t j = 0; j < kept.size(); ++j)
      if (j != i) without.push_back(kept[j]);
    auto v = value_of(without);
    if (v && *v == *opt) {
      kept = std::move(without);  // removable: drop for good
    } else {
      ++i;
    }
  }
  ExactResult res;
  res.value = *opt;
  res.tree = std::move(kept);
  Rational total(0);
  for (const auto& e : res.tree) total += e.cost;
  require(total == *opt, Errc::validation, "reconstruction cost mismatch");
  auto check = validate_solution(inst, res.tree);
  require(check.ok, Errc::validation, "reconstructed tree infeasible: " + check.why);
  return res;
}

struct CanonicalTree {
  RootedTree tree;
  std::vector<Edge> edges;  // closure edges of the tree, sorted
  Rational value;
};

// Optimum over the metric closure with every non-root, non-terminal internal
// vertex contracted to have >= 2 children. Because closure costs obey the
// triangle inequality with equality along recorded paths, each contraction
// preserves cost exactly (a strict drop would contradict optimality, which we
// assert). Resulting vertex count is at most 2k.
inline CanonicalTree canonical_optimum_tree(const DstInstance& closure,
                                            OracleBackend backend = OracleBackend::dp) {
  auto res = exact_opt(closure, backend);
  std::map<std::pair<int, int>, Rational> cost;
  for (const auto& e : res.tree) cost[{e.head, e.tail}] = e.cost;
  RootedTree t = tree_from_edges(closure.root, res.tree);
  std::set<int> terms(closure.terminals.begin(), closure.terminals.end());
  bool changed = true;
  while (changed) {
    changed = false;
    auto ch = t.children();
    for (auto& [c, p] : t.parent) {
      if (terms.count(c)) continue;
      auto it = ch.find(c);
      int deg = it == ch.end() ? 0 : static_cast<int>(it->second.size());
      if (deg == 0) {  // useless leaf (cannot occur in a necessary-edge optimum)
        cost.erase({p, c});
        t.parent.erase(c);
        changed = true;
        break;
      }
      if (deg == 1) {
        int g = it->second[0];
        const Edge* shortcut = closure.find_edge(p, g);
        require(shortcut != nullptr, Errc::validation, "closure missing shortcut edge");
        require(shortcut->cost == cost[{p, c}] + cost[{c, g}], Errc::validation,
                "contraction would change cost; tree was not optimal");
        cost.erase({p, c});
        cost.erase({c, g});
        cost[{p, g}] = shortcut->cost;
        t.parent.erase(c);
        t.parent[g] = p;
        changed = true;
        break;
      }
    }
  }
  CanonicalTree out;
  out.tree = t;
  out.value = res.value;
  for (auto& [key, c] : cost) out.edges.push_back(Edge{key.first, key.second, c});
  std::sort(out.edges.begin(), out.edges.end());
  require(out.tree.size() <= 2 * std::max(1, closure.k()), Errc::validation,
          "canonical tree larger than 2k vertices");
  return out;
}

}  // namespace dstq

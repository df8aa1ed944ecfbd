#pragma once

// Directed Steiner tree instances, their text format, metric closure with
// path recovery, and solution validation / pruning utilities.
//
// Convention used throughout: a directed edge (head, tail) points FROM head
// TO tail, i.e. head is the endpoint nearer the root in any arborescence that
// uses the edge. This matches the decomposition-tree vocabulary where a leaf
// carrying edge e sits at vertex head(e) and "reaches" tail(e).

#include <algorithm>
#include <map>
#include <optional>
#include <queue>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include "dstq/errors.hpp"
#include "dstq/rational.hpp"

namespace dstq {

struct Edge {
  int head = -1;
  int tail = -1;
  Rational cost;

  friend bool operator==(const Edge& a, const Edge& b) {
    return a.head == b.head && a.tail == b.tail && a.cost == b.cost;
  }
  friend bool operator<(const Edge& a, const Edge& b) {
    if (a.head != b.head) return a.head < b.head;
    if (a.tail != b.tail) return a.tail < b.tail;
    return a.cost < b.cost;
  }
};

struct DstInstance {
  int n = 0;
  std::vector<Edge> edges;  // kept sorted by (head, tail); unique per pair
  int root = 0;
  std::vector<int> terminals;  // sorted, unique, never contains root

  int k() const { return static_cast<int>(terminals.size()); }

  const Edge* find_edge(int head, int tail) const {
    Edge probe{head, tail, Rational(0)};
    auto it = std::lower_bound(edges.begin(), edges.end(), probe,
                               [](const Edge& a, const Edge& b) {
                                 if (a.head != b.head) return a.head < b.head;
                                 return a.tail < b.tail;
                               });
    if (it != edges.end() && it->head == head && it->tail == tail) return &*it;
    return nullptr;
  }
};

namespace detail {
inline std::vector<std::string> tokens(const std::string& line) {
  std::vector<std::string> out;
  std::istringstream in(line);
  std::string t;
  while (in >> t) {
    if (t[0] == '#') break;  // trailing comment
    out.push_back(t);
  }
  return out;
}
}  // namespace detail

// Text format:
//   dst <n> <m>
//   root <r>
//   terminals <t1> <t2> ...
//   edge <head> <tail> <cost>     (m lines; cost is "n" or "n/d")
// '#' starts a comment. Parallel edges collapse to the cheapest.
inline DstInstance parse_dst(std::istream& in) {
  DstInstance inst;
  bool saw_header = false, saw_root = false, saw_terminals = false;
  int declared_m = 0;
  std::map<std::pair<int, int>, Rational> best;
  std::string line;
  int lineno = 0;
  auto bad = [&](const std::string& why) {
    fail(Errc::parse, "line " + std::to_string(lineno) + ": " + why);
  };
  auto to_int = [&](const std::string& s) {
    try {
      size_t pos = 0;
      int v = std::stoi(s, &pos);
      if (pos != s.size()) throw std::invalid_argument(s);
      return v;
    } catch (const std::exception&) {
      bad("expected integer, got '" + s + "'");
      return 0;
    }
  };
  while (std::getline(in, line)) {
    ++lineno;
    auto tok = detail::tokens(line);
    if (tok.empty()) continue;
    if (tok[0] == "dst") {
      if (saw_header) bad("duplicate header");
      if (tok.size() != 3) bad("header needs 'dst <n> <m>'");
      inst.n = to_int(tok[1]);
      declared_m = to_int(tok[2]);
      if (inst.n < 1) bad("n must be >= 1");
      if (declared_m < 0) bad("m must be >= 0");
      saw_header = true;
    } else if (tok[0] == "root") {
      if (!saw_header) bad("'root' before header");
      if (saw_root) bad("duplicate root");
      if (tok.size() != 2) bad("'root <r>'");
      inst.root = to_int(tok[1]);
      if (inst.root < 0 || inst.root >= inst.n) bad("root out of range");
      saw_root = true;
    } else if (tok[0] == "terminals") {
      if (!saw_header || !saw_root) bad("'terminals' before header/root");
      if (saw_terminals) bad("duplicate terminals");
      for (size_t i = 1; i < tok.size(); ++i) {
        int t = to_int(tok[i]);
        if (t < 0 || t >= inst.n) bad("terminal out of range");
        if (t == inst.root) bad("root cannot be a terminal");
        inst.terminals.push_back(t);
      }
      std::sort(inst.terminals.begin(), inst.terminals.end());
      inst.terminals.erase(std::unique(inst.terminals.begin(), inst.terminals.end()),
                           inst.terminals.end());
      saw_terminals = true;
    } else if (tok[0] == "edge") {
      if (!saw_header) bad("'edge' before header");
      if (tok.size() != 4) bad("'edge <head> <tail> <cost>'");
      int h = to_int(tok[1]), t = to_int(tok[2]);
      if (h < 0 || h >= inst.n || t < 0 || t >= inst.n) bad("edge endpoint out of range");
      if (h == t) bad("self-loop");
      Rational c;
      try {
        c = parse_rational(tok[3]);
      } catch (const std::exception& e) {
        bad(e.what());
      }
      if (c < 0) bad("negative edge cost");
      auto key = std::make_pair(h, t);
      auto it = best.find(key);
      if (it == best.end() || c < it->second) best[key] = c;
    } else {
      bad("unknown directive '" + tok[0] + "'");
    }
  }
  lineno = 0;
  if (!saw_header) fail(Errc::parse, "missing 'dst <n> <m>' header");
  if (!saw_root) fail(Errc::parse, "missing 'root'");
  if (!saw_terminals) fail(Errc::parse, "missing 'terminals'");
  for (auto& [key, c] : best) inst.edges.push_back(Edge{key.first, key.second, c});
  return inst;
}

inline DstInstance parse_dst(const std::string& text) {
  std::istringstream in(text);
  return parse_dst(in);
}

// Canonical serialization: edges sorted by (head, tail), costs canonical.
// parse(serialize(x)) == x, and serialize is a fixed point on parsed input.
inline std::string serialize_dst(const DstInstance& inst) {
  std::ostringstream out;
  out << "dst " << inst.n << " " << inst.edges.size() << "\n";
  out << "root " << inst.root << "\n";
  out << "terminals";
  for (int t : inst.terminals) out << " " << t;
  out << "\n";
  for (const auto& e : inst.edges)
    out << "edge " << e.head << " " << e.tail << " " << format_rational(e.cost) << "\n";
  return out.str();
}

// ---------------------------------------------------------------------------

// Metric closure with enough bookkeeping to map closure edges back to
// original shortest paths.
struct MetricClosure {
  DstInstance original;
  DstInstance closure;  // complete on reachable pairs; satisfies triangle ineq.
  // next[u][v] = first hop on the recovered shortest u->v path (-1 if none).
  std::vector<std::vector<int>> next;

  // Original edges along the recovered shortest path u -> v.
  std::vector<Edge> path_edges(int u, int v) const {
    std::vector<Edge> out;
    require(u >= 0 && u < original.n && v >= 0 && v < original.n, Errc::validation,
            "path endpoint out of range");
    if (u == v) return out;
    int cur = u;
    while (cur != v) {
      int hop = next[cur][v];
      require(hop >= 0, Errc::validation, "no recorded path");
      const Edge* e = original.find_edge(cur, hop);
      require(e != nullptr, Errc::validation, "recorded path uses missing edge");
      out.push_back(*e);
      cur = hop;
    }
    return out;
  }
};

// Floyd-Warshall over exact rationals. Ties are never switched (strict
// improvement only), so the recovered paths are deterministic in the loop
// order. Errors if some terminal is unreachable from the root.
inline MetricClosure metric_closure(const DstInstance& inst) {
  int n = inst.n;
  std::vector<std::vector<std::optional<Rational>>> dist(
      n, std::vector<std::optional<Rational>>(n));
  MetricClosure mc;
  mc.original = inst;
  mc.next.assign(n, std::vector<int>(n, -1));
  for (int v = 0; v < n; ++v) dist[v][v] = Rational(0);
  for (const auto& e : inst.edges) {
    if (!dist[e.head][e.tail] || e.cost < *dist[e.head][e.tail]) {
      dist[e.head][e.tail] = e.cost;
      mc.next[e.head][e.tail] = e.tail;
    }
  }
  for (int w = 0; w < n; ++w)
    for (int u = 0; u < n; ++u) {
      if (!dist[u][w]) continue;
      for (int v = 0; v < n; ++v) {
        if (!dist[w][v]) continue;
        Rational cand = *dist[u][w] + *dist[w][v];
        if (!dist[u][v] || cand < *dist[u][v]) {
          dist[u][v] = cand;
          mc.next[u][v] = mc.next[u][w];
        }
      }
    }
  for (int t : inst.terminals)
    require(dist[inst.root][t].has_value(), Errc::infeasible,
            "terminal " + std::to_string(t) + " unreachable from root");
  mc.closure.n = n;
  mc.closure.root = inst.root;
  mc.closure.terminals = inst.terminals;
  for (int u = 0; u < n; ++u)
    for (int v = 0; v < n; ++v)
      if (u != v && dist[u][v]) mc.closure.edges.push_back(Edge{u, v, *dist[u][v]});
  return mc;
}

// ---------------------------------------------------------------------------

struct SolutionCheck {
  bool ok = false;
  Rational cost;  // sum over distinct (head, tail) pairs
  std::string why;
};

// A solution is a set of instance edges through which every terminal is
// reachable from the root.
inline SolutionCheck validate_solution(const DstInstance& inst, const std::vector<Edge>& sol) {
  SolutionCheck res;
  std::set<std::pair<int, int>> used;
  res.cost = Rational(0);
  for (const auto& e : sol) {
    const Edge* have = inst.find_edge(e.head, e.tail);
    if (!have) {
      res.why = "edge (" + std::to_string(e.head) + "," + std::to_string(e.tail) +
                ") not in instance";
      return res;
    }
    if (have->cost != e.cost) {
      res.why = "edge (" + std::to_string(e.head) + "," + std::to_string(e.tail) +
                ") has wrong cost";
      return res;
    }
    if (used.insert({e.head, e.tail}).second) res.cost += e.cost;
  }
  std::map<int, std::vector<int>> adj;
  for (auto& [h, t] : used) adj[h].push_back(t);
  std::set<int> seen{inst.root};
  std::queue<int> q;
  q.push(inst.root);
  while (!q.empty()) {
    int u = q.front();
    q.pop();
    for (int v : adj[u])
      if (seen.insert(v).second) q.push(v);
  }
  for (int t : inst.terminals)
    if (!seen.count(t)) {
      res.why = "terminal " + std::to_string(t) + " not reached";
      return res;
    }
  res.ok = true;
  return res;
}

// Restrict sol to a shortest-path arborescence toward the terminals: Dijkstra
// from the root inside sol, then keep only edges on root->terminal paths.
// Output cost is <= input cost and the output is an arborescence.
inline std::vector<Edge> prune_to_arborescence(const DstInstance& inst,
                                               const std::vector<Edge>& sol) {
  auto check = validate_solution(inst, sol);
  require(check.ok, Errc::validation, "prune_to_arborescence: " + check.why);
  std::map<int, std::vector<Edge>> adj;
  std::set<std::pair<int, int>> used;
  for (const auto& e : sol)
    if (used.insert({e.head, e.tail}).second) adj[e.head].push_back(e);
  std::map<int, Rational> dist;
  std::map<int, Edge> par;
  dist[inst.root] = Rational(0);
  std::set<int> done;
  while (true) {
    int best = -1;
    for (auto& [v, d] : dist) {  // deterministic: min (dist, id)
      if (done.count(v)) continue;
      if (best == -1 || d < dist[best] || (d == dist[best] && v < best)) best = v;
    }
    if (best == -1) break;
    done.insert(best);
    for (const auto& e : adj[best]) {
      Rational nd = dist[best] + e.cost;
      auto it = dist.find(e.tail);
      if (it == dist.end() || nd < it->second) {
        dist[e.tail] = nd;
        par[e.tail] = e;
      }
    }
  }
  std::set<std::pair<int, int>> keep;
  std::vector<Edge> out;
  for (int t : inst.terminals) {
    int cur = t;
    while (cur != inst.root) {
      auto it = par.find(cur);
      require(it != par.end(), Errc::validation, "terminal lost during pruning");
      if (keep.insert({it->second.head, it->second.tail}).second) out.push_back(it->second);
      cur = it->second.head;
    }
  }
  std::sort(out.begin(), out.end());
  return out;
}

// Map a solution over the metric closure back to original edges (via the
// recorded shortest paths), then prune. Cost never increases.
inline std::vector<Edge> expand_to_original(const MetricClosure& mc,
                                            const std::vector<Edge>& closure_sol) {
  std::set<std::pair<int, int>> used;
  std::vector<Edge> out;
  for (const auto& e : closure_sol)
    for (const auto& oe : mc.path_edges(e.head, e.tail))
      if (used.insert({oe.head, oe.tail}).second) out.push_back(oe);
  return prune_to_arborescence(mc.original, out);
}

// ---------------------------------------------------------------------------

// Rooted trees on graph vertex ids (used by separators / decomposition).
struct RootedTree {
  int root = -1;
  std::map<int, int> parent;  // child -> parent; root absent

  std::set<int> vertices() const {
    std::set<int> vs{root};
    for (auto& [c, p] : parent) {
      vs.insert(c);
      vs.insert(p);
    }
    return vs;
  }
  int size() const { return static_cast<int>(vertices().size()); }
  std::map<int, std::vector<int>> children() const {
    std::map<int, std::vector<int>> ch;
    for (auto& [c, p] : parent) ch[p].push_back(c);
    for (auto& [p, v] : ch) std::sort(v.begin(), v.end());
    return ch;
  }
};

// Build a RootedTree from arborescence edges; validates unique parents and
// connectivity from the root.
inline RootedTree tree_from_edges(int root, const std::vector<Edge>& edges) {
  RootedTree t;
  t.root = root;
  for (const auto& e : edges) {
    require(!t.parent.count(e.tail), Errc::validation,
            "vertex " + std::to_string(e.tail) + " has two parents");
    require(e.tail != root, Errc::validation, "edge into root");
    t.parent[e.tail] = e.head;
  }
  for (auto& [c, p] : t.parent) {
    int cur = p;
    int guard = 0;
    while (cur != root) {
      auto it = t.parent.find(cur);
      require(it != t.parent.end(), Errc::validation, "disconnected arborescence");
      cur = it->second;
      require(++guard <= static_cast<int>(t.parent.size()) + 1, Errc::validation,
              "cycle in arborescence");
    }
  }
  return t;
}

}  // namespace dstq

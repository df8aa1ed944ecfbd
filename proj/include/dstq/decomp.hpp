#pragma once

// Balanced tree partition and decomposition trees.
//
// A decomposition tree of an arborescence T is a rooted tree whose nodes
// carry a graph vertex mu; leaves additionally carry an edge e with
// head(e) = mu. Required properties:
//   (a) mu(root) = root(T)
//   (b) every leaf's mu equals head of its edge
//   (c) for every internal node a and child b with mu(b) != mu(a), some other
//       child b' has mu(b') = mu(a) and mu(b) involved in b''s subtree
// where a vertex w is "involved" in a subtree if it appears as some node's mu
// or as the tail of some leaf edge.

#include <algorithm>
#include <map>
#include <optional>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include "dstq/errors.hpp"
#include "dstq/graph.hpp"
#include "dstq/rational.hpp"

namespace dstq {

// smallest d with (3/2)^d >= n, plus 2 (exact integer arithmetic)
inline int depth_bound(int n) {
  require(n >= 1, Errc::validation, "depth_bound needs n >= 1");
  int d = 0;
  Rational pow(1);
  while (pow < n) {
    pow *= Rational(3, 2);
    ++d;
  }
  return d + 2;
}

// Lowest-id vertex whose removal leaves components of size <= n/2.
inline int tree_separator(const RootedTree& t) {
  auto ch = t.children();
  std::map<int, int> size;
  // subtree sizes via iterative post-order
  {
    std::vector<std::pair<int, bool>> stack{{t.root, false}};
    while (!stack.empty()) {
      auto [v, done] = stack.back();
      stack.pop_back();
      if (done) {
        int s = 1;
        auto it = ch.find(v);
        if (it != ch.end())
          for (int c : it->second) s += size[c];
        size[v] = s;
      } else {
        stack.push_back({v, true});
        auto it = ch.find(v);
        if (it != ch.end())
          for (int c : it->second) stack.push_back({c, false});
      }
    }
  }
  int n = size[t.root];
  for (int v : t.vertices()) {
    int worst = n - size[v];  // component containing the root after removing v
    auto it = ch.find(v);
    if (it != ch.end())
      for (int c : it->second) worst = std::max(worst, size[c]);
    if (2 * worst <= n) return v;  // vertices() iterates in increasing id
  }
  fail(Errc::validation, "no separator found (impossible for a tree)");
}

struct Partition {
  RootedTree t1;  // rooted at root(T), contains the separator
  RootedTree t2;  // rooted at the separator
  int separator = -1;
};

// Split T at its separator v into edge-disjoint subtrees sharing only v,
// each with fewer than 2n/3 + 1 vertices. Removing v leaves components
// (child subtrees of v plus, when v is not the root, the part containing the
// root); we greedily pack components in increasing (size, root id) order
// while the packed size stays below 2n/3, ending up on one side with v; the
// rest forms the other side with v.
inline Partition balanced_partition(const RootedTree& t) {
  int n = t.size();
  require(n >= 3, Errc::validation, "balanced_partition needs n >= 3");
  int v = tree_separator(t);
  auto ch = t.children();

  struct Comp {
    int root;
    bool rest;  // the component containing root(T)
    std::set<int> verts;
  };
  std::vector<Comp> comps;
  auto subtree_verts = [&](int r) {
    std::set<int> vs;
    std::vector<int> stack{r};
    while (!stack.empty()) {
      int u = stack.back();
      stack.pop_back();
      vs.insert(u);
      auto it = ch.find(u);
      if (it != ch.end())
        for (int c : it->second) stack.push_back(c);
    }
    return vs;
  };
  std::set<int> below_v = subtree_verts(v);
  auto itv = ch.find(v);
  if (itv != ch.end())
    for (int c : itv->second) comps.push_back({c, false, subtree_verts(c)});
  if (v != t.root) {
    Comp rest{t.root, true, {}};
    for (int u : t.vertices())
      if (!below_v.count(u)) rest.verts.insert(u);
    comps.push_back(std::move(rest));
  }
  std::sort(comps.begin(), comps.end(), [](const Comp& a, const Comp& b) {
    if (a.verts.size() != b.verts.size()) return a.verts.size() < b.verts.size();
    return a.root < b.root;
  });
  std::vector<char> packed(comps.size(), 0);
  int packed_size = 0;
  for (size_t i = 0; i < comps.size(); ++i)
    if (3 * (packed_size + static_cast<int>(comps[i].verts.size())) < 2 * n) {
      packed[i] = 1;
      packed_size += static_cast<int>(comps[i].verts.size());
    }

  // Decide which side keeps the original root.
  bool rest_packed = false;
  for (size_t i = 0; i < comps.size(); ++i)
    if (comps[i].rest && packed[i]) rest_packed = true;
  bool packed_is_t1 = (v == t.root) ? true : rest_packed;

  Partition out;
  out.separator = v;
  auto build_side = [&](bool take_packed) {
    RootedTree side;
    std::set<int> verts{v};
    for (size_t i = 0; i < comps.size(); ++i)
      if (static_cast<bool>(packed[i]) == take_packed)
        verts.insert(comps[i].verts.begin(), comps[i].verts.end());
    side.root = verts.count(t.root) ? t.root : v;
    for (int u : verts)
      if (u != side.root) {
        auto it = t.parent.find(u);
        require(it != t.parent.end() && verts.count(it->second), Errc::validation,
                "partition side disconnected");
        side.parent[u] = it->second;
      }
    return side;
  };
  out.t1 = build_side(packed_is_t1);
  out.t2 = build_side(!packed_is_t1);
  require(out.t1.root == t.root, Errc::validation, "t1 must keep the original root");
  require(out.t2.root == v || (v == t.root && out.t2.root == v), Errc::validation,
          "t2 must be rooted at the separator");
  require(3 * out.t1.size() < 2 * n + 3 && 3 * out.t2.size() < 2 * n + 3, Errc::validation,
          "partition side exceeds 2n/3 + 1");
  require(out.t1.size() + out.t2.size() == n + 1, Errc::validation,
          "sides must share exactly the separator");
  return out;
}

// ---------------------------------------------------------------------------

struct DecompNode {
  int mu = -1;
  std::optional<Edge> edge;  // present exactly on leaves
  std::vector<DecompNode> children;

  bool is_leaf() const { return children.empty(); }
};

inline Rational decomposition_cost(const DecompNode& d) {
  if (d.is_leaf()) {
    require(d.edge.has_value(), Errc::validation, "leaf without edge");
    return d.edge->cost;
  }
  Rational c(0);
  for (const auto& k : d.children) c += decomposition_cost(k);
  return c;
}

inline int decomposition_height(const DecompNode& d) {
  int h = 0;
  for (const auto& k : d.children) h = std::max(h, 1 + decomposition_height(k));
  return h;
}

inline void involved_vertices(const DecompNode& d, std::set<int>& out) {
  out.insert(d.mu);
  if (d.edge) out.insert(d.edge->tail);
  for (const auto& k : d.children) involved_vertices(k, out);
}

inline std::set<int> involved_vertices(const DecompNode& d) {
  std::set<int> out;
  involved_vertices(d, out);
  return out;
}

struct DecompCheck {
  bool ok = true;
  std::string why;
};

namespace detail {
inline void validate_decomp_node(const DecompNode& d, DecompCheck& res, std::string path) {
  if (!res.ok) return;
  if (d.is_leaf()) {
    if (!d.edge) {
      res = {false, "leaf " + path + " has no edge (property b)"};
      return;
    }
    if (d.edge->head != d.mu) {
      res = {false, "leaf " + path + ": mu != head(e) (property b)"};
      return;
    }
    return;
  }
  if (d.edge) {
    res = {false, "internal node " + path + " carries an edge"};
    return;
  }
  for (size_t i = 0; i < d.children.size(); ++i) {
    const auto& c = d.children[i];
    if (c.mu != d.mu) {
      bool witnessed = false;
      for (const auto& w : d.children)
        if (w.mu == d.mu && involved_vertices(w).count(c.mu)) witnessed = true;
      if (!witnessed) {
        res = {false, "node " + path + " child " + std::to_string(i) +
                          ": no same-mu sibling involves mu=" + std::to_string(c.mu) +
                          " (property c)"};
        return;
      }
    }
  }
  for (size_t i = 0; i < d.children.size(); ++i)
    validate_decomp_node(d.children[i], res, path + "." + std::to_string(i));
}
}  // namespace detail

inline DecompCheck validate_decomposition(const DecompNode& d, int expected_root) {
  DecompCheck res;
  if (d.mu != expected_root) return {false, "root mu != instance root (property a)"};
  detail::validate_decomp_node(d, res, "r");
  return res;
}

// Recursive construction: a single edge becomes a leaf; otherwise split with
// balanced_partition and recurse on both sides. Height is empirically bounded
// by depth_bound(n).
inline DecompNode build_decomposition_tree(const RootedTree& t,
                                           const std::map<std::pair<int, int>, Rational>& cost) {
  int n = t.size();
  require(n >= 2, Errc::validation, "tree needs at least one edge");
  if (n == 2) {
    auto it = t.parent.begin();
    int child = it->first, par = it->second;
    auto c = cost.find({par, child});
    require(c != cost.end(), Errc::validation, "missing edge cost");
    DecompNode leaf;
    leaf.mu = par;
    leaf.edge = Edge{par, child, c->second};
    return leaf;
  }
  auto part = balanced_partition(t);
  DecompNode node;
  node.mu = t.root;
  node.children.push_back(build_decomposition_tree(part.t1, cost));
  node.children.push_back(build_decomposition_tree(part.t2, cost));
  return node;
}

// Collect the distinct leaf edges, verify them against the instance, check
// terminal coverage, then prune to an arborescence. The result costs at most
// cost(tau); strictly less when duplicate leaf edges collapse.
inline std::vector<Edge> decomposition_to_steiner(const DecompNode& d, const DstInstance& inst) {
  std::vector<Edge> edges;
  std::set<std::pair<int, int>> seen;
  std::vector<const DecompNode*> stack{&d};
  while (!stack.empty()) {
    const DecompNode* cur = stack.back();
    stack.pop_back();
    if (cur->is_leaf()) {
      require(cur->edge.has_value(), Errc::validation, "leaf without edge");
      if (seen.insert({cur->edge->head, cur->edge->tail}).second) edges.push_back(*cur->edge);
    }
    for (const auto& c : cur->children) stack.push_back(&c);
  }
  std::sort(edges.begin(), edges.end());
  auto check = validate_solution(inst, edges);
  require(check.ok, Errc::validation, "decomposition does not cover terminals: " + check.why);
  return prune_to_arborescence(inst, edges);
}

// One node per line: "<depth> <mu>" or "<depth> <mu> <head> <tail> <cost>".
inline std::string serialize_decomposition(const DecompNode& d) {
  std::ostringstream out;
  struct Item {
    const DecompNode* node;
    int depth;
  };
  std::vector<Item> stack{{&d, 0}};
  while (!stack.empty()) {
    auto [node, depth] = stack.back();
    stack.pop_back();
    out << depth << " " << node->mu;
    if (node->edge)
      out << " " << node->edge->head << " " << node->edge->tail << " "
          << format_rational(node->edge->cost);
    out << "\n";
    for (auto it = node->children.rbegin(); it != node->children.rend(); ++it)
      stack.push_back({&*it, depth + 1});
  }
  return out.str();
}

}  // namespace dstq

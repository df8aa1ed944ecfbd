#pragma once

// Reduction from Directed Steiner Tree (on the metric closure) to
// Label-Consistent Subtree.
//
// The decomposition tree of an optimum is sliced into "twigs": full binary
// fragments of depth <= g, where every internal node keeps its vertex on at
// least one child and leaves may carry a closure edge ending at their vertex.
// The label tree alternates p-nodes (cost 0, one fresh demand label; stand
// for "some twig rooted at vertex u will be placed here") and q-nodes (one
// per candidate twig; cost = defined leaf edges). Demand labels tie a q-node
// to the sub-p-node of each undefined leaf; extra consistency labels force a
// witness for every internal twig node whose off-vertex child is not already
// witnessed inside the twig. Global labels 0..k-1 are the sorted terminals
// and are served wherever a twig's defined leaf ends at that terminal.
//
// The full label tree is astronomically large, so children are materialized
// lazily and memoized; node ids and fresh labels come from deterministic
// counters in materialization order, so every artifact is reproducible.

#include <algorithm>
#include <cmath>
#include <map>
#include <optional>
#include <set>
#include <sstream>
#include <string>
#include <utility>
#include <vector>

#include "dstq/decomp.hpp"
#include "dstq/errors.hpp"
#include "dstq/graph.hpp"
#include "dstq/lcst.hpp"
#include "dstq/rational.hpp"

namespace dstq {

// ----------------------------- parameters ----------------------------------

struct ReductionCaps {
  long max_twigs = 200000;       // per root vertex, in one enumeration
  long max_tree_nodes = 200000;  // label-tree nodes ever materialized
};

struct ReductionParams {
  int g = 1;      // twig collapse depth
  int hbar = 1;   // decomposition height bound
  int depth = 1;  // label-tree recursion depth ceil(hbar / g)
  bool lowered = false;  // an override reduced hbar/depth (no guarantee)
  ReductionCaps caps;
};

namespace detail {
// smallest t >= 0 with 2^t >= x (x >= 1)
inline int ceil_log2(long x) {
  int t = 0;
  long p = 1;
  while (p < x) {
    p *= 2;
    ++t;
  }
  return t;
}
}  // namespace detail

inline ReductionParams choose_params(int k, std::optional<int> depth_override = {},
                                     std::optional<int> g_override = {}) {
  require(k >= 1, Errc::validation, "need at least one terminal");
  ReductionParams p;
  p.g = g_override ? *g_override : std::max(1, detail::ceil_log2(detail::ceil_log2(k)));
  require(p.g >= 1, Errc::validation, "g must be >= 1");
  p.hbar = depth_bound(2 * k);
  p.depth = (p.hbar + p.g - 1) / p.g;
  if (depth_override && *depth_override < p.depth) {
    p.depth = *depth_override;
    p.lowered = true;
  }
  require(p.depth >= 1, Errc::validation, "depth must be >= 1");
  return p;
}

// ------------------------------- twigs -------------------------------------

struct TwigNode {
  int mu = -1;
  std::optional<Edge> edge;       // leaves only; head(edge) == mu
  std::vector<TwigNode> children;  // 0 or 2, sorted by twig_key

  bool is_leaf() const { return children.empty(); }
};

inline std::string twig_key(const TwigNode& t) {
  std::string s;
  if (t.is_leaf()) {
    s = "L" + std::to_string(t.mu);
    if (t.edge)
      s += ";" + std::to_string(t.edge->head) + "," + std::to_string(t.edge->tail) + "," +
           format_rational(t.edge->cost);
  } else {
    s = "I" + std::to_string(t.mu) + "(" + twig_key(t.children[0]) + ")(" +
        twig_key(t.children[1]) + ")";
  }
  return s;
}

struct TwigCheck {
  bool ok = true;
  std::string why;
};

inline void validate_twig_rec(const TwigNode& t, int g, TwigCheck& out) {
  if (!out.ok) return;
  if (t.is_leaf()) {
    if (t.edge && t.edge->head != t.mu) {
      out = {false, "leaf edge head differs from leaf vertex"};
    }
    return;
  }
  if (t.children.size() != 2) {
    out = {false, "internal twig node must have exactly two children"};
    return;
  }
  if (g <= 0) {
    out = {false, "twig deeper than the depth bound"};
    return;
  }
  if (t.children[0].mu != t.mu && t.children[1].mu != t.mu) {
    out = {false, "internal twig node has no child with the same vertex"};
    return;
  }
  for (const auto& c : t.children) validate_twig_rec(c, g - 1, out);
}

inline TwigCheck validate_twig(const TwigNode& t, int g) {
  TwigCheck out;
  validate_twig_rec(t, g, out);
  return out;
}

inline void canonicalize_twig(TwigNode& t) {
  for (auto& c : t.children) canonicalize_twig(c);
  if (!t.children.empty() && twig_key(t.children[1]) < twig_key(t.children[0]))
    std::swap(t.children[0], t.children[1]);
}

inline Rational twig_cost(const TwigNode& t) {
  if (t.is_leaf()) return t.edge ? t.edge->cost : Rational(0);
  return twig_cost(t.children[0]) + twig_cost(t.children[1]);
}

template <typename Fn>
inline void for_each_twig_leaf(const TwigNode& t, Fn&& fn) {  // preorder
  if (t.is_leaf()) {
    fn(t);
    return;
  }
  for_each_twig_leaf(t.children[0], fn);
  for_each_twig_leaf(t.children[1], fn);
}

namespace detail {
// all twigs (including single leaves) rooted at vertex mu with depth <= d
class TwigEnumerator {
 public:
  TwigEnumerator(const DstInstance& closure, int g, long cap)
      : closure_(closure), g_(g), cap_(cap) {}

  // non-singular (root internal) twigs only, sorted by key
  std::vector<TwigNode> non_singular(int mu) {
    std::vector<TwigNode> out;
    for (const auto& t : all(mu, g_))
      if (!t.is_leaf()) out.push_back(t);
    return out;
  }

  const std::vector<TwigNode>& all(int mu, int d) {
    auto key = std::make_pair(mu, d);
    auto it = memo_.find(key);
    if (it != memo_.end()) return it->second;
    std::vector<TwigNode> out;
    std::set<std::string> seen;
    auto push = [&](TwigNode t) {
      std::string k = twig_key(t);
      if (seen.insert(k).second) {
        out.push_back(std::move(t));
        require((long)seen.size() <= cap_, Errc::caps,
                "twig enumeration cap exceeded (" + std::to_string(seen.size()) + " twigs)");
      }
    };
    push(TwigNode{mu, std::nullopt, {}});
    for (const Edge& e : closure_.edges)
      if (e.head == mu) push(TwigNode{mu, e, {}});
    if (d >= 1) {
      // copy: recursion below may grow the memo map
      std::vector<TwigNode> same = all(mu, d - 1);
      std::vector<TwigNode> any;
      for (int v = 0; v < closure_.n; ++v) {
        const auto& opts = all(v, d - 1);
        any.insert(any.end(), opts.begin(), opts.end());
      }
      for (const TwigNode& a : same)
        for (const TwigNode& b : any) {
          TwigNode t{mu, std::nullopt, {a, b}};
          if (twig_key(t.children[1]) < twig_key(t.children[0]))
            std::swap(t.children[0], t.children[1]);
          push(std::move(t));
        }
    }
    std::sort(out.begin(), out.end(),
              [](const TwigNode& x, const TwigNode& y) { return twig_key(x) < twig_key(y); });
    return memo_.emplace(key, std::move(out)).first->second;
  }

 private:
  const DstInstance& closure_;
  int g_;
  long cap_;
  std::map<std::pair<int, int>, std::vector<TwigNode>> memo_;
};
}  // namespace detail

inline std::vector<TwigNode> enumerate_twigs(const DstInstance& closure, int rootMu, int g,
                                             const ReductionCaps& caps = {}) {
  detail::TwigEnumerator en(closure, g, caps.max_twigs);
  return en.non_singular(rootMu);
}

// ----------------------------- label tree ----------------------------------

class LabelTree {
 public:
  struct Node {
    int id = -1;
    int parent = -1;
    bool is_q = false;
    int u = -1;        // p-nodes: vertex this slot stands for
    int j = 0;         // p-nodes: recursion depth
    TwigNode eta;      // q-nodes
    Rational cost;
    std::vector<int> dem, ser;
    // (label, target vertex): every q-node below whose twig has a defined
    // leaf ending at the target serves the label
    std::vector<std::pair<int, int>> obligations;
    bool expanded = false;
    std::vector<int> children;
    std::vector<int> undef_leaf_child;  // q-nodes: p child per undefined leaf, preorder
  };

  LabelTree(DstInstance closure, std::vector<int> terminals, const ReductionParams& params)
      : closure_(std::move(closure)), params_(params),
        enumerator_(closure_, params.g, params.caps.max_twigs) {
    std::sort(terminals.begin(), terminals.end());
    terminals_ = std::move(terminals);
    num_globals_ = (int)terminals_.size();
    next_label_ = num_globals_;
    int root = new_node();
    nodes_[root].u = closure_.root;
    nodes_[root].j = 0;
    nodes_[root].dem = {fresh_label()};
  }

  LabelTree(const LabelTree&) = delete;
  LabelTree& operator=(const LabelTree&) = delete;

  const DstInstance& closure() const { return closure_; }
  const ReductionParams& params() const { return params_; }
  int num_globals() const { return num_globals_; }
  int num_labels() const { return next_label_; }
  int size() const { return (int)nodes_.size(); }
  const Node& node(int id) const { return nodes_.at(id); }

  const Node& expand(int id) {
    Node& nd = nodes_.at(id);
    if (nd.expanded) return nd;
    nd.expanded = true;
    if (!nd.is_q) {
      if (nd.j < params_.depth) {
        for (const TwigNode& eta : enumerator_.non_singular(nd.u)) {
          int q = make_q(id, eta);
          nodes_[id].children.push_back(q);
          twig_child_[{id, twig_key(eta)}] = q;
        }
      }
      return nodes_[id];
    }
    expand_q(id);
    return nodes_[id];
  }

  // memoized lookup of the q child of p-node `pid` realizing this twig
  int child_for_twig(int pid, const TwigNode& eta) {
    expand(pid);
    auto it = twig_child_.find({pid, twig_key(eta)});
    require(it != twig_child_.end(), Errc::validation,
            "no child realizes the requested twig (depth or caps too small)");
    return it->second;
  }

  // instance over every node materialized so far (ids are stable)
  LcstInstance materialized_instance() const {
    LcstInstance inst;
    inst.root = 0;
    inst.num_globals = num_globals_;
    inst.num_labels = next_label_;
    inst.nodes.resize(nodes_.size());
    for (const Node& nd : nodes_) {
      LcstNode& out = inst.nodes[nd.id];
      out.parent = nd.parent;
      out.cost = nd.cost;
      out.dem = nd.dem;
      out.ser = nd.ser;
      std::sort(out.dem.begin(), out.dem.end());
      std::sort(out.ser.begin(), out.ser.end());
    }
    return inst;
  }

  // full materialization (preorder), then export
  LcstInstance to_lcst_instance() {
    std::vector<int> stack{0};
    while (!stack.empty()) {
      int id = stack.back();
      stack.pop_back();
      const Node& nd = expand(id);
      for (auto it = nd.children.rbegin(); it != nd.children.rend(); ++it) stack.push_back(*it);
    }
    return materialized_instance();
  }

  int global_label(int vertex) const {
    auto it = std::lower_bound(terminals_.begin(), terminals_.end(), vertex);
    if (it == terminals_.end() || *it != vertex) return -1;
    return (int)(it - terminals_.begin());
  }

 private:
  DstInstance closure_;
  std::vector<int> terminals_;
  ReductionParams params_;
  detail::TwigEnumerator enumerator_;
  std::vector<Node> nodes_;
  std::map<std::pair<int, std::string>, int> twig_child_;
  int num_globals_ = 0;
  int next_label_ = 0;

  int fresh_label() { return next_label_++; }

  int new_node() {
    require((long)nodes_.size() < params_.caps.max_tree_nodes, Errc::caps,
            "label-tree node cap exceeded (" + std::to_string(nodes_.size()) + " nodes)");
    Node nd;
    nd.id = (int)nodes_.size();
    nodes_.push_back(std::move(nd));
    return nodes_.back().id;
  }

  int make_q(int pid, const TwigNode& eta) {
    int q = new_node();
    Node& nd = nodes_[q];
    nd.parent = pid;
    nd.is_q = true;
    nd.eta = eta;
    nd.j = nodes_[pid].j;
    nd.cost = twig_cost(eta);
    nd.ser.push_back(nodes_[pid].dem[0]);
    nd.obligations = nodes_[pid].obligations;
    std::set<int> tails;
    for_each_twig_leaf(eta, [&](const TwigNode& leaf) {
      if (leaf.edge) tails.insert(leaf.edge->tail);
    });
    for (int t : tails) {
      int g = global_label(t);
      if (g >= 0) nd.ser.push_back(g);
    }
    for (const auto& [label, target] : nd.obligations)
      if (tails.count(target)) nd.ser.push_back(label);
    return q;
  }

  // create the p children (one per undefined leaf) and the tie/consistency
  // demand labels of an already-created q node
  void expand_q(int qid) {
    TwigNode eta = nodes_[qid].eta;  // copy: nodes_ may reallocate below
    std::vector<std::pair<int, int>> base_obl = nodes_[qid].obligations;
    int j = nodes_[qid].j;
    // undefined leaves in preorder -> p children
    std::vector<int> kids;
    for_each_twig_leaf(eta, [&](const TwigNode& leaf) {
      if (leaf.edge) return;
      int p = new_node();
      Node& nd = nodes_[p];
      nd.parent = qid;
      nd.u = leaf.mu;
      nd.j = j + 1;
      nd.obligations = base_obl;
      nd.dem = {fresh_label()};
      int tie = fresh_label();
      nd.ser.push_back(tie);
      nodes_[qid].dem.push_back(tie);
      kids.push_back(p);
    });
    nodes_[qid].children = kids;
    nodes_[qid].undef_leaf_child = kids;
    // consistency labels: internal twig nodes in preorder
    std::vector<const TwigNode*> order;
    std::vector<const TwigNode*> st{&eta};
    while (!st.empty()) {
      const TwigNode* t = st.back();
      st.pop_back();
      if (t->is_leaf()) continue;
      order.push_back(t);
      st.push_back(&t->children[1]);
      st.push_back(&t->children[0]);
    }
    // map from leaf (by preorder index among undefined leaves) to p child is
    // `kids`; recover per-subtree membership by walking with a counter
    for (const TwigNode* alpha : order) {
      int a1 = alpha->children[0].mu == alpha->mu ? 0 : 1;
      const TwigNode& c1 = alpha->children[a1];
      const TwigNode& c2 = alpha->children[1 - a1];
      if (c2.mu == alpha->mu) continue;
      bool witnessed = false;
      for_each_twig_leaf(c1, [&](const TwigNode& leaf) {
        if (leaf.edge && leaf.edge->tail == c2.mu) witnessed = true;
      });
      if (witnessed) continue;
      int label = fresh_label();
      nodes_[qid].dem.push_back(label);
      // attach the obligation to the p children under c1's undefined leaves
      int idx = 0;
      mark_designated(eta, &c1, c2.mu, label, kids, idx);
    }
  }

  // walk `cur` in preorder counting undefined leaves; inside `designated`,
  // push (label, target) onto the corresponding p child
  void mark_designated(const TwigNode& cur, const TwigNode* designated, int target, int label,
                       const std::vector<int>& kids, int& idx, bool inside = false) {
    bool here = inside || &cur == designated;
    if (cur.is_leaf()) {
      if (!cur.edge) {
        if (here) nodes_[kids[idx]].obligations.push_back({label, target});
        ++idx;
      }
      return;
    }
    mark_designated(cur.children[0], designated, target, label, kids, idx, here);
    mark_designated(cur.children[1], designated, target, label, kids, idx, here);
  }
};

// ----------------------------- twig forest ---------------------------------

// decomposition tree sliced into depth-g strata
struct TwigForestNode {
  TwigNode twig;  // canonical
  std::vector<TwigForestNode> children;  // per undefined leaf, preorder
};

namespace detail {
// annotated twig: undefined leaves carry the decomposition node continuing
// below the cut
struct SliceNode {
  int mu = -1;
  std::optional<Edge> edge;
  std::vector<SliceNode> children;
  const DecompNode* cont = nullptr;

  TwigNode strip() const {
    TwigNode t{mu, edge, {}};
    for (const auto& c : children) t.children.push_back(c.strip());
    return t;
  }
};

inline SliceNode slice(const DecompNode& d, int levels) {
  SliceNode s;
  s.mu = d.mu;
  if (d.is_leaf()) {
    s.edge = d.edge;
    return s;
  }
  if (levels == 0) {
    s.cont = &d;  // internal node at the cut: undefined leaf, child twig root
    return s;
  }
  for (const auto& c : d.children) s.children.push_back(slice(c, levels - 1));
  return s;
}

inline void canonicalize_slice(SliceNode& s) {
  for (auto& c : s.children) canonicalize_slice(c);
  std::stable_sort(s.children.begin(), s.children.end(),
                   [](const SliceNode& a, const SliceNode& b) {
                     return twig_key(a.strip()) < twig_key(b.strip());
                   });
}

inline TwigForestNode forest_from(const DecompNode& d, int g) {
  SliceNode s = slice(d, g);
  canonicalize_slice(s);
  TwigForestNode out;
  out.twig = s.strip();
  std::vector<const DecompNode*> conts;
  // undefined leaves in preorder of the canonical twig
  std::vector<const SliceNode*> stack{&s};
  while (!stack.empty()) {
    const SliceNode* cur = stack.back();
    stack.pop_back();
    if (cur->children.empty()) {
      if (!cur->edge) conts.push_back(cur->cont);
      continue;
    }
    for (auto it = cur->children.rbegin(); it != cur->children.rend(); ++it)
      stack.push_back(&*it);
  }
  for (const DecompNode* c : conts) {
    require(c != nullptr, Errc::validation, "undefined twig leaf without continuation");
    out.children.push_back(forest_from(*c, g));
  }
  return out;
}
}  // namespace detail

// duplicate a single-leaf decomposition into a valid two-child one; the
// duplicate edge collapses again when the decomposition is read back as a
// Steiner tree, so end-to-end cost is unaffected
inline DecompNode pad_singleton(const DecompNode& tau) {
  if (!tau.is_leaf()) return tau;
  DecompNode root;
  root.mu = tau.mu;
  root.children = {tau, tau};
  return root;
}

inline TwigForestNode twig_forest(const DecompNode& tau, int g) {
  require(!tau.is_leaf(), Errc::validation, "single-leaf decomposition: pad it first");
  return detail::forest_from(tau, g);
}

inline int forest_depth(const TwigForestNode& f) {
  int d = 0;
  for (const auto& c : f.children) d = std::max(d, 1 + forest_depth(c));
  return d;
}

// ------------------------ embed / read back --------------------------------

namespace detail {
inline void embed_rec(LabelTree& lt, int pid, const TwigForestNode& f, std::set<int>& sol) {
  require(lt.node(pid).u == f.twig.mu, Errc::validation,
          "embedding slot vertex differs from twig root vertex");
  int q = lt.child_for_twig(pid, f.twig);
  sol.insert(pid);
  sol.insert(q);
  lt.expand(q);
  std::vector<int> kids = lt.node(q).undef_leaf_child;  // copy: tree grows below
  require(kids.size() == f.children.size(), Errc::validation,
          "undefined-leaf count mismatch while embedding");
  for (size_t i = 0; i < kids.size(); ++i) embed_rec(lt, kids[i], f.children[i], sol);
}
}  // namespace detail

// select the label-tree nodes realizing the twig forest; cost of the
// selection equals the cost of the decomposition tree it came from
inline std::set<int> embed_optimal(LabelTree& lt, const TwigForestNode& forest) {
  std::set<int> sol;
  detail::embed_rec(lt, 0, forest, sol);
  return sol;
}

namespace detail {
inline void graft(LabelTree& lt, const std::set<int>& sol, int pid, DecompNode& at);

inline DecompNode decomp_from_twig(LabelTree& lt, const std::set<int>& sol, int qid,
                                   const TwigNode& t, const std::vector<int>& kids, int& idx) {
  DecompNode d;
  d.mu = t.mu;
  if (t.is_leaf()) {
    if (t.edge) {
      d.edge = t.edge;
    } else {
      int p = kids[idx++];
      graft(lt, sol, p, d);
    }
    return d;
  }
  d.children.push_back(decomp_from_twig(lt, sol, qid, t.children[0], kids, idx));
  d.children.push_back(decomp_from_twig(lt, sol, qid, t.children[1], kids, idx));
  return d;
}

// identify `at` (an undefined cut node with vertex u_p) with the roots of
// the twigs of all selected q children of p
inline void graft(LabelTree& lt, const std::set<int>& sol, int pid, DecompNode& at) {
  std::vector<int> qs = lt.expand(pid).children;  // copies: tree grows while grafting
  for (int q : qs) {
    if (!sol.count(q)) continue;
    lt.expand(q);
    TwigNode eta = lt.node(q).eta;
    std::vector<int> kids = lt.node(q).undef_leaf_child;
    require(eta.mu == at.mu, Errc::validation, "identified nodes carry different vertices");
    int idx = 0;
    DecompNode sub = decomp_from_twig(lt, sol, q, eta, kids, idx);
    for (auto& c : sub.children) at.children.push_back(std::move(c));
  }
  require(!at.children.empty() || at.edge.has_value(), Errc::validation,
          "selected slot has no selected twig below it");
}
}  // namespace detail

// read a label-consistent solution back as a decomposition tree rooted at
// the singular root twig; costs match exactly
inline DecompNode lcst_to_decomposition(LabelTree& lt, const std::set<int>& sol) {
  require(sol.count(0), Errc::validation, "solution does not contain the root");
  DecompNode root;
  root.mu = lt.node(0).u;
  detail::graft(lt, sol, 0, root);
  Rational sol_cost(0);
  for (int v : sol) sol_cost += lt.node(v).cost;
  require(decomposition_cost(root) == sol_cost, Errc::validation,
          "reconstructed decomposition cost differs from solution cost");
  return root;
}

}  // namespace dstq

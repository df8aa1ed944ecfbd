#pragma once

// Label-consistent subtree instances.
//
// An instance is a rooted node-weighted tree; each node may demand labels and
// serve labels. Global labels (a reserved low id range [0, num_globals)) must
// be served by every solution. A solution is a subtree containing the root
// such that for every selected node u and demanded label l, some selected
// node in u's subtree serves l.
//
// The normalized form pushes every service onto a dedicated leaf (one label
// per leaf), makes demand sets disjoint across nodes and internal-only, and
// is what the LP and the rounding procedure consume.

#include <algorithm>
#include <map>
#include <optional>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include "dstq/errors.hpp"
#include "dstq/rational.hpp"

namespace dstq {

struct LcstNode {
  int parent = -1;  // -1 for the root
  Rational cost;
  std::vector<int> dem;  // sorted
  std::vector<int> ser;  // sorted
};

struct LcstInstance {
  std::vector<LcstNode> nodes;
  int root = 0;
  int num_globals = 0;
  int num_labels = 0;

  int n() const { return static_cast<int>(nodes.size()); }
  std::vector<std::vector<int>> children() const {
    std::vector<std::vector<int>> ch(nodes.size());
    for (size_t v = 0; v < nodes.size(); ++v)
      if (nodes[v].parent >= 0) ch[nodes[v].parent].push_back(static_cast<int>(v));
    return ch;
  }
};

inline void validate_instance(const LcstInstance& inst) {
  int root_count = 0;
  for (int v = 0; v < inst.n(); ++v) {
    const auto& nd = inst.nodes[v];
    if (nd.parent < 0) {
      ++root_count;
      require(v == inst.root, Errc::validation, "root mismatch");
    } else {
      require(nd.parent < inst.n(), Errc::validation, "parent out of range");
    }
    require(nd.cost >= 0, Errc::validation, "negative node cost");
    for (int l : nd.dem) {
      require(l >= 0 && l < inst.num_labels, Errc::validation, "demand label out of range");
      require(l >= inst.num_globals, Errc::validation, "global labels cannot be demanded");
    }
    for (int l : nd.ser)
      require(l >= 0 && l < inst.num_labels, Errc::validation, "service label out of range");
  }
  require(root_count == 1, Errc::validation, "exactly one root required");
  // acyclicity
  for (int v = 0; v < inst.n(); ++v) {
    int cur = v, guard = 0;
    while (cur != inst.root) {
      cur = inst.nodes[cur].parent;
      require(cur >= 0 && ++guard <= inst.n(), Errc::validation, "parent cycle");
    }
  }
  require(inst.num_globals >= 0 && inst.num_globals <= inst.num_labels, Errc::validation,
          "bad label counts");
}

// --------------------------- text format -----------------------------------
// lcst <N>
// node <id> <parent|-> <cost> dem:<l1,l2,...> ser:<l1,l2,...>
// globals <g1> <g2> ...          (must be 0..k-1)
// '#' starts a comment.

inline LcstInstance parse_lcst(std::istream& in) {
  LcstInstance inst;
  std::string line;
  int lineno = 0, declared = -1;
  bool saw_globals = false;
  int max_label = -1;
  auto bad = [&](const std::string& why) {
    fail(Errc::parse, "line " + std::to_string(lineno) + ": " + why);
  };
  auto parse_label_list = [&](const std::string& tok, const std::string& prefix) {
    if (tok.rfind(prefix, 0) != 0) bad("expected '" + prefix + "...'");
    std::vector<int> out;
    std::string rest = tok.substr(prefix.size());
    std::istringstream ls(rest);
    std::string item;
    while (std::getline(ls, item, ',')) {
      if (item.empty()) bad("empty label id");
      try {
        out.push_back(std::stoi(item));
      } catch (const std::exception&) {
        bad("bad label id '" + item + "'");
      }
      max_label = std::max(max_label, out.back());
    }
    std::sort(out.begin(), out.end());
    out.erase(std::unique(out.begin(), out.end()), out.end());
    return out;
  };
  std::map<int, LcstNode> staged;
  while (std::getline(in, line)) {
    ++lineno;
    std::istringstream ls(line);
    std::vector<std::string> tok;
    std::string t;
    while (ls >> t) {
      if (t[0] == '#') break;
      tok.push_back(t);
    }
    if (tok.empty()) continue;
    if (tok[0] == "lcst") {
      if (declared >= 0) bad("duplicate header");
      if (tok.size() != 2) bad("'lcst <N>'");
      declared = std::stoi(tok[1]);
      if (declared < 1) bad("N must be >= 1");
    } else if (tok[0] == "node") {
      if (declared < 0) bad("'node' before header");
      if (tok.size() != 6) bad("'node <id> <parent|-> <cost> dem:... ser:...'");
      int id = std::stoi(tok[1]);
      if (id < 0 || id >= declared) bad("node id out of range");
      if (staged.count(id)) bad("duplicate node id");
      LcstNode nd;
      nd.parent = tok[2] == "-" ? -1 : std::stoi(tok[2]);
      if (nd.parent >= declared || nd.parent < -1) bad("parent out of range");
      try {
        nd.cost = parse_rational(tok[3]);
      } catch (const std::exception& e) {
        bad(e.what());
      }
      if (nd.cost < 0) bad("negative cost");
      nd.dem = parse_label_list(tok[4], "dem:");
      nd.ser = parse_label_list(tok[5], "ser:");
      staged[id] = std::move(nd);
    } else if (tok[0] == "globals") {
      if (saw_globals) bad("duplicate globals line");
      for (size_t i = 1; i < tok.size(); ++i) {
        int g = std::stoi(tok[i]);
        if (g != static_cast<int>(i) - 1) bad("globals must be the contiguous range 0..k-1");
        max_label = std::max(max_label, g);
        ++inst.num_globals;
      }
      saw_globals = true;
    } else {
      bad("unknown directive '" + tok[0] + "'");
    }
  }
  lineno = 0;
  if (declared < 0) fail(Errc::parse, "missing 'lcst <N>' header");
  if (!saw_globals) fail(Errc::parse, "missing 'globals' line");
  if (static_cast<int>(staged.size()) != declared) fail(Errc::parse, "node count mismatch");
  inst.nodes.resize(declared);
  for (auto& [id, nd] : staged) {
    if (nd.parent < 0) inst.root = id;
    inst.nodes[id] = std::move(nd);
  }
  inst.num_labels = max_label + 1;
  validate_instance(inst);
  return inst;
}

inline LcstInstance parse_lcst(const std::string& text) {
  std::istringstream in(text);
  return parse_lcst(in);
}

inline std::string serialize_lcst(const LcstInstance& inst) {
  std::ostringstream out;
  out << "lcst " << inst.n() << "\n";
  auto label_list = [](const std::vector<int>& ls) {
    std::string s;
    for (size_t i = 0; i < ls.size(); ++i) s += (i ? "," : "") + std::to_string(ls[i]);
    return s;
  };
  for (int v = 0; v < inst.n(); ++v) {
    const auto& nd = inst.nodes[v];
    out << "node " << v << " " << (nd.parent < 0 ? std::string("-") : std::to_string(nd.parent))
        << " " << format_rational(nd.cost) << " dem:" << label_list(nd.dem)
        << " ser:" << label_list(nd.ser) << "\n";
  }
  out << "globals";
  for (int g = 0; g < inst.num_globals; ++g) out << " " << g;
  out << "\n";
  return out.str();
}

// --------------------------- validators ------------------------------------

struct LcstCheck {
  bool ok = false;
  Rational cost;
  std::string why;
};

namespace detail {
struct LcstView {
  std::vector<std::vector<int>> ch;
  std::vector<int> tin, tout;  // Euler intervals, preorder
  std::vector<std::vector<int>> servers;  // label -> serving nodes sorted by tin

  explicit LcstView(const LcstInstance& inst) {
    ch = inst.children();
    tin.assign(inst.n(), -1);
    tout.assign(inst.n(), -1);
    int timer = 0;
    std::vector<std::pair<int, bool>> stack{{inst.root, false}};
    while (!stack.empty()) {
      auto [v, done] = stack.back();
      stack.pop_back();
      if (done) {
        tout[v] = timer;
        continue;
      }
      tin[v] = timer++;
      stack.push_back({v, true});
      for (auto it = ch[v].rbegin(); it != ch[v].rend(); ++it) stack.push_back({*it, false});
    }
    servers.assign(inst.num_labels, {});
    std::vector<int> order(inst.n());
    for (int v = 0; v < inst.n(); ++v) order[v] = v;
    std::sort(order.begin(), order.end(), [&](int a, int b) { return tin[a] < tin[b]; });
    for (int v : order)
      for (int l : inst.nodes[v].ser) servers[l].push_back(v);
  }
  bool in_subtree(int v, int anc) const { return tin[v] >= tin[anc] && tin[v] < tout[anc]; }
  // does any server of l lie in the subtree of u (restricted to set s if given)
  template <typename Pred>
  bool served_in(int l, int u, Pred selected) const {
    if (l < 0 || l >= static_cast<int>(servers.size())) return false;
    for (int w : servers[l])
      if (in_subtree(w, u) && selected(w)) return true;
    return false;
  }
};
}  // namespace detail

// Label consistency only (structure + demands); global coverage handled by
// validate_full_solution.
inline LcstCheck validate_label_solution(const LcstInstance& inst, const std::set<int>& sol) {
  LcstCheck res;
  res.cost = Rational(0);
  if (!sol.count(inst.root)) {
    res.why = "root not selected";
    return res;
  }
  for (int v : sol) {
    require(v >= 0 && v < inst.n(), Errc::validation, "solution node out of range");
    if (v != inst.root && !sol.count(inst.nodes[v].parent)) {
      res.why = "node " + std::to_string(v) + " selected without its parent";
      return res;
    }
    res.cost += inst.nodes[v].cost;
  }
  detail::LcstView view(inst);
  auto selected = [&](int w) { return sol.count(w) > 0; };
  for (int v : sol)
    for (int l : inst.nodes[v].dem)
      if (!view.served_in(l, v, selected)) {
        res.why = "demand " + std::to_string(l) + " of node " + std::to_string(v) +
                  " unserved in its subtree";
        return res;
      }
  res.ok = true;
  return res;
}

inline LcstCheck validate_full_solution(const LcstInstance& inst, const std::set<int>& sol) {
  LcstCheck res = validate_label_solution(inst, sol);
  if (!res.ok) return res;
  detail::LcstView view(inst);
  auto selected = [&](int w) { return sol.count(w) > 0; };
  for (int g = 0; g < inst.num_globals; ++g)
    if (!view.served_in(g, inst.root, selected)) {
      res.ok = false;
      res.why = "global label " + std::to_string(g) + " unserved";
      return res;
    }
  return res;
}

// --------------------------- exact solvers ---------------------------------

struct LcstOpt {
  Rational value;
  std::set<int> sol;
};

// Reference solver: enumerate all root-containing subtrees (N <= 24).
inline std::optional<LcstOpt> lcst_opt_bitmask(const LcstInstance& inst) {
  int n = inst.n();
  require(n <= 24, Errc::caps, "bitmask solver cap (N <= 24) exceeded");
  std::optional<LcstOpt> best;
  for (std::uint32_t mask = 0; mask < (1u << n); ++mask) {
    if (!(mask & (1u << inst.root))) continue;
    bool closed = true;
    for (int v = 0; v < n && closed; ++v)
      if ((mask & (1u << v)) && v != inst.root && !(mask & (1u << inst.nodes[v].parent)))
        closed = false;
    if (!closed) continue;
    std::set<int> sol;
    for (int v = 0; v < n; ++v)
      if (mask & (1u << v)) sol.insert(v);
    auto check = validate_full_solution(inst, sol);
    if (check.ok && (!best || check.cost < best->value))
      best = LcstOpt{check.cost, std::move(sol)};
  }
  return best;
}

// Exact solver by exhaustive server assignment with memoization: solve(u, O)
// = min extra cost to serve labels O inside u's subtree given u is selected.
// Every label not served by u itself is assigned to one child subtree
// containing a server; assignments are enumerated exhaustively, so the
// optimum is exact. Scales to the label trees produced by the reduction.
class LcstAssignmentSolver {
 public:
  explicit LcstAssignmentSolver(const LcstInstance& inst, long state_cap = 2000000)
      : inst_(inst), view_(inst), state_cap_(state_cap) {}

  std::optional<LcstOpt> solve() {
    std::vector<int> globals;
    for (int g = 0; g < inst_.num_globals; ++g) globals.push_back(g);
    auto top = run(inst_.root, globals);
    if (!top) return std::nullopt;
    LcstOpt out;
    out.value = top->first + inst_.nodes[inst_.root].cost;
    out.sol.insert(inst_.root);
    rebuild(inst_.root, globals, out.sol);
    return out;
  }

 private:
  using Key = std::pair<int, std::vector<int>>;
  struct Entry {
    std::optional<Rational> cost;                 // extra cost below the node
    std::vector<std::pair<int, int>> assignment;  // (label, child)
  };

  const LcstInstance& inst_;
  detail::LcstView view_;
  long state_cap_;
  std::map<Key, Entry> memo_;

  std::vector<int> reduce(int u, const std::vector<int>& obligations) const {
    std::set<int> need(obligations.begin(), obligations.end());
    for (int l : inst_.nodes[u].dem) need.insert(l);
    std::vector<int> out;
    const auto& su = inst_.nodes[u].ser;
    for (int l : need)
      if (!std::binary_search(su.begin(), su.end(), l)) out.push_back(l);
    return out;  // sorted (came from a set)
  }

  std::optional<std::pair<Rational, std::vector<std::pair<int, int>>>> run(
      int u, const std::vector<int>& obligations) {
    std::vector<int> need = reduce(u, obligations);
    Key key{u, need};
    auto it = memo_.find(key);
    if (it != memo_.end()) {
      if (!it->second.cost) return std::nullopt;
      return std::make_pair(*it->second.cost, it->second.assignment);
    }
    require(static_cast<long>(memo_.size()) < state_cap_, Errc::caps,
            "assignment solver state cap exceeded");
    memo_[key] = Entry{};  // placeholder; overwritten below (tree => no reentry)
    std::vector<std::vector<int>> cands;
    bool dead = false;
    for (int l : need) {
      std::vector<int> cs;
      for (int c : view_.ch[u])
        if (view_.served_in(l, c, [](int) { return true; })) cs.push_back(c);
      if (cs.empty()) dead = true;
      cands.push_back(std::move(cs));
    }
    Entry best;
    if (!dead) {
      std::vector<size_t> pick(need.size(), 0);
      while (true) {
        std::map<int, std::vector<int>> by_child;
        for (size_t i = 0; i < need.size(); ++i) by_child[cands[i][pick[i]]].push_back(need[i]);
        Rational total(0);
        bool ok = true;
        std::vector<std::pair<int, int>> asg;
        for (auto& [c, ls] : by_child) {
          auto sub = run(c, ls);
          if (!sub) {
            ok = false;
            break;
          }
          total += inst_.nodes[c].cost + sub->first;
          for (int l : ls) asg.push_back({l, c});
        }
        if (ok && (!best.cost || total < *best.cost)) {
          best.cost = total;
          best.assignment = std::move(asg);
        }
        size_t i = 0;
        while (i < pick.size() && pick[i] + 1 == cands[i].size()) pick[i++] = 0;
        if (i == pick.size()) break;
        ++pick[i];
        if (need.empty()) break;
      }
      if (need.empty()) best = Entry{Rational(0), {}};
    }
    memo_[key] = best;
    if (!best.cost) return std::nullopt;
    return std::make_pair(*best.cost, best.assignment);
  }

  void rebuild(int u, const std::vector<int>& obligations, std::set<int>& sol) {
    std::vector<int> need = reduce(u, obligations);
    const Entry& e = memo_.at({u, need});
    std::map<int, std::vector<int>> by_child;
    for (auto& [l, c] : e.assignment) by_child[c].push_back(l);
    for (auto& [c, ls] : by_child) {
      sol.insert(c);
      rebuild(c, ls, sol);
    }
  }
};

// Exact optimum. Uses the assignment solver; when N <= 24 (and <= cap) the
// bitmask reference is run as well and must agree. Errors with Errc::caps
// beyond `cap` nodes. Returns nullopt when infeasible.
inline std::optional<LcstOpt> brute_force_lcst(const LcstInstance& inst, int cap = 24) {
  require(inst.n() <= cap, Errc::caps, "brute_force_lcst node cap exceeded");
  LcstAssignmentSolver solver(inst);
  auto res = solver.solve();
  if (inst.n() <= 24) {
    auto ref = lcst_opt_bitmask(inst);
    require(res.has_value() == ref.has_value(), Errc::validation,
            "solver backends disagree on feasibility");
    if (res) {
      require(res->value == ref->value, Errc::validation, "solver backends disagree on value");
      auto check = validate_full_solution(inst, res->sol);
      require(check.ok && check.cost == res->value, Errc::validation,
              "assignment solver produced invalid solution");
    }
  } else if (res) {
    auto check = validate_full_solution(inst, res->sol);
    require(check.ok && check.cost == res->value, Errc::validation,
            "assignment solver produced invalid solution");
  }
  return res;
}

// --------------------------- normalized form -------------------------------

struct NormalizedLcst {
  std::vector<int> parent;  // -1 at root
  std::vector<Rational> cost;
  std::vector<std::vector<int>> children;
  std::vector<std::vector<int>> dem;  // nonempty only on internal nodes
  std::vector<int> leaf_label;        // a_v for leaves, -1 otherwise
  int root = 0;
  int num_globals = 0;
  int num_labels = 0;
  std::vector<int> orig;        // node -> source instance node
  std::vector<int> label_orig;  // label -> source label

  int n() const { return static_cast<int>(parent.size()); }
  bool is_leaf(int v) const { return children[v].empty(); }
  int height() const {
    int h = 0;
    std::vector<std::pair<int, int>> stack{{root, 0}};
    while (!stack.empty()) {
      auto [v, d] = stack.back();
      stack.pop_back();
      h = std::max(h, d);
      for (int c : children[v]) stack.push_back({c, d + 1});
    }
    return h;
  }
  int s_max() const {
    size_t s = 0;
    for (const auto& d : dem) s = std::max(s, d.size());
    return static_cast<int>(s);
  }
};

// View a normalized instance as a plain instance (leaves serve their label).
inline LcstInstance to_instance(const NormalizedLcst& nl) {
  LcstInstance inst;
  inst.root = nl.root;
  inst.num_globals = nl.num_globals;
  inst.num_labels = nl.num_labels;
  inst.nodes.resize(nl.n());
  for (int v = 0; v < nl.n(); ++v) {
    inst.nodes[v].parent = nl.parent[v];
    inst.nodes[v].cost = nl.cost[v];
    inst.nodes[v].dem = nl.dem[v];
    if (nl.leaf_label[v] >= 0) inst.nodes[v].ser = {nl.leaf_label[v]};
  }
  return inst;
}

namespace detail {
struct MutableLcst {
  std::vector<int> parent;
  std::vector<Rational> cost;
  std::vector<std::vector<int>> dem, ser;
  std::vector<char> alive;
  std::vector<int> orig;
  int root;

  std::vector<std::vector<int>> children() const {
    std::vector<std::vector<int>> ch(parent.size());
    for (size_t v = 0; v < parent.size(); ++v)
      if (alive[v] && parent[v] >= 0) ch[parent[v]].push_back(static_cast<int>(v));
    return ch;
  }
  void kill_subtree(int u) {
    auto ch = children();
    std::vector<int> stack{u};
    while (!stack.empty()) {
      int v = stack.back();
      stack.pop_back();
      alive[v] = 0;
      for (int c : ch[v]) stack.push_back(c);
    }
  }
};

// Compact alive nodes and referenced labels into a NormalizedLcst.
inline NormalizedLcst compact(const MutableLcst& m, int num_globals, int num_labels,
                              const std::vector<int>& label_orig_in) {
  NormalizedLcst out;
  out.num_globals = num_globals;
  std::vector<int> id(m.parent.size(), -1);
  int next = 0;
  for (size_t v = 0; v < m.parent.size(); ++v)
    if (m.alive[v]) id[v] = next++;
  out.parent.assign(next, -1);
  out.cost.resize(next);
  out.children.assign(next, {});
  out.dem.assign(next, {});
  out.leaf_label.assign(next, -1);
  out.orig.resize(next);
  auto ch = m.children();
  // label remap: globals keep their ids, other used labels get k, k+1, ...
  std::vector<int> lmap(num_labels, -1);
  for (int g = 0; g < num_globals; ++g) lmap[g] = g;
  std::set<int> used;
  for (size_t v = 0; v < m.parent.size(); ++v)
    if (m.alive[v]) {
      for (int l : m.dem[v]) used.insert(l);
      for (int l : m.ser[v]) used.insert(l);
    }
  int nl = num_globals;
  for (int l : used)
    if (l >= num_globals) lmap[l] = nl++;
  out.num_labels = nl;
  out.label_orig.assign(nl, -1);
  for (int l = 0; l < num_labels; ++l)
    if (lmap[l] >= 0 && (l < num_globals || used.count(l)))
      out.label_orig[lmap[l]] = label_orig_in.empty() ? l : label_orig_in[l];

  for (size_t v = 0; v < m.parent.size(); ++v) {
    if (!m.alive[v]) continue;
    int nv = id[v];
    out.parent[nv] = m.parent[v] < 0 ? -1 : id[m.parent[v]];
    if (out.parent[nv] < 0) out.root = nv;
    out.cost[nv] = m.cost[v];
    out.orig[nv] = m.orig[v];
    for (int c : ch[v]) out.children[nv].push_back(id[c]);
    bool leaf = ch[v].empty();
    if (leaf) {
      require(m.ser[v].size() <= 1, Errc::validation, "leaf with several services after normalize");
      if (!m.ser[v].empty()) out.leaf_label[nv] = lmap[m.ser[v][0]];
      require(m.dem[v].empty() || m.parent[v] < 0, Errc::validation,
              "leaf with demands after normalize");
    } else {
      for (int l : m.dem[v]) out.dem[nv].push_back(lmap[l]);
      std::sort(out.dem[nv].begin(), out.dem[nv].end());
    }
  }
  return out;
}
}  // namespace detail

// Normalization: (1) demand labels are split into per-demander copies, every
// server serving all copies; (2) leaves drop self-served demands and are
// deleted when a demand is unservable; (3) services move to fresh zero-cost
// leaf children, one label each, and duplicate same-label leaf children keep
// only the cheapest. Preserves the optimum value (via orig back-map).
inline NormalizedLcst normalize(const LcstInstance& inst) {
  validate_instance(inst);
  detail::MutableLcst m;
  m.root = inst.root;
  int num_labels = inst.num_labels;
  std::vector<int> label_orig(num_labels);
  for (int l = 0; l < num_labels; ++l) label_orig[l] = l;
  for (int v = 0; v < inst.n(); ++v) {
    m.parent.push_back(inst.nodes[v].parent);
    m.cost.push_back(inst.nodes[v].cost);
    m.dem.push_back(inst.nodes[v].dem);
    m.ser.push_back(inst.nodes[v].ser);
    m.alive.push_back(1);
    m.orig.push_back(v);
  }

  // (1) split multiply-demanded labels
  std::map<int, std::vector<int>> demanders;
  for (size_t v = 0; v < m.parent.size(); ++v)
    for (int l : m.dem[v]) demanders[l].push_back(static_cast<int>(v));
  for (auto& [l, vs] : demanders) {
    if (vs.size() < 2) continue;
    std::vector<int> copies;
    for (int v : vs) {
      int nl = num_labels++;
      label_orig.push_back(l);
      copies.push_back(nl);
      std::replace(m.dem[v].begin(), m.dem[v].end(), l, nl);
      std::sort(m.dem[v].begin(), m.dem[v].end());
    }
    for (size_t v = 0; v < m.parent.size(); ++v) {
      auto& s = m.ser[v];
      if (std::binary_search(s.begin(), s.end(), l)) {
        s.erase(std::remove(s.begin(), s.end(), l), s.end());
        s.insert(s.end(), copies.begin(), copies.end());
        std::sort(s.begin(), s.end());
      }
    }
  }

  // (2) leaf demand fix-ups, to a fixpoint since deletions expose new leaves
  bool changed = true;
  while (changed) {
    changed = false;
    auto ch = m.children();
    for (size_t v = 0; v < m.parent.size(); ++v) {
      if (!m.alive[v] || !ch[v].empty()) continue;
      bool unservable = false;
      for (int l : m.dem[v])
        if (!std::binary_search(m.ser[v].begin(), m.ser[v].end(), l)) unservable = true;
      if (unservable && static_cast<int>(v) != m.root) {
        m.alive[v] = 0;
        changed = true;
      } else if (!m.dem[v].empty() && !unservable) {
        m.dem[v].clear();  // self-served demands are vacuous on a leaf
        changed = true;
      }
    }
  }

  // (3a) push services down to dedicated leaves
  size_t fixed_n = m.parent.size();
  auto ch = m.children();
  for (size_t v = 0; v < fixed_n; ++v) {
    if (!m.alive[v] || m.ser[v].empty()) continue;
    if (ch[v].empty() && m.ser[v].size() == 1 && m.dem[v].empty()) continue;  // already a leaf
    for (int l : m.ser[v]) {
      m.parent.push_back(static_cast<int>(v));
      m.cost.push_back(Rational(0));
      m.dem.push_back({});
      m.ser.push_back({l});
      m.alive.push_back(1);
      m.orig.push_back(m.orig[v]);
    }
    m.ser[v].clear();
  }

  // (3b) delete childless non-root nodes without a service label, to a fixpoint
  changed = true;
  while (changed) {
    changed = false;
    ch = m.children();
    for (size_t v = 0; v < m.parent.size(); ++v) {
      if (!m.alive[v] || static_cast<int>(v) == m.root) continue;
      if (ch[v].empty() && m.ser[v].empty()) {
        m.alive[v] = 0;
        changed = true;
      }
    }
  }

  // (3c) duplicate same-label leaf children: keep the cheapest (tie: lowest id)
  ch = m.children();
  for (size_t v = 0; v < m.parent.size(); ++v) {
    if (!m.alive[v]) continue;
    std::map<int, int> best;  // label -> kept child
    for (int c : ch[v]) {
      if (!ch[c].empty() || m.ser[c].empty()) continue;
      int l = m.ser[c][0];
      auto it = best.find(l);
      if (it == best.end())
        best[l] = c;
      else if (m.cost[c] < m.cost[it->second]) {
        m.alive[it->second] = 0;
        it->second = c;
      } else {
        m.alive[c] = 0;
      }
    }
  }

  return detail::compact(m, inst.num_globals, num_labels, label_orig);
}

struct PruneResult {
  NormalizedLcst inst;  // empty (n == 0) when the root itself was removed
  bool feasible = false;
};

// Remove internal nodes (and their subtrees) that demand a label with no
// serving leaf descendant, to a fixpoint. Feasible iff the root survives and
// every global still has a serving leaf.
inline PruneResult prune_useless(const NormalizedLcst& nl) {
  detail::MutableLcst m;
  m.root = nl.root;
  for (int v = 0; v < nl.n(); ++v) {
    m.parent.push_back(nl.parent[v]);
    m.cost.push_back(nl.cost[v]);
    m.dem.push_back(nl.dem[v]);
    m.ser.push_back(nl.leaf_label[v] >= 0 ? std::vector<int>{nl.leaf_label[v]}
                                          : std::vector<int>{});
    m.alive.push_back(1);
    m.orig.push_back(nl.orig[v]);
  }
  bool changed = true;
  while (changed) {
    changed = false;
    auto ch = m.children();
    // labels served by alive leaves within each subtree, bottom-up
    std::vector<std::set<int>> served(m.parent.size());
    std::vector<int> order;
    std::vector<int> stack{m.root};
    if (!m.alive[m.root]) break;
    while (!stack.empty()) {
      int v = stack.back();
      stack.pop_back();
      order.push_back(v);
      for (int c : ch[v]) stack.push_back(c);
    }
    for (auto it = order.rbegin(); it != order.rend(); ++it) {
      int v = *it;
      if (ch[v].empty())
        for (int l : m.ser[v]) served[v].insert(l);
      for (int c : ch[v]) served[v].insert(served[c].begin(), served[c].end());
    }
    for (int v : order) {
      if (ch[v].empty()) continue;
      for (int l : m.dem[v])
        if (!served[v].count(l)) {
          m.kill_subtree(v);
          changed = true;
          break;
        }
      if (changed) break;
    }
    if (!changed) {
      // childless former-internal nodes are dead weight
      ch = m.children();
      for (size_t v = 0; v < m.parent.size(); ++v)
        if (m.alive[v] && static_cast<int>(v) != m.root && ch[v].empty() && m.ser[v].empty()) {
          m.alive[v] = 0;
          changed = true;
        }
    }
  }
  PruneResult out;
  if (!m.alive[m.root]) return out;  // root removed: infeasible, empty instance
  // compact carries m.orig through, which was seeded from nl.orig above
  NormalizedLcst pruned = detail::compact(m, nl.num_globals, nl.num_labels, nl.label_orig);
  out.feasible = true;
  detail::LcstView view(to_instance(pruned));
  for (int g = 0; g < pruned.num_globals; ++g)
    if (!view.served_in(g, pruned.root, [](int) { return true; })) out.feasible = false;
  out.inst = std::move(pruned);
  return out;
}

// Normalized-facing validator wrappers.
inline LcstCheck validate_label_consistent(const NormalizedLcst& nl, const std::set<int>& sol) {
  return validate_label_solution(to_instance(nl), sol);
}
inline LcstCheck validate_full(const NormalizedLcst& nl, const std::set<int>& sol) {
  return validate_full_solution(to_instance(nl), sol);
}
inline std::optional<LcstOpt> brute_force_lcst(const NormalizedLcst& nl, int cap = 24) {
  return brute_force_lcst(to_instance(nl), cap);
}

}  // namespace dstq

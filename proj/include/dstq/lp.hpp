#pragma once

// Exact rational linear programming: a dense two-phase simplex with Bland's
// rule, the base LP over the event space of a normalized LCST instance, and
// the lift-and-project machinery (lifted variables are indexed by event
// subsets of size <= R).

#include <algorithm>
#include <functional>
#include <map>
#include <optional>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include "dstq/errors.hpp"
#include "dstq/lcst.hpp"
#include "dstq/rational.hpp"

namespace dstq {

struct LpRow {
  std::vector<std::pair<int, Rational>> terms;  // sorted by var, nonzero coeffs
  Rational rhs;                                 // terms <= rhs
};

struct LinearProgram {
  int nvars = 0;
  std::vector<LpRow> rows;
  std::vector<Rational> objective;  // minimize
  std::vector<std::string> var_names;

  void add_row(std::map<int, Rational> terms, Rational rhs) {
    LpRow row;
    for (auto& [v, c] : terms)
      if (c != 0) row.terms.push_back({v, c});
    row.rhs = std::move(rhs);
    rows.push_back(std::move(row));
  }
  void add_eq(const std::map<int, Rational>& terms, const Rational& rhs) {
    add_row(terms, rhs);
    std::map<int, Rational> neg;
    for (auto& [v, c] : terms) neg[v] = -c;
    add_row(std::move(neg), -rhs);
  }
};

inline std::string serialize_lp(const LinearProgram& lp) {
  std::ostringstream out;
  out << "lp " << lp.nvars << " " << lp.rows.size() << "\n";
  out << "min";
  for (int v = 0; v < lp.nvars; ++v)
    if (lp.objective[v] != 0) out << " " << v << ":" << format_rational(lp.objective[v]);
  out << "\n";
  for (const auto& row : lp.rows) {
    out << "row";
    for (auto& [v, c] : row.terms) out << " " << v << ":" << format_rational(c);
    out << " <= " << format_rational(row.rhs) << "\n";
  }
  return out.str();
}

// --------------------------- event space -----------------------------------

// Events are "node u is selected" and "(u, l): u selected with a leaf in its
// subtree of label l selected". Indexed nodes-first.
struct EventSpace {
  int n_nodes = 0;
  int n_labels = 0;

  int size() const { return n_nodes + n_nodes * n_labels; }
  int node_event(int u) const { return u; }
  int label_event(int u, int l) const { return n_nodes + u * n_labels + l; }
  bool is_node_event(int e) const { return e < n_nodes; }
  int event_node(int e) const { return is_node_event(e) ? e : (e - n_nodes) / n_labels; }
  int event_label(int e) const { return is_node_event(e) ? -1 : (e - n_nodes) % n_labels; }
  std::string name(int e) const {
    if (is_node_event(e)) return "v" + std::to_string(e);
    return "v" + std::to_string(event_node(e)) + ":l" + std::to_string(event_label(e));
  }
};

// Base LP relaxation over the event space. Box rows are explicit. Feasible
// integral points are exactly the full solutions with one serving leaf per
// (node, label) pair.
inline std::pair<LinearProgram, EventSpace> build_base_lp(const NormalizedLcst& nl) {
  EventSpace es{nl.n(), nl.num_labels};
  LinearProgram lp;
  lp.nvars = es.size();
  lp.objective.assign(lp.nvars, Rational(0));
  lp.var_names.resize(lp.nvars);
  for (int e = 0; e < lp.nvars; ++e) lp.var_names[e] = es.name(e);
  for (int u = 0; u < nl.n(); ++u) lp.objective[es.node_event(u)] = nl.cost[u];

  for (int u = 0; u < nl.n(); ++u) {
    // (2) monotone along tree edges
    if (nl.parent[u] >= 0)
      lp.add_row({{es.node_event(u), Rational(1)}, {es.node_event(nl.parent[u]), Rational(-1)}},
                 Rational(0));
    for (int l = 0; l < nl.num_labels; ++l) {
      // (3) label events under node events
      lp.add_row({{es.label_event(u, l), Rational(1)}, {es.node_event(u), Rational(-1)}},
                 Rational(0));
    }
    if (!nl.is_leaf(u)) {
      // (4) demanded labels are tight
      for (int l : nl.dem[u])
        lp.add_eq({{es.label_event(u, l), Rational(1)}, {es.node_event(u), Rational(-1)}},
                  Rational(0));
      // (6) label mass splits across children
      for (int l = 0; l < nl.num_labels; ++l) {
        std::map<int, Rational> terms{{es.label_event(u, l), Rational(1)}};
        for (int c : nl.children[u]) terms[es.label_event(c, l)] = Rational(-1);
        lp.add_eq(terms, Rational(0));
      }
    } else {
      // (5) a leaf serves its own label when selected; (7) nothing else
      for (int l = 0; l < nl.num_labels; ++l) {
        if (l == nl.leaf_label[u])
          lp.add_eq({{es.label_event(u, l), Rational(1)}, {es.node_event(u), Rational(-1)}},
                    Rational(0));
        else
          lp.add_eq({{es.label_event(u, l), Rational(1)}}, Rational(0));
      }
    }
  }
  // (8) the root holds every global label
  for (int g = 0; g < nl.num_globals; ++g)
    lp.add_eq({{es.label_event(nl.root, g), Rational(1)}}, Rational(1));
  // boxes
  for (int e = 0; e < lp.nvars; ++e) {
    lp.add_row({{e, Rational(1)}}, Rational(1));
    lp.add_row({{e, Rational(-1)}}, Rational(0));
  }
  return {std::move(lp), es};
}

// Sum-over-leaf-descendants identity: for every node u and label l, the label
// mass at u equals the total mass on serving leaves below u.
inline bool check_sum_leaf_identity(const NormalizedLcst& nl, const EventSpace& es,
                                    const std::function<Rational(int)>& value,
                                    std::string* why = nullptr) {
  for (int u = 0; u < nl.n(); ++u)
    for (int l = 0; l < nl.num_labels; ++l) {
      Rational sum(0);
      std::vector<int> stack{u};
      while (!stack.empty()) {
        int v = stack.back();
        stack.pop_back();
        if (nl.is_leaf(v) && nl.leaf_label[v] == l) sum += value(es.node_event(v));
        for (int c : nl.children[v]) stack.push_back(c);
      }
      if (sum != value(es.label_event(u, l))) {
        if (why)
          *why = "identity fails at node " + std::to_string(u) + " label " + std::to_string(l);
        return false;
      }
    }
  return true;
}

// --------------------------- simplex ---------------------------------------

enum class LpStatus { optimal, infeasible, unbounded };

struct LpSolution {
  LpStatus status = LpStatus::infeasible;
  Rational value;
  std::vector<Rational> x;
  std::vector<int> basis;  // basic variable per tableau row (certificate)
};

// Dense two-phase simplex for min c x s.t. Ax <= b, x >= 0, with Bland's rule
// throughout (deterministic, cycle-free).
class Simplex {
 public:
  explicit Simplex(const LinearProgram& lp) : lp_(lp) {}

  LpSolution solve() {
    int n = lp_.nvars;
    int m = static_cast<int>(lp_.rows.size());
    int total = n + m;  // structural + slack
    a_.assign(m, std::vector<Rational>(total, Rational(0)));
    rhs_.assign(m, Rational(0));
    basis_.assign(m, -1);
    std::vector<int> artificial_rows;
    for (int i = 0; i < m; ++i) {
      for (auto& [v, c] : lp_.rows[i].terms) a_[i][v] = c;
      a_[i][n + i] = Rational(1);
      rhs_[i] = lp_.rows[i].rhs;
      basis_[i] = n + i;
      if (rhs_[i] < 0) {
        for (auto& c : a_[i]) c = -c;
        rhs_[i] = -rhs_[i];
        artificial_rows.push_back(i);
      }
    }
    int n_art = static_cast<int>(artificial_rows.size());
    if (n_art > 0) {
      for (auto& row : a_) row.resize(total + n_art, Rational(0));
      for (int j = 0; j < n_art; ++j) {
        a_[artificial_rows[j]][total + j] = Rational(1);
        basis_[artificial_rows[j]] = total + j;
      }
      std::vector<Rational> phase1(total + n_art, Rational(0));
      for (int j = 0; j < n_art; ++j) phase1[total + j] = Rational(1);
      auto st = run(phase1);
      require(st != LpStatus::unbounded, Errc::validation, "phase-1 unbounded");
      Rational p1(0);
      for (int i = 0; i < m; ++i)
        if (basis_[i] >= total) p1 += rhs_[i];
      if (p1 > 0) return LpSolution{LpStatus::infeasible, Rational(0), {}, {}};
      // drive remaining artificials out of the basis; fully redundant rows
      // (no nonzero structural/slack entry) are dropped
      std::vector<int> keep;
      for (int i = 0; i < m; ++i) {
        if (basis_[i] < total) {
          keep.push_back(i);
          continue;
        }
        int col = -1;
        for (int j = 0; j < total && col < 0; ++j)
          if (a_[i][j] != 0) col = j;
        if (col >= 0) {
          pivot(i, col);
          basis_[i] = col;
          keep.push_back(i);
        } else {
          require(rhs_[i] == 0, Errc::validation, "redundant row with nonzero rhs");
        }
      }
      if (static_cast<int>(keep.size()) != m) {
        std::vector<std::vector<Rational>> a2;
        std::vector<Rational> r2;
        std::vector<int> b2;
        for (int i : keep) {
          a2.push_back(std::move(a_[i]));
          r2.push_back(std::move(rhs_[i]));
          b2.push_back(basis_[i]);
        }
        a_ = std::move(a2);
        rhs_ = std::move(r2);
        basis_ = std::move(b2);
        m = static_cast<int>(a_.size());
      }
      for (auto& row : a_) row.resize(total);
    }
    std::vector<Rational> cost(total, Rational(0));
    for (int v = 0; v < n; ++v) cost[v] = lp_.objective[v];
    auto st = run(cost);
    if (st == LpStatus::unbounded) return LpSolution{LpStatus::unbounded, Rational(0), {}, {}};
    LpSolution out;
    out.status = LpStatus::optimal;
    out.x.assign(n, Rational(0));
    for (int i = 0; i < m; ++i)
      if (basis_[i] < n) out.x[basis_[i]] = rhs_[i];
    out.value = Rational(0);
    for (int v = 0; v < n; ++v) out.value += lp_.objective[v] * out.x[v];
    out.basis = basis_;
    return out;
  }

 private:
  const LinearProgram& lp_;
  std::vector<std::vector<Rational>> a_;
  std::vector<Rational> rhs_;
  std::vector<int> basis_;

  void pivot(int row, int col) {
    Rational p = a_[row][col];
    for (auto& c : a_[row]) c /= p;
    rhs_[row] /= p;
    int m = static_cast<int>(a_.size());
    int w = static_cast<int>(a_[row].size());
    for (int i = 0; i < m; ++i) {
      if (i == row || a_[i][col] == 0) continue;
      Rational f = a_[i][col];
      for (int j = 0; j < w; ++j)
        if (a_[row][j] != 0) a_[i][j] -= f * a_[row][j];
      rhs_[i] -= f * rhs_[row];
    }
  }

  LpStatus run(const std::vector<Rational>& cost) {
    if (a_.empty()) {
      // no constraints left: any variable with negative cost is a free ray
      for (const Rational& c : cost)
        if (c < 0) return LpStatus::unbounded;
      return LpStatus::optimal;
    }
    int m = static_cast<int>(a_.size());
    int w = static_cast<int>(a_[0].size());
    std::vector<Rational> bottom(w);
    auto recompute = [&]() {
      for (int j = 0; j < w; ++j) {
        Rational z(0);
        for (int i = 0; i < m; ++i)
          if (cost[basis_[i]] != 0) z += cost[basis_[i]] * a_[i][j];
        bottom[j] = cost[j] - z;
      }
    };
    recompute();
    while (true) {
      int enter = -1;
      for (int j = 0; j < w; ++j)
        if (bottom[j] < 0) {
          enter = j;
          break;  // Bland: lowest index
        }
      if (enter < 0) return LpStatus::optimal;
      int leave = -1;
      for (int i = 0; i < m; ++i) {
        if (a_[i][enter] <= 0) continue;
        if (leave < 0) {
          leave = i;
          continue;
        }
        Rational cur = rhs_[i] * a_[leave][enter];
        Rational best = rhs_[leave] * a_[i][enter];
        if (cur < best || (cur == best && basis_[i] < basis_[leave])) leave = i;
      }
      if (leave < 0) return LpStatus::unbounded;
      Rational f = bottom[enter];
      // update bottom row incrementally through the pivot
      pivot(leave, enter);
      for (int j = 0; j < w; ++j)
        if (a_[leave][j] != 0) bottom[j] -= f * a_[leave][j];
      basis_[leave] = enter;
    }
  }
};

inline LpSolution solve_lp(const LinearProgram& lp) { return Simplex(lp).solve(); }

// --------------------------- lifting ---------------------------------------

// Canonical index over event subsets of size <= R, ordered by (size, lex).
struct SubsetIndex {
  std::vector<std::vector<int>> subsets;
  std::map<std::vector<int>, int> pos;

  SubsetIndex() = default;
  SubsetIndex(int universe, int R) {
    std::vector<int> cur;
    for (int sz = 0; sz <= R; ++sz) gen(universe, sz, 0, cur);
    for (size_t i = 0; i < subsets.size(); ++i) pos[subsets[i]] = static_cast<int>(i);
  }
  int index_of(const std::vector<int>& s) const {
    auto it = pos.find(s);
    require(it != pos.end(), Errc::validation, "subset outside index");
    return it->second;
  }

 private:
  void gen(int universe, int want, int from, std::vector<int>& cur) {
    if (static_cast<int>(cur.size()) == want) {
      subsets.push_back(cur);
      return;
    }
    for (int e = from; e < universe; ++e) {
      cur.push_back(e);
      gen(universe, want, e + 1, cur);
      cur.pop_back();
    }
  }
};

inline std::vector<int> set_union_sorted(const std::vector<int>& a, const std::vector<int>& b) {
  std::vector<int> out;
  std::set_union(a.begin(), a.end(), b.begin(), b.end(), std::back_inserter(out));
  return out;
}

// Enumerate lift contexts: disjoint sorted (S, T) with |S| + |T| <= R - 1.
// Deterministic order: union P by (size, lex), then split mask ascending
// (bit i set => i-th element of P goes to T).
inline void for_each_lift_context(
    int universe, int R, const std::function<void(const std::vector<int>&, const std::vector<int>&)>& fn) {
  SubsetIndex unions(universe, std::max(0, R - 1));
  for (const auto& P : unions.subsets) {
    int p = static_cast<int>(P.size());
    for (std::uint32_t mask = 0; mask < (1u << p); ++mask) {
      std::vector<int> S, T;
      for (int i = 0; i < p; ++i)
        (mask & (1u << i) ? T : S).push_back(P[i]);
      fn(S, T);
    }
  }
}

struct LiftedLp {
  LinearProgram lp;
  SubsetIndex index;
};

// Lift each original row j against every context (S, T):
//   sum_{T' <= T} (-1)^{|T'|} ( sum_i a_{j,i} x_{S u T' u {i}} - b_j x_{S u T'} ) <= 0
// plus x_{} = 1. Rows are deduplicated exactly.
inline LiftedLp lift(const LinearProgram& lp, int R, long row_cap = 2000000) {
  LiftedLp out;
  out.index = SubsetIndex(lp.nvars, R);
  out.lp.nvars = static_cast<int>(out.index.subsets.size());
  out.lp.objective.assign(out.lp.nvars, Rational(0));
  for (int v = 0; v < lp.nvars; ++v)
    out.lp.objective[out.index.index_of({v})] = lp.objective[v];
  std::set<std::pair<std::vector<std::pair<int, Rational>>, Rational>> seen;
  long produced = 0;
  for_each_lift_context(lp.nvars, R, [&](const std::vector<int>& S, const std::vector<int>& T) {
    int t = static_cast<int>(T.size());
    for (const auto& row : lp.rows) {
      std::map<int, Rational> terms;
      for (std::uint32_t mask = 0; mask < (1u << t); ++mask) {
        std::vector<int> Tp;
        int bits = 0;
        for (int i = 0; i < t; ++i)
          if (mask & (1u << i)) {
            Tp.push_back(T[i]);
            ++bits;
          }
        Rational sign((bits % 2) ? -1 : 1);
        auto base = set_union_sorted(S, Tp);
        for (auto& [i, ai] : row.terms)
          terms[out.index.index_of(set_union_sorted(base, {i}))] += sign * ai;
        terms[out.index.index_of(base)] += -sign * row.rhs;
      }
      LpRow lrow;
      for (auto& [v, c] : terms)
        if (c != 0) lrow.terms.push_back({v, c});
      lrow.rhs = Rational(0);
      if (lrow.terms.empty()) continue;
      if (seen.insert({lrow.terms, lrow.rhs}).second) {
        out.lp.rows.push_back(std::move(lrow));
        require(++produced <= row_cap, Errc::caps, "lifted row cap exceeded");
      }
    }
  });
  // x_empty = 1
  int empty = out.index.index_of({});
  out.lp.add_row({{empty, Rational(1)}}, Rational(1));
  out.lp.add_row({{empty, Rational(-1)}}, Rational(-1));
  out.lp.var_names.resize(out.lp.nvars);
  return out;
}

struct SaCheck {
  bool ok = true;
  std::string why;
};

// Membership in the level-R lift without materializing it: evaluate every
// lifted row lazily against a query function over sorted event subsets.
inline SaCheck check_sa_membership(const std::function<Rational(const std::vector<int>&)>& q,
                                   const LinearProgram& lp, int R) {
  SaCheck res;
  if (q({}) != 1) return {false, "x_empty != 1"};
  for_each_lift_context(lp.nvars, R, [&](const std::vector<int>& S, const std::vector<int>& T) {
    if (!res.ok) return;
    int t = static_cast<int>(T.size());
    for (size_t j = 0; j < lp.rows.size() && res.ok; ++j) {
      Rational lhs(0);
      for (std::uint32_t mask = 0; mask < (1u << t); ++mask) {
        std::vector<int> Tp;
        int bits = 0;
        for (int i = 0; i < t; ++i)
          if (mask & (1u << i)) {
            Tp.push_back(T[i]);
            ++bits;
          }
        Rational sign((bits % 2) ? -1 : 1);
        auto base = set_union_sorted(S, Tp);
        for (auto& [i, ai] : lp.rows[j].terms) lhs += sign * ai * q(set_union_sorted(base, {i}));
        lhs -= sign * lp.rows[j].rhs * q(base);
      }
      if (lhs > 0) {
        std::ostringstream why;
        why << "lifted row " << j << " violated for S={";
        for (int e : S) why << e << " ";
        why << "} T={";
        for (int e : T) why << e << " ";
        why << "}";
        res = {false, why.str()};
      }
    }
  });
  return res;
}

// Worst-case conditioning budget for the rounding recursion.
inline int required_rounds(int s, int h) { return s * (h + 2) * (h + 1) + 1; }

}  // namespace dstq

#pragma once

// Two interchangeable backends behind the rounding procedure's oracle
// interface: an explicit table of lifted values (exactly LP-feasible at some
// level R), and a finite distribution over integral solutions (conditioning
// = filter + renormalize, unlimited rounds).

#include <algorithm>
#include <limits>
#include <map>
#include <memory>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include "dstq/errors.hpp"
#include "dstq/lcst.hpp"
#include "dstq/lp.hpp"
#include "dstq/rational.hpp"

namespace dstq {

constexpr int kUnlimitedRounds = std::numeric_limits<int>::max() / 2;

class LiftedSolution {
 public:
  virtual ~LiftedSolution() = default;
  // value at a set of events (sorted or not; deduplicated internally)
  virtual Rational query(std::vector<int> events) const = 0;
  // condition on event e (query({e}) must be positive); consumes one round
  virtual std::shared_ptr<LiftedSolution> condition(int e) const = 0;
  virtual int rounds() const = 0;

  Rational query1(int e) const { return query({e}); }
};

namespace detail {
inline std::vector<int> canon_events(std::vector<int> ev) {
  std::sort(ev.begin(), ev.end());
  ev.erase(std::unique(ev.begin(), ev.end()), ev.end());
  return ev;
}
}  // namespace detail

// Explicit table over all event subsets of size <= R.
class SaLpSolution : public LiftedSolution,
                     public std::enable_shared_from_this<SaLpSolution> {
 public:
  SaLpSolution(std::map<std::vector<int>, Rational> table, int R)
      : table_(std::move(table)), R_(R) {
    require(R_ >= 1, Errc::validation, "table needs R >= 1");
    auto it = table_.find({});
    require(it != table_.end() && it->second == 1, Errc::validation, "x_empty must be 1");
  }

  // Build from a solved lifted LP.
  static std::shared_ptr<SaLpSolution> from_lifted(const LiftedLp& lifted,
                                                   const std::vector<Rational>& x, int R) {
    std::map<std::vector<int>, Rational> table;
    for (size_t i = 0; i < lifted.index.subsets.size(); ++i)
      table[lifted.index.subsets[i]] = x[i];
    return std::make_shared<SaLpSolution>(std::move(table), R);
  }

  Rational query(std::vector<int> events) const override {
    auto key = detail::canon_events(std::move(events));
    require(static_cast<int>(key.size()) <= R_, Errc::validation,
            "query beyond round budget (R = " + std::to_string(R_) + ")");
    auto it = table_.find(key);
    require(it != table_.end(), Errc::validation, "event set missing from table");
    return it->second;
  }

  std::shared_ptr<LiftedSolution> condition(int e) const override {
    require(R_ >= 2, Errc::validation, "round budget exhausted: cannot condition at R = 1");
    Rational pe = query({e});
    require(pe > 0, Errc::validation, "conditioning on a zero-probability event");
    std::map<std::vector<int>, Rational> next;
    for (const auto& [S, v] : table_) {
      if (static_cast<int>(S.size()) > R_ - 1) continue;
      next[S] = query(set_union_sorted(S, {e})) / pe;
    }
    return std::make_shared<SaLpSolution>(std::move(next), R_ - 1);
  }

  int rounds() const override { return R_; }
  const std::map<std::vector<int>, Rational>& table() const { return table_; }

  std::string serialize() const {
    std::ostringstream out;
    out << "lifted R=" << R_ << "\n";
    for (const auto& [S, v] : table_) {
      out << "(";
      for (size_t i = 0; i < S.size(); ++i) out << (i ? " " : "") << S[i];
      out << ") = " << format_rational(v) << "\n";
    }
    return out.str();
  }

 private:
  std::map<std::vector<int>, Rational> table_;
  int R_;
};

// Events held by an integral solution: node events for selected nodes and
// (u, l) whenever a selected leaf of label l sits in u's subtree.
inline std::vector<int> events_of_solution(const NormalizedLcst& nl, const EventSpace& es,
                                           const std::set<int>& sol) {
  std::vector<int> held;
  for (int u : sol) {
    held.push_back(es.node_event(u));
    std::set<int> labels;
    std::vector<int> stack{u};
    while (!stack.empty()) {
      int v = stack.back();
      stack.pop_back();
      if (nl.is_leaf(v) && sol.count(v) && nl.leaf_label[v] >= 0) labels.insert(nl.leaf_label[v]);
      for (int c : nl.children[v]) stack.push_back(c);
    }
    for (int l : labels) held.push_back(es.label_event(u, l));
  }
  return detail::canon_events(std::move(held));
}

class DistributionBacked : public LiftedSolution {
 public:
  struct Support {
    Rational weight;
    std::set<int> sol;
    std::vector<int> held;  // sorted event ids
  };

  // weights must be positive and sum to 1; every support point must be a full
  // solution whose 0/1 event vector satisfies the base LP (this in particular
  // forces one serving leaf per demanded (node, label) pair).
  static std::shared_ptr<DistributionBacked> create(
      const NormalizedLcst& nl, const EventSpace& es, const LinearProgram& base_lp,
      const std::vector<std::pair<Rational, std::set<int>>>& support) {
    auto out = std::shared_ptr<DistributionBacked>(new DistributionBacked());
    Rational total(0);
    for (const auto& [w, sol] : support) {
      require(w > 0, Errc::validation, "support weight must be positive");
      total += w;
      auto check = validate_full_solution(to_instance(nl), sol);
      require(check.ok, Errc::validation, "support point is not a full solution: " + check.why);
      Support s;
      s.weight = w;
      s.sol = sol;
      s.held = events_of_solution(nl, es, sol);
      std::vector<Rational> x(base_lp.nvars, Rational(0));
      for (int e : s.held) x[e] = Rational(1);
      for (size_t j = 0; j < base_lp.rows.size(); ++j) {
        Rational lhs(0);
        for (auto& [v, c] : base_lp.rows[j].terms) lhs += c * x[v];
        require(lhs <= base_lp.rows[j].rhs, Errc::validation,
                "support point violates base-LP row " + std::to_string(j));
      }
      out->support_.push_back(std::move(s));
    }
    require(total == 1, Errc::validation, "support weights must sum to 1");
    return out;
  }

  Rational query(std::vector<int> events) const override {
    auto key = detail::canon_events(std::move(events));
    Rational sum(0);
    for (const auto& s : support_)
      if (std::includes(s.held.begin(), s.held.end(), key.begin(), key.end())) sum += s.weight;
    return sum;
  }

  std::shared_ptr<LiftedSolution> condition(int e) const override {
    Rational pe = query({e});
    require(pe > 0, Errc::validation, "conditioning on a zero-probability event");
    auto out = std::shared_ptr<DistributionBacked>(new DistributionBacked());
    for (const auto& s : support_)
      if (std::binary_search(s.held.begin(), s.held.end(), e)) {
        Support t = s;
        t.weight /= pe;
        out->support_.push_back(std::move(t));
      }
    return out;
  }

  int rounds() const override { return kUnlimitedRounds; }

  // Explicit table at level R (exact convex combination of 0/1 extensions).
  std::shared_ptr<SaLpSolution> materialize(int universe, int R) const {
    SubsetIndex idx(universe, R);
    std::map<std::vector<int>, Rational> table;
    for (const auto& S : idx.subsets) table[S] = query(S);
    return std::make_shared<SaLpSolution>(std::move(table), R);
  }

  const std::vector<Support>& support() const { return support_; }

 private:
  DistributionBacked() = default;
  std::vector<Support> support_;
};

}  // namespace dstq

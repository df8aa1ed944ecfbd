#pragma once

// Randomized round-and-condition over a normalized LCST instance.
//
// One run walks the tree top-down. At a node it first samples, for every
// label it is responsible for, the child receiving that label (probabilities
// are the conditioned label-event marginals, which sum to exactly 1), and
// conditions on each pick; it then recurses into each child independently
// with probability equal to the child's conditioned marginal, conditioning
// the recursion's oracle on the child event. Conditioning on probability-1
// events is skipped: for any feasible lifted point that conditioning is the
// identity, so skipping is exact and saves round budget.
//
// Randomness: one named 64-bit PRNG (std::mt19937_64) seeded once. Draws are
// consumed in a fixed order: at each node, one draw per responsible label in
// ascending label order, then one draw per child in ascending child order
// (always consumed, even for 0/1 coins). A draw u becomes the exact dyadic
// rational u/2^64 and is compared to exact probabilities, so runs are
// reproducible bit-for-bit from the seed.

#include <algorithm>
#include <cmath>
#include <functional>
#include <map>
#include <memory>
#include <random>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include "dstq/errors.hpp"
#include "dstq/lcst.hpp"
#include "dstq/lifted.hpp"
#include "dstq/lp.hpp"
#include "dstq/rational.hpp"

namespace dstq {

inline std::uint64_t splitmix64(std::uint64_t x) {
  x += 0x9E3779B97F4A7C15ull;
  x = (x ^ (x >> 30)) * 0xBF58476D1CE4E5B9ull;
  x = (x ^ (x >> 27)) * 0x94D049BB133111EBull;
  return x ^ (x >> 31);
}

struct TraceStep {
  enum class Kind { label_pick, coin };
  Kind kind;
  int node = -1;   // node where the decision is made
  int label = -1;  // label being assigned (label_pick only)
  int child = -1;  // picked child / coin subject
  bool took = false;
  Rational draw;
};

inline std::string serialize_trace(const std::vector<TraceStep>& trace) {
  std::ostringstream out;
  for (const auto& s : trace) {
    if (s.kind == TraceStep::Kind::label_pick)
      out << "label node=" << s.node << " l=" << s.label << " pick=" << s.child
          << " draw=" << format_rational(s.draw) << "\n";
    else
      out << "coin node=" << s.node << " child=" << s.child << " take=" << (s.took ? 1 : 0)
          << " draw=" << format_rational(s.draw) << "\n";
  }
  return out.str();
}

struct RoundResult {
  std::set<int> nodes;
  std::vector<TraceStep> trace;

  // number of selected serving leaves per global label
  std::vector<int> label_counts(const NormalizedLcst& nl) const {
    std::vector<int> t(nl.num_globals, 0);
    for (int v : nodes)
      if (nl.is_leaf(v) && nl.leaf_label[v] >= 0 && nl.leaf_label[v] < nl.num_globals)
        ++t[nl.leaf_label[v]];
    return t;
  }
};

struct RoundOptions {
  bool allow_low_rounds = false;  // permit R < required_rounds (guarantee forfeited)
};

namespace detail {
class Rounder {
 public:
  Rounder(const NormalizedLcst& nl, const EventSpace& es, std::uint64_t seed)
      : nl_(nl), es_(es), rng_(seed) {}

  RoundResult run(std::shared_ptr<const LiftedSolution> x) {
    std::vector<int> top = nl_.dem[nl_.root];
    solve(nl_.root, top, std::move(x));
    return std::move(result_);
  }

 private:
  const NormalizedLcst& nl_;
  const EventSpace& es_;
  std::mt19937_64 rng_;
  RoundResult result_;

  Rational draw() { return dyadic_from_u64(rng_()); }

  std::shared_ptr<const LiftedSolution> condition_on(std::shared_ptr<const LiftedSolution> x,
                                                     int event) {
    if (x->query1(event) == 1) return x;  // identity for feasible points
    return x->condition(event);
  }

  void solve(int u, const std::vector<int>& labels, std::shared_ptr<const LiftedSolution> x) {
    result_.nodes.insert(u);
    if (nl_.is_leaf(u)) return;
    std::vector<int> order = labels;
    std::sort(order.begin(), order.end());
    std::map<int, std::vector<int>> assigned;
    for (int l : order) {
      require(x->query1(es_.label_event(u, l)) == 1, Errc::validation,
              "responsible label has conditioned marginal != 1");
      Rational r = draw();
      Rational cum(0);
      int picked = -1;
      for (int c : nl_.children[u]) {
        cum += x->query1(es_.label_event(c, l));
        if (picked < 0 && r < cum) picked = c;
      }
      require(cum == 1, Errc::validation, "child label marginals do not sum to 1");
      require(picked >= 0, Errc::validation, "label sampling failed");
      assigned[picked].push_back(l);
      result_.trace.push_back(
          {TraceStep::Kind::label_pick, u, l, picked, true, r});
      x = condition_on(std::move(x), es_.label_event(picked, l));
    }
    // children condition the post-loop oracle in parallel, not each other's
    for (int c : nl_.children[u]) {
      Rational r = draw();
      Rational p = x->query1(es_.node_event(c));
      bool take = r < p;
      result_.trace.push_back({TraceStep::Kind::coin, u, -1, c, take, r});
      if (!take) {
        require(assigned.find(c) == assigned.end(), Errc::validation,
                "assigned child had conditioned marginal < 1");
        continue;
      }
      std::vector<int> next = assigned.count(c) ? assigned[c] : std::vector<int>{};
      for (int l : nl_.dem[c]) next.push_back(l);
      solve(c, next, condition_on(x, es_.node_event(c)));
    }
  }
};
}  // namespace detail

// Preconditions: root marginal is 1, every root-responsible label event
// (demands of the root and all globals) has marginal 1, and for table-backed
// oracles the round budget covers required_rounds(s, h) unless explicitly
// overridden. Always produces a label-consistent selection.
inline RoundResult round_once(const NormalizedLcst& nl, const EventSpace& es,
                              std::shared_ptr<const LiftedSolution> x, std::uint64_t seed,
                              const RoundOptions& opts = {}) {
  require(x->query1(es.node_event(nl.root)) == 1, Errc::validation,
          "precondition: root marginal must be 1");
  for (int l : nl.dem[nl.root])
    require(x->query1(es.label_event(nl.root, l)) == 1, Errc::validation,
            "precondition: root demand marginal must be 1");
  for (int g = 0; g < nl.num_globals; ++g)
    require(x->query1(es.label_event(nl.root, g)) == 1, Errc::validation,
            "precondition: global label marginal at root must be 1");
  int need = required_rounds(nl.s_max(), nl.height());
  require(opts.allow_low_rounds || x->rounds() >= need, Errc::validation,
          "precondition: round budget " + std::to_string(x->rounds()) + " < required " +
              std::to_string(need));
  detail::Rounder r(nl, es, seed);
  return r.run(std::move(x));
}

struct SolveLcstOptions {
  int reps = 0;  // 0 = ceil(4 (h+1) ln(max(2, 2k)))
  int max_batches = 64;
  RoundOptions round;
};

struct SolveLcstResult {
  std::set<int> nodes;  // union over all accepted runs
  Rational cost;
  int reps = 0;
  int batches = 0;
};

inline int default_reps(int h, int k) {
  long double v = 4.0L * (h + 1) * std::log((long double)std::max(2, 2 * k));
  return static_cast<int>(std::ceil(v));
}

// Repetition wrapper: run round_once `reps` times per batch, take the union,
// and repeat (fresh seeds) until every global label is covered, up to
// max_batches batches. The instance must already be pruned (every node
// useful); otherwise demands could be structurally unservable.
inline SolveLcstResult solve_lcst(
    const NormalizedLcst& nl, const EventSpace& es,
    const std::function<std::shared_ptr<const LiftedSolution>()>& oracle_factory,
    std::uint64_t seed, const SolveLcstOptions& opts = {}) {
  {
    auto pruned = prune_useless(nl);
    require(pruned.feasible && pruned.inst.n() == nl.n(), Errc::validation,
            "precondition: instance must be pruned and feasible");
  }
  SolveLcstResult out;
  out.reps = opts.reps > 0 ? opts.reps : default_reps(nl.height(), nl.num_globals);
  std::vector<long> covered(nl.num_globals, 0);
  long total_runs = 0;
  for (int batch = 1; batch <= opts.max_batches; ++batch) {
    for (int rep = 0; rep < out.reps; ++rep) {
      std::uint64_t trial_seed = splitmix64(
          seed ^ (std::uint64_t(batch) * 0x100000001B3ull + std::uint64_t(rep) * 0x9E3779B9ull));
      auto rr = round_once(nl, es, oracle_factory(), trial_seed, opts.round);
      out.nodes.insert(rr.nodes.begin(), rr.nodes.end());
      auto t = rr.label_counts(nl);
      for (int g = 0; g < nl.num_globals; ++g)
        if (t[g] > 0) ++covered[g];
      ++total_runs;
    }
    bool all = true;
    std::vector<char> have(nl.num_globals, 0);
    for (int v : out.nodes)
      if (nl.is_leaf(v) && nl.leaf_label[v] >= 0 && nl.leaf_label[v] < nl.num_globals)
        have[nl.leaf_label[v]] = 1;
    for (int g = 0; g < nl.num_globals; ++g) all = all && have[g];
    if (all) {
      out.batches = batch;
      out.cost = Rational(0);
      for (int v : out.nodes) out.cost += nl.cost[v];
      return out;
    }
  }
  std::ostringstream why;
  why << "coverage not reached after " << opts.max_batches << " batches (" << total_runs
      << " runs); per-global coverage counts:";
  for (int g = 0; g < nl.num_globals; ++g) why << " g" << g << "=" << covered[g];
  fail(Errc::retry, why.str());
}

// --------------------------- statistics ------------------------------------

struct WilsonInterval {
  double lo = 0, hi = 1;
};

inline WilsonInterval wilson(long hits, long n, double z = 2.5758293035489004 /* 99% */) {
  if (n == 0) return {};
  double p = double(hits) / double(n);
  double z2 = z * z;
  double denom = 1.0 + z2 / n;
  double center = (p + z2 / (2.0 * n)) / denom;
  double rad = z * std::sqrt(p * (1.0 - p) / n + z2 / (4.0 * n * n)) / denom;
  return {std::max(0.0, center - rad), std::min(1.0, center + rad)};
}

struct MarginalStats {
  long trials = 0;
  int height = 0;
  std::vector<long> node_hits;           // per node
  std::vector<long> label_cover;         // per global: runs with t >= 1
  std::vector<long> label_total;         // per global: sum of t
  std::vector<long> label_total_covered; // per global: sum of t over covering runs

  // one row per global label
  std::string to_csv() const {
    std::ostringstream out;
    out << "label,trials,covered,mean_t,cond_mean_t,wilson_lo,wilson_hi\n";
    out.setf(std::ios::fixed);
    out.precision(9);
    for (size_t g = 0; g < label_cover.size(); ++g) {
      auto w = wilson(label_cover[g], trials);
      out << g << "," << trials << "," << label_cover[g] << ","
          << double(label_total[g]) / double(trials) << ",";
      if (label_cover[g] > 0) out << double(label_total_covered[g]) / double(label_cover[g]);
      out << "," << w.lo << "," << w.hi << "\n";
    }
    return out.str();
  }

  // one row per tree node
  std::string nodes_csv() const {
    std::ostringstream out;
    out << "node,trials,hits,phat,wilson_lo,wilson_hi\n";
    out.setf(std::ios::fixed);
    out.precision(9);
    for (size_t v = 0; v < node_hits.size(); ++v) {
      auto w = wilson(node_hits[v], trials);
      out << v << "," << trials << "," << node_hits[v] << ","
          << double(node_hits[v]) / double(trials) << "," << w.lo << "," << w.hi << "\n";
    }
    return out.str();
  }
};

inline MarginalStats estimate_marginals(
    const NormalizedLcst& nl, const EventSpace& es,
    const std::function<std::shared_ptr<const LiftedSolution>()>& oracle_factory,
    std::uint64_t seed, long trials, const RoundOptions& opts = {}) {
  MarginalStats st;
  st.trials = trials;
  st.height = nl.height();
  st.node_hits.assign(nl.n(), 0);
  st.label_cover.assign(nl.num_globals, 0);
  st.label_total.assign(nl.num_globals, 0);
  st.label_total_covered.assign(nl.num_globals, 0);
  for (long i = 0; i < trials; ++i) {
    auto rr = round_once(nl, es, oracle_factory(), splitmix64(seed + 0x9E37 * (i + 1)), opts);
    for (int v : rr.nodes) ++st.node_hits[v];
    auto t = rr.label_counts(nl);
    for (int g = 0; g < nl.num_globals; ++g) {
      st.label_total[g] += t[g];
      if (t[g] > 0) {
        ++st.label_cover[g];
        st.label_total_covered[g] += t[g];
      }
    }
  }
  return st;
}

}  // namespace dstq

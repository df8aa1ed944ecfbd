#include "dstq/rounding.hpp"

#include <gtest/gtest.h>

#include <random>

#include "util.hpp"

using namespace dstq;

namespace {
// one global, two interchangeable serving leaves
struct ForkFixture {
  NormalizedLcst nl;
  EventSpace es;
  LinearProgram lp;
  std::shared_ptr<DistributionBacked> half;

  ForkFixture() {
    // two disjoint branches, each ending in a serving leaf for the one global
    LcstInstance inst = parse_lcst(
        "lcst 5\n"
        "node 0 - 0 dem: ser:\n"
        "node 1 0 1 dem: ser:\n"
        "node 2 0 1 dem: ser:\n"
        "node 3 1 0 dem: ser:0\n"
        "node 4 2 0 dem: ser:0\n"
        "globals 0\n");
    nl = prune_useless(normalize(inst)).inst;
    auto built = build_base_lp(nl);
    lp = built.first;
    es = built.second;
    std::vector<std::pair<Rational, std::set<int>>> sup;
    for (int v = 0; v < nl.n(); ++v)
      if (nl.is_leaf(v))
        sup.push_back({rat(1, 2), {nl.root, nl.parent[v], v}});
    half = DistributionBacked::create(nl, es, lp, sup);
  }
};

NormalizedLcst chain_nl() {
  return prune_useless(normalize(parse_lcst(
                           "lcst 5\n"
                           "node 0 - 0 dem:2 ser:\n"
                           "node 1 0 1 dem:3 ser:2\n"
                           "node 2 1 2 dem: ser:3,0\n"
                           "node 3 0 4 dem: ser:1\n"
                           "node 4 0 9 dem: ser:0,1\n"
                           "globals 0 1\n")))
      .inst;
}
}  // namespace

TEST(RoundOnce, PointMassReproducesSupport) {
  NormalizedLcst nl = chain_nl();
  auto [lp, es] = build_base_lp(nl);
  auto opt = brute_force_lcst(nl);
  ASSERT_TRUE(opt.has_value());
  auto dist = DistributionBacked::create(nl, es, lp, {{Rational(1), opt->sol}});
  for (std::uint64_t seed = 0; seed < 20; ++seed) {
    RoundResult rr = round_once(nl, es, dist, seed);
    EXPECT_EQ(rr.nodes, opt->sol);
    EXPECT_TRUE(validate_full(nl, rr.nodes).ok);
  }
}

TEST(RoundOnce, AlwaysLabelConsistent) {
  ForkFixture f;
  for (std::uint64_t seed = 0; seed < 500; ++seed) {
    RoundResult rr = round_once(f.nl, f.es, f.half, seed);
    auto check = validate_label_consistent(f.nl, rr.nodes);
    EXPECT_TRUE(check.ok) << check.why;
  }
}

TEST(RoundOnce, TraceIsDeterministicPerSeed) {
  ForkFixture f;
  RoundResult a = round_once(f.nl, f.es, f.half, 99);
  RoundResult b = round_once(f.nl, f.es, f.half, 99);
  EXPECT_EQ(a.nodes, b.nodes);
  EXPECT_EQ(serialize_trace(a.trace), serialize_trace(b.trace));
  RoundResult c = round_once(f.nl, f.es, f.half, 100);
  // different seed, different dyadic draws
  EXPECT_NE(serialize_trace(a.trace), serialize_trace(c.trace));
}

TEST(RoundOnce, BudgetPreconditionEnforced) {
  NormalizedLcst nl = chain_nl();
  auto [lp, es] = build_base_lp(nl);
  auto opt = brute_force_lcst(nl);
  std::map<std::vector<int>, Rational> table{{{}, Rational(1)}};
  for (int e : events_of_solution(nl, es, opt->sol)) table[{e}] = Rational(1);
  auto thin = std::make_shared<SaLpSolution>(table, 1);
  EXPECT_LT(thin->rounds(), required_rounds(nl.s_max(), nl.height()));
  EXPECT_THROW(round_once(nl, es, thin, 1), Error);
}

TEST(RoundOnce, MarginalsMatchOnFork) {
  ForkFixture f;
  long trials = 4000;
  MarginalStats st =
      estimate_marginals(f.nl, f.es, [&]() { return f.half; }, 7, trials);
  for (int v = 0; v < f.nl.n(); ++v) {
    auto w = wilson(st.node_hits[v], trials);
    double expect = mpq_class(f.half->query1(f.es.node_event(v))).get_d();
    EXPECT_LE(w.lo, expect);
    EXPECT_GE(w.hi, expect);
  }
  // coins for the two leaves are independent halves: E[t] = 1
  double mean_t = double(st.label_total[0]) / double(trials);
  EXPECT_NEAR(mean_t, 1.0, 0.06);
  double covered = double(st.label_cover[0]) / double(trials);
  EXPECT_NEAR(covered, 0.75, 0.04);
}

TEST(SolveLcst, CoversAllGlobalsByUnion) {
  ForkFixture f;
  SolveLcstResult res = solve_lcst(f.nl, f.es, [&]() { return f.half; }, 5);
  EXPECT_TRUE(validate_full(f.nl, res.nodes).ok);
  EXPECT_GE(res.reps, 1);
  EXPECT_GE(res.batches, 1);
  // deterministic given the seed
  SolveLcstResult again = solve_lcst(f.nl, f.es, [&]() { return f.half; }, 5);
  EXPECT_EQ(res.nodes, again.nodes);
  EXPECT_EQ(res.cost, again.cost);
}

TEST(SolveLcst, RequiresPrunedInstance) {
  // node 1 demands label 1 whose only server lies outside its subtree
  LcstInstance inst = parse_lcst(
      "lcst 5\n"
      "node 0 - 0 dem: ser:\n"
      "node 1 0 1 dem:1 ser:\n"
      "node 2 1 0 dem: ser:0\n"
      "node 3 0 1 dem: ser:\n"
      "node 4 3 0 dem: ser:1\n"
      "globals 0\n");
  NormalizedLcst raw = normalize(inst);
  auto [lp, es] = build_base_lp(raw);
  EXPECT_THROW(
      solve_lcst(raw, es, [&]() -> std::shared_ptr<const LiftedSolution> { return nullptr; }, 1),
      Error);
}

TEST(Stats, CsvShapesAndDeterminism) {
  ForkFixture f;
  MarginalStats st = estimate_marginals(f.nl, f.es, [&]() { return f.half; }, 3, 100);
  std::string csv = st.to_csv();
  EXPECT_EQ(csv.substr(0, csv.find('\n')),
            "label,trials,covered,mean_t,cond_mean_t,wilson_lo,wilson_hi");
  MarginalStats st2 = estimate_marginals(f.nl, f.es, [&]() { return f.half; }, 3, 100);
  EXPECT_EQ(csv, st2.to_csv());
  EXPECT_FALSE(st.nodes_csv().empty());
}

TEST(Wilson, IntervalSanity) {
  auto w = wilson(50, 100);
  EXPECT_LT(w.lo, 0.5);
  EXPECT_GT(w.hi, 0.5);
  EXPECT_GT(w.lo, 0.3);
  EXPECT_LT(w.hi, 0.7);
  auto all = wilson(100, 100);
  EXPECT_EQ(all.hi, 1.0);
  EXPECT_GT(all.lo, 0.9);
}

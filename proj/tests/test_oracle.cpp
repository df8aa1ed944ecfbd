#include "dstq/oracle.hpp"

#include <gtest/gtest.h>

#include <random>

#include "util.hpp"

using namespace dstq;

TEST(Oracle, G1Value) {
  DstInstance inst = tutil::g1();
  EXPECT_EQ(exact_opt(inst, OracleBackend::dp).value, Rational(3));
  EXPECT_EQ(exact_opt(inst, OracleBackend::enumeration).value, Rational(3));
}

TEST(Oracle, SingleTerminalIsShortestPath) {
  DstInstance inst = parse_dst(
      "dst 3 3\nroot 0\nterminals 2\nedge 0 1 1\nedge 1 2 1\nedge 0 2 5\n");
  auto res = exact_opt(inst);
  EXPECT_EQ(res.value, Rational(2));
  ASSERT_EQ(res.tree.size(), 2u);
}

TEST(Oracle, TreeIsValidatedAndMinimal) {
  DstInstance inst = tutil::g1();
  auto res = exact_opt(inst);
  auto check = validate_solution(inst, res.tree);
  EXPECT_TRUE(check.ok) << check.why;
  EXPECT_EQ(check.cost, res.value);
  // every kept edge is necessary
  for (size_t i = 0; i < res.tree.size(); ++i) {
    std::vector<Edge> without = res.tree;
    without.erase(without.begin() + i);
    EXPECT_FALSE(validate_solution(inst, without).ok);
  }
}

TEST(Oracle, BackendsAgreeOnRandomInstances) {
  std::mt19937_64 rng(11);
  for (int it = 0; it < 60; ++it) {
    DstInstance inst = tutil::random_dst(rng, 3 + static_cast<int>(rng() % 4), 2, 6);
    if (inst.edges.size() > 20) continue;
    auto a = exact_opt(inst, OracleBackend::dp);
    auto b = exact_opt(inst, OracleBackend::enumeration);
    EXPECT_EQ(a.value, b.value);
    EXPECT_EQ(a.tree, b.tree);  // shared canonical tie-break
  }
}

TEST(Oracle, ValueFunctionsMatchOnFixtures) {
  DstInstance inst = tutil::g1();
  auto vd = steiner_value_dp(inst.n, inst.edges, inst.root, inst.terminals);
  auto ve = steiner_value_enum(inst.n, inst.edges, inst.root, inst.terminals);
  ASSERT_TRUE(vd.has_value());
  ASSERT_TRUE(ve.has_value());
  EXPECT_EQ(*vd, *ve);
}

TEST(Oracle, InfeasibleReportsEmpty) {
  DstInstance inst;
  inst.n = 3;
  inst.root = 0;
  inst.terminals = {2};
  inst.edges = {{0, 1, Rational(1)}};
  auto vd = steiner_value_dp(inst.n, inst.edges, inst.root, inst.terminals);
  EXPECT_FALSE(vd.has_value());
  EXPECT_THROW(exact_opt(inst), Error);
}

TEST(Oracle, TerminalCapEnforced) {
  DstInstance inst;
  inst.n = 15;
  inst.root = 0;
  for (int v = 1; v < 15; ++v) {
    inst.edges.push_back({0, v, Rational(1)});
    inst.terminals.push_back(v);
  }
  EXPECT_THROW(exact_opt(inst), Error);
}

TEST(Canonical, OptimumTreeContractsAndBounds) {
  MetricClosure mc = metric_closure(tutil::g1());
  CanonicalTree ct = canonical_optimum_tree(mc.closure);
  EXPECT_EQ(ct.value, Rational(3));
  EXPECT_LE(ct.tree.size(), 2 * 2);  // at most 2k vertices
  // vertex 1 is a branching hub here, so it survives contraction
  EXPECT_TRUE(ct.tree.parent.count(1));
}

TEST(Canonical, ChainContractsToSingleEdge) {
  DstInstance inst = parse_dst(
      "dst 4 3\nroot 0\nterminals 3\nedge 0 1 1\nedge 1 2 1\nedge 2 3 1\n");
  MetricClosure mc = metric_closure(inst);
  CanonicalTree ct = canonical_optimum_tree(mc.closure);
  EXPECT_EQ(ct.value, Rational(3));
  EXPECT_EQ(ct.tree.size(), 2);  // root and terminal only
}

#include "dstq/graph.hpp"

#include <gtest/gtest.h>

#include <random>

#include "util.hpp"

using namespace dstq;

TEST(Parse, RoundTrip) {
  DstInstance inst = tutil::g1();
  EXPECT_EQ(inst.n, 4);
  EXPECT_EQ(inst.root, 0);
  EXPECT_EQ(inst.k(), 2);
  DstInstance again = parse_dst(serialize_dst(inst));
  EXPECT_EQ(serialize_dst(inst), serialize_dst(again));
}

TEST(Parse, RejectsRootTerminal) {
  EXPECT_THROW(parse_dst("dst 2 1\nroot 0\nterminals 0\nedge 0 1 1\n"), Error);
}

TEST(Parse, ParallelEdgesKeepCheapest) {
  DstInstance inst = parse_dst(
      "dst 2 2\nroot 0\nterminals 1\nedge 0 1 5\nedge 0 1 2\n");
  ASSERT_EQ(inst.edges.size(), 1u);
  EXPECT_EQ(inst.edges[0].cost, Rational(2));
}

TEST(Parse, LineNumberInError) {
  try {
    parse_dst("dst 2 1\nroot 0\nterminals 1\nedge 0 7 1\n");
    FAIL() << "expected parse error";
  } catch (const Error& e) {
    EXPECT_EQ(e.kind(), Errc::parse);
    EXPECT_NE(std::string(e.what()).find("line 4"), std::string::npos);
  }
}

TEST(Closure, TriangleInequality) {
  MetricClosure mc = metric_closure(tutil::g1());
  const DstInstance& c = mc.closure;
  for (const Edge& ab : c.edges)
    for (const Edge& bc : c.edges) {
      if (ab.tail != bc.head) continue;
      const Edge* ac = c.find_edge(ab.head, bc.tail);
      if (ab.head == bc.tail) continue;
      ASSERT_NE(ac, nullptr);
      EXPECT_LE(ac->cost, ab.cost + bc.cost);
    }
  // shortcut 0->2 improves from 3 to 2
  EXPECT_EQ(c.find_edge(0, 2)->cost, Rational(2));
}

TEST(Closure, UnreachableTerminal) {
  DstInstance inst = parse_dst("dst 3 1\nroot 0\nterminals 2\nedge 0 1 1\n");
  EXPECT_THROW(metric_closure(inst), Error);
}

TEST(Closure, PathRecovery) {
  MetricClosure mc = metric_closure(tutil::g1());
  auto path = mc.path_edges(0, 2);
  ASSERT_EQ(path.size(), 2u);
  EXPECT_EQ(path[0].head, 0);
  EXPECT_EQ(path[0].tail, 1);
  EXPECT_EQ(path[1].tail, 2);
}

TEST(Solution, ValidateAndPrune) {
  DstInstance inst = tutil::g1();
  auto pruned = prune_to_arborescence(inst, inst.edges);
  auto check = validate_solution(inst, pruned);
  EXPECT_TRUE(check.ok) << check.why;
  EXPECT_EQ(check.cost, Rational(3));
}

TEST(Solution, RejectsMissingTerminal) {
  DstInstance inst = tutil::g1();
  std::vector<Edge> sol{*inst.find_edge(0, 1), *inst.find_edge(1, 2)};
  EXPECT_FALSE(validate_solution(inst, sol).ok);
}

TEST(Solution, ExpandToOriginal) {
  DstInstance inst = tutil::g1();
  MetricClosure mc = metric_closure(inst);
  std::vector<Edge> closure_sol{*mc.closure.find_edge(0, 2), *mc.closure.find_edge(0, 3)};
  auto orig = expand_to_original(mc, closure_sol);
  auto check = validate_solution(inst, orig);
  EXPECT_TRUE(check.ok) << check.why;
  EXPECT_EQ(check.cost, Rational(3));  // both expansions share 0->1
}

TEST(Trees, FromEdges) {
  DstInstance inst = tutil::g1();
  std::vector<Edge> sol{*inst.find_edge(0, 1), *inst.find_edge(1, 2), *inst.find_edge(1, 3)};
  RootedTree t = tree_from_edges(0, sol);
  EXPECT_EQ(t.size(), 4);
  EXPECT_EQ(t.parent.at(2), 1);
  std::vector<Edge> cyc{{0, 1, Rational(1)}, {1, 0, Rational(1)}};
  EXPECT_THROW(tree_from_edges(0, cyc), Error);
}

TEST(Trees, RandomPruneAlwaysValidates) {
  std::mt19937_64 rng(7);
  for (int it = 0; it < 50; ++it) {
    DstInstance inst = tutil::random_dst(rng, 3 + static_cast<int>(rng() % 8), 2, 8);
    auto pruned = prune_to_arborescence(inst, inst.edges);
    auto check = validate_solution(inst, pruned);
    EXPECT_TRUE(check.ok) << check.why;
  }
}

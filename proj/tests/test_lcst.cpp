#include "dstq/lcst.hpp"

#include <gtest/gtest.h>

#include <random>

#include "util.hpp"

using namespace dstq;

namespace {
// root demands local label 2, served by an inner node whose selection forces
// a leaf serving global 0; global 1 served at a leaf under the root
const char* kChain =
    "lcst 5\n"
    "node 0 - 0 dem:2 ser:\n"
    "node 1 0 1 dem:3 ser:2\n"
    "node 2 1 2 dem: ser:3,0\n"
    "node 3 0 4 dem: ser:1\n"
    "node 4 0 9 dem: ser:0,1\n"
    "globals 0 1\n";
}  // namespace

TEST(LcstParse, RoundTrip) {
  LcstInstance inst = parse_lcst(kChain);
  EXPECT_EQ(inst.n(), 5);
  EXPECT_EQ(inst.num_globals, 2);
  EXPECT_EQ(serialize_lcst(parse_lcst(serialize_lcst(inst))), serialize_lcst(inst));
}

TEST(LcstParse, RejectsDemandedGlobal) {
  EXPECT_THROW(parse_lcst("lcst 1\nnode 0 - 0 dem:0 ser:\nglobals 0\n"), Error);
}

TEST(LcstValidate, SolutionChecks) {
  LcstInstance inst = parse_lcst(kChain);
  std::set<int> good{0, 1, 2, 3};
  EXPECT_TRUE(validate_full_solution(inst, good).ok);
  std::set<int> unserved{0, 3};  // root demand 2 unserved
  EXPECT_FALSE(validate_label_solution(inst, unserved).ok);
  std::set<int> disconnected{0, 2};  // node 2 without its parent
  EXPECT_FALSE(validate_label_solution(inst, disconnected).ok);
}

TEST(LcstOptim, BitmaskAndAssignmentAgree) {
  LcstInstance inst = parse_lcst(kChain);
  auto bm = lcst_opt_bitmask(inst);
  auto bf = brute_force_lcst(inst);
  ASSERT_TRUE(bm.has_value());
  ASSERT_TRUE(bf.has_value());
  EXPECT_EQ(bm->value, bf->value);
  EXPECT_EQ(bf->value, Rational(7));  // {0,1,2,3}
}

TEST(LcstOptim, RandomAgreement) {
  std::mt19937_64 rng(23);
  int feasible = 0;
  for (int it = 0; it < 80; ++it) {
    LcstInstance inst = tutil::random_lcst(rng, 4 + static_cast<int>(rng() % 9), 2, 3);
    auto bm = lcst_opt_bitmask(inst);
    auto bf = brute_force_lcst(inst);
    EXPECT_EQ(bm.has_value(), bf.has_value());
    if (bm && bf) {
      EXPECT_EQ(bm->value, bf->value);
      ++feasible;
    }
  }
  EXPECT_GE(feasible, 40);
}

TEST(Normalize, SplitsAndPushesToLeaves) {
  LcstInstance inst = parse_lcst(kChain);
  NormalizedLcst nl = normalize(inst);
  // every service now sits on a leaf with exactly one label and no demand;
  // leaves freshly split off an internal node have cost 0
  for (int v = 0; v < nl.n(); ++v) {
    if (nl.is_leaf(v)) {
      EXPECT_GE(nl.leaf_label[v], 0);
      EXPECT_TRUE(nl.dem[v].empty());
    } else {
      EXPECT_EQ(nl.leaf_label[v], -1);
    }
  }
  // globals keep their ids
  EXPECT_EQ(nl.num_globals, 2);
  validate_instance(to_instance(nl));
}

TEST(Normalize, OptimumPreserved) {
  std::mt19937_64 rng(29);
  for (int it = 0; it < 40; ++it) {
    LcstInstance inst = tutil::random_lcst(rng, 4 + static_cast<int>(rng() % 7), 2, 3);
    auto before = brute_force_lcst(inst);
    auto pruned = prune_useless(normalize(inst));
    if (!before.has_value()) {
      EXPECT_FALSE(pruned.feasible);
      continue;
    }
    ASSERT_TRUE(pruned.feasible);
    auto after = brute_force_lcst(pruned.inst);
    ASSERT_TRUE(after.has_value());
    EXPECT_EQ(before->value, after->value);
  }
}

TEST(Prune, RemovesUnservableBranches) {
  // node 1 demands label 3 which nothing serves; node 2 is below it
  LcstInstance inst = parse_lcst(
      "lcst 4\n"
      "node 0 - 0 dem:2 ser:\n"
      "node 1 0 1 dem:3 ser:2\n"
      "node 2 1 1 dem: ser:0\n"
      "node 3 0 2 dem: ser:2,0\n"
      "globals 0\n");
  auto pruned = prune_useless(normalize(inst));
  ASSERT_TRUE(pruned.feasible);
  auto opt = brute_force_lcst(pruned.inst);
  ASSERT_TRUE(opt.has_value());
  EXPECT_EQ(opt->value, Rational(2));  // forced through node 3
  for (int v = 0; v < pruned.inst.n(); ++v)
    EXPECT_NE(pruned.inst.orig[v], 1);  // the dead branch is gone
}

TEST(Prune, InfeasibleWhenGlobalUnservable) {
  LcstInstance inst = parse_lcst(
      "lcst 2\n"
      "node 0 - 0 dem: ser:\n"
      "node 1 0 1 dem:2 ser:0\n"  // the only server of global 0 needs dead label 2
      "globals 0 1\n");
  auto pruned = prune_useless(normalize(inst));
  EXPECT_FALSE(pruned.feasible);
}

TEST(NormalizedHelpers, HeightAndSmax) {
  NormalizedLcst nl = prune_useless(normalize(parse_lcst(kChain))).inst;
  EXPECT_GE(nl.height(), 2);
  EXPECT_GE(nl.s_max(), 1);
  auto opt = brute_force_lcst(nl);
  ASSERT_TRUE(opt.has_value());
  EXPECT_TRUE(validate_full(nl, opt->sol).ok);
}

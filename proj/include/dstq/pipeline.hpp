#pragma once

// End-to-end orchestration: parse -> metric closure -> reduction -> LP /
// distribution oracle -> rounding -> back-mapping -> validated Steiner tree.

#include <filesystem>
#include <fstream>
#include <map>
#include <memory>
#include <optional>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include "dstq/decomp.hpp"
#include "dstq/errors.hpp"
#include "dstq/graph.hpp"
#include "dstq/lcst.hpp"
#include "dstq/lifted.hpp"
#include "dstq/lp.hpp"
#include "dstq/oracle.hpp"
#include "dstq/rational.hpp"
#include "dstq/reduction.hpp"
#include "dstq/rounding.hpp"

namespace dstq {

struct PipelineConfig {
  std::optional<int> g;
  std::optional<int> depth;
  ReductionCaps caps;
  std::optional<int> rounds;  // lift level for the sa-lp backend
  std::optional<int> reps;
  int max_batches = 64;
  std::uint64_t seed = 0;
  enum class Backend { dist, sa_lp } backend = Backend::dist;
  long max_lp_cells = 4000000;  // rows x cols guard for the exact solver
};

struct RunReport {
  std::string mode;
  int n = 0, m = 0, k = 0;
  ReductionParams params;
  long tree_nodes = -1;  // materialized label-tree size, -1 if unused
  std::optional<Rational> lp_objective;
  std::optional<Rational> cost;
  std::optional<Rational> opt;
  std::uint64_t seed = 0;

  std::optional<Rational> ratio() const {
    if (!cost || !opt || *opt == 0) return std::nullopt;
    return *cost / *opt;
  }

  std::string to_text() const {
    std::ostringstream out;
    out << "mode " << mode << "\n";
    out << "instance n=" << n << " m=" << m << " k=" << k << "\n";
    out << "params g=" << params.g << " depth=" << params.depth << " hbar=" << params.hbar
        << (params.lowered ? " (lowered: no approximation guarantee)" : "") << "\n";
    if (tree_nodes >= 0) out << "label-tree nodes " << tree_nodes << "\n";
    if (lp_objective) out << "lp-objective " << format_rational(*lp_objective) << "\n";
    if (cost) out << "cost " << format_rational(*cost) << "\n";
    if (opt) out << "opt " << format_rational(*opt) << "\n";
    if (auto r = ratio()) out << "ratio " << format_rational(*r) << "\n";
    out << "seed " << seed << "\n";
    return out.str();
  }
};

// ----------------------------- simple modes --------------------------------

inline ExactResult run_exact(const DstInstance& inst, OracleBackend backend = OracleBackend::dp) {
  return exact_opt(inst, backend);
}

// union of shortest root->terminal paths — the k-approximation comparator
inline std::vector<Edge> baseline_shortest_paths(const DstInstance& inst) {
  metric_closure(inst);  // reachability check
  return prune_to_arborescence(inst, inst.edges);
}

// --------------------------- reduced instance ------------------------------

struct ReducedInstance {
  MetricClosure mc;
  ReductionParams params;
  std::shared_ptr<LabelTree> tree;
  NormalizedLcst nl;  // normalized + pruned
  bool feasible = true;
};

inline ReductionParams params_for(const DstInstance& inst, const PipelineConfig& cfg) {
  int k = static_cast<int>(inst.terminals.size());
  ReductionParams p = choose_params(k, cfg.depth, cfg.g);
  p.caps = cfg.caps;
  return p;
}

// full materialization route (lp-bound, sa-lp backend)
inline ReducedInstance build_reduced(const DstInstance& inst, const PipelineConfig& cfg) {
  ReducedInstance out{metric_closure(inst), params_for(inst, cfg), nullptr, {}, true};
  out.tree =
      std::make_shared<LabelTree>(out.mc.closure, inst.terminals, out.params);
  LcstInstance full = out.tree->to_lcst_instance();
  auto pruned = prune_useless(normalize(full));
  out.nl = std::move(pruned.inst);
  out.feasible = pruned.feasible;
  return out;
}

// ------------------------- solution back-mapping ---------------------------

// Lift a label-tree solution into the normalized space: keep every internal
// copy of a selected node, then pick one serving leaf (lowest id) per demand
// occurrence and per global label. One leaf per label keeps the 0/1 event
// vector feasible for the base LP's flow-style equalities.
inline std::set<int> normalized_solution(const NormalizedLcst& nl,
                                         const std::set<int>& label_sol) {
  std::set<int> out;
  for (int v = 0; v < nl.n(); ++v)
    if (!nl.is_leaf(v) && label_sol.count(nl.orig[v])) out.insert(v);
  require(out.count(nl.root), Errc::validation, "selection lost the root while normalizing");
  // descendants by Euler intervals
  std::vector<int> tin(nl.n()), tout(nl.n());
  {
    int clock = 0;
    std::vector<std::pair<int, bool>> st{{nl.root, false}};
    while (!st.empty()) {
      auto [v, done] = st.back();
      st.pop_back();
      if (done) {
        tout[v] = clock++;
        continue;
      }
      tin[v] = clock++;
      st.push_back({v, true});
      for (auto it = nl.children[v].rbegin(); it != nl.children[v].rend(); ++it)
        st.push_back({*it, false});
    }
  }
  auto pick_leaf = [&](int label, int under) {
    int best = -1;
    for (int v = 0; v < nl.n(); ++v) {
      if (!nl.is_leaf(v) || nl.leaf_label[v] != label) continue;
      if (!out.count(nl.parent[v])) continue;
      if (under >= 0 && !(tin[under] <= tin[v] && tout[v] <= tout[under])) continue;
      if (best < 0) best = v;
    }
    require(best >= 0, Errc::validation,
            "no serving leaf for label " + std::to_string(label) + " in the selection");
    out.insert(best);
  };
  for (int v = 0; v < nl.n(); ++v)
    if (out.count(v))
      for (int l : nl.dem[v]) pick_leaf(l, v);
  for (int g = 0; g < nl.num_globals; ++g) pick_leaf(g, -1);
  return out;
}

// map a normalized-space selection back to label-tree node ids
inline std::set<int> label_solution(const NormalizedLcst& nl, const std::set<int>& nsol) {
  std::set<int> out;
  for (int v : nsol)
    if (!nl.is_leaf(v)) out.insert(nl.orig[v]);
  return out;
}

// ------------------------------ lp-bound -----------------------------------

inline void check_lp_size(const LinearProgram& lp, long cap) {
  long cells = (long)lp.nvars * (long)(lp.rows.size() + 1);
  require(cells <= cap, Errc::caps,
          "LP too large for the exact solver (" + std::to_string(lp.nvars) + " vars x " +
              std::to_string(lp.rows.size()) + " rows)");
}

// base-LP objective on the reduced instance; a lower bound on the optimum
// whenever the depth budget admits embedding it
inline std::pair<Rational, RunReport> run_lp_bound(const DstInstance& inst,
                                                   const PipelineConfig& cfg) {
  RunReport rep;
  rep.mode = "lp-bound";
  rep.n = inst.n;
  rep.m = static_cast<int>(inst.edges.size());
  rep.k = inst.k();
  rep.seed = cfg.seed;
  ReducedInstance red = build_reduced(inst, cfg);
  rep.params = red.params;
  rep.tree_nodes = red.tree->size();
  require(red.feasible, Errc::infeasible, "reduced instance infeasible after pruning");
  auto [lp, es] = build_base_lp(red.nl);
  check_lp_size(lp, cfg.max_lp_cells);
  LpSolution sol = solve_lp(lp);
  require(sol.status == LpStatus::optimal, Errc::infeasible, "base LP not optimal");
  rep.lp_objective = sol.value;
  return {sol.value, rep};
}

// ------------------------------- approx ------------------------------------

// decomposition of the canonical optimum (padded when it is a single edge)
inline DecompNode optimum_decomposition(const MetricClosure& mc,
                                        OracleBackend backend = OracleBackend::dp) {
  CanonicalTree ct = canonical_optimum_tree(mc.closure, backend);
  std::map<std::pair<int, int>, Rational> cost;
  for (const Edge& e : ct.edges) cost[{e.head, e.tail}] = e.cost;
  DecompNode tau = pad_singleton(build_decomposition_tree(ct.tree, cost));
  auto check = validate_decomposition(tau, mc.closure.root);
  require(check.ok, Errc::validation, "optimum decomposition invalid: " + check.why);
  return tau;
}

struct ApproxResult {
  std::vector<Edge> tree;  // edges of the original instance
  RunReport report;
};

inline ApproxResult run_approx(const DstInstance& inst, const PipelineConfig& cfg) {
  ApproxResult res;
  RunReport& rep = res.report;
  rep.mode = "approx";
  rep.n = inst.n;
  rep.m = static_cast<int>(inst.edges.size());
  rep.k = inst.k();
  rep.seed = cfg.seed;

  std::shared_ptr<LabelTree> lt;
  NormalizedLcst nl;
  std::function<std::shared_ptr<const LiftedSolution>()> factory;
  SolveLcstOptions sopts;
  sopts.max_batches = cfg.max_batches;
  if (cfg.reps) sopts.reps = *cfg.reps;

  MetricClosure mc = metric_closure(inst);
  rep.params = params_for(inst, cfg);

  if (cfg.backend == PipelineConfig::Backend::dist) {
    // testing device: a point distribution on the embedded optimum
    require(rep.k <= kOracleTerminalCap, Errc::caps,
            "distribution backend needs the exact oracle (too many terminals)");
    DecompNode tau = optimum_decomposition(mc);
    TwigForestNode forest = twig_forest(tau, rep.params.g);
    lt = std::make_shared<LabelTree>(mc.closure, inst.terminals, rep.params);
    std::set<int> embedded = embed_optimal(*lt, forest);
    LcstInstance touched = lt->materialized_instance();
    auto pruned = prune_useless(normalize(touched));
    require(pruned.feasible, Errc::infeasible, "reduced instance infeasible after pruning");
    nl = std::move(pruned.inst);
    std::set<int> nsol = normalized_solution(nl, embedded);
    auto [lp, es0] = build_base_lp(nl);
    auto dist = DistributionBacked::create(nl, es0, lp, {{Rational(1), nsol}});
    factory = [dist]() { return dist; };
  } else {
    ReducedInstance red = build_reduced(inst, cfg);
    require(red.feasible, Errc::infeasible, "reduced instance infeasible after pruning");
    lt = red.tree;
    nl = std::move(red.nl);
    int need = required_rounds(nl.s_max(), nl.height());
    int R = cfg.rounds ? *cfg.rounds : need;
    sopts.round.allow_low_rounds = R < need;
    auto [lp, es0] = build_base_lp(nl);
    LiftedLp lifted = lift(lp, R);
    check_lp_size(lifted.lp, cfg.max_lp_cells);
    LpSolution sol = solve_lp(lifted.lp);
    require(sol.status == LpStatus::optimal, Errc::infeasible, "lifted LP not optimal");
    rep.lp_objective = sol.value;
    auto table = SaLpSolution::from_lifted(lifted, sol.x, R);
    factory = [table]() { return table; };
  }
  rep.tree_nodes = lt->size();

  EventSpace es{nl.n(), nl.num_labels};
  SolveLcstResult rounded = solve_lcst(nl, es, factory, cfg.seed, sopts);
  std::set<int> lsol = label_solution(nl, rounded.nodes);
  DecompNode tau = lcst_to_decomposition(*lt, lsol);
  std::vector<Edge> closure_sol = decomposition_to_steiner(tau, mc.closure);
  res.tree = expand_to_original(mc, closure_sol);
  auto check = validate_solution(inst, res.tree);
  require(check.ok, Errc::validation, "approx output failed validation: " + check.why);
  rep.cost = check.cost;
  if (rep.k <= kOracleTerminalCap) {
    rep.opt = exact_opt(inst).value;
    require(*rep.cost >= *rep.opt, Errc::validation, "output cheaper than the oracle optimum");
  }
  return res;
}

// ------------------------------- lcst mode ---------------------------------

struct LcstRunResult {
  Rational value;
  std::set<int> sol;  // original node ids
  bool feasible = true;
};

inline LcstRunResult run_lcst_direct(const LcstInstance& inst, int cap = 24) {
  auto pruned = prune_useless(normalize(inst));
  if (!pruned.feasible) return {Rational(0), {}, false};
  auto opt = brute_force_lcst(pruned.inst, cap);
  require(opt.has_value(), Errc::caps, "instance too large for the exact LCST search");
  LcstRunResult out;
  out.value = opt->value;
  for (int v : opt->sol)
    if (!pruned.inst.is_leaf(v)) out.sol.insert(pruned.inst.orig[v]);
  return out;
}

// ------------------------------- stats mode --------------------------------

inline MarginalStats run_stats(const DstInstance& inst, const PipelineConfig& cfg, long trials) {
  PipelineConfig c = cfg;
  c.backend = PipelineConfig::Backend::dist;
  MetricClosure mc = metric_closure(inst);
  ReductionParams params = params_for(inst, c);
  require(inst.k() <= kOracleTerminalCap, Errc::caps, "stats mode needs the exact oracle");
  DecompNode tau = optimum_decomposition(mc);
  TwigForestNode forest = twig_forest(tau, params.g);
  LabelTree lt(mc.closure, inst.terminals, params);
  std::set<int> embedded = embed_optimal(lt, forest);
  auto pruned = prune_useless(normalize(lt.materialized_instance()));
  require(pruned.feasible, Errc::infeasible, "reduced instance infeasible after pruning");
  const NormalizedLcst& nl = pruned.inst;
  std::set<int> nsol = normalized_solution(nl, embedded);
  auto [lp, es] = build_base_lp(nl);
  auto dist = DistributionBacked::create(nl, es, lp, {{Rational(1), nsol}});
  return estimate_marginals(nl, es, [dist]() { return dist; }, cfg.seed, trials);
}

// -------------------------------- bench ------------------------------------

inline std::string bench(const std::vector<std::pair<std::string, DstInstance>>& corpus,
                         const PipelineConfig& cfg) {
  std::ostringstream out;
  out << "file,mode,n,m,k,g,depth,status,cost,opt,ratio,seed\n";
  auto sanitize = [](std::string s) {
    for (char& c : s)
      if (c == ',' || c == '\n') c = ';';
    return s;
  };
  for (const auto& [name, inst] : corpus) {
    auto row = [&](const std::string& mode, const std::string& status,
                   const std::optional<Rational>& cost, const std::optional<Rational>& opt,
                   const ReductionParams* params) {
      out << name << "," << mode << "," << inst.n << "," << inst.edges.size() << ","
          << inst.k() << ",";
      if (params)
        out << params->g << "," << params->depth;
      else
        out << ",";
      out << "," << status << ",";
      if (cost) out << format_rational(*cost);
      out << ",";
      if (opt) out << format_rational(*opt);
      out << ",";
      if (cost && opt && *opt != 0) out << format_rational(*cost / *opt);
      out << "," << cfg.seed << "\n";
    };
    try {
      ExactResult ex = run_exact(inst);
      row("exact", "ok", ex.value, ex.value, nullptr);
    } catch (const Error& e) {
      row("exact", "error:" + sanitize(e.what()), {}, {}, nullptr);
    }
    try {
      ApproxResult ap = run_approx(inst, cfg);
      row("approx", "ok", ap.report.cost, ap.report.opt, &ap.report.params);
    } catch (const Error& e) {
      row("approx", "error:" + sanitize(e.what()), {}, {}, nullptr);
    }
  }
  return out.str();
}

inline std::vector<std::pair<std::string, DstInstance>> load_corpus(const std::string& dir) {
  namespace fs = std::filesystem;
  std::vector<std::pair<std::string, DstInstance>> out;
  std::vector<fs::path> files;
  for (const auto& entry : fs::directory_iterator(dir))
    if (entry.path().extension() == ".dst") files.push_back(entry.path());
  std::sort(files.begin(), files.end());
  for (const auto& f : files) {
    std::ifstream in(f);
    require(in.good(), Errc::parse, "cannot open " + f.string());
    out.push_back({f.filename().string(), parse_dst(in)});
  }
  return out;
}

}  // namespace dstq

// dstq — directed Steiner tree playground.
//
//   dstq exact     FILE            exact optimum (dynamic program)
//   dstq approx    FILE            reduction + LP/rounding pipeline
//   dstq lp-bound  FILE            base-LP lower bound on the reduced instance
//   dstq lcst      FILE            exact search on a labeled-tree instance
//   dstq stats     FILE            rounding marginal statistics (CSV)
//   dstq bench     DIR             one CSV row per (instance, mode)
//
// Exit codes: 0 ok, 2 infeasible, 3 caps exceeded, 4 retry budget exhausted,
// 1 anything else.

#include <cstdlib>
#include <fstream>
#include <iostream>
#include <string>

#include "CLI11.hpp"
#include "dstq/pipeline.hpp"

namespace {

dstq::DstInstance load_dst(const std::string& path) {
  std::ifstream in(path);
  dstq::require(in.good(), dstq::Errc::parse, "cannot open " + path);
  return dstq::parse_dst(in);
}

void write_out(const std::string& path, const std::string& content) {
  if (path.empty()) {
    std::cout << content;
    return;
  }
  std::ofstream out(path);
  dstq::require(out.good(), dstq::Errc::parse, "cannot open " + path + " for writing");
  out << content;
}

int exit_code(dstq::Errc kind) {
  switch (kind) {
    case dstq::Errc::infeasible:
      return 2;
    case dstq::Errc::caps:
      return 3;
    case dstq::Errc::retry:
      return 4;
    default:
      return 1;
  }
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"directed Steiner tree: exact oracle, LP bounds, rounding pipeline"};
  app.require_subcommand(1);

  std::string file, csv_path;
  std::uint64_t seed = 0;
  bool seed_given = false;
  int g = 0, depth = 0, rounds = 0, reps = 0;
  long trials = 10000;
  long cap_nodes = 0, cap_twigs = 0;
  std::string backend = "dist";

  auto add_common = [&](CLI::App* cmd) {
    cmd->add_option("file", file, "input file / corpus directory")->required();
    cmd->add_option("--seed", seed, "PRNG seed (default: DSTQ_SEED or 0)")
        ->each([&](const std::string&) { seed_given = true; });
    cmd->add_option("--g", g, "twig collapse depth override");
    cmd->add_option("--depth", depth, "label-tree depth override (forfeits the guarantee)");
    cmd->add_option("--caps", [&](const std::vector<std::string>& vals) {
      for (const auto& v : vals) {
        auto eq = v.find('=');
        if (eq == std::string::npos) return false;
        std::string key = v.substr(0, eq);
        long n = std::stol(v.substr(eq + 1));
        if (key == "nodes")
          cap_nodes = n;
        else if (key == "twigs")
          cap_twigs = n;
        else
          return false;
      }
      return true;
    }, "caps as nodes=N and/or twigs=N")->delimiter(',');
    cmd->add_option("--rounds", rounds, "lift level R for the sa-lp backend");
    cmd->add_option("--reps", reps, "rounding repetitions per batch");
    cmd->add_option("--backend", backend, "approx oracle: sa-lp or dist")
        ->check(CLI::IsMember({"sa-lp", "dist"}));
    cmd->add_option("--csv", csv_path, "write CSV output here instead of stdout");
  };

  auto* c_exact = app.add_subcommand("exact", "exact optimum");
  auto* c_approx = app.add_subcommand("approx", "full approximation pipeline");
  auto* c_lp = app.add_subcommand("lp-bound", "base-LP lower bound");
  auto* c_lcst = app.add_subcommand("lcst", "exact labeled-tree search");
  auto* c_stats = app.add_subcommand("stats", "rounding marginal statistics");
  auto* c_bench = app.add_subcommand("bench", "CSV over a corpus directory");
  for (auto* c : {c_exact, c_approx, c_lp, c_lcst, c_stats, c_bench}) add_common(c);
  c_stats->add_option("--trials", trials, "number of rounding trials");

  CLI11_PARSE(app, argc, argv);

  if (!seed_given) {
    if (const char* env = std::getenv("DSTQ_SEED")) seed = std::strtoull(env, nullptr, 10);
  }

  dstq::PipelineConfig cfg;
  cfg.seed = seed;
  if (g > 0) cfg.g = g;
  if (depth > 0) cfg.depth = depth;
  if (rounds > 0) cfg.rounds = rounds;
  if (reps > 0) cfg.reps = reps;
  if (cap_nodes > 0) cfg.caps.max_tree_nodes = cap_nodes;
  if (cap_twigs > 0) cfg.caps.max_twigs = cap_twigs;
  cfg.backend = backend == "sa-lp" ? dstq::PipelineConfig::Backend::sa_lp
                                   : dstq::PipelineConfig::Backend::dist;

  try {
    if (c_exact->parsed()) {
      auto inst = load_dst(file);
      auto res = dstq::run_exact(inst);
      std::cout << "opt " << dstq::format_rational(res.value) << "\n";
      for (const auto& e : res.tree)
        std::cout << "edge " << e.head << " " << e.tail << " " << dstq::format_rational(e.cost)
                  << "\n";
    } else if (c_approx->parsed()) {
      auto inst = load_dst(file);
      auto res = dstq::run_approx(inst, cfg);
      std::cout << res.report.to_text();
      for (const auto& e : res.tree)
        std::cout << "edge " << e.head << " " << e.tail << " " << dstq::format_rational(e.cost)
                  << "\n";
    } else if (c_lp->parsed()) {
      auto inst = load_dst(file);
      auto [value, rep] = dstq::run_lp_bound(inst, cfg);
      std::cout << rep.to_text();
    } else if (c_lcst->parsed()) {
      std::ifstream in(file);
      dstq::require(in.good(), dstq::Errc::parse, "cannot open " + file);
      auto inst = dstq::parse_lcst(in);
      auto res = dstq::run_lcst_direct(inst);
      if (!res.feasible) {
        std::cout << "infeasible\n";
        return 2;
      }
      std::cout << "value " << dstq::format_rational(res.value) << "\nnodes";
      for (int v : res.sol) std::cout << " " << v;
      std::cout << "\n";
    } else if (c_stats->parsed()) {
      auto inst = load_dst(file);
      auto st = dstq::run_stats(inst, cfg, trials);
      write_out(csv_path, st.to_csv());
    } else if (c_bench->parsed()) {
      auto corpus = dstq::load_corpus(file);
      write_out(csv_path, dstq::bench(corpus, cfg));
    }
  } catch (const dstq::Error& e) {
    std::cerr << "error: " << e.what() << "\n";
    return exit_code(e.kind());
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
  return 0;
}

// Command-line front end: solve problem files, analyze sparsity patterns,
// benchmark preprocessing strategies, and generate test problems.
//
// Exit codes: 0 solved, 2 infeasibility detected, 3 iteration or time limit,
// 1 usage or I/O error.

#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <sstream>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <json.hpp>

#include "conik.hpp"

namespace {

using nlohmann::json;

int status_exit_code(conik::SolveStatus s) {
  switch (s) {
    case conik::SolveStatus::Solved:
      return 0;
    case conik::SolveStatus::PrimalInfeasible:
    case conik::SolveStatus::DualInfeasible:
      return 2;
    case conik::SolveStatus::MaxIterations:
    case conik::SolveStatus::TimeLimit:
      return 3;
  }
  return 1;
}

conik::MergeKind merge_kind_from(const std::string& name) {
  if (name == "none") return conik::MergeKind::None;
  if (name == "parent-child") return conik::MergeKind::ParentChild;
  if (name == "clique-graph") return conik::MergeKind::CliqueGraph;
  if (name == "sparsecolo") return conik::MergeKind::SparseColo;
  throw CLI::ValidationError("--merge", "unknown strategy '" + name + "'");
}

// Environment default for the projection worker count; the --threads flag
// overrides it.
void apply_thread_env(conik::Settings& s) {
  const char* env = std::getenv("CONIK_NUM_THREADS");
  if (!env || !*env) return;
  char* end = nullptr;
  const long v = std::strtol(env, &end, 10);
  if (end == env || *end != '\0' || v < 1) {
    std::cerr << "warning: ignoring CONIK_NUM_THREADS='" << env << "'\n";
    return;
  }
  s.threads = static_cast<int>(v);
}

struct SolveFlags {
  std::string decompose = "on";
  std::string merge = "clique-graph";
  bool verbose = false;
};

void add_settings_options(CLI::App* cmd, conik::Settings& s, SolveFlags& f) {
  cmd->add_option("--eps-abs", s.eps_abs, "absolute convergence tolerance");
  cmd->add_option("--eps-rel", s.eps_rel, "relative convergence tolerance");
  cmd->add_option("--rho", s.rho, "step size for the constraint rows");
  cmd->add_option("--sigma", s.sigma, "objective regularization");
  cmd->add_option("--alpha", s.alpha, "over-relaxation factor");
  cmd->add_option("--max-iter", s.max_iter, "iteration limit");
  cmd->add_option("--time-limit", s.time_limit, "wall-clock limit in seconds (0 = off)");
  cmd->add_option("--threads", s.threads, "projection worker count");
  cmd->add_option("--decompose", f.decompose, "chordal decomposition of PSD blocks")
      ->check(CLI::IsMember({"on", "off"}));
  cmd->add_option("--merge", f.merge, "clique merge strategy")
      ->check(CLI::IsMember({"none", "parent-child", "clique-graph", "sparsecolo"}));
  cmd->add_flag("--verbose", f.verbose, "progress lines on standard error");
}

void finish_settings(conik::Settings& s, const SolveFlags& f) {
  s.decompose = f.decompose == "on";
  s.merge.kind = merge_kind_from(f.merge);
  if (f.verbose)
    s.progress = [](const conik::ProgressInfo& p) {
      std::fprintf(stderr, "iter %6d  r_prim %10.3e  r_dual %10.3e  %8.2fs\n",
                   p.iteration, p.r_prim, p.r_dual, p.elapsed_seconds);
    };
}

json result_to_json(const conik::SolveResult& r, const conik::DimacsErrors* e) {
  json j;
  j["status"] = conik::to_string(r.status);
  j["objective"] = r.objective;
  j["iterations"] = r.iterations;
  j["r_prim"] = r.r_prim;
  j["r_dual"] = r.r_dual;
  if (e) j["dimacs"] = {{"eps1", e->eps1}, {"eps2", e->eps2}, {"eps3", e->eps3}};
  j["timings"] = {{"total", r.timings.total},
                  {"setup", r.timings.setup},
                  {"decompose", r.timings.decompose},
                  {"factorization", r.timings.factorization},
                  {"projection", r.timings.projection},
                  {"iterations", r.timings.iterations}};
  auto vec = [](const conik::Vector& v) {
    return std::vector<double>(v.data(), v.data() + v.size());
  };
  j["x"] = vec(r.x);
  j["y"] = vec(r.y);
  j["s"] = vec(r.s);
  if (r.certificate) j["certificate"] = vec(*r.certificate);
  if (!r.decomposition.empty()) {
    json blocks = json::array();
    for (const auto& d : r.decomposition)
      blocks.push_back({{"cone_index", d.cone_index},
                        {"side", d.side},
                        {"clique_count", d.clique_count},
                        {"max_clique", d.max_clique},
                        {"overlap_vars", d.overlap_vars},
                        {"merge_count", d.merges.size()}});
    j["decomposition"] = blocks;
  }
  return j;
}

int do_solve(const std::string& file, conik::Settings settings, const SolveFlags& flags,
             const std::string& json_out) {
  finish_settings(settings, flags);
  const conik::ProblemFile pf = conik::load_problem(file);
  const conik::SolveResult r = conik::solve(pf.problem, settings);

  conik::DimacsErrors e;
  const bool feasible_status = r.status != conik::SolveStatus::PrimalInfeasible &&
                               r.status != conik::SolveStatus::DualInfeasible;
  if (feasible_status) e = conik::dimacs_errors(pf.problem, r);

  std::printf("status       %s\n", conik::to_string(r.status));
  std::printf("objective    %.10g\n", r.objective);
  std::printf("iterations   %d\n", r.iterations);
  std::printf("residuals    r_prim %.3e  r_dual %.3e\n", r.r_prim, r.r_dual);
  if (feasible_status)
    std::printf("dimacs       %.3e %.3e %.3e\n", e.eps1, e.eps2, e.eps3);
  if (pf.known_optimal)
    std::printf("reference    %.10g (gap %.3e)\n", *pf.known_optimal,
                std::abs(r.objective - *pf.known_optimal));
  for (const auto& d : r.decomposition)
    std::printf("decomposed   cone %d: side %d -> %d cliques (max %d, overlap %d, merges %zu)\n",
                d.cone_index, d.side, d.clique_count, d.max_clique, d.overlap_vars,
                d.merges.size());
  std::printf("time         %.4fs (setup %.4f, decompose %.4f, factor %.4f, project %.4f)\n",
              r.timings.total, r.timings.setup, r.timings.decompose,
              r.timings.factorization, r.timings.projection);

  if (!json_out.empty()) {
    std::ofstream out(json_out);
    if (!out) throw std::runtime_error("cannot open " + json_out + " for writing");
    out << result_to_json(r, feasible_status ? &e : nullptr).dump(2) << "\n";
  }
  return status_exit_code(r.status);
}

int do_analyze(const std::string& file, const std::string& merge_name) {
  std::ifstream in(file);
  if (!in) throw std::runtime_error("cannot open " + file);
  std::ostringstream buf;
  buf << in.rdbuf();
  conik::SparsityPattern pattern = conik::pattern_from_string(buf.str());

  const conik::SparsityPattern extended = conik::chordal_extension(pattern);
  const conik::CliqueTree tree = conik::build_clique_tree(extended);

  conik::MergeStrategy strategy;
  strategy.kind = merge_kind_from(merge_name);
  std::vector<conik::MergeLogEntry> log;
  const conik::CliqueTree merged =
      conik::apply_merge_strategy(extended, tree, strategy, &log);

  int max_clique = 0, overlap = 0;
  for (int l = 0; l < merged.size(); ++l) {
    max_clique = std::max(max_clique, static_cast<int>(merged.cliques[l].size()));
    const int eta = static_cast<int>(merged.separator[l].size());
    overlap += eta * (eta + 1) / 2;
  }

  std::printf("vertices     %d\n", pattern.n);
  std::printf("edges        %zu (+%zu fill-in)\n", pattern.edges.size(),
              extended.edges.size() - pattern.edges.size());
  std::printf("cliques      %d (before merging: %d)\n", merged.size(), tree.size());
  std::printf("max clique   %d\n", max_clique);
  std::printf("overlap vars %d\n", overlap);
  std::printf("merges       %zu\n", log.size());
  const std::string lines = conik::merge_log_to_string(log);
  if (!lines.empty()) std::fputs(lines.c_str(), stdout);
  return 0;
}

int do_bench(const std::string& dir, double cap, double sh, conik::Settings base,
             const SolveFlags& flags) {
  conik::Settings settings = base;
  finish_settings(settings, flags);
  settings.progress = nullptr;  // strategy runs stay quiet; rows go to stderr below

  std::vector<std::string> files;
  for (const auto& entry : std::filesystem::directory_iterator(dir)) {
    if (!entry.is_regular_file()) continue;
    const std::string name = entry.path().filename().string();
    if (name.ends_with(".prob") || name.ends_with(".dat-s"))
      files.push_back(entry.path().string());
  }
  std::sort(files.begin(), files.end());
  if (files.empty())
    throw std::runtime_error("no .prob or .dat-s files in " + dir);

  std::vector<std::pair<std::string, conik::ProblemData>> problems;
  problems.reserve(files.size());
  for (const std::string& f : files)
    problems.emplace_back(std::filesystem::path(f).filename().string(),
                          conik::load_problem(f).problem);

  const auto strategies = conik::default_bench_strategies(settings);
  const auto on_row = [&](const std::string& strat, const conik::BenchRow& row) {
    if (!flags.verbose) return;
    std::fprintf(stderr, "%-6s %-24s %-16s %8.3fs\n", strat.c_str(), row.problem.c_str(),
                 row.error.empty() ? conik::to_string(row.status) : "Error", row.seconds);
  };
  const auto reports = conik::run_bench(problems, strategies, sh, cap, on_row);

  std::fputs(conik::bench_tsv(reports).c_str(), stdout);
  std::fputs("\n", stdout);
  std::fputs(conik::bench_summary(reports).c_str(), stdout);
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"conik: first-order conic solver with quadratic objectives"};
  app.require_subcommand(1);

  int rc = 1;

  // solve
  auto* solve_cmd = app.add_subcommand("solve", "solve a .prob or .dat-s file");
  std::string solve_file, json_out;
  conik::Settings solve_settings;
  apply_thread_env(solve_settings);
  SolveFlags solve_flags;
  solve_cmd->add_option("file", solve_file, "problem file")->required();
  add_settings_options(solve_cmd, solve_settings, solve_flags);
  solve_cmd->add_option("--json-out", json_out, "write the result as JSON to this path");
  solve_cmd->callback(
      [&] { rc = do_solve(solve_file, solve_settings, solve_flags, json_out); });

  // analyze
  auto* analyze_cmd = app.add_subcommand("analyze", "clique report for a pattern file");
  std::string analyze_file, analyze_merge = "clique-graph";
  analyze_cmd->add_option("file", analyze_file, "pattern file (1-based 'i j' lines)")
      ->required();
  analyze_cmd->add_option("--merge", analyze_merge, "clique merge strategy")
      ->check(CLI::IsMember({"none", "parent-child", "clique-graph", "sparsecolo"}));
  analyze_cmd->callback([&] { rc = do_analyze(analyze_file, analyze_merge); });

  // bench
  auto* bench_cmd = app.add_subcommand("bench", "compare strategies over a problem directory");
  std::string bench_dir;
  double cap = 300.0, sh = 10.0;
  conik::Settings bench_settings;
  apply_thread_env(bench_settings);
  SolveFlags bench_flags;
  bench_cmd->add_option("dir", bench_dir, "directory of .prob / .dat-s files")->required();
  bench_cmd->add_option("--cap", cap, "time cap in seconds; failures enter at this value");
  bench_cmd->add_option("--sh", sh, "shift of the geometric mean");
  add_settings_options(bench_cmd, bench_settings, bench_flags);
  bench_cmd->callback([&] { rc = do_bench(bench_dir, cap, sh, bench_settings, bench_flags); });

  // gen
  auto* gen_cmd = app.add_subcommand("gen", "write a generated problem file");
  std::string gen_out = "problem.prob";
  std::uint64_t gen_seed = 1;
  gen_cmd->require_subcommand(1);

  auto* ba = gen_cmd->add_subcommand("block-arrow", "sparse SDP with block-arrow pattern");
  int ba_d = 4, ba_blocks = 5, ba_w = 3, ba_m = 20;
  ba->add_option("--block-size", ba_d, "diagonal block side");
  ba->add_option("--blocks", ba_blocks, "number of diagonal blocks");
  ba->add_option("--width", ba_w, "arrow head width");
  ba->add_option("--m", ba_m, "number of variables");
  ba->add_option("--seed", gen_seed);
  ba->add_option("--out", gen_out);
  ba->callback([&] {
    conik::write_problem(gen_out, conik::gen_block_arrow(ba_d, ba_blocks, ba_w, ba_m, gen_seed));
    std::printf("wrote %s\n", gen_out.c_str());
    rc = 0;
  });

  auto* nc = gen_cmd->add_subcommand("nearest-corr", "nearest correlation matrix SDP");
  int nc_n = 20;
  nc->add_option("--n", nc_n, "matrix side");
  nc->add_option("--seed", gen_seed);
  nc->add_option("--out", gen_out);
  nc->callback([&] {
    conik::write_problem(gen_out, conik::gen_nearest_corr(nc_n, gen_seed));
    std::printf("wrote %s\n", gen_out.c_str());
    rc = 0;
  });

  auto* ds = gen_cmd->add_subcommand("doubly-stochastic", "nearest doubly stochastic matrix QP");
  int ds_n = 20;
  std::string ds_form = "qp";
  ds->add_option("--n", ds_n, "matrix side");
  ds->add_option("--form", ds_form, "constraint formulation")
      ->check(CLI::IsMember({"qp", "custom"}));
  ds->add_option("--seed", gen_seed);
  ds->add_option("--out", gen_out);
  ds->callback([&] {
    const auto form = ds_form == "qp" ? conik::DsmForm::Qp : conik::DsmForm::Custom;
    conik::write_problem(gen_out, conik::gen_doubly_stochastic(ds_n, gen_seed, form));
    std::printf("wrote %s\n", gen_out.c_str());
    rc = 0;
  });

  auto* rq = gen_cmd->add_subcommand("random-qp", "strongly convex QP with mixed cones");
  int rq_n = 20, rq_m = 40;
  rq->add_option("--n", rq_n, "variables");
  rq->add_option("--m", rq_m, "constraint rows");
  rq->add_option("--seed", gen_seed);
  rq->add_option("--out", gen_out);
  rq->callback([&] {
    conik::write_problem(gen_out, conik::gen_random_qp(rq_n, rq_m, gen_seed));
    std::printf("wrote %s\n", gen_out.c_str());
    rc = 0;
  });

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : 1;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
  return rc;
}

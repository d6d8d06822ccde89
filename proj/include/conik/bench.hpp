#pragma once

#include <algorithm>
#include <functional>
#include <sstream>
#include <string>
#include <utility>
#include <vector>

#include "conik/io.hpp"
#include "conik/problem.hpp"
#include "conik/solve.hpp"

namespace conik {

// --- Strategy comparison ---------------------------------------------------------
//
// The benchmark runner compares this solver against itself under different
// preprocessing strategies: no decomposition, decomposition without merging,
// parent-child merging, and clique-graph merging.

struct BenchStrategy {
  std::string name;
  Settings settings;
};

inline std::vector<BenchStrategy> default_bench_strategies(const Settings& base = {}) {
  auto variant = [&](const char* name, bool decompose, MergeKind kind) {
    Settings s = base;
    s.decompose = decompose;
    s.merge.kind = kind;
    return BenchStrategy{name, s};
  };
  return {variant("NoDe", false, MergeKind::None),
          variant("NoMer", true, MergeKind::None),
          variant("ParCh", true, MergeKind::ParentChild),
          variant("CG", true, MergeKind::CliqueGraph)};
}

// --- Reports ----------------------------------------------------------------------

struct BenchRow {
  std::string problem;
  SolveStatus status = SolveStatus::MaxIterations;
  std::string error;  // nonempty when the solve threw instead of returning
  double seconds = 0.0;
  int iterations = 0;
  double max_dimacs = 0.0;
  int clique_count = 0;  // summed over decomposed blocks; 0 when undecomposed
  int max_clique = 0;

  bool failed() const { return status != SolveStatus::Solved || !error.empty(); }
};

// Aggregates are methods over the rows, so the report can never disagree with
// its own data; failed rows enter the mean at the cap.
struct BenchReport {
  std::string strategy;
  double sh = 10.0;
  double cap = 300.0;
  std::vector<BenchRow> rows;
  int fastest = 0;  // problems where this strategy posted the best solved time

  double shifted_mean() const {
    std::vector<double> t;
    t.reserve(rows.size());
    for (const BenchRow& r : rows) t.push_back(r.failed() ? cap : r.seconds);
    return shifted_geometric_mean(t, sh, cap);
  }
  double failure_rate() const {
    if (rows.empty()) return 0.0;
    int bad = 0;
    for (const BenchRow& r : rows) bad += r.failed() ? 1 : 0;
    return static_cast<double>(bad) / static_cast<double>(rows.size());
  }
};

// Runs every strategy over every problem. Row order follows the input order;
// a per-problem exception is recorded in the row instead of aborting the run.
// Solves that carry no time limit get the cap as one.
inline std::vector<BenchReport> run_bench(
    const std::vector<std::pair<std::string, ProblemData>>& problems,
    const std::vector<BenchStrategy>& strategies, double sh = 10.0, double cap = 300.0,
    const std::function<void(const std::string&, const BenchRow&)>& on_row = {}) {
  std::vector<BenchReport> reports;
  reports.reserve(strategies.size());
  for (const BenchStrategy& st : strategies) {
    BenchReport rep;
    rep.strategy = st.name;
    rep.sh = sh;
    rep.cap = cap;
    Settings settings = st.settings;
    if (settings.time_limit <= 0.0) settings.time_limit = cap;
    for (const auto& [name, prob] : problems) {
      BenchRow row;
      row.problem = name;
      try {
        const SolveResult r = solve(prob, settings);
        row.status = r.status;
        row.seconds = r.timings.total;
        row.iterations = r.iterations;
        if (r.status != SolveStatus::PrimalInfeasible &&
            r.status != SolveStatus::DualInfeasible)
          row.max_dimacs = dimacs_errors(prob, r).max_error();
        for (const DecompositionStats& ds : r.decomposition) {
          row.clique_count += ds.clique_count;
          row.max_clique = std::max(row.max_clique, ds.max_clique);
        }
      } catch (const std::exception& e) {
        row.error = e.what();
      }
      if (on_row) on_row(st.name, row);
      rep.rows.push_back(std::move(row));
    }
    reports.push_back(std::move(rep));
  }

  // Fastest counts: per problem, the best solved time wins; ties go to the
  // earlier strategy.
  if (!reports.empty()) {
    const std::size_t nprob = reports.front().rows.size();
    for (std::size_t p = 0; p < nprob; ++p) {
      int best = -1;
      for (std::size_t s = 0; s < reports.size(); ++s) {
        const BenchRow& r = reports[s].rows[p];
        if (r.failed()) continue;
        if (best < 0 || r.seconds < reports[best].rows[p].seconds)
          best = static_cast<int>(s);
      }
      if (best >= 0) ++reports[best].fastest;
    }
  }
  return reports;
}

// --- Text output -------------------------------------------------------------------

inline std::string bench_tsv(const std::vector<BenchReport>& reports) {
  std::ostringstream out;
  out << "strategy\tproblem\tstatus\tseconds\titerations\tmax_dimacs\tclique_count\tmax_clique\n";
  for (const BenchReport& rep : reports)
    for (const BenchRow& r : rep.rows) {
      out << rep.strategy << '\t' << r.problem << '\t'
          << (r.error.empty() ? to_string(r.status) : "Error") << '\t'
          << detail::fmt(r.seconds) << '\t' << r.iterations << '\t'
          << detail::fmt(r.max_dimacs) << '\t' << r.clique_count << '\t'
          << r.max_clique << '\n';
    }
  return out.str();
}

inline std::string bench_summary(const std::vector<BenchReport>& reports) {
  std::ostringstream out;
  out << "strategy\tproblems\tshifted_mean\tfailure_rate\tfastest\n";
  for (const BenchReport& rep : reports)
    out << rep.strategy << '\t' << rep.rows.size() << '\t'
        << detail::fmt(rep.shifted_mean()) << '\t' << detail::fmt(rep.failure_rate())
        << '\t' << rep.fastest << '\n';
  return out.str();
}

}  // namespace conik

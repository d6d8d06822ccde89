#pragma once

#include "conik/decompose.hpp"
#include "conik/solver.hpp"

namespace conik {

namespace detail {

// Dual values on PSD blocks live in the polar cone (negative semidefinite
// side), so their completion runs on the negated matrix; primal infeasibility
// certificates sit on the dual-cone side and complete directly. Refusals fall
// back to the uncompleted entries, which are still exact on the pattern.
inline Vector complete_block(const BlockMap& bm, Vector block, double tol,
                             bool negated) {
  try {
    if (negated) return -psd_complete(bm.tree, Vector(-block), tol);
    return psd_complete(bm.tree, block, tol);
  } catch (const std::runtime_error&) {
    return block;
  }
}

}  // namespace detail

// Maps a result of the transformed problem back onto the original geometry:
// overlap variables are dropped from x, sub-block slacks are summed back into
// original entries, duals are read off the owner rows (and completed), and
// residuals plus objective are recomputed against the original data.
inline SolveResult map_back_result(const ProblemData& orig, const Settings& settings,
                                   const DecompositionMap& map, SolveResult r) {
  const int n = map.orig_vars;
  const int m = map.orig_rows;

  Vector x = r.x.head(n);
  Vector s = Vector::Zero(m);
  Vector y = Vector::Zero(m);
  int orig_off = 0;
  for (std::size_t c = 0; c < orig.cones.size(); ++c) {
    const int dim = cone_dim(orig.cones[c]);
    const int new_off = map.cone_new_offset[c];
    if (map.cone_block[c] < 0) {
      s.segment(orig_off, dim) = r.s.segment(new_off, dim);
      y.segment(orig_off, dim) = r.y.segment(new_off, dim);
    } else {
      const BlockMap& bm = map.blocks[map.cone_block[c]];
      s.segment(orig_off, dim) =
          reassemble(bm, r.s.segment(bm.new_row_offset, bm.new_rows));
      Vector yb = collect_owner_entries(bm, r.y.segment(bm.new_row_offset, bm.new_rows));
      if (settings.complete_dual) {
        // clique blocks are PSD only to solve accuracy; gate accordingly
        const double tol = 100.0 * std::max(settings.eps_abs, settings.eps_rel);
        yb = detail::complete_block(bm, std::move(yb), tol, true);
      }
      y.segment(orig_off, dim) = yb;
    }
    orig_off += dim;
  }

  if (r.certificate) {
    if (r.status == SolveStatus::DualInfeasible) {
      r.certificate = Vector(r.certificate->head(n));
    } else if (r.status == SolveStatus::PrimalInfeasible) {
      Vector cert = Vector::Zero(m);
      int off = 0;
      for (std::size_t c = 0; c < orig.cones.size(); ++c) {
        const int dim = cone_dim(orig.cones[c]);
        const int new_off = map.cone_new_offset[c];
        if (map.cone_block[c] < 0) {
          cert.segment(off, dim) = r.certificate->segment(new_off, dim);
        } else {
          const BlockMap& bm = map.blocks[map.cone_block[c]];
          Vector cb = collect_owner_entries(
              bm, r.certificate->segment(bm.new_row_offset, bm.new_rows));
          const double tol = 1e-3 * std::max(1.0, cb.lpNorm<Eigen::Infinity>());
          cert.segment(off, dim) = detail::complete_block(bm, std::move(cb), tol, false);
        }
        off += dim;
      }
      r.certificate = std::move(cert);
    }
  }

  r.x = std::move(x);
  r.s = std::move(s);
  r.y = std::move(y);
  r.objective = objective_value(orig, r.x);

  const SparseMatrix Pfull = symmetrize_upper(orig.P);
  const Vector rp = orig.A * r.x + r.s - orig.b;
  const Vector rd = Pfull * r.x - orig.A.transpose() * r.y + orig.q;
  r.r_prim = m ? rp.lpNorm<Eigen::Infinity>() : 0.0;
  r.r_dual = n ? rd.lpNorm<Eigen::Infinity>() : 0.0;
  return r;
}

// Full pipeline: validation, chordal decomposition of PSD blocks that
// qualify, ADMM on the (possibly transformed) problem, and the map back.
inline SolveResult solve(const ProblemData& prob, const Settings& settings = {}) {
  {
    auto errs = validate(prob);
    auto serrs = validate(settings);
    errs.insert(errs.end(), serrs.begin(), serrs.end());
    if (!errs.empty()) {
      std::string msg = "solve:";
      for (const auto& e : errs) msg += " " + e + ";";
      throw std::invalid_argument(msg);
    }
  }

  const auto t0 = std::chrono::steady_clock::now();
  std::vector<BlockMap> blocks = plan_decomposition(prob, settings);
  const double t_decomp =
      std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();

  if (blocks.empty()) {
    Workspace ws(prob, settings);
    SolveResult r = ws.solve();
    r.timings.decompose = t_decomp;
    r.timings.total += t_decomp;
    return r;
  }

  std::vector<DecompositionStats> stats;
  for (const auto& bm : blocks) {
    DecompositionStats st;
    st.cone_index = bm.cone_index;
    st.side = bm.side;
    st.clique_count = bm.tree.size();
    for (const auto& cq : bm.tree.cliques)
      st.max_clique = std::max(st.max_clique, static_cast<int>(cq.size()));
    st.overlap_vars = bm.overlap_count();
    st.merges = bm.merges;
    stats.push_back(std::move(st));
  }

  DecomposedProblem dec = decompose(prob, std::move(blocks));
  const double t_transform =
      std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();

  Workspace ws(std::move(dec.prob), settings);
  SolveResult r = ws.solve();
  r = map_back_result(prob, settings, dec.map, std::move(r));
  r.timings.decompose = t_transform;
  r.timings.total += t_transform;
  r.decomposition = std::move(stats);
  return r;
}

}  // namespace conik

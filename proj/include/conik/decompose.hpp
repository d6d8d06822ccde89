#pragma once

#include "conik/merge.hpp"

namespace conik {

// --- Per-block decomposition map -------------------------------------------------
//
// A PSD block with chordal (extended, possibly merged) pattern is replaced by
// one PSD block per clique. Every upper-triangle entry of the pattern appears
// in every clique containing both its indices; exactly one of those cliques,
// the subtree root, keeps the problem data for the entry. All other copies
// become pure overlap rows tied to the owner through a linking variable with
// a +1 in the child's row and a -1 in the parent's row, so summing the clique
// blocks back together telescopes to the original matrix.

struct CliqueBlockMap {
  // Local vertex order: supernode sorted ascending, then separator sorted
  // ascending. Row t of the sub-block is the local svec position t.
  std::vector<int> vertices;
  std::vector<int> pos;  // global vertex -> local position, -1 outside
  int sep_begin = 0;     // local position where separator entries start
  int row_offset = 0;    // first row of this sub-block within the block rows

  int side() const { return static_cast<int>(vertices.size()); }
  int dim() const { return side() * (side() + 1) / 2; }
};

// One overlap variable. Rows are block-local; the column is the global index
// into the augmented variable vector, assigned when the problem is assembled.
struct LinkColumn {
  int column = -1;
  int row_plus = 0;   // row of the entry in the clique that carries the +1
  int row_minus = 0;  // same entry in the parent clique
};

struct BlockMap {
  int cone_index = 0;
  int side = 0;
  int orig_row_offset = 0;
  int new_row_offset = 0;  // assigned when the problem is assembled
  int new_rows = 0;
  CliqueTree tree;
  std::vector<CliqueBlockMap> cliques;  // aligned with tree.cliques
  std::vector<LinkColumn> links;
  std::vector<int> owner_row;  // per original svec index: block-local row or -1
  std::vector<MergeLogEntry> merges;

  int overlap_count() const { return static_cast<int>(links.size()); }
};

struct DecompositionMap {
  int orig_vars = 0;
  int orig_rows = 0;
  int new_vars = 0;
  int new_rows = 0;
  std::vector<int> cone_new_offset;  // per original cone
  std::vector<int> cone_block;       // index into blocks, -1 for passthrough
  std::vector<BlockMap> blocks;

  bool any() const { return !blocks.empty(); }
};

struct DecomposedProblem {
  ProblemData prob;
  DecompositionMap map;
};

// Builds the local orders, entry ownership and overlap links for one block.
// The tree must be finalized (post-ordered, running intersection verified).
inline BlockMap build_block_map(int cone_index, int orig_row_offset, int side,
                                CliqueTree tree) {
  BlockMap bm;
  bm.cone_index = cone_index;
  bm.side = side;
  bm.orig_row_offset = orig_row_offset;
  bm.tree = std::move(tree);
  const CliqueTree& t = bm.tree;
  if (t.nvertices != side)
    throw std::invalid_argument("build_block_map: tree does not match block side");

  int rows = 0;
  for (int l = 0; l < t.size(); ++l) {
    CliqueBlockMap cm;
    cm.vertices = t.supernode[l];
    cm.sep_begin = static_cast<int>(cm.vertices.size());
    cm.vertices.insert(cm.vertices.end(), t.separator[l].begin(), t.separator[l].end());
    cm.pos.assign(side, -1);
    for (int k = 0; k < cm.side(); ++k) cm.pos[cm.vertices[k]] = k;
    cm.row_offset = rows;
    rows += cm.dim();
    bm.cliques.push_back(std::move(cm));
  }
  bm.new_rows = rows;

  // ownership: the entry's data stays in the one clique where it is not a
  // separator-pair; uniqueness comes from the running intersection property
  bm.owner_row.assign(side * (side + 1) / 2, -1);
  for (int l = 0; l < t.size(); ++l) {
    const auto& cm = bm.cliques[l];
    for (int lb = 0; lb < cm.side(); ++lb)
      for (int la = 0; la <= lb; ++la) {
        if (la >= cm.sep_begin && lb >= cm.sep_begin) continue;
        const auto [gi, gj] = std::minmax(cm.vertices[la], cm.vertices[lb]);
        const int gidx = svec_index(gi, gj);
        if (bm.owner_row[gidx] != -1)
          throw std::logic_error("build_block_map: entry owned twice");
        bm.owner_row[gidx] = cm.row_offset + svec_index(la, lb);
      }
  }

  // overlap columns, numbered from the root down, then by local svec position
  int overlap_check = 0;
  for (int l = t.size() - 1; l >= 0; --l) {
    const int par = t.parent[l];
    if (par < 0) continue;
    const int ns = static_cast<int>(t.separator[l].size());
    overlap_check += ns * (ns + 1) / 2;
    const auto& cm = bm.cliques[l];
    const auto& pm = bm.cliques[par];
    for (int lb = cm.sep_begin; lb < cm.side(); ++lb)
      for (int la = cm.sep_begin; la <= lb; ++la) {
        const int gi = cm.vertices[la], gj = cm.vertices[lb];
        const int pa = pm.pos[gi], pb = pm.pos[gj];
        if (pa < 0 || pb < 0)
          throw std::logic_error("build_block_map: separator entry missing in parent");
        LinkColumn lc;
        lc.row_plus = cm.row_offset + svec_index(la, lb);
        lc.row_minus = pm.row_offset + svec_index(std::min(pa, pb), std::max(pa, pb));
        bm.links.push_back(lc);
      }
  }
  if (overlap_check != bm.overlap_count())
    throw std::logic_error("build_block_map: overlap count mismatch");
  return bm;
}

// Decides per PSD cone whether decomposing pays off, and runs the analysis
// chain (aggregate sparsity, chordal extension, clique tree, merging) for the
// blocks that qualify.
inline std::vector<BlockMap> plan_decomposition(const ProblemData& prob,
                                                const Settings& settings) {
  std::vector<BlockMap> out;
  if (!settings.decompose) return out;
  int offset = 0;
  for (std::size_t c = 0; c < prob.cones.size(); ++c) {
    const int dim = cone_dim(prob.cones[c]);
    if (const auto* psd = std::get_if<PsdTriangleCone>(&prob.cones[c])) {
      const int side = triangle_side(psd->dim);
      if (side >= settings.decomp_min_side) {
        const SparsityPattern agg = aggregate_sparsity(prob.A, prob.b, offset, side);
        const SparsityPattern ext = chordal_extension(agg);
        if (pattern_density(ext) <= settings.decomp_max_density) {
          CliqueTree tree = build_clique_tree(ext);
          std::vector<MergeLogEntry> log;
          tree = apply_merge_strategy(ext, tree, settings.merge, &log);
          if (tree.size() >= 2) {
            BlockMap bm = build_block_map(static_cast<int>(c), offset, side,
                                          std::move(tree));
            bm.merges = std::move(log);
            out.push_back(std::move(bm));
          }
        }
      }
    }
    offset += dim;
  }
  return out;
}

// Assembles the transformed problem: per-clique PSD cones replace each
// decomposed block, data rows keep their entries, overlap rows get the +-1
// linking columns, and the objective is padded with zeros for the overlap
// variables.
inline DecomposedProblem decompose(const ProblemData& prob,
                                   std::vector<BlockMap> blocks) {
  DecomposedProblem out;
  out.map.orig_vars = prob.num_vars();
  out.map.orig_rows = prob.num_constraints();
  out.map.cone_new_offset.assign(prob.cones.size(), 0);
  out.map.cone_block.assign(prob.cones.size(), -1);

  const int n = prob.num_vars();
  int total_theta = 0;
  for (const auto& bm : blocks) total_theta += bm.overlap_count();

  // row layout and per-cone bookkeeping
  std::vector<int> new_row_of_orig(prob.num_constraints(), -1);
  std::vector<ConeSpec> cones;
  int orig_off = 0, new_off = 0, theta_col = n;
  std::size_t next_block = 0;
  for (std::size_t c = 0; c < prob.cones.size(); ++c) {
    const int dim = cone_dim(prob.cones[c]);
    out.map.cone_new_offset[c] = new_off;
    if (next_block < blocks.size() &&
        blocks[next_block].cone_index == static_cast<int>(c)) {
      BlockMap& bm = blocks[next_block];
      out.map.cone_block[c] = static_cast<int>(next_block);
      bm.new_row_offset = new_off;
      for (const auto& cm : bm.cliques) cones.push_back(PsdTriangleCone{cm.dim()});
      for (auto& lc : bm.links) lc.column = theta_col++;
      for (int t = 0; t < dim; ++t)
        if (bm.owner_row[t] >= 0)
          new_row_of_orig[orig_off + t] = new_off + bm.owner_row[t];
      new_off += bm.new_rows;
      ++next_block;
    } else {
      cones.push_back(prob.cones[c]);
      for (int t = 0; t < dim; ++t) new_row_of_orig[orig_off + t] = new_off + t;
      new_off += dim;
    }
    orig_off += dim;
  }

  out.map.new_vars = n + total_theta;
  out.map.new_rows = new_off;
  out.map.blocks = std::move(blocks);

  std::vector<Eigen::Triplet<double>> trips;
  trips.reserve(prob.A.nonZeros() + 2 * total_theta);
  for (int j = 0; j < prob.A.outerSize(); ++j)
    for (SparseMatrix::InnerIterator it(prob.A, j); it; ++it) {
      const int nr = new_row_of_orig[it.row()];
      if (nr >= 0) {
        trips.emplace_back(nr, j, it.value());
      } else if (it.value() != 0.0) {
        // rows outside the aggregate pattern hold no data by construction
        throw std::logic_error("decompose: nonzero entry on a dropped row");
      }
    }
  for (const auto& bm : out.map.blocks)
    for (const auto& lc : bm.links) {
      trips.emplace_back(bm.new_row_offset + lc.row_plus, lc.column, 1.0);
      trips.emplace_back(bm.new_row_offset + lc.row_minus, lc.column, -1.0);
    }

  ProblemData& np = out.prob;
  np.A = sparse_from_triplets(out.map.new_rows, out.map.new_vars, trips);
  np.b = Vector::Zero(out.map.new_rows);
  for (int r = 0; r < prob.num_constraints(); ++r)
    if (new_row_of_orig[r] >= 0) np.b[new_row_of_orig[r]] = prob.b[r];

  trips.clear();
  for (int j = 0; j < prob.P.outerSize(); ++j)
    for (SparseMatrix::InnerIterator it(prob.P, j); it; ++it)
      trips.emplace_back(it.row(), it.col(), it.value());
  np.P = sparse_from_triplets(out.map.new_vars, out.map.new_vars, trips);
  np.q = Vector::Zero(out.map.new_vars);
  np.q.head(n) = prob.q;
  np.cones = std::move(cones);
  return out;
}

inline DecomposedProblem decompose(const ProblemData& prob, const Settings& settings) {
  return decompose(prob, plan_decomposition(prob, settings));
}

// Sums the stacked sub-block entries back into original positions. Overlap
// contributions cancel pairwise through the linking rows, so for any feasible
// stacked vector this reproduces the assembled matrix entry by entry.
inline Vector reassemble(const BlockMap& bm, const Vector& stacked) {
  if (stacked.size() != bm.new_rows)
    throw std::invalid_argument("reassemble: stacked length mismatch");
  Vector out = Vector::Zero(bm.side * (bm.side + 1) / 2);
  for (const auto& cm : bm.cliques)
    for (int lb = 0; lb < cm.side(); ++lb)
      for (int la = 0; la <= lb; ++la) {
        const auto [gi, gj] = std::minmax(cm.vertices[la], cm.vertices[lb]);
        out[svec_index(gi, gj)] += stacked[cm.row_offset + svec_index(la, lb)];
      }
  return out;
}

// Reads the entries of the original block off the owner rows (used for the
// dual variable, whose copies coincide at convergence).
inline Vector collect_owner_entries(const BlockMap& bm, const Vector& stacked) {
  if (stacked.size() != bm.new_rows)
    throw std::invalid_argument("collect_owner_entries: stacked length mismatch");
  Vector out = Vector::Zero(bm.side * (bm.side + 1) / 2);
  for (std::size_t t = 0; t < bm.owner_row.size(); ++t)
    if (bm.owner_row[t] >= 0) out[t] = stacked[bm.owner_row[t]];
  return out;
}

// --- Positive semidefinite completion --------------------------------------------
//
// Fills the entries outside the clique-covered pattern by walking the tree
// from the root down. For each clique below the root the block between its
// supernode and the already-completed vertices outside the clique is chosen
// as W(nu, zeta) = W(nu, eta) pinv(W(eta, eta)) W(eta, zeta), the standard
// two-block completion. Entries the pattern does specify are never touched.

namespace detail {

inline Matrix eig_pinv(const Matrix& e) {
  Eigen::SelfAdjointEigenSolver<Matrix> es(e);
  if (es.info() != Eigen::Success)
    throw std::runtime_error("psd_complete: separator eigendecomposition failed");
  Vector lam = es.eigenvalues();
  const double cutoff =
      lam.cwiseAbs().maxCoeff() * static_cast<double>(e.rows()) * 1e-13;
  Vector inv = Vector::Zero(lam.size());
  for (int i = 0; i < lam.size(); ++i)
    if (std::abs(lam[i]) > cutoff) inv[i] = 1.0 / lam[i];
  return es.eigenvectors() * inv.asDiagonal() * es.eigenvectors().transpose();
}

}  // namespace detail

// partial: svec of the block with entries on the clique-covered pattern
// (anything outside is ignored). Throws if some clique submatrix has an
// eigenvalue below -tol * max(1, |lambda|_max); the message names the clique.
inline Vector psd_complete(const CliqueTree& tree, const Vector& partial,
                           double tol = 1e-8) {
  const int side = tree.nvertices;
  if (partial.size() != side * (side + 1) / 2)
    throw std::invalid_argument("psd_complete: svec length does not match tree");

  Matrix w = smat(partial);
  // mask junk outside the pattern the tree describes
  std::vector<Bitset> covered(side, Bitset(side));
  for (const auto& c : tree.cliques)
    for (int i : c)
      for (int j : c) covered[i].set(j);
  for (int i = 0; i < side; ++i)
    for (int j = 0; j < side; ++j)
      if (!covered[i].test(j)) w(i, j) = 0.0;

  for (int l = 0; l < tree.size(); ++l) {
    const auto& c = tree.cliques[l];
    Matrix blk(c.size(), c.size());
    for (std::size_t a = 0; a < c.size(); ++a)
      for (std::size_t b = 0; b < c.size(); ++b) blk(a, b) = w(c[a], c[b]);
    Eigen::SelfAdjointEigenSolver<Matrix> es(blk);
    const double lmin = es.eigenvalues().minCoeff();
    const double lmax = es.eigenvalues().cwiseAbs().maxCoeff();
    if (lmin < -tol * std::max(1.0, lmax))
      throw std::runtime_error("psd_complete: clique block " + std::to_string(l) +
                               " is not positive semidefinite (min eigenvalue " +
                               std::to_string(lmin) + ")");
  }

  std::vector<bool> done(side, false);
  auto slice = [&](const std::vector<int>& rows, const std::vector<int>& cols) {
    Matrix m(rows.size(), cols.size());
    for (std::size_t a = 0; a < rows.size(); ++a)
      for (std::size_t b = 0; b < cols.size(); ++b) m(a, b) = w(rows[a], cols[b]);
    return m;
  };

  for (int l = tree.size() - 1; l >= 0; --l) {
    if (tree.parent[l] < 0) {
      for (int v : tree.cliques[l]) done[v] = true;
      continue;
    }
    const auto& eta = tree.separator[l];
    const auto& nu = tree.supernode[l];
    std::vector<int> zeta;
    for (int v = 0; v < side; ++v)
      if (done[v] && !std::binary_search(eta.begin(), eta.end(), v))
        zeta.push_back(v);
    if (!zeta.empty() && !nu.empty() && !eta.empty()) {
      const Matrix fill =
          slice(nu, eta) * detail::eig_pinv(slice(eta, eta)) * slice(eta, zeta);
      for (std::size_t a = 0; a < nu.size(); ++a)
        for (std::size_t b = 0; b < zeta.size(); ++b) {
          w(nu[a], zeta[b]) = fill(a, b);
          w(zeta[b], nu[a]) = fill(a, b);
        }
    }
    for (int v : nu) done[v] = true;
  }
  return svec(w);
}

}  // namespace conik

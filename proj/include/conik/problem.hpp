#pragma once

#include <Eigen/Dense>
#include <Eigen/Sparse>

#include <cmath>
#include <cstdint>
#include <functional>
#include <limits>
#include <memory>
#include <optional>
#include <string>
#include <variant>
#include <vector>

namespace conik {

using Vector = Eigen::VectorXd;
using Matrix = Eigen::MatrixXd;

// Compressed sparse column, int indices. All routines below assume compressed
// (not uncompressed/insertable) storage with sorted row indices per column,
// which Eigen guarantees after makeCompressed().
using SparseMatrix = Eigen::SparseMatrix<double, Eigen::ColMajor, int>;

inline constexpr double inf = std::numeric_limits<double>::infinity();

class ConeKernel;  // see cones.hpp

// --- Cone descriptions -----------------------------------------------------
//
// A problem's constraint set is a Cartesian product of blocks, each one of
// the types below. Dimensions refer to the slack vector, so a PSD block of
// matrix side n occupies n*(n+1)/2 entries (scaled triangular storage).

struct ZeroCone {
  int dim = 0;
};

struct NonnegCone {
  int dim = 0;
};

struct BoxCone {
  Vector lower;  // entries may be -inf
  Vector upper;  // entries may be +inf
};

struct SecondOrderCone {
  int dim = 0;  // (t, x) with ||x||_2 <= t, dim = 1 + len(x)
};

struct PsdTriangleCone {
  int dim = 0;  // must be a triangular number n*(n+1)/2
};

// User-defined set. The kernel must provide a projection; the membership and
// support callbacks are optional and only gate infeasibility detection (a
// missing callback makes the corresponding check inconclusive, never wrong).
struct CustomCone {
  int dim = 0;
  std::string name;  // used by the file format registry
  std::shared_ptr<const ConeKernel> kernel;
};

using ConeSpec = std::variant<ZeroCone, NonnegCone, BoxCone, SecondOrderCone,
                              PsdTriangleCone, CustomCone>;

inline int cone_dim(const ConeSpec& c) {
  return std::visit(
      [](const auto& k) -> int {
        using T = std::decay_t<decltype(k)>;
        if constexpr (std::is_same_v<T, BoxCone>)
          return static_cast<int>(k.lower.size());
        else
          return k.dim;
      },
      c);
}

inline int cone_dim_sum(const std::vector<ConeSpec>& cones) {
  int m = 0;
  for (const auto& c : cones) m += cone_dim(c);
  return m;
}

// Matrix side of a triangular-packed length, or -1 if not triangular.
inline int triangle_side(int len) {
  int n = static_cast<int>((std::sqrt(8.0 * len + 1.0) - 1.0) / 2.0);
  for (int k = n - 1; k <= n + 1; ++k)
    if (k >= 0 && k * (k + 1) / 2 == len) return k;
  return -1;
}

// --- Problem data ----------------------------------------------------------
//
//   minimize    0.5 x'Px + q'x
//   subject to  Ax + s = b,  s in K
//
// P is symmetric positive semidefinite with only the upper triangle stored.
// K is the Cartesian product of `cones` in order; rows of A and entries of b
// follow the same order.

struct ProblemData {
  SparseMatrix P;  // n x n, upper triangle only
  Vector q;        // n
  SparseMatrix A;  // m x n
  Vector b;        // m
  std::vector<ConeSpec> cones;

  int num_vars() const { return static_cast<int>(q.size()); }
  int num_constraints() const { return static_cast<int>(b.size()); }
};

// Returns human-readable violations; empty means the problem is well formed.
std::vector<std::string> validate(const ProblemData& prob);

// 0.5 x'Px + q'x with upper-triangle-stored P.
inline double objective_value(const ProblemData& prob, const Vector& x) {
  double quad = 0.0;
  for (int j = 0; j < prob.P.outerSize(); ++j) {
    for (SparseMatrix::InnerIterator it(prob.P, j); it; ++it) {
      const int i = it.row();
      if (i == j)
        quad += it.value() * x[i] * x[i];
      else
        quad += 2.0 * it.value() * x[i] * x[j];
    }
  }
  return 0.5 * quad + prob.q.dot(x);
}

// --- Solver configuration ---------------------------------------------------

enum class MergeKind : std::uint8_t { None, ParentChild, CliqueGraph, SparseColo };

enum class EdgeWeightKind : std::uint8_t { Nominal, Estimated };

// Weight of merging cliques with |Ci|, |Cj|, |Ci u Cj| given cardinalities.
// Nominal counts flops of a cubic projection; Estimated uses a fitted
// per-projection time model t(N) = a*N^3 + b*N^2 (see calibrate_edge_weight).
struct EdgeWeightFn {
  EdgeWeightKind kind = EdgeWeightKind::Nominal;
  // Fallback model constants, overwritten by calibration when requested.
  double a = 2e-9;
  double b = 2e-8;

  double operator()(int ci, int cj, int cunion) const;
};

struct MergeStrategy {
  MergeKind kind = MergeKind::CliqueGraph;
  // ParentChild thresholds
  double t_fill = 8.0;
  double t_size = 8.0;
  // SparseColo threshold
  double sigma_merge = 0.4;
  // CliqueGraph edge weight
  EdgeWeightFn weight;
};

struct ProgressInfo {
  int iteration = 0;
  double r_prim = 0.0;
  double r_dual = 0.0;
  double elapsed_seconds = 0.0;
};

struct Settings {
  double eps_abs = 1e-3;
  double eps_rel = 1e-3;
  double eps_prim_inf = 1e-5;
  double eps_dual_inf = 1e-5;

  double rho = 0.1;
  double sigma = 1e-6;
  double alpha = 1.6;

  int max_iter = 5000;
  int check_interval = 25;   // residual/infeasibility/termination cadence
  double time_limit = 0.0;   // seconds; 0 disables

  // Constraint-specific step size: equality (Zero cone) rows use 1e3 * rho.
  bool per_block_rho = true;

  // Off by default. Rebalances rho by x10 when the primal/dual residual
  // ratio exceeds 10, at most every 40 iterations, each time refactoring.
  bool adaptive_rho = false;

  int scaling_iters = 10;    // 0 disables equilibration
  double scaling_tol = 1e-2;
  double ruiz_tau = 1e-6;    // columns with smaller norm are left alone

  bool decompose = true;
  int decomp_min_side = 10;      // PSD blocks below this side are not split
  double decomp_max_density = 0.6;  // nor blocks denser than this (post-extension)
  MergeStrategy merge;
  bool complete_dual = true;  // complete decomposed dual blocks to full PSD matrices

  int threads = 1;  // projection worker count; results are thread-count invariant

  std::function<void(const ProgressInfo&)> progress;
};

std::vector<std::string> validate(const Settings& s);

// --- Results ----------------------------------------------------------------

enum class SolveStatus : std::uint8_t {
  Solved,
  PrimalInfeasible,
  DualInfeasible,
  MaxIterations,
  TimeLimit,
};

inline const char* to_string(SolveStatus s) {
  switch (s) {
    case SolveStatus::Solved: return "Solved";
    case SolveStatus::PrimalInfeasible: return "PrimalInfeasible";
    case SolveStatus::DualInfeasible: return "DualInfeasible";
    case SolveStatus::MaxIterations: return "MaxIterations";
    case SolveStatus::TimeLimit: return "TimeLimit";
  }
  return "?";
}

struct Timings {
  double setup = 0.0;          // scaling + KKT assembly + first factorization
  double decompose = 0.0;      // chordal analysis + merging + problem transform
  double factorization = 0.0;  // all numeric LDL' factorizations
  double projection = 0.0;     // cone projections inside the loop
  double iterations = 0.0;     // whole iteration loop
  double total = 0.0;
};

struct MergeLogEntry {
  std::vector<int> left;   // vertex sets of the merged pair
  std::vector<int> right;
  double weight = 0.0;
};

// Per decomposed PSD block.
struct DecompositionStats {
  int cone_index = 0;     // position in the original cone list
  int side = 0;           // original matrix side
  int clique_count = 0;   // after merging
  int max_clique = 0;
  int overlap_vars = 0;   // added consistency variables for this block
  std::vector<MergeLogEntry> merges;
};

struct SolveResult {
  SolveStatus status = SolveStatus::MaxIterations;
  Vector x, s, y;
  double objective = 0.0;
  int iterations = 0;
  double r_prim = 0.0;  // inf-norm, unscaled, against the original data
  double r_dual = 0.0;
  // Normalized infeasibility certificate (delta_y or delta_x), always in the
  // coordinates of the problem as given, also for decomposed solves.
  std::optional<Vector> certificate;
  Timings timings;
  std::vector<DecompositionStats> decomposition;
};

// --- validation impl --------------------------------------------------------

inline std::vector<std::string> validate(const ProblemData& prob) {
  std::vector<std::string> out;
  const int n = prob.num_vars();
  const int m = prob.num_constraints();

  if (prob.P.rows() != n || prob.P.cols() != n)
    out.push_back("P must be " + std::to_string(n) + "x" + std::to_string(n) +
                  ", got " + std::to_string(prob.P.rows()) + "x" +
                  std::to_string(prob.P.cols()));
  if (prob.A.cols() != n)
    out.push_back("A has " + std::to_string(prob.A.cols()) +
                  " columns, expected " + std::to_string(n));
  if (prob.A.rows() != m)
    out.push_back("A has " + std::to_string(prob.A.rows()) + " rows but b has " +
                  std::to_string(m) + " entries");

  for (int j = 0; j < prob.P.outerSize(); ++j)
    for (SparseMatrix::InnerIterator it(prob.P, j); it; ++it)
      if (it.row() > j) {
        out.push_back("P stores entry (" + std::to_string(it.row()) + "," +
                      std::to_string(j) + ") below the diagonal; store the upper triangle only");
        j = prob.P.outerSize();
        break;
      }

  auto finite = [](const Vector& v) {
    for (int i = 0; i < v.size(); ++i)
      if (!std::isfinite(v[i])) return false;
    return true;
  };
  if (!finite(prob.q)) out.push_back("q contains non-finite entries");
  if (!finite(prob.b)) out.push_back("b contains non-finite entries");

  if (m > 0 && prob.cones.empty())
    out.push_back("constraint rows present but the cone list is empty");

  int dim_sum = 0;
  for (std::size_t k = 0; k < prob.cones.size(); ++k) {
    const ConeSpec& c = prob.cones[k];
    const int d = cone_dim(c);
    dim_sum += d;
    const std::string where = "cone " + std::to_string(k);
    if (d <= 0) out.push_back(where + " has non-positive dimension");
    if (const auto* box = std::get_if<BoxCone>(&c)) {
      if (box->lower.size() != box->upper.size())
        out.push_back(where + ": box bound lengths differ");
      else
        for (int i = 0; i < box->lower.size(); ++i) {
          if (std::isnan(box->lower[i]) || std::isnan(box->upper[i]))
            out.push_back(where + ": box bound " + std::to_string(i) + " is NaN");
          else if (box->lower[i] > box->upper[i]) {
            out.push_back(where + ": box lower bound exceeds upper at entry " +
                          std::to_string(i));
            break;
          }
        }
    } else if (const auto* psd = std::get_if<PsdTriangleCone>(&c)) {
      if (triangle_side(psd->dim) < 0)
        out.push_back(where + ": dimension " + std::to_string(psd->dim) +
                      " is not a triangular number");
    } else if (const auto* cc = std::get_if<CustomCone>(&c)) {
      if (!cc->kernel) out.push_back(where + ": custom cone has no kernel");
    }
  }
  if (dim_sum != m)
    out.push_back("cone dimensions sum to " + std::to_string(dim_sum) +
                  " but b has " + std::to_string(m) + " entries");
  return out;
}

inline std::vector<std::string> validate(const Settings& s) {
  std::vector<std::string> out;
  if (!(s.eps_abs >= 0) || !(s.eps_rel >= 0) || s.eps_abs + s.eps_rel <= 0)
    out.push_back("eps_abs/eps_rel must be nonnegative with a positive sum");
  if (!(s.eps_prim_inf > 0) || !(s.eps_dual_inf > 0))
    out.push_back("infeasibility tolerances must be positive");
  if (!(s.rho > 0)) out.push_back("rho must be positive");
  if (!(s.sigma > 0)) out.push_back("sigma must be positive");
  if (!(s.alpha > 0) || !(s.alpha < 2))
    out.push_back("alpha must lie in (0, 2)");
  if (s.max_iter < 1) out.push_back("max_iter must be at least 1");
  if (s.check_interval < 1) out.push_back("check_interval must be at least 1");
  if (s.scaling_iters < 0) out.push_back("scaling_iters must be nonnegative");
  if (!(s.scaling_tol > 0)) out.push_back("scaling_tol must be positive");
  if (!(s.ruiz_tau > 0)) out.push_back("ruiz_tau must be positive");
  if (s.threads < 1) out.push_back("threads must be at least 1");
  if (s.time_limit < 0) out.push_back("time_limit must be nonnegative");
  if (s.decomp_min_side < 2) out.push_back("decomp_min_side must be at least 2");
  if (!(s.decomp_max_density > 0) || s.decomp_max_density > 1)
    out.push_back("decomp_max_density must lie in (0, 1]");
  return out;
}

inline double EdgeWeightFn::operator()(int ci, int cj, int cunion) const {
  auto cube = [](int v) { return static_cast<double>(v) * v * v; };
  if (kind == EdgeWeightKind::Nominal)
    return cube(ci) + cube(cj) - cube(cunion);
  auto t = [&](int v) {
    double n = static_cast<double>(v);
    return a * n * n * n + b * n * n;
  };
  return t(ci) + t(cj) - t(cunion);
}

}  // namespace conik

#pragma once

#include <Eigen/Eigenvalues>

#include <algorithm>
#include <cmath>
#include <optional>
#include <stdexcept>
#include <thread>
#include <vector>

#include "conik/problem.hpp"
#include "conik/sparse.hpp"

namespace conik {

// Extension point for user-defined constraint sets. Only `project` is
// mandatory. The membership and support callbacks feed infeasibility
// detection; returning nullopt marks the answer as unknown, which makes the
// surrounding check inconclusive rather than wrong, so a set without
// callbacks can never cause a false infeasibility declaration.
//
// Tolerance convention for all membership queries: the test is satisfied
// within tol * max(1, ||v||_inf) of the exact set.
class ConeKernel {
 public:
  virtual ~ConeKernel() = default;
  virtual int dim() const = 0;
  virtual void project(Eigen::Ref<Vector> v) const = 0;
  virtual std::optional<bool> in_dual(const Eigen::Ref<const Vector>& /*v*/,
                                      double /*tol*/) const {
    return std::nullopt;
  }
  // Membership in the recession cone of -K.
  virtual std::optional<bool> in_recession_of_negated(
      const Eigen::Ref<const Vector>& /*v*/, double /*tol*/) const {
    return std::nullopt;
  }
  // Support function of the shifted set -K + {b}: b'y + sup{<z,y> : z in -K}.
  // May return +inf. The default derives the cone term from in_dual, which is
  // exact for proper cones: sup over -K is 0 when y is in the dual cone of K
  // and +inf otherwise.
  virtual std::optional<double> support_shifted(const Eigen::Ref<const Vector>& y,
                                                const Eigen::Ref<const Vector>& b,
                                                double tol) const {
    auto dual = in_dual(y, tol);
    if (!dual) return std::nullopt;
    return *dual ? b.dot(y) : inf;
  }
};

namespace detail {
inline double norm_scale(const Eigen::Ref<const Vector>& v) {
  return std::max(1.0, v.size() ? v.lpNorm<Eigen::Infinity>() : 0.0);
}
}  // namespace detail

// --- Elementary projections (Euclidean, in place) ----------------------------

inline void project_zero(Eigen::Ref<Vector> v) { v.setZero(); }

inline void project_nonneg(Eigen::Ref<Vector> v) { v = v.cwiseMax(0.0); }

inline void project_box(Eigen::Ref<Vector> v, const Vector& lower, const Vector& upper) {
  if (v.size() != lower.size() || v.size() != upper.size())
    throw std::invalid_argument("project_box: bound length mismatch");
  v = v.cwiseMax(lower).cwiseMin(upper);
}

inline void project_soc(Eigen::Ref<Vector> v) {
  const int d = static_cast<int>(v.size());
  if (d == 0) return;
  const double t = v[0];
  const double nx = d > 1 ? v.tail(d - 1).norm() : 0.0;
  if (nx <= t) return;
  if (nx <= -t) {
    v.setZero();
    return;
  }
  const double a = 0.5 * (t + nx);
  v[0] = a;
  v.tail(d - 1) *= a / nx;
}

// Projection onto the PSD cone in scaled triangular coordinates: unpack,
// clip the spectrum at zero, repack. The svec isometry makes this the
// Euclidean projection of the packed vector.
inline void project_psd_triangle(Eigen::Ref<Vector> v) {
  const int n = triangle_side(static_cast<int>(v.size()));
  if (n < 0)
    throw std::invalid_argument("project_psd_triangle: length is not triangular");
  if (n <= 1) {
    if (n == 1) v[0] = std::max(v[0], 0.0);
    return;
  }
  Matrix S = smat(v);
  Eigen::SelfAdjointEigenSolver<Matrix> es(S);
  if (es.info() != Eigen::Success)
    throw std::runtime_error("project_psd_triangle: eigendecomposition failed for side " +
                             std::to_string(n));
  const Vector lam = es.eigenvalues().cwiseMax(0.0);
  S.noalias() = es.eigenvectors() * lam.asDiagonal() * es.eigenvectors().transpose();
  v = svec(S);
}

// Projection onto {S in R^{nxn} : S*1 = 1, 1'S = 1} (column-major packing).
// The normal equations of this affine projection have the closed form
//
//   [ n*I  E ] [eta1]   [row sums - 1           ]      E = ones(n, n-1)
//   [ E'  n*I] [eta2] = [first n-1 col sums - 1 ]
//
// solved in O(n^2) without forming the constraint matrix; the redundant last
// column-sum row is dropped to keep the system nonsingular.
inline void project_doubly_stochastic_affine(Eigen::Ref<Vector> v, int side) {
  const int n = side;
  if (static_cast<long>(n) * n != v.size())
    throw std::invalid_argument("project_doubly_stochastic_affine: length != side^2");
  if (n == 1) {
    v[0] = 1.0;
    return;
  }
  Vector r1 = Vector::Constant(n, -1.0);   // row sums - 1
  Vector r2 = Vector::Constant(n - 1, -1.0);  // leading column sums - 1
  for (int j = 0; j < n; ++j) {
    double cs = 0.0;
    for (int i = 0; i < n; ++i) {
      r1[i] += v[j * n + i];
      cs += v[j * n + i];
    }
    if (j < n - 1) r2[j] += cs;
  }
  const double mean_r1 = r1.sum() / n;
  Vector w = r2.array() - mean_r1;
  Vector eta2 = (w.array() + w.sum()) / n;
  Vector eta1 = (r1.array() - eta2.sum()) / n;
  for (int j = 0; j < n; ++j) {
    const double cj = j < n - 1 ? eta2[j] : 0.0;
    for (int i = 0; i < n; ++i) v[j * n + i] -= eta1[i] + cj;
  }
}

// --- Per-block dispatch -------------------------------------------------------

inline void project_cone(const ConeSpec& cone, Eigen::Ref<Vector> v) {
  std::visit(
      [&](const auto& c) {
        using T = std::decay_t<decltype(c)>;
        if constexpr (std::is_same_v<T, ZeroCone>) project_zero(v);
        else if constexpr (std::is_same_v<T, NonnegCone>) project_nonneg(v);
        else if constexpr (std::is_same_v<T, BoxCone>) project_box(v, c.lower, c.upper);
        else if constexpr (std::is_same_v<T, SecondOrderCone>) project_soc(v);
        else if constexpr (std::is_same_v<T, PsdTriangleCone>) project_psd_triangle(v);
        else c.kernel->project(v);
      },
      cone);
}

inline std::optional<bool> cone_in_dual(const ConeSpec& cone,
                                        const Eigen::Ref<const Vector>& v, double tol) {
  const double eps = tol * detail::norm_scale(v);
  return std::visit(
      [&](const auto& c) -> std::optional<bool> {
        using T = std::decay_t<decltype(c)>;
        if constexpr (std::is_same_v<T, ZeroCone>) {
          return true;  // dual of {0} is everything
        } else if constexpr (std::is_same_v<T, NonnegCone>) {
          return v.minCoeff() >= -eps;
        } else if constexpr (std::is_same_v<T, BoxCone>) {
          // v in [l,u]* iff sup over the box of <z,-v> is nonpositive
          double s = 0.0;
          for (int i = 0; i < v.size(); ++i) {
            if (v[i] > 0.0) {
              if (c.lower[i] == -inf) return false;
              s -= c.lower[i] * v[i];
            } else if (v[i] < 0.0) {
              if (c.upper[i] == inf) return false;
              s -= c.upper[i] * v[i];
            }
          }
          return s <= eps;
        } else if constexpr (std::is_same_v<T, SecondOrderCone>) {
          const int d = static_cast<int>(v.size());
          const double nx = d > 1 ? v.tail(d - 1).norm() : 0.0;
          return nx - v[0] <= eps;
        } else if constexpr (std::is_same_v<T, PsdTriangleCone>) {
          const int n = triangle_side(static_cast<int>(v.size()));
          if (n == 1) return v[0] >= -eps;
          Eigen::SelfAdjointEigenSolver<Matrix> es(smat(v), Eigen::EigenvaluesOnly);
          return es.eigenvalues().minCoeff() >= -eps;
        } else {
          return c.kernel->in_dual(v, tol);
        }
      },
      cone);
}

inline std::optional<bool> cone_in_recession_of_negated(
    const ConeSpec& cone, const Eigen::Ref<const Vector>& v, double tol) {
  const double eps = tol * detail::norm_scale(v);
  return std::visit(
      [&](const auto& c) -> std::optional<bool> {
        using T = std::decay_t<decltype(c)>;
        if constexpr (std::is_same_v<T, ZeroCone>) {
          return v.lpNorm<Eigen::Infinity>() <= eps;
        } else if constexpr (std::is_same_v<T, NonnegCone>) {
          return v.maxCoeff() <= eps;
        } else if constexpr (std::is_same_v<T, BoxCone>) {
          for (int i = 0; i < v.size(); ++i) {
            const bool lo = c.lower[i] == -inf;  // box grows downward
            const bool hi = c.upper[i] == inf;   // box grows upward
            // recession direction of the negated box
            if (!hi && v[i] < -eps) return false;
            if (!lo && v[i] > eps) return false;
          }
          return true;
        } else if constexpr (std::is_same_v<T, SecondOrderCone>) {
          const int d = static_cast<int>(v.size());
          const double nx = d > 1 ? v.tail(d - 1).norm() : 0.0;
          return nx + v[0] <= eps;  // -v in the cone
        } else if constexpr (std::is_same_v<T, PsdTriangleCone>) {
          const int n = triangle_side(static_cast<int>(v.size()));
          if (n == 1) return v[0] <= eps;
          Eigen::SelfAdjointEigenSolver<Matrix> es(smat(v), Eigen::EigenvaluesOnly);
          return es.eigenvalues().maxCoeff() <= eps;
        } else {
          return c.kernel->in_recession_of_negated(v, tol);
        }
      },
      cone);
}

// sigma_{-K + {b}}(y) for one block. Boxes have a finite closed form; proper
// cones contribute 0 when y is in the dual cone and +inf otherwise.
inline std::optional<double> cone_support_shifted(const ConeSpec& cone,
                                                  const Eigen::Ref<const Vector>& y,
                                                  const Eigen::Ref<const Vector>& b,
                                                  double tol) {
  if (const auto* box = std::get_if<BoxCone>(&cone)) {
    double s = b.dot(y);
    for (int i = 0; i < y.size(); ++i) {
      // sup over z in [-u, -l] of z*y_i
      if (y[i] > 0.0) {
        if (box->lower[i] == -inf) return inf;
        s -= box->lower[i] * y[i];
      } else if (y[i] < 0.0) {
        if (box->upper[i] == inf) return inf;
        s -= box->upper[i] * y[i];
      }
    }
    return s;
  }
  if (const auto* cc = std::get_if<CustomCone>(&cone))
    return cc->kernel->support_shifted(y, b, tol);
  auto dual = cone_in_dual(cone, y, tol);
  if (!dual) return std::nullopt;
  return *dual ? b.dot(y) : inf;
}

// --- Composite (product cone) operations --------------------------------------

namespace detail {
inline std::vector<int> cone_offsets(const std::vector<ConeSpec>& cones) {
  std::vector<int> off(cones.size() + 1, 0);
  for (std::size_t k = 0; k < cones.size(); ++k)
    off[k + 1] = off[k] + cone_dim(cones[k]);
  return off;
}
}  // namespace detail

// Projects each block of v onto its cone. With threads > 1 the blocks are
// split over workers; every block is computed by exactly the same scalar
// sequence either way, so results are bitwise independent of thread count.
inline void project_composite(const std::vector<ConeSpec>& cones, Vector& v,
                              int threads = 1) {
  const auto off = detail::cone_offsets(cones);
  if (off.back() != v.size())
    throw std::invalid_argument("project_composite: cone dims do not match vector");
  const int nb = static_cast<int>(cones.size());
  auto run = [&](int begin, int end) {
    for (int k = begin; k < end; ++k)
      project_cone(cones[k], v.segment(off[k], off[k + 1] - off[k]));
  };
  if (threads <= 1 || nb < 2) {
    run(0, nb);
    return;
  }
  const int workers = std::min(threads, nb);
  std::vector<std::thread> pool;
  pool.reserve(workers - 1);
  const int chunk = (nb + workers - 1) / workers;
  for (int w = 1; w < workers; ++w) {
    const int begin = w * chunk;
    if (begin >= nb) break;
    pool.emplace_back(run, begin, std::min(nb, begin + chunk));
  }
  run(0, std::min(chunk, nb));
  for (auto& t : pool) t.join();
}

// sigma over the shifted product set -K + {b}: sum of per-block terms.
// +inf dominates; otherwise any unknown block makes the total unknown.
inline std::optional<double> support_shifted_composite(
    const std::vector<ConeSpec>& cones, const Vector& y, const Vector& b, double tol) {
  const auto off = detail::cone_offsets(cones);
  if (off.back() != y.size() || y.size() != b.size())
    throw std::invalid_argument("support_shifted_composite: dimension mismatch");
  double total = 0.0;
  bool unknown = false;
  for (std::size_t k = 0; k < cones.size(); ++k) {
    const int d = off[k + 1] - off[k];
    auto s = cone_support_shifted(cones[k], y.segment(off[k], d), b.segment(off[k], d), tol);
    if (!s) {
      unknown = true;
      continue;
    }
    if (*s == inf) return inf;
    total += *s;
  }
  if (unknown) return std::nullopt;
  return total;
}

inline std::optional<bool> in_recession_of_negated_composite(
    const std::vector<ConeSpec>& cones, const Vector& v, double tol) {
  const auto off = detail::cone_offsets(cones);
  if (off.back() != v.size())
    throw std::invalid_argument("in_recession_of_negated_composite: dimension mismatch");
  bool unknown = false;
  for (std::size_t k = 0; k < cones.size(); ++k) {
    auto r = cone_in_recession_of_negated(
        cones[k], v.segment(off[k], off[k + 1] - off[k]), tol);
    if (!r)
      unknown = true;
    else if (!*r)
      return false;
  }
  if (unknown) return std::nullopt;
  return true;
}

// --- Doubly stochastic affine part as a reusable custom set -------------------

class DoublyStochasticAffineKernel final : public ConeKernel {
 public:
  explicit DoublyStochasticAffineKernel(int side) : side_(side) {
    if (side < 1)
      throw std::invalid_argument("DoublyStochasticAffineKernel: side must be positive");
  }

  static constexpr const char* kName = "doubly-stochastic-affine";

  int side() const { return side_; }
  int dim() const override { return side_ * side_; }

  void project(Eigen::Ref<Vector> v) const override {
    project_doubly_stochastic_affine(v, side_);
  }

  std::optional<bool> in_recession_of_negated(const Eigen::Ref<const Vector>& v,
                                              double tol) const override {
    // recession cone is the nullspace of the sum constraints (self-negated)
    return in_nullspace(v, tol);
  }

  std::optional<bool> in_dual(const Eigen::Ref<const Vector>& v,
                              double tol) const override {
    if (!in_nullspace_orth(v, tol)) return false;
    return v.sum() / side_ >= -tol * detail::norm_scale(v);
  }

  std::optional<double> support_shifted(const Eigen::Ref<const Vector>& y,
                                        const Eigen::Ref<const Vector>& b,
                                        double tol) const override {
    // sup over the affine set is finite iff y has no component along the
    // nullspace of the constraints; then any member realizes it.
    if (!in_nullspace_orth(y, tol)) return inf;
    return b.dot(y) - y.sum() / side_;  // member: the uniform matrix (1/n) * ones
  }

 private:
  bool in_nullspace(const Eigen::Ref<const Vector>& v, double tol) const {
    const int n = side_;
    const double eps = tol * detail::norm_scale(v);
    Vector rows = Vector::Zero(n);
    for (int j = 0; j < n; ++j) {
      double cs = 0.0;
      for (int i = 0; i < n; ++i) {
        rows[i] += v[j * n + i];
        cs += v[j * n + i];
      }
      if (std::abs(cs) > eps) return false;
    }
    return rows.lpNorm<Eigen::Infinity>() <= eps;
  }

  bool in_nullspace_orth(const Eigen::Ref<const Vector>& v, double tol) const {
    // proj(v) - proj(0) is exactly the nullspace component of v, so v is
    // orthogonal to the nullspace iff the difference vanishes.
    Vector w = v;
    Eigen::Ref<Vector> wr(w);
    project_doubly_stochastic_affine(wr, side_);
    Vector z = Vector::Zero(v.size());
    Eigen::Ref<Vector> zr(z);
    project_doubly_stochastic_affine(zr, side_);
    return (w - z).lpNorm<Eigen::Infinity>() <= tol * detail::norm_scale(v);
  }

  int side_;
};

}  // namespace conik

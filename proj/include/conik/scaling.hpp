#pragma once

#include <cmath>
#include <vector>

#include "conik/problem.hpp"
#include "conik/sparse.hpp"

namespace conik {

// Diagonal equilibration of the data matrix
//
//   R = [ P  A' ]
//       [ A  0  ]
//
// computed by Ruiz iteration: every column is scaled by the inverse square
// root of its inf-norm until all norms are close to one. Variables pick up
// D (first n columns), constraint rows pick up U (last m columns).
//
// The scaled problem replaces the original inside the solver:
//
//   P^ = D P D,  q^ = D q,  A^ = U A D,  b^ = U b,   x = D x^,  s = U^-1 s^,  y = U y^.
//
// Cone blocks that are only invariant under uniform positive scaling (second
// order, PSD) get the scalar mean of their U sub-block; box blocks keep
// per-row factors with their bounds scaled to match; custom sets keep scale 1
// since an elementwise-scaled custom set would no longer match its projection.
struct ScalingState {
  Vector D, Dinv;  // n
  Vector U, Uinv;  // m
  ProblemData scaled;
};

inline ScalingState ruiz_equilibrate(const ProblemData& prob, int iters, double tol,
                                     double tau) {
  const int n = prob.num_vars();
  const int m = prob.num_constraints();

  ScalingState st;
  st.D = Vector::Ones(n);
  st.U = Vector::Ones(m);

  SparseMatrix Pw = prob.P;
  SparseMatrix Aw = prob.A;
  Vector cn(n), cm(m);

  for (int pass = 0; pass < iters; ++pass) {
    cn.setZero();
    cm.setZero();
    for (int j = 0; j < Pw.outerSize(); ++j)
      for (SparseMatrix::InnerIterator it(Pw, j); it; ++it) {
        const double a = std::abs(it.value());
        if (a > cn[j]) cn[j] = a;
        if (it.row() != j && a > cn[it.row()]) cn[it.row()] = a;  // symmetric part
      }
    for (int j = 0; j < Aw.outerSize(); ++j)
      for (SparseMatrix::InnerIterator it(Aw, j); it; ++it) {
        const double a = std::abs(it.value());
        if (a > cn[j]) cn[j] = a;
        if (a > cm[it.row()]) cm[it.row()] = a;
      }

    double dev = 0.0;
    for (int i = 0; i < n; ++i) {
      cn[i] = cn[i] > tau ? 1.0 / std::sqrt(cn[i]) : 1.0;
      dev = std::max(dev, std::abs(1.0 - cn[i]));
    }
    for (int i = 0; i < m; ++i) {
      cm[i] = cm[i] > tau ? 1.0 / std::sqrt(cm[i]) : 1.0;
      dev = std::max(dev, std::abs(1.0 - cm[i]));
    }

    for (int j = 0; j < Pw.outerSize(); ++j)
      for (SparseMatrix::InnerIterator it(Pw, j); it; ++it)
        it.valueRef() *= cn[it.row()] * cn[j];
    for (int j = 0; j < Aw.outerSize(); ++j)
      for (SparseMatrix::InnerIterator it(Aw, j); it; ++it)
        it.valueRef() *= cm[it.row()] * cn[j];
    st.D.array() *= cn.array();
    st.U.array() *= cm.array();

    if (dev <= tol) break;
  }

  // Cone-compatibility fix-up on the accumulated row scaling.
  int row = 0;
  for (const ConeSpec& c : prob.cones) {
    const int d = cone_dim(c);
    if (std::holds_alternative<SecondOrderCone>(c) ||
        std::holds_alternative<PsdTriangleCone>(c)) {
      const double mean = st.U.segment(row, d).mean();
      st.U.segment(row, d).setConstant(mean);
    } else if (std::holds_alternative<CustomCone>(c)) {
      st.U.segment(row, d).setOnes();
    }
    row += d;
  }

  st.Dinv = st.D.cwiseInverse();
  st.Uinv = st.U.cwiseInverse();

  // Scaled data is rebuilt from the original so the fix-up stays consistent.
  st.scaled.P = prob.P;
  for (int j = 0; j < st.scaled.P.outerSize(); ++j)
    for (SparseMatrix::InnerIterator it(st.scaled.P, j); it; ++it)
      it.valueRef() *= st.D[it.row()] * st.D[j];
  st.scaled.A = prob.A;
  for (int j = 0; j < st.scaled.A.outerSize(); ++j)
    for (SparseMatrix::InnerIterator it(st.scaled.A, j); it; ++it)
      it.valueRef() *= st.U[it.row()] * st.D[j];
  st.scaled.q = st.D.asDiagonal() * prob.q;
  st.scaled.b = st.U.asDiagonal() * prob.b;
  st.scaled.cones = prob.cones;
  row = 0;
  for (ConeSpec& c : st.scaled.cones) {
    const int d = cone_dim(c);
    if (auto* box = std::get_if<BoxCone>(&c)) {
      for (int i = 0; i < d; ++i) {
        box->lower[i] *= st.U[row + i];
        box->upper[i] *= st.U[row + i];
      }
    }
    row += d;
  }
  return st;
}

inline ScalingState identity_scaling(const ProblemData& prob) {
  return ruiz_equilibrate(prob, 0, 1.0, 1e-6);
}

inline void unscale_solution(const ScalingState& st, Vector& x, Vector& s, Vector& y) {
  x.array() *= st.D.array();
  s.array() *= st.Uinv.array();
  y.array() *= st.U.array();
}

}  // namespace conik

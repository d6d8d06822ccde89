#pragma once

#include <chrono>
#include <optional>
#include <stdexcept>
#include <utility>

#include "conik/cones.hpp"
#include "conik/ldl.hpp"
#include "conik/scaling.hpp"
#include "conik/sparse.hpp"

namespace conik {

struct ResidualInfo {
  double r_prim = 0.0;  // ||Ax + s - b||_inf, unscaled
  double r_dual = 0.0;  // ||Px + q - A'y||_inf, unscaled
  // individual norms entering the relative termination thresholds
  double norm_Ax = 0.0, norm_s = 0.0, norm_b = 0.0;
  double norm_Px = 0.0, norm_q = 0.0, norm_Aty = 0.0;
};

// Operator-splitting loop for
//
//   minimize    0.5 x'Px + q'x
//   subject to  Ax + s = b,  s in K.
//
// Each iteration solves one quasi-definite KKT system with a cached
// factorization, projects onto K once, and costs nothing else beyond vector
// arithmetic. The factorization is refreshed only when the step size rho
// changes. All iterates live in equilibrated coordinates; residuals and
// certificates are always reported against the original data.
class Workspace {
 public:
  Workspace(ProblemData prob, Settings settings)
      : prob_(std::move(prob)), settings_(std::move(settings)) {
    auto pv = validate(prob_);
    auto sv = validate(settings_);
    pv.insert(pv.end(), sv.begin(), sv.end());
    if (!pv.empty()) {
      std::string msg = "setup rejected:";
      for (const auto& v : pv) msg += "\n  " + v;
      throw std::invalid_argument(msg);
    }

    const auto t0 = clock_now();
    n_ = prob_.num_vars();
    m_ = prob_.num_constraints();

    scaling_ = settings_.scaling_iters > 0
                   ? ruiz_equilibrate(prob_, settings_.scaling_iters,
                                      settings_.scaling_tol, settings_.ruiz_tau)
                   : identity_scaling(prob_);

    Pfull_ = symmetrize_upper(prob_.P);

    rho_vec_ = Vector::Constant(m_, settings_.rho);
    if (settings_.per_block_rho) {
      int row = 0;
      for (const ConeSpec& c : prob_.cones) {
        const int d = cone_dim(c);
        // equality rows tolerate (and reward) a much stiffer step
        if (std::holds_alternative<ZeroCone>(c))
          rho_vec_.segment(row, d).setConstant(1e3 * settings_.rho);
        row += d;
      }
    }
    rho_inv_ = rho_vec_.cwiseInverse();

    xh_ = Vector::Zero(n_);
    sh_ = Vector::Zero(m_);
    yh_ = Vector::Zero(m_);
    x_ = Vector::Zero(n_);
    s_ = Vector::Zero(m_);
    y_ = Vector::Zero(m_);
    rhs_.resize(n_ + m_);
    sol_.resize(n_ + m_);
    work_.resize(n_ + m_);
    w_.resize(m_);
    st_.resize(m_);
    rp_buf_.resize(m_);
    rd_buf_.resize(n_);

    factor();
    timings_.setup = seconds_since(t0);
  }

  const ProblemData& problem() const { return prob_; }
  const Settings& settings() const { return settings_; }
  const ScalingState& scaling() const { return scaling_; }
  int iteration() const { return iter_; }

  // Unscaled views of the current iterate.
  const Vector& x() const { return x_; }
  const Vector& s() const { return s_; }
  const Vector& y() const { return y_; }
  const Vector& x_scaled() const { return xh_; }
  const Vector& s_scaled() const { return sh_; }
  const Vector& y_scaled() const { return yh_; }

  // ||x~ - x|| of the latest iteration, a standard convergence health signal:
  // it contracts toward zero on solvable problems and stalls otherwise.
  double tilde_gap() const { return tilde_gap_; }

  const Timings& timings() const { return timings_; }

  void warm_start(const Vector& x0, const Vector& s0, const Vector& y0) {
    if (x0.size() != n_ || s0.size() != m_ || y0.size() != m_)
      throw std::invalid_argument("warm_start: dimension mismatch");
    xh_ = scaling_.Dinv.asDiagonal() * x0;
    sh_ = scaling_.U.asDiagonal() * s0;
    yh_ = scaling_.Uinv.asDiagonal() * y0;
    refresh_unscaled();
  }

  void iterate() {
    // (x~, nu) from the KKT system; s~ recovered from nu
    rhs_.head(n_) = settings_.sigma * xh_ - scaling_.scaled.q;
    rhs_.tail(m_) = scaling_.scaled.b - sh_ + rho_inv_.cwiseProduct(yh_);
    ldl_solve_inplace(kkt_, rhs_, sol_, work_);
    const auto xt = sol_.head(n_);
    const auto nu = sol_.tail(m_);
    st_ = sh_ - rho_inv_.cwiseProduct(nu + yh_);

    tilde_gap_ = (xt - xh_).lpNorm<Eigen::Infinity>();

    const double a = settings_.alpha;
    xh_ = a * xt + (1.0 - a) * xh_;
    w_ = a * st_ + (1.0 - a) * sh_ + rho_inv_.cwiseProduct(yh_);
    sh_ = w_;
    const auto tp = clock_now();
    project_composite(scaling_.scaled.cones, sh_, settings_.threads);
    timings_.projection += seconds_since(tp);
    yh_ = rho_vec_.cwiseProduct(w_ - sh_);

    ++iter_;
  }

  // Residuals of the unscaled iterate against the original data.
  ResidualInfo compute_residuals() {
    refresh_unscaled();
    ResidualInfo res;
    rp_buf_.noalias() = prob_.A * x_;
    res.norm_Ax = inf_norm(rp_buf_);
    rp_buf_ += s_ - prob_.b;
    res.r_prim = inf_norm(rp_buf_);
    res.norm_s = inf_norm(s_);
    res.norm_b = inf_norm(prob_.b);

    rd_buf_.noalias() = Pfull_ * x_;
    res.norm_Px = inf_norm(rd_buf_);
    rd_buf_ += prob_.q;
    Vector aty = prob_.A.transpose() * y_;
    res.norm_Aty = inf_norm(aty);
    rd_buf_ -= aty;
    res.r_dual = inf_norm(rd_buf_);
    res.norm_q = inf_norm(prob_.q);
    return res;
  }

  bool check_termination(const ResidualInfo& r) const {
    const double eps_p =
        settings_.eps_abs +
        settings_.eps_rel * std::max({r.norm_Ax, r.norm_s, r.norm_b});
    const double eps_d =
        settings_.eps_abs +
        settings_.eps_rel * std::max({r.norm_Px, r.norm_q, r.norm_Aty});
    return r.r_prim <= eps_p && r.r_dual <= eps_d;
  }

  // delta_y is an unscaled dual direction (typically an averaged iterate
  // difference). Returns the normalized certificate when it proves that no
  // primal feasible point exists. The y updates keep every iterate in the
  // polar cone, so the drift sits on the negative side of the dual cone; the
  // Farkas-style certificate (A'c = 0, c dual-feasible, <b,c> < 0) is the
  // negated drift.
  std::optional<Vector> check_primal_infeasible(const Vector& dy) const {
    const double nrm = inf_norm(dy);
    if (!(nrm > 1e-14)) return std::nullopt;
    Vector cert = -dy / nrm;
    Vector aty = prob_.A.transpose() * cert;
    if (inf_norm(aty) > settings_.eps_prim_inf) return std::nullopt;
    auto sup = support_shifted_composite(prob_.cones, cert, prob_.b,
                                         settings_.eps_prim_inf);
    if (!sup || !(*sup <= settings_.eps_prim_inf)) return std::nullopt;
    return cert;
  }

  // delta_x is an unscaled primal direction. Returns the normalized
  // certificate when it proves the objective is unbounded below.
  std::optional<Vector> check_dual_infeasible(const Vector& dx) const {
    const double nrm = inf_norm(dx);
    if (!(nrm > 1e-14)) return std::nullopt;
    Vector cert = dx / nrm;
    Vector px = Pfull_ * cert;
    if (inf_norm(px) > settings_.eps_dual_inf) return std::nullopt;
    if (prob_.q.dot(cert) > settings_.eps_dual_inf) return std::nullopt;
    Vector ax = prob_.A * cert;
    auto rec = in_recession_of_negated_composite(prob_.cones, ax,
                                                 settings_.eps_dual_inf);
    if (!rec || !*rec) return std::nullopt;
    return cert;
  }

  SolveResult solve() {
    const auto t0 = clock_now();
    SolveResult result;
    result.status = SolveStatus::MaxIterations;

    Vector prev_x = x_, prev_y = y_;
    int prev_iter = 0;
    int last_rho_update = 0;

    Vector best_x = x_, best_s = s_, best_y = y_;
    ResidualInfo best_res = compute_residuals();
    double best_metric = std::max(best_res.r_prim, best_res.r_dual);
    bool done = false;

    while (!done && iter_ < settings_.max_iter) {
      iterate();
      const bool at_check =
          iter_ % settings_.check_interval == 0 || iter_ == settings_.max_iter;
      if (!at_check) continue;

      ResidualInfo res = compute_residuals();
      if (settings_.progress) {
        ProgressInfo info;
        info.iteration = iter_;
        info.r_prim = res.r_prim;
        info.r_dual = res.r_dual;
        info.elapsed_seconds = timings_.setup + seconds_since(t0);
        settings_.progress(info);
      }

      const double metric = std::max(res.r_prim, res.r_dual);
      if (metric < best_metric) {
        best_metric = metric;
        best_x = x_;
        best_s = s_;
        best_y = y_;
        best_res = res;
      }

      // A solved verdict always wins over a simultaneous certificate.
      if (check_termination(res)) {
        result.status = SolveStatus::Solved;
        best_x = x_;
        best_s = s_;
        best_y = y_;
        best_res = res;
        done = true;
      } else {
        const double span = static_cast<double>(iter_ - prev_iter);
        Vector dy = (y_ - prev_y) / span;
        if (auto cert = check_primal_infeasible(dy)) {
          result.status = SolveStatus::PrimalInfeasible;
          result.certificate = std::move(*cert);
          done = true;
        } else {
          Vector dx = (x_ - prev_x) / span;
          if (auto cert = check_dual_infeasible(dx)) {
            result.status = SolveStatus::DualInfeasible;
            result.certificate = std::move(*cert);
            done = true;
          }
        }
      }

      if (!done && settings_.adaptive_rho && iter_ - last_rho_update >= 40) {
        const double rel_p =
            res.r_prim /
            std::max(1e-12, settings_.eps_abs +
                                settings_.eps_rel *
                                    std::max({res.norm_Ax, res.norm_s, res.norm_b}));
        const double rel_d =
            res.r_dual /
            std::max(1e-12, settings_.eps_abs +
                                settings_.eps_rel *
                                    std::max({res.norm_Px, res.norm_q, res.norm_Aty}));
        if (rel_p > 10.0 * rel_d || rel_d > 10.0 * rel_p) {
          const double f = rel_p > 10.0 * rel_d ? 10.0 : 0.1;
          rho_vec_ *= f;
          rho_inv_ = rho_vec_.cwiseInverse();
          factor();
          last_rho_update = iter_;
        }
      }

      if (!done && settings_.time_limit > 0.0 &&
          timings_.setup + seconds_since(t0) > settings_.time_limit) {
        result.status = SolveStatus::TimeLimit;
        done = true;
      }

      prev_x = x_;
      prev_y = y_;
      prev_iter = iter_;
    }

    const bool keep_current = result.status == SolveStatus::Solved ||
                              result.status == SolveStatus::PrimalInfeasible ||
                              result.status == SolveStatus::DualInfeasible;
    if (keep_current) {
      refresh_unscaled();
      result.x = x_;
      result.s = s_;
      result.y = y_;
      ResidualInfo res = compute_residuals();
      result.r_prim = res.r_prim;
      result.r_dual = res.r_dual;
    } else {
      result.x = best_x;
      result.s = best_s;
      result.y = best_y;
      result.r_prim = best_res.r_prim;
      result.r_dual = best_res.r_dual;
    }
    result.objective = objective_value(prob_, result.x);
    result.iterations = iter_;
    timings_.iterations = seconds_since(t0);
    timings_.total = timings_.setup + timings_.iterations;
    result.timings = timings_;
    return result;
  }

 private:
  using Clock = std::chrono::steady_clock;
  static Clock::time_point clock_now() { return Clock::now(); }
  static double seconds_since(Clock::time_point t0) {
    return std::chrono::duration<double>(Clock::now() - t0).count();
  }
  static double inf_norm(const Vector& v) {
    return v.size() ? v.lpNorm<Eigen::Infinity>() : 0.0;
  }

  void factor() {
    const auto t0 = clock_now();
    SparseMatrix K =
        kkt_assemble(scaling_.scaled.P, scaling_.scaled.A, settings_.sigma, rho_vec_);
    kkt_ = ldl_factor(K, n_);
    timings_.factorization += seconds_since(t0);
  }

  void refresh_unscaled() {
    x_ = scaling_.D.asDiagonal() * xh_;
    s_ = scaling_.Uinv.asDiagonal() * sh_;
    y_ = scaling_.U.asDiagonal() * yh_;
  }

  ProblemData prob_;
  Settings settings_;
  ScalingState scaling_;
  SparseMatrix Pfull_;
  LdlFactors kkt_;
  Vector rho_vec_, rho_inv_;
  int n_ = 0, m_ = 0;
  int iter_ = 0;
  double tilde_gap_ = 0.0;
  Vector xh_, sh_, yh_;  // scaled iterates
  Vector x_, s_, y_;     // unscaled mirrors
  Vector rhs_, sol_, work_, w_, st_, rp_buf_, rd_buf_;
  Timings timings_;
};

}  // namespace conik

#pragma once

// Line-search SQP for Nlp: exact Lagrangian Hessian with a diagonal shift,
// QP subproblems from qp.hpp, l1 merit function.

#include "bilevel/problem.hpp"
#include "bilevel/qp.hpp"

#include <Eigen/Eigenvalues>

#include <algorithm>
#include <cmath>
#include <limits>
#include <string>
#include <vector>

namespace bilevel {

enum class NlpStatus { KktPoint, Unbounded, IterLimit, LineSearchFail };

inline const char* to_string(NlpStatus s) {
  switch (s) {
    case NlpStatus::KktPoint: return "KktPoint";
    case NlpStatus::Unbounded: return "Unbounded";
    case NlpStatus::IterLimit: return "IterLimit";
    case NlpStatus::LineSearchFail: return "LineSearchFail";
  }
  return "?";
}

struct NlpOptions {
  double tol = 1e-8;
  int max_iterations = 200;
  double divergence_floor = -1e6;
  // Divergence is declared only along iterates whose scaled violation
  // (Nlp::scaled_violation) is at most this.
  double divergence_feas = 1e-3;
  double hessian_shift = 1e-8;
  // Each step coordinate is boxed to step_scale * max(1, |w_j|).
  double step_scale = 10.0;
  double armijo = 1e-4;
  double min_alpha = 1e-12;
  // When the last stall_window steps neither shrank nor cut the merit by a
  // fraction stall_decrease, switch to the model stall_curvature * I (in
  // scaled variables) for the rest of the run.
  int stall_window = 20;
  double stall_decrease = 1e-2;
  double stall_curvature = 1e-2;
};

inline constexpr double kMinTol = 1e-10;

struct SqpStep {
  int iteration = 0;
  double merit_before = 0.0;
  double merit_after = 0.0;
  double penalty = 0.0;
  double alpha = 0.0;
  double objective = 0.0;
  double violation = 0.0;
  double scaled_violation = 0.0;
  double step_norm = 0.0;
  bool elastic = false;
  bool second_order = false;
};

struct NlpSolution {
  NlpStatus status = NlpStatus::IterLimit;
  Vector point;
  Multipliers multipliers;
  KktResidual kkt;
  double objective = 0.0;
  int iterations = 0;
  double requested_tol = 0.0;
  double effective_tol = 0.0;
  std::vector<SqpStep> trace;
};

namespace detail {

class Sqp {
 public:
  Sqp(const Nlp& p, const NlpOptions& o) : p_(p), o_(o), n_(p.num_vars), mi_(p.num_ineq()), me_(p.num_eq()) {}

  NlpSolution run(const Vector& start) {
    NlpSolution sol;
    sol.requested_tol = o_.tol;
    sol.effective_tol = std::max(o_.tol, kMinTol);
    const double tol = sol.effective_tol;

    Vector w = start.cwiseMax(p_.lower).cwiseMin(p_.upper);
    Multipliers m = Multipliers::zeros(p_);
    Multipliers best_m = m;
    double rho = 1.0;

    auto finish = [&](NlpStatus st, const Vector& x, const Multipliers& mm, int it) {
      sol.status = st;
      sol.point = x;
      sol.multipliers = mm;
      sol.kkt = kkt_residual(p_, x, mm);
      sol.objective = p_.objective.eval(x);
      sol.iterations = it;
      return sol;
    };

    if (!finite_at(w)) return finish(NlpStatus::LineSearchFail, w, m, 0);

    for (int it = 0; it < o_.max_iterations; ++it) {
      if (!identity_model_ && stalled(sol.trace)) identity_model_ = true;
      Step s = subproblem(w, m, rho);
      if (!s.ok) return finish(NlpStatus::LineSearchFail, w, best_m, it);

      // QP multipliers certify w itself once the step vanishes.
      const KktResidual r = kkt_residual(p_, w, s.mult);
      if (r.max() <= tol) return finish(NlpStatus::KktPoint, w, s.mult, it);

      const double lin_viol = linearized_violation(w, s.d);
      const double viol = p_.l1_violation(w);
      const double gd = p_.objective.grad(w).dot(s.d);
      double need = std::max(s.mult.ineq.lpNorm<Eigen::Infinity>(), s.mult.eq.lpNorm<Eigen::Infinity>());
      // Large enough that the step is a descent direction of the merit function.
      if (viol - lin_viol > 1e-12 * (1.0 + viol))
        need = std::max(need, (gd + 0.5 * s.curvature) / (0.9 * (viol - lin_viol)));
      if (rho < 1.1 * need) rho = std::max(2.0 * rho, 1.5 * need);

      const double phi0 = merit(w, rho);
      const double dir = gd + rho * (lin_viol - viol);

      SqpStep rec;
      rec.iteration = it;
      rec.merit_before = phi0;
      rec.penalty = rho;
      rec.elastic = s.elastic;
      rec.step_norm = s.d.lpNorm<Eigen::Infinity>();

      double alpha = 1.0;
      Vector trial;
      double phi = kInf;
      for (;;) {
        trial = w + alpha * s.d;
        phi = merit(trial, rho);
        if (armijo_ok(phi, phi0, alpha, dir)) break;
        Vector corrected = trial;
        if (project(w, s, corrected)) {
          const double phi2 = merit(corrected, rho);
          if (armijo_ok(phi2, phi0, alpha, dir)) {
            trial = corrected;
            phi = phi2;
            rec.second_order = true;
            break;
          }
        }
        alpha *= 0.5;
        if (alpha < o_.min_alpha) return finish(NlpStatus::LineSearchFail, w, s.mult, it + 1);
      }

      w = trial;
      m = s.mult;
      best_m = s.mult;
      rec.alpha = alpha;
      rec.merit_after = phi;
      rec.objective = p_.objective.eval(w);
      rec.violation = p_.max_violation(w);
      rec.scaled_violation = p_.scaled_violation(w);
      sol.trace.push_back(rec);

      if (rec.objective < o_.divergence_floor && rec.scaled_violation <= o_.divergence_feas)
        return finish(NlpStatus::Unbounded, w, s.mult, it + 1);
    }
    return finish(NlpStatus::IterLimit, w, best_m, o_.max_iterations);
  }

 private:
  struct Step {
    bool ok = false;
    bool elastic = false;
    Vector d;
    double curvature = 0.0;  // d^T H d
    Multipliers mult;
    std::vector<int> active_ineq;
  };

  bool stalled(const std::vector<SqpStep>& tr) const {
    const int k = o_.stall_window;
    if (k <= 0 || static_cast<int>(tr.size()) < k) return false;
    const SqpStep& a = tr[tr.size() - k];
    const SqpStep& b = tr.back();
    const double drop = a.merit_before - b.merit_after;
    return drop < o_.stall_decrease * (1.0 + std::abs(a.merit_before)) && b.step_norm >= 0.5 * a.step_norm;
  }

  bool finite_at(const Vector& w) const {
    return std::isfinite(p_.objective.eval(w)) && std::isfinite(p_.l1_violation(w));
  }

  double merit(const Vector& w, double rho) const {
    const double v = p_.objective.eval(w) + rho * p_.l1_violation(w);
    return std::isfinite(v) ? v : kInf;
  }

  bool armijo_ok(double phi, double phi0, double alpha, double dir) const {
    if (!std::isfinite(phi)) return false;
    // Rounding-level slack lets tiny final Newton steps through.
    const double slack = 16.0 * std::numeric_limits<double>::epsilon() * (1.0 + std::abs(phi0));
    return phi <= phi0 + o_.armijo * alpha * std::min(dir, 0.0) + slack;
  }

  double linearized_violation(const Vector& w, const Vector& d) const {
    double v = 0.0;
    if (mi_ > 0) v += (p_.ineq_values(w) + p_.ineq_jacobian(w) * d).cwiseMax(0.0).sum();
    if (me_ > 0) v += (p_.eq_values(w) + p_.eq_jacobian(w) * d).cwiseAbs().sum();
    return v;
  }

  // Works in variables scaled by S = diag(max(1, |w_j|)). Shifts S H S by
  // tau*I, tau making its reduction to the null space of the active Jacobian
  // positive definite, then adds sigma * J^T J (rows of J = J_A S normalized)
  // until the whole matrix is positive definite. The added term is constant
  // on steps that keep the active rows' linearization fixed.
  Matrix convexified_hessian(const Vector& w, const Multipliers& m) const {
    if (identity_model_) {
      const Vector inv = w.cwiseAbs().cwiseMax(1.0).cwiseInverse();
      return Matrix((o_.stall_curvature * inv.cwiseProduct(inv)).asDiagonal());
    }
    Matrix H = lagrangian_hessian(p_, w, m);
    H = 0.5 * (H + H.transpose());
    if (n_ == 0) return H;
    const Vector sc = w.cwiseAbs().cwiseMax(1.0);
    Matrix Hs = sc.asDiagonal() * H * sc.asDiagonal();
    Matrix JA = active_jacobian(w, m) * sc.asDiagonal();
    for (int k = 0; k < JA.rows(); ++k) {
      const double nrm = JA.row(k).norm();
      if (nrm > 0.0) JA.row(k) /= nrm;
    }
    Matrix Z = Matrix::Identity(n_, n_);
    if (JA.rows() > 0) {
      Eigen::FullPivLU<Matrix> lu(JA);
      lu.setThreshold(1e-10);
      if (lu.rank() == n_) {
        Z = Matrix(n_, 0);
      } else {
        const Matrix K = lu.kernel();
        Z = Eigen::HouseholderQR<Matrix>(K).householderQ() * Matrix::Identity(n_, K.cols());
      }
    }
    double lmin = 0.0;
    if (Z.cols() > 0)
      lmin = Eigen::SelfAdjointEigenSolver<Matrix>(Z.transpose() * Hs * Z, Eigen::EigenvaluesOnly).eigenvalues()[0];
    Hs.diagonal().array() += std::max(0.0, -lmin) + o_.hessian_shift;
    if (JA.rows() > 0 && !is_positive_definite(Hs)) {
      const Matrix JtJ = JA.transpose() * JA;
      bool done = false;
      for (double sigma = o_.hessian_shift; sigma <= 1e20 * o_.hessian_shift; sigma *= 10.0) {
        if (is_positive_definite(Hs + sigma * JtJ)) {
          Hs += sigma * JtJ;
          done = true;
          break;
        }
      }
      if (!done) {
        const double full = Eigen::SelfAdjointEigenSolver<Matrix>(Hs, Eigen::EigenvaluesOnly).eigenvalues()[0];
        Hs.diagonal().array() += std::max(0.0, -full) + o_.hessian_shift;
      }
    }
    const Vector inv = sc.cwiseInverse();
    return inv.asDiagonal() * Hs * inv.asDiagonal();
  }

  // lambda_min(H) > 1e-12 * scale, tested by a Cholesky factorization of the shifted matrix.
  static bool is_positive_definite(const Matrix& H) {
    Matrix S = H;
    S.diagonal().array() -= 1e-12 * std::max(1.0, H.diagonal().cwiseAbs().maxCoeff());
    return Eigen::LLT<Matrix>(S).info() == Eigen::Success;
  }

  // Equality rows, inequality rows that are nearly active or carry a
  // multiplier, and bounds that are hit.
  Matrix active_jacobian(const Vector& w, const Multipliers& m) const {
    std::vector<Vector> rows;
    Vector gr(n_);
    for (int i = 0; i < me_; ++i) {
      gr.setZero();
      p_.eq[i].fn.add_grad_to(w, 1.0, gr);
      rows.push_back(gr);
    }
    for (int i = 0; i < mi_; ++i) {
      if (m.ineq[i] <= 0.0 && p_.ineq[i].fn.eval(w) < -1e-8) continue;
      gr.setZero();
      p_.ineq[i].fn.add_grad_to(w, 1.0, gr);
      rows.push_back(gr);
    }
    for (int j = 0; j < n_; ++j) {
      if (w[j] - p_.lower[j] <= 1e-12 || p_.upper[j] - w[j] <= 1e-12) {
        rows.push_back(Vector::Unit(n_, j));
      }
    }
    Matrix J(static_cast<int>(rows.size()), n_);
    for (int k = 0; k < static_cast<int>(rows.size()); ++k) J.row(k) = rows[k].transpose();
    return J;
  }

  Step subproblem(const Vector& w, const Multipliers& m, double rho) const {
    Step s;
    const Matrix H = convexified_hessian(w, m);
    const Vector gF = p_.objective.grad(w);
    const Vector c = p_.ineq_values(w), e = p_.eq_values(w);
    const Matrix Jc = p_.ineq_jacobian(w), Je = p_.eq_jacobian(w);
    const Vector box = o_.step_scale * w.cwiseAbs().cwiseMax(1.0);
    const Vector lo = (p_.lower - w).cwiseMax(-box), hi = (p_.upper - w).cwiseMin(box);

    qp::QpProblem q{H, gF, Jc, -c, Je, -e, lo, hi};
    auto r = qp::solve_qp(q, Vector::Zero(n_));
    if (r.status == qp::QpStatus::Optimal) {
      s.ok = true;
      s.d = r.x;
      s.curvature = s.d.dot(H * s.d);
      s.mult = {r.lambda, r.mu, r.nu_lower, r.nu_upper};
      strip_box(s.mult, lo, hi, w);
      return s;
    }

    // Elastic mode: d, slacks s (ineq), r+ and r- (eq), all penalized by rho_e.
    const double rho_e = std::max(rho, 1e3);
    const int ne = n_ + mi_ + 2 * me_;
    qp::QpProblem el;
    el.H = Matrix::Zero(ne, ne);
    el.H.topLeftCorner(n_, n_) = H;
    el.H.diagonal().tail(ne - n_).setConstant(o_.hessian_shift);
    el.g = Vector::Constant(ne, rho_e);
    el.g.head(n_) = gF;
    el.A_in = Matrix::Zero(mi_, ne);
    el.A_in.leftCols(n_) = Jc;
    el.A_in.block(0, n_, mi_, mi_) = -Matrix::Identity(mi_, mi_);
    el.b_in = -c;
    el.A_eq = Matrix::Zero(me_, ne);
    el.A_eq.leftCols(n_) = Je;
    el.A_eq.block(0, n_ + mi_, me_, me_) = -Matrix::Identity(me_, me_);
    el.A_eq.block(0, n_ + mi_ + me_, me_, me_) = Matrix::Identity(me_, me_);
    el.b_eq = -e;
    el.lower = Vector::Zero(ne);
    el.lower.head(n_) = lo;
    el.upper = Vector::Constant(ne, kInf);
    el.upper.head(n_) = hi;
    Vector st = Vector::Zero(ne);
    st.segment(n_, mi_) = c.cwiseMax(0.0);
    st.segment(n_ + mi_, me_) = e.cwiseMax(0.0);
    st.segment(n_ + mi_ + me_, me_) = (-e).cwiseMax(0.0);
    r = qp::solve_qp(el, st);
    if (r.status != qp::QpStatus::Optimal) return s;
    s.ok = true;
    s.elastic = true;
    s.d = r.x.head(n_);
    s.curvature = s.d.dot(H * s.d);
    s.mult = {r.lambda, r.mu, r.nu_lower.head(n_), r.nu_upper.head(n_)};
    strip_box(s.mult, lo, hi, w);
    return s;
  }

  // Multipliers of the artificial step box are not bound multipliers.
  void strip_box(Multipliers& m, const Vector& lo, const Vector& hi, const Vector& w) const {
    for (int j = 0; j < n_; ++j) {
      if (lo[j] != p_.lower[j] - w[j]) m.lower[j] = 0.0;
      if (hi[j] != p_.upper[j] - w[j]) m.upper[j] = 0.0;
    }
  }

  // Second-order correction: up to three least-norm Gauss-Newton steps that
  // pull the equality rows, the rows active in the QP and the rows violated
  // at the trial point back to zero. Jacobians are taken at the trial point.
  bool project(const Vector& w, const Step& s, Vector& trial) const {
    const Vector c0 = p_.ineq_values(w);
    const Matrix J0 = p_.ineq_jacobian(w);
    std::vector<char> qp_active(mi_, 0);
    for (int i = 0; i < mi_; ++i)
      qp_active[i] = s.mult.ineq[i] > 0.0 || c0[i] + J0.row(i).dot(s.d) >= -1e-9;
    bool changed = false;
    for (int round = 0; round < 3; ++round) {
      const Vector c = p_.ineq_values(trial), e = p_.eq_values(trial);
      if (!c.allFinite() || !e.allFinite()) return false;
      std::vector<int> rows;
      for (int i = 0; i < mi_; ++i)
        if (qp_active[i] || c[i] > 0.0) rows.push_back(i);
      const int k = static_cast<int>(rows.size()) + me_;
      if (k == 0) break;
      const Matrix Jc = p_.ineq_jacobian(trial);
      Matrix A(k, n_);
      Vector rhs(k);
      for (int t = 0; t < static_cast<int>(rows.size()); ++t) {
        A.row(t) = Jc.row(rows[t]);
        rhs[t] = -c[rows[t]];
      }
      if (me_ > 0) {
        A.bottomRows(me_) = p_.eq_jacobian(trial);
        rhs.tail(me_) = -e;
      }
      if (rhs.lpNorm<Eigen::Infinity>() <= 1e-14) break;
      const Vector corr = A.completeOrthogonalDecomposition().solve(rhs);
      if (!corr.allFinite()) return false;
      trial = (trial + corr).cwiseMax(p_.lower).cwiseMin(p_.upper);
      changed = true;
    }
    return changed;
  }

  const Nlp& p_;
  NlpOptions o_;
  int n_, mi_, me_;
  bool identity_model_ = false;
};

}  // namespace detail

/// Local SQP solve from `start`. Requested tolerances below 1e-10 are raised
/// to 1e-10; the requested value is kept in the result.
inline NlpSolution solve_nlp(const Nlp& p, const Vector& start, const NlpOptions& opt = {}) {
  if (start.size() != p.num_vars) throw std::invalid_argument("solve_nlp: start has wrong length");
  p.validate();
  detail::Sqp s(p, opt);
  return s.run(start);
}

inline NlpSolution solve_nlp(const Nlp& p, const Vector& start, double tol) {
  NlpOptions o;
  o.tol = tol;
  return solve_nlp(p, start, o);
}

}  // namespace bilevel

#pragma once

// Primal active-set method for strictly convex QPs
//   min 1/2 d^T H d + g^T d  s.t.  A_in d <= b_in,  A_eq d = b_eq,  lo <= d <= hi.
// A feasible start comes from the caller or from the LP phase 1. Steps are
// computed in the null space of the working set.

#include "bilevel/lp.hpp"
#include "bilevel/problem.hpp"

#include <Eigen/Dense>

#include <cmath>
#include <optional>
#include <vector>

namespace bilevel::qp {

struct QpProblem {
  Matrix H;
  Vector g;
  Matrix A_in;
  Vector b_in;
  Matrix A_eq;
  Vector b_eq;
  Vector lower;
  Vector upper;

  int n() const { return static_cast<int>(g.size()); }
};

enum class QpStatus { Optimal, Infeasible, IterationLimit };

struct QpResult {
  QpStatus status = QpStatus::IterationLimit;
  Vector x;
  // H x + g + A_in^T lambda + A_eq^T mu - nu_lower + nu_upper = 0
  Vector lambda;
  Vector mu;
  Vector nu_lower;
  Vector nu_upper;
  int iterations = 0;
};

struct QpOptions {
  double feas_tol = 1e-12;
  double mult_tol = 1e-10;
  int max_iterations = 0;  // 0: 5 * (n + constraints) + 100
};

namespace detail {

// Constraint ids: [0, m_in) inequality rows, [m_in, m_in+m_eq) equalities,
// then n lower bounds, then n upper bounds. All are written as a^T d (<=|=) b.
class ActiveSetQp {
 public:
  ActiveSetQp(const QpProblem& p, const QpOptions& o) : p_(p), o_(o) {
    n_ = p.n();
    m_in_ = static_cast<int>(p.A_in.rows());
    m_eq_ = static_cast<int>(p.A_eq.rows());
  }

  QpResult solve(const std::optional<Vector>& start) {
    QpResult res;
    Vector x;
    if (start && start->size() == n_ && violation(*start) <= o_.feas_tol) {
      x = *start;
    } else {
      auto fp = phase1();
      if (!fp) {
        res.status = QpStatus::Infeasible;
        res.x = Vector::Zero(n_);
        return res;
      }
      x = *fp;
    }

    std::vector<int> W;
    for (int k = 0; k < m_eq_; ++k) try_add(W, m_in_ + k);
    for (int k = 0; k < m_in_; ++k)
      if (std::abs(p_.A_in.row(k).dot(x) - p_.b_in[k]) <= o_.feas_tol) try_add(W, k);
    for (int j = 0; j < n_; ++j) {
      if (std::isfinite(p_.lower[j]) && std::abs(x[j] - p_.lower[j]) <= o_.feas_tol) try_add(W, lower_id(j));
      if (std::isfinite(p_.upper[j]) && std::abs(x[j] - p_.upper[j]) <= o_.feas_tol) try_add(W, upper_id(j));
    }

    const int max_it = o_.max_iterations > 0 ? o_.max_iterations : 5 * (n_ + m_in_ + m_eq_ + 2 * n_) + 100;
    const double gscale = 1.0 + p_.g.lpNorm<Eigen::Infinity>();
    Vector lam_w;
    for (int it = 0; it < max_it; ++it) {
      res.iterations = it + 1;
      const Vector grad = p_.H * x + p_.g;
      Vector step;
      double reduced = 0.0, restore = 0.0;
      null_space_step(W, x, grad, step, lam_w, reduced, restore);

      // Stationary on the working set: either no step, or a step that only
      // amplifies rounding through a nearly singular reduced Hessian.
      const bool tiny = step.lpNorm<Eigen::Infinity>() <= 1e-13 * (1.0 + x.lpNorm<Eigen::Infinity>());
      const bool flat = reduced <= 1e-13 * (1.0 + grad.lpNorm<Eigen::Infinity>()) && restore <= o_.feas_tol;
      if (tiny || flat) {
        int drop = -1;
        double most_negative = -o_.mult_tol * gscale;
        for (int k = 0; k < static_cast<int>(W.size()); ++k) {
          if (is_equality(W[k])) continue;
          if (lam_w[k] < most_negative) {
            most_negative = lam_w[k];
            drop = k;
          }
        }
        if (drop < 0) {
          res.status = QpStatus::Optimal;
          res.x = x;
          unpack(W, lam_w, res);
          return res;
        }
        W.erase(W.begin() + drop);
        continue;
      }

      // Blockers that depend linearly on the working set only move through
      // rounding; they are skipped so the working matrix keeps full rank.
      const int total = m_in_ + m_eq_ + 2 * n_;
      std::vector<char> skip(total, 0);
      for (int id : W) skip[id] = 1;
      double alpha = 1.0;
      int blocking = -1;
      for (;;) {
        alpha = 1.0;
        blocking = -1;
        for (int id = 0; id < total; ++id) {
          if (skip[id] || is_equality(id)) continue;
          double ap = 0.0, slack = 0.0;
          if (!row_slack(id, x, step, ap, slack)) continue;
          if (ap <= 1e-14 * step.lpNorm<Eigen::Infinity>()) continue;
          const double ratio = std::max(0.0, slack) / ap;
          if (ratio < alpha) {
            alpha = ratio;
            blocking = id;
          }
        }
        if (blocking < 0) break;
        const std::size_t before = W.size();
        try_add(W, blocking);
        if (W.size() > before) break;
        skip[blocking] = 1;
      }
      x += alpha * step;
      if (blocking >= 0) snap(blocking, x);
    }
    res.status = QpStatus::IterationLimit;
    res.x = x;
    unpack(W, lam_w.size() == static_cast<int>(W.size()) ? lam_w : Vector::Zero(static_cast<int>(W.size())), res);
    return res;
  }

 private:
  int lower_id(int j) const { return m_in_ + m_eq_ + j; }
  int upper_id(int j) const { return m_in_ + m_eq_ + n_ + j; }
  bool is_equality(int id) const { return id >= m_in_ && id < m_in_ + m_eq_; }

  Vector row(int id) const {
    if (id < m_in_) return p_.A_in.row(id).transpose();
    if (id < m_in_ + m_eq_) return p_.A_eq.row(id - m_in_).transpose();
    Vector e = Vector::Zero(n_);
    if (id < m_in_ + m_eq_ + n_) e[id - m_in_ - m_eq_] = -1.0;
    else e[id - m_in_ - m_eq_ - n_] = 1.0;
    return e;
  }

  // For a <= constraint: ap = a^T step, slack = b - a^T x. Returns false when
  // the constraint does not exist (infinite bound).
  bool row_slack(int id, const Vector& x, const Vector& step, double& ap, double& slack) const {
    if (id < m_in_) {
      ap = p_.A_in.row(id).dot(step);
      slack = p_.b_in[id] - p_.A_in.row(id).dot(x);
      return true;
    }
    if (id < m_in_ + m_eq_ + n_) {
      const int j = id - m_in_ - m_eq_;
      if (!std::isfinite(p_.lower[j])) return false;
      ap = -step[j];
      slack = x[j] - p_.lower[j];
      return true;
    }
    const int j = id - m_in_ - m_eq_ - n_;
    if (!std::isfinite(p_.upper[j])) return false;
    ap = step[j];
    slack = p_.upper[j] - x[j];
    return true;
  }

  void snap(int id, Vector& x) const {
    if (id >= m_in_ + m_eq_ && id < m_in_ + m_eq_ + n_) x[id - m_in_ - m_eq_] = p_.lower[id - m_in_ - m_eq_];
    else if (id >= m_in_ + m_eq_ + n_) x[id - m_in_ - m_eq_ - n_] = p_.upper[id - m_in_ - m_eq_ - n_];
  }

  Matrix working_matrix(const std::vector<int>& W) const {
    Matrix A(static_cast<int>(W.size()), n_);
    for (int k = 0; k < static_cast<int>(W.size()); ++k) A.row(k) = row(W[k]).transpose();
    return A;
  }

  void try_add(std::vector<int>& W, int id) const {
    std::vector<int> cand = W;
    cand.push_back(id);
    if (static_cast<int>(cand.size()) > n_) return;
    Matrix A = working_matrix(cand);
    for (int k = 0; k < A.rows(); ++k) {
      const double nrm = A.row(k).norm();
      if (nrm > 0.0) A.row(k) /= nrm;
    }
    Eigen::ColPivHouseholderQR<Matrix> qr(A.transpose());
    qr.setThreshold(1e-10);
    if (qr.rank() == static_cast<int>(cand.size())) W.push_back(id);
  }

  // Step to the minimizer of the quadratic model on {A_W (x + step) = b_W}:
  // a range-space part restoring the working rows plus a null-space part.
  // Multipliers come from A^T lambda = -(grad + H step).
  // `reduced` is the infinity norm of the reduced gradient at x and
  // `restore` that of the working-row residual.
  void null_space_step(const std::vector<int>& W, const Vector& x, const Vector& grad, Vector& step,
                       Vector& lam, double& reduced, double& restore) const {
    const Matrix A = working_matrix(W);
    const int k = static_cast<int>(A.rows());
    if (k == 0) {
      step = -p_.H.llt().solve(grad);
      if (!step.allFinite()) step = -p_.H.ldlt().solve(grad);
      lam = Vector(0);
      reduced = grad.lpNorm<Eigen::Infinity>();
      restore = 0.0;
      return;
    }
    Vector r(k);
    for (int t = 0; t < k; ++t) r[t] = rhs(W[t]) - A.row(t).dot(x);
    restore = r.lpNorm<Eigen::Infinity>();
    Eigen::HouseholderQR<Matrix> qr(A.transpose());
    const Matrix Q = qr.householderQ();
    const Matrix Y = Q.leftCols(k);
    const Matrix Z = Q.rightCols(n_ - k);
    const Matrix R = qr.matrixQR().topLeftCorner(k, k).triangularView<Eigen::Upper>();
    // A^T = Y R, so A Y R^{-T} r = r.
    step = Y * R.transpose().triangularView<Eigen::Lower>().solve(r);
    reduced = 0.0;
    if (n_ - k > 0) {
      reduced = (Z.transpose() * grad).lpNorm<Eigen::Infinity>();
      const Matrix ZHZ = Z.transpose() * p_.H * Z;
      Eigen::LDLT<Matrix> ldlt(ZHZ);
      step += -Z * ldlt.solve(Z.transpose() * (grad + p_.H * step));
    }
    lam = R.triangularView<Eigen::Upper>().solve(-Y.transpose() * (grad + p_.H * step));
  }

  double rhs(int id) const {
    if (id < m_in_) return p_.b_in[id];
    if (id < m_in_ + m_eq_) return p_.b_eq[id - m_in_];
    if (id < m_in_ + m_eq_ + n_) return -p_.lower[id - m_in_ - m_eq_];
    return p_.upper[id - m_in_ - m_eq_ - n_];
  }

  void unpack(const std::vector<int>& W, const Vector& lam_w, QpResult& res) const {
    res.lambda = Vector::Zero(m_in_);
    res.mu = Vector::Zero(m_eq_);
    res.nu_lower = Vector::Zero(n_);
    res.nu_upper = Vector::Zero(n_);
    for (int k = 0; k < static_cast<int>(W.size()); ++k) {
      const int id = W[k];
      if (id < m_in_) res.lambda[id] = lam_w[k];
      else if (id < m_in_ + m_eq_) res.mu[id - m_in_] = lam_w[k];
      else if (id < m_in_ + m_eq_ + n_) res.nu_lower[id - m_in_ - m_eq_] = lam_w[k];
      else res.nu_upper[id - m_in_ - m_eq_ - n_] = lam_w[k];
    }
  }

  double violation(const Vector& x) const {
    double v = 0.0;
    if (m_in_ > 0) v = std::max(v, (p_.A_in * x - p_.b_in).maxCoeff());
    if (m_eq_ > 0) v = std::max(v, (p_.A_eq * x - p_.b_eq).lpNorm<Eigen::Infinity>());
    for (int j = 0; j < n_; ++j) v = std::max({v, p_.lower[j] - x[j], x[j] - p_.upper[j]});
    return v;
  }

  std::optional<Vector> phase1() const {
    lp::LpProblem lpp(n_);
    for (int k = 0; k < m_in_; ++k) lpp.add_row(p_.A_in.row(k).transpose(), lp::Relation::LessEqual, p_.b_in[k]);
    for (int k = 0; k < m_eq_; ++k) lpp.add_row(p_.A_eq.row(k).transpose(), lp::Relation::Equal, p_.b_eq[k]);
    lpp.lower = p_.lower;
    lpp.upper = p_.upper;
    const auto fp = lp::feasible_point(lpp);
    if (!fp.feasible) return std::nullopt;
    return fp.point;
  }

  const QpProblem& p_;
  QpOptions o_;
  int n_ = 0, m_in_ = 0, m_eq_ = 0;
};

}  // namespace detail

/// Solves a convex QP; `start`, when feasible, skips the LP phase 1.
inline QpResult solve_qp(const QpProblem& p, const std::optional<Vector>& start = std::nullopt,
                         const QpOptions& opt = {}) {
  detail::ActiveSetQp s(p, opt);
  return s.solve(start);
}

}  // namespace bilevel::qp

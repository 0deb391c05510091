#pragma once

// Dense bounded revised simplex. Used for lower-level problems, value
// functions, QP phase-1 starts and every multiplier feasibility system.

#include <Eigen/Dense>

#include <cmath>
#include <limits>
#include <stdexcept>
#include <vector>

namespace bilevel::lp {

using Vector = Eigen::VectorXd;
using Matrix = Eigen::MatrixXd;

inline constexpr double kInf = std::numeric_limits<double>::infinity();

enum class Relation { LessEqual, Equal, GreaterEqual };

enum class LpStatus { Optimal, Infeasible, Unbounded, IterationLimit };

inline const char* to_string(LpStatus s) {
  switch (s) {
    case LpStatus::Optimal: return "Optimal";
    case LpStatus::Infeasible: return "Infeasible";
    case LpStatus::Unbounded: return "Unbounded";
    case LpStatus::IterationLimit: return "IterationLimit";
  }
  return "?";
}

/// min c^T x  s.t.  A x (rel) rhs,  lower <= x <= upper.
struct LpProblem {
  Vector c;
  Matrix A;
  std::vector<Relation> rel;
  Vector rhs;
  Vector lower;
  Vector upper;

  LpProblem() = default;
  explicit LpProblem(int num_vars)
      : c(Vector::Zero(num_vars)),
        A(0, num_vars),
        rhs(0),
        lower(Vector::Constant(num_vars, -kInf)),
        upper(Vector::Constant(num_vars, kInf)) {
    if (num_vars < 1) throw std::invalid_argument("LpProblem: need at least one variable");
  }

  int num_vars() const { return static_cast<int>(c.size()); }
  int num_rows() const { return static_cast<int>(A.rows()); }

  void add_row(const Vector& a, Relation r, double b) {
    if (a.size() != num_vars()) throw std::invalid_argument("LpProblem::add_row: length mismatch");
    A.conservativeResize(A.rows() + 1, Eigen::NoChange);
    A.row(A.rows() - 1) = a.transpose();
    rhs.conservativeResize(rhs.size() + 1);
    rhs[rhs.size() - 1] = b;
    rel.push_back(r);
  }
};

struct LpOptions {
  double feas_tol = 1e-9;
  double opt_tol = 1e-9;
  double pivot_tol = 1e-10;
  int bland_after_degenerate = 1000;
  int refactor_every = 50;
  int max_iterations = 0;  // 0: 50 * (rows + columns) + 1000
};

struct LpSolution {
  LpStatus status = LpStatus::IterationLimit;
  Vector x;
  /// d objective / d rhs_i; <= 0 on binding <= rows of a minimization.
  Vector row_duals;
  /// c_j - A_j^T row_duals; >= 0 at a lower bound, <= 0 at an upper bound.
  Vector reduced_costs;
  double objective = 0.0;
  /// Optimal value of the phase-1 problem (sum of artificial values).
  double phase1_infeasibility = 0.0;
  /// Phase-1 row duals; on Infeasible they certify the inconsistency.
  Vector farkas;
  int iterations = 0;
};

namespace detail {

enum class VarState { Basic, AtLower, AtUpper, FreeZero };

class BoundedSimplex {
 public:
  BoundedSimplex(const LpProblem& p, const LpOptions& opt) : p_(p), opt_(opt) {
    n_ = p.num_vars();
    m_ = p.num_rows();
    if (p.lower.size() != n_ || p.upper.size() != n_ || p.rhs.size() != m_ ||
        static_cast<int>(p.rel.size()) != m_)
      throw std::invalid_argument("LpProblem: inconsistent dimensions");
    for (int j = 0; j < n_; ++j)
      if (p.lower[j] > p.upper[j]) infeasible_bounds_ = true;
    setup();
  }

  LpSolution solve() {
    LpSolution sol;
    if (infeasible_bounds_) {
      sol.status = LpStatus::Infeasible;
      sol.x = Vector::Zero(n_);
      sol.row_duals = Vector::Zero(m_);
      sol.reduced_costs = Vector::Zero(n_);
      sol.farkas = Vector::Zero(m_);
      sol.phase1_infeasibility = kInf;
      return sol;
    }
    const int total = static_cast<int>(lo_.size());
    max_iter_ = opt_.max_iterations > 0 ? opt_.max_iterations : 50 * (m_ + total) + 1000;

    Vector phase1_cost = Vector::Zero(total);
    for (int j = first_art_; j < total; ++j) phase1_cost[j] = 1.0;
    Outcome r1 = run(phase1_cost);
    sol.farkas = duals(phase1_cost);
    double infeas = 0.0;
    for (int j = first_art_; j < total; ++j) infeas += std::max(0.0, x_[j]);
    sol.phase1_infeasibility = infeas;
    const double scale = 1.0 + (m_ > 0 ? p_.rhs.cwiseAbs().maxCoeff() : 0.0);
    if (r1 == Outcome::IterationLimit) {
      finish(sol, LpStatus::IterationLimit);
      return sol;
    }
    if (infeas > opt_.feas_tol * scale) {
      finish(sol, LpStatus::Infeasible);
      return sol;
    }
    for (int j = first_art_; j < total; ++j) {
      lo_[j] = 0.0;
      hi_[j] = 0.0;
      if (state_[j] != VarState::Basic) {
        state_[j] = VarState::AtLower;
        x_[j] = 0.0;
      }
    }
    Vector phase2_cost = Vector::Zero(total);
    phase2_cost.head(n_) = p_.c;
    Outcome r2 = run(phase2_cost);
    switch (r2) {
      case Outcome::Optimal: finish(sol, LpStatus::Optimal); break;
      case Outcome::Unbounded: finish(sol, LpStatus::Unbounded); break;
      case Outcome::IterationLimit: finish(sol, LpStatus::IterationLimit); break;
    }
    sol.row_duals = duals(phase2_cost);
    sol.reduced_costs = (phase2_cost - T_.transpose() * sol.row_duals).head(n_);
    return sol;
  }

 private:
  enum class Outcome { Optimal, Unbounded, IterationLimit };

  void setup() {
    // Columns: structurals, one slack per row, then artificials where needed.
    // Row i reads  a_i^T x + s_i (+ sigma_i art_i) = rhs_i.
    std::vector<double> lo(p_.lower.data(), p_.lower.data() + n_);
    std::vector<double> hi(p_.upper.data(), p_.upper.data() + n_);
    for (int i = 0; i < m_; ++i) {
      switch (p_.rel[i]) {
        case Relation::LessEqual: lo.push_back(0.0); hi.push_back(kInf); break;
        case Relation::GreaterEqual: lo.push_back(-kInf); hi.push_back(0.0); break;
        case Relation::Equal: lo.push_back(0.0); hi.push_back(0.0); break;
      }
    }
    Vector xs = Vector::Zero(n_);
    for (int j = 0; j < n_; ++j) xs[j] = initial_value(lo[j], hi[j]);
    Vector r = p_.rhs - p_.A * xs;

    std::vector<int> art_rows;
    std::vector<double> art_sign;
    std::vector<double> slack_value(m_, 0.0);
    std::vector<VarState> slack_state(m_, VarState::Basic);
    for (int i = 0; i < m_; ++i) {
      const double slo = lo[n_ + i], shi = hi[n_ + i];
      if (r[i] >= slo - opt_.feas_tol && r[i] <= shi + opt_.feas_tol) {
        slack_value[i] = r[i];
        continue;
      }
      const double proj = r[i] < slo ? slo : shi;
      slack_value[i] = proj;
      slack_state[i] = r[i] < slo ? VarState::AtLower : VarState::AtUpper;
      art_rows.push_back(i);
      art_sign.push_back(r[i] - proj > 0 ? 1.0 : -1.0);
    }
    first_art_ = n_ + m_;
    const int total = first_art_ + static_cast<int>(art_rows.size());
    T_ = Matrix::Zero(m_, total);
    T_.leftCols(n_) = p_.A;
    T_.block(0, n_, m_, m_).setIdentity();
    lo_ = Vector(total);
    hi_ = Vector(total);
    x_ = Vector::Zero(total);
    state_.assign(total, VarState::AtLower);
    for (int j = 0; j < n_ + m_; ++j) {
      lo_[j] = lo[j];
      hi_[j] = hi[j];
    }
    for (int j = 0; j < n_; ++j) {
      x_[j] = xs[j];
      state_[j] = nonbasic_state(lo_[j], hi_[j], x_[j]);
    }
    head_.assign(m_, -1);
    for (int i = 0; i < m_; ++i) {
      x_[n_ + i] = slack_value[i];
      state_[n_ + i] = slack_state[i];
      if (slack_state[i] == VarState::Basic) head_[i] = n_ + i;
    }
    for (std::size_t k = 0; k < art_rows.size(); ++k) {
      const int j = first_art_ + static_cast<int>(k);
      const int i = art_rows[k];
      T_(i, j) = art_sign[k];
      lo_[j] = 0.0;
      hi_[j] = kInf;
      x_[j] = std::abs(r[i] - slack_value[i]);
      state_[j] = VarState::Basic;
      head_[i] = j;
    }
    refactor();
  }

  static double initial_value(double lo, double hi) {
    if (std::isfinite(lo)) return lo;
    if (std::isfinite(hi)) return hi;
    return 0.0;
  }
  static VarState nonbasic_state(double lo, double hi, double x) {
    if (std::isfinite(lo) && x == lo) return VarState::AtLower;
    if (std::isfinite(hi) && x == hi) return VarState::AtUpper;
    return VarState::FreeZero;
  }

  void refactor() {
    Matrix B(m_, m_);
    for (int i = 0; i < m_; ++i) B.col(i) = T_.col(head_[i]);
    Binv_ = B.partialPivLu().inverse();
    Vector rhs = p_.rhs;
    for (int j = 0; j < static_cast<int>(x_.size()); ++j)
      if (state_[j] != VarState::Basic && x_[j] != 0.0) rhs -= T_.col(j) * x_[j];
    const Vector xb = Binv_ * rhs;
    for (int i = 0; i < m_; ++i) x_[head_[i]] = xb[i];
  }

  Vector duals(const Vector& cost) const {
    Vector cb(m_);
    for (int i = 0; i < m_; ++i) cb[i] = cost[head_[i]];
    return Binv_.transpose() * cb;
  }

  Outcome run(const Vector& cost) {
    bool bland = false;
    int degenerate = 0;
    int since_refactor = 0;
    const int total = static_cast<int>(x_.size());
    while (true) {
      if (iterations_ >= max_iter_) return Outcome::IterationLimit;
      const Vector pi = duals(cost);
      const Vector d = cost - T_.transpose() * pi;

      int enter = -1;
      double enter_dir = 0.0;
      double best = 0.0;
      for (int j = 0; j < total; ++j) {
        if (state_[j] == VarState::Basic || lo_[j] == hi_[j]) continue;
        double dir = 0.0;
        if (state_[j] == VarState::AtLower && d[j] < -opt_.opt_tol) dir = 1.0;
        else if (state_[j] == VarState::AtUpper && d[j] > opt_.opt_tol) dir = -1.0;
        else if (state_[j] == VarState::FreeZero && std::abs(d[j]) > opt_.opt_tol) dir = d[j] < 0 ? 1.0 : -1.0;
        if (dir == 0.0) continue;
        if (bland) {
          enter = j;
          enter_dir = dir;
          break;
        }
        if (std::abs(d[j]) > best) {
          best = std::abs(d[j]);
          enter = j;
          enter_dir = dir;
        }
      }
      if (enter < 0) return Outcome::Optimal;

      const Vector alpha = Binv_ * T_.col(enter);
      double theta = hi_[enter] - lo_[enter];  // bound flip distance (may be inf)
      int leave_row = -1;
      double leave_pivot = 0.0;
      for (int i = 0; i < m_; ++i) {
        if (std::abs(alpha[i]) <= opt_.pivot_tol) continue;
        const int b = head_[i];
        const double delta = -enter_dir * alpha[i];
        double ratio = kInf;
        if (delta < 0 && std::isfinite(lo_[b])) ratio = std::max(0.0, (x_[b] - lo_[b]) / -delta);
        else if (delta > 0 && std::isfinite(hi_[b])) ratio = std::max(0.0, (hi_[b] - x_[b]) / delta);
        if (!std::isfinite(ratio)) continue;
        const bool better = ratio < theta - 1e-12 ||
                            (ratio <= theta + 1e-12 && leave_row >= 0 &&
                             (bland ? head_[i] < head_[leave_row] : std::abs(alpha[i]) > leave_pivot));
        if (better || (leave_row < 0 && ratio <= theta)) {
          theta = ratio;
          leave_row = i;
          leave_pivot = std::abs(alpha[i]);
        }
      }
      if (!std::isfinite(theta)) return Outcome::Unbounded;

      ++iterations_;
      if (theta <= 1e-12) {
        if (++degenerate >= opt_.bland_after_degenerate) bland = true;
      }
      x_[enter] += enter_dir * theta;
      for (int i = 0; i < m_; ++i) x_[head_[i]] -= enter_dir * theta * alpha[i];

      if (leave_row < 0) {
        state_[enter] = enter_dir > 0 ? VarState::AtUpper : VarState::AtLower;
        x_[enter] = enter_dir > 0 ? hi_[enter] : lo_[enter];
        continue;
      }
      const int leave = head_[leave_row];
      const double delta = -enter_dir * alpha[leave_row];
      if (delta < 0) {
        x_[leave] = lo_[leave];
        state_[leave] = VarState::AtLower;
      } else {
        x_[leave] = hi_[leave];
        state_[leave] = VarState::AtUpper;
      }
      if (lo_[leave] == hi_[leave]) state_[leave] = VarState::AtLower;
      head_[leave_row] = enter;
      state_[enter] = VarState::Basic;

      const double piv = alpha[leave_row];
      Binv_.row(leave_row) /= piv;
      for (int i = 0; i < m_; ++i)
        if (i != leave_row && alpha[i] != 0.0) Binv_.row(i) -= alpha[i] * Binv_.row(leave_row);

      if (++since_refactor >= opt_.refactor_every) {
        refactor();
        since_refactor = 0;
      }
    }
  }

  void finish(LpSolution& sol, LpStatus status) {
    refactor();
    sol.status = status;
    sol.x = x_.head(n_);
    for (int j = 0; j < n_; ++j) {
      // Clamp round-off drift back inside the box.
      if (std::isfinite(p_.lower[j])) sol.x[j] = std::max(sol.x[j], p_.lower[j]);
      if (std::isfinite(p_.upper[j])) sol.x[j] = std::min(sol.x[j], p_.upper[j]);
    }
    sol.objective = p_.c.dot(sol.x);
    sol.iterations = iterations_;
    if (sol.row_duals.size() == 0) sol.row_duals = Vector::Zero(m_);
    if (sol.reduced_costs.size() == 0) sol.reduced_costs = Vector::Zero(n_);
  }

  const LpProblem& p_;
  LpOptions opt_;
  int n_ = 0, m_ = 0, first_art_ = 0;
  bool infeasible_bounds_ = false;
  Matrix T_;
  Vector lo_, hi_, x_;
  std::vector<VarState> state_;
  std::vector<int> head_;
  Matrix Binv_;
  int iterations_ = 0;
  int max_iter_ = 0;
};

}  // namespace detail

inline LpSolution solve_lp(const LpProblem& p, const LpOptions& opt = {}) {
  if (p.num_vars() < 1) throw std::invalid_argument("solve_lp: no variables");
  if (!p.c.allFinite() || !p.A.allFinite() || !p.rhs.allFinite())
    throw std::invalid_argument("solve_lp: non-finite problem data");
  detail::BoundedSimplex s(p, opt);
  return s.solve();
}

struct FeasibilityResult {
  bool feasible = false;
  Vector point;
  double phase1_infeasibility = 0.0;
  Vector farkas;
};

/// Any point satisfying the rows and bounds of `p` (its cost is ignored).
inline FeasibilityResult feasible_point(const LpProblem& p, const LpOptions& opt = {}) {
  LpProblem q = p;
  q.c.setZero();
  const LpSolution s = solve_lp(q, opt);
  FeasibilityResult r;
  r.feasible = s.status == LpStatus::Optimal;
  r.point = s.x;
  r.phase1_infeasibility = s.phase1_infeasibility;
  r.farkas = s.farkas;
  return r;
}

/// Largest violation of rows and bounds at x.
inline double max_violation(const LpProblem& p, const Vector& x) {
  double v = 0.0;
  const Vector ax = p.A * x;
  for (int i = 0; i < p.num_rows(); ++i) {
    const double r = ax[i] - p.rhs[i];
    switch (p.rel[i]) {
      case Relation::LessEqual: v = std::max(v, r); break;
      case Relation::GreaterEqual: v = std::max(v, -r); break;
      case Relation::Equal: v = std::max(v, std::abs(r)); break;
    }
  }
  for (int j = 0; j < p.num_vars(); ++j) {
    v = std::max(v, p.lower[j] - x[j]);
    v = std::max(v, x[j] - p.upper[j]);
  }
  return v;
}

}  // namespace bilevel::lp

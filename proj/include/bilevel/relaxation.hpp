#pragma once

// Outer relaxation loop: warm start from the lower level, solve the relaxed
// problem, test the scheme's stopping rule, shrink t.

#include "bilevel/diagnostics.hpp"
#include "bilevel/lp.hpp"
#include "bilevel/model.hpp"
#include "bilevel/nlp.hpp"
#include "bilevel/reformulate.hpp"

#include <chrono>
#include <cmath>
#include <optional>
#include <stdexcept>
#include <vector>

namespace bilevel {

struct RelaxationParams {
  double t0 = 0.1;
  double sigma = 0.5;
  double eps_r = 1e-8;
  double eps_sqp = 1e-16;  // raised to the solver floor kMinTol
  int max_outer = 40;

  void validate() const {
    if (!(t0 > 0) || !(sigma > 0 && sigma < 1) || !(eps_r > 0) || !(eps_sqp > 0) || max_outer < 1)
      throw std::invalid_argument("RelaxationParams: need t0 > 0, sigma in (0,1), eps_r > 0, eps_sqp > 0, max_outer >= 1");
  }
};

enum class TerminalReason { CriterionMet, TMin, Unbounded, IterLimit };

inline const char* to_string(TerminalReason r) {
  switch (r) {
    case TerminalReason::CriterionMet: return "CriterionMet";
    case TerminalReason::TMin: return "TMin";
    case TerminalReason::Unbounded: return "Unbounded";
    case TerminalReason::IterLimit: return "IterLimit";
  }
  return "?";
}

struct OuterStep {
  int k = 0;
  double t = 0;
  NlpStatus inner_status = NlpStatus::IterLimit;
  double inner_objective = 0;
  int inner_iterations = 0;
  bool warm_from_lower = false;
  double seconds = 0;
};

struct SolveReport {
  RelaxationScheme scheme = RelaxationScheme::MDP1;
  TerminalReason reason = TerminalReason::IterLimit;
  Vector point;  // in the layout of build_base(bp, scheme)
  Vector x, y, z, u, v;
  double objective = 0;
  double base_violation = 0;  // constraint violation of the unrelaxed problem
  double kkt_residual = 0;    // of the last inner solve
  std::optional<InfeasibilityReport> infeasibility;  // linear instances only
  std::vector<OuterStep> trace;
  double seconds = 0;
};

namespace detail {

inline double row_value(const Nlp& base, RowKind kind, const Vector& w, bool eq) {
  for (const auto& c : eq ? base.eq : base.ineq)
    if (c.kind == kind) return c.fn.eval(w);
  throw std::invalid_argument(std::string("termination_met: problem has no ") + to_string(kind) + " row");
}

}  // namespace detail

/// Stopping rule of the outer loop; `base` is build_base(bp, scheme).
///   MDP1: |f(x,y) - f(x,z)| <= eps_r        MDP2: |u^T g(x,z) + v^T h(x,z)| <= eps_r
///   MDP3: both                               WDP:  f(x,y) - L(x,z,u,v) <= eps_r
///   MPCC: |u^T g(x,y)| <= eps_r
/// Always true once t <= eps_r.
inline bool termination_met(const Nlp& base, RelaxationScheme scheme, const Vector& w, double t, double eps_r) {
  if (w.size() != base.num_vars) throw std::invalid_argument("termination_met: iterate has wrong length");
  if (t <= eps_r) return true;
  using detail::row_value;
  switch (scheme) {
    case RelaxationScheme::MDP1: return std::abs(row_value(base, RowKind::ValueGap, w, false)) <= eps_r;
    case RelaxationScheme::MDP2: return std::abs(row_value(base, RowKind::DualProduct, w, false)) <= eps_r;
    case RelaxationScheme::MDP3:
      return std::abs(row_value(base, RowKind::ValueGap, w, false)) <= eps_r &&
             std::abs(row_value(base, RowKind::DualProduct, w, false)) <= eps_r;
    case RelaxationScheme::WDP_T: return row_value(base, RowKind::WolfeGap, w, false) <= eps_r;
    case RelaxationScheme::MPCC_T: return std::abs(row_value(base, RowKind::Complementarity, w, true)) <= eps_r;
  }
  return false;
}

/// A point satisfying the upper-level constraints Omega.
inline Vector upper_feasible_point(const BilevelProgram& bp) {
  bool affine = true;
  for (const auto& c : bp.omega_ineq) affine = affine && c.is_affine();
  for (const auto& c : bp.omega_eq) affine = affine && c.is_affine();
  const Vector origin = Vector::Zero(bp.n + bp.m);
  if (affine) {
    lp::LpProblem q(bp.n);
    auto add = [&](const PolyFunction& fn, lp::Relation rel) {
      q.add_row(fn.grad(origin).head(bp.n), rel, -fn.eval(origin));
    };
    for (const auto& c : bp.omega_ineq) add(c, lp::Relation::LessEqual);
    for (const auto& c : bp.omega_eq) add(c, lp::Relation::Equal);
    // Omega may involve y; restricting to y = 0 keeps the LP over x only.
    const auto r = lp::feasible_point(q);
    if (!r.feasible) throw std::invalid_argument("upper-level constraints have no point with y = 0");
    return r.point;
  }
  Nlp p;
  p.num_vars = bp.n;
  p.blocks = {{"x", 0, bp.n}};
  p.objective = PolyFunction(bp.n);
  p.lower = Vector::Constant(bp.n, -kInf);
  p.upper = Vector::Constant(bp.n, kInf);
  std::vector<int> map(bp.n + bp.m, -1);
  for (int i = 0; i < bp.n; ++i) map[i] = i;
  const Vector zero_y = Vector::Zero(bp.m);
  std::vector<int> ys(bp.m);
  for (int j = 0; j < bp.m; ++j) ys[j] = bp.n + j;
  for (const auto& c : bp.omega_ineq) p.ineq.push_back({c.fix(ys, zero_y).remap(bp.n, map), RowKind::Omega, 0});
  for (const auto& c : bp.omega_eq) p.eq.push_back({c.fix(ys, zero_y).remap(bp.n, map), RowKind::Omega, 0});
  const auto s = solve_nlp(p, Vector::Zero(bp.n), 1e-9);
  if (p.max_violation(s.point) > 1e-8) throw std::invalid_argument("no upper-level feasible point found");
  return s.point;
}

/// The relaxation method with warm starts from the lower level.
inline SolveReport run(const BilevelProgram& bp, RelaxationScheme scheme, const RelaxationParams& params = {},
                       std::optional<Vector> x0 = std::nullopt) {
  using clock = std::chrono::steady_clock;
  params.validate();
  bp.validate();
  const auto start = clock::now();
  const Nlp base = build_base(bp, scheme);
  const bool with_z = scheme != RelaxationScheme::MPCC_T;
  const int n = bp.n, m = bp.m, p = bp.p(), q = bp.q();
  const int u0 = n + m + (with_z ? m : 0), v0 = u0 + p;

  Vector xt = x0 ? *x0 : upper_feasible_point(bp);
  if (xt.size() != n) throw std::invalid_argument("run: x0 has wrong length");

  NlpOptions inner;
  inner.tol = params.eps_sqp;

  SolveReport rep;
  rep.scheme = scheme;
  std::optional<Vector> prev;
  double t = params.t0;
  NlpSolution last;
  for (int k = 0; k < params.max_outer; ++k) {
    const auto t_start = clock::now();
    OuterStep step;
    step.k = k;
    step.t = t;

    // Step 1: warm start (x, y, y, u, v) from the lower level at x.
    Vector w0 = Vector::Zero(base.num_vars);
    const auto low = lower_solve(bp, xt);
    if (low.status == LowerStatus::Optimal) {
      w0.head(n) = xt;
      w0.segment(n, m) = low.y;
      if (with_z) w0.segment(n + m, m) = low.y;
      w0.segment(u0, p) = low.u;
      w0.segment(v0, q) = low.v;
      step.warm_from_lower = true;
    } else if (prev) {
      w0 = *prev;
    } else {
      w0.head(n) = xt;
    }

    // Step 2: relaxed subproblem.
    last = solve_nlp(build_relaxed(bp, scheme, t), w0, inner);
    step.inner_status = last.status;
    step.inner_objective = last.objective;
    step.inner_iterations = last.iterations;
    step.seconds = std::chrono::duration<double>(clock::now() - t_start).count();
    rep.trace.push_back(step);
    prev = last.point;

    if (last.status == NlpStatus::Unbounded) {
      rep.reason = TerminalReason::Unbounded;
      break;
    }
    if (termination_met(base, scheme, last.point, t, params.eps_r)) {
      rep.reason = t <= params.eps_r && !termination_met(base, scheme, last.point, kInf, params.eps_r)
                       ? TerminalReason::TMin
                       : TerminalReason::CriterionMet;
      break;
    }
    // Step 3.
    t = std::max(params.sigma * t, params.eps_r);
    xt = last.point.head(n);
  }

  rep.point = last.point;
  rep.x = rep.point.head(n);
  rep.y = rep.point.segment(n, m);
  if (with_z) rep.z = rep.point.segment(n + m, m);
  rep.u = rep.point.segment(u0, p);
  rep.v = rep.point.segment(v0, q);
  rep.objective = bp.F.eval(rep.point.head(n + m));
  rep.base_violation = base.max_violation(rep.point);
  rep.kkt_residual = last.kkt.max();
  rep.seconds = std::chrono::duration<double>(clock::now() - start).count();
  return rep;
}

/// Linear instances also get the infeasibility breakdown of the final (x, y).
inline SolveReport run(const LinearBilevel& lin, RelaxationScheme scheme, const RelaxationParams& params = {},
                       std::optional<Vector> x0 = std::nullopt) {
  lin.validate();
  auto rep = run(to_general(lin), scheme, params, std::move(x0));
  if (rep.reason != TerminalReason::Unbounded) rep.infeasibility = infeasibility(lin, rep.x, rep.y);
  return rep;
}

}  // namespace bilevel

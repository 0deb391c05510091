#pragma once

// Bilevel programs
//   min F(x, y)  s.t.  (x, y) in Omega,  y in argmin { f(x, y) : g(x, y) <= 0, h(x, y) = 0 }
// in general polynomial form and in the linear specialization with a box on y.

#include "bilevel/lp.hpp"
#include "bilevel/nlp.hpp"
#include "bilevel/poly.hpp"
#include "bilevel/problem.hpp"

#include <Eigen/Dense>

#include <numeric>
#include <stdexcept>
#include <string>
#include <vector>

namespace bilevel {

/// All functions live on (x | y), x first.
struct BilevelProgram {
  int n = 0;
  int m = 0;
  PolyFunction F;
  std::vector<PolyFunction> omega_ineq;
  std::vector<PolyFunction> omega_eq;
  PolyFunction f;
  std::vector<PolyFunction> g;
  std::vector<PolyFunction> h;

  int p() const { return static_cast<int>(g.size()); }
  int q() const { return static_cast<int>(h.size()); }

  void validate() const {
    if (n < 0 || m < 1) throw std::invalid_argument("BilevelProgram: need n >= 0 and m >= 1");
    const int nv = n + m;
    auto check = [nv](const PolyFunction& fn, const std::string& what) {
      if (fn.num_vars() != nv)
        throw std::invalid_argument("BilevelProgram: " + what + " has " + std::to_string(fn.num_vars()) +
                                    " variables, expected " + std::to_string(nv));
    };
    check(F, "F");
    check(f, "f");
    for (const auto& c : omega_ineq) check(c, "omega_ineq");
    for (const auto& c : omega_eq) check(c, "omega_eq");
    for (const auto& c : g) check(c, "g");
    for (const auto& c : h) check(c, "h");
  }
};

struct LinearBilevel {
  Vector c1, c2;
  Matrix A1;
  Vector b1;
  Vector d2;
  Matrix A2, B2;
  Vector b2;
  Vector bl, bu;

  int n() const { return static_cast<int>(c1.size()); }
  int m() const { return static_cast<int>(c2.size()); }
  int l() const { return static_cast<int>(b1.size()); }
  int p() const { return static_cast<int>(b2.size()); }

  void validate() const {
    const int n_ = n(), m_ = m(), l_ = l(), p_ = p();
    if (n_ < 1 || m_ < 1) throw std::invalid_argument("LinearBilevel: need n >= 1 and m >= 1");
    auto shape = [](bool ok, const char* field) {
      if (!ok) throw std::invalid_argument(std::string("LinearBilevel: bad shape for ") + field);
    };
    shape(A1.rows() == l_ && A1.cols() == n_, "A1");
    shape(d2.size() == m_, "d2");
    shape(A2.rows() == p_ && A2.cols() == n_, "A2");
    shape(B2.rows() == p_ && B2.cols() == m_, "B2");
    shape(bl.size() == m_, "bl");
    shape(bu.size() == m_, "bu");
    auto finite = [](bool ok, const char* field) {
      if (!ok) throw std::invalid_argument(std::string("LinearBilevel: non-finite entry in ") + field);
    };
    finite(c1.allFinite(), "c1");
    finite(c2.allFinite(), "c2");
    finite(A1.allFinite(), "A1");
    finite(b1.allFinite(), "b1");
    finite(d2.allFinite(), "d2");
    finite(A2.allFinite(), "A2");
    finite(B2.allFinite(), "B2");
    finite(b2.allFinite(), "b2");
    finite(bl.allFinite(), "bl");
    finite(bu.allFinite(), "bu");
    if ((bl.array() > bu.array()).any()) throw std::invalid_argument("LinearBilevel: bl > bu");
  }
};

/// Lifts the linear form: Omega = {A1 x <= b1}, g = [A2 x + B2 y - b2; y - bu; bl - y].
inline BilevelProgram to_general(const LinearBilevel& lin) {
  lin.validate();
  const int n = lin.n(), m = lin.m(), nv = n + m;
  BilevelProgram bp;
  bp.n = n;
  bp.m = m;
  Vector a(nv);
  a << lin.c1, lin.c2;
  bp.F = PolyFunction::affine(a, 0.0);
  a << Vector::Zero(n), lin.d2;
  bp.f = PolyFunction::affine(a, 0.0);
  for (int i = 0; i < lin.l(); ++i) {
    a << lin.A1.row(i).transpose(), Vector::Zero(m);
    bp.omega_ineq.push_back(PolyFunction::affine(a, -lin.b1[i]));
  }
  for (int i = 0; i < lin.p(); ++i) {
    a << lin.A2.row(i).transpose(), lin.B2.row(i).transpose();
    bp.g.push_back(PolyFunction::affine(a, -lin.b2[i]));
  }
  for (int j = 0; j < m; ++j) bp.g.push_back(PolyFunction::variable(nv, n + j) - PolyFunction::constant(nv, lin.bu[j]));
  for (int j = 0; j < m; ++j) bp.g.push_back(PolyFunction::constant(nv, lin.bl[j]) - PolyFunction::variable(nv, n + j));
  return bp;
}

enum class LowerStatus { Optimal, Infeasible, Unbounded, Failed };

inline const char* to_string(LowerStatus s) {
  switch (s) {
    case LowerStatus::Optimal: return "Optimal";
    case LowerStatus::Infeasible: return "Infeasible";
    case LowerStatus::Unbounded: return "Unbounded";
    case LowerStatus::Failed: return "Failed";
  }
  return "?";
}

/// y with multipliers in the convention grad_y f + grad_y g u + grad_y h v = 0, u >= 0.
struct LowerSolution {
  LowerStatus status = LowerStatus::Failed;
  Vector y;
  Vector u;
  Vector v;
  double value = kInf;
};

namespace detail {

// Substitutes x and re-indexes the result onto the y variables only.
inline PolyFunction restrict_to_y(const PolyFunction& fn, int n, int m, const Vector& x) {
  std::vector<int> xi(n);
  std::iota(xi.begin(), xi.end(), 0);
  const PolyFunction fixed = fn.fix(xi, x);
  std::vector<int> map(n + m, -1);
  for (int j = 0; j < m; ++j) map[n + j] = j;
  return fixed.remap(m, map);
}

}  // namespace detail

/// Solves the lower level P_x. Affine-in-y levels go to the simplex; anything
/// else to the SQP solver from y = 0.
inline LowerSolution lower_solve(const BilevelProgram& bp, const Vector& x) {
  bp.validate();
  if (x.size() != bp.n) throw std::invalid_argument("lower_solve: x has wrong length");
  const int m = bp.m, p = bp.p(), q = bp.q();
  const PolyFunction fy = detail::restrict_to_y(bp.f, bp.n, m, x);
  std::vector<PolyFunction> gy, hy;
  for (const auto& c : bp.g) gy.push_back(detail::restrict_to_y(c, bp.n, m, x));
  for (const auto& c : bp.h) hy.push_back(detail::restrict_to_y(c, bp.n, m, x));

  bool affine = fy.is_affine();
  for (const auto& c : gy) affine = affine && c.is_affine();
  for (const auto& c : hy) affine = affine && c.is_affine();

  LowerSolution out;
  out.y = Vector::Zero(m);
  out.u = Vector::Zero(p);
  out.v = Vector::Zero(q);

  if (affine) {
    lp::LpProblem lpp(m);
    lpp.c = fy.linear_part();
    for (const auto& c : gy) lpp.add_row(c.linear_part(), lp::Relation::LessEqual, -c.constant_term());
    for (const auto& c : hy) lpp.add_row(c.linear_part(), lp::Relation::Equal, -c.constant_term());
    const auto s = lp::solve_lp(lpp);
    if (s.status == lp::LpStatus::Infeasible) {
      out.status = LowerStatus::Infeasible;
      return out;
    }
    if (s.status == lp::LpStatus::Unbounded) {
      out.status = LowerStatus::Unbounded;
      out.value = -kInf;
      return out;
    }
    if (s.status != lp::LpStatus::Optimal) return out;
    out.status = LowerStatus::Optimal;
    out.y = s.x;
    // Row duals are d obj / d rhs, so they are the negated multipliers.
    for (int i = 0; i < p; ++i) out.u[i] = std::max(0.0, -s.row_duals[i]);
    for (int j = 0; j < q; ++j) out.v[j] = -s.row_duals[p + j];
    out.value = fy.eval(out.y);
    return out;
  }

  Nlp nlp;
  nlp.num_vars = m;
  nlp.blocks = {{"y", 0, m}};
  nlp.objective = fy;
  for (int i = 0; i < p; ++i) nlp.ineq.push_back({gy[i], RowKind::LowerIneq, i});
  for (int j = 0; j < q; ++j) nlp.eq.push_back({hy[j], RowKind::LowerEq, j});
  nlp.lower = Vector::Constant(m, -kInf);
  nlp.upper = Vector::Constant(m, kInf);
  const auto s = solve_nlp(nlp, Vector::Zero(m), 1e-9);
  out.y = s.point;
  if (s.status == NlpStatus::Unbounded) {
    out.status = LowerStatus::Unbounded;
    out.value = -kInf;
    return out;
  }
  if (s.status == NlpStatus::KktPoint) {
    out.status = LowerStatus::Optimal;
    out.u = s.multipliers.ineq;
    out.v = s.multipliers.eq;
    out.value = fy.eval(out.y);
    return out;
  }
  out.status = nlp.max_violation(s.point) > 1e-6 ? LowerStatus::Infeasible : LowerStatus::Failed;
  return out;
}

/// V(x) = min { d2^T y : B2 y <= b2 - A2 x, bl <= y <= bu }, +inf when empty.
inline double value_function(const LinearBilevel& lin, const Vector& x) {
  if (x.size() != lin.n()) throw std::invalid_argument("value_function: x has wrong length");
  lp::LpProblem lpp(lin.m());
  lpp.c = lin.d2;
  const Vector rhs = lin.b2 - lin.A2 * x;
  for (int i = 0; i < lin.p(); ++i) lpp.add_row(lin.B2.row(i).transpose(), lp::Relation::LessEqual, rhs[i]);
  lpp.lower = lin.bl;
  lpp.upper = lin.bu;
  const auto s = lp::solve_lp(lpp);
  if (s.status == lp::LpStatus::Optimal) return s.objective;
  if (s.status == lp::LpStatus::Infeasible) return kInf;
  throw std::runtime_error(std::string("value_function: LP returned ") + lp::to_string(s.status));
}

}  // namespace bilevel

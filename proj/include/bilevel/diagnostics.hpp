#pragma once

// Verification tools: the bilevel infeasibility measure, MFCQ certificates,
// KKT and S-stationarity multiplier searches, and abnormal multipliers.
// Every search is a linear feasibility problem once the active sets are
// fixed from the point with tolerance kActiveTol.

#include "bilevel/lp.hpp"
#include "bilevel/model.hpp"
#include "bilevel/problem.hpp"

#include <Eigen/Dense>

#include <cmath>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

namespace bilevel {

inline constexpr double kActiveTol = 1e-6;
inline constexpr double kCertificateTol = 1e-7;

// ---------------------------------------------------------------------------
// Infeasibility of (x, y) for a linear bilevel program

struct InfeasibilityReport {
  double upper_violation = 0;              // ||max(0, A1 x - b1)||
  double lower_feasibility_violation = 0;  // ||max(0, A2 x + B2 y - b2)||
  double bound_violation = 0;              // ||max(0, y - bu)|| + ||max(0, bl - y)||
  double optimality_gap = 0;               // |d2^T y - V(x)|
  double total = 0;
  bool value_infinite = false;             // lower level empty at x
};

inline InfeasibilityReport infeasibility(const LinearBilevel& lin, const Vector& x, const Vector& y) {
  if (x.size() != lin.n() || y.size() != lin.m()) throw std::invalid_argument("infeasibility: dimension mismatch");
  InfeasibilityReport r;
  r.upper_violation = (lin.A1 * x - lin.b1).cwiseMax(0.0).norm();
  r.lower_feasibility_violation = (lin.A2 * x + lin.B2 * y - lin.b2).cwiseMax(0.0).norm();
  r.bound_violation = (y - lin.bu).cwiseMax(0.0).norm() + (lin.bl - y).cwiseMax(0.0).norm();
  const double V = value_function(lin, x);
  if (!std::isfinite(V)) {
    r.value_infinite = true;
    r.optimality_gap = kInf;
    r.total = kInf;
    return r;
  }
  r.optimality_gap = std::abs(lin.d2.dot(y) - V);
  r.total = r.upper_violation + r.lower_feasibility_violation + r.bound_violation + r.optimality_gap;
  return r;
}

// ---------------------------------------------------------------------------
// Certificates

enum class CertificateKind { MfcqDirection, MfcqFailAbnormal, SStationary, KktMultipliers, NotKkt };

inline const char* to_string(CertificateKind k) {
  switch (k) {
    case CertificateKind::MfcqDirection: return "MfcqDirection";
    case CertificateKind::MfcqFailAbnormal: return "MfcqFailAbnormal";
    case CertificateKind::SStationary: return "SStationary";
    case CertificateKind::KktMultipliers: return "KktMultipliers";
    case CertificateKind::NotKkt: return "NotKkt";
  }
  return "?";
}

/// Multipliers of the S-stationarity system of an MPCC, plus those of the
/// upper-level rows (Omega), which the system carries alongside.
struct SMultipliers {
  Vector omega_ineq;
  Vector omega_eq;
  Vector g;  // lambda^g
  Vector h;  // lambda^h
  Vector u;  // lambda^u
  Vector L;  // lambda^L
};

struct Certificate {
  CertificateKind kind = CertificateKind::NotKkt;
  Vector direction;                    // MfcqDirection
  double margin = 0;                   // MfcqDirection: min over active rows of -grad^T d
  Multipliers multipliers;             // KktMultipliers, MfcqFailAbnormal
  std::optional<SMultipliers> s_mult;  // SStationary
  double residual = 0;                 // of the defining system, recomputed from scratch
  double phase1_gap = 0;               // NotKkt: phase-1 optimum of the multiplier LP
  std::string note;
};

namespace detail {

inline void require_feasible(const Nlp& p, const Vector& w, const char* who) {
  if (w.size() != p.num_vars) throw std::invalid_argument(std::string(who) + ": point has wrong length");
  const double v = p.max_violation(w);
  if (v > kActiveTol)
    throw std::invalid_argument(std::string(who) + ": point violates the constraints by " + std::to_string(v));
}

enum class Sign { Free, NonNeg, Zero };

// Columns of a multiplier system  sum_k col_k * lambda_k = rhs  with sign
// restrictions; `normalize` adds sum of the NonNeg entries = 1.
struct MultiplierSystem {
  int n = 0;
  std::vector<Vector> cols;
  std::vector<Sign> signs;

  int add(const Vector& c, Sign s) {
    cols.push_back(c);
    signs.push_back(s);
    return static_cast<int>(cols.size()) - 1;
  }

  lp::FeasibilityResult solve(const Vector& rhs, bool normalize) const {
    const int k = static_cast<int>(cols.size());
    lp::LpProblem q(std::max(k, 1));
    for (int i = 0; i < n; ++i) {
      Vector a = Vector::Zero(std::max(k, 1));
      for (int j = 0; j < k; ++j) a[j] = cols[j][i];
      q.add_row(a, lp::Relation::Equal, rhs[i]);
    }
    if (normalize) {
      Vector a = Vector::Zero(std::max(k, 1));
      for (int j = 0; j < k; ++j)
        if (signs[j] == Sign::NonNeg) a[j] = 1.0;
      q.add_row(a, lp::Relation::Equal, 1.0);
    }
    for (int j = 0; j < k; ++j) {
      if (signs[j] == Sign::NonNeg) q.lower[j] = 0.0;
      if (signs[j] == Sign::Zero) q.lower[j] = q.upper[j] = 0.0;
    }
    if (k == 0) q.lower[0] = q.upper[0] = 0.0;
    auto r = lp::feasible_point(q);
    if (r.feasible && k == 0) r.point = Vector(0);
    return r;
  }
};

inline Vector gradient_of(const PolyFunction& f, const Vector& w) {
  Vector g = Vector::Zero(w.size());
  f.add_grad_to(w, 1.0, g);
  return g;
}

// Active-set aware multiplier system of  grad F + J_c^T l + J_e^T m - nu_lo + nu_hi  over an Nlp.
// Column order: inequalities, equalities, lower bounds, upper bounds.
inline MultiplierSystem nlp_system(const Nlp& p, const Vector& w) {
  MultiplierSystem sys;
  sys.n = p.num_vars;
  for (const auto& c : p.ineq)
    sys.add(gradient_of(c.fn, w), c.fn.eval(w) >= -kActiveTol ? Sign::NonNeg : Sign::Zero);
  for (const auto& c : p.eq) sys.add(gradient_of(c.fn, w), Sign::Free);
  for (int j = 0; j < p.num_vars; ++j)
    sys.add(-Vector::Unit(p.num_vars, j),
            std::isfinite(p.lower[j]) && w[j] - p.lower[j] <= kActiveTol ? Sign::NonNeg : Sign::Zero);
  for (int j = 0; j < p.num_vars; ++j)
    sys.add(Vector::Unit(p.num_vars, j),
            std::isfinite(p.upper[j]) && p.upper[j] - w[j] <= kActiveTol ? Sign::NonNeg : Sign::Zero);
  return sys;
}

inline Multipliers unpack_nlp(const Nlp& p, const Vector& lam) {
  Multipliers m = Multipliers::zeros(p);
  int k = 0;
  for (int i = 0; i < p.num_ineq(); ++i) m.ineq[i] = lam[k++];
  for (int i = 0; i < p.num_eq(); ++i) m.eq[i] = lam[k++];
  for (int j = 0; j < p.num_vars; ++j) m.lower[j] = lam[k++];
  for (int j = 0; j < p.num_vars; ++j) m.upper[j] = lam[k++];
  return m;
}

// Sign and complementarity violation of Nlp multipliers at w.
inline double sign_residual(const Nlp& p, const Vector& w, const Multipliers& m) {
  double r = 0.0;
  for (int i = 0; i < p.num_ineq(); ++i) {
    r = std::max(r, -m.ineq[i]);
    r = std::max(r, std::abs(m.ineq[i] * std::min(0.0, p.ineq[i].fn.eval(w))));
  }
  for (int j = 0; j < p.num_vars; ++j) {
    r = std::max({r, -m.lower[j], -m.upper[j]});
    if (m.lower[j] != 0.0) r = std::max(r, std::isfinite(p.lower[j]) ? std::abs(m.lower[j] * (w[j] - p.lower[j])) : kInf);
    if (m.upper[j] != 0.0) r = std::max(r, std::isfinite(p.upper[j]) ? std::abs(m.upper[j] * (p.upper[j] - w[j])) : kInf);
  }
  return r;
}

}  // namespace detail

// ---------------------------------------------------------------------------
// KKT

/// Residual of the KKT system at w with multipliers m (objective weight 1).
inline double kkt_certificate_residual(const Nlp& p, const Vector& w, const Multipliers& m) {
  return std::max(lagrangian_gradient(p, w, m).lpNorm<Eigen::Infinity>(), detail::sign_residual(p, w, m));
}

/// Searches multipliers making w a KKT point; NotKkt carries the phase-1 gap.
inline Certificate check_kkt(const Nlp& p, const Vector& w) {
  detail::require_feasible(p, w, "check_kkt");
  const auto sys = detail::nlp_system(p, w);
  const auto r = sys.solve(-p.objective.grad(w), false);
  Certificate c;
  if (!r.feasible) {
    c.kind = CertificateKind::NotKkt;
    c.phase1_gap = r.phase1_infeasibility;
    return c;
  }
  c.multipliers = detail::unpack_nlp(p, r.point);
  c.residual = kkt_certificate_residual(p, w, c.multipliers);
  c.kind = c.residual <= kCertificateTol ? CertificateKind::KktMultipliers : CertificateKind::NotKkt;
  if (c.kind == CertificateKind::NotKkt) c.note = "multiplier LP feasible but residual above tolerance";
  return c;
}

// ---------------------------------------------------------------------------
// MFCQ

/// Residual of the abnormal (Fritz-John with zero objective weight) system;
/// a valid certificate also needs a nonzero multiplier, see abnormal_size.
inline double abnormal_residual(const Nlp& p, const Vector& w, const Multipliers& m) {
  return std::max(lagrangian_gradient(p, w, m, 0.0).lpNorm<Eigen::Infinity>(), detail::sign_residual(p, w, m));
}

inline double abnormal_size(const Multipliers& m) {
  return std::max({m.ineq.lpNorm<Eigen::Infinity>(), m.eq.lpNorm<Eigen::Infinity>(),
                   m.lower.lpNorm<Eigen::Infinity>(), m.upper.lpNorm<Eigen::Infinity>()});
}

/// MFCQ at a feasible point. When it holds, the certificate carries d with
/// J_e d = 0 and grad c_i^T d <= -margin on every active inequality (bounds
/// included). Otherwise a nonzero abnormal multiplier is returned.
inline Certificate check_mfcq(const Nlp& p, const Vector& w) {
  detail::require_feasible(p, w, "check_mfcq");
  const int n = p.num_vars, me = p.num_eq();
  const auto sys = detail::nlp_system(p, w);
  Certificate c;

  // Rank of the equality gradients.
  Matrix Je = p.eq_jacobian(w);
  if (me > 0) {
    Eigen::ColPivHouseholderQR<Matrix> qr(Je.transpose());
    const double scale = std::max(Je.cwiseAbs().maxCoeff(), std::numeric_limits<double>::min());
    qr.setThreshold(1e-8 * scale / std::max(1.0, qr.maxPivot()));
    if (qr.rank() < me) {
      // mu with J_e^T mu = 0, mu != 0.
      Eigen::FullPivLU<Matrix> lu(Je.transpose());
      lu.setThreshold(1e-8);
      Matrix K = lu.kernel();
      c.kind = CertificateKind::MfcqFailAbnormal;
      c.multipliers = Multipliers::zeros(p);
      if (K.cols() > 0 && K.col(0).norm() > 0) c.multipliers.eq = K.col(0) / K.col(0).lpNorm<Eigen::Infinity>();
      c.residual = abnormal_residual(p, w, c.multipliers);
      c.note = "equality gradients linearly dependent";
      return c;
    }
  }

  // max s  s.t.  J_e d = 0,  a_i^T d + s <= 0 (active a_i),  |d| <= 1,  s <= 1.
  lp::LpProblem q(n + 1);
  q.c[n] = -1.0;
  for (int j = 0; j < n; ++j) {
    q.lower[j] = -1.0;
    q.upper[j] = 1.0;
  }
  q.upper[n] = 1.0;
  for (int i = 0; i < me; ++i) {
    Vector a = Vector::Zero(n + 1);
    a.head(n) = Je.row(i).transpose();
    q.add_row(a, lp::Relation::Equal, 0.0);
  }
  std::vector<Vector> active;
  for (std::size_t k = 0; k < sys.cols.size(); ++k) {
    if (sys.signs[k] != detail::Sign::NonNeg) continue;
    active.push_back(sys.cols[k]);
    Vector a = Vector::Zero(n + 1);
    a.head(n) = sys.cols[k];
    a[n] = 1.0;
    q.add_row(a, lp::Relation::LessEqual, 0.0);
  }
  const auto s = lp::solve_lp(q);
  if (s.status == lp::LpStatus::Optimal && s.x[n] > 1e-8) {
    c.kind = CertificateKind::MfcqDirection;
    c.direction = s.x.head(n);
    c.margin = kInf;
    for (const auto& a : active) c.margin = std::min(c.margin, -a.dot(c.direction));
    if (active.empty()) {
      c.margin = 0.0;
      c.direction = Vector::Zero(n);
    }
    c.residual = me > 0 ? (Je * c.direction).lpNorm<Eigen::Infinity>() : 0.0;
    return c;
  }
  if (active.empty()) {
    // Only equalities with full rank: MFCQ holds with d = 0.
    c.kind = CertificateKind::MfcqDirection;
    c.direction = Vector::Zero(n);
    return c;
  }

  // Positive linear dependence: sum over active lambda = 1.
  const auto r = sys.solve(Vector::Zero(n), true);
  c.kind = CertificateKind::MfcqFailAbnormal;
  if (r.feasible) {
    c.multipliers = detail::unpack_nlp(p, r.point);
    c.residual = abnormal_residual(p, w, c.multipliers);
  } else {
    c.multipliers = Multipliers::zeros(p);
    c.residual = kInf;
    c.note = "direction LP optimum not positive but no abnormal multiplier found";
  }
  return c;
}

/// Abnormal multiplier of an MDP at a feasible point with z = y:
/// value-gap and dual-product rows weighted 1, g(x, y) rows by u, h(x, y) rows
/// by v, and the bound u >= 0 by -g(x, y); every other multiplier is zero.
inline Multipliers mdp_abnormal_witness(const Nlp& mdp, const Vector& w) {
  const Block u = mdp.require_block("u"), v = mdp.require_block("v");
  Multipliers m = Multipliers::zeros(mdp);
  for (int i = 0; i < mdp.num_ineq(); ++i) {
    const auto& c = mdp.ineq[i];
    if (c.kind == RowKind::ValueGap || c.kind == RowKind::DualProduct) m.ineq[i] = 1.0;
    if (c.kind == RowKind::LowerIneq) {
      m.ineq[i] = w[u.begin + c.index];
      m.lower[u.begin + c.index] = -c.fn.eval(w);
    }
  }
  for (int i = 0; i < mdp.num_eq(); ++i)
    if (mdp.eq[i].kind == RowKind::LowerEq) m.eq[i] = w[v.begin + mdp.eq[i].index];
  return m;
}

// ---------------------------------------------------------------------------
// S-stationarity of an MPCC over (x | y | u | v)

namespace detail {

struct MpccIndex {
  Block u;
  std::vector<int> omega_ineq, omega_eq, g, h, L;  // row positions in ineq / eq
};

inline MpccIndex mpcc_index(const Nlp& mpcc) {
  MpccIndex ix;
  ix.u = mpcc.require_block("u");
  mpcc.require_block("v");
  if (mpcc.block("z")) throw std::invalid_argument("check_s_stationary: expected an MPCC over (x, y, u, v)");
  for (int i = 0; i < mpcc.num_ineq(); ++i) {
    const auto k = mpcc.ineq[i].kind;
    if (k == RowKind::Omega) ix.omega_ineq.push_back(i);
    else if (k == RowKind::LowerIneq) ix.g.push_back(i);
  }
  for (int i = 0; i < mpcc.num_eq(); ++i) {
    const auto k = mpcc.eq[i].kind;
    if (k == RowKind::Omega) ix.omega_eq.push_back(i);
    else if (k == RowKind::LowerEq) ix.h.push_back(i);
    else if (k == RowKind::Stationarity) ix.L.push_back(i);
  }
  if (static_cast<int>(ix.g.size()) != ix.u.size)
    throw std::invalid_argument("check_s_stationary: u block does not match the lower-level rows");
  return ix;
}

// Multipliers of the Nlp that realize an S-multiplier tuple in
// lagrangian_gradient: complementarity rows get zero weight.
inline Multipliers as_nlp(const Nlp& mpcc, const MpccIndex& ix, const SMultipliers& s) {
  Multipliers m = Multipliers::zeros(mpcc);
  for (std::size_t k = 0; k < ix.omega_ineq.size(); ++k) m.ineq[ix.omega_ineq[k]] = s.omega_ineq[static_cast<int>(k)];
  for (std::size_t k = 0; k < ix.g.size(); ++k) m.ineq[ix.g[k]] = s.g[mpcc.ineq[ix.g[k]].index];
  for (std::size_t k = 0; k < ix.omega_eq.size(); ++k) m.eq[ix.omega_eq[k]] = s.omega_eq[static_cast<int>(k)];
  for (std::size_t k = 0; k < ix.h.size(); ++k) m.eq[ix.h[k]] = s.h[mpcc.eq[ix.h[k]].index];
  for (std::size_t k = 0; k < ix.L.size(); ++k) m.eq[ix.L[k]] = s.L[mpcc.eq[ix.L[k]].index];
  for (int i = 0; i < ix.u.size; ++i) m.lower[ix.u.begin + i] = s.u[i];
  return m;
}

}  // namespace detail

/// Index sets I_{0+}, I_{-0}, I_{00} at tolerance kActiveTol.
struct MpccIndexSets {
  std::vector<int> zero_plus, minus_zero, zero_zero;
};

inline MpccIndexSets mpcc_index_sets(const Nlp& mpcc, const Vector& w) {
  const auto ix = detail::mpcc_index(mpcc);
  MpccIndexSets s;
  for (int row : ix.g) {
    const int i = mpcc.ineq[row].index;
    const double gi = mpcc.ineq[row].fn.eval(w), ui = w[ix.u.begin + i];
    const bool g_zero = gi >= -kActiveTol, u_zero = ui <= kActiveTol;
    if (g_zero && u_zero) s.zero_zero.push_back(i);
    else if (g_zero) s.zero_plus.push_back(i);
    else s.minus_zero.push_back(i);
  }
  return s;
}

/// Residual of the S-stationarity system (Omega rows included) at w.
inline double s_stationarity_residual(const Nlp& mpcc, const Vector& w, const SMultipliers& s) {
  const auto ix = detail::mpcc_index(mpcc);
  const int p = ix.u.size;
  if (s.g.size() != p || s.u.size() != p || s.h.size() != static_cast<int>(ix.h.size()) ||
      s.L.size() != static_cast<int>(ix.L.size()) || s.omega_ineq.size() != static_cast<int>(ix.omega_ineq.size()) ||
      s.omega_eq.size() != static_cast<int>(ix.omega_eq.size()))
    throw std::invalid_argument("s_stationarity_residual: multiplier dimension mismatch");
  const Multipliers m = detail::as_nlp(mpcc, ix, s);
  double r = lagrangian_gradient(mpcc, w, m).lpNorm<Eigen::Infinity>();
  const auto sets = mpcc_index_sets(mpcc, w);
  for (int i : sets.minus_zero) r = std::max(r, std::abs(s.g[i]));
  for (int i : sets.zero_plus) r = std::max(r, std::abs(s.u[i]));
  for (int i : sets.zero_zero) r = std::max({r, -s.g[i], -s.u[i]});
  for (std::size_t k = 0; k < ix.omega_ineq.size(); ++k) {
    const double lam = s.omega_ineq[static_cast<int>(k)];
    r = std::max({r, -lam, std::abs(lam * std::min(0.0, mpcc.ineq[ix.omega_ineq[k]].fn.eval(w)))});
  }
  return r;
}

/// Searches S-stationarity multipliers at a feasible MPCC point.
inline Certificate check_s_stationary(const Nlp& mpcc, const Vector& w) {
  detail::require_feasible(mpcc, w, "check_s_stationary");
  const auto ix = detail::mpcc_index(mpcc);
  const auto sets = mpcc_index_sets(mpcc, w);
  const int p = ix.u.size, n = mpcc.num_vars;
  std::vector<detail::Sign> g_sign(p, detail::Sign::Free), u_sign(p, detail::Sign::Free);
  for (int i : sets.minus_zero) g_sign[i] = detail::Sign::Zero;
  for (int i : sets.zero_plus) u_sign[i] = detail::Sign::Zero;
  for (int i : sets.zero_zero) g_sign[i] = u_sign[i] = detail::Sign::NonNeg;

  detail::MultiplierSystem sys;
  sys.n = n;
  using detail::gradient_of;
  for (int row : ix.omega_ineq)
    sys.add(gradient_of(mpcc.ineq[row].fn, w),
            mpcc.ineq[row].fn.eval(w) >= -kActiveTol ? detail::Sign::NonNeg : detail::Sign::Zero);
  for (int row : ix.omega_eq) sys.add(gradient_of(mpcc.eq[row].fn, w), detail::Sign::Free);
  std::vector<int> g_col(p), u_col(p);
  for (int row : ix.g) {
    const int i = mpcc.ineq[row].index;
    g_col[i] = sys.add(gradient_of(mpcc.ineq[row].fn, w), g_sign[i]);
  }
  std::vector<int> h_col, L_col;
  for (int row : ix.h) h_col.push_back(sys.add(gradient_of(mpcc.eq[row].fn, w), detail::Sign::Free));
  for (int row : ix.L) L_col.push_back(sys.add(gradient_of(mpcc.eq[row].fn, w), detail::Sign::Free));
  for (int i = 0; i < p; ++i) u_col[i] = sys.add(-Vector::Unit(n, ix.u.begin + i), u_sign[i]);

  const auto r = sys.solve(-mpcc.objective.grad(w), false);
  Certificate c;
  if (!r.feasible) {
    c.kind = CertificateKind::NotKkt;
    c.phase1_gap = r.phase1_infeasibility;
    return c;
  }
  SMultipliers s;
  int k = 0;
  s.omega_ineq.resize(static_cast<int>(ix.omega_ineq.size()));
  for (int j = 0; j < s.omega_ineq.size(); ++j) s.omega_ineq[j] = r.point[k++];
  s.omega_eq.resize(static_cast<int>(ix.omega_eq.size()));
  for (int j = 0; j < s.omega_eq.size(); ++j) s.omega_eq[j] = r.point[k++];
  s.g = Vector::Zero(p);
  s.u = Vector::Zero(p);
  for (int i = 0; i < p; ++i) {
    s.g[i] = r.point[g_col[i]];
    s.u[i] = r.point[u_col[i]];
  }
  s.h = Vector::Zero(static_cast<int>(ix.h.size()));
  s.L = Vector::Zero(static_cast<int>(ix.L.size()));
  for (std::size_t j = 0; j < ix.h.size(); ++j) s.h[mpcc.eq[ix.h[j]].index] = r.point[h_col[j]];
  for (std::size_t j = 0; j < ix.L.size(); ++j) s.L[mpcc.eq[ix.L[j]].index] = r.point[L_col[j]];
  c.residual = s_stationarity_residual(mpcc, w, s);
  c.s_mult = std::move(s);
  c.kind = c.residual <= kCertificateTol ? CertificateKind::SStationary : CertificateKind::NotKkt;
  if (c.kind == CertificateKind::NotKkt) c.note = "multiplier LP feasible but residual above tolerance";
  return c;
}

/// Maps MDP KKT multipliers at (x, y, y, u, v) to S-stationarity multipliers
/// of the MPCC at (x, y, u, v):
///   lambda^g = eta^g - gamma u,  lambda^h = eta^h - gamma v,
///   lambda^u = eta^u + gamma g(x, y),  lambda^L = beta,
/// and re-verifies them from scratch.
inline Certificate check_multiplier_transfer(const Nlp& mdp, const Vector& mdp_point, const Certificate& mdp_kkt,
                                        const Nlp& mpcc) {
  if (mdp_kkt.kind != CertificateKind::KktMultipliers)
    throw std::invalid_argument("check_multiplier_transfer: input is not a KKT certificate");
  const Block x = mdp.require_block("x"), y = mdp.require_block("y"), z = mdp.require_block("z");
  const Block u = mdp.require_block("u"), v = mdp.require_block("v");
  if ((mdp_point.segment(y.begin, y.size) - mdp_point.segment(z.begin, z.size)).lpNorm<Eigen::Infinity>() > 1e-8)
    throw std::invalid_argument("check_multiplier_transfer: point does not have z = y");
  const Multipliers& m = mdp_kkt.multipliers;
  const auto ix = detail::mpcc_index(mpcc);
  Vector w(mpcc.num_vars);
  w << mdp_point.segment(x.begin, x.size), mdp_point.segment(y.begin, y.size), mdp_point.segment(u.begin, u.size),
      mdp_point.segment(v.begin, v.size);

  double gamma = 0.0;
  SMultipliers s;
  s.g = Vector::Zero(u.size);
  s.u = Vector::Zero(u.size);
  s.h = Vector::Zero(v.size);
  s.L = Vector::Zero(y.size);
  std::vector<double> om_in, om_eq;
  for (int i = 0; i < mdp.num_ineq(); ++i)
    if (mdp.ineq[i].kind == RowKind::DualProduct) gamma = m.ineq[i];
  Vector gy = Vector::Zero(u.size);
  for (int i = 0; i < mdp.num_ineq(); ++i) {
    const auto& c = mdp.ineq[i];
    if (c.kind == RowKind::Omega) om_in.push_back(m.ineq[i]);
    if (c.kind == RowKind::LowerIneq) {
      s.g[c.index] = m.ineq[i];
      gy[c.index] = c.fn.eval(mdp_point);
    }
  }
  for (int i = 0; i < mdp.num_eq(); ++i) {
    const auto& c = mdp.eq[i];
    if (c.kind == RowKind::Omega) om_eq.push_back(m.eq[i]);
    if (c.kind == RowKind::LowerEq) s.h[c.index] = m.eq[i];
    if (c.kind == RowKind::Stationarity) s.L[c.index] = m.eq[i];
  }
  for (int i = 0; i < u.size; ++i) {
    s.g[i] -= gamma * mdp_point[u.begin + i];
    s.u[i] = m.lower[u.begin + i] + gamma * gy[i];
  }
  for (int j = 0; j < v.size; ++j) s.h[j] -= gamma * mdp_point[v.begin + j];
  s.omega_ineq = Eigen::Map<Vector>(om_in.data(), static_cast<int>(om_in.size()));
  s.omega_eq = Eigen::Map<Vector>(om_eq.data(), static_cast<int>(om_eq.size()));
  (void)ix;

  Certificate c;
  c.residual = s_stationarity_residual(mpcc, w, s);
  c.s_mult = std::move(s);
  c.kind = c.residual <= kCertificateTol ? CertificateKind::SStationary : CertificateKind::NotKkt;
  if (c.kind == CertificateKind::NotKkt) c.note = "mapped multipliers fail the S-stationarity system";
  return c;
}

}  // namespace bilevel

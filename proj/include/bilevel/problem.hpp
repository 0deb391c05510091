#pragma once

// Single-level standard form  min F(w)  s.t.  c(w) <= 0,  e(w) = 0,  lo <= w <= hi
// over named variable blocks. Every reformulation builder produces one.

#include "bilevel/poly.hpp"

#include <cmath>
#include <limits>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

namespace bilevel {

inline constexpr double kInf = std::numeric_limits<double>::infinity();

/// Role of a row inside a reformulation; diagnostics use it to locate the
/// lower-level constraints, stationarity rows and duality rows.
enum class RowKind {
  Generic,
  Omega,            // upper-level constraint (x, y) in Omega
  LowerIneq,        // g_i(x, y) <= 0
  LowerEq,          // h_j(x, y) = 0
  Stationarity,     // grad_y L(x, y, u, v) = 0 or grad_z L(x, z, u, v) = 0
  Complementarity,  // u^T g(x, y) = 0, or -u^T g(x, y) <= t when relaxed
  WolfeGap,         // f(x, y) - L(x, z, u, v) <= t
  ValueGap,         // f(x, y) - f(x, z) <= t
  DualProduct,      // -(u^T g(x, z) + v^T h(x, z)) <= t
};

inline const char* to_string(RowKind k) {
  switch (k) {
    case RowKind::Generic: return "generic";
    case RowKind::Omega: return "omega";
    case RowKind::LowerIneq: return "lower_ineq";
    case RowKind::LowerEq: return "lower_eq";
    case RowKind::Stationarity: return "stationarity";
    case RowKind::Complementarity: return "complementarity";
    case RowKind::WolfeGap: return "wolfe_gap";
    case RowKind::ValueGap: return "value_gap";
    case RowKind::DualProduct: return "dual_product";
  }
  return "?";
}

struct Constraint {
  PolyFunction fn;
  RowKind kind = RowKind::Generic;
  int index = 0;  // position within its kind (e.g. which g_i)
};

struct Block {
  std::string name;
  int begin = 0;
  int size = 0;
  int end() const { return begin + size; }
};

struct Nlp {
  int num_vars = 0;
  std::vector<Block> blocks;
  PolyFunction objective;
  std::vector<Constraint> ineq;  // c(w) <= 0
  std::vector<Constraint> eq;    // e(w) = 0
  Vector lower;
  Vector upper;

  std::optional<Block> block(const std::string& name) const {
    for (const auto& b : blocks)
      if (b.name == name) return b;
    return std::nullopt;
  }
  Block require_block(const std::string& name) const {
    auto b = block(name);
    if (!b) throw std::invalid_argument("Nlp: no block named '" + name + "'");
    return *b;
  }

  int num_ineq() const { return static_cast<int>(ineq.size()); }
  int num_eq() const { return static_cast<int>(eq.size()); }

  Vector ineq_values(const Vector& w) const {
    Vector v(num_ineq());
    for (int i = 0; i < num_ineq(); ++i) v[i] = ineq[i].fn.eval(w);
    return v;
  }
  Vector eq_values(const Vector& w) const {
    Vector v(num_eq());
    for (int i = 0; i < num_eq(); ++i) v[i] = eq[i].fn.eval(w);
    return v;
  }
  Matrix ineq_jacobian(const Vector& w) const { return jacobian(ineq, w); }
  Matrix eq_jacobian(const Vector& w) const { return jacobian(eq, w); }

  /// Largest violation of rows and bounds.
  double max_violation(const Vector& w) const {
    double v = 0.0;
    for (const auto& c : ineq) v = std::max(v, c.fn.eval(w));
    for (const auto& c : eq) v = std::max(v, std::abs(c.fn.eval(w)));
    for (int j = 0; j < num_vars; ++j) v = std::max({v, lower[j] - w[j], w[j] - upper[j]});
    return v;
  }

  /// Largest violation with each row divided by max(1, sum of |terms|) and
  /// each bound by max(1, |bound|). Meaningful where eval rounding exceeds
  /// absolute tolerances.
  double scaled_violation(const Vector& w) const {
    double v = 0.0;
    for (const auto& c : ineq) v = std::max(v, c.fn.eval(w) / std::max(1.0, c.fn.term_magnitude(w)));
    for (const auto& c : eq) v = std::max(v, std::abs(c.fn.eval(w)) / std::max(1.0, c.fn.term_magnitude(w)));
    for (int j = 0; j < num_vars; ++j) {
      if (std::isfinite(lower[j])) v = std::max(v, (lower[j] - w[j]) / std::max(1.0, std::abs(lower[j])));
      if (std::isfinite(upper[j])) v = std::max(v, (w[j] - upper[j]) / std::max(1.0, std::abs(upper[j])));
    }
    return v;
  }

  /// l1 measure used by the SQP merit function.
  double l1_violation(const Vector& w) const {
    double v = 0.0;
    for (const auto& c : ineq) v += std::max(0.0, c.fn.eval(w));
    for (const auto& c : eq) v += std::abs(c.fn.eval(w));
    return v;
  }

  /// Checks the structural invariants; throws std::invalid_argument.
  void validate() const {
    if (lower.size() != num_vars || upper.size() != num_vars)
      throw std::invalid_argument("Nlp: bound vectors do not match num_vars");
    if (objective.num_vars() != num_vars) throw std::invalid_argument("Nlp: objective over wrong variable count");
    for (const auto* rows : {&ineq, &eq})
      for (const auto& c : *rows)
        if (c.fn.num_vars() != num_vars) throw std::invalid_argument("Nlp: row over wrong variable count");
    if (!blocks.empty()) {
      int next = 0;
      for (const auto& b : blocks) {
        if (b.begin != next || b.size < 0) throw std::invalid_argument("Nlp: blocks do not partition variables");
        next = b.end();
      }
      if (next != num_vars) throw std::invalid_argument("Nlp: blocks do not cover all variables");
    }
    if (auto u = block("u"))
      for (int j = u->begin; j < u->end(); ++j)
        if (lower[j] != 0.0) throw std::invalid_argument("Nlp: u-block variables need lower bound 0");
  }

 private:
  Matrix jacobian(const std::vector<Constraint>& rows, const Vector& w) const {
    Matrix J = Matrix::Zero(static_cast<int>(rows.size()), num_vars);
    Vector g(num_vars);
    for (int i = 0; i < static_cast<int>(rows.size()); ++i) {
      g.setZero();
      rows[i].fn.add_grad_to(w, 1.0, g);
      J.row(i) = g.transpose();
    }
    return J;
  }
};

/// Multipliers in the convention
///   grad F + J_c^T ineq + J_e^T eq - lower + upper = 0,  ineq, lower, upper >= 0.
struct Multipliers {
  Vector ineq;
  Vector eq;
  Vector lower;
  Vector upper;

  static Multipliers zeros(const Nlp& p) {
    return {Vector::Zero(p.num_ineq()), Vector::Zero(p.num_eq()), Vector::Zero(p.num_vars),
            Vector::Zero(p.num_vars)};
  }
};

/// Gradient of the Lagrangian with objective weight `obj_weight` (0 gives the
/// abnormal / Fritz-John system).
inline Vector lagrangian_gradient(const Nlp& p, const Vector& w, const Multipliers& m, double obj_weight = 1.0) {
  Vector g = Vector::Zero(p.num_vars);
  if (obj_weight != 0.0) p.objective.add_grad_to(w, obj_weight, g);
  for (int i = 0; i < p.num_ineq(); ++i)
    if (m.ineq[i] != 0.0) p.ineq[i].fn.add_grad_to(w, m.ineq[i], g);
  for (int i = 0; i < p.num_eq(); ++i)
    if (m.eq[i] != 0.0) p.eq[i].fn.add_grad_to(w, m.eq[i], g);
  g -= m.lower;
  g += m.upper;
  return g;
}

/// Hessian of the Lagrangian (bounds contribute nothing).
inline Matrix lagrangian_hessian(const Nlp& p, const Vector& w, const Multipliers& m) {
  Matrix H = Matrix::Zero(p.num_vars, p.num_vars);
  p.objective.add_hess_to(w, 1.0, H);
  for (int i = 0; i < p.num_ineq(); ++i)
    if (m.ineq[i] != 0.0) p.ineq[i].fn.add_hess_to(w, m.ineq[i], H);
  for (int i = 0; i < p.num_eq(); ++i)
    if (m.eq[i] != 0.0) p.eq[i].fn.add_hess_to(w, m.eq[i], H);
  return H;
}

/// KKT residual components, each an infinity norm.
struct KktResidual {
  double stationarity = 0.0;
  double feasibility = 0.0;
  double complementarity = 0.0;
  double sign = 0.0;
  double max() const { return std::max({stationarity, feasibility, complementarity, sign}); }
};

inline KktResidual kkt_residual(const Nlp& p, const Vector& w, const Multipliers& m, double obj_weight = 1.0) {
  if (w.size() != p.num_vars || m.ineq.size() != p.num_ineq() || m.eq.size() != p.num_eq() ||
      m.lower.size() != p.num_vars || m.upper.size() != p.num_vars)
    throw std::invalid_argument("kkt_residual: dimension mismatch");
  KktResidual r;
  r.stationarity = lagrangian_gradient(p, w, m, obj_weight).lpNorm<Eigen::Infinity>();
  r.feasibility = p.max_violation(w);
  for (int i = 0; i < p.num_ineq(); ++i) {
    const double c = p.ineq[i].fn.eval(w);
    r.complementarity = std::max(r.complementarity, std::abs(m.ineq[i] * c));
    r.sign = std::max(r.sign, -m.ineq[i]);
  }
  for (int j = 0; j < p.num_vars; ++j) {
    const double gap_lo = std::isfinite(p.lower[j]) ? w[j] - p.lower[j] : kInf;
    const double gap_hi = std::isfinite(p.upper[j]) ? p.upper[j] - w[j] : kInf;
    r.complementarity = std::max(r.complementarity, std::isfinite(gap_lo) ? std::abs(m.lower[j] * gap_lo)
                                                                          : std::abs(m.lower[j]));
    r.complementarity = std::max(r.complementarity, std::isfinite(gap_hi) ? std::abs(m.upper[j] * gap_hi)
                                                                          : std::abs(m.upper[j]));
    r.sign = std::max({r.sign, -m.lower[j], -m.upper[j]});
  }
  return r;
}

}  // namespace bilevel

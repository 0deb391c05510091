#pragma once

// Single-level reformulations of a BilevelProgram:
//   MPCC over (x | y | u | v), WDP and MDP over (x | y | z | u | v),
// their t-relaxations, and the Mond-Weir dual of a standalone Nlp.

#include "bilevel/model.hpp"
#include "bilevel/problem.hpp"

#include <cctype>
#include <cmath>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

namespace bilevel {

enum class RelaxationScheme { MPCC_T, WDP_T, MDP1, MDP2, MDP3 };

inline const char* to_string(RelaxationScheme s) {
  switch (s) {
    case RelaxationScheme::MPCC_T: return "MPCC_T";
    case RelaxationScheme::WDP_T: return "WDP_T";
    case RelaxationScheme::MDP1: return "MDP1";
    case RelaxationScheme::MDP2: return "MDP2";
    case RelaxationScheme::MDP3: return "MDP3";
  }
  return "?";
}

/// Accepts "mpcc", "wdp", "mdp1".. case-insensitively, with or without "_t".
inline std::optional<RelaxationScheme> parse_scheme(std::string s) {
  for (auto& c : s) c = static_cast<char>(std::tolower(static_cast<unsigned char>(c)));
  if (s == "mpcc" || s == "mpcc_t" || s == "mpcc(t)") return RelaxationScheme::MPCC_T;
  if (s == "wdp" || s == "wdp_t" || s == "wdp(t)") return RelaxationScheme::WDP_T;
  if (s == "mdp1") return RelaxationScheme::MDP1;
  if (s == "mdp2") return RelaxationScheme::MDP2;
  if (s == "mdp3") return RelaxationScheme::MDP3;
  return std::nullopt;
}

inline const std::vector<RelaxationScheme>& all_schemes() {
  static const std::vector<RelaxationScheme> s{RelaxationScheme::MDP1, RelaxationScheme::MDP2,
                                               RelaxationScheme::MDP3, RelaxationScheme::WDP_T,
                                               RelaxationScheme::MPCC_T};
  return s;
}

namespace detail {

// Variable layout shared by the builders. with_z = false gives (x|y|u|v).
struct Layout {
  int n, m, p, q;
  bool with_z;
  int x0() const { return 0; }
  int y0() const { return n; }
  int z0() const { return with_z ? n + m : -1; }
  int u0() const { return n + m + (with_z ? m : 0); }
  int v0() const { return u0() + p; }
  int total() const { return v0() + q; }

  std::vector<Block> blocks() const {
    std::vector<Block> b{{"x", 0, n}, {"y", n, m}};
    if (with_z) b.push_back({"z", z0(), m});
    b.push_back({"u", u0(), p});
    b.push_back({"v", v0(), q});
    return b;
  }
  // Embeds a function of (x, y) with its y argument placed at `second`.
  PolyFunction embed(const PolyFunction& fn, int second) const {
    std::vector<int> map(n + m);
    for (int i = 0; i < n; ++i) map[i] = i;
    for (int j = 0; j < m; ++j) map[n + j] = second + j;
    return fn.remap(total(), map);
  }
  PolyFunction var(int index) const { return PolyFunction::variable(total(), index); }
};

inline Nlp empty_nlp(const Layout& L) {
  Nlp nlp;
  nlp.num_vars = L.total();
  nlp.blocks = L.blocks();
  nlp.lower = Vector::Constant(L.total(), -kInf);
  nlp.upper = Vector::Constant(L.total(), kInf);
  for (int i = 0; i < L.p; ++i) nlp.lower[L.u0() + i] = 0.0;
  return nlp;
}

inline void add_omega(const BilevelProgram& bp, const Layout& L, Nlp& nlp) {
  for (int i = 0; i < static_cast<int>(bp.omega_ineq.size()); ++i)
    nlp.ineq.push_back({L.embed(bp.omega_ineq[i], L.y0()), RowKind::Omega, i});
  for (int i = 0; i < static_cast<int>(bp.omega_eq.size()); ++i)
    nlp.eq.push_back({L.embed(bp.omega_eq[i], L.y0()), RowKind::Omega, i});
}

inline void add_lower_feasibility(const BilevelProgram& bp, const Layout& L, Nlp& nlp) {
  for (int i = 0; i < bp.p(); ++i) nlp.ineq.push_back({L.embed(bp.g[i], L.y0()), RowKind::LowerIneq, i});
  for (int j = 0; j < bp.q(); ++j) nlp.eq.push_back({L.embed(bp.h[j], L.y0()), RowKind::LowerEq, j});
}

// u^T g(x, at) + v^T h(x, at)
inline PolyFunction dual_product(const BilevelProgram& bp, const Layout& L, int at) {
  PolyFunction s(L.total());
  for (int i = 0; i < bp.p(); ++i) s += L.var(L.u0() + i) * L.embed(bp.g[i], at);
  for (int j = 0; j < bp.q(); ++j) s += L.var(L.v0() + j) * L.embed(bp.h[j], at);
  return s;
}

// grad_at L(x, at, u, v) = 0, one row per lower variable.
inline void add_stationarity(const BilevelProgram& bp, const Layout& L, int at, Nlp& nlp) {
  const PolyFunction lag = L.embed(bp.f, at) + dual_product(bp, L, at);
  for (int k = 0; k < L.m; ++k) nlp.eq.push_back({lag.derivative(at + k), RowKind::Stationarity, k});
}

inline void shift_rows(std::vector<Constraint>& rows, RowKind kind, double t) {
  for (auto& c : rows)
    if (c.kind == kind) c.fn = c.fn - PolyFunction::constant(c.fn.num_vars(), t);
}

inline Nlp mpcc(const BilevelProgram& bp, std::optional<double> relax) {
  bp.validate();
  const Layout L{bp.n, bp.m, bp.p(), bp.q(), false};
  Nlp nlp = empty_nlp(L);
  nlp.objective = L.embed(bp.F, L.y0());
  add_omega(bp, L, nlp);
  add_lower_feasibility(bp, L, nlp);
  PolyFunction comp(L.total());
  for (int i = 0; i < bp.p(); ++i) comp += L.var(L.u0() + i) * L.embed(bp.g[i], L.y0());
  if (relax) nlp.ineq.push_back({-comp - PolyFunction::constant(L.total(), *relax), RowKind::Complementarity, 0});
  else nlp.eq.push_back({comp, RowKind::Complementarity, 0});
  add_stationarity(bp, L, L.y0(), nlp);
  nlp.validate();
  return nlp;
}

// Shared WDP/MDP skeleton: Omega, g(x,y) <= 0, h(x,y) = 0, then the gap rows.
inline Nlp dual_skeleton(const BilevelProgram& bp, Layout& L) {
  bp.validate();
  L = Layout{bp.n, bp.m, bp.p(), bp.q(), true};
  Nlp nlp = empty_nlp(L);
  nlp.objective = L.embed(bp.F, L.y0());
  add_omega(bp, L, nlp);
  add_lower_feasibility(bp, L, nlp);
  return nlp;
}

}  // namespace detail

/// MPCC: lower level replaced by its KKT system with the aggregate
/// complementarity row u^T g(x, y) = 0.
inline Nlp build_mpcc(const BilevelProgram& bp) { return detail::mpcc(bp, std::nullopt); }

/// WDP: f(x,y) - f(x,z) - u^T g(x,z) - v^T h(x,z) <= 0 plus grad_z L = 0.
inline Nlp build_wdp(const BilevelProgram& bp) {
  detail::Layout L{};
  Nlp nlp = detail::dual_skeleton(bp, L);
  const PolyFunction gap = L.embed(bp.f, L.y0()) - L.embed(bp.f, L.z0()) - detail::dual_product(bp, L, L.z0());
  nlp.ineq.push_back({gap, RowKind::WolfeGap, 0});
  detail::add_stationarity(bp, L, L.z0(), nlp);
  nlp.validate();
  return nlp;
}

/// MDP: f(x,y) - f(x,z) <= 0, -(u^T g(x,z) + v^T h(x,z)) <= 0, grad_z L = 0.
inline Nlp build_mdp(const BilevelProgram& bp) {
  detail::Layout L{};
  Nlp nlp = detail::dual_skeleton(bp, L);
  nlp.ineq.push_back({L.embed(bp.f, L.y0()) - L.embed(bp.f, L.z0()), RowKind::ValueGap, 0});
  nlp.ineq.push_back({-detail::dual_product(bp, L, L.z0()), RowKind::DualProduct, 0});
  detail::add_stationarity(bp, L, L.z0(), nlp);
  nlp.validate();
  return nlp;
}

inline Nlp build_relaxed(const BilevelProgram& bp, RelaxationScheme scheme, double t) {
  if (!(t >= 0.0)) throw std::invalid_argument("build_relaxed: t must be >= 0");
  switch (scheme) {
    case RelaxationScheme::MPCC_T: return detail::mpcc(bp, t);
    case RelaxationScheme::WDP_T: {
      Nlp nlp = build_wdp(bp);
      detail::shift_rows(nlp.ineq, RowKind::WolfeGap, t);
      return nlp;
    }
    case RelaxationScheme::MDP1:
    case RelaxationScheme::MDP2:
    case RelaxationScheme::MDP3: {
      Nlp nlp = build_mdp(bp);
      if (scheme != RelaxationScheme::MDP2) detail::shift_rows(nlp.ineq, RowKind::ValueGap, t);
      if (scheme != RelaxationScheme::MDP1) detail::shift_rows(nlp.ineq, RowKind::DualProduct, t);
      return nlp;
    }
  }
  throw std::invalid_argument("build_relaxed: unknown scheme");
}

/// Unrelaxed problem that a scheme relaxes: MPCC, WDP or MDP.
inline Nlp build_base(const BilevelProgram& bp, RelaxationScheme scheme) {
  switch (scheme) {
    case RelaxationScheme::MPCC_T: return build_mpcc(bp);
    case RelaxationScheme::WDP_T: return build_wdp(bp);
    default: return build_mdp(bp);
  }
}

/// Mond-Weir dual of  min f(z) s.t. g(z) <= 0, h(z) = 0  over (z | u | v),
/// written as  min -f(z) s.t. grad_z L = 0, -(u^T g + v^T h) <= 0, u >= 0.
/// Finite variable bounds of `primal` are treated as extra rows of g
/// (lower bounds first, then upper bounds), after its own inequality rows.
inline Nlp build_mond_weir_dual(const Nlp& primal) {
  primal.validate();
  if (primal.block("u") || primal.block("v") || primal.block("z"))
    throw std::invalid_argument("build_mond_weir_dual: primal already has dual blocks");
  const int N = primal.num_vars;
  std::vector<PolyFunction> g, h;
  for (const auto& c : primal.ineq) g.push_back(c.fn);
  for (int j = 0; j < N; ++j)
    if (std::isfinite(primal.lower[j]))
      g.push_back(PolyFunction::constant(N, primal.lower[j]) - PolyFunction::variable(N, j));
  for (int j = 0; j < N; ++j)
    if (std::isfinite(primal.upper[j]))
      g.push_back(PolyFunction::variable(N, j) - PolyFunction::constant(N, primal.upper[j]));
  for (const auto& c : primal.eq) h.push_back(c.fn);

  const int p = static_cast<int>(g.size()), q = static_cast<int>(h.size()), total = N + p + q;
  std::vector<int> map(N);
  for (int j = 0; j < N; ++j) map[j] = j;
  auto lift = [&](const PolyFunction& fn) { return fn.remap(total, map); };

  Nlp d;
  d.num_vars = total;
  d.blocks = {{"z", 0, N}, {"u", N, p}, {"v", N + p, q}};
  d.lower = Vector::Constant(total, -kInf);
  d.upper = Vector::Constant(total, kInf);
  for (int i = 0; i < p; ++i) d.lower[N + i] = 0.0;
  d.objective = -lift(primal.objective);
  PolyFunction prod(total);
  for (int i = 0; i < p; ++i) prod += PolyFunction::variable(total, N + i) * lift(g[i]);
  for (int j = 0; j < q; ++j) prod += PolyFunction::variable(total, N + p + j) * lift(h[j]);
  const PolyFunction lag = lift(primal.objective) + prod;
  for (int k = 0; k < N; ++k) d.eq.push_back({lag.derivative(k), RowKind::Stationarity, k});
  d.ineq.push_back({-prod, RowKind::DualProduct, 0});
  d.validate();
  return d;
}

}  // namespace bilevel

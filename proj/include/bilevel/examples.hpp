#pragma once

// Four small worked bilevel programs with known solutions, used as a fixture
// corpus by the tests, the CLI `examples` command and the acceptance binary.

#include "bilevel/model.hpp"

#include <string>
#include <vector>

namespace bilevel {

struct ExampleCase {
  std::string name;
  BilevelProgram bp;
  Vector optimum;    // (x, y)
  double value = 0;  // F at the optimum
  Vector mdp_point;  // (x, y, z, u) for the MDP, when documented
  Vector mpcc_point; // (x, y, u), when documented
};

namespace detail {

inline PolyFunction mono(double c, std::vector<std::pair<int, int>> powers) {
  return PolyFunction(2, {{c, std::move(powers)}});
}
inline PolyFunction cst(double c) { return PolyFunction::constant(2, c); }

}  // namespace detail

/// min -x - y  s.t.  x <= 1,  y in argmin { y^3 + y : y >= x }.
inline ExampleCase example_cubic_wolfe_gap() {
  using detail::mono;
  ExampleCase e;
  e.name = "cubic_wolfe_gap";
  auto& bp = e.bp;
  bp.n = 1;
  bp.m = 1;
  bp.F = mono(-1, {{0, 1}}) + mono(-1, {{1, 1}});
  bp.omega_ineq = {mono(1, {{0, 1}}) - detail::cst(1)};
  bp.f = mono(1, {{1, 3}}) + mono(1, {{1, 1}});
  bp.g = {mono(1, {{0, 1}}) - mono(1, {{1, 1}})};
  e.optimum = Vector::Ones(2);
  e.value = -2;
  e.mdp_point = (Vector(4) << 1, 1, 1, 4).finished();
  return e;
}

/// min 2x - y  s.t.  x >= 0,  y in argmin { y^3 : y >= x }.
inline ExampleCase example_cubic_degenerate() {
  using detail::mono;
  ExampleCase e;
  e.name = "cubic_degenerate";
  auto& bp = e.bp;
  bp.n = 1;
  bp.m = 1;
  bp.F = mono(2, {{0, 1}}) + mono(-1, {{1, 1}});
  bp.omega_ineq = {mono(-1, {{0, 1}})};
  bp.f = mono(1, {{1, 3}});
  bp.g = {mono(1, {{0, 1}}) - mono(1, {{1, 1}})};
  e.optimum = Vector::Zero(2);
  e.value = 0;
  e.mdp_point = Vector::Zero(4);
  return e;
}

/// min (x + y)^2  s.t.  -1 <= x <= 1,  y in argmin { y^3 - 3y : y >= x }.
inline ExampleCase example_mfcq_cubic() {
  using detail::mono;
  ExampleCase e;
  e.name = "mfcq_cubic";
  auto& bp = e.bp;
  bp.n = 1;
  bp.m = 1;
  bp.F = mono(1, {{0, 2}}) + mono(2, {{0, 1}, {1, 1}}) + mono(1, {{1, 2}});
  bp.omega_ineq = {mono(-1, {{0, 1}}) - detail::cst(1), mono(1, {{0, 1}}) - detail::cst(1)};
  bp.f = mono(1, {{1, 3}}) + mono(-3, {{1, 1}});
  bp.g = {mono(1, {{0, 1}}) - mono(1, {{1, 1}})};
  e.optimum = (Vector(2) << -1, 1).finished();
  e.value = 0;
  e.mdp_point = (Vector(4) << -1, 1, -2, 9).finished();
  return e;
}

/// min x^2 - (2y + 1)^2  s.t.  x <= 0,
/// y in argmin { (y - 1)^2 : 3x - y - 3 <= 0, x + y - 1 <= 0 }.
inline ExampleCase example_quadratic_two_rows() {
  using detail::mono;
  ExampleCase e;
  e.name = "quadratic_two_rows";
  auto& bp = e.bp;
  bp.n = 1;
  bp.m = 1;
  bp.F = mono(1, {{0, 2}}) + mono(-4, {{1, 2}}) + mono(-4, {{1, 1}}) - detail::cst(1);
  bp.omega_ineq = {mono(1, {{0, 1}})};
  bp.f = mono(1, {{1, 2}}) + mono(-2, {{1, 1}}) + detail::cst(1);
  bp.g = {mono(3, {{0, 1}}) - mono(1, {{1, 1}}) - detail::cst(3), mono(1, {{0, 1}}) + mono(1, {{1, 1}}) - detail::cst(1)};
  e.optimum = (Vector(2) << 0, 1).finished();
  e.value = -9;
  e.mdp_point = (Vector(5) << 0, 1, 1, 0, 0).finished();
  e.mpcc_point = (Vector(4) << 0, 1, 0, 0).finished();
  return e;
}

inline std::vector<ExampleCase> example_corpus() {
  return {example_cubic_wolfe_gap(), example_cubic_degenerate(), example_mfcq_cubic(), example_quadratic_two_rows()};
}

}  // namespace bilevel

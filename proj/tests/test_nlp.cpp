#include "bilevel/nlp.hpp"

#include <gtest/gtest.h>

#include <random>

using namespace bilevel;

namespace {

PolyFunction var(int n, int i) { return PolyFunction::variable(n, i); }
PolyFunction cst(int n, double c) { return PolyFunction::constant(n, c); }

Nlp make_nlp(int n) {
  Nlp p;
  p.num_vars = n;
  p.objective = cst(n, 0.0);
  p.lower = Vector::Constant(n, -kInf);
  p.upper = Vector::Constant(n, kInf);
  return p;
}

Vector vec(std::initializer_list<double> v) {
  Vector out(static_cast<int>(v.size()));
  int i = 0;
  for (double d : v) out[i++] = d;
  return out;
}

// Wolfe-dual reformulation of min -x-y s.t. x <= 1, y in argmin{y^3+y : y >= x}
// over (x, y, z, u).
Nlp wolfe_example() {
  const int n = 4;
  Nlp p = make_nlp(n);
  const auto x = var(n, 0), y = var(n, 1), z = var(n, 2), u = var(n, 3);
  p.blocks = {{"x", 0, 1}, {"y", 1, 1}, {"z", 2, 1}, {"u", 3, 1}};
  p.objective = -1.0 * x - y;
  p.ineq.push_back({x - cst(n, 1.0), RowKind::Omega, 0});
  p.ineq.push_back({x - y, RowKind::LowerIneq, 0});
  p.ineq.push_back({y * y * y + y - z * z * z - z + u * (z - x), RowKind::WolfeGap, 0});
  p.eq.push_back({3.0 * z * z + cst(n, 1.0) - u, RowKind::Stationarity, 0});
  p.lower[3] = 0.0;
  return p;
}

// Mond-Weir reformulation of min 2x-y s.t. x >= 0, y in argmin{y^3 : y >= x}.
Nlp mond_weir_cubic_example() {
  const int n = 4;
  Nlp p = make_nlp(n);
  const auto x = var(n, 0), y = var(n, 1), z = var(n, 2), u = var(n, 3);
  p.blocks = {{"x", 0, 1}, {"y", 1, 1}, {"z", 2, 1}, {"u", 3, 1}};
  p.objective = 2.0 * x - y;
  p.ineq.push_back({-1.0 * x, RowKind::Omega, 0});
  p.ineq.push_back({x - y, RowKind::LowerIneq, 0});
  p.ineq.push_back({y * y * y - z * z * z, RowKind::ValueGap, 0});
  p.ineq.push_back({u * (z - x), RowKind::DualProduct, 0});
  p.eq.push_back({3.0 * z * z - u, RowKind::Stationarity, 0});
  p.lower[3] = 0.0;
  return p;
}

void expect_merit_descent(const NlpSolution& s) {
  for (const auto& st : s.trace) EXPECT_LE(st.merit_after, st.merit_before + 1e-12 * (1 + std::abs(st.merit_before)));
}

}  // namespace

TEST(Nlp, ConvexQuadraticWithBound) {
  Nlp p = make_nlp(1);
  const auto x = var(1, 0);
  p.objective = (x - cst(1, 1.0)) * (x - cst(1, 1.0));
  p.ineq.push_back({x, RowKind::Generic, 0});
  const auto s = solve_nlp(p, vec({-5.0}), 1e-10);
  ASSERT_EQ(s.status, NlpStatus::KktPoint);
  EXPECT_NEAR(s.point[0], 0.0, 1e-9);
  EXPECT_NEAR(s.multipliers.ineq[0], 2.0, 1e-9);
  expect_merit_descent(s);
}

TEST(Nlp, TolFloorIsRecorded) {
  Nlp p = make_nlp(1);
  p.objective = var(1, 0) * var(1, 0);
  const auto s = solve_nlp(p, vec({3.0}), 1e-16);
  EXPECT_EQ(s.requested_tol, 1e-16);
  EXPECT_EQ(s.effective_tol, 1e-10);
  EXPECT_EQ(s.status, NlpStatus::KktPoint);
}

TEST(Nlp, NonconvexEqualityConstrained) {
  // min x0 + x1 on the unit circle -> (-1/sqrt2, -1/sqrt2)
  Nlp p = make_nlp(2);
  const auto a = var(2, 0), b = var(2, 1);
  p.objective = a + b;
  p.eq.push_back({a * a + b * b - cst(2, 1.0), RowKind::Generic, 0});
  const auto s = solve_nlp(p, vec({0.3, -0.9}), 1e-10);
  ASSERT_EQ(s.status, NlpStatus::KktPoint);
  EXPECT_NEAR(s.point[0], -std::sqrt(0.5), 1e-8);
  EXPECT_NEAR(s.point[1], -std::sqrt(0.5), 1e-8);
  expect_merit_descent(s);
}

TEST(Nlp, WolfeReformulationIsUnbounded) {
  const Nlp p = wolfe_example();
  const double k = 2.0;
  const auto s = solve_nlp(p, vec({0.0, k, -k, 3 * k * k + 1}), 1e-10);
  EXPECT_EQ(s.status, NlpStatus::Unbounded);
  EXPECT_LT(s.objective, -1e6);
  // Cubic rows reach 1e18 here; their violation is judged relative to term size.
  EXPECT_LE(p.scaled_violation(s.point), 1e-3);
  EXPECT_LE(p.ineq[0].fn.eval(s.point), 1e-9);
  EXPECT_LE(p.ineq[1].fn.eval(s.point), 1e-9);
  expect_merit_descent(s);
}

TEST(Nlp, MondWeirCubicFromLowerLevelWarmStart) {
  // Warm start: x = 0, y = z = 0 (lower solution), u = 0.
  const Nlp p = mond_weir_cubic_example();
  const auto s = solve_nlp(p, vec({0.0, 0.0, 0.0, 0.0}), 1e-10);
  EXPECT_NEAR(s.objective, 0.0, 1e-4);
  EXPECT_LE((s.point - Vector::Zero(4)).lpNorm<Eigen::Infinity>(), 1e-3);
}

TEST(Nlp, KktPointsReverify) {
  std::mt19937_64 rng(5);
  std::uniform_real_distribution<double> U(-1.0, 1.0);
  for (int trial = 0; trial < 20; ++trial) {
    const int n = 3;
    Nlp p = make_nlp(n);
    PolyFunction obj = cst(n, 0.0);
    for (int i = 0; i < n; ++i) obj = obj + var(n, i) * var(n, i) + U(rng) * var(n, i);
    obj = obj + 0.5 * var(n, 0) * var(n, 0) * var(n, 1) * var(n, 1);
    p.objective = obj;
    for (int r = 0; r < 2; ++r) {
      PolyFunction row = cst(n, -0.5);
      for (int i = 0; i < n; ++i) row = row + U(rng) * var(n, i);
      p.ineq.push_back({row, RowKind::Generic, r});
    }
    p.lower = Vector::Constant(n, -2.0);
    p.upper = Vector::Constant(n, 2.0);
    Vector start(n);
    for (int i = 0; i < n; ++i) start[i] = 2 * U(rng);
    const auto s = solve_nlp(p, start, 1e-9);
    ASSERT_EQ(s.status, NlpStatus::KktPoint) << "trial " << trial;
    EXPECT_LE(kkt_residual(p, s.point, s.multipliers).max(), 1e-9);
    expect_merit_descent(s);
  }
}

TEST(Nlp, MatchesQpOracleOnRandomConvexQps) {
  std::mt19937_64 rng(17);
  std::uniform_real_distribution<double> U(-1.0, 1.0);
  for (int trial = 0; trial < 30; ++trial) {
    const int n = 2 + trial % 4, m = 1 + trial % 4;
    Matrix M(n, n);
    for (int i = 0; i < n; ++i)
      for (int j = 0; j < n; ++j) M(i, j) = U(rng);
    const Matrix H = M * M.transpose() + 0.2 * Matrix::Identity(n, n);
    Vector g(n);
    for (int j = 0; j < n; ++j) g[j] = 2 * U(rng);
    Matrix A(m, n);
    Vector b(m);
    for (int i = 0; i < m; ++i) {
      for (int j = 0; j < n; ++j) A(i, j) = U(rng);
      b[i] = 0.3 * std::abs(U(rng));
    }
    qp::QpProblem q{H, g, A, b, Matrix(0, n), Vector(0), Vector::Constant(n, -kInf), Vector::Constant(n, kInf)};
    const auto ref = qp::solve_qp(q);
    ASSERT_EQ(ref.status, qp::QpStatus::Optimal);

    Nlp p = make_nlp(n);
    std::vector<PolyFunction::Term> terms;
    for (int i = 0; i < n; ++i) {
      terms.push_back({g[i], {{i, 1}}});
      terms.push_back({0.5 * H(i, i), {{i, 2}}});
      for (int j = i + 1; j < n; ++j) terms.push_back({H(i, j), {{i, 1}, {j, 1}}});
    }
    p.objective = PolyFunction(n, terms);
    for (int i = 0; i < m; ++i) p.ineq.push_back({PolyFunction::affine(A.row(i).transpose(), -b[i]), RowKind::Generic, i});
    Vector start(n);
    for (int j = 0; j < n; ++j) start[j] = 3 * U(rng);
    const auto s = solve_nlp(p, start, 1e-10);
    ASSERT_EQ(s.status, NlpStatus::KktPoint) << "trial " << trial;
    EXPECT_NEAR(s.objective, 0.5 * ref.x.dot(H * ref.x) + g.dot(ref.x), 1e-6) << "trial " << trial;
    expect_merit_descent(s);
  }
}

TEST(Nlp, KktResidualPerturbation) {
  Nlp p = make_nlp(1);
  const auto x = var(1, 0);
  p.objective = (x - cst(1, 1.0)) * (x - cst(1, 1.0));
  p.ineq.push_back({3.0 * x, RowKind::Generic, 0});
  Multipliers m = Multipliers::zeros(p);
  m.ineq[0] = 2.0 / 3.0;
  EXPECT_LE(kkt_residual(p, vec({0.0}), m).max(), 1e-12);
  m.ineq[0] += 0.1;
  EXPECT_GE(kkt_residual(p, vec({0.0}), m).stationarity, 0.09 * 3.0);
}

TEST(Nlp, RejectsWrongStartLength) {
  Nlp p = make_nlp(2);
  EXPECT_THROW(solve_nlp(p, vec({1.0})), std::invalid_argument);
}

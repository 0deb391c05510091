#include "bilevel/poly.hpp"

#include <gtest/gtest.h>

#include <random>

using bilevel::compose_lagrangian;
using bilevel::Matrix;
using bilevel::PolyFunction;
using bilevel::Vector;

namespace {

Vector vec(std::initializer_list<double> v) {
  Vector out(static_cast<int>(v.size()));
  int i = 0;
  for (double d : v) out[i++] = d;
  return out;
}

// y^3 + y in one variable
PolyFunction cubic_plus_linear() { return PolyFunction(1, {{1.0, {{0, 3}}}, {1.0, {{0, 1}}}}); }

PolyFunction random_poly(std::mt19937_64& rng, int n) {
  std::uniform_int_distribution<int> nterms(1, 6), var(0, n - 1), deg(0, 4);
  std::uniform_real_distribution<double> coef(-2.0, 2.0);
  std::vector<PolyFunction::Term> terms;
  const int k = nterms(rng);
  for (int t = 0; t < k; ++t) {
    PolyFunction::Term term{coef(rng), {}};
    int remaining = deg(rng);
    std::map<int, int> pw;
    while (remaining-- > 0) pw[var(rng)] += 1;
    for (auto [v, e] : pw) term.powers.emplace_back(v, e);
    terms.push_back(term);
  }
  return PolyFunction(n, terms);
}

}  // namespace

TEST(Poly, EvalExamples) {
  EXPECT_DOUBLE_EQ(cubic_plus_linear().eval(vec({1.0})), 2.0);
  // (x + y)^2 at its optimum (-1, 1)
  const PolyFunction s = PolyFunction::variable(2, 0) + PolyFunction::variable(2, 1);
  EXPECT_DOUBLE_EQ((s * s).eval(vec({-1.0, 1.0})), 0.0);
  const PolyFunction f(1, {{1.0, {{0, 3}}}, {-3.0, {{0, 1}}}});
  EXPECT_DOUBLE_EQ(f.eval(vec({1.0})), -2.0);
}

TEST(Poly, GradExamples) {
  EXPECT_DOUBLE_EQ(cubic_plus_linear().grad(vec({1.0}))[0], 4.0);
  const PolyFunction f(1, {{1.0, {{0, 3}}}, {-3.0, {{0, 1}}}});
  EXPECT_DOUBLE_EQ(f.grad(vec({-2.0}))[0], 9.0);
  EXPECT_TRUE(PolyFunction::constant(3, 5.0).grad(vec({1, 2, 3})).isZero());
}

TEST(Poly, HessExamples) {
  const PolyFunction cube(1, {{1.0, {{0, 3}}}});
  EXPECT_DOUBLE_EQ(cube.hess(vec({-2.0}))(0, 0), -12.0);
  const PolyFunction aff = PolyFunction::affine(vec({1.0, -2.0, 3.0}), 4.0);
  EXPECT_TRUE(aff.hess(vec({1, 1, 1})).isZero());
  const PolyFunction s = PolyFunction::variable(2, 0) + PolyFunction::variable(2, 1);
  Matrix expected(2, 2);
  expected << 2, 2, 2, 2;
  EXPECT_TRUE((s * s).hess(vec({0.3, -0.7})).isApprox(expected));
}

TEST(Poly, DimensionMismatchThrows) {
  EXPECT_THROW(cubic_plus_linear().eval(vec({1.0, 2.0})), std::invalid_argument);
  EXPECT_THROW(cubic_plus_linear().grad(Vector()), std::invalid_argument);
  EXPECT_THROW(cubic_plus_linear().hess(vec({1.0, 2.0})), std::invalid_argument);
}

TEST(Poly, CanonicalForm) {
  const PolyFunction p(2, {{1.0, {{1, 1}, {0, 2}}}, {2.0, {{0, 2}, {1, 1}}}, {3.0, {}}, {-3.0, {}}});
  ASSERT_EQ(p.terms().size(), 1u);
  EXPECT_DOUBLE_EQ(p.terms()[0].coef, 3.0);
  EXPECT_EQ(p.terms()[0].powers, (bilevel::Monomial{{0, 2}, {1, 1}}));
}

TEST(Poly, RejectsBadTerms) {
  EXPECT_THROW(PolyFunction(1, {{1.0, {{0, 5}}}}), std::invalid_argument);
  EXPECT_THROW(PolyFunction(1, {{1.0, {{1, 1}}}}), std::invalid_argument);
  EXPECT_THROW(PolyFunction(1, {{std::nan(""), {{0, 1}}}}), std::invalid_argument);
  const PolyFunction sq(1, {{1.0, {{0, 3}}}});
  EXPECT_THROW(sq * sq, std::invalid_argument);
}

TEST(Poly, ComposeLagrangian) {
  // variables (x, y, z); f = y^3 + y, g = [x - z]
  const int n = 3;
  const PolyFunction f(n, {{1.0, {{1, 3}}}, {1.0, {{1, 1}}}});
  const PolyFunction g = PolyFunction::variable(n, 0) - PolyFunction::variable(n, 2);
  const PolyFunction L = compose_lagrangian(f, {g}, {}, vec({4.0}), Vector());
  const PolyFunction expected(n, {{1.0, {{1, 3}}}, {1.0, {{1, 1}}}, {4.0, {{0, 1}}}, {-4.0, {{2, 1}}}});
  EXPECT_EQ(L, expected);
  EXPECT_EQ(compose_lagrangian(f, {g}, {}, vec({0.0}), Vector()), f);
  EXPECT_THROW(compose_lagrangian(f, {g}, {}, vec({1.0, 2.0}), Vector()), std::invalid_argument);
}

TEST(Poly, LagrangianStationarityAtLowerSolution) {
  // Lower level min y^3 + y s.t. x - y <= 0 over (x, y); with u = 3y^2 + 1 at y = x
  // the y-derivative of the Lagrangian vanishes.
  const int n = 2;
  const PolyFunction f(n, {{1.0, {{1, 3}}}, {1.0, {{1, 1}}}});
  const PolyFunction g = PolyFunction::variable(n, 0) - PolyFunction::variable(n, 1);
  for (double x : {-1.5, 0.0, 0.7, 2.0}) {
    const double u = 3 * x * x + 1;
    const PolyFunction L = compose_lagrangian(f, {g}, {}, vec({u}), Vector());
    EXPECT_NEAR(L.grad(vec({x, x}))[1], 0.0, 1e-12);
  }
}

TEST(Poly, DerivativeRemapFix) {
  const PolyFunction p(2, {{2.0, {{0, 2}, {1, 1}}}, {1.0, {{1, 3}}}});
  EXPECT_EQ(p.derivative(0), PolyFunction(2, {{4.0, {{0, 1}, {1, 1}}}}));
  const std::vector<int> map{2, 0};
  const PolyFunction r = p.remap(3, map);
  EXPECT_DOUBLE_EQ(r.eval(vec({5.0, 0.0, 2.0})), p.eval(vec({2.0, 5.0})));
  const std::vector<int> fixed{0};
  const PolyFunction q = p.fix(fixed, vec({3.0}));
  EXPECT_DOUBLE_EQ(q.eval(vec({100.0, 2.0})), p.eval(vec({3.0, 2.0})));
  EXPECT_EQ(q.degree_in(0, 1), 0);
}

TEST(Poly, FiniteDifferenceAgreement) {
  std::mt19937_64 rng(20240601);
  std::uniform_real_distribution<double> pt(-1.5, 1.5);
  const double h = 1e-5;
  for (int trial = 0; trial < 200; ++trial) {
    const int n = 1 + trial % 5;
    const PolyFunction f = random_poly(rng, n);
    Vector x(n);
    for (int i = 0; i < n; ++i) x[i] = pt(rng);
    const Vector g = f.grad(x);
    const Matrix H = f.hess(x);
    Vector fd_g(n);
    Matrix fd_H(n, n);
    for (int i = 0; i < n; ++i) {
      Vector xp = x, xm = x;
      xp[i] += h;
      xm[i] -= h;
      fd_g[i] = (f.eval(xp) - f.eval(xm)) / (2 * h);
      fd_H.col(i) = (f.grad(xp) - f.grad(xm)) / (2 * h);
    }
    EXPECT_LE((g - fd_g).lpNorm<Eigen::Infinity>(), 1e-6 * (1 + g.lpNorm<Eigen::Infinity>())) << "trial " << trial;
    EXPECT_LE((H - fd_H).lpNorm<Eigen::Infinity>(), 1e-6 * (1 + H.lpNorm<Eigen::Infinity>())) << "trial " << trial;
    EXPECT_TRUE(H.isApprox(H.transpose()));
  }
}

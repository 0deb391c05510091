#include "bilevel/diagnostics.hpp"
#include "bilevel/examples.hpp"
#include "bilevel/gen.hpp"
#include "bilevel/reformulate.hpp"

#include <gtest/gtest.h>

using namespace bilevel;

namespace {

const Constraint& row_of(const std::vector<Constraint>& rows, RowKind kind, int index = 0) {
  for (const auto& c : rows)
    if (c.kind == kind && c.index == index) return c;
  throw std::runtime_error(std::string("missing row ") + to_string(kind));
}

Vector grad(const Constraint& c, const Vector& w) { return c.fn.grad(w); }

// x feasible for Omega, (y, u) from the lower level; nullopt when the lower level fails.
std::optional<std::pair<Vector, LowerSolution>> bilevel_point(const LinearBilevel& lin) {
  lp::LpProblem q(lin.n());
  for (int i = 0; i < lin.l(); ++i) q.add_row(lin.A1.row(i).transpose(), lp::Relation::LessEqual, lin.b1[i]);
  const auto fx = lp::feasible_point(q);
  if (!fx.feasible) return std::nullopt;
  const auto low = lower_solve(to_general(lin), fx.point);
  if (low.status != LowerStatus::Optimal) return std::nullopt;
  return std::make_pair(fx.point, low);
}

}  // namespace

TEST(Infeasibility, ZeroAtBilevelFeasiblePoint) {
  int checked = 0;
  for (std::uint64_t seed = 1; seed <= 15; ++seed) {
    const auto lin = gen_linear(2, 3, 3, 3, 0.5, seed);
    const auto pt = bilevel_point(lin);
    if (!pt) continue;
    ++checked;
    const auto r = infeasibility(lin, pt->first, pt->second.y);
    EXPECT_LE(r.total, 1e-9) << "seed " << seed;
    EXPECT_FALSE(r.value_infinite);
  }
  EXPECT_GT(checked, 5);
}

TEST(Infeasibility, OnlyGapFiresWhenFollowerIsSuboptimal) {
  // follower minimizes y on [0, 10]; y = 0.25 is feasible but off by 0.25
  LinearBilevel lin;
  lin.c1 = Vector::Zero(1);
  lin.c2 = Vector::Zero(1);
  lin.A1 = Matrix::Zero(0, 1);
  lin.b1 = Vector(0);
  lin.d2 = Vector::Ones(1);
  lin.A2 = Matrix::Zero(0, 1);
  lin.B2 = Matrix::Zero(0, 1);
  lin.b2 = Vector(0);
  lin.bl = Vector::Zero(1);
  lin.bu = Vector::Constant(1, 10.0);
  const auto r = infeasibility(lin, Vector::Zero(1), Vector::Constant(1, 0.25));
  EXPECT_EQ(r.upper_violation, 0.0);
  EXPECT_EQ(r.lower_feasibility_violation, 0.0);
  EXPECT_EQ(r.bound_violation, 0.0);
  EXPECT_NEAR(r.optimality_gap, 0.25, 1e-12);
  EXPECT_NEAR(r.total, 0.25, 1e-12);
}

TEST(Infeasibility, MatchesTermByTermRecomputation) {
  for (std::uint64_t seed = 1; seed <= 10; ++seed) {
    const auto lin = gen_linear(3, 2, 4, 3, 0.6, seed);
    RandomStream rs(seed, 7);
    Vector x(3), y(4);
    for (int j = 0; j < 3; ++j) x[j] = rs.uniform(-2, 2);
    for (int j = 0; j < 4; ++j) y[j] = rs.uniform(-12, 12);
    const auto r = infeasibility(lin, x, y);
    double up = 0, low = 0, bu = 0, bl = 0;
    for (int i = 0; i < lin.l(); ++i) up += std::pow(std::max(0.0, lin.A1.row(i).dot(x) - lin.b1[i]), 2);
    for (int i = 0; i < lin.p(); ++i)
      low += std::pow(std::max(0.0, lin.A2.row(i).dot(x) + lin.B2.row(i).dot(y) - lin.b2[i]), 2);
    for (int j = 0; j < 4; ++j) {
      bu += std::pow(std::max(0.0, y[j] - 10), 2);
      bl += std::pow(std::max(0.0, -10 - y[j]), 2);
    }
    EXPECT_NEAR(r.upper_violation, std::sqrt(up), 1e-12);
    EXPECT_NEAR(r.lower_feasibility_violation, std::sqrt(low), 1e-12);
    EXPECT_NEAR(r.bound_violation, std::sqrt(bu) + std::sqrt(bl), 1e-12);
    const double V = value_function(lin, x);
    if (std::isfinite(V)) {
      EXPECT_NEAR(r.optimality_gap, std::abs(lin.d2.dot(y) - V), 1e-12);
      EXPECT_NEAR(r.total, r.upper_violation + r.lower_feasibility_violation + r.bound_violation + r.optimality_gap,
                  1e-12);
    } else {
      EXPECT_TRUE(r.value_infinite);
      EXPECT_EQ(r.total, kInf);
    }
  }
}

TEST(Mfcq, HoldsForMondWeirOfCubicExample) {
  const auto e = example_mfcq_cubic();
  const auto mdp = build_mdp(e.bp);
  const Vector& w = e.mdp_point;
  const auto c = check_mfcq(mdp, w);
  ASSERT_EQ(c.kind, CertificateKind::MfcqDirection);
  EXPECT_GT(c.margin, 1e-8);
  EXPECT_LE(c.residual, 1e-8);

  const Vector a1 = grad(row_of(mdp.eq, RowKind::Stationarity), w);
  const Vector b1 = grad(row_of(mdp.ineq, RowKind::ValueGap), w);
  const Vector b2 = grad(row_of(mdp.ineq, RowKind::Omega, 0), w);
  EXPECT_EQ(a1, (Vector(4) << 0, 0, -12, -1).finished());
  EXPECT_EQ(b1, (Vector(4) << 0, 0, -9, 0).finished());
  EXPECT_EQ(b2, (Vector(4) << -1, 0, 0, 0).finished());
  const Vector d = (Vector(4) << 1, 0, 1, -12).finished();
  EXPECT_LE(std::abs(d.dot(a1)), 1e-10);
  EXPECT_LE(d.dot(b1), -8.9);
  EXPECT_LE(d.dot(b2), -0.9);
}

TEST(Mfcq, VacuousWithoutConstraints) {
  Nlp p;
  p.num_vars = 2;
  p.blocks = {{"x", 0, 2}};
  p.objective = PolyFunction::variable(2, 0);
  p.lower = Vector::Constant(2, -kInf);
  p.upper = Vector::Constant(2, kInf);
  const auto c = check_mfcq(p, Vector::Zero(2));
  EXPECT_EQ(c.kind, CertificateKind::MfcqDirection);
  EXPECT_EQ(c.direction, Vector::Zero(2));
}

TEST(Mfcq, DependentEqualitiesFail) {
  Nlp p;
  p.num_vars = 2;
  p.blocks = {{"x", 0, 2}};
  p.objective = PolyFunction(2);
  p.lower = Vector::Constant(2, -kInf);
  p.upper = Vector::Constant(2, kInf);
  const auto x0 = PolyFunction::variable(2, 0);
  p.eq = {{x0, RowKind::Omega, 0}, {x0 * 2.0, RowKind::Omega, 1}};
  const auto c = check_mfcq(p, Vector::Zero(2));
  ASSERT_EQ(c.kind, CertificateKind::MfcqFailAbnormal);
  EXPECT_LE(c.residual, 1e-8);
  EXPECT_GT(abnormal_size(c.multipliers), 0.5);
}

TEST(Mfcq, MondWeirFailsWhenCopiesCoincide) {
  for (const auto& e : example_corpus()) {
    const auto mdp = build_mdp(e.bp);
    const Vector& w = e.mdp_point;
    const int n = e.bp.n, m = e.bp.m;
    if ((w.segment(n, m) - w.segment(n + m, m)).norm() > 0) continue;
    const auto c = check_mfcq(mdp, w);
    EXPECT_EQ(c.kind, CertificateKind::MfcqFailAbnormal) << e.name;
    EXPECT_LE(c.residual, 1e-8) << e.name;
    const auto wit = mdp_abnormal_witness(mdp, w);
    EXPECT_LE(abnormal_residual(mdp, w, wit), 1e-8) << e.name;
    EXPECT_GE(abnormal_size(wit), 1.0);
  }
}

TEST(Mfcq, WitnessAndMpccFailureOnRandomInstances) {
  int checked = 0;
  for (std::uint64_t seed = 1; seed <= 25; ++seed) {
    const auto lin = gen_linear(2, 3, 3, 3, 0.5, seed);
    const auto pt = bilevel_point(lin);
    if (!pt) continue;
    ++checked;
    const auto bp = to_general(lin);
    const auto& [x, low] = *pt;
    Vector wm(2 + 3 + bp.p());
    wm << x, low.y, low.u;
    const auto mpcc = build_mpcc(bp);
    const auto c = check_mfcq(mpcc, wm);
    EXPECT_EQ(c.kind, CertificateKind::MfcqFailAbnormal) << "seed " << seed;
    EXPECT_LE(c.residual, 1e-8);

    const auto mdp = build_mdp(bp);
    Vector wd(2 + 3 + 3 + bp.p());
    wd << x, low.y, low.y, low.u;
    const auto wit = mdp_abnormal_witness(mdp, wd);
    EXPECT_LE(abnormal_residual(mdp, wd, wit), 1e-8) << "seed " << seed;
  }
  EXPECT_GT(checked, 10);
}

TEST(Mfcq, RejectsInfeasiblePoint) {
  const auto e = example_mfcq_cubic();
  EXPECT_THROW(check_mfcq(build_mdp(e.bp), Vector::Constant(4, 5.0)), std::invalid_argument);
}

TEST(SStationarity, TwoRowExampleAtOrigin) {
  const auto e = example_quadratic_two_rows();
  const auto mpcc = build_mpcc(e.bp);
  const auto c = check_s_stationary(mpcc, e.mpcc_point);
  ASSERT_EQ(c.kind, CertificateKind::SStationary);
  ASSERT_TRUE(c.s_mult);
  EXPECT_LE(c.residual, 1e-7);
  // I_{-0} = {0}, I_{00} = {1}
  const auto sets = mpcc_index_sets(mpcc, e.mpcc_point);
  EXPECT_EQ(sets.minus_zero, std::vector<int>{0});
  EXPECT_EQ(sets.zero_zero, std::vector<int>{1});
  EXPECT_NEAR(c.s_mult->g[0], 0.0, 1e-9);
  EXPECT_GE(c.s_mult->g[1], -1e-9);
  EXPECT_GE(c.s_mult->u[1], -1e-9);
  EXPECT_LE(s_stationarity_residual(mpcc, e.mpcc_point, *c.s_mult), 1e-7);
}

TEST(SStationarity, FlippedObjectiveIsNotStationary) {
  auto e = example_quadratic_two_rows();
  e.bp.F = e.bp.F * -1.0;
  const auto c = check_s_stationary(build_mpcc(e.bp), e.mpcc_point);
  EXPECT_EQ(c.kind, CertificateKind::NotKkt);
  EXPECT_GT(c.phase1_gap, 1e-6);
}

TEST(SStationarity, ZeroMultipliersWhenObjectiveIsFlat) {
  auto e = example_quadratic_two_rows();
  e.bp.F = PolyFunction(2);
  const auto mpcc = build_mpcc(e.bp);
  const auto c = check_s_stationary(mpcc, e.mpcc_point);
  ASSERT_EQ(c.kind, CertificateKind::SStationary);
  SMultipliers zero = *c.s_mult;
  for (Vector* v : {&zero.omega_ineq, &zero.omega_eq, &zero.g, &zero.h, &zero.u, &zero.L}) v->setZero();
  EXPECT_EQ(s_stationarity_residual(mpcc, e.mpcc_point, zero), 0.0);
}

TEST(Kkt, MondWeirOfTwoRowExampleIsNotKkt) {
  const auto e = example_quadratic_two_rows();
  const auto c = check_kkt(build_mdp(e.bp), e.mdp_point);
  EXPECT_EQ(c.kind, CertificateKind::NotKkt);
  EXPECT_GE(c.phase1_gap, 1.0);
}

TEST(Kkt, WolfeKktPointIsMondWeirKkt) {
  const auto e = example_cubic_wolfe_gap();
  const auto wdp = build_wdp(e.bp);
  const auto cw = check_kkt(wdp, e.mdp_point);
  ASSERT_EQ(cw.kind, CertificateKind::KktMultipliers);
  EXPECT_LE(kkt_certificate_residual(wdp, e.mdp_point, cw.multipliers), 1e-7);

  // alpha = 1/4 on the Wolfe row and 2 on x <= 1 is one valid choice
  Multipliers m = Multipliers::zeros(wdp);
  for (int i = 0; i < wdp.num_ineq(); ++i) {
    if (wdp.ineq[i].kind == RowKind::WolfeGap) m.ineq[i] = 0.25;
    if (wdp.ineq[i].kind == RowKind::Omega) m.ineq[i] = 2.0;
  }
  EXPECT_LE(kkt_certificate_residual(wdp, e.mdp_point, m), 1e-12);

  const auto mdp = build_mdp(e.bp);
  const auto cm = check_kkt(mdp, e.mdp_point);
  ASSERT_EQ(cm.kind, CertificateKind::KktMultipliers);
  EXPECT_LE(cm.residual, 1e-7);
}

TEST(Kkt, AgreesWithSolverOutput) {
  const auto e = example_cubic_wolfe_gap();
  const auto mdp = build_mdp(e.bp);
  const auto s = solve_nlp(mdp, e.mdp_point + Vector::Constant(4, 0.05), 1e-9);
  ASSERT_EQ(s.status, NlpStatus::KktPoint);
  const auto c = check_kkt(mdp, s.point);
  EXPECT_EQ(c.kind, CertificateKind::KktMultipliers);
  EXPECT_LE(kkt_certificate_residual(mdp, s.point, s.multipliers), 1e-6);
}

TEST(Transfer, MondWeirKktMapsToSStationary) {
  const auto e = example_cubic_wolfe_gap();
  const auto mdp = build_mdp(e.bp);
  const auto kkt = check_kkt(mdp, e.mdp_point);
  ASSERT_EQ(kkt.kind, CertificateKind::KktMultipliers);
  const auto s = check_multiplier_transfer(mdp, e.mdp_point, kkt, build_mpcc(e.bp));
  EXPECT_EQ(s.kind, CertificateKind::SStationary) << s.residual;
  EXPECT_LE(s.residual, 1e-7);
}

TEST(Transfer, ZeroGammaLeavesMultipliersUnchanged) {
  const auto e = example_cubic_wolfe_gap();
  const auto mdp = build_mdp(e.bp);
  auto kkt = check_kkt(mdp, e.mdp_point);
  ASSERT_EQ(kkt.kind, CertificateKind::KktMultipliers);
  int gi = -1, dp = -1;
  for (int i = 0; i < mdp.num_ineq(); ++i) {
    if (mdp.ineq[i].kind == RowKind::LowerIneq) gi = i;
    if (mdp.ineq[i].kind == RowKind::DualProduct) dp = i;
  }
  kkt.multipliers.ineq[dp] = 0.0;
  const auto s = check_multiplier_transfer(mdp, e.mdp_point, kkt, build_mpcc(e.bp));
  EXPECT_EQ(s.s_mult->g[0], kkt.multipliers.ineq[gi]);
  EXPECT_EQ(s.s_mult->u[0], kkt.multipliers.lower[3]);
}

TEST(Transfer, RequiresCoincidingCopies) {
  const auto e = example_mfcq_cubic();
  const auto mdp = build_mdp(e.bp);
  Certificate fake;
  fake.kind = CertificateKind::KktMultipliers;
  fake.multipliers = Multipliers::zeros(mdp);
  EXPECT_THROW(check_multiplier_transfer(mdp, e.mdp_point, fake, build_mpcc(e.bp)), std::invalid_argument);
}

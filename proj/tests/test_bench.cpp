#include "bilevel/bench.hpp"
#include "bilevel/examples.hpp"

#include <gtest/gtest.h>

#include <sstream>

using namespace bilevel;

namespace {

BenchRow row(int index, RelaxationScheme s, double obj, double inf) {
  BenchRow r;
  r.index = index;
  r.dims = {2, 3, 3, 3};
  r.scheme = s;
  r.objective = obj;
  r.infeasibility = inf;
  r.time = 1.0;
  return r;
}

const SchemeSummary& of(const std::vector<SchemeSummary>& sum, RelaxationScheme s) {
  for (const auto& x : sum)
    if (x.scheme == s) return x;
  throw std::runtime_error("scheme missing");
}

}  // namespace

TEST(Bench, SummaryMatchesHandCount) {
  using S = RelaxationScheme;
  // instance 1: MDP1 best, MPCC within obj_tol, WDP feasible but worse
  // instance 2: only WDP feasible
  // instance 3: nobody feasible
  const std::vector<BenchRow> rows = {
      row(1, S::MDP1, -3.0, 1e-9), row(1, S::WDP_T, -2.0, 1e-9), row(1, S::MPCC_T, -3.0 + 5e-5, 1e-4),
      row(2, S::MDP1, -9.0, 0.5),  row(2, S::WDP_T, 4.0, 1e-5),  row(2, S::MPCC_T, -9.0, 2e-3),
      row(3, S::MDP1, 0.0, kInf),  row(3, S::WDP_T, 0.0, 1.0),   row(3, S::MPCC_T, 0.0, 1e-3),
  };
  const auto sum = summarize(rows);
  ASSERT_EQ(sum.size(), 3u);
  EXPECT_EQ(of(sum, S::MDP1).feasible, 1);
  EXPECT_EQ(of(sum, S::MDP1).dominant, 1);
  EXPECT_EQ(of(sum, S::WDP_T).feasible, 2);
  EXPECT_EQ(of(sum, S::WDP_T).dominant, 1);
  EXPECT_EQ(of(sum, S::MPCC_T).feasible, 1);
  EXPECT_EQ(of(sum, S::MPCC_T).dominant, 1);
  EXPECT_EQ(of(sum, S::MDP1).instances, 3);
  EXPECT_DOUBLE_EQ(of(sum, S::MDP1).avg_time, 1.0);
}

TEST(Bench, SingleSchemeDominantEqualsFeasible) {
  std::vector<BenchRow> rows;
  for (int i = 1; i <= 6; ++i) rows.push_back(row(i, RelaxationScheme::MDP2, i, i % 2 ? 1e-8 : 1.0));
  const auto sum = summarize(rows);
  ASSERT_EQ(sum.size(), 1u);
  EXPECT_EQ(sum[0].feasible, 3);
  EXPECT_EQ(sum[0].dominant, 3);
}

TEST(Bench, InfeasibleSchemeNeverDominates) {
  std::vector<BenchRow> rows;
  for (int i = 1; i <= 4; ++i) {
    rows.push_back(row(i, RelaxationScheme::MDP1, 100.0, 1e-9));
    rows.push_back(row(i, RelaxationScheme::MDP3, -100.0, 0.1));
  }
  const auto sum = summarize(rows);
  EXPECT_EQ(of(sum, RelaxationScheme::MDP3).dominant, 0);
  EXPECT_EQ(of(sum, RelaxationScheme::MDP1).dominant, 4);
}

TEST(Bench, SuiteRowsAreCompleteAndOrdered) {
  BenchConfig cfg;
  cfg.dims = {{2, 3, 3, 3}, {1, 1, 2, 2}};
  cfg.count = 3;
  cfg.schemes = {RelaxationScheme::MDP1, RelaxationScheme::MPCC_T};
  const auto rows = run_suite(cfg);
  ASSERT_EQ(rows.size(), 2u * 3u * 2u);
  for (std::size_t k = 0; k < rows.size(); ++k) {
    EXPECT_EQ(rows[k].group, static_cast<int>(k / 6));
    EXPECT_EQ(rows[k].index, static_cast<int>(k % 6) / 2 + 1);
    EXPECT_EQ(rows[k].scheme, cfg.schemes[k % 2]);
  }
  for (const auto& s : summarize(rows)) EXPECT_LE(s.dominant, s.feasible);
}

TEST(Bench, WorkerCountDoesNotChangeResults) {
  BenchConfig cfg;
  cfg.dims = {{2, 3, 3, 3}};
  cfg.count = 4;
  cfg.schemes = {RelaxationScheme::MDP2, RelaxationScheme::WDP_T};
  const auto a = run_suite(cfg);
  cfg.jobs = 3;
  const auto b = run_suite(cfg);
  ASSERT_EQ(a.size(), b.size());
  for (std::size_t k = 0; k < a.size(); ++k) {
    EXPECT_EQ(a[k].seed, b[k].seed);
    EXPECT_EQ(a[k].reason, b[k].reason);
    if (std::isfinite(a[k].objective)) {
      EXPECT_EQ(a[k].objective, b[k].objective);
    }
    if (std::isfinite(a[k].infeasibility)) {
      EXPECT_EQ(a[k].infeasibility, b[k].infeasibility);
    }
  }
}

TEST(Bench, FailuresAreRecordedPerRow) {
  BenchConfig cfg;
  cfg.dims = {{2, 3, 3, 3}};
  cfg.count = 8;
  cfg.schemes = {RelaxationScheme::MPCC_T};
  const auto rows = run_suite(cfg);
  int errors = 0;
  for (const auto& r : rows)
    if (!r.error.empty()) {
      ++errors;
      EXPECT_EQ(r.reason, "Error");
      EXPECT_EQ(r.infeasibility, kInf);
    }
  EXPECT_GT(errors, 0);  // some seeds have an empty upper-level feasible set
}

TEST(Bench, TablesHaveTheExpectedColumns) {
  const std::vector<BenchRow> rows = {row(1, RelaxationScheme::MDP1, -1.5, 1e-9),
                                      row(2, RelaxationScheme::MDP1, 2.25, kInf)};
  std::ostringstream md, csv, sum;
  write_markdown(md, rows);
  write_csv(csv, rows);
  write_summary(sum, summarize(rows));
  EXPECT_NE(md.str().find("| # | ObjVal | Infeasibility | Time |"), std::string::npos);
  EXPECT_NE(md.str().find("| 1 | -1.50 | 1.00e-09 | 1.00 |"), std::string::npos);
  EXPECT_NE(md.str().find("| 2 | 2.25 | inf | 1.00 |"), std::string::npos);
  EXPECT_EQ(csv.str().substr(0, csv.str().find('\n')), "group,dims,scheme,#,ObjVal,Infeasibility,Time,seed,reason,error");
  EXPECT_NE(sum.str().find("Number of feasible cases"), std::string::npos);
  EXPECT_NE(sum.str().find("| (2,3,3,3) | 1 (1.00) |"), std::string::npos);
  EXPECT_NE(sum.str().find("Number of dominant cases"), std::string::npos);
}

TEST(Bench, ExampleCorpusHasFourCases) {
  const auto c = example_corpus();
  ASSERT_EQ(c.size(), 4u);
  EXPECT_EQ(c[0].value, -2.0);
  EXPECT_EQ(c[0].optimum, (Vector(2) << 1, 1).finished());
  EXPECT_EQ(c[2].mdp_point, (Vector(4) << -1, 1, -2, 9).finished());
}

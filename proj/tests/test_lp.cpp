#include <gtest/gtest.h>

#include "oracles.hpp"
#include "pfsddp/pfsddp.hpp"

using namespace pfsddp;

TEST(Lp, SingleBindingRow) {
  LinearProgram lp;
  lp.add_var(1.0, 0.0, kInf);
  lp.add_row({{0, 1.0}}, Sense::GE, 3.0);
  const LpSolution sol = solve_lp(lp);
  ASSERT_EQ(sol.status, LpStatus::Optimal);
  EXPECT_NEAR(sol.primal[0], 3.0, 1e-12);
  EXPECT_NEAR(sol.objective_value, 3.0, 1e-12);
  EXPECT_NEAR(sol.row_duals[0], 1.0, 1e-12);
  EXPECT_TRUE(dual_check(lp, sol));
}

TEST(Lp, ForgedDualFailsCheck) {
  LinearProgram lp;
  lp.add_var(1.0, 0.0, kInf);
  lp.add_row({{0, 1.0}}, Sense::GE, 3.0);
  LpSolution sol = solve_lp(lp);
  sol.row_duals[0] = 0.5;
  EXPECT_FALSE(dual_check(lp, sol));
}

TEST(Lp, DualSignConvention) {
  {
    LinearProgram lp;  // min -x, x <= 3
    lp.add_var(-1.0, 0.0, kInf);
    lp.add_row({{0, 1.0}}, Sense::LE, 3.0);
    const LpSolution sol = solve_lp(lp);
    ASSERT_EQ(sol.status, LpStatus::Optimal);
    EXPECT_NEAR(sol.row_duals[0], -1.0, 1e-12);
    EXPECT_TRUE(dual_check(lp, sol));
  }
  {
    LinearProgram lp;  // min 2x + y, x + y = 4  -> y = 4, dual 1
    lp.add_var(2.0, 0.0, kInf);
    lp.add_var(1.0, 0.0, kInf);
    lp.add_row({{0, 1.0}, {1, 1.0}}, Sense::EQ, 4.0);
    const LpSolution sol = solve_lp(lp);
    ASSERT_EQ(sol.status, LpStatus::Optimal);
    EXPECT_NEAR(sol.objective_value, 4.0, 1e-12);
    EXPECT_NEAR(sol.row_duals[0], 1.0, 1e-12);
  }
  {
    LinearProgram lp;  // min -x, x + y = -2 with y free, x <= 1 -> dual -1
    lp.add_var(-1.0, 0.0, 1.0);
    lp.add_var(0.0, -kInf, kInf);
    lp.add_row({{0, 1.0}, {1, 1.0}}, Sense::EQ, -2.0);
    const LpSolution sol = solve_lp(lp);
    ASSERT_EQ(sol.status, LpStatus::Optimal);
    EXPECT_NEAR(sol.primal[0], 1.0, 1e-12);
    EXPECT_NEAR(sol.primal[1], -3.0, 1e-12);
    EXPECT_TRUE(dual_check(lp, sol));
  }
}

TEST(Lp, Unbounded) {
  LinearProgram lp;
  lp.add_var(-1.0, 0.0, kInf);
  EXPECT_EQ(solve_lp(lp).status, LpStatus::Unbounded);

  LinearProgram lp2;  // min -x - y, x - y >= 1
  lp2.add_var(-1.0, 0.0, kInf);
  lp2.add_var(-1.0, 0.0, kInf);
  lp2.add_row({{0, 1.0}, {1, -1.0}}, Sense::GE, 1.0);
  EXPECT_EQ(solve_lp(lp2).status, LpStatus::Unbounded);

  LinearProgram lp3;  // free variable, min x
  lp3.add_var(1.0, -kInf, kInf);
  lp3.add_row({{0, 1.0}}, Sense::LE, 5.0);
  EXPECT_EQ(solve_lp(lp3).status, LpStatus::Unbounded);
}

TEST(Lp, Infeasible) {
  LinearProgram lp;
  lp.add_var(0.0, 0.0, kInf);
  lp.add_row({{0, 1.0}}, Sense::GE, 3.0);
  lp.add_row({{0, 1.0}}, Sense::LE, 2.0);
  const LpSolution sol = solve_lp(lp);
  EXPECT_EQ(sol.status, LpStatus::Infeasible);
  EXPECT_GE(sol.infeasible_row, 0);

  LinearProgram lp2;  // bounds conflict with an equality
  lp2.add_var(1.0, 0.0, 1.0);
  lp2.add_var(1.0, 0.0, 1.0);
  lp2.add_row({{0, 1.0}, {1, 1.0}}, Sense::EQ, 3.0);
  EXPECT_EQ(solve_lp(lp2).status, LpStatus::Infeasible);

  LinearProgram lp3;  // empty row with positive rhs
  lp3.add_var(1.0, 0.0, 1.0);
  lp3.add_row({}, Sense::GE, 1.0);
  EXPECT_EQ(solve_lp(lp3).status, LpStatus::Infeasible);
}

TEST(Lp, InvalidProgramRejected) {
  LinearProgram lp;
  lp.add_var(1.0, 0.0, kInf);
  lp.add_row({{3, 1.0}}, Sense::GE, 1.0);
  EXPECT_THROW(solve_lp(lp), DimensionMismatch);

  LinearProgram lp2;
  lp2.add_var(1.0, 2.0, 1.0);
  EXPECT_THROW(solve_lp(lp2), DimensionMismatch);

  LinearProgram lp3;
  lp3.add_var(1.0, 0.0, 1.0);
  lp3.add_row({{0, 1.0}}, Sense::GE, kInf);
  EXPECT_THROW(solve_lp(lp3), DimensionMismatch);
}

// Beale's cycling example; textbook rules cycle without an anti-cycling guard.
TEST(Lp, BealeDoesNotCycle) {
  LinearProgram lp;
  lp.add_var(-0.75, 0.0, kInf);
  lp.add_var(150.0, 0.0, kInf);
  lp.add_var(-0.02, 0.0, kInf);
  lp.add_var(6.0, 0.0, kInf);
  lp.add_row({{0, 0.25}, {1, -60.0}, {2, -0.04}, {3, 9.0}}, Sense::LE, 0.0);
  lp.add_row({{0, 0.5}, {1, -90.0}, {2, -0.02}, {3, 3.0}}, Sense::LE, 0.0);
  lp.add_row({{2, 1.0}}, Sense::LE, 1.0);
  const LpSolution sol = solve_lp(lp);
  ASSERT_EQ(sol.status, LpStatus::Optimal);
  EXPECT_NEAR(sol.objective_value, -0.05, 1e-9);
  EXPECT_TRUE(dual_check(lp, sol));
}

// Many redundant constraints through the same vertex.
TEST(Lp, HighlyDegenerateVertex) {
  LinearProgram lp;
  for (int j = 0; j < 4; ++j) lp.add_var(-1.0, 0.0, kInf);
  for (int i = 1; i <= 20; ++i) {
    std::vector<SparseEntry> c;
    for (int j = 0; j < 4; ++j) c.push_back({j, 1.0 + ((i + j) % 3)});
    double rhs = 0.0;
    for (const auto& e : c) rhs += e.value;  // all pass through (1,1,1,1)
    lp.add_row(c, Sense::LE, rhs);
  }
  const LpSolution sol = solve_lp(lp);
  ASSERT_EQ(sol.status, LpStatus::Optimal);
  EXPECT_TRUE(dual_check(lp, sol));
  EXPECT_NEAR(sol.objective_value, oracle::vertex_enumeration(lp).value_or(1e9), 1e-7);
}

TEST(Lp, RandomBoundedAgainstVertexOracle) {
  SplitMix64 rng(20240601);
  int checked = 0;
  for (int trial = 0; trial < 200; ++trial) {
    const int n = 2 + static_cast<int>(rng.next() % 5);  // <= 6
    const int m = 1 + static_cast<int>(rng.next() % 5);
    const LinearProgram lp = oracle::random_bounded_lp(rng, n, m);
    const LpSolution sol = solve_lp(lp);
    const auto ref = oracle::vertex_enumeration(lp);
    if (!ref) {
      // The oracle's own tolerance can miss a barely feasible EQ system.
      continue;
    }
    ASSERT_EQ(sol.status, LpStatus::Optimal) << "trial " << trial;
    EXPECT_TRUE(dual_check(lp, sol)) << "trial " << trial;
    EXPECT_NEAR(sol.objective_value, *ref, 1e-6 * std::max(1.0, std::abs(*ref))) << "trial " << trial;
    ++checked;
  }
  EXPECT_GE(checked, 190);
}

TEST(Lp, RandomGeneralLpsPassDualCheck) {
  SplitMix64 rng(77);
  int optimal = 0;
  for (int trial = 0; trial < 200; ++trial) {
    const int n = 1 + static_cast<int>(rng.next() % 8);
    const int m = 1 + static_cast<int>(rng.next() % 8);
    const LinearProgram lp = oracle::random_general_lp(rng, n, m);
    const LpSolution sol = solve_lp(lp);
    ASSERT_NE(sol.status, LpStatus::Infeasible) << "trial " << trial << " has a known feasible point";
    if (sol.status == LpStatus::Optimal) {
      EXPECT_TRUE(dual_check(lp, sol)) << "trial " << trial;
      ++optimal;
    }
  }
  EXPECT_GT(optimal, 50);
}

TEST(Lp, Deterministic) {
  SplitMix64 rng(3);
  for (int trial = 0; trial < 20; ++trial) {
    const LinearProgram lp = oracle::random_general_lp(rng, 6, 6);
    const LpSolution a = solve_lp(lp), b = solve_lp(lp);
    EXPECT_EQ(a.status, b.status);
    EXPECT_EQ(a.primal, b.primal);
    EXPECT_EQ(a.row_duals, b.row_duals);
    EXPECT_EQ(a.iterations, b.iterations);
  }
}

TEST(Lp, FrequentRefactorGivesSameOptimum) {
  SplitMix64 rng(8);
  LpTolerances tight;
  tight.refactor_every = 1;
  for (int trial = 0; trial < 30; ++trial) {
    const LinearProgram lp = oracle::random_bounded_lp(rng, 6, 6);
    const LpSolution a = solve_lp(lp), b = solve_lp(lp, tight);
    ASSERT_EQ(a.status, b.status);
    if (a.status == LpStatus::Optimal) EXPECT_NEAR(a.objective_value, b.objective_value, 1e-9);
  }
}

TEST(Lp, LpFormatDump) {
  LinearProgram lp;
  lp.add_var(1.0, 0.0, kInf, "x");
  lp.add_var(-2.0, -kInf, kInf, "y");
  lp.add_var(0.0, 0.0, 4.0);
  lp.add_row({{0, 1.0}, {1, -1.0}}, Sense::GE, 1.0, "c1");
  lp.add_row({{1, 1.0}, {2, 1.0}}, Sense::EQ, 2.0);
  const std::string text = write_lp_format(lp);
  EXPECT_NE(text.find("Minimize\n obj: 1 x - 2 y\n"), std::string::npos) << text;
  EXPECT_NE(text.find(" c1: 1 x - 1 y >= 1\n"), std::string::npos) << text;
  EXPECT_NE(text.find(" r1: 1 y + 1 x2 = 2\n"), std::string::npos) << text;
  EXPECT_NE(text.find(" y free\n"), std::string::npos);
  EXPECT_NE(text.find(" 0 <= x2 <= 4\n"), std::string::npos);
  EXPECT_EQ(text.substr(text.size() - 4), "End\n");
}

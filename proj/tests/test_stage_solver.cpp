#include <gtest/gtest.h>

#include "oracles.hpp"
#include "pfsddp/pfsddp.hpp"

using namespace pfsddp;

namespace {

Instance no_hoc_instance() {
  hydro::HydroSystem sys = hydro::fixture_systems().at("toy_feasible");
  for (auto& r : sys.reservoirs) r.min_outflow.assign(sys.stages(), 0.0);
  return hydro::compile(sys);
}

CutPool single_fff_cut(double a, double g) {
  CutPool pool(1, CutKind::Feasibility, 1);
  Cut c;
  c.kind = CutKind::Feasibility;
  c.intercept = a;
  c.gradient = {g};
  pool.append(c);
  return pool;
}

double feasibility_value(const Instance& inst, int t, const std::vector<double>& x, int k, const CutPool* fff) {
  return solve_feasibility(inst, t, x, k, fff).value;
}

}  // namespace

TEST(StageSolver, NoRelaxableRowsGivesZeroValue) {
  const Instance inst = no_hoc_instance();
  const std::vector<double> x{4.0};
  const StageLp s = build_feasibility(inst, 1, x, 0, nullptr);
  for (double c : s.lp.objective) EXPECT_EQ(c, 0.0);
  const auto res = solve_feasibility(inst, 1, x, 0, nullptr);
  EXPECT_EQ(res.value, 0.0);
  EXPECT_TRUE(res.s_star.empty());
}

TEST(StageSolver, ToyInfeasibleLastStage) {
  const Instance inst = hydro::fixture("toy_infeasible");
  const std::vector<double> v2{1.0};
  const auto res = solve_feasibility(inst, 2, v2, 0, nullptr);
  ASSERT_EQ(res.s_star.size(), 1u);
  EXPECT_NEAR(res.s_star[0], 2.0, 1e-9);
  EXPECT_NEAR(res.value, 2.0, 1e-9);
  EXPECT_EQ(res.beta_star, 0.0);
  const StageLp s = build_feasibility(inst, 2, v2, 0, nullptr);
  EXPECT_EQ(s.beta_var, -1);
  EXPECT_EQ(s.theta_var, -1);
}

TEST(StageSolver, ToyStochasticStageTwoCuts) {
  const Instance inst = hydro::fixture("toy_stochastic");
  const std::vector<double> v1{0.0};
  const auto dry = solve_feasibility(inst, 1, v1, 0, nullptr);
  EXPECT_NEAR(dry.value, 3.0, 1e-9);
  EXPECT_NEAR(dry.s_star[0], 3.0, 1e-9);
  EXPECT_NEAR(dry.cut.intercept, 3.0, 1e-9);
  EXPECT_NEAR(dry.cut.gradient[0], -1.0, 1e-9);
  EXPECT_EQ(dry.cut.kind, CutKind::Feasibility);
  EXPECT_EQ(dry.cut.origin.realization, 0);

  const auto wet = solve_feasibility(inst, 1, v1, 1, nullptr);
  EXPECT_NEAR(wet.value, 0.0, 1e-9);
  EXPECT_NEAR(wet.cut.intercept, 0.0, 1e-9);
  EXPECT_NEAR(wet.cut.gradient[0], 0.0, 1e-9);

  // Slope of the dry value in v1 by finite differences, at a state where it is smooth.
  auto f = [&](const std::vector<double>& x) { return feasibility_value(inst, 1, x, 0, nullptr); };
  EXPECT_NEAR(oracle::central_difference(f, {1.0}, 0, 1e-4), -1.0, 1e-3);
}

TEST(StageSolver, FeasibilityCutTouchesValueAtGeneratingState) {
  for (const auto& [name, inst] : hydro::fixtures()) {
    for (int t = 0; t < inst.T; ++t)
      for (int k = 0; k < static_cast<int>(inst.stages[t].realizations.size()); ++k)
        for (double v : {0.0, 1.5, 4.0, 9.0}) {
          const std::vector<double> x{v};
          const auto res = solve_feasibility(inst, t, x, k, nullptr);
          EXPECT_NEAR(res.cut.value_at(x), res.value, 1e-6) << name;
          EXPECT_GE(res.value, 0.0);
        }
  }
}

// Random states, trained pools, every stage and realization of every fixture.
TEST(StageSolver, FeasibilityCutsAreMinorants) {
  SplitMix64 rng(123);
  for (const auto& [name, inst] : hydro::fixtures()) {
    const RunReport rep = run(inst, EngineConfig{});
    for (int t = 0; t < inst.T; ++t)
      for (int k = 0; k < static_cast<int>(inst.stages[t].realizations.size()); ++k) {
        const std::vector<double> at{10.0 * rng.uniform()};
        const auto gen = solve_feasibility(inst, t, at, k, rep.policy.fff_after(t));
        for (int i = 0; i < 100; ++i) {
          const std::vector<double> x{10.0 * rng.uniform()};
          const double exact = feasibility_value(inst, t, x, k, rep.policy.fff_after(t));
          EXPECT_LE(gen.cut.value_at(x), exact + 1e-6) << name << " t=" << t << " k=" << k << " x=" << x[0];
        }
      }
  }
}

TEST(StageSolver, FeasibilityGradientsMatchFiniteDifferences) {
  SplitMix64 rng(321);
  int checked = 0;
  for (const auto& [name, inst] : hydro::fixtures()) {
    const RunReport rep = run(inst, EngineConfig{});
    for (int t = 0; t < inst.T; ++t)
      for (int k = 0; k < static_cast<int>(inst.stages[t].realizations.size()); ++k)
        for (int i = 0; i < 20; ++i) {
          const std::vector<double> x{0.5 + 9.0 * rng.uniform()};
          auto f = [&](const std::vector<double>& y) {
            return feasibility_value(inst, t, y, k, rep.policy.fff_after(t));
          };
          const double h = 1e-4;
          const double left = (f(x) - f({x[0] - h})) / h, right = (f({x[0] + h}) - f(x)) / h;
          if (std::abs(left - right) > 1e-6) continue;  // at a kink: degenerate state
          const auto res = solve_feasibility(inst, t, x, k, rep.policy.fff_after(t));
          EXPECT_NEAR(res.cut.gradient[0], oracle::central_difference(f, x, 0, h), 1e-3) << name;
          ++checked;
        }
  }
  EXPECT_GT(checked, 50);
}

TEST(StageSolver, OptimalityForcesStorageWhenBetaCapIsZero) {
  const Instance inst = hydro::fixture("toy_stochastic");
  Policy policy = Policy::empty_for(inst);
  policy.fff[1] = single_fff_cut(3.0, -1.0);
  const auto feas = solve_feasibility(inst, 0, inst.initial_state, 0, policy.fff_after(0));
  EXPECT_NEAR(feas.beta_star, 0.0, 1e-9);
  EXPECT_NEAR(feas.value, 0.0, 1e-9);
  const auto opt = solve_optimality(inst, 0, inst.initial_state, 0, policy.fcf_after(0), policy.fff_after(0),
                                    feas.s_star, feas.beta_star);
  EXPECT_GE(opt.outgoing_state[0], 3.0 - 1e-8);
  EXPECT_NEAR(opt.outgoing_state[0], 3.0, 1e-8);
  EXPECT_NEAR(opt.stage_cost, 20.0, 1e-8);
  EXPECT_NEAR(opt.x[hydro::release_var(0)], 2.0, 1e-8);
}

TEST(StageSolver, OptimalityLastStageIsPlainCappedLp) {
  const Instance inst = hydro::fixture("toy_infeasible");
  const std::vector<double> v2{1.0};
  const auto feas = solve_feasibility(inst, 2, v2, 0, nullptr);
  const StageLp s = build_optimality(inst, 2, v2, 0, nullptr, nullptr, feas.s_star, feas.beta_star);
  EXPECT_EQ(s.theta_var, -1);
  EXPECT_EQ(s.beta_var, -1);
  const auto opt = solve_optimality(inst, 2, v2, 0, nullptr, nullptr, feas.s_star, feas.beta_star);
  EXPECT_LE(opt.slacks_used[0], feas.s_star[0] + 1e-8);
  EXPECT_NEAR(opt.slacks_used[0], 2.0, 1e-8);
  // All water (1) released, thermal covers the remaining 3.
  EXPECT_NEAR(opt.stage_cost, 30.0, 1e-8);
  EXPECT_NEAR(opt.cut.value_at(v2), opt.objective_value, 1e-6);
}

TEST(StageSolver, OptimalityWithEmptyPoolUsesThetaLowerBound) {
  const Instance inst = hydro::fixture("toy_infeasible");
  const Policy policy = Policy::empty_for(inst);
  const auto feas = solve_feasibility(inst, 0, inst.initial_state, 0, policy.fff_after(0));
  const StageLp s = build_optimality(inst, 0, inst.initial_state, 0, policy.fcf_after(0), policy.fff_after(0),
                                     feas.s_star, feas.beta_star, -7.0);
  ASSERT_GE(s.theta_var, 0);
  EXPECT_EQ(s.lp.lower[s.theta_var], -7.0);
  const auto opt = solve_optimality(inst, 0, inst.initial_state, 0, policy.fcf_after(0), policy.fff_after(0),
                                    feas.s_star, feas.beta_star, -7.0);
  EXPECT_NEAR(opt.theta, -7.0, 1e-9);
}

TEST(StageSolver, CapLengthMismatch) {
  const Instance inst = hydro::fixture("toy_infeasible");
  const std::vector<double> caps{1.0, 2.0};
  EXPECT_THROW(build_optimality(inst, 2, inst.initial_state, 0, nullptr, nullptr, caps, 0.0), DimensionMismatch);
}

TEST(StageSolver, OptimalityObjectiveIgnoresSlackWeights) {
  const Instance base = hydro::fixture("toy_stochastic");
  Instance scaled = base;
  for (auto& st : scaled.stages)
    for (auto& row : st.rows)
      if (row.slack_weight) *row.slack_weight *= 10.0;
  Policy policy = Policy::empty_for(base);
  policy.fff[1] = single_fff_cut(3.0, -1.0);
  for (int t = 0; t < base.T; ++t) {
    const std::vector<double> x{2.0};
    const std::vector<double> cap(relaxable_rows(base.stages[t]).size(), 1.0);
    const StageLp a = build_optimality(base, t, x, 0, policy.fcf_after(t), policy.fff_after(t), cap, 0.5);
    const StageLp b = build_optimality(scaled, t, x, 0, policy.fcf_after(t), policy.fff_after(t), cap, 0.5);
    EXPECT_EQ(a.lp.objective, b.lp.objective);
    for (int v : a.slack_var) EXPECT_EQ(a.lp.objective[v], 0.0);
    if (a.beta_var >= 0) EXPECT_EQ(a.lp.objective[a.beta_var], 0.0);
  }
}

TEST(StageSolver, ClassicZeroPenaltyMakesSlackFree) {
  const Instance inst = hydro::fixture("toy_stochastic");
  const std::vector<double> v1{0.0};
  const auto res = solve_classic(inst, 1, v1, 0, nullptr, 0.0);
  EXPECT_EQ(res.penalty_cost, 0.0);
  EXPECT_NEAR(res.stage_cost, 40.0, 1e-9);  // no water, demand all thermal
}

TEST(StageSolver, ClassicPenaltyUsesOverrideOrRowWeights) {
  const Instance inst = hydro::fixture("toy_stochastic");
  const std::vector<double> v1{0.0};
  const auto own = solve_classic(inst, 1, v1, 0, nullptr);
  EXPECT_NEAR(own.penalty_cost, 3000.0, 1e-6);  // 3 units at 1000
  const auto one = solve_classic(inst, 1, v1, 0, nullptr, 1.0);
  EXPECT_NEAR(one.penalty_cost, 3.0, 1e-9);
  EXPECT_NEAR(one.objective_value, 43.0, 1e-9);
}

TEST(StageSolver, ClassicPenaltyOneVersusHundredOnToyStochastic) {
  const Instance inst = hydro::fixture("toy_stochastic");
  EngineConfig cfg;
  cfg.mode = Mode::Classic;
  cfg.gap_epsilon = 1e-9;
  cfg.penalty_override = 1.0;
  const RunReport cheap = run(inst, cfg);
  ASSERT_TRUE(cheap.converged);
  EXPECT_NEAR(cheap.first_stage_decision[hydro::release_var(0)], 4.0, 1e-8);
  EXPECT_NEAR(cheap.first_stage_decision[hydro::storage_var(0)], 1.0, 1e-8);

  cfg.penalty_override = 100.0;
  const RunReport dear = run(inst, cfg);
  ASSERT_TRUE(dear.converged);
  EXPECT_NEAR(dear.first_stage_decision[hydro::storage_var(0)], 3.0, 1e-8);
}

TEST(StageSolver, StructuralInfeasibilityNamesStage) {
  hydro::HydroSystem sys = hydro::fixture_systems().at("toy_feasible");
  sys.demand[1] = 100.0;  // thermal 10 + release 10 cannot cover it
  const Instance inst = hydro::compile(sys);
  const std::vector<double> x{5.0};
  try {
    solve_feasibility(inst, 1, x, 0, nullptr);
    FAIL() << "expected StructuralInfeasibility";
  } catch (const StructuralInfeasibility& e) {
    EXPECT_EQ(e.stage(), 1);
    EXPECT_EQ(e.realization(), 0);
    EXPECT_NE(std::string(e.what()).find("stage 2"), std::string::npos);
  }
  EXPECT_THROW(solve_classic(inst, 1, x, 0, nullptr), StructuralInfeasibility);
}

TEST(StageSolver, DualsPassAuditOnAllFixtureSubproblems) {
  for (const auto& [name, inst] : hydro::fixtures()) {
    const RunReport rep = run(inst, EngineConfig{});
    for (int t = 0; t < inst.T; ++t)
      for (double v : {0.0, 2.5, 6.0}) {
        const std::vector<double> x{v};
        const StageLp f = build_feasibility(inst, t, x, 0, rep.policy.fff_after(t));
        const LpSolution sf = solve_lp(f.lp);
        ASSERT_EQ(sf.status, LpStatus::Optimal);
        EXPECT_TRUE(dual_check(f.lp, sf));
        const auto feas = solve_feasibility(inst, t, x, 0, rep.policy.fff_after(t));
        const StageLp o = build_optimality(inst, t, x, 0, rep.policy.fcf_after(t), rep.policy.fff_after(t),
                                           feas.s_star, feas.beta_star);
        const LpSolution so = solve_lp(o.lp);
        ASSERT_EQ(so.status, LpStatus::Optimal);
        EXPECT_TRUE(dual_check(o.lp, so));
      }
  }
}

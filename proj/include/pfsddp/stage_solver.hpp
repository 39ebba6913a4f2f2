#pragma once
// The three stage subproblems and cut extraction from their duals.
//
//   feasibility:  min  w.s + beta
//                 A x + s >= b - D x_prev,  beta >= FFF_{t+1}(x_out),  x, s, beta >= 0
//   optimality:   min  c.x + theta
//                 same rows, 0 <= s <= s*, 0 <= beta <= beta*,
//                 theta >= FCF_{t+1}(x_out), theta >= L
//   classic:      min  c.x + p.s + theta,  s >= 0 unbounded
//
// beta is omitted while the next feasibility pool holds no cut (its value
// would be pinned at the zero floor), and beta/theta are omitted at the last
// stage. In every case the cut gradient in the incoming state is -D^T lambda
// over the stage rows, the caps s*, beta* being treated as constants.

#include <span>
#include <sstream>
#include <string>
#include <vector>

#include "pfsddp/cut_pool.hpp"
#include "pfsddp/lp.hpp"
#include "pfsddp/model.hpp"

namespace pfsddp {

/// Absolute/relative widening of the s* and beta* caps so that the
/// feasibility optimum stays feasible for the optimality LP under round-off.
inline constexpr double kCapRelax = 1e-11;

/// A stage LP together with the position of each variable family.
struct StageLp {
  LinearProgram lp;
  int n_x = 0;
  std::vector<int> relaxable;   // stage row index of each slack
  std::vector<int> slack_var;   // lp variable of each slack
  int beta_var = -1;
  int theta_var = -1;
  int n_stage_rows = 0;
};

struct FeasibilityResult {
  std::vector<double> s_star;  // per relaxable row, in stage row order
  double beta_star = 0.0;
  double value = 0.0;
  std::vector<double> x_feas;
  Cut cut;
};

struct OptimalityResult {
  std::vector<double> x;
  std::vector<double> outgoing_state;
  double stage_cost = 0.0;    // c.x
  double penalty_cost = 0.0;  // p.s, classic mode only
  double theta = 0.0;
  double objective_value = 0.0;
  std::vector<double> slacks_used;  // per relaxable row
  Cut cut;
};

namespace detail {

struct SlackSpec {
  bool present = false;
  std::vector<double> cost;   // per relaxable row
  std::vector<double> upper;  // per relaxable row
};

struct EpigraphSpec {
  bool present = false;
  double cost = 1.0;
  double lower = 0.0;
  double upper = kInf;
};

inline StageLp assemble_stage(const Instance& inst, int t, int k, std::span<const double> x_prev, bool with_cost,
                              const SlackSpec& slack, const CutPool* fff_next, const EpigraphSpec& beta,
                              const CutPool* fcf_next, const EpigraphSpec& theta) {
  const StageData& st = inst.stages.at(t);
  const std::vector<double> rhs = effective_rhs(inst, t, k, x_prev);
  StageLp out;
  LinearProgram& lp = out.lp;
  out.n_x = st.n;
  for (int j = 0; j < st.n; ++j) lp.add_var(with_cost ? st.cost[j] : 0.0, 0.0, st.upper(j));
  if (slack.present) {
    out.relaxable = relaxable_rows(st);
    for (size_t r = 0; r < out.relaxable.size(); ++r)
      out.slack_var.push_back(lp.add_var(slack.cost[r], 0.0, slack.upper[r]));
  }
  if (beta.present) out.beta_var = lp.add_var(beta.cost, beta.lower, beta.upper);
  if (theta.present) out.theta_var = lp.add_var(theta.cost, theta.lower, theta.upper);

  size_t next_slack = 0;
  for (int r = 0; r < static_cast<int>(st.rows.size()); ++r) {
    const Row& row = st.rows[r];
    std::vector<SparseEntry> coeffs = row.coeffs;
    if (slack.present && next_slack < out.relaxable.size() && out.relaxable[next_slack] == r)
      coeffs.push_back({out.slack_var[next_slack++], 1.0});
    lp.add_row(std::move(coeffs), row.sense, rhs[r]);
  }
  out.n_stage_rows = static_cast<int>(st.rows.size());

  auto add_cut_rows = [&](const CutPool& pool, int epi_var) {
    for (const auto& c : pool.cuts()) {
      // epi - g . x_out >= alpha
      std::vector<SparseEntry> coeffs{{epi_var, 1.0}};
      for (int i = 0; i < inst.m; ++i)
        if (c.gradient[i] != 0.0) coeffs.push_back({st.state_indices[i], -c.gradient[i]});
      lp.add_row(std::move(coeffs), Sense::GE, c.intercept);
    }
  };
  if (beta.present && fff_next) add_cut_rows(*fff_next, out.beta_var);
  if (theta.present && fcf_next) add_cut_rows(*fcf_next, out.theta_var);
  return out;
}

/// g = -D^T lambda over the stage rows; alpha = value - g . x_prev.
inline Cut cut_from_duals(const Instance& inst, int t, std::span<const double> x_prev, const LpSolution& sol,
                          double value, CutKind kind) {
  Cut c;
  c.kind = kind;
  c.gradient.assign(inst.m, 0.0);
  for (const auto& l : inst.stages[t].link) c.gradient[l.col] -= l.value * sol.row_duals[l.row];
  double gx = 0.0;
  for (int i = 0; i < inst.m; ++i) gx += c.gradient[i] * x_prev[i];
  c.intercept = value - gx;
  c.origin.stage = t;
  return c;
}

inline std::string row_label(const Instance& inst, int t, int row) {
  const auto& rows = inst.stages[t].rows;
  if (row < 0 || row >= static_cast<int>(rows.size())) return "cut row";
  return rows[row].label.empty() ? "row " + std::to_string(row) : "'" + rows[row].label + "'";
}

inline LpSolution solve_checked(const LinearProgram& lp, const char* what) {
  LpSolution sol = solve_lp(lp);
  if (sol.status == LpStatus::Unbounded)
    throw NumericalFailure(std::string(what) + " subproblem is unbounded");
  if (sol.status == LpStatus::Optimal && !dual_check(lp, sol))
    throw NumericalFailure(std::string(what) + " subproblem failed the duality audit");
  return sol;
}

inline void fill_optimality(const Instance& inst, int t, std::span<const double> x_prev, const StageLp& s,
                            const LpSolution& sol, OptimalityResult& res) {
  const StageData& st = inst.stages[t];
  res.x.assign(sol.primal.begin(), sol.primal.begin() + s.n_x);
  res.outgoing_state.resize(inst.m);
  for (int i = 0; i < inst.m; ++i) res.outgoing_state[i] = res.x[st.state_indices[i]];
  res.stage_cost = 0.0;
  for (int j = 0; j < s.n_x; ++j) res.stage_cost += st.cost[j] * res.x[j];
  res.slacks_used.assign(relaxable_rows(st).size(), 0.0);
  for (size_t r = 0; r < s.slack_var.size(); ++r) res.slacks_used[r] = sol.primal[s.slack_var[r]];
  res.theta = s.theta_var >= 0 ? sol.primal[s.theta_var] : 0.0;
  res.objective_value = sol.objective_value;
  res.cut = cut_from_duals(inst, t, x_prev, sol, sol.objective_value, CutKind::Optimality);
}

}  // namespace detail

inline StageLp build_feasibility(const Instance& inst, int t, std::span<const double> x_prev, int k,
                                 const CutPool* fff_next) {
  const StageData& st = inst.stages.at(t);
  detail::SlackSpec slack;
  slack.present = true;
  for (int r : relaxable_rows(st)) {
    slack.cost.push_back(*st.rows[r].slack_weight);
    slack.upper.push_back(kInf);
  }
  detail::EpigraphSpec beta;
  beta.present = t + 1 < inst.T && fff_next && !fff_next->empty();
  return detail::assemble_stage(inst, t, k, x_prev, /*with_cost=*/false, slack, fff_next, beta, nullptr, {});
}

/// Minimal weighted violation of stage t and, through beta, of the stages after it.
inline FeasibilityResult solve_feasibility(const Instance& inst, int t, std::span<const double> x_prev, int k,
                                           const CutPool* fff_next) {
  const StageLp s = build_feasibility(inst, t, x_prev, k, fff_next);
  const LpSolution sol = detail::solve_checked(s.lp, "feasibility");
  if (sol.status == LpStatus::Infeasible) {
    std::ostringstream os;
    os << "structural infeasibility at stage " << t + 1 << " (realization " << k
       << "): the non-relaxable rows admit no solution even with unbounded slacks; last violated row "
       << detail::row_label(inst, t, sol.infeasible_row);
    throw StructuralInfeasibility(t, k, sol.infeasible_row < s.n_stage_rows ? sol.infeasible_row : -1, os.str());
  }
  FeasibilityResult res;
  res.value = sol.objective_value;
  res.x_feas.assign(sol.primal.begin(), sol.primal.begin() + s.n_x);
  for (int v : s.slack_var) res.s_star.push_back(sol.primal[v]);
  res.beta_star = s.beta_var >= 0 ? sol.primal[s.beta_var] : 0.0;
  res.cut = detail::cut_from_duals(inst, t, x_prev, sol, res.value, CutKind::Feasibility);
  res.cut.origin.realization = k;
  return res;
}

inline StageLp build_optimality(const Instance& inst, int t, std::span<const double> x_prev, int k,
                                const CutPool* fcf_next, const CutPool* fff_next, std::span<const double> s_cap,
                                double beta_cap, double theta_lower_bound = 0.0) {
  const StageData& st = inst.stages.at(t);
  const auto rel = relaxable_rows(st);
  if (s_cap.size() != rel.size())
    throw DimensionMismatch("slack cap has length " + std::to_string(s_cap.size()) + ", expected " +
                            std::to_string(rel.size()));
  detail::SlackSpec slack;
  slack.present = true;
  for (size_t r = 0; r < rel.size(); ++r) {
    slack.cost.push_back(0.0);
    slack.upper.push_back(std::max(0.0, s_cap[r]) + kCapRelax * std::max(1.0, std::abs(s_cap[r])));
  }
  detail::EpigraphSpec beta;
  beta.present = t + 1 < inst.T && fff_next && !fff_next->empty();
  beta.cost = 0.0;
  beta.upper = std::max(0.0, beta_cap) + kCapRelax * std::max(1.0, std::abs(beta_cap));
  detail::EpigraphSpec theta;
  theta.present = t + 1 < inst.T && fcf_next;
  theta.lower = theta_lower_bound;
  return detail::assemble_stage(inst, t, k, x_prev, /*with_cost=*/true, slack, fff_next, beta, fcf_next, theta);
}

/// Cost minimization with violations capped at the feasibility optimum.
inline OptimalityResult solve_optimality(const Instance& inst, int t, std::span<const double> x_prev, int k,
                                         const CutPool* fcf_next, const CutPool* fff_next,
                                         std::span<const double> s_cap, double beta_cap,
                                         double theta_lower_bound = 0.0) {
  const StageLp s = build_optimality(inst, t, x_prev, k, fcf_next, fff_next, s_cap, beta_cap, theta_lower_bound);
  const LpSolution sol = detail::solve_checked(s.lp, "optimality");
  if (sol.status == LpStatus::Infeasible)
    throw DefensiveInfeasible("optimality subproblem infeasible at stage " + std::to_string(t + 1) +
                              " (realization " + std::to_string(k) + ") although its feasibility problem was solved");
  OptimalityResult res;
  detail::fill_optimality(inst, t, x_prev, s, sol, res);
  res.cut.origin.realization = k;
  return res;
}

inline StageLp build_classic(const Instance& inst, int t, std::span<const double> x_prev, int k,
                             const CutPool* fcf_next, std::optional<double> penalty_override = std::nullopt,
                             double theta_lower_bound = 0.0) {
  const StageData& st = inst.stages.at(t);
  detail::SlackSpec slack;
  slack.present = true;
  for (int r : relaxable_rows(st)) {
    slack.cost.push_back(penalty_override ? *penalty_override : *st.rows[r].penalty_weight);
    slack.upper.push_back(kInf);
  }
  detail::EpigraphSpec theta;
  theta.present = t + 1 < inst.T && fcf_next;
  theta.lower = theta_lower_bound;
  return detail::assemble_stage(inst, t, k, x_prev, /*with_cost=*/true, slack, nullptr, {}, fcf_next, theta);
}

/// Penalized stage problem: slacks are free but priced at penalty_weight.
inline OptimalityResult solve_classic(const Instance& inst, int t, std::span<const double> x_prev, int k,
                                      const CutPool* fcf_next, std::optional<double> penalty_override = std::nullopt,
                                      double theta_lower_bound = 0.0) {
  const StageLp s = build_classic(inst, t, x_prev, k, fcf_next, penalty_override, theta_lower_bound);
  const LpSolution sol = detail::solve_checked(s.lp, "classic");
  if (sol.status == LpStatus::Infeasible) {
    std::ostringstream os;
    os << "structural infeasibility at stage " << t + 1 << " (realization " << k
       << "): the non-relaxable rows admit no solution; last violated row "
       << detail::row_label(inst, t, sol.infeasible_row);
    throw StructuralInfeasibility(t, k, sol.infeasible_row < s.n_stage_rows ? sol.infeasible_row : -1, os.str());
  }
  OptimalityResult res;
  detail::fill_optimality(inst, t, x_prev, s, sol, res);
  res.cut.origin.realization = k;
  for (size_t r = 0; r < s.slack_var.size(); ++r) res.penalty_cost += s.lp.objective[s.slack_var[r]] * res.slacks_used[r];
  return res;
}

}  // namespace pfsddp

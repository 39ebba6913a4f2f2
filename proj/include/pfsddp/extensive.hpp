#pragma once
// Deterministic-equivalent LP over the full scenario tree. Used as the
// ground-truth oracle for both the violation level and the cost.
//
// Violation is measured per root-to-leaf path (sum of w.s over the path's
// nodes) and aggregated by worst case over leaves, the same principle the
// feasibility recursion follows. For deterministic instances this is the
// plain sum of weighted slacks.

#include <optional>
#include <string>
#include <vector>

#include "pfsddp/error.hpp"
#include "pfsddp/lp.hpp"
#include "pfsddp/model.hpp"

namespace pfsddp {

inline constexpr long long kMaxTreeNodes = 100000;

struct TreeNode {
  int stage = 0;
  int realization = 0;
  int parent = -1;
  double probability = 1.0;  // unconditional
  int x_offset = 0;          // first lp variable of the stage decision
  int slack_offset = 0;      // first lp variable of the node's slacks
};

struct ScenarioTree {
  std::vector<TreeNode> nodes;  // stage by stage, parents before children
  std::vector<int> leaves;
};

/// Enumerates the tree (variable offsets left at 0). Throws TreeTooLarge.
inline ScenarioTree enumerate_tree(const Instance& inst) {
  long long count = 0, width = 1;
  for (const auto& st : inst.stages) {
    width *= static_cast<long long>(st.realizations.size());
    count += width;
    if (count > kMaxTreeNodes)
      throw TreeTooLarge("scenario tree exceeds " + std::to_string(kMaxTreeNodes) + " nodes");
  }
  ScenarioTree tree;
  std::vector<int> frontier{-1};
  for (int t = 0; t < inst.T; ++t) {
    std::vector<int> next;
    for (int parent : frontier) {
      const double pp = parent < 0 ? 1.0 : tree.nodes[parent].probability;
      const auto& reals = inst.stages[t].realizations;
      for (int k = 0; k < static_cast<int>(reals.size()); ++k) {
        TreeNode n;
        n.stage = t;
        n.realization = k;
        n.parent = parent;
        n.probability = pp * reals[k].probability;
        next.push_back(static_cast<int>(tree.nodes.size()));
        tree.nodes.push_back(n);
      }
    }
    frontier = std::move(next);
  }
  tree.leaves = frontier;
  return tree;
}

struct ExtensiveMode {
  enum class Kind { Penalized, MinViolation, CostWithViolationBudget };
  Kind kind = Kind::Penalized;
  double budget = 0.0;                     // CostWithViolationBudget
  std::optional<double> penalty_override;  // Penalized

  static ExtensiveMode penalized(std::optional<double> p = std::nullopt) { return {Kind::Penalized, 0.0, p}; }
  static ExtensiveMode min_violation() { return {Kind::MinViolation, 0.0, std::nullopt}; }
  static ExtensiveMode cost_with_violation_budget(double v) { return {Kind::CostWithViolationBudget, v, std::nullopt}; }
};

struct ExtensiveLp {
  LinearProgram lp;
  ScenarioTree tree;
  int eta_var = -1;  // MinViolation only
};

inline ExtensiveLp build_extensive(const Instance& inst, const ExtensiveMode& mode) {
  ExtensiveLp out;
  out.tree = enumerate_tree(inst);
  LinearProgram& lp = out.lp;
  auto& nodes = out.tree.nodes;
  const bool cost_objective = mode.kind != ExtensiveMode::Kind::MinViolation;

  for (auto& node : nodes) {
    const StageData& st = inst.stages[node.stage];
    node.x_offset = lp.n_vars;
    for (int j = 0; j < st.n; ++j)
      lp.add_var(cost_objective ? node.probability * st.cost[j] : 0.0, 0.0, st.upper(j));
    node.slack_offset = lp.n_vars;
    for (int r : relaxable_rows(st)) {
      double c = 0.0;
      if (mode.kind == ExtensiveMode::Kind::Penalized)
        c = node.probability * (mode.penalty_override ? *mode.penalty_override : *st.rows[r].penalty_weight);
      lp.add_var(c, 0.0, kInf);
    }
  }
  if (mode.kind == ExtensiveMode::Kind::MinViolation) out.eta_var = lp.add_var(1.0, 0.0, kInf);

  for (const auto& node : nodes) {
    const StageData& st = inst.stages[node.stage];
    const auto& b = st.realizations[node.realization].rhs;
    std::vector<std::vector<SparseEntry>> coeffs(st.rows.size());
    std::vector<double> rhs(b.begin(), b.end());
    for (size_t r = 0; r < st.rows.size(); ++r)
      for (const auto& e : st.rows[r].coeffs) coeffs[r].push_back({node.x_offset + e.index, e.value});
    int s = node.slack_offset;
    for (size_t r = 0; r < st.rows.size(); ++r)
      if (st.rows[r].relaxable) coeffs[r].push_back({s++, 1.0});
    // A x + D x_parent_state {>=,=} b
    for (const auto& l : st.link) {
      if (node.parent < 0) {
        rhs[l.row] -= l.value * inst.initial_state[l.col];
      } else {
        const TreeNode& par = nodes[node.parent];
        const int pv = par.x_offset + inst.stages[par.stage].state_indices[l.col];
        coeffs[l.row].push_back({pv, l.value});
      }
    }
    for (size_t r = 0; r < st.rows.size(); ++r) lp.add_row(std::move(coeffs[r]), st.rows[r].sense, rhs[r]);
  }

  if (mode.kind != ExtensiveMode::Kind::Penalized) {
    for (int leaf : out.tree.leaves) {
      std::vector<SparseEntry> path;
      for (int v = leaf; v >= 0; v = nodes[v].parent) {
        const StageData& st = inst.stages[nodes[v].stage];
        int s = nodes[v].slack_offset;
        for (const auto& row : st.rows)
          if (row.relaxable) path.push_back({s++, *row.slack_weight});
      }
      if (mode.kind == ExtensiveMode::Kind::MinViolation) {
        // eta - sum w.s >= 0
        for (auto& e : path) e.value = -e.value;
        path.push_back({out.eta_var, 1.0});
        lp.add_row(std::move(path), Sense::GE, 0.0);
      } else {
        lp.add_row(std::move(path), Sense::LE, mode.budget);
      }
    }
  }
  return out;
}

struct NodeSolution {
  int stage = 0;
  int realization = 0;
  int parent = -1;
  double probability = 1.0;
  std::vector<double> x;
  std::vector<double> slacks;  // per relaxable row of the stage
};

struct HierarchicalResult {
  double V_star = 0.0;  // worst-case minimal weighted path violation
  double C_star = 0.0;  // minimal expected cost subject to that violation level
  std::vector<NodeSolution> nodes;
  double expected_violation = 0.0;  // of the C_star solution
};

inline std::vector<NodeSolution> extract_nodes(const Instance& inst, const ExtensiveLp& ext, const LpSolution& sol) {
  std::vector<NodeSolution> out;
  for (const auto& node : ext.tree.nodes) {
    const StageData& st = inst.stages[node.stage];
    NodeSolution ns;
    ns.stage = node.stage;
    ns.realization = node.realization;
    ns.parent = node.parent;
    ns.probability = node.probability;
    ns.x.assign(sol.primal.begin() + node.x_offset, sol.primal.begin() + node.x_offset + st.n);
    const size_t nr = relaxable_rows(st).size();
    ns.slacks.assign(sol.primal.begin() + node.slack_offset, sol.primal.begin() + node.slack_offset + nr);
    out.push_back(std::move(ns));
  }
  return out;
}

inline LpSolution solve_extensive_lp(const ExtensiveLp& ext, const char* what) {
  LpSolution sol = solve_lp(ext.lp);
  if (sol.status == LpStatus::Infeasible)
    throw StructuralInfeasibility(-1, -1, -1, std::string("extensive form (") + what + ") is infeasible");
  if (sol.status == LpStatus::Unbounded)
    throw NumericalFailure(std::string("extensive form (") + what + ") is unbounded");
  return sol;
}

/// Lexicographic oracle: first the least achievable worst-case violation,
/// then the least expected cost that stays within it.
inline HierarchicalResult solve_hierarchical(const Instance& inst) {
  HierarchicalResult res;
  const ExtensiveLp first = build_extensive(inst, ExtensiveMode::min_violation());
  res.V_star = solve_extensive_lp(first, "min_violation").objective_value;
  const double budget = res.V_star + 1e-9 * std::max(1.0, res.V_star);
  const ExtensiveLp second = build_extensive(inst, ExtensiveMode::cost_with_violation_budget(budget));
  const LpSolution sol = solve_extensive_lp(second, "cost_with_violation_budget");
  res.C_star = sol.objective_value;
  res.nodes = extract_nodes(inst, second, sol);
  for (const auto& n : res.nodes) {
    const StageData& st = inst.stages[n.stage];
    const auto rel = relaxable_rows(st);
    for (size_t r = 0; r < rel.size(); ++r) res.expected_violation += n.probability * *st.rows[rel[r]].slack_weight * n.slacks[r];
  }
  return res;
}

}  // namespace pfsddp

#pragma once
// Forward/backward SDDP loop, in penalty-free mode (feasibility problem then
// capped optimality problem at every visited state) or classic mode
// (penalized slacks).
//
// Stopping rule, penalty-free: no novel feasibility cut in the backward pass
// and |Z_up - Z_low| / max(1, |Z_up|) <= gap_epsilon. Classic: the gap alone.

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdint>
#include <cstdio>
#include <exception>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <thread>
#include <vector>

#include "json.hpp"
#include "pfsddp/cut_pool.hpp"
#include "pfsddp/model.hpp"
#include "pfsddp/rng.hpp"
#include "pfsddp/stage_solver.hpp"

namespace pfsddp {

struct EngineConfig {
  Mode mode = Mode::PenaltyFree;
  int max_iters = 200;
  double gap_epsilon = 0.005;
  double feas_tol = 1e-6;
  std::optional<int> n_forward_paths;  // default: 1 if deterministic, else 20
  std::uint64_t seed = 0;
  double theta_lower_bound = 0.0;
  double confidence_z = 1.96;
  std::optional<double> penalty_override;  // classic mode
  int threads = 1;
  long long enumerate_max_leaves = 64;  // forward passes enumerate every path up to this many leaves

  int forward_paths(const Instance& inst) const {
    if (n_forward_paths) return *n_forward_paths;
    return is_deterministic(inst) ? 1 : 20;
  }
};

struct IterationStats {
  int iteration = 0;
  double z_low = 0.0;
  double z_up = 0.0;
  double z_up_stderr = 0.0;
  double gap = 0.0;
  int new_feasibility_cuts = 0;
  int new_optimality_cuts = 0;
  double fff_at_root = 0.0;
  double wall_time = 0.0;
};

/// A realization index per stage, with the weight of the path in averages.
struct ScenarioPath {
  std::vector<int> realizations;
  double weight = 1.0;
};

struct PathRecord {
  ScenarioPath path;
  double cost = 0.0;          // sum of c.x
  double penalty_cost = 0.0;  // classic mode
  double weighted_violation = 0.0;
  std::vector<std::vector<double>> slacks;  // [stage][relaxable row]
  std::vector<std::vector<double>> states;  // outgoing state per stage
  std::vector<double> first_stage_decision;
};

struct ForwardResult {
  std::vector<std::vector<std::vector<double>>> trial_states;  // [stage][state]
  std::vector<PathRecord> paths;
};

struct BackwardResult {
  int n_new_feas = 0;
  int n_new_opt = 0;
};

struct BoundEstimate {
  double mean = 0.0;
  double std_error = 0.0;
};

struct RootSolve {
  double z_low = 0.0;
  double fff_at_root = 0.0;
  std::vector<double> first_stage_decision;
};

struct ViolationEntry {
  int stage = 0;  // 0-based
  std::string label;
  double expected = 0.0;
  double max = 0.0;
};

struct SimulationReport {
  bool enumerated = false;
  std::vector<PathRecord> paths;
  double expected_cost = 0.0;
  double cost_stderr = 0.0;
  double expected_penalty_cost = 0.0;
  double expected_violation = 0.0;
  double worst_path_violation = 0.0;
  std::vector<ViolationEntry> by_stage_label;
  std::map<std::string, double> by_label;   // summed over stages, expected
  std::map<std::string, double> by_family;  // label prefix before ':'
};

enum class StopReason { GapAndFeasStable, MaxIters, StructuralInfeasibility };

inline const char* to_string(StopReason r) {
  switch (r) {
    case StopReason::GapAndFeasStable: return "gap_and_feas_stable";
    case StopReason::MaxIters: return "max_iters";
    case StopReason::StructuralInfeasibility: return "structural_infeasibility";
  }
  return "?";
}

struct RunReport {
  std::string instance_name;
  EngineConfig config;
  bool converged = false;
  StopReason reason = StopReason::MaxIters;
  std::string message;
  int structural_stage = -1;  // 0-based, when reason is structural_infeasibility
  std::vector<IterationStats> iterations;
  Policy policy;
  SimulationReport simulation;
  std::vector<double> first_stage_decision;
  double fff_at_root = 0.0;
  double z_low = 0.0;
  double z_up = 0.0;
  double wall_time = 0.0;
};

namespace detail {

/// Runs fn(i) for i in [0, n) on up to `threads` workers. Exceptions are
/// rethrown in index order, so the outcome matches a serial loop.
template <class Fn>
void parallel_for(int n, int threads, Fn&& fn) {
  std::vector<std::exception_ptr> errors(n);
  auto body = [&](int i) {
    try {
      fn(i);
    } catch (...) {
      errors[i] = std::current_exception();
    }
  };
  const int workers = std::min(std::max(threads, 1), std::max(n, 1));
  if (workers <= 1) {
    for (int i = 0; i < n; ++i) body(i);
  } else {
    std::vector<std::thread> pool;
    for (int w = 0; w < workers; ++w)
      pool.emplace_back([&, w] {
        for (int i = w; i < n; i += workers) body(i);
      });
    for (auto& th : pool) th.join();
  }
  for (auto& e : errors)
    if (e) std::rethrow_exception(e);
}

inline double distance(const std::vector<double>& a, const std::vector<double>& b) {
  double s = 0.0;
  for (size_t i = 0; i < a.size(); ++i) s += (a[i] - b[i]) * (a[i] - b[i]);
  return std::sqrt(s);
}

inline void insert_unique(std::vector<std::vector<double>>& set, const std::vector<double>& x) {
  for (const auto& y : set)
    if (distance(x, y) <= 1e-9) return;
  set.push_back(x);
}

struct StageStep {
  OptimalityResult opt;
  std::optional<FeasibilityResult> feas;
};

inline StageStep solve_stage(const Instance& inst, const Policy& policy, int t, std::span<const double> x_prev,
                             int k) {
  StageStep step;
  if (policy.mode == Mode::PenaltyFree) {
    step.feas = solve_feasibility(inst, t, x_prev, k, policy.fff_after(t));
    step.opt = solve_optimality(inst, t, x_prev, k, policy.fcf_after(t), policy.fff_after(t), step.feas->s_star,
                                step.feas->beta_star, policy.theta_lower_bound);
  } else {
    step.opt =
        solve_classic(inst, t, x_prev, k, policy.fcf_after(t), policy.penalty_override, policy.theta_lower_bound);
  }
  return step;
}

inline PathRecord run_path(const Instance& inst, const Policy& policy, const ScenarioPath& path) {
  PathRecord rec;
  rec.path = path;
  std::vector<double> x_prev = inst.initial_state;
  for (int t = 0; t < inst.T; ++t) {
    StageStep step = solve_stage(inst, policy, t, x_prev, path.realizations[t]);
    const StageData& st = inst.stages[t];
    const auto rel = relaxable_rows(st);
    rec.cost += step.opt.stage_cost;
    rec.penalty_cost += step.opt.penalty_cost;
    for (size_t r = 0; r < rel.size(); ++r)
      rec.weighted_violation += *st.rows[rel[r]].slack_weight * step.opt.slacks_used[r];
    rec.slacks.push_back(step.opt.slacks_used);
    rec.states.push_back(step.opt.outgoing_state);
    if (t == 0) rec.first_stage_decision = step.opt.x;
    x_prev = step.opt.outgoing_state;
  }
  return rec;
}

}  // namespace detail

/// Every root-to-leaf path with its probability.
inline std::vector<ScenarioPath> enumerate_paths(const Instance& inst) {
  std::vector<ScenarioPath> paths{{{}, 1.0}};
  for (const auto& st : inst.stages) {
    std::vector<ScenarioPath> next;
    for (const auto& p : paths)
      for (int k = 0; k < static_cast<int>(st.realizations.size()); ++k) {
        ScenarioPath q = p;
        q.realizations.push_back(k);
        q.weight *= st.realizations[k].probability;
        next.push_back(std::move(q));
      }
    paths = std::move(next);
  }
  return paths;
}

/// n i.i.d. paths with weight 1/n.
inline std::vector<ScenarioPath> sample_paths(const Instance& inst, int n, std::uint64_t seed, std::uint64_t iteration) {
  std::vector<ScenarioPath> paths;
  for (int p = 0; p < n; ++p) {
    SplitMix64 rng = SplitMix64::stream(seed, iteration, static_cast<std::uint64_t>(p));
    ScenarioPath path;
    path.weight = 1.0 / n;
    for (const auto& st : inst.stages) {
      const double u = rng.uniform();
      double acc = 0.0;
      int k = static_cast<int>(st.realizations.size()) - 1;
      for (int i = 0; i < static_cast<int>(st.realizations.size()); ++i) {
        acc += st.realizations[i].probability;
        if (u < acc) {
          k = i;
          break;
        }
      }
      path.realizations.push_back(k);
    }
    paths.push_back(std::move(path));
  }
  return paths;
}

inline std::vector<ScenarioPath> forward_paths_for(const Instance& inst, const EngineConfig& cfg,
                                                   std::uint64_t iteration) {
  if (leaf_count(inst, cfg.enumerate_max_leaves) <= cfg.enumerate_max_leaves) return enumerate_paths(inst);
  return sample_paths(inst, cfg.forward_paths(inst), cfg.seed, iteration);
}

inline ForwardResult forward_pass(const Instance& inst, const Policy& policy, const std::vector<ScenarioPath>& paths,
                                  int threads = 1) {
  for (const auto& p : paths) {
    if (static_cast<int>(p.realizations.size()) != inst.T) throw DimensionMismatch("path length does not match T");
    for (int t = 0; t < inst.T; ++t)
      if (p.realizations[t] < 0 || p.realizations[t] >= static_cast<int>(inst.stages[t].realizations.size()))
        throw IndexError("path realization out of range at stage " + std::to_string(t));
  }
  ForwardResult out;
  out.paths.resize(paths.size());
  detail::parallel_for(static_cast<int>(paths.size()), threads,
                       [&](int i) { out.paths[i] = detail::run_path(inst, policy, paths[i]); });
  out.trial_states.resize(inst.T);
  for (const auto& rec : out.paths)
    for (int t = 0; t < inst.T; ++t) detail::insert_unique(out.trial_states[t], rec.states[t]);
  return out;
}

/// Sweeps stages T-1..1; at each outgoing state of stage t-1 and each
/// realization of stage t, adds per-realization feasibility cuts and one
/// expected optimality cut to the pools of stage t.
inline BackwardResult backward_pass(const Instance& inst, Policy& policy,
                                    const std::vector<std::vector<std::vector<double>>>& trial_states,
                                    double feas_tol = 1e-6, int iteration = 0, int threads = 1) {
  BackwardResult out;
  for (int t = inst.T - 1; t >= 1; --t) {
    const auto& states = trial_states.at(t - 1);
    const int K = static_cast<int>(inst.stages[t].realizations.size());
    const int n_tasks = static_cast<int>(states.size()) * K;
    std::vector<detail::StageStep> steps(n_tasks);
    detail::parallel_for(n_tasks, threads, [&](int task) {
      steps[task] = detail::solve_stage(inst, policy, t, states[task / K], task % K);
    });
    for (int i = 0; i < static_cast<int>(states.size()); ++i) {
      std::vector<std::pair<double, Cut>> opt_cuts;
      for (int k = 0; k < K; ++k) {
        auto& step = steps[i * K + k];
        if (step.feas) {
          Cut c = step.feas->cut;
          c.origin = {t, iteration, k, i};
          if (policy.fff[t].add_if_novel(std::move(c), states[i], feas_tol)) ++out.n_new_feas;
        }
        opt_cuts.emplace_back(inst.stages[t].realizations[k].probability, step.opt.cut);
      }
      Cut agg = expected_cut(opt_cuts);
      agg.origin = {t, iteration, kAggregated, i};
      if (policy.fcf[t].add_if_novel(std::move(agg), states[i], feas_tol)) ++out.n_new_opt;
    }
  }
  return out;
}

/// Root subproblem with the current pools.
inline RootSolve solve_root(const Instance& inst, const Policy& policy) {
  RootSolve r;
  detail::StageStep step = detail::solve_stage(inst, policy, 0, inst.initial_state, 0);
  r.z_low = step.opt.objective_value;
  r.fff_at_root = step.feas ? step.feas->value : 0.0;
  r.first_stage_decision = step.opt.x;
  return r;
}

inline double lower_bound(const Instance& inst, const Policy& policy) { return solve_root(inst, policy).z_low; }

/// Objective of a forward path: cost, plus penalties in classic mode.
inline double path_objective(const Policy& policy, const PathRecord& rec) {
  return rec.cost + (policy.mode == Mode::Classic ? rec.penalty_cost : 0.0);
}

inline BoundEstimate estimate_bound(const Policy& policy, const std::vector<PathRecord>& recs, bool enumerated) {
  BoundEstimate b;
  for (const auto& r : recs) b.mean += r.path.weight * path_objective(policy, r);
  if (!enumerated && recs.size() > 1) {
    double ss = 0.0;
    for (const auto& r : recs) ss += (path_objective(policy, r) - b.mean) * (path_objective(policy, r) - b.mean);
    b.std_error = std::sqrt(ss / static_cast<double>(recs.size() - 1)) / std::sqrt(static_cast<double>(recs.size()));
  }
  return b;
}

/// Z_up: exact policy value when all paths are enumerated, otherwise a
/// sample mean over n_paths seeded paths. Slacks carry no cost in
/// penalty-free mode.
inline BoundEstimate upper_bound(const Instance& inst, const Policy& policy, int n_paths, std::uint64_t seed,
                                 long long enumerate_max_leaves = 64, int threads = 1) {
  const bool enumerated = leaf_count(inst, enumerate_max_leaves) <= enumerate_max_leaves;
  auto paths = enumerated ? enumerate_paths(inst) : sample_paths(inst, n_paths, seed, 0);
  auto fwd = forward_pass(inst, policy, paths, threads);
  return estimate_bound(policy, fwd.paths, enumerated);
}

inline SimulationReport summarize(const Instance& inst, const Policy& policy, std::vector<PathRecord> recs,
                                  bool enumerated) {
  SimulationReport rep;
  rep.enumerated = enumerated;
  const BoundEstimate cost = [&] {
    Policy pf = policy;
    pf.mode = Mode::PenaltyFree;  // cost only
    return estimate_bound(pf, recs, enumerated);
  }();
  rep.expected_cost = cost.mean;
  rep.cost_stderr = cost.std_error;
  for (int t = 0; t < inst.T; ++t) {
    const StageData& st = inst.stages[t];
    const auto rel = relaxable_rows(st);
    for (size_t r = 0; r < rel.size(); ++r) {
      ViolationEntry e;
      e.stage = t;
      e.label = st.rows[rel[r]].label;
      for (const auto& rec : recs) {
        e.expected += rec.path.weight * rec.slacks[t][r];
        e.max = std::max(e.max, rec.slacks[t][r]);
      }
      rep.by_label[e.label] += e.expected;
      const auto colon = e.label.find(':');
      rep.by_family[e.label.substr(0, colon)] += e.expected;
      rep.by_stage_label.push_back(std::move(e));
    }
  }
  for (const auto& rec : recs) {
    rep.expected_penalty_cost += rec.path.weight * rec.penalty_cost;
    rep.expected_violation += rec.path.weight * rec.weighted_violation;
    rep.worst_path_violation = std::max(rep.worst_path_violation, rec.weighted_violation);
  }
  rep.paths = std::move(recs);
  return rep;
}

/// Policy evaluation: exact over the enumerated tree when it has at most
/// `enumerate_max_leaves` leaves, otherwise n_paths sampled paths.
inline SimulationReport simulate(const Instance& inst, const Policy& policy, int n_paths, std::uint64_t seed,
                                 long long enumerate_max_leaves = 64, int threads = 1) {
  const bool enumerated = leaf_count(inst, enumerate_max_leaves) <= enumerate_max_leaves;
  auto paths = enumerated ? enumerate_paths(inst) : sample_paths(inst, n_paths, seed, 0);
  auto fwd = forward_pass(inst, policy, paths, threads);
  return summarize(inst, policy, std::move(fwd.paths), enumerated);
}

inline RunReport run(const Instance& inst, const EngineConfig& cfg) {
  using clock = std::chrono::steady_clock;
  const auto issues = validate(inst);
  if (!issues.empty()) throw ValidationError(issues.front().stage, issues.front().row, describe(issues.front()));
  if (!(cfg.gap_epsilon > 0)) throw Error("gap_epsilon must be positive");
  if (cfg.forward_paths(inst) < 1) throw Error("n_forward_paths must be at least 1");

  const auto start = clock::now();
  RunReport rep;
  rep.instance_name = inst.name;
  rep.config = cfg;
  rep.policy = Policy::empty_for(inst, cfg.mode);
  rep.policy.penalty_override = cfg.mode == Mode::Classic ? cfg.penalty_override : std::nullopt;
  rep.policy.theta_lower_bound = cfg.theta_lower_bound;
  const bool enumerated = leaf_count(inst, cfg.enumerate_max_leaves) <= cfg.enumerate_max_leaves;

  try {
    for (int it = 1; it <= cfg.max_iters; ++it) {
      const auto t0 = clock::now();
      const auto paths = forward_paths_for(inst, cfg, static_cast<std::uint64_t>(it));
      ForwardResult fwd = forward_pass(inst, rep.policy, paths, cfg.threads);
      const BoundEstimate up = estimate_bound(rep.policy, fwd.paths, enumerated);
      // The policy Z_up was measured on; the backward pass below may move the
      // final policy to states whose feasibility was never checked.
      Policy evaluated = rep.policy;
      const BackwardResult bwd = backward_pass(inst, rep.policy, fwd.trial_states, cfg.feas_tol, it, cfg.threads);
      const RootSolve root = solve_root(inst, rep.policy);

      IterationStats s;
      s.iteration = it;
      s.z_low = root.z_low;
      s.z_up = up.mean;
      s.z_up_stderr = up.std_error;
      s.gap = std::abs(up.mean - root.z_low) / std::max(1.0, std::abs(up.mean));
      s.new_feasibility_cuts = bwd.n_new_feas;
      s.new_optimality_cuts = bwd.n_new_opt;
      s.fff_at_root = root.fff_at_root;
      s.wall_time = std::chrono::duration<double>(clock::now() - t0).count();
      rep.iterations.push_back(s);
      rep.z_low = root.z_low;
      rep.z_up = up.mean;
      rep.fff_at_root = root.fff_at_root;
      rep.first_stage_decision = root.first_stage_decision;

      const bool feas_stable = cfg.mode == Mode::Classic || bwd.n_new_feas == 0;
      if (feas_stable && s.gap <= cfg.gap_epsilon) {
        rep.converged = true;
        rep.reason = StopReason::GapAndFeasStable;
        rep.policy = std::move(evaluated);
        if (!fwd.paths.empty()) rep.first_stage_decision = fwd.paths.front().first_stage_decision;
        break;
      }
      if (enumerated && bwd.n_new_feas == 0 && bwd.n_new_opt == 0) {
        // Same paths, same pools: every later iteration would repeat this one.
        rep.message = "stalled: no new cuts with the gap still open";
        break;
      }
    }
    if (!rep.converged) {
      rep.reason = StopReason::MaxIters;
      if (rep.message.empty()) rep.message = "iteration limit reached before convergence";
    }
    rep.simulation = simulate(inst, rep.policy, cfg.forward_paths(inst), cfg.seed, cfg.enumerate_max_leaves,
                              cfg.threads);
  } catch (const StructuralInfeasibility& e) {
    rep.converged = false;
    rep.reason = StopReason::StructuralInfeasibility;
    rep.structural_stage = e.stage();
    rep.message = e.what();
  }
  rep.wall_time = std::chrono::duration<double>(clock::now() - start).count();
  return rep;
}

// ---------------------------------------------------------------------------
// Report output

inline std::string iteration_log_header() {
  return "# iteration z_low z_up z_up_stderr new_feas_cuts new_opt_cuts\n";
}

inline std::string iteration_log_line(const IterationStats& s) {
  char buf[256];
  std::snprintf(buf, sizeof buf, "%d %.17g %.17g %.17g %d %d\n", s.iteration, s.z_low, s.z_up, s.z_up_stderr,
                s.new_feasibility_cuts, s.new_optimality_cuts);
  return buf;
}

inline nlohmann::json simulation_to_json(const SimulationReport& sim, bool with_paths = true) {
  using nlohmann::json;
  json j;
  j["enumerated"] = sim.enumerated;
  j["expected_cost"] = sim.expected_cost;
  j["cost_stderr"] = sim.cost_stderr;
  j["expected_penalty_cost"] = sim.expected_penalty_cost;
  j["expected_violation"] = sim.expected_violation;
  j["worst_path_violation"] = sim.worst_path_violation;
  json vs = json::array();
  for (const auto& e : sim.by_stage_label)
    vs.push_back({{"stage", e.stage + 1}, {"label", e.label}, {"expected_slack", e.expected}, {"max_slack", e.max}});
  j["violation_summary"] = vs;
  j["violation_by_label"] = sim.by_label;
  j["violation_by_family"] = sim.by_family;
  if (with_paths) {
    json ps = json::array();
    for (const auto& p : sim.paths)
      ps.push_back({{"realizations", p.path.realizations},
                    {"weight", p.path.weight},
                    {"cost", p.cost},
                    {"penalty_cost", p.penalty_cost},
                    {"weighted_violation", p.weighted_violation}});
    j["paths"] = ps;
  }
  return j;
}

inline nlohmann::json report_to_json(const RunReport& rep) {
  using nlohmann::json;
  json j;
  j["format"] = "pfsddp-run-report";
  j["version"] = 1;
  j["instance"] = rep.instance_name;
  j["mode"] = to_string(rep.config.mode);
  j["config"] = {{"max_iters", rep.config.max_iters},
                 {"gap_epsilon", rep.config.gap_epsilon},
                 {"feas_tol", rep.config.feas_tol},
                 {"seed", rep.config.seed},
                 {"theta_lower_bound", rep.config.theta_lower_bound}};
  if (rep.config.penalty_override) j["config"]["penalty_override"] = *rep.config.penalty_override;
  j["converged"] = rep.converged;
  j["reason"] = to_string(rep.reason);
  if (!rep.message.empty()) j["message"] = rep.message;
  if (rep.reason == StopReason::StructuralInfeasibility) j["structural_stage"] = rep.structural_stage + 1;
  json its = json::array();
  for (const auto& s : rep.iterations)
    its.push_back({{"iteration", s.iteration},
                   {"z_low", s.z_low},
                   {"z_up", s.z_up},
                   {"z_up_stderr", s.z_up_stderr},
                   {"gap", s.gap},
                   {"new_feasibility_cuts", s.new_feasibility_cuts},
                   {"new_optimality_cuts", s.new_optimality_cuts},
                   {"fff_at_root", s.fff_at_root},
                   {"wall_time", s.wall_time}});
  j["iterations"] = its;
  j["z_low"] = rep.z_low;
  j["z_up"] = rep.z_up;
  j["fff_at_root"] = rep.fff_at_root;
  j["first_stage_decision"] = rep.first_stage_decision;
  j["cuts"] = {{"optimality", rep.policy.total_cuts(CutKind::Optimality)},
               {"feasibility", rep.policy.total_cuts(CutKind::Feasibility)}};
  if (rep.reason != StopReason::StructuralInfeasibility) j["simulation"] = simulation_to_json(rep.simulation);
  j["wall_time"] = rep.wall_time;
  return j;
}

}  // namespace pfsddp

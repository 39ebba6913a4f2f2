// pfsddp: generate hydrothermal instances, train penalty-free or classic
// SDDP policies, compare against the extensive-form oracle, and simulate.
//
// Exit codes: 0 success/converged, 2 bad flags or unreadable input,
// 3 scenario tree too large for the oracle, 4 iteration limit reached,
// 5 structural infeasibility, 1 any other failure.

#include <cstdio>
#include <cstdlib>
#include <fstream>
#include <iostream>
#include <sstream>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "pfsddp/pfsddp.hpp"

namespace {

using namespace pfsddp;

enum Exit { kOk = 0, kFailure = 1, kBadInput = 2, kTreeTooLarge = 3, kMaxIters = 4, kStructural = 5 };

enum class LogLevel { Error = 0, Info = 1, Debug = 2 };

LogLevel log_level() {
  const char* env = std::getenv("PFSDDP_LOG");
  if (!env) return LogLevel::Error;
  const std::string v = env;
  if (v == "debug") return LogLevel::Debug;
  if (v == "info") return LogLevel::Info;
  return LogLevel::Error;
}

void log(LogLevel level, const std::string& msg) {
  if (level <= log_level()) std::cerr << "[pfsddp] " << msg << "\n";
}

struct InputError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

std::string read_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw InputError("cannot read '" + path + "'");
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

void write_file(const std::string& path, const std::string& content) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw std::runtime_error("cannot write '" + path + "'");
  out << content;
}

Instance read_instance(const std::string& path) {
  try {
    return load_instance(read_file(path));
  } catch (const ParseError& e) {
    throw InputError(e.what());
  } catch (const ValidationError& e) {
    throw InputError(e.what());
  }
}

std::string fmt(double v) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.10g", v);
  return buf;
}

// ---------------------------------------------------------------------------

struct GenerateArgs {
  std::string fixture;
  hydro::GenParams params;
  std::string out;
  std::string system_out;
  bool oracle = false;
};

int cmd_generate(const GenerateArgs& a) {
  hydro::HydroSystem sys;
  if (!a.fixture.empty()) {
    auto all = hydro::fixture_systems();
    auto it = all.find(a.fixture);
    if (it == all.end()) throw InputError("unknown fixture '" + a.fixture + "'");
    sys = it->second;
  } else {
    try {
      sys = hydro::generate(a.params);
    } catch (const Error& e) {
      throw InputError(e.what());
    }
  }
  const Instance inst = hydro::compile(sys);
  write_file(a.out, save_instance(inst));
  if (!a.system_out.empty()) write_file(a.system_out, hydro::system_to_json(sys).dump(2) + "\n");
  log(LogLevel::Info, "wrote instance '" + inst.name + "' to " + a.out);
  if (a.oracle) {
    try {
      const auto h = solve_hierarchical(inst);
      std::cout << "V*=" << fmt(h.V_star) << " C*=" << fmt(h.C_star) << "\n";
    } catch (const TreeTooLarge& e) {
      std::cerr << "error: " << e.what() << "\n";
      return kTreeTooLarge;
    }
  }
  return kOk;
}

struct SolveArgs {
  std::string instance;
  std::string mode = "penalty-free";
  double gap = 0.005;
  int max_iters = 200;
  int paths = 0;
  std::uint64_t seed = 0;
  int threads = 1;
  double penalty = 0.0;
  double theta_lb = 0.0;
  std::string policy_out, report_out, log_out;
};

EngineConfig make_config(const SolveArgs& a) {
  EngineConfig cfg;
  cfg.mode = mode_from_string(a.mode);
  cfg.gap_epsilon = a.gap;
  cfg.max_iters = a.max_iters;
  if (a.paths > 0) cfg.n_forward_paths = a.paths;
  cfg.seed = a.seed;
  cfg.threads = a.threads;
  if (a.penalty > 0) cfg.penalty_override = a.penalty;
  cfg.theta_lower_bound = a.theta_lb;
  return cfg;
}

int cmd_solve(const SolveArgs& a) {
  const Instance inst = read_instance(a.instance);
  const EngineConfig cfg = make_config(a);
  log(LogLevel::Info, "solving '" + inst.name + "' in " + to_string(cfg.mode) + " mode");
  const RunReport rep = run(inst, cfg);

  std::string log_text = iteration_log_header();
  for (const auto& s : rep.iterations) {
    log_text += iteration_log_line(s);
    log(LogLevel::Debug, iteration_log_line(s).substr(0, iteration_log_line(s).size() - 1));
  }
  if (!a.log_out.empty()) write_file(a.log_out, log_text);
  else std::cout << log_text;

  if (!a.report_out.empty()) write_file(a.report_out, report_to_json(rep).dump(2) + "\n");
  if (!a.policy_out.empty() && rep.reason != StopReason::StructuralInfeasibility)
    write_file(a.policy_out, serialize_policy(rep.policy));

  std::cout << "status=" << to_string(rep.reason) << " iterations=" << rep.iterations.size()
            << " z_low=" << fmt(rep.z_low) << " z_up=" << fmt(rep.z_up) << " fff_at_root=" << fmt(rep.fff_at_root);
  if (rep.reason != StopReason::StructuralInfeasibility)
    std::cout << " cost=" << fmt(rep.simulation.expected_cost)
              << " violation=" << fmt(rep.simulation.expected_violation);
  std::cout << "\n";
  switch (rep.reason) {
    case StopReason::GapAndFeasStable: return kOk;
    case StopReason::MaxIters: return kMaxIters;
    case StopReason::StructuralInfeasibility:
      std::cerr << "error: " << rep.message << "\n";
      return kStructural;
  }
  return kFailure;
}

struct CompareArgs {
  SolveArgs solve;
  std::vector<double> classic_penalties;
  std::string out;
  bool table = false;
};

struct CompareRow {
  std::string method;
  double penalty = 0.0;
  double operation_cost = 0.0;
  double violation_cost = 0.0;  // expected weighted slack
  double worst_path_violation = 0.0;
  int iterations = 0;
  bool converged = true;
  double wall_time = 0.0;
  std::map<std::string, double> by_label;
};

CompareRow row_from_run(const std::string& method, const RunReport& rep) {
  CompareRow r;
  r.method = method;
  r.operation_cost = rep.simulation.expected_cost;
  r.violation_cost = rep.simulation.expected_violation;
  r.worst_path_violation = rep.simulation.worst_path_violation;
  r.iterations = static_cast<int>(rep.iterations.size());
  r.converged = rep.converged;
  r.wall_time = rep.wall_time;
  r.by_label = rep.simulation.by_label;
  return r;
}

int cmd_compare(const CompareArgs& a) {
  using clock = std::chrono::steady_clock;
  const Instance inst = read_instance(a.solve.instance);
  std::vector<CompareRow> rows;

  const auto t0 = clock::now();
  HierarchicalResult h;
  try {
    h = solve_hierarchical(inst);
  } catch (const TreeTooLarge& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kTreeTooLarge;
  }
  {
    CompareRow r;
    r.method = "extensive";
    r.operation_cost = h.C_star;
    r.violation_cost = h.expected_violation;
    r.worst_path_violation = h.V_star;
    r.wall_time = std::chrono::duration<double>(clock::now() - t0).count();
    for (const auto& n : h.nodes) {
      const auto& st = inst.stages[n.stage];
      const auto rel = relaxable_rows(st);
      for (size_t k = 0; k < rel.size(); ++k) r.by_label[st.rows[rel[k]].label] += n.probability * n.slacks[k];
    }
    rows.push_back(r);
  }

  std::vector<std::optional<double>> penalties;
  for (double p : a.classic_penalties) penalties.emplace_back(p);
  if (penalties.empty()) penalties.emplace_back(std::nullopt);
  for (const auto& p : penalties) {
    SolveArgs s = a.solve;
    s.mode = "classic";
    EngineConfig cfg = make_config(s);
    cfg.penalty_override = p;
    const RunReport rep = run(inst, cfg);
    if (rep.reason == StopReason::StructuralInfeasibility) {
      std::cerr << "error: " << rep.message << "\n";
      return kStructural;
    }
    CompareRow r = row_from_run("classic", rep);
    r.penalty = p.value_or(0.0);
    rows.push_back(r);
  }
  {
    SolveArgs s = a.solve;
    s.mode = "penalty-free";
    const RunReport rep = run(inst, make_config(s));
    if (rep.reason == StopReason::StructuralInfeasibility) {
      std::cerr << "error: " << rep.message << "\n";
      return kStructural;
    }
    rows.push_back(row_from_run("penalty_free", rep));
  }

  nlohmann::json j;
  j["format"] = "pfsddp-compare-report";
  j["version"] = 1;
  j["instance"] = inst.name;
  j["gap_epsilon"] = a.solve.gap;
  nlohmann::json methods = nlohmann::json::array();
  nlohmann::json labels = nlohmann::json::object();
  for (const auto& r : rows) {
    nlohmann::json m = {{"method", r.method},
                        {"operation_cost", r.operation_cost},
                        {"violation_cost", r.violation_cost},
                        {"worst_path_violation", r.worst_path_violation},
                        {"iterations", r.iterations},
                        {"converged", r.converged},
                        {"wall_time", r.wall_time}};
    std::string key = r.method;
    if (r.method == "classic") {
      if (r.penalty > 0) {
        m["penalty"] = r.penalty;
        key += "(p=" + fmt(r.penalty) + ")";
      }
    }
    methods.push_back(m);
    labels[key] = r.by_label;
  }
  j["methods"] = methods;
  j["violations_by_label"] = labels;
  if (!a.out.empty()) write_file(a.out, j.dump(2) + "\n");

  if (a.table || a.out.empty()) {
    std::printf("%-22s %16s %16s %12s %10s\n", "method", "operation_cost", "violation_cost", "worst_path", "iterations");
    for (const auto& r : rows) {
      std::string name = r.method;
      if (r.method == "classic" && r.penalty > 0) name += "(p=" + fmt(r.penalty) + ")";
      std::printf("%-22s %16.6f %16.6f %12.6f %10d\n", name.c_str(), r.operation_cost, r.violation_cost,
                  r.worst_path_violation, r.iterations);
    }
  }
  return kOk;
}

struct SimulateArgs {
  std::string instance, policy, out;
  int paths = 100;
  std::uint64_t seed = 0;
};

int cmd_simulate(const SimulateArgs& a) {
  const Instance inst = read_instance(a.instance);
  Policy policy;
  try {
    policy = deserialize_policy(read_file(a.policy));
  } catch (const ParseError& e) {
    throw InputError(e.what());
  }
  if (policy.T != inst.T || policy.m != inst.m) throw InputError("policy does not match the instance dimensions");
  const SimulationReport sim = simulate(inst, policy, a.paths, a.seed);
  nlohmann::json j = simulation_to_json(sim);
  j["format"] = "pfsddp-simulation-report";
  j["version"] = 1;
  j["instance"] = inst.name;
  j["mode"] = to_string(policy.mode);
  if (!a.out.empty()) write_file(a.out, j.dump(2) + "\n");

  std::printf("expected_cost=%s cost_stderr=%s expected_violation=%s worst_path_violation=%s\n",
              fmt(sim.expected_cost).c_str(), fmt(sim.cost_stderr).c_str(), fmt(sim.expected_violation).c_str(),
              fmt(sim.worst_path_violation).c_str());
  for (const auto& [label, v] : sim.by_label) std::printf("%-24s %.10g\n", label.c_str(), v);
  return kOk;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Penalty-free SDDP for multistage stochastic linear programs"};
  app.require_subcommand(1);

  GenerateArgs gen;
  auto* g = app.add_subcommand("generate", "Write a hydrothermal instance (generated or a named fixture)");
  g->add_option("--fixture", gen.fixture, "toy_feasible | toy_infeasible | toy_stochastic");
  g->add_option("--reservoirs", gen.params.n_reservoirs)->check(CLI::PositiveNumber);
  g->add_option("--stages", gen.params.n_stages)->check(CLI::PositiveNumber);
  g->add_option("--thermals", gen.params.n_thermals)->check(CLI::PositiveNumber);
  g->add_option("--realizations", gen.params.realizations_per_stage)->check(CLI::PositiveNumber);
  g->add_option("--tightness", gen.params.hoc_tightness)->check(CLI::Range(0.0, 1.0));
  g->add_option("--seed", gen.params.seed);
  g->add_option("--out", gen.out, "Instance file to write")->required();
  g->add_option("--system-out", gen.system_out, "Also write the hydro system description");
  g->add_flag("--oracle", gen.oracle, "Print V* and C* from the extensive-form oracle");

  SolveArgs solve;
  auto add_solve_flags = [](CLI::App* c, SolveArgs& s) {
    c->add_option("--instance", s.instance)->required();
    c->add_option("--gap", s.gap, "Relative optimality gap")->check(CLI::PositiveNumber);
    c->add_option("--max-iters", s.max_iters)->check(CLI::PositiveNumber);
    c->add_option("--paths", s.paths, "Forward paths per iteration when the tree is not enumerated")
        ->check(CLI::PositiveNumber);
    c->add_option("--seed", s.seed);
    c->add_option("--threads", s.threads)->check(CLI::PositiveNumber);
    c->add_option("--theta-lb", s.theta_lb, "Lower bound on the future cost variable");
  };
  auto* s = app.add_subcommand("solve", "Train a policy");
  add_solve_flags(s, solve);
  s->add_option("--mode", solve.mode)->check(CLI::IsMember({"penalty-free", "penalty_free", "classic"}));
  s->add_option("--penalty", solve.penalty, "Classic mode: uniform slack penalty")->check(CLI::PositiveNumber);
  s->add_option("--policy-out", solve.policy_out);
  s->add_option("--report-out", solve.report_out);
  s->add_option("--log-out", solve.log_out, "Iteration log file (default: stdout)");

  CompareArgs cmp;
  auto* c = app.add_subcommand("compare", "Extensive oracle vs classic SDDP vs penalty-free SDDP");
  add_solve_flags(c, cmp.solve);
  c->add_option("--classic-penalty", cmp.classic_penalties, "Uniform penalty for classic mode (repeatable)")
      ->delimiter(',');
  c->add_option("--out", cmp.out);
  c->add_flag("--table", cmp.table, "Print an aligned table");

  SimulateArgs sim;
  auto* m = app.add_subcommand("simulate", "Evaluate a trained policy");
  m->add_option("--instance", sim.instance)->required();
  m->add_option("--policy", sim.policy)->required();
  m->add_option("--paths", sim.paths)->check(CLI::PositiveNumber);
  m->add_option("--seed", sim.seed);
  m->add_option("--out", sim.out);

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    return kBadInput;
  }

  try {
    if (*g) return cmd_generate(gen);
    if (*s) return cmd_solve(solve);
    if (*c) return cmd_compare(cmp);
    if (*m) return cmd_simulate(sim);
  } catch (const InputError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kBadInput;
  } catch (const StructuralInfeasibility& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kStructural;
  } catch (const TreeTooLarge& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kTreeTooLarge;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kFailure;
  }
  return kFailure;
}

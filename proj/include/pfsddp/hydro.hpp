#pragma once
// Hydrothermal scheduling instances: reservoir cascades with unit
// productivity, thermal plants, a demand balance and relaxable minimum
// total outflow constraints.
//
// Per stage and reservoir r the variables are storage v_r (the state),
// release u_r and spill w_r, followed by one generation variable per thermal.
//   balance:      v_r + u_r + w_r - sum_{k upstream of r}(u_k + w_k) = a_r + v_r,prev
//   demand:       sum_r u_r + sum_j g_j >= d                         (hard)
//   min_outflow:  u_r + w_r >= q_r                                   (relaxable)

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <map>
#include <string>
#include <vector>

#include "json.hpp"
#include "pfsddp/error.hpp"
#include "pfsddp/model.hpp"
#include "pfsddp/rng.hpp"

namespace pfsddp::hydro {

inline constexpr int kNoDownstream = -1;

struct Reservoir {
  double capacity = 0.0;         // hm3
  double initial_storage = 0.0;  // hm3
  int downstream = kNoDownstream;
  double max_release = 0.0;          // hm3/stage
  std::vector<double> min_outflow;   // hm3/stage, one entry per stage; 0 means no constraint
  double hoc_weight = 1.0;
  double hoc_penalty = 1000.0;  // $/hm3, classic mode
};

struct Thermal {
  double capacity = 0.0;   // MWh/stage
  double unit_cost = 0.0;  // $/MWh
};

struct InflowScenario {
  double probability = 1.0;
  std::vector<double> inflow;  // per reservoir
};

struct HydroSystem {
  std::string name = "hydro";
  std::vector<Reservoir> reservoirs;
  std::vector<Thermal> thermals;
  std::vector<double> demand;                       // per stage, MWh
  std::vector<std::vector<InflowScenario>> inflows;  // [stage][realization]

  int stages() const { return static_cast<int>(demand.size()); }
};

struct GenParams {
  int n_reservoirs = 1;
  int n_stages = 3;
  int n_thermals = 1;
  int realizations_per_stage = 1;
  double hoc_tightness = 0.5;
  std::uint64_t seed = 1;
};

inline void check_topology(const HydroSystem& sys) {
  const int R = static_cast<int>(sys.reservoirs.size());
  for (int r = 0; r < R; ++r) {
    int steps = 0;
    for (int k = sys.reservoirs[r].downstream; k != kNoDownstream; k = sys.reservoirs[k].downstream) {
      if (k < 0 || k >= R) throw TopologyError("reservoir " + std::to_string(r) + " drains into an unknown reservoir");
      if (++steps > R) throw TopologyError("cascade cycle through reservoir " + std::to_string(r));
    }
  }
}

inline void check_system(const HydroSystem& sys) {
  check_topology(sys);
  const int T = sys.stages();
  const int R = static_cast<int>(sys.reservoirs.size());
  if (T < 1) throw Error("hydro system needs at least one stage");
  if (static_cast<int>(sys.inflows.size()) != T) throw Error("inflow stages do not match demand stages");
  for (const auto& res : sys.reservoirs) {
    if (res.capacity < 0 || res.initial_storage < 0 || res.max_release < 0 || res.hoc_weight <= 0 ||
        res.hoc_penalty <= 0)
      throw Error("reservoir data must be nonnegative with positive weights");
    if (static_cast<int>(res.min_outflow.size()) != T) throw Error("min_outflow must have one entry per stage");
  }
  for (const auto& th : sys.thermals)
    if (th.capacity < 0 || th.unit_cost < 0) throw Error("thermal data must be nonnegative");
  for (double d : sys.demand)
    if (d < 0) throw Error("demand must be nonnegative");
  for (int t = 0; t < T; ++t) {
    double total = 0.0;
    for (const auto& sc : sys.inflows[t]) {
      if (static_cast<int>(sc.inflow.size()) != R) throw Error("inflow vector length does not match reservoirs");
      total += sc.probability;
    }
    if (sys.inflows[t].empty() || std::abs(total - 1.0) > 1e-9)
      throw Error("inflow probabilities at stage " + std::to_string(t) + " must sum to 1");
  }
}

inline int storage_var(int r) { return 3 * r; }
inline int release_var(int r) { return 3 * r + 1; }
inline int spill_var(int r) { return 3 * r + 2; }

inline Instance compile(const HydroSystem& sys) {
  check_system(sys);
  const int R = static_cast<int>(sys.reservoirs.size());
  const int J = static_cast<int>(sys.thermals.size());
  const int T = sys.stages();
  Instance inst;
  inst.name = sys.name;
  inst.T = T;
  inst.m = R;
  for (const auto& res : sys.reservoirs) inst.initial_state.push_back(res.initial_storage);

  for (int t = 0; t < T; ++t) {
    StageData st;
    st.n = 3 * R + J;
    st.cost.assign(st.n, 0.0);
    st.var_upper.assign(st.n, kInf);
    for (int r = 0; r < R; ++r) {
      st.var_upper[storage_var(r)] = sys.reservoirs[r].capacity;
      st.var_upper[release_var(r)] = sys.reservoirs[r].max_release;
      st.state_indices.push_back(storage_var(r));
    }
    for (int j = 0; j < J; ++j) {
      st.cost[3 * R + j] = sys.thermals[j].unit_cost;
      st.var_upper[3 * R + j] = sys.thermals[j].capacity;
    }
    for (int r = 0; r < R; ++r) {
      Row row;
      row.sense = Sense::EQ;
      row.label = "balance:" + std::to_string(r);
      row.coeffs = {{storage_var(r), 1.0}, {release_var(r), 1.0}, {spill_var(r), 1.0}};
      for (int k = 0; k < R; ++k)
        if (sys.reservoirs[k].downstream == r) {
          row.coeffs.push_back({release_var(k), -1.0});
          row.coeffs.push_back({spill_var(k), -1.0});
        }
      st.rows.push_back(std::move(row));
      st.link.push_back({r, r, -1.0});
    }
    {
      Row row;
      row.sense = Sense::GE;
      row.label = "demand";
      for (int r = 0; r < R; ++r) row.coeffs.push_back({release_var(r), 1.0});
      for (int j = 0; j < J; ++j) row.coeffs.push_back({3 * R + j, 1.0});
      st.rows.push_back(std::move(row));
    }
    std::vector<int> hoc_of;
    for (int r = 0; r < R; ++r) {
      if (!(sys.reservoirs[r].min_outflow[t] > 0.0)) continue;
      Row row;
      row.sense = Sense::GE;
      row.relaxable = true;
      row.slack_weight = sys.reservoirs[r].hoc_weight;
      row.penalty_weight = sys.reservoirs[r].hoc_penalty;
      row.label = "min_outflow:" + std::to_string(r);
      row.coeffs = {{release_var(r), 1.0}, {spill_var(r), 1.0}};
      st.rows.push_back(std::move(row));
      hoc_of.push_back(r);
    }
    for (const auto& sc : sys.inflows[t]) {
      Realization re;
      re.probability = sc.probability;
      for (int r = 0; r < R; ++r) re.rhs.push_back(sc.inflow[r]);
      re.rhs.push_back(sys.demand[t]);
      for (int r : hoc_of) re.rhs.push_back(sys.reservoirs[r].min_outflow[t]);
      st.realizations.push_back(std::move(re));
    }
    inst.stages.push_back(std::move(st));
  }
  return inst;
}

namespace detail {
inline double round3(double v) { return std::round(v * 1000.0) / 1000.0; }
inline double draw(SplitMix64& rng, double lo, double hi) { return round3(lo + (hi - lo) * rng.uniform()); }
}  // namespace detail

/// Seeded random cascade. Thermal capacity always covers demand. The minimum
/// outflow is hoc_tightness * (W_r / T + 1), where W_r bounds all water that
/// can ever pass reservoir r, so tightness 1 forces violations on every path.
inline HydroSystem generate(const GenParams& p) {
  if (p.n_reservoirs < 1 || p.n_stages < 1 || p.n_thermals < 1 || p.realizations_per_stage < 1)
    throw Error("generator counts must be at least 1");
  if (p.hoc_tightness < 0 || p.hoc_tightness > 1) throw Error("hoc_tightness must lie in [0, 1]");
  using detail::draw;
  SplitMix64 rng(p.seed);
  const int R = p.n_reservoirs, T = p.n_stages, J = p.n_thermals, K = p.realizations_per_stage;
  HydroSystem sys;
  sys.name = "generated_r" + std::to_string(R) + "_t" + std::to_string(T) + "_s" + std::to_string(p.seed);
  for (int r = 0; r < R; ++r) {
    Reservoir res;
    res.capacity = draw(rng, 15.0, 30.0);
    res.initial_storage = detail::round3(res.capacity * draw(rng, 0.2, 0.6));
    res.max_release = draw(rng, 8.0, 15.0);
    res.hoc_weight = draw(rng, 1.0, 3.0);
    res.hoc_penalty = draw(rng, 50.0, 500.0);
    res.downstream = kNoDownstream;
    if (r + 1 < R && rng.uniform() < 0.6)
      res.downstream = r + 1 + static_cast<int>(rng.next() % static_cast<std::uint64_t>(R - r - 1));
    sys.reservoirs.push_back(res);
  }
  double max_demand = 0.0;
  for (int t = 0; t < T; ++t) {
    sys.demand.push_back(draw(rng, 4.0, 10.0) * R);
    max_demand = std::max(max_demand, sys.demand.back());
  }
  for (int j = 0; j < J; ++j) {
    Thermal th;
    th.capacity = detail::round3(std::ceil(max_demand / J * draw(rng, 1.0, 1.5) * 1000.0) / 1000.0);
    th.unit_cost = draw(rng, 5.0, 50.0);
    sys.thermals.push_back(th);
  }
  for (int t = 0; t < T; ++t) {
    const int k_here = t == 0 ? 1 : K;
    std::vector<double> weights;
    double wsum = 0.0;
    for (int k = 0; k < k_here; ++k) {
      weights.push_back(draw(rng, 1.0, 3.0));
      wsum += weights.back();
    }
    std::vector<InflowScenario> stage;
    double acc = 0.0;
    for (int k = 0; k < k_here; ++k) {
      InflowScenario sc;
      sc.probability = k + 1 == k_here ? 1.0 - acc : weights[k] / wsum;
      acc += sc.probability;
      for (int r = 0; r < R; ++r) sc.inflow.push_back(draw(rng, 0.0, 8.0));
      stage.push_back(std::move(sc));
    }
    sys.inflows.push_back(std::move(stage));
  }
  // Water bound per reservoir: own and upstream initial storage plus the
  // largest inflow of every stage.
  std::vector<double> own(R, 0.0);
  for (int r = 0; r < R; ++r) {
    own[r] = sys.reservoirs[r].initial_storage;
    for (int t = 0; t < T; ++t) {
      double mx = 0.0;
      for (const auto& sc : sys.inflows[t]) mx = std::max(mx, sc.inflow[r]);
      own[r] += mx;
    }
  }
  for (int r = 0; r < R; ++r) {
    double w = 0.0;
    for (int k = 0; k < R; ++k)
      for (int d = k; d != kNoDownstream; d = sys.reservoirs[d].downstream)
        if (d == r) {
          w += own[k];
          break;
        }
    const double q = detail::round3(p.hoc_tightness * (w / T + 1.0));
    sys.reservoirs[r].min_outflow.assign(T, q);
  }
  return sys;
}

inline HydroSystem toy_system(double v0, int T, std::vector<double> min_outflow,
                              std::vector<std::vector<InflowScenario>> inflows, std::string name) {
  HydroSystem sys;
  sys.name = std::move(name);
  Reservoir res;
  res.capacity = 10.0;
  res.initial_storage = v0;
  res.max_release = 10.0;
  res.min_outflow = std::move(min_outflow);
  res.hoc_weight = 1.0;
  res.hoc_penalty = 1000.0;
  sys.reservoirs.push_back(res);
  sys.thermals.push_back({10.0, 10.0});
  sys.demand.assign(T, 4.0);
  sys.inflows = std::move(inflows);
  return sys;
}

/// The three canonical fixtures, by name: toy_feasible, toy_infeasible, toy_stochastic.
inline std::map<std::string, HydroSystem> fixture_systems() {
  auto det = [](double a) { return std::vector<InflowScenario>{{1.0, {a}}}; };
  std::map<std::string, HydroSystem> out;
  out["toy_feasible"] = toy_system(7.0, 3, {3.0, 3.0, 3.0}, {det(2.0), det(0.0), det(0.0)}, "toy_feasible");
  out["toy_infeasible"] = toy_system(5.0, 3, {3.0, 3.0, 3.0}, {det(2.0), det(0.0), det(0.0)}, "toy_infeasible");
  out["toy_stochastic"] =
      toy_system(3.0, 2, {0.0, 3.0}, {det(2.0), {{0.5, {0.0}}, {0.5, {4.0}}}}, "toy_stochastic");
  return out;
}

inline std::map<std::string, Instance> fixtures() {
  std::map<std::string, Instance> out;
  for (const auto& [name, sys] : fixture_systems()) out[name] = compile(sys);
  return out;
}

inline Instance fixture(const std::string& name) {
  auto all = fixtures();
  auto it = all.find(name);
  if (it == all.end()) throw Error("unknown fixture '" + name + "'");
  return it->second;
}

inline nlohmann::json system_to_json(const HydroSystem& sys) {
  using nlohmann::json;
  json j;
  j["name"] = sys.name;
  json rs = json::array();
  for (const auto& r : sys.reservoirs)
    rs.push_back({{"capacity", r.capacity},
                  {"initial_storage", r.initial_storage},
                  {"downstream", r.downstream < 0 ? json(nullptr) : json(r.downstream)},
                  {"max_release", r.max_release},
                  {"min_outflow", r.min_outflow},
                  {"hoc_weight", r.hoc_weight},
                  {"hoc_penalty", r.hoc_penalty}});
  j["reservoirs"] = rs;
  json ts = json::array();
  for (const auto& t : sys.thermals) ts.push_back({{"capacity", t.capacity}, {"unit_cost", t.unit_cost}});
  j["thermals"] = ts;
  j["demand"] = sys.demand;
  json in = json::array();
  for (const auto& stage : sys.inflows) {
    json s = json::array();
    for (const auto& sc : stage) s.push_back({{"probability", sc.probability}, {"inflow", sc.inflow}});
    in.push_back(s);
  }
  j["inflows"] = in;
  return j;
}

inline HydroSystem system_from_json(const nlohmann::json& j) {
  try {
    HydroSystem sys;
    sys.name = j.value("name", std::string("hydro"));
    for (const auto& r : j.at("reservoirs")) {
      Reservoir res;
      res.capacity = r.at("capacity").get<double>();
      res.initial_storage = r.at("initial_storage").get<double>();
      res.downstream = r.at("downstream").is_null() ? kNoDownstream : r.at("downstream").get<int>();
      res.max_release = r.at("max_release").get<double>();
      res.min_outflow = r.at("min_outflow").get<std::vector<double>>();
      res.hoc_weight = r.at("hoc_weight").get<double>();
      res.hoc_penalty = r.value("hoc_penalty", 1000.0);
      sys.reservoirs.push_back(res);
    }
    for (const auto& t : j.at("thermals")) sys.thermals.push_back({t.at("capacity").get<double>(), t.at("unit_cost").get<double>()});
    sys.demand = j.at("demand").get<std::vector<double>>();
    for (const auto& s : j.at("inflows")) {
      std::vector<InflowScenario> stage;
      for (const auto& sc : s) stage.push_back({sc.at("probability").get<double>(), sc.at("inflow").get<std::vector<double>>()});
      sys.inflows.push_back(std::move(stage));
    }
    return sys;
  } catch (const nlohmann::json::exception& e) {
    throw ParseError(std::string("malformed hydro system: ") + e.what());
  }
}

}  // namespace pfsddp::hydro

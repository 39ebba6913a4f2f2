#pragma once
// Piecewise-linear lower approximations of stage value functions: the future
// cost function (optimality cuts) and the future feasibility function
// (feasibility cuts, with an implicit zero floor).

#include <algorithm>
#include <cmath>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include "json.hpp"
#include "pfsddp/error.hpp"
#include "pfsddp/model.hpp"

namespace pfsddp {

enum class CutKind { Optimality, Feasibility };

inline const char* to_string(CutKind k) { return k == CutKind::Optimality ? "optimality" : "feasibility"; }

inline constexpr int kAggregated = -1;

struct CutOrigin {
  int stage = 0;
  int iteration = 0;
  int realization = kAggregated;
  int trial_state = -1;

  bool operator==(const CutOrigin&) const = default;
};

/// intercept + gradient . x, as a function of a stage's incoming state.
struct Cut {
  double intercept = 0.0;
  std::vector<double> gradient;
  CutKind kind = CutKind::Optimality;
  CutOrigin origin;

  double value_at(std::span<const double> x) const {
    double v = intercept;
    for (size_t i = 0; i < gradient.size(); ++i) v += gradient[i] * x[i];
    return v;
  }
  bool operator==(const Cut&) const = default;
};

class CutPool {
 public:
  CutPool() = default;
  CutPool(int stage, CutKind kind, int m) : stage_(stage), kind_(kind), m_(m) {}

  int stage() const { return stage_; }
  CutKind kind() const { return kind_; }
  int dimension() const { return m_; }
  bool floor_at_zero() const { return kind_ == CutKind::Feasibility; }
  const std::vector<Cut>& cuts() const { return cuts_; }
  size_t size() const { return cuts_.size(); }
  bool empty() const { return cuts_.empty(); }

  /// Max over cuts; 0 floor for feasibility pools, -inf for an empty optimality pool.
  double evaluate(std::span<const double> state) const {
    check(state.size());
    double v = floor_at_zero() ? 0.0 : -kInf;
    for (const auto& c : cuts_) v = std::max(v, c.value_at(state));
    return v;
  }

  /// Appends `cut` iff it lifts the approximation at `at_state` by more than
  /// tol * max(1, |current value|).
  bool add_if_novel(Cut cut, std::span<const double> at_state, double tol) {
    check(cut.gradient.size());
    check(at_state.size());
    if (cut.kind != kind_) throw MixedKind("cut kind does not match pool kind");
    const double current = evaluate(at_state);
    const double candidate = cut.value_at(at_state);
    if (std::isfinite(current) && !(candidate > current + tol * std::max(1.0, std::abs(current)))) return false;
    cuts_.push_back(std::move(cut));
    return true;
  }

  /// Unconditional append, for deserialization.
  void append(Cut cut) {
    check(cut.gradient.size());
    if (cut.kind != kind_) throw MixedKind("cut kind does not match pool kind");
    cuts_.push_back(std::move(cut));
  }

  bool operator==(const CutPool&) const = default;

 private:
  void check(size_t n) const {
    if (static_cast<int>(n) != m_)
      throw DimensionMismatch("vector of length " + std::to_string(n) + " against pool of dimension " +
                              std::to_string(m_));
  }

  int stage_ = 0;
  CutKind kind_ = CutKind::Optimality;
  int m_ = 0;
  std::vector<Cut> cuts_;
};

/// Probability-weighted average of per-realization optimality cuts.
inline Cut expected_cut(std::span<const std::pair<double, Cut>> cuts) {
  if (cuts.empty()) throw Error("expected_cut of an empty list");
  Cut out;
  out.kind = CutKind::Optimality;
  out.origin = cuts.front().second.origin;
  out.origin.realization = kAggregated;
  out.gradient.assign(cuts.front().second.gradient.size(), 0.0);
  double total = 0.0;
  for (const auto& [p, c] : cuts) {
    if (c.kind != CutKind::Optimality) throw MixedKind("expected_cut needs optimality cuts only");
    if (c.gradient.size() != out.gradient.size()) throw DimensionMismatch("cut gradients differ in length");
    out.intercept += p * c.intercept;
    for (size_t i = 0; i < out.gradient.size(); ++i) out.gradient[i] += p * c.gradient[i];
    total += p;
  }
  if (std::abs(total - 1.0) > 1e-9) throw Error("expected_cut probabilities do not sum to 1");
  return out;
}

enum class Mode { PenaltyFree, Classic };

inline const char* to_string(Mode m) { return m == Mode::PenaltyFree ? "penalty_free" : "classic"; }

inline Mode mode_from_string(std::string_view s) {
  if (s == "penalty_free" || s == "penalty-free") return Mode::PenaltyFree;
  if (s == "classic") return Mode::Classic;
  throw ParseError("unknown mode '" + std::string(s) + "'");
}

/// Per-stage cut pools. fcf[t] and fff[t] approximate the value of stage t as
/// a function of its incoming state; stage t's subproblem reads pools t+1.
/// Pools at index 0 exist for uniformity but are never filled.
struct Policy {
  Mode mode = Mode::PenaltyFree;
  std::optional<double> penalty_override;  // classic mode: uniform penalty replacing penalty_weight
  double theta_lower_bound = 0.0;
  int T = 0;
  int m = 0;
  std::vector<CutPool> fcf;
  std::vector<CutPool> fff;

  static Policy empty_for(const Instance& inst, Mode mode = Mode::PenaltyFree) {
    Policy p;
    p.mode = mode;
    p.T = inst.T;
    p.m = inst.m;
    for (int t = 0; t < inst.T; ++t) {
      p.fcf.emplace_back(t, CutKind::Optimality, inst.m);
      p.fff.emplace_back(t, CutKind::Feasibility, inst.m);
    }
    return p;
  }

  /// Pools read by stage t's subproblem; null at the last stage.
  const CutPool* fcf_after(int t) const { return t + 1 < T ? &fcf[t + 1] : nullptr; }
  const CutPool* fff_after(int t) const { return t + 1 < T ? &fff[t + 1] : nullptr; }

  size_t total_cuts(CutKind k) const {
    size_t n = 0;
    for (const auto& p : (k == CutKind::Optimality ? fcf : fff)) n += p.size();
    return n;
  }

  bool operator==(const Policy&) const = default;
};

inline constexpr int kPolicyFormatVersion = 1;

inline std::string serialize_policy(const Policy& policy) {
  using nlohmann::json;
  auto cuts_json = [](const CutPool& pool) {
    json arr = json::array();
    for (const auto& c : pool.cuts())
      arr.push_back({{"intercept", c.intercept},
                     {"gradient", c.gradient},
                     {"origin",
                      {{"stage", c.origin.stage},
                       {"iteration", c.origin.iteration},
                       {"realization", c.origin.realization},
                       {"trial_state", c.origin.trial_state}}}});
    return arr;
  };
  json j;
  j["format"] = "pfsddp-policy";
  j["version"] = kPolicyFormatVersion;
  j["mode"] = to_string(policy.mode);
  if (policy.penalty_override) j["penalty_override"] = *policy.penalty_override;
  j["theta_lower_bound"] = policy.theta_lower_bound;
  j["T"] = policy.T;
  j["m"] = policy.m;
  json stages = json::array();
  for (int t = 0; t < policy.T; ++t)
    stages.push_back({{"stage", t}, {"fcf", cuts_json(policy.fcf[t])}, {"fff", cuts_json(policy.fff[t])}});
  j["stages"] = stages;
  return j.dump(1) + "\n";
}

inline Policy deserialize_policy(std::string_view bytes) {
  using nlohmann::json;
  try {
    json j = json::parse(bytes);
    if (j.value("format", std::string()) != "pfsddp-policy") throw ParseError("not a policy file");
    if (j.at("version").get<int>() != kPolicyFormatVersion)
      throw ParseError("unsupported policy version " + j.at("version").dump());
    Policy p;
    p.mode = mode_from_string(j.at("mode").get<std::string>());
    if (j.contains("penalty_override")) p.penalty_override = j.at("penalty_override").get<double>();
    p.theta_lower_bound = j.value("theta_lower_bound", 0.0);
    p.T = j.at("T").get<int>();
    p.m = j.at("m").get<int>();
    const json& stages = j.at("stages");
    if (!stages.is_array() || static_cast<int>(stages.size()) != p.T)
      throw ParseError("policy stage count does not match T");
    for (int t = 0; t < p.T; ++t) {
      CutPool fcf(t, CutKind::Optimality, p.m), fff(t, CutKind::Feasibility, p.m);
      auto read = [&](const json& arr, CutPool& pool) {
        for (const auto& jc : arr) {
          Cut c;
          c.kind = pool.kind();
          c.intercept = jc.at("intercept").get<double>();
          c.gradient = jc.at("gradient").get<std::vector<double>>();
          const json& o = jc.at("origin");
          c.origin = {o.at("stage").get<int>(), o.at("iteration").get<int>(), o.at("realization").get<int>(),
                      o.at("trial_state").get<int>()};
          pool.append(std::move(c));
        }
      };
      read(stages[t].at("fcf"), fcf);
      read(stages[t].at("fff"), fff);
      p.fcf.push_back(std::move(fcf));
      p.fff.push_back(std::move(fff));
    }
    return p;
  } catch (const json::exception& e) {
    throw ParseError(std::string("malformed policy file: ") + e.what());
  } catch (const DimensionMismatch& e) {
    throw ParseError(std::string("malformed policy file: ") + e.what());
  }
}

}  // namespace pfsddp

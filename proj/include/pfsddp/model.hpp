#pragma once
// Multistage stochastic linear program: data model, validation and the JSON
// instance format.
//
// Stage t (0-based) solves over x_t >= 0 the rows
//     A_t x_t (+ s_t) {>=,=} b_t(xi) - D_t x_{t-1}
// where x_{t-1} is the outgoing state of the previous stage (the designated
// state_indices of its variables) and x_{-1} is Instance::initial_state.
// Noise enters through the right-hand side only.

#include <cmath>
#include <limits>
#include <optional>
#include <span>
#include <sstream>
#include <string>
#include <string_view>
#include <vector>

#include "json.hpp"
#include "pfsddp/error.hpp"

namespace pfsddp {

inline constexpr double kInf = std::numeric_limits<double>::infinity();

enum class Sense { GE, LE, EQ };

inline const char* to_string(Sense s) {
  switch (s) {
    case Sense::GE: return "GE";
    case Sense::LE: return "LE";
    case Sense::EQ: return "EQ";
  }
  return "?";
}

inline Sense sense_from_string(std::string_view s) {
  if (s == "GE") return Sense::GE;
  if (s == "LE") return Sense::LE;
  if (s == "EQ") return Sense::EQ;
  throw ParseError("unknown row sense '" + std::string(s) + "'");
}

struct SparseEntry {
  int index = 0;
  double value = 0.0;
  bool operator==(const SparseEntry&) const = default;
};

struct Row {
  std::vector<SparseEntry> coeffs;
  Sense sense = Sense::GE;
  bool relaxable = false;
  std::optional<double> slack_weight;    // priority of violating this row
  std::optional<double> penalty_weight;  // $/unit, classic mode only
  std::string label;
  bool operator==(const Row&) const = default;
};

/// One entry of D_t: row `row` of the stage, component `col` of the incoming state.
struct LinkEntry {
  int row = 0;
  int col = 0;
  double value = 0.0;
  bool operator==(const LinkEntry&) const = default;
};

struct Realization {
  double probability = 1.0;
  std::vector<double> rhs;
  bool operator==(const Realization&) const = default;
};

struct StageData {
  int n = 0;
  std::vector<Row> rows;
  std::vector<double> cost;
  std::vector<LinkEntry> link;
  std::vector<int> state_indices;
  std::vector<double> var_upper;  // empty means every upper bound is +inf
  std::vector<Realization> realizations;

  double upper(int j) const { return var_upper.empty() ? kInf : var_upper[j]; }
  bool operator==(const StageData&) const = default;
};

struct Instance {
  std::string name;
  int T = 0;
  int m = 0;
  std::vector<double> initial_state;
  std::vector<StageData> stages;
  bool operator==(const Instance&) const = default;
};

struct Issue {
  int stage = -1;  // -1: instance level
  int row = -1;    // -1: stage level
  std::string message;
};

inline std::string describe(const Issue& is) {
  std::ostringstream os;
  if (is.stage >= 0) os << "stage " << is.stage;
  if (is.row >= 0) os << (is.stage >= 0 ? ", " : "") << "row " << is.row;
  if (is.stage >= 0 || is.row >= 0) os << ": ";
  os << is.message;
  return os.str();
}

/// Every type invariant of the model, collected rather than thrown.
inline std::vector<Issue> validate(const Instance& inst) {
  std::vector<Issue> out;
  auto add = [&](int s, int r, std::string msg) { out.push_back({s, r, std::move(msg)}); };

  if (inst.T < 1) add(-1, -1, "T must be at least 1");
  if (inst.m < 0) add(-1, -1, "m must be nonnegative");
  if (static_cast<int>(inst.stages.size()) != inst.T)
    add(-1, -1, "stage count " + std::to_string(inst.stages.size()) + " does not match T=" +
                    std::to_string(inst.T));
  if (static_cast<int>(inst.initial_state.size()) != inst.m)
    add(-1, -1, "initial_state length does not match m");
  for (double v : inst.initial_state)
    if (!std::isfinite(v)) add(-1, -1, "initial_state has a non-finite entry");

  for (int t = 0; t < static_cast<int>(inst.stages.size()); ++t) {
    const StageData& st = inst.stages[t];
    const int n = st.n;
    const int R = static_cast<int>(st.rows.size());
    if (n < 0) add(t, -1, "negative variable count");
    if (static_cast<int>(st.cost.size()) != n) add(t, -1, "cost length does not match n");
    for (double c : st.cost)
      if (!std::isfinite(c)) add(t, -1, "non-finite cost");
    if (!st.var_upper.empty()) {
      if (static_cast<int>(st.var_upper.size()) != n) add(t, -1, "var_upper length does not match n");
      for (double u : st.var_upper)
        if (std::isnan(u) || u < 0) add(t, -1, "var_upper must be nonnegative");
    }
    if (static_cast<int>(st.state_indices.size()) != inst.m)
      add(t, -1, "state_indices length does not match m");
    for (size_t a = 0; a < st.state_indices.size(); ++a) {
      int idx = st.state_indices[a];
      if (idx < 0 || idx >= n) add(t, -1, "state index out of range");
      for (size_t b = 0; b < a; ++b)
        if (st.state_indices[b] == idx) add(t, -1, "duplicate state index");
    }
    for (int r = 0; r < R; ++r) {
      const Row& row = st.rows[r];
      for (const auto& e : row.coeffs) {
        if (e.index < 0 || e.index >= n) add(t, r, "coefficient index out of range");
        if (!std::isfinite(e.value)) add(t, r, "non-finite coefficient");
      }
      if (row.sense == Sense::LE) add(t, r, "row sense must be GE or EQ");
      if (row.relaxable) {
        if (row.sense != Sense::GE) add(t, r, "relaxable row must be GE");
        if (!row.slack_weight || !(*row.slack_weight > 0) || !std::isfinite(*row.slack_weight))
          add(t, r, "relaxable row needs a positive slack_weight");
        if (!row.penalty_weight || !(*row.penalty_weight > 0) || !std::isfinite(*row.penalty_weight))
          add(t, r, "relaxable row needs a positive penalty_weight");
      } else if (row.slack_weight || row.penalty_weight) {
        add(t, r, "weights given on a non-relaxable row");
      }
    }
    for (const auto& l : st.link) {
      if (l.row < 0 || l.row >= R || l.col < 0 || l.col >= inst.m)
        add(t, -1, "link entry out of range");
      if (!std::isfinite(l.value)) add(t, -1, "non-finite link entry");
    }
    if (st.realizations.empty()) add(t, -1, "stage has no realizations");
    double total = 0.0;
    for (const auto& re : st.realizations) {
      if (!(re.probability > 0.0) || re.probability > 1.0)
        add(t, -1, "realization probability must lie in (0,1]");
      total += re.probability;
      if (static_cast<int>(re.rhs.size()) != R) add(t, -1, "rhs length does not match row count");
      for (double b : re.rhs)
        if (!std::isfinite(b)) add(t, -1, "non-finite rhs");
    }
    if (!st.realizations.empty() && std::abs(total - 1.0) > 1e-9) {
      std::ostringstream os;
      os << "realization probabilities sum to " << total << ", expected 1";
      add(t, -1, os.str());
    }
    if (t == 0 && st.realizations.size() != 1)
      add(t, -1, "first stage must have exactly one realization");
  }
  return out;
}

/// b_t(xi_k) - D_t x_prev.
inline std::vector<double> effective_rhs(const Instance& inst, int t, int k,
                                         std::span<const double> x_prev) {
  if (t < 0 || t >= inst.T) throw IndexError("stage index " + std::to_string(t) + " out of range");
  const StageData& st = inst.stages[t];
  if (k < 0 || k >= static_cast<int>(st.realizations.size()))
    throw IndexError("realization index " + std::to_string(k) + " out of range at stage " +
                     std::to_string(t));
  if (static_cast<int>(x_prev.size()) != inst.m)
    throw DimensionMismatch("incoming state has length " + std::to_string(x_prev.size()) +
                            ", expected " + std::to_string(inst.m));
  std::vector<double> rhs = st.realizations[k].rhs;
  for (const auto& l : st.link) rhs[l.row] -= l.value * x_prev[l.col];
  return rhs;
}

inline std::vector<int> relaxable_rows(const StageData& st) {
  std::vector<int> out;
  for (int r = 0; r < static_cast<int>(st.rows.size()); ++r)
    if (st.rows[r].relaxable) out.push_back(r);
  return out;
}

inline bool has_relaxable_rows(const Instance& inst) {
  for (const auto& st : inst.stages)
    for (const auto& r : st.rows)
      if (r.relaxable) return true;
  return false;
}

/// Number of scenario-tree leaves, saturating at `cap + 1`.
inline long long leaf_count(const Instance& inst, long long cap = 1LL << 40) {
  long long n = 1;
  for (const auto& st : inst.stages) {
    n *= static_cast<long long>(st.realizations.size());
    if (n > cap) return cap + 1;
  }
  return n;
}

inline bool is_deterministic(const Instance& inst) { return leaf_count(inst) == 1; }

// ---------------------------------------------------------------------------
// JSON instance format

namespace detail {

using nlohmann::json;

inline json number_or_null(double v) { return std::isfinite(v) ? json(v) : json(nullptr); }

template <class T>
T get_field(const json& j, const char* key, const std::string& where) {
  if (!j.is_object() || !j.contains(key))
    throw ParseError(where + ": missing key '" + key + "'");
  try {
    return j.at(key).get<T>();
  } catch (const json::exception& e) {
    throw ParseError(where + ": bad value for '" + key + "': " + e.what());
  }
}

inline double upper_from_json(const json& v, const std::string& where) {
  if (v.is_null()) return kInf;
  if (!v.is_number()) throw ParseError(where + ": var_upper entries must be numbers or null");
  return v.get<double>();
}

}  // namespace detail

inline nlohmann::json instance_to_json(const Instance& inst) {
  using nlohmann::json;
  json j;
  j["name"] = inst.name;
  j["T"] = inst.T;
  j["m"] = inst.m;
  j["initial_state"] = inst.initial_state;
  json stages = json::array();
  for (const auto& st : inst.stages) {
    json s;
    s["n"] = st.n;
    s["cost"] = st.cost;
    s["state_indices"] = st.state_indices;
    if (!st.var_upper.empty()) {
      json ub = json::array();
      for (double u : st.var_upper) ub.push_back(detail::number_or_null(u));
      s["var_upper"] = ub;
    }
    json rows = json::array();
    for (const auto& r : st.rows) {
      json jr;
      json coeffs = json::array();
      for (const auto& e : r.coeffs) coeffs.push_back(json::array({e.index, e.value}));
      jr["coeffs"] = coeffs;
      jr["sense"] = to_string(r.sense);
      jr["relaxable"] = r.relaxable;
      if (r.slack_weight) jr["slack_weight"] = *r.slack_weight;
      if (r.penalty_weight) jr["penalty_weight"] = *r.penalty_weight;
      jr["label"] = r.label;
      rows.push_back(jr);
    }
    s["rows"] = rows;
    json link = json::array();
    for (const auto& l : st.link) link.push_back(json::array({l.row, l.col, l.value}));
    s["link"] = link;
    json reals = json::array();
    for (const auto& re : st.realizations) reals.push_back({{"probability", re.probability}, {"rhs", re.rhs}});
    s["realizations"] = reals;
    stages.push_back(s);
  }
  j["stages"] = stages;
  return j;
}

/// Structural decode only; call validate() afterwards.
inline Instance instance_from_json(const nlohmann::json& j) {
  using detail::get_field;
  using nlohmann::json;
  Instance inst;
  inst.name = get_field<std::string>(j, "name", "instance");
  inst.T = get_field<int>(j, "T", "instance");
  inst.m = get_field<int>(j, "m", "instance");
  inst.initial_state = get_field<std::vector<double>>(j, "initial_state", "instance");
  const json& stages = j.contains("stages") ? j.at("stages") : throw ParseError("instance: missing key 'stages'");
  if (!stages.is_array()) throw ParseError("instance: 'stages' must be an array");
  for (size_t t = 0; t < stages.size(); ++t) {
    const json& s = stages[t];
    const std::string where = "stage " + std::to_string(t);
    StageData st;
    st.n = get_field<int>(s, "n", where);
    st.cost = get_field<std::vector<double>>(s, "cost", where);
    st.state_indices = get_field<std::vector<int>>(s, "state_indices", where);
    if (s.contains("var_upper") && !s.at("var_upper").is_null()) {
      const json& ub = s.at("var_upper");
      if (!ub.is_array()) throw ParseError(where + ": var_upper must be an array");
      for (const auto& v : ub) st.var_upper.push_back(detail::upper_from_json(v, where));
    }
    const json& rows = s.contains("rows") ? s.at("rows") : throw ParseError(where + ": missing key 'rows'");
    if (!rows.is_array()) throw ParseError(where + ": 'rows' must be an array");
    for (size_t r = 0; r < rows.size(); ++r) {
      const json& jr = rows[r];
      const std::string rw = where + ", row " + std::to_string(r);
      Row row;
      const json& coeffs = jr.contains("coeffs") ? jr.at("coeffs") : throw ParseError(rw + ": missing key 'coeffs'");
      if (!coeffs.is_array()) throw ParseError(rw + ": 'coeffs' must be an array");
      for (const auto& c : coeffs) {
        if (!c.is_array() || c.size() != 2 || !c[0].is_number_integer() || !c[1].is_number())
          throw ParseError(rw + ": coeffs entries must be [index, value]");
        row.coeffs.push_back({c[0].get<int>(), c[1].get<double>()});
      }
      row.sense = sense_from_string(get_field<std::string>(jr, "sense", rw));
      row.relaxable = get_field<bool>(jr, "relaxable", rw);
      if (jr.contains("slack_weight")) row.slack_weight = get_field<double>(jr, "slack_weight", rw);
      if (jr.contains("penalty_weight")) row.penalty_weight = get_field<double>(jr, "penalty_weight", rw);
      row.label = jr.contains("label") ? get_field<std::string>(jr, "label", rw) : std::string();
      st.rows.push_back(std::move(row));
    }
    if (s.contains("link")) {
      const json& link = s.at("link");
      if (!link.is_array()) throw ParseError(where + ": 'link' must be an array");
      for (const auto& l : link) {
        if (!l.is_array() || l.size() != 3 || !l[0].is_number_integer() || !l[1].is_number_integer() ||
            !l[2].is_number())
          throw ParseError(where + ": link entries must be [row, col, value]");
        st.link.push_back({l[0].get<int>(), l[1].get<int>(), l[2].get<double>()});
      }
    }
    const json& reals =
        s.contains("realizations") ? s.at("realizations") : throw ParseError(where + ": missing key 'realizations'");
    if (!reals.is_array()) throw ParseError(where + ": 'realizations' must be an array");
    for (const auto& re : reals)
      st.realizations.push_back({get_field<double>(re, "probability", where),
                                 get_field<std::vector<double>>(re, "rhs", where)});
    inst.stages.push_back(std::move(st));
  }
  return inst;
}

inline std::string save_instance(const Instance& inst) { return instance_to_json(inst).dump(2) + "\n"; }

/// Parses and validates; throws ParseError or ValidationError (first issue's locus).
inline Instance load_instance(std::string_view content) {
  nlohmann::json j;
  try {
    j = nlohmann::json::parse(content);
  } catch (const nlohmann::json::parse_error& e) {
    throw ParseError(std::string("malformed instance file: ") + e.what());
  }
  Instance inst = instance_from_json(j);
  auto issues = validate(inst);
  if (!issues.empty()) {
    std::string msg = "invalid instance:";
    for (const auto& is : issues) msg += "\n  " + describe(is);
    throw ValidationError(issues.front().stage, issues.front().row, msg);
  }
  return inst;
}

}  // namespace pfsddp

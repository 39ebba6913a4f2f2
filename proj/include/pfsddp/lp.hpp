#pragma once
// Bounded-variable revised primal simplex with exact basic duals.
//
// Every row gets a logical variable r_i = a_i x whose bounds encode the sense
// (GE: [rhs, inf), LE: (-inf, rhs], EQ: [rhs, rhs]), so the working system is
// A x - r = 0. Phase 1 adds one artificial per row whose initial activity
// violates its logical bounds and minimizes their sum. Pricing is Dantzig
// with a Harris ratio test; after a streak of degenerate pivots the solver
// falls back to Bland's rule until progress resumes.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <iomanip>
#include <limits>
#include <sstream>
#include <string>
#include <vector>

#include "pfsddp/error.hpp"
#include "pfsddp/model.hpp"

namespace pfsddp {

struct LpRow {
  std::vector<SparseEntry> coeffs;
  Sense sense = Sense::GE;
  double rhs = 0.0;
};

struct LinearProgram {
  int n_vars = 0;
  std::vector<double> objective;  // minimized
  std::vector<double> lower;      // -inf only for free variables
  std::vector<double> upper;
  std::vector<LpRow> rows;
  std::vector<std::string> var_names;  // optional, used by the LP-format dump
  std::vector<std::string> row_names;

  int add_var(double cost, double lo, double hi, std::string name = {}) {
    objective.push_back(cost);
    lower.push_back(lo);
    upper.push_back(hi);
    if (!name.empty() || !var_names.empty()) {
      var_names.resize(n_vars);
      var_names.push_back(std::move(name));
    }
    return n_vars++;
  }
  int add_row(std::vector<SparseEntry> coeffs, Sense sense, double rhs, std::string name = {}) {
    rows.push_back({std::move(coeffs), sense, rhs});
    if (!name.empty() || !row_names.empty()) {
      row_names.resize(rows.size() - 1);
      row_names.push_back(std::move(name));
    }
    return static_cast<int>(rows.size()) - 1;
  }
};

enum class LpStatus { Optimal, Infeasible, Unbounded };

inline const char* to_string(LpStatus s) {
  switch (s) {
    case LpStatus::Optimal: return "Optimal";
    case LpStatus::Infeasible: return "Infeasible";
    case LpStatus::Unbounded: return "Unbounded";
  }
  return "?";
}

/// Row duals follow the convention GE >= 0, LE <= 0, EQ free, so that
/// objective_value == sum_i dual_i rhs_i + sum_j reduced_cost_j * bound_j.
struct LpSolution {
  LpStatus status = LpStatus::Infeasible;
  std::vector<double> primal;
  double objective_value = 0.0;
  std::vector<double> row_duals;
  std::vector<double> reduced_costs;
  int iterations = 0;
  int infeasible_row = -1;  // when Infeasible: row carrying the largest residual artificial
};

struct LpTolerances {
  double primal_feas = 1e-8;  // per row, absolute
  double duality = 1e-6;      // relative to max(1, |objective|)
  double complementarity = 1e-6;
  double optimality = 1e-9;  // reduced-cost threshold used by pricing
  double pivot = 1e-9;
  int bland_after = 50;  // consecutive degenerate pivots before Bland's rule
  int refactor_every = 100;
};

namespace detail {

class BoundedSimplex {
 public:
  BoundedSimplex(const LinearProgram& lp, const LpTolerances& tol) : lp_(lp), tol_(tol) {
    n_ = lp.n_vars;
    m_ = static_cast<int>(lp.rows.size());
    // Structural columns in compressed column form.
    std::vector<int> count(n_, 0);
    for (const auto& row : lp.rows)
      for (const auto& e : row.coeffs) ++count[e.index];
    col_start_.assign(n_ + 1, 0);
    for (int j = 0; j < n_; ++j) col_start_[j + 1] = col_start_[j] + count[j];
    col_row_.resize(col_start_[n_]);
    col_val_.resize(col_start_[n_]);
    std::vector<int> fill(col_start_.begin(), col_start_.end() - 1);
    for (int i = 0; i < m_; ++i)
      for (const auto& e : lp.rows[i].coeffs) {
        col_row_[fill[e.index]] = i;
        col_val_[fill[e.index]++] = e.value;
      }
  }

  LpSolution solve() {
    setup_phase1();
    LpSolution sol;
    if (n_art_ > 0) {
      std::vector<double> cost(total_, 0.0);
      for (int a = 0; a < n_art_; ++a) cost[n_ + m_ + a] = 1.0;
      iterate(cost, /*phase1=*/true);
      refactor();
      double infeas = 0.0;
      double worst = 0.0;
      int worst_row = -1;
      for (int a = 0; a < n_art_; ++a) {
        double v = x_[n_ + m_ + a];
        infeas += std::max(0.0, v);
        if (v > worst) {
          worst = v;
          worst_row = art_row_[a];
        }
      }
      if (infeas > tol_.primal_feas * std::max(1.0, rhs_scale_)) {
        sol.status = LpStatus::Infeasible;
        sol.infeasible_row = worst_row;
        sol.iterations = iterations_;
        return sol;
      }
      for (int a = 0; a < n_art_; ++a) {
        lo_[n_ + m_ + a] = 0.0;
        hi_[n_ + m_ + a] = 0.0;
      }
    }
    std::vector<double> cost(total_, 0.0);
    for (int j = 0; j < n_; ++j) cost[j] = lp_.objective[j];
    if (!iterate(cost, /*phase1=*/false)) {
      sol.status = LpStatus::Unbounded;
      sol.iterations = iterations_;
      return sol;
    }
    refactor();
    std::vector<double> y = duals(cost);
    sol.status = LpStatus::Optimal;
    sol.iterations = iterations_;
    sol.primal.assign(x_.begin(), x_.begin() + n_);
    for (int j = 0; j < n_; ++j) {
      // Basic values can drift past a bound by round-off.
      if (!is_basic(j)) continue;
      sol.primal[j] = std::clamp(sol.primal[j], lo_[j], hi_[j]);
    }
    sol.row_duals = y;
    sol.reduced_costs.resize(n_);
    double obj = 0.0;
    for (int j = 0; j < n_; ++j) {
      sol.reduced_costs[j] = reduced_cost(j, cost, y);
      obj += lp_.objective[j] * sol.primal[j];
    }
    sol.objective_value = obj;
    return sol;
  }

 private:
  enum : std::int8_t { kBasic = 0, kAtLower = 1, kAtUpper = 2, kFreeZero = 3 };

  bool is_basic(int j) const { return state_[j] == kBasic; }

  void setup_phase1() {
    const int nl = n_ + m_;
    lo_.assign(nl, 0.0);
    hi_.assign(nl, 0.0);
    x_.assign(nl, 0.0);
    state_.assign(nl, kAtLower);
    rhs_scale_ = 0.0;
    for (int j = 0; j < n_; ++j) {
      lo_[j] = lp_.lower[j];
      hi_[j] = lp_.upper[j];
      if (std::isfinite(lo_[j])) {
        x_[j] = lo_[j];
        state_[j] = kAtLower;
      } else if (std::isfinite(hi_[j])) {
        x_[j] = hi_[j];
        state_[j] = kAtUpper;
      } else {
        x_[j] = 0.0;
        state_[j] = kFreeZero;
      }
    }
    std::vector<double> activity(m_, 0.0);
    for (int j = 0; j < n_; ++j)
      if (x_[j] != 0.0)
        for (int p = col_start_[j]; p < col_start_[j + 1]; ++p) activity[col_row_[p]] += col_val_[p] * x_[j];

    basis_.assign(m_, -1);
    art_row_.clear();
    art_sign_.clear();
    for (int i = 0; i < m_; ++i) {
      const auto& row = lp_.rows[i];
      rhs_scale_ = std::max(rhs_scale_, std::abs(row.rhs));
      const int li = n_ + i;
      lo_[li] = row.sense == Sense::LE ? -kInf : row.rhs;
      hi_[li] = row.sense == Sense::GE ? kInf : row.rhs;
      const double a = activity[i];
      if (a >= lo_[li] && a <= hi_[li]) {
        x_[li] = a;
        state_[li] = kBasic;
        basis_[i] = li;
      } else {
        const bool below = a < lo_[li];
        x_[li] = below ? lo_[li] : hi_[li];
        state_[li] = below ? kAtLower : kAtUpper;
        if (lo_[li] == hi_[li]) state_[li] = kAtLower;
        // a - r + sign * art = 0 with art >= 0
        art_row_.push_back(i);
        art_sign_.push_back(below ? 1.0 : -1.0);
      }
    }
    n_art_ = static_cast<int>(art_row_.size());
    total_ = nl + n_art_;
    lo_.resize(total_, 0.0);
    hi_.resize(total_, kInf);
    x_.resize(total_, 0.0);
    state_.resize(total_, kBasic);
    for (int a = 0; a < n_art_; ++a) {
      const int i = art_row_[a];
      const int col = nl + a;
      x_[col] = std::abs(x_[n_ + i] - activity[i]);
      basis_[i] = col;
    }
    art_of_row_.assign(m_, -1);
    for (int a = 0; a < n_art_; ++a) art_of_row_[art_row_[a]] = a;
    refactor();
  }

  // Dense column of variable j.
  void column(int j, std::vector<double>& out) const {
    std::fill(out.begin(), out.end(), 0.0);
    if (j < n_) {
      for (int p = col_start_[j]; p < col_start_[j + 1]; ++p) out[col_row_[p]] = col_val_[p];
    } else if (j < n_ + m_) {
      out[j - n_] = -1.0;
    } else {
      out[art_row_[j - n_ - m_]] = art_sign_[j - n_ - m_];
    }
  }

  // B^-1 a_j, with B^-1 stored dense row-major.
  void ftran(int j, std::vector<double>& alpha) const {
    std::fill(alpha.begin(), alpha.end(), 0.0);
    auto axpy = [&](int row, double v) {
      for (int i = 0; i < m_; ++i) alpha[i] += binv_[static_cast<size_t>(i) * m_ + row] * v;
    };
    if (j < n_) {
      for (int p = col_start_[j]; p < col_start_[j + 1]; ++p) axpy(col_row_[p], col_val_[p]);
    } else if (j < n_ + m_) {
      axpy(j - n_, -1.0);
    } else {
      axpy(art_row_[j - n_ - m_], art_sign_[j - n_ - m_]);
    }
  }

  std::vector<double> duals(const std::vector<double>& cost) const {
    std::vector<double> y(m_, 0.0);
    for (int i = 0; i < m_; ++i) {
      const double cb = cost[basis_[i]];
      if (cb == 0.0) continue;
      const double* row = &binv_[static_cast<size_t>(i) * m_];
      for (int k = 0; k < m_; ++k) y[k] += cb * row[k];
    }
    return y;
  }

  double reduced_cost(int j, const std::vector<double>& cost, const std::vector<double>& y) const {
    double d = cost[j];
    if (j < n_) {
      for (int p = col_start_[j]; p < col_start_[j + 1]; ++p) d -= y[col_row_[p]] * col_val_[p];
    } else if (j < n_ + m_) {
      d += y[j - n_];
    } else {
      d -= y[art_row_[j - n_ - m_]] * art_sign_[j - n_ - m_];
    }
    return d;
  }

  // Rebuilds B^-1 by Gauss-Jordan with partial pivoting, then recomputes the
  // basic values from the nonbasic ones.
  void refactor() {
    const size_t mm = static_cast<size_t>(m_);
    std::vector<double> b(mm * mm, 0.0);
    std::vector<double> col(m_);
    for (int i = 0; i < m_; ++i) {
      column(basis_[i], col);
      for (int r = 0; r < m_; ++r) b[r * mm + i] = col[r];
    }
    binv_.assign(mm * mm, 0.0);
    for (size_t i = 0; i < mm; ++i) binv_[i * mm + i] = 1.0;
    for (size_t c = 0; c < mm; ++c) {
      size_t piv = c;
      double best = std::abs(b[c * mm + c]);
      for (size_t r = c + 1; r < mm; ++r)
        if (std::abs(b[r * mm + c]) > best) {
          best = std::abs(b[r * mm + c]);
          piv = r;
        }
      if (best < 1e-12) throw NumericalFailure("singular basis during refactorization");
      if (piv != c) {
        for (size_t k = 0; k < mm; ++k) {
          std::swap(b[c * mm + k], b[piv * mm + k]);
          std::swap(binv_[c * mm + k], binv_[piv * mm + k]);
        }
      }
      const double inv = 1.0 / b[c * mm + c];
      for (size_t k = 0; k < mm; ++k) {
        b[c * mm + k] *= inv;
        binv_[c * mm + k] *= inv;
      }
      for (size_t r = 0; r < mm; ++r) {
        if (r == c) continue;
        const double f = b[r * mm + c];
        if (f == 0.0) continue;
        for (size_t k = 0; k < mm; ++k) {
          b[r * mm + k] -= f * b[c * mm + k];
          binv_[r * mm + k] -= f * binv_[c * mm + k];
        }
      }
    }
    // B x_B = -N x_N
    std::vector<double> rhs(m_, 0.0);
    for (int j = 0; j < total_; ++j) {
      if (state_[j] == kBasic || x_[j] == 0.0) continue;
      column(j, col);
      for (int r = 0; r < m_; ++r) rhs[r] -= col[r] * x_[j];
    }
    for (int i = 0; i < m_; ++i) {
      double v = 0.0;
      const double* row = &binv_[static_cast<size_t>(i) * mm];
      for (int r = 0; r < m_; ++r) v += row[r] * rhs[r];
      x_[basis_[i]] = v;
    }
    pivots_since_refactor_ = 0;
  }

  // Returns false when an unbounded ray is found.
  bool iterate(const std::vector<double>& cost, bool phase1) {
    std::vector<double> alpha(m_);
    const int max_iter = 50 * (n_ + m_) + 1000;
    int degenerate_streak = 0;
    bool bland = false;
    for (;;) {
      if (iterations_ > max_iter)
        throw NumericalFailure("simplex iteration limit exceeded (" + std::to_string(max_iter) + ")");
      const std::vector<double> y = duals(cost);

      // Pricing.
      int q = -1;
      double best = 0.0;
      int dir = 0;
      for (int j = 0; j < total_; ++j) {
        const auto s = state_[j];
        if (s == kBasic) continue;
        if (lo_[j] == hi_[j]) continue;
        const double d = reduced_cost(j, cost, y);
        int dj = 0;
        if (d < -tol_.optimality && (s == kAtLower || s == kFreeZero)) dj = 1;
        else if (d > tol_.optimality && (s == kAtUpper || s == kFreeZero)) dj = -1;
        if (dj == 0) continue;
        if (bland) {
          q = j;
          dir = dj;
          break;
        }
        if (std::abs(d) > best) {
          best = std::abs(d);
          q = j;
          dir = dj;
        }
      }
      if (q < 0) return true;

      ftran(q, alpha);
      // x_B changes by -dir * t * alpha.
      double t_flip = hi_[q] - lo_[q];
      int leave = -1;
      double step = kInf;
      if (bland) {
        for (int i = 0; i < m_; ++i) {
          const double delta = -dir * alpha[i];
          const int b = basis_[i];
          double ratio;
          if (delta < -tol_.pivot && std::isfinite(lo_[b])) ratio = (x_[b] - lo_[b]) / -delta;
          else if (delta > tol_.pivot && std::isfinite(hi_[b])) ratio = (hi_[b] - x_[b]) / delta;
          else continue;
          ratio = std::max(ratio, 0.0);
          if (ratio < step || (ratio == step && leave >= 0 && b < basis_[leave])) {
            step = ratio;
            leave = i;
          }
        }
      } else {
        // Harris: bound the step with relaxed bounds, then pick the largest pivot.
        const double relax = tol_.primal_feas * 0.1;
        double tmax = kInf;
        for (int i = 0; i < m_; ++i) {
          const double delta = -dir * alpha[i];
          const int b = basis_[i];
          if (delta < -tol_.pivot && std::isfinite(lo_[b]))
            tmax = std::min(tmax, (x_[b] - lo_[b] + relax) / -delta);
          else if (delta > tol_.pivot && std::isfinite(hi_[b]))
            tmax = std::min(tmax, (hi_[b] - x_[b] + relax) / delta);
        }
        double best_piv = 0.0;
        for (int i = 0; i < m_; ++i) {
          const double delta = -dir * alpha[i];
          const int b = basis_[i];
          double ratio;
          if (delta < -tol_.pivot && std::isfinite(lo_[b])) ratio = (x_[b] - lo_[b]) / -delta;
          else if (delta > tol_.pivot && std::isfinite(hi_[b])) ratio = (hi_[b] - x_[b]) / delta;
          else continue;
          if (ratio <= tmax && std::abs(alpha[i]) > best_piv) {
            best_piv = std::abs(alpha[i]);
            step = std::max(ratio, 0.0);
            leave = i;
          }
        }
      }

      if (t_flip <= step) {
        if (!std::isfinite(t_flip)) {
          if (phase1) throw NumericalFailure("unbounded ray in phase 1");
          return false;
        }
        // Bound flip, no basis change.
        for (int i = 0; i < m_; ++i) x_[basis_[i]] -= dir * t_flip * alpha[i];
        x_[q] = dir > 0 ? hi_[q] : lo_[q];
        state_[q] = dir > 0 ? kAtUpper : kAtLower;
        ++iterations_;
        degenerate_streak = 0;
        bland = false;
        continue;
      }
      if (leave < 0) {
        if (phase1) throw NumericalFailure("unbounded ray in phase 1");
        return false;
      }

      for (int i = 0; i < m_; ++i) x_[basis_[i]] -= dir * step * alpha[i];
      x_[q] += dir * step;
      const int out = basis_[leave];
      const double delta_out = -dir * alpha[leave];
      if (delta_out < 0) {
        x_[out] = lo_[out];
        state_[out] = kAtLower;
      } else {
        x_[out] = hi_[out];
        state_[out] = kAtUpper;
      }
      if (lo_[out] == hi_[out]) state_[out] = kAtLower;
      state_[q] = kBasic;
      basis_[leave] = q;

      // Product-form update of the explicit inverse.
      const size_t mm = static_cast<size_t>(m_);
      const double piv = alpha[leave];
      double* prow = &binv_[leave * mm];
      for (size_t k = 0; k < mm; ++k) prow[k] /= piv;
      for (int i = 0; i < m_; ++i) {
        if (i == leave || alpha[i] == 0.0) continue;
        const double f = alpha[i];
        double* row = &binv_[i * mm];
        for (size_t k = 0; k < mm; ++k) row[k] -= f * prow[k];
      }
      ++iterations_;
      if (++pivots_since_refactor_ >= tol_.refactor_every) refactor();

      if (step <= 1e-12) {
        if (++degenerate_streak >= tol_.bland_after) bland = true;
      } else {
        degenerate_streak = 0;
        bland = false;
      }
    }
  }

  const LinearProgram& lp_;
  LpTolerances tol_;
  int n_ = 0, m_ = 0, n_art_ = 0, total_ = 0;
  std::vector<int> col_start_, col_row_;
  std::vector<double> col_val_;
  std::vector<double> lo_, hi_, x_;
  std::vector<std::int8_t> state_;
  std::vector<int> basis_;
  std::vector<int> art_row_, art_of_row_;
  std::vector<double> art_sign_;
  std::vector<double> binv_;
  double rhs_scale_ = 0.0;
  int iterations_ = 0;
  int pivots_since_refactor_ = 0;
};

inline void check_program(const LinearProgram& lp) {
  const auto n = static_cast<size_t>(lp.n_vars);
  if (lp.objective.size() != n || lp.lower.size() != n || lp.upper.size() != n)
    throw DimensionMismatch("objective/bounds length does not match n_vars");
  for (size_t j = 0; j < n; ++j) {
    if (std::isnan(lp.lower[j]) || std::isnan(lp.upper[j]) || lp.lower[j] > lp.upper[j] ||
        lp.lower[j] == kInf || lp.upper[j] == -kInf)
      throw DimensionMismatch("invalid bounds on variable " + std::to_string(j));
    if (!std::isfinite(lp.objective[j])) throw DimensionMismatch("non-finite objective coefficient");
  }
  for (size_t i = 0; i < lp.rows.size(); ++i) {
    if (!std::isfinite(lp.rows[i].rhs)) throw DimensionMismatch("non-finite rhs on row " + std::to_string(i));
    for (const auto& e : lp.rows[i].coeffs)
      if (e.index < 0 || e.index >= lp.n_vars)
        throw DimensionMismatch("row " + std::to_string(i) + " references variable " + std::to_string(e.index));
  }
}

}  // namespace detail

/// Solves `lp`. Deterministic: identical input gives identical output.
inline LpSolution solve_lp(const LinearProgram& lp, const LpTolerances& tol = {}) {
  detail::check_program(lp);
  detail::BoundedSimplex simplex(lp, tol);
  return simplex.solve();
}

inline double row_activity(const LpRow& row, const std::vector<double>& x) {
  double a = 0.0;
  for (const auto& e : row.coeffs) a += e.value * x[e.index];
  return a;
}

/// Audits an Optimal solution: primal feasibility, dual sign feasibility,
/// strong duality and complementary slackness. Reduced costs are recomputed
/// from the row duals rather than trusted.
inline bool dual_check(const LinearProgram& lp, const LpSolution& sol, const LpTolerances& tol = {}) {
  if (sol.status != LpStatus::Optimal) return false;
  const int n = lp.n_vars;
  const int m = static_cast<int>(lp.rows.size());
  if (static_cast<int>(sol.primal.size()) != n || static_cast<int>(sol.row_duals.size()) != m) return false;
  const auto& x = sol.primal;
  const auto& y = sol.row_duals;

  for (int j = 0; j < n; ++j)
    if (x[j] < lp.lower[j] - tol.primal_feas || x[j] > lp.upper[j] + tol.primal_feas) return false;

  std::vector<double> d(lp.objective);
  double dual_obj = 0.0;
  for (int i = 0; i < m; ++i) {
    const auto& row = lp.rows[i];
    const double act = row_activity(row, x);
    switch (row.sense) {
      case Sense::GE:
        if (act < row.rhs - tol.primal_feas || y[i] < -tol.complementarity) return false;
        break;
      case Sense::LE:
        if (act > row.rhs + tol.primal_feas || y[i] > tol.complementarity) return false;
        break;
      case Sense::EQ:
        if (std::abs(act - row.rhs) > tol.primal_feas) return false;
        break;
    }
    if (std::abs(y[i] * (act - row.rhs)) > tol.complementarity) return false;
    dual_obj += y[i] * row.rhs;
    for (const auto& e : row.coeffs) d[e.index] -= y[i] * e.value;
  }
  for (int j = 0; j < n; ++j) {
    if (d[j] > tol.complementarity) {
      if (!std::isfinite(lp.lower[j])) return false;
      dual_obj += d[j] * lp.lower[j];
      if (std::abs(d[j] * (x[j] - lp.lower[j])) > tol.complementarity) return false;
    } else if (d[j] < -tol.complementarity) {
      if (!std::isfinite(lp.upper[j])) return false;
      dual_obj += d[j] * lp.upper[j];
      if (std::abs(d[j] * (x[j] - lp.upper[j])) > tol.complementarity) return false;
    } else {
      // Near-zero reduced cost: charge it at the bound the primal sits on.
      const double at = std::isfinite(lp.lower[j]) && std::abs(x[j] - lp.lower[j]) <= std::abs(x[j] - lp.upper[j])
                            ? lp.lower[j]
                            : (std::isfinite(lp.upper[j]) ? lp.upper[j] : x[j]);
      dual_obj += d[j] * at;
    }
  }
  double primal_obj = 0.0;
  for (int j = 0; j < n; ++j) primal_obj += lp.objective[j] * x[j];
  const double scale = std::max(1.0, std::abs(sol.objective_value));
  if (std::abs(primal_obj - sol.objective_value) > tol.duality * scale) return false;
  if (std::abs(primal_obj - dual_obj) > tol.duality * scale) return false;
  return true;
}

/// CPLEX LP text format, minimize form.
inline std::string write_lp_format(const LinearProgram& lp) {
  auto vname = [&](int j) {
    return j < static_cast<int>(lp.var_names.size()) && !lp.var_names[j].empty() ? lp.var_names[j]
                                                                                   : "x" + std::to_string(j);
  };
  auto rname = [&](int i) {
    return i < static_cast<int>(lp.row_names.size()) && !lp.row_names[i].empty() ? lp.row_names[i]
                                                                                  : "r" + std::to_string(i);
  };
  std::ostringstream os;
  os << std::setprecision(17);
  auto term = [&](double v, int j, bool first) {
    if (v < 0) os << (first ? "-" : "- ") << -v << " " << vname(j);
    else os << (first ? "" : "+ ") << v << " " << vname(j);
  };
  os << "Minimize\n obj:";
  bool first = true;
  for (int j = 0; j < lp.n_vars; ++j) {
    if (lp.objective[j] == 0.0) continue;
    os << " ";
    term(lp.objective[j], j, first);
    first = false;
  }
  if (first) os << " 0 " << (lp.n_vars > 0 ? vname(0) : "x0");
  os << "\nSubject To\n";
  for (int i = 0; i < static_cast<int>(lp.rows.size()); ++i) {
    const auto& row = lp.rows[i];
    os << " " << rname(i) << ":";
    bool f = true;
    for (const auto& e : row.coeffs) {
      os << " ";
      term(e.value, e.index, f);
      f = false;
    }
    if (f) os << " 0 " << (lp.n_vars > 0 ? vname(0) : "x0");
    os << (row.sense == Sense::GE ? " >= " : row.sense == Sense::LE ? " <= " : " = ") << row.rhs << "\n";
  }
  os << "Bounds\n";
  for (int j = 0; j < lp.n_vars; ++j) {
    const double lo = lp.lower[j], hi = lp.upper[j];
    if (!std::isfinite(lo) && !std::isfinite(hi)) os << " " << vname(j) << " free\n";
    else if (!std::isfinite(lo)) os << " -inf <= " << vname(j) << " <= " << hi << "\n";
    else if (!std::isfinite(hi)) os << " " << vname(j) << " >= " << lo << "\n";
    else os << " " << lo << " <= " << vname(j) << " <= " << hi << "\n";
  }
  os << "End\n";
  return os.str();
}

}  // namespace pfsddp

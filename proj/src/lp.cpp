#include "amod/lp.hpp"

#include <algorithm>
#include <cmath>
#include <map>
#include <sstream>

#include "amod/error.hpp"

namespace amod {

std::size_t LinearProgram::add_variable(double cost, double lower, double upper, std::string name) {
  vars_.push_back({cost, lower, upper, std::move(name)});
  return vars_.size() - 1;
}

std::size_t LinearProgram::add_row(std::vector<LpTerm> terms, Relation relation, double rhs,
                                   std::string name) {
  rows_.push_back({std::move(terms), relation, rhs, std::move(name)});
  return rows_.size() - 1;
}

void LinearProgram::set_bounds(std::size_t var, double lower, double upper) {
  vars_[var].lower = lower;
  vars_[var].upper = upper;
}

void LinearProgram::check() const {
  for (std::size_t j = 0; j < vars_.size(); ++j) {
    const auto& v = vars_[j];
    if (!std::isfinite(v.cost)) throw InputError("lp: non-finite cost on variable " + std::to_string(j));
    if (std::isnan(v.lower) || std::isnan(v.upper) || v.lower == kInfinity || v.upper == -kInfinity)
      throw InputError("lp: invalid bounds on variable " + std::to_string(j));
  }
  for (std::size_t i = 0; i < rows_.size(); ++i) {
    const auto& r = rows_[i];
    if (!std::isfinite(r.rhs)) throw InputError("lp: non-finite rhs in row " + std::to_string(i));
    for (const auto& t : r.terms) {
      if (t.var >= vars_.size())
        throw InputError("lp: row " + std::to_string(i) + " references undeclared variable");
      if (!std::isfinite(t.coef)) throw InputError("lp: non-finite coefficient in row " + std::to_string(i));
    }
  }
}

double LinearProgram::objective_of(const std::vector<double>& x) const {
  double z = 0.0;
  for (std::size_t j = 0; j < vars_.size(); ++j) z += vars_[j].cost * x[j];
  return z;
}

const char* to_string(LpStatus status) {
  switch (status) {
    case LpStatus::Optimal: return "optimal";
    case LpStatus::Infeasible: return "infeasible";
    case LpStatus::Unbounded: return "unbounded";
    case LpStatus::NumericalFailure: return "numerical-failure";
  }
  return "unknown";
}

namespace {

using SparseVec = std::vector<std::pair<std::size_t, double>>;

constexpr double kPivotTolerance = 1e-9;
constexpr double kDropTolerance = 1e-13;
constexpr std::size_t kDegenerateStreakForBland = 64;

// Nearest power of two to 1/magnitude; exact in floating point.
double pow2_inverse(double magnitude) {
  if (magnitude <= 0.0) return 1.0;
  return std::ldexp(1.0, -static_cast<int>(std::lround(std::log2(magnitude))));
}

// Nonnegative column produced from an original variable: x_var += sign * column.
struct StructColumn {
  std::size_t var;
  double sign;
};

struct StdRow {
  SparseVec terms;  // over structural columns
  Relation relation;
  double rhs;
  long user_row;  // -1 for rows generated from upper bounds
};

// Standard form after bound shifting: min c'y, rows, y >= 0; x = offset + M y.
struct StandardForm {
  std::vector<StructColumn> columns;
  std::vector<double> cost;
  std::vector<double> offset;
  std::vector<StdRow> rows;
  bool trivially_infeasible = false;
};

StandardForm standardize(const LinearProgram& lp, double feas_tol) {
  StandardForm sf;
  const auto& vars = lp.variables();
  sf.offset.assign(vars.size(), 0.0);
  // var -> list of (column, sign)
  std::vector<std::vector<std::pair<std::size_t, double>>> var_cols(vars.size());
  std::vector<StdRow> bound_rows;
  for (std::size_t j = 0; j < vars.size(); ++j) {
    const auto& v = vars[j];
    auto add_col = [&](double sign) {
      const std::size_t k = sf.columns.size();
      sf.columns.push_back({j, sign});
      sf.cost.push_back(sign * v.cost);
      var_cols[j].push_back({k, sign});
      return k;
    };
    if (v.lower > v.upper + feas_tol * std::max(1.0, std::abs(v.lower))) {
      sf.trivially_infeasible = true;
      continue;
    }
    if (std::isfinite(v.lower) && std::isfinite(v.upper) && v.upper - v.lower <= 0.0) {
      sf.offset[j] = v.lower;  // fixed
    } else if (std::isfinite(v.lower)) {
      sf.offset[j] = v.lower;
      const std::size_t k = add_col(1.0);
      if (std::isfinite(v.upper))
        bound_rows.push_back({{{k, 1.0}}, Relation::LessEqual, v.upper - v.lower, -1});
    } else if (std::isfinite(v.upper)) {
      sf.offset[j] = v.upper;
      add_col(-1.0);
    } else {
      add_col(1.0);
      add_col(-1.0);
    }
  }
  const auto& rows = lp.rows();
  for (std::size_t i = 0; i < rows.size(); ++i) {
    const auto& r = rows[i];
    std::map<std::size_t, double> merged;
    double rhs = r.rhs;
    for (const auto& t : r.terms) {
      rhs -= t.coef * sf.offset[t.var];
      for (auto [k, sign] : var_cols[t.var]) merged[k] += sign * t.coef;
    }
    StdRow row{{}, r.relation, rhs, static_cast<long>(i)};
    for (auto [k, a] : merged)
      if (a != 0.0) row.terms.push_back({k, a});
    sf.rows.push_back(std::move(row));
  }
  for (auto& b : bound_rows) sf.rows.push_back(std::move(b));
  return sf;
}

bool relation_holds(Relation rel, double lhs, double rhs, double tol) {
  switch (rel) {
    case Relation::LessEqual: return lhs <= rhs + tol;
    case Relation::GreaterEqual: return lhs >= rhs - tol;
    case Relation::Equal: return std::abs(lhs - rhs) <= tol;
  }
  return false;
}

double row_violation(Relation rel, double lhs, double rhs) {
  switch (rel) {
    case Relation::LessEqual: return std::max(0.0, lhs - rhs);
    case Relation::GreaterEqual: return std::max(0.0, rhs - lhs);
    case Relation::Equal: return std::abs(lhs - rhs);
  }
  return 0.0;
}

// Solves the dense system B x = b with partial pivoting. B is column-major.
bool dense_solve(std::vector<double> b_matrix, std::vector<double>& rhs, std::size_t m) {
  std::vector<std::size_t> perm(m);
  for (std::size_t i = 0; i < m; ++i) perm[i] = i;
  auto at = [&](std::size_t i, std::size_t j) -> double& { return b_matrix[j * m + i]; };
  for (std::size_t k = 0; k < m; ++k) {
    std::size_t p = k;
    for (std::size_t i = k + 1; i < m; ++i)
      if (std::abs(at(i, k)) > std::abs(at(p, k))) p = i;
    if (std::abs(at(p, k)) < 1e-12) return false;
    if (p != k) {
      for (std::size_t j = 0; j < m; ++j) std::swap(at(p, j), at(k, j));
      std::swap(rhs[p], rhs[k]);
    }
    const double inv = 1.0 / at(k, k);
    for (std::size_t i = k + 1; i < m; ++i) {
      const double f = at(i, k) * inv;
      if (f == 0.0) continue;
      for (std::size_t j = k; j < m; ++j) at(i, j) -= f * at(k, j);
      rhs[i] -= f * rhs[k];
    }
  }
  for (std::size_t k = m; k-- > 0;) {
    double s = rhs[k];
    for (std::size_t j = k + 1; j < m; ++j) s -= at(k, j) * rhs[j];
    rhs[k] = s / at(k, k);
  }
  return true;
}

class Simplex {
 public:
  enum class Outcome { Optimal, Infeasible, Unbounded, IterationLimit };

  Simplex(std::size_t rows, std::size_t structural, const LpTolerances& tol)
      : m_(rows), n_struct_(structural), tol_(tol) {}

  // Columns: structural, then per-row auxiliaries appended by add_row.
  void build(const std::vector<SparseVec>& rows, const std::vector<Relation>& relations,
             const std::vector<double>& rhs, const std::vector<double>& cost) {
    // Count auxiliary columns.
    std::size_t aux = 0;
    for (Relation r : relations) aux += (r == Relation::GreaterEqual) ? 2 : 1;
    ncols_ = n_struct_ + aux;
    width_ = ncols_ + 1;
    data_.assign(m_ * width_, 0.0);
    artificial_.assign(ncols_, false);
    unit_col_.assign(m_, 0);
    basis_.assign(m_, 0);
    columns_.assign(ncols_, {});
    std::size_t next = n_struct_;
    for (std::size_t i = 0; i < m_; ++i) {
      double* r = row(i);
      for (auto [k, a] : rows[i]) {
        r[k] = a;
        columns_[k].push_back({i, a});
      }
      r[ncols_] = rhs[i];
      if (relations[i] == Relation::LessEqual) {
        r[next] = 1.0;
        columns_[next].push_back({i, 1.0});
        unit_col_[i] = next;
        basis_[i] = next++;
      } else {
        if (relations[i] == Relation::GreaterEqual) {
          r[next] = -1.0;
          columns_[next].push_back({i, -1.0});
          ++next;
        }
        r[next] = 1.0;
        columns_[next].push_back({i, 1.0});
        artificial_[next] = true;
        unit_col_[i] = next;
        basis_[i] = next++;
      }
    }
    phase1_.assign(width_, 0.0);
    phase2_.assign(width_, 0.0);
    for (std::size_t k = 0; k < n_struct_; ++k) phase2_[k] = cost[k];
    for (std::size_t i = 0; i < m_; ++i) {
      if (!artificial_[basis_[i]]) continue;
      const double* r = row(i);
      for (std::size_t k = 0; k < width_; ++k)
        if (!artificial_[k] || k == ncols_) phase1_[k] -= r[k];
    }
    for (std::size_t k = 0; k < ncols_; ++k)
      if (artificial_[k]) phase1_[k] = 0.0;
  }

  Outcome run(std::size_t max_pivots) {
    max_pivots_ = max_pivots;
    bool has_artificial = std::any_of(basis_.begin(), basis_.end(), [&](std::size_t b) { return artificial_[b]; });
    if (has_artificial) {
      const Outcome o = iterate(phase1_);
      if (o == Outcome::IterationLimit) return o;
      double max_rhs = 1.0;
      for (std::size_t i = 0; i < m_; ++i) max_rhs = std::max(max_rhs, row(i)[ncols_]);
      if (-phase1_[ncols_] > tol_.feasibility * max_rhs) return Outcome::Infeasible;
      drive_out_artificials();
    }
    return iterate(phase2_);
  }

  std::vector<double> structural_values() const {
    std::vector<double> y(n_struct_, 0.0);
    for (std::size_t i = 0; i < m_; ++i)
      if (basis_[i] < n_struct_) y[basis_[i]] = std::max(0.0, row(i)[ncols_]);
    return y;
  }

  // Re-solves B x_B = b from the stored columns; replaces basic values.
  bool refactor(const std::vector<double>& rhs) {
    std::vector<double> b(m_ * m_, 0.0);
    for (std::size_t j = 0; j < m_; ++j)
      for (auto [i, a] : columns_[basis_[j]]) b[j * m_ + i] = a;
    std::vector<double> x = rhs;
    if (!dense_solve(std::move(b), x, m_)) return false;
    for (std::size_t i = 0; i < m_; ++i) row(i)[ncols_] = x[i];
    return true;
  }

  double row_dual(std::size_t i) const { return -phase2_[unit_col_[i]]; }
  std::size_t pivots() const { return pivots_; }

 private:
  double* row(std::size_t i) { return data_.data() + i * width_; }
  const double* row(std::size_t i) const { return data_.data() + i * width_; }

  Outcome iterate(std::vector<double>& obj) {
    std::size_t degenerate_streak = 0;
    for (;;) {
      if (pivots_ >= max_pivots_) return Outcome::IterationLimit;
      const bool bland = degenerate_streak >= kDegenerateStreakForBland;
      std::size_t enter = ncols_;
      double best = -tol_.optimality;
      for (std::size_t k = 0; k < ncols_; ++k) {
        if (artificial_[k]) continue;
        if (obj[k] < best) {
          enter = k;
          if (bland) break;
          best = obj[k];
        }
      }
      if (enter == ncols_) return Outcome::Optimal;

      std::size_t leave = m_;
      double best_ratio = kInfinity, best_pivot = 0.0;
      for (std::size_t i = 0; i < m_; ++i) {
        const double* r = row(i);
        const double a = r[enter];
        if (a <= kPivotTolerance) continue;
        const double ratio = std::max(0.0, r[ncols_]) / a;
        const double tie = 1e-12 * (1.0 + std::abs(best_ratio));
        bool take = false;
        if (leave == m_ || ratio < best_ratio - tie) {
          take = true;
        } else if (ratio <= best_ratio + tie) {
          take = bland ? basis_[i] < basis_[leave] : a > best_pivot;
        }
        if (take) {
          leave = i;
          best_ratio = std::min(ratio, best_ratio);
          best_pivot = a;
        }
      }
      if (leave == m_) return Outcome::Unbounded;
      degenerate_streak = best_ratio <= 1e-12 ? degenerate_streak + 1 : 0;
      pivot(leave, enter);
    }
  }

  void drive_out_artificials() {
    for (std::size_t i = 0; i < m_; ++i) {
      if (!artificial_[basis_[i]]) continue;
      const double* r = row(i);
      std::size_t best = ncols_;
      double mag = kPivotTolerance;
      for (std::size_t k = 0; k < ncols_; ++k) {
        if (artificial_[k]) continue;
        if (std::abs(r[k]) > mag) {
          mag = std::abs(r[k]);
          best = k;
        }
      }
      // No candidate: the row is redundant and its artificial stays at zero.
      if (best != ncols_) pivot(i, best);
    }
  }

  void pivot(std::size_t r, std::size_t c) {
    ++pivots_;
    double* pr = row(r);
    const double inv = 1.0 / pr[c];
    nz_.clear();
    for (std::size_t k = 0; k < width_; ++k) {
      if (pr[k] == 0.0) continue;
      pr[k] *= inv;
      if (std::abs(pr[k]) < kDropTolerance) {
        pr[k] = 0.0;
      } else {
        nz_.push_back(k);
      }
    }
    pr[c] = 1.0;
    auto eliminate = [&](double* target) {
      const double f = target[c];
      if (f == 0.0) return;
      for (std::size_t k : nz_) {
        double v = target[k] - f * pr[k];
        target[k] = std::abs(v) < kDropTolerance ? 0.0 : v;
      }
      target[c] = 0.0;
    };
    for (std::size_t i = 0; i < m_; ++i)
      if (i != r) eliminate(row(i));
    eliminate(phase1_.data());
    eliminate(phase2_.data());
    basis_[r] = c;
  }

  std::size_t m_;
  std::size_t n_struct_;
  LpTolerances tol_;
  std::size_t ncols_ = 0;
  std::size_t width_ = 0;
  std::vector<double> data_;
  std::vector<double> phase1_, phase2_;
  std::vector<bool> artificial_;
  std::vector<std::size_t> unit_col_;
  std::vector<std::size_t> basis_;
  std::vector<SparseVec> columns_;
  std::vector<std::size_t> nz_;
  std::size_t pivots_ = 0;
  std::size_t max_pivots_ = 0;
};

struct Residual {
  double scaled_max = 0.0;  // worst violation measured on equilibrated rows
  double raw_max = 0.0;
};

Residual measure(const LinearProgram& lp, const std::vector<double>& x,
                 const std::vector<double>& row_scale, double feas_tol, bool* ok) {
  Residual res;
  *ok = true;
  const auto& rows = lp.rows();
  for (std::size_t i = 0; i < rows.size(); ++i) {
    double lhs = 0.0;
    for (const auto& t : rows[i].terms) lhs += t.coef * x[t.var];
    const double v = row_violation(rows[i].relation, lhs, rows[i].rhs);
    res.raw_max = std::max(res.raw_max, v);
    const double scaled = v * row_scale[i];
    res.scaled_max = std::max(res.scaled_max, scaled);
    if (scaled > feas_tol * std::max(1.0, std::abs(rows[i].rhs) * row_scale[i])) *ok = false;
  }
  const auto& vars = lp.variables();
  for (std::size_t j = 0; j < vars.size(); ++j) {
    const double v = std::max({0.0, vars[j].lower - x[j], x[j] - vars[j].upper});
    res.raw_max = std::max(res.raw_max, v);
    if (v > feas_tol * std::max(1.0, std::abs(x[j]))) *ok = false;
  }
  return res;
}

}  // namespace

LpSolution solve_lp(const LinearProgram& lp, const LpTolerances& tolerances) {
  lp.check();
  LpSolution sol;
  StandardForm sf = standardize(lp, tolerances.feasibility);
  if (sf.trivially_infeasible) {
    sol.status = LpStatus::Infeasible;
    sol.detail = "contradictory variable bounds";
    return sol;
  }

  // Drop rows without coefficients after checking them directly.
  std::vector<std::size_t> active;
  for (std::size_t i = 0; i < sf.rows.size(); ++i) {
    if (!sf.rows[i].terms.empty()) {
      active.push_back(i);
      continue;
    }
    if (!relation_holds(sf.rows[i].relation, 0.0, sf.rows[i].rhs,
                        tolerances.feasibility * std::max(1.0, std::abs(sf.rows[i].rhs)))) {
      sol.status = LpStatus::Infeasible;
      sol.detail = "empty row with unsatisfiable right-hand side";
      return sol;
    }
  }

  const std::size_t m = active.size();
  const std::size_t n = sf.columns.size();

  // Equilibrate rows, then columns, with power-of-two factors.
  std::vector<double> rscale(m, 1.0), cscale(n, 1.0);
  for (std::size_t a = 0; a < m; ++a) {
    double mx = 0.0;
    for (auto [k, v] : sf.rows[active[a]].terms) mx = std::max(mx, std::abs(v));
    rscale[a] = pow2_inverse(mx);
  }
  std::vector<double> cmax(n, 0.0);
  for (std::size_t a = 0; a < m; ++a)
    for (auto [k, v] : sf.rows[active[a]].terms) cmax[k] = std::max(cmax[k], std::abs(v) * rscale[a]);
  for (std::size_t k = 0; k < n; ++k) cscale[k] = pow2_inverse(cmax[k]);

  std::vector<SparseVec> rows(m);
  std::vector<Relation> rel(m);
  std::vector<double> rhs(m), sign(m, 1.0);
  for (std::size_t a = 0; a < m; ++a) {
    const StdRow& r = sf.rows[active[a]];
    double b = r.rhs * rscale[a];
    rel[a] = r.relation;
    if (b < 0.0) {
      sign[a] = -1.0;
      b = -b;
      if (rel[a] == Relation::LessEqual) {
        rel[a] = Relation::GreaterEqual;
      } else if (rel[a] == Relation::GreaterEqual) {
        rel[a] = Relation::LessEqual;
      }
    }
    rhs[a] = b;
    for (auto [k, v] : r.terms) rows[a].push_back({k, sign[a] * v * rscale[a] * cscale[k]});
  }
  std::vector<double> cost(n);
  for (std::size_t k = 0; k < n; ++k) cost[k] = sf.cost[k] * cscale[k];

  Simplex simplex(m, n, tolerances);
  simplex.build(rows, rel, rhs, cost);
  const std::size_t limit =
      tolerances.max_pivots ? tolerances.max_pivots : 50 * (m + n) + 1000;
  const auto outcome = simplex.run(limit);
  sol.pivots = simplex.pivots();
  switch (outcome) {
    case Simplex::Outcome::Infeasible:
      sol.status = LpStatus::Infeasible;
      return sol;
    case Simplex::Outcome::Unbounded:
      sol.status = LpStatus::Unbounded;
      return sol;
    case Simplex::Outcome::IterationLimit:
      sol.status = LpStatus::NumericalFailure;
      sol.detail = "pivot limit reached";
      return sol;
    case Simplex::Outcome::Optimal: break;
  }

  // Row scale per user row for residual measurement (bound rows excluded).
  std::vector<double> user_scale(lp.row_count(), 1.0);
  for (std::size_t a = 0; a < m; ++a)
    if (sf.rows[active[a]].user_row >= 0) user_scale[sf.rows[active[a]].user_row] = rscale[a];

  auto recover = [&]() {
    const std::vector<double> y = simplex.structural_values();
    std::vector<double> x = sf.offset;
    for (std::size_t k = 0; k < n; ++k) x[sf.columns[k].var] += sf.columns[k].sign * y[k] * cscale[k];
    return x;
  };

  std::vector<double> x = recover();
  bool ok = false;
  Residual res = measure(lp, x, user_scale, tolerances.feasibility, &ok);
  if (!ok && simplex.refactor(rhs)) {
    x = recover();
    res = measure(lp, x, user_scale, tolerances.feasibility, &ok);
  }
  sol.max_violation = res.raw_max;
  if (!ok) {
    sol.status = LpStatus::NumericalFailure;
    sol.detail = "solution failed the feasibility check";
    return sol;
  }

  sol.status = LpStatus::Optimal;
  sol.values = std::move(x);
  sol.objective = lp.objective_of(sol.values);
  sol.duals.assign(lp.row_count(), 0.0);
  for (std::size_t a = 0; a < m; ++a) {
    const long u = sf.rows[active[a]].user_row;
    if (u >= 0) sol.duals[u] = sign[a] * rscale[a] * simplex.row_dual(a);
  }
  return sol;
}

std::string dump_lp(const LinearProgram& lp) {
  std::ostringstream os;
  os.precision(17);
  auto name = [&](std::size_t j) {
    const auto& v = lp.variables()[j];
    return v.name.empty() ? "x" + std::to_string(j) : v.name;
  };
  os << "min:";
  for (std::size_t j = 0; j < lp.variable_count(); ++j)
    if (lp.variables()[j].cost != 0.0) os << ' ' << lp.variables()[j].cost << '*' << name(j);
  os << '\n';
  for (std::size_t i = 0; i < lp.row_count(); ++i) {
    const auto& r = lp.rows()[i];
    os << (r.name.empty() ? "r" + std::to_string(i) : r.name) << ':';
    for (const auto& t : r.terms) os << ' ' << t.coef << '*' << name(t.var);
    os << (r.relation == Relation::LessEqual ? " <= " : r.relation == Relation::Equal ? " = " : " >= ")
       << r.rhs << '\n';
  }
  for (std::size_t j = 0; j < lp.variable_count(); ++j) {
    const auto& v = lp.variables()[j];
    if (v.lower == 0.0 && v.upper == kInfinity) continue;
    os << "bounds: " << v.lower << " <= " << name(j) << " <= " << v.upper << '\n';
  }
  return os.str();
}

}  // namespace amod

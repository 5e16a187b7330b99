#pragma once

#include <cstddef>
#include <limits>
#include <string>
#include <vector>

namespace amod {

inline constexpr double kInfinity = std::numeric_limits<double>::infinity();

enum class Relation { LessEqual, Equal, GreaterEqual };

struct LpTerm {
  std::size_t var = 0;
  double coef = 0.0;
};

struct LpRow {
  std::vector<LpTerm> terms;
  Relation relation = Relation::LessEqual;
  double rhs = 0.0;
  std::string name;
};

struct LpVariable {
  double cost = 0.0;
  double lower = 0.0;
  double upper = kInfinity;
  std::string name;
};

/// Minimization LP: min c'x  s.t.  rows, lower <= x <= upper.
class LinearProgram {
 public:
  std::size_t add_variable(double cost, double lower = 0.0, double upper = kInfinity,
                           std::string name = {});
  std::size_t add_row(std::vector<LpTerm> terms, Relation relation, double rhs,
                      std::string name = {});

  void set_bounds(std::size_t var, double lower, double upper);
  void set_cost(std::size_t var, double cost) { vars_[var].cost = cost; }

  std::size_t variable_count() const { return vars_.size(); }
  std::size_t row_count() const { return rows_.size(); }
  const std::vector<LpVariable>& variables() const { return vars_; }
  const std::vector<LpRow>& rows() const { return rows_; }

  // Throws InputError on dangling variable references or non-finite data.
  void check() const;

  double objective_of(const std::vector<double>& x) const;

 private:
  std::vector<LpVariable> vars_;
  std::vector<LpRow> rows_;
};

enum class LpStatus { Optimal, Infeasible, Unbounded, NumericalFailure };

const char* to_string(LpStatus status);

struct LpTolerances {
  double feasibility = 1e-9;
  double optimality = 1e-9;
  std::size_t max_pivots = 0;  // 0 selects a size-based limit
};

struct LpSolution {
  LpStatus status = LpStatus::NumericalFailure;
  std::vector<double> values;
  double objective = 0.0;
  // One multiplier per row when optimal, sign convention y = c_B B^-1 so that
  // sum(rhs * y) equals the objective for LPs whose bounds are [0, inf).
  std::vector<double> duals;
  std::size_t pivots = 0;
  double max_violation = 0.0;  // worst row/bound residual on the original data
  std::string detail;
};

LpSolution solve_lp(const LinearProgram& lp, const LpTolerances& tolerances = {});

// Plain-text dump for debugging:
//   min: <cost>*<name> ...
//   <row name>: <coef>*<name> ... <= | = | >= <rhs>
//   bounds: <lower> <= <name> <= <upper>
std::string dump_lp(const LinearProgram& lp);

}  // namespace amod

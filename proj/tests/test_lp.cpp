#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <numeric>

#include "amod/lp.hpp"
#include "amod/random.hpp"

using namespace amod;

TEST_CASE("single lower bound") {
  LinearProgram lp;
  auto x = lp.add_variable(1.0);
  lp.add_row({{x, 1.0}}, Relation::GreaterEqual, 1.0);
  auto sol = solve_lp(lp);
  REQUIRE(sol.status == LpStatus::Optimal);
  CHECK(sol.values[x] == doctest::Approx(1.0));
  CHECK(sol.objective == doctest::Approx(1.0));
  CHECK(sol.duals[0] == doctest::Approx(1.0));
}

TEST_CASE("two variables on a face") {
  LinearProgram lp;
  auto x = lp.add_variable(1.0);
  auto y = lp.add_variable(1.0);
  lp.add_row({{x, 1.0}, {y, 1.0}}, Relation::GreaterEqual, 2.0);
  lp.add_row({{x, 1.0}}, Relation::LessEqual, 0.5);
  auto sol = solve_lp(lp);
  REQUIRE(sol.status == LpStatus::Optimal);
  CHECK(sol.objective == doctest::Approx(2.0));
  CHECK(sol.values[x] <= 0.5 + 1e-9);
  CHECK(sol.values[x] + sol.values[y] == doctest::Approx(2.0));
}

TEST_CASE("contradictory bound is infeasible") {
  LinearProgram lp;
  auto x = lp.add_variable(1.0);
  lp.add_row({{x, 1.0}}, Relation::LessEqual, -1.0);
  CHECK(solve_lp(lp).status == LpStatus::Infeasible);

  LinearProgram lp2;
  lp2.add_variable(0.0, 2.0, 1.0);
  CHECK(solve_lp(lp2).status == LpStatus::Infeasible);
}

TEST_CASE("unbounded objective") {
  LinearProgram lp;
  auto x = lp.add_variable(-1.0);
  auto y = lp.add_variable(0.0);
  lp.add_row({{x, 1.0}, {y, -1.0}}, Relation::LessEqual, 1.0);
  CHECK(solve_lp(lp).status == LpStatus::Unbounded);
}

TEST_CASE("bounds, free and fixed variables") {
  LinearProgram lp;
  auto x = lp.add_variable(1.0, -kInfinity, kInfinity);  // free
  auto y = lp.add_variable(-1.0, -3.0, 4.0);
  auto z = lp.add_variable(5.0, 2.0, 2.0);  // fixed
  auto w = lp.add_variable(-2.0, -kInfinity, 1.5);
  lp.add_row({{x, 1.0}, {y, 1.0}}, Relation::GreaterEqual, -10.0);
  lp.add_row({{x, 1.0}, {z, 1.0}, {w, 1.0}}, Relation::Equal, 0.0);
  auto sol = solve_lp(lp);
  REQUIRE(sol.status == LpStatus::Optimal);
  // w at its upper bound 1.5 forces x = -3.5, y free to reach 4.
  CHECK(sol.values[w] == doctest::Approx(1.5));
  CHECK(sol.values[x] == doctest::Approx(-3.5));
  CHECK(sol.values[y] == doctest::Approx(4.0));
  CHECK(sol.values[z] == doctest::Approx(2.0));
  CHECK(sol.objective == doctest::Approx(-3.5 - 4.0 + 10.0 - 3.0));
}

TEST_CASE("redundant equality rows") {
  LinearProgram lp;
  auto x = lp.add_variable(1.0);
  auto y = lp.add_variable(2.0);
  lp.add_row({{x, 1.0}, {y, 1.0}}, Relation::Equal, 3.0);
  lp.add_row({{x, 2.0}, {y, 2.0}}, Relation::Equal, 6.0);
  lp.add_row({{x, 1.0}}, Relation::LessEqual, 1.0);
  auto sol = solve_lp(lp);
  REQUIRE(sol.status == LpStatus::Optimal);
  CHECK(sol.objective == doctest::Approx(5.0));
}

TEST_CASE("badly scaled data") {
  LinearProgram lp;
  auto x = lp.add_variable(1e-4);
  auto y = lp.add_variable(1e3);
  lp.add_row({{x, 1e6}, {y, 1e-3}}, Relation::GreaterEqual, 1e5);
  lp.add_row({{x, 1.0}}, Relation::LessEqual, 0.05);
  auto sol = solve_lp(lp);
  REQUIRE(sol.status == LpStatus::Optimal);
  CHECK(sol.values[x] == doctest::Approx(0.05));
  CHECK(sol.values[y] == doctest::Approx((1e5 - 5e4) / 1e-3));
}

TEST_CASE("check rejects dangling references") {
  LinearProgram lp;
  lp.add_variable(1.0);
  lp.add_row({{3, 1.0}}, Relation::LessEqual, 1.0);
  CHECK_THROWS(solve_lp(lp));
}

TEST_CASE("dump is readable") {
  LinearProgram lp;
  auto x = lp.add_variable(2.0, 0.0, kInfinity, "x");
  lp.add_row({{x, 1.0}}, Relation::GreaterEqual, 1.0, "floor");
  const std::string text = dump_lp(lp);
  CHECK(text.find("min: 2*x") != std::string::npos);
  CHECK(text.find("floor: 1*x >= 1") != std::string::npos);
}

namespace {

// Random feasible bounded LP: A x >= b with A, b >= 0 and positive costs.
LinearProgram random_lp(Rng& rng, std::size_t m, std::size_t n) {
  LinearProgram lp;
  for (std::size_t j = 0; j < n; ++j) lp.add_variable(rng.uniform(0.5, 3.0));
  for (std::size_t i = 0; i < m; ++i) {
    std::vector<LpTerm> terms;
    for (std::size_t j = 0; j < n; ++j)
      if (rng.uniform() < 0.6) terms.push_back({j, static_cast<double>(rng.between(1, 5))});
    if (terms.empty()) terms.push_back({rng.below(n), 1.0});
    const auto rel = rng.uniform() < 0.7 ? Relation::GreaterEqual : Relation::LessEqual;
    const double rhs = rel == Relation::GreaterEqual ? rng.uniform(1.0, 10.0) : rng.uniform(20.0, 40.0);
    lp.add_row(std::move(terms), rel, rhs);
  }
  return lp;
}

}  // namespace

TEST_CASE("weak duality on random instances") {
  Rng rng(17);
  for (int trial = 0; trial < 40; ++trial) {
    auto lp = random_lp(rng, 3 + rng.below(6), 2 + rng.below(6));
    auto sol = solve_lp(lp);
    if (sol.status != LpStatus::Optimal) continue;
    double dual_obj = 0.0;
    for (std::size_t i = 0; i < lp.row_count(); ++i) {
      dual_obj += lp.rows()[i].rhs * sol.duals[i];
      // Sign feasibility for a minimization.
      if (lp.rows()[i].relation == Relation::GreaterEqual) CHECK(sol.duals[i] >= -1e-9);
      if (lp.rows()[i].relation == Relation::LessEqual) CHECK(sol.duals[i] <= 1e-9);
    }
    CHECK(dual_obj <= sol.objective + 1e-6 * std::max(1.0, std::abs(sol.objective)));
    // Dual feasibility: c - A'y >= 0 for x >= 0.
    std::vector<double> reduced(lp.variable_count());
    for (std::size_t j = 0; j < lp.variable_count(); ++j) reduced[j] = lp.variables()[j].cost;
    for (std::size_t i = 0; i < lp.row_count(); ++i)
      for (auto t : lp.rows()[i].terms) reduced[t.var] -= t.coef * sol.duals[i];
    for (double r : reduced) CHECK(r >= -1e-7);
  }
}

TEST_CASE("objective is invariant to row and column permutation") {
  Rng rng(23);
  for (int trial = 0; trial < 30; ++trial) {
    auto lp = random_lp(rng, 4 + rng.below(5), 3 + rng.below(5));
    auto base = solve_lp(lp);
    std::vector<std::size_t> cols(lp.variable_count()), rows(lp.row_count());
    std::iota(cols.begin(), cols.end(), 0);
    std::iota(rows.begin(), rows.end(), 0);
    for (std::size_t i = cols.size(); i > 1; --i) std::swap(cols[i - 1], cols[rng.below(i)]);
    for (std::size_t i = rows.size(); i > 1; --i) std::swap(rows[i - 1], rows[rng.below(i)]);
    std::vector<std::size_t> where(cols.size());
    LinearProgram perm;
    for (std::size_t k = 0; k < cols.size(); ++k) {
      where[cols[k]] = k;
    }
    for (std::size_t k = 0; k < cols.size(); ++k) perm.add_variable(lp.variables()[cols[k]].cost);
    for (std::size_t r : rows) {
      auto row = lp.rows()[r];
      for (auto& t : row.terms) t.var = where[t.var];
      perm.add_row(row.terms, row.relation, row.rhs);
    }
    auto other = solve_lp(perm);
    REQUIRE(base.status == other.status);
    if (base.status == LpStatus::Optimal)
      CHECK(other.objective == doctest::Approx(base.objective).epsilon(1e-8));
  }
}

TEST_CASE("transportation problem has an integral vertex") {
  // 3 supplies x 3 demands, integral data.
  const double supply[] = {4, 6, 5};
  const double demand[] = {3, 7, 5};
  const double cost[3][3] = {{4, 1, 3}, {2, 5, 2}, {3, 3, 1}};
  LinearProgram lp;
  for (int i = 0; i < 3; ++i)
    for (int j = 0; j < 3; ++j) lp.add_variable(cost[i][j]);
  for (int i = 0; i < 3; ++i)
    lp.add_row({{std::size_t(3 * i), 1}, {std::size_t(3 * i + 1), 1}, {std::size_t(3 * i + 2), 1}},
               Relation::Equal, supply[i]);
  for (int j = 0; j < 3; ++j)
    lp.add_row({{std::size_t(j), 1}, {std::size_t(3 + j), 1}, {std::size_t(6 + j), 1}}, Relation::Equal,
               demand[j]);
  auto sol = solve_lp(lp);
  REQUIRE(sol.status == LpStatus::Optimal);
  for (double v : sol.values) CHECK(std::abs(v - std::round(v)) <= 1e-7);
  // Ship 4 on (0,1), 3 on (1,0), 3 on (1,2), 3 on (2,1), 2 on (2,2).
  CHECK(sol.objective == doctest::Approx(27.0));
}

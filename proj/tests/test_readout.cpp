#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <random>

#include "crt/errors.hpp"
#include "crt/readout.hpp"
#include "oracles.hpp"

using namespace crt;

TEST_CASE("terminal bound example") {
  const auto b = terminal_error_bound(0.01, 0.25);
  CHECK(b.gated);
  CHECK(b.gate == doctest::Approx(0.25));
  CHECK(b.bound == doctest::Approx(0.04));
  CHECK_FALSE(terminal_error_bound(0.3, 0.25).gated);
  CHECK(std::isinf(terminal_error_bound(0.3, 0.25).bound));
  CHECK_THROWS_AS(terminal_error_bound(0.1, 0.0), InvalidArgument);
}

TEST_CASE("normalization lemma on random pairs") {
  std::mt19937_64 rng(9);
  std::normal_distribution<double> G;
  for (int k = 0; k < 2000; ++k) {
    const int n = 1 + k % 6;
    Vec a(n), e(n);
    for (auto& x : a) x = G(rng);
    for (auto& x : e) x = G(rng);
    const Vec b = a + e * std::pow(10.0, -(k % 5));
    const double lhs = (a.normalized() - b.normalized()).norm();
    CHECK(lhs <= normalization_bound(a, b) * (1 + 1e-12));
  }
}

TEST_CASE("terminal extraction from a perturbed unit vector") {
  std::mt19937_64 rng(14);
  std::normal_distribution<double> G;
  const int T = 3, block = 6, m = 2, n = 2;
  const auto lay = terminal_layout(T, block, m, n);
  CHECK(lay.start == 3 * 6 + 2);
  CHECK(lay.n == 2);
  for (int k = 0; k < 500; ++k) {
    Vec Y((T + 1) * block);
    for (auto& x : Y) x = G(rng);
    Y.segment(lay.start, n) *= 4.0;
    Y.normalize();
    const auto exact = extract_terminal(Y, lay);
    const double p_star = exact.p_term;
    Vec E(Y.size());
    for (auto& x : E) x = G(rng);
    const double eps = 0.4 * std::sqrt(p_star) / 2.0;
    const Vec Yt = Y + E.normalized() * eps;
    const auto approx = extract_terminal(Yt, lay, 0.0);
    const auto b = terminal_error_bound(eps, p_star);
    REQUIRE(b.gated);
    CHECK((approx.unit - exact.unit).norm() <= b.bound * (1 + 1e-12));
    CHECK(exact.unit.norm() == doctest::Approx(1.0));
  }
  Vec Z = Vec::Ones((T + 1) * block);
  Z.segment(lay.start, n).setZero();
  CHECK_THROWS_AS(extract_terminal(Z, lay), DegenerateBlock);
  CHECK_THROWS_AS(terminal_layout(0, 3, 2, 2), DimensionMismatch);
  const auto h = extract_terminal(Vec::Ones((T + 1) * block).normalized(), lay, 0.5);
  CHECK_FALSE(h.h5);
}

TEST_CASE("physical horizon error") {
  CHECK(physical_horizon_error(3, 0.5, 0.01, 2.0, 0.001) == doctest::Approx(2.0 / 0.5 * 0.012));
  CHECK(std::isinf(physical_horizon_error(3, 1.0, 0.01, 2.0, 0.0)));
}

TEST_CASE("planned budgets satisfy every inequality") {
  std::mt19937_64 rng(21);
  auto comps = oracle::random_map(2, 3, 0.5, 0.05, 0.0, rng);
  BudgetInputs in;
  in.steps = {PolynomialMapCoeffs::from_polys(comps, 2)};
  in.T = 10;
  in.vbar = 0.3;
  for (double p : {1.0, 0.25, 0.05}) {
    in.p_star = p;
    for (bool terminal : {true, false}) {
      in.terminal = terminal;
      const auto b = plan_budgets(in);
      CHECK(b.feasible());
      CHECK(b.N >= 1);
      CHECK(b.eps_LS + 2 * b.stacked_tr / in.beta0 <= b.eps_state);
      if (terminal) {
        CHECK(2 / std::sqrt(p) * b.eps_state + b.eps_ro <= in.eps_out * (1 + 1e-15));
      }
      for (int N = 1; N < b.N; ++N) {
        const double rho = majorant(in.steps[0], N).norm;
        CHECK((rho >= 1 || std::sqrt(11.0) * tail_constant(in.steps[0], N, 0.3) / (1 - rho) > b.eps_tr));
      }
    }
  }
  in.eps_out = 1e-300;
  CHECK_THROWS_AS(plan_budgets(in), InfeasibleBudget);
  in.eps_out = 0.0;
  CHECK_THROWS_AS(plan_budgets(in), InvalidArgument);
}

TEST_CASE("exact mode budget uses the physical horizon error") {
  std::mt19937_64 rng(22);
  auto comps = oracle::random_map(2, 2, 0.4, 0.05, 0.0, rng);
  BudgetInputs in;
  in.steps = {PolynomialMapCoeffs::from_polys(comps, 2)};
  in.T = 5;
  in.vbar = 0.3;
  in.mode = BudgetMode::ExactDynamics;
  in.eps_base_step = 1e-5;
  const auto b = plan_budgets(in);
  CHECK(b.feasible());
  CHECK(b.eps_phys_hor ==
        doctest::Approx(physical_horizon_error(5, b.rho, b.gamma_N, b.L_lift, 1e-5)));
  CHECK(b.eps_phys_hor <= b.eps_tr);
  CHECK(b.eps_nl_step_allowed >= 0.0);
  in.eps_base_step = 10.0;
  CHECK_THROWS_AS(plan_budgets(in), InfeasibleBudget);
}

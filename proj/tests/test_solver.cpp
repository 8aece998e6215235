#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <random>

#include "crt/errors.hpp"
#include "crt/solver.hpp"
#include "oracles.hpp"

using namespace crt;

TEST_CASE("sparse solve agrees with forward recursion and with the dense recurrence") {
  std::mt19937_64 rng(31);
  for (int trial = 0; trial < 40; ++trial) {
    const int d = 1 + trial % 3, D = 1 + trial % 3, N = 1 + trial % 4, T = 1 + trial % 20;
    auto comps = oracle::random_map(d, D, 0.5, 0.1, 0.05, rng);
    auto c = PolynomialMapCoeffs::from_polys(comps, d);
    auto L = build_lifted_system({c}, N, 0.5);
    const Vec y0 = lift_state(Vec::Random(d) * 0.4, N);
    auto sys = assemble_horizon(L.steps, y0, T, L.rho);
    double fres = 1.0;
    const Vec F = solve_forward(sys, &fres);
    const auto S = solve_linear_system(sys);
    CHECK(S.converged);
    CHECK(S.residual <= 1e-12);
    CHECK((S.Y - F).norm() <= 1e-10 * F.norm());
    CHECK(fres <= 1e-12);
    CHECK(S.normalized.norm() == doctest::Approx(1.0));
    // Dense recurrence on the oracle lifted matrix.
    std::vector<Mat> Q;
    for (int l = 0; l <= c.D; ++l) Q.push_back(oracle::dense_Q(comps, d, l));
    const Mat B = oracle::dense_B(Q, d, N);
    Vec y = y0;
    for (int t = 0; t <= T; ++t) {
      CHECK((F.segment(t * sys.block, sys.block) - y).norm() <= 1e-12 * (1 + y.norm()));
      y = B * y + L.steps[0].c;
    }
    CHECK(relative_residual(sys, F) == doctest::Approx(fres));
  }
}

TEST_CASE("qubit count example") {
  ResourceModel m;
  m.N_h = std::pow(2.0, 20);
  m.kappa = 3;
  m.eps_LS = 1e-3;
  m.a_A = 10;
  m.s_M = 4;
  CHECK(qlsa_estimate(m).qubits == 42);
}

TEST_CASE("resource estimates are monotone and linear in kappa") {
  ResourceModel m;
  m.N_h = 4096;
  m.kappa = 5;
  m.eps_LS = 1e-4;
  m.s_M = 7;
  const auto e = qlsa_estimate(m);
  auto m2 = m;
  m2.kappa = 10;
  CHECK(qlsa_estimate(m2).queries == doctest::Approx(2 * e.queries));
  for (double f : {1.5, 2.0, 10.0}) {
    auto a = m;
    a.kappa *= f;
    CHECK(qlsa_estimate(a).queries > e.queries);
    CHECK(qlsa_estimate(a).gates > e.gates);
    auto b = m;
    b.s_M *= f;
    CHECK(qlsa_estimate(b).queries > e.queries);
    auto n = m;
    n.N_h *= f;
    CHECK(qlsa_estimate(n).queries > e.queries);
    CHECK(qlsa_estimate(n).qubits >= e.qubits);
    auto s = m;
    s.eps_LS /= f;
    CHECK(qlsa_estimate(s).queries > e.queries);
    CHECK(qlsa_estimate(s).qubits >= e.qubits);
  }
  CHECK(e.C_prep == 4096);
  auto q = m;
  q.qram = true;
  const auto eq = qlsa_estimate(q);
  CHECK(eq.C_prep == doctest::Approx(12.0));
  CHECK(eq.gates < e.gates);
  CHECK(eq.queries == e.queries);
  CHECK(e.success_probability == doctest::Approx(2.0 / 3.0));
  auto bad = m;
  bad.eps_LS = 0;
  CHECK_THROWS_AS(qlsa_estimate(bad), InvalidArgument);
}

TEST_CASE("matrix market and vector round trips") {
  SpMat A(3, 4);
  std::vector<Triplet> t{{0, 1, 0.1}, {2, 3, -1.0 / 3.0}, {1, 0, 1e-300}};
  A.setFromTriplets(t.begin(), t.end());
  write_matrix_market(A, "rt.mtx", "test");
  const SpMat B = read_matrix_market("rt.mtx");
  std::remove("rt.mtx");
  CHECK((Mat(A) - Mat(B)).norm() == 0.0);
  Vec v(3);
  v << 1.0 / 7.0, -2.5e-17, 3.0;
  write_vector(v, "rt.txt");
  const Vec w = read_vector("rt.txt");
  std::remove("rt.txt");
  CHECK((v - w).norm() == 0.0);
  CHECK_THROWS_AS(read_matrix_market("does-not-exist.mtx"), IoError);
}

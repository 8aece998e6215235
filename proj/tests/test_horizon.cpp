#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <random>

#include "crt/errors.hpp"
#include "crt/horizon.hpp"
#include "oracles.hpp"

using namespace crt;

namespace {

std::int64_t pascal(int n, int k) {
  std::vector<std::vector<std::int64_t>> C(n + 1, std::vector<std::int64_t>(n + 1, 0));
  for (int i = 0; i <= n; ++i) {
    C[i][0] = 1;
    for (int j = 1; j <= i; ++j) C[i][j] = C[i - 1][j - 1] + C[i - 1][j];
  }
  return C[n][k];
}

struct Instance {
  PolynomialMapCoeffs c;
  LiftedSystem lifted;
  HorizonSystem sys;
};

Instance random_instance(std::mt19937_64& rng, int d, int D, int N, int T) {
  Instance in;
  auto comps = oracle::random_map(d, D, 0.5, 0.1, 0.05, rng);
  in.c = PolynomialMapCoeffs::from_polys(comps, d);
  in.lifted = build_lifted_system({in.c}, N, 0.5);
  in.sys = assemble_horizon(in.lifted.steps, lift_state(Vec::Random(d) * 0.3, N), T, in.lifted.rho);
  return in;
}

}  // namespace

TEST_CASE("hockey-stick identity") {
  CHECK(hockey_stick_sum(2, 3) == 9);
  CHECK(hockey_stick_closed(2, 3) == 9);
  for (int j = 1; j <= 8; ++j) {
    for (int N = 1; N <= 8; ++N) {
      std::int64_t direct = 0;
      for (int s = 1; s <= N; ++s) direct += pascal(s + j - 1, j - 1);
      CHECK(hockey_stick_sum(j, N) == direct);
      CHECK(hockey_stick_closed(j, N) == pascal(N + j, j) - 1);
      CHECK(hockey_stick_sum(j, N) == hockey_stick_closed(j, N));
    }
  }
}

TEST_CASE("uniform sparsity bound") {
  CHECK(sparsity_bounds({1, 1}, 2).uniform == 5);
  const auto b = sparsity_bounds({1, 1}, 2);
  // S = [[1, 0], [2, 1]] for s_0 = s_1 = 1.
  CHECK(b.S(0, 0) == 1);
  CHECK(b.S(1, 0) == 2);
  CHECK(b.S(1, 1) == 1);
  CHECK(b.s_B == 3);
  CHECK(b.s_M == 4);
}

TEST_CASE("assembled matrix has identity diagonal blocks and -B below") {
  std::mt19937_64 rng(2);
  auto in = random_instance(rng, 2, 2, 2, 4);
  const Mat M = Mat(in.sys.M);
  const auto n = in.sys.block;
  CHECK(in.sys.N_h == 5 * n);
  const Mat B = Mat(in.lifted.steps[0].B);
  for (int t = 0; t <= 4; ++t) {
    CHECK((M.block(t * n, t * n, n, n) - Mat::Identity(n, n)).norm() == 0.0);
    if (t > 0) CHECK((M.block(t * n, (t - 1) * n, n, n) + B).norm() == 0.0);
  }
  CHECK(M.norm() == doctest::Approx(std::sqrt(5.0 * n + 4.0 * B.squaredNorm())));
  CHECK((in.sys.rhs.segment(n, n) - in.lifted.steps[0].c).norm() == 0.0);
}

TEST_CASE("row sparsity of M stays below s_B + 1") {
  std::mt19937_64 rng(6);
  for (int trial = 0; trial < 30; ++trial) {
    const int d = 1 + trial % 3, D = 1 + trial % 3, N = 1 + trial % 4;
    auto in = random_instance(rng, d, D, N, 3);
    std::vector<std::int64_t> s;
    for (int l = 0; l <= in.c.D; ++l) s.push_back(in.c.row_sparsity(l));
    const auto b = sparsity_bounds(s, N);
    CHECK(max_row_nnz(in.sys.M) <= b.s_B + 1);
    CHECK(in.sys.s_M_measured <= b.s_M);
    CHECK(b.s_B <= b.uniform);
  }
}

TEST_CASE("condition number bounds") {
  Mat A(1, 1);
  A << 0.5;
  auto c = PolynomialMapCoeffs::linear(A, Vec::Zero(1));
  auto L = build_lifted_system({c}, 1, 0.5);
  auto sys = assemble_horizon(L.steps, Vec::Ones(1), 8, L.rho);
  auto r = condition_bounds(L.rho, 8, &sys.M);
  CHECK(r.bound <= 3.0);
  CHECK(r.geometric == doctest::Approx(3.0));
  CHECK(r.neumann == doctest::Approx(1.5 * (1 - std::pow(0.5, 9)) / 0.5));
  CHECK(r.measured);
  CHECK(r.kappa_measured <= 3.0 + 1e-8);
  CHECK(r.norm_measured <= 1.5 + 1e-12);
  // rho = 0: identity system.
  A << 0.0;
  auto L0 = build_lifted_system({PolynomialMapCoeffs::linear(A, Vec::Zero(1))}, 1, 0.5);
  auto s0 = assemble_horizon(L0.steps, Vec::Ones(1), 8, 0.0);
  auto r0 = condition_bounds(0.0, 8, &s0.M);
  CHECK(r0.bound == doctest::Approx(1.0));
  CHECK(r0.kappa_measured == doctest::Approx(1.0));
  // Near rho = 1 the bound stays below 2(T+1).
  const auto c99 = condition_bounds(0.99, 3);
  CHECK(c99.linear == doctest::Approx(8.0));
  CHECK(c99.bound <= 8.0);
  CHECK(c99.bound == doctest::Approx(1.99 * (1 - std::pow(0.99, 4)) / 0.01));
}

TEST_CASE("measured kappa and norm respect the analytic bounds") {
  std::mt19937_64 rng(10);
  for (int trial = 0; trial < 25; ++trial) {
    const int d = 1 + trial % 3, D = 1 + trial % 2, N = 1 + trial % 3, T = 2 + trial % 6;
    auto in = random_instance(rng, d, D, N, T);
    if (in.lifted.rho >= 1.0 || in.sys.N_h > 2000) continue;
    const Mat M = Mat(in.sys.M);
    Eigen::JacobiSVD<Mat> svd(M);
    const auto sv = svd.singularValues();
    const double kappa = sv(0) / sv(sv.size() - 1);
    const double rho = in.lifted.rho;
    CHECK(sv(0) <= 1 + rho + 1e-12);
    CHECK(kappa <= std::min((1 + rho) / (1 - rho), 2.0 * (T + 1)) + 1e-8);
  }
}

TEST_CASE("row access reproduces rows of the scaled matrix exactly") {
  std::mt19937_64 rng(3);
  auto in = random_instance(rng, 2, 3, 3, 6);
  const SpMat Mb = in.sys.M_bar();
  auto first = row_access(in.sys, 0, 0);
  REQUIRE(first.size() == 1);
  CHECK(first[0].first == 0);
  CHECK(first[0].second == 1.0 / (1.0 + in.sys.rho));
  std::uniform_int_distribution<int> Ut(0, 6);
  std::uniform_int_distribution<std::int64_t> Ur(0, in.sys.block - 1);
  for (int k = 0; k < 1000; ++k) {
    const int t = Ut(rng);
    const auto r = Ur(rng);
    auto row = row_access(in.sys, t, r);
    std::vector<std::pair<std::int64_t, double>> want;
    for (SpMat::InnerIterator it(Mb, in.sys.index(t, r)); it; ++it) {
      if (it.value() != 0.0) want.emplace_back(it.col(), it.value());
    }
    std::sort(row.begin(), row.end());
    CHECK(row == want);
  }
  CHECK_THROWS_AS(row_access(in.sys, 7, 0), InvalidArgument);
}

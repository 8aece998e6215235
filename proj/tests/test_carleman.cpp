#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <random>

#include "crt/carleman.hpp"
#include "crt/errors.hpp"
#include "oracles.hpp"

using namespace crt;

TEST_CASE("lift layout and lifted state") {
  const auto L = lift_layout(3, 3);
  CHECK(L.dim == 3 + 9 + 27);
  CHECK(L.level_size(2) == 9);
  Vec v(3);
  v << 0.2, -0.5, 0.7;
  CHECK((lift_state(v, 3) - oracle::dense_lift(v, 3)).norm() == 0.0);
  CHECK_THROWS_AS(lift_layout(10, 8, 1000), MemoryBudgetExceeded);
}

TEST_CASE("composition counts match brute force") {
  for (int j = 1; j <= 4; ++j) {
    for (int D = 0; D <= 3; ++D) {
      for (int s = 0; s <= j * D + 1; ++s) {
        std::int64_t brute = 0;
        std::vector<int> a(j, 0);
        while (true) {
          int sum = 0;
          for (int x : a) sum += x;
          brute += sum == s;
          int p = j - 1;
          while (p >= 0 && a[p] == D) a[p--] = 0;
          if (p < 0) break;
          ++a[p];
        }
        CHECK(composition_count(j, s, D) == brute);
      }
    }
  }
}

TEST_CASE("scalar linear map gives a diagonal lifted step") {
  Mat A(1, 1);
  A << 0.5;
  auto c = PolynomialMapCoeffs::linear(A, Vec::Zero(1));
  auto st = build_lifted_step(c, 3);
  Mat want = Mat::Zero(3, 3);
  want.diagonal() << 0.5, 0.25, 0.125;
  CHECK((Mat(st.B) - want).norm() == 0.0);
  CHECK(st.c.norm() == 0.0);
  CHECK(majorant(c, 3).norm == doctest::Approx(0.5).epsilon(1e-14));
}

TEST_CASE("affine map: K_{2,1} = b (x) A + A (x) b") {
  Mat A(2, 2);
  A << 0.3, -0.1, 0.2, 0.4;
  Vec b(2);
  b << 0.05, -0.02;
  auto c = PolynomialMapCoeffs::linear(A, b);
  const Mat K = Mat(carleman_block(2, 1, c));
  const Mat want = oracle::dense_kron(b, A) + oracle::dense_kron(A, b);
  CHECK((K - want).norm() < 1e-15);
  // Same block inside the assembled lifted step.
  auto st = build_lifted_step(c, 2);
  CHECK((Mat(st.B).block(2, 0, 4, 2) - want).norm() < 1e-15);
  // c_2 = b (x) b.
  CHECK((st.c.segment(2, 4) - oracle::dense_kron(b, Mat(b))).norm() < 1e-15);
}

TEST_CASE("lifted step matches dense Kronecker assembly on random polynomial maps") {
  std::mt19937_64 rng(4);
  for (int trial = 0; trial < 12; ++trial) {
    const int d = 1 + trial % 3, D = 1 + (trial / 3) % 3, N = 1 + trial % 4;
    auto comps = oracle::random_map(d, D, 0.5, 0.1, 0.05, rng);
    auto c = PolynomialMapCoeffs::from_polys(comps, d);
    std::vector<Mat> Q;
    for (int l = 0; l <= c.D; ++l) Q.push_back(oracle::dense_Q(comps, d, l));
    auto st = build_lifted_step(c, N);
    const Mat B = oracle::dense_B(Q, d, N);
    CHECK((Mat(st.B) - B).norm() <= 1e-14 * (1 + B.norm()));
    for (int j = 1; j <= N; ++j) {
      for (int s = 1; s <= N; ++s) {
        const auto L = lift_layout(d, N);
        CHECK((Mat(carleman_block(j, s, c)) - B.block(L.offset[j], L.offset[s], L.level_size(j), L.level_size(s))).norm() <=
              1e-14 * (1 + B.norm()));
      }
    }
  }
}

TEST_CASE("majorant table and operator norm bound") {
  std::mt19937_64 rng(8);
  for (int trial = 0; trial < 20; ++trial) {
    const int d = 1 + trial % 3, D = 1 + trial % 3, N = 1 + trial % 4;
    auto comps = oracle::random_map(d, D, 0.6, 0.2, 0.05, rng);
    auto c = PolynomialMapCoeffs::from_polys(comps, d);
    std::vector<double> norms;
    std::vector<Mat> Q;
    for (int l = 0; l <= c.D; ++l) {
      Q.push_back(oracle::dense_Q(comps, d, l));
      norms.push_back(oracle::svd_norm(Q.back()));
    }
    const Mat R = oracle::majorant_R(norms, N);
    const Mat lib = majorant_table(coefficient_norms(c), N);
    CHECK((lib - R).norm() <= 1e-12 * (1 + R.norm()));
    const double rho = oracle::svd_norm(R.block(1, 1, N, N));
    CHECK(majorant(c, N).norm == doctest::Approx(rho).epsilon(1e-10));
    CHECK(oracle::svd_norm(oracle::dense_B(Q, d, N)) <= rho + 1e-12);
  }
}

TEST_CASE("affine maps truncate exactly") {
  std::mt19937_64 rng(1);
  Mat A = Mat::Random(2, 2) * 0.3;
  Vec b = Vec::Random(2) * 0.1;
  auto c = PolynomialMapCoeffs::linear(A, b);
  for (int N = 1; N <= 4; ++N) {
    auto st = build_lifted_step(c, N);
    Vec v = Vec::Random(2) * 0.5;
    auto ys = run_truncated_recurrence({st}, lift_state(v, N), 50);
    for (int t = 0; t <= 50; ++t) {
      CHECK((ys[t] - lift_state(v, N)).norm() <= 1e-13 * (1 + ys[t].norm()));
      v = A * v + b;
    }
    CHECK(tail_constant(c, N, 0.9) == 0.0);
  }
}

TEST_CASE("truncation error stays below Gamma_N / (1 - rho)") {
  std::mt19937_64 rng(17);
  int used = 0;
  for (int trial = 0; trial < 60 && used < 25; ++trial) {
    const int d = 1 + trial % 3, D = 2 + trial % 2, N = 2 + trial % 3, T = 20;
    auto comps = oracle::random_map(d, D, 0.5, 0.15, 0.02, rng);
    auto c = PolynomialMapCoeffs::from_polys(comps, d);
    const double rho = majorant(c, N).norm;
    if (rho > 0.8) continue;
    std::vector<Vec> traj{Vec::Random(d) * 0.3};
    for (int t = 0; t < T; ++t) traj.push_back(oracle::eval_map(comps, traj.back()));
    double vbar = 0.0;
    for (const auto& v : traj) vbar = std::max(vbar, v.norm());
    if (vbar >= 1.0) continue;
    const double G = tail_constant(c, N, vbar);
    auto ys = run_truncated_recurrence({build_lifted_step(c, N)}, oracle::dense_lift(traj[0], N), T);
    double mx = 0.0, sq = 0.0;
    for (int t = 0; t <= T; ++t) {
      const double e = (ys[t] - oracle::dense_lift(traj[t], N)).norm();
      mx = std::max(mx, e);
      sq += e * e;
    }
    CHECK(mx <= G / (1 - rho) * (1 + 1e-9) + 1e-15);
    CHECK(std::sqrt(sq) <= std::sqrt(T + 1.0) * G / (1 - rho) * (1 + 1e-9) + 1e-15);
    ++used;
  }
  CHECK(used >= 20);
}

TEST_CASE("weighted tail bound and cutoff rule") {
  CHECK(weighted_tail_bound(1.5, 0.5, 4) == doctest::Approx(std::pow(1.5, -5) * 0.5 / std::sqrt(0.75)));
  CHECK_THROWS_AS(weighted_tail_bound(1.5, 1.0, 4), DesignInfeasible);
  const int N = cutoff_from_weighted(99, 0.5, 1e-3, 0.5, 2.0);
  // Direct search: smallest N with sqrt(T+1)/(1-rho) * lambda^-(N+1) chi/sqrt(1-chi^2) <= eps_tr.
  int direct = 1;
  while (std::sqrt(100.0) / 0.5 * std::pow(2.0, -(direct + 1)) * 0.5 / std::sqrt(0.75) > 1e-3) ++direct;
  CHECK(N == direct);
  CHECK(N == 13);
  CHECK_THROWS_AS(cutoff_from_weighted(99, 1.0, 1e-3, 0.5, 2.0), DesignInfeasible);
}

TEST_CASE("weighted coefficient sum dominates the tail") {
  std::mt19937_64 rng(23);
  auto comps = oracle::random_map(2, 3, 0.4, 0.1, 0.0, rng);
  auto c = PolynomialMapCoeffs::from_polys(comps, 2);
  const double vbar = 0.3, lambda = 1.5;
  const double chi = weighted_coefficient_sum(c, lambda, vbar);
  REQUIRE(chi < 1.0);
  for (int N = 1; N <= 5; ++N) CHECK(tail_constant(c, N, vbar) <= weighted_tail_bound(lambda, chi, N) * (1 + 1e-12));
}

TEST_CASE("design_cutoff picks the smallest admissible N") {
  std::mt19937_64 rng(5);
  auto comps = oracle::random_map(2, 2, 0.5, 0.1, 0.0, rng);
  auto c = PolynomialMapCoeffs::from_polys(comps, 2);
  auto des = design_cutoff({c}, 0.3, 20, 1e-4, 10);
  CHECK(des.stacked_bound <= 1e-4);
  for (int N = 1; N < des.N; ++N) {
    const double rho = majorant(c, N).norm;
    CHECK((rho >= 1 || std::sqrt(21.0) * tail_constant(c, N, 0.3) / (1 - rho) > 1e-4));
  }
  CHECK_THROWS_AS(design_cutoff({c}, 0.3, 20, 1e-300, 3), InfeasibleBudget);
}

TEST_CASE("lift Lipschitz constant") {
  CHECK(lift_lipschitz(1, 0.7) == 1.0);
  CHECK(lift_lipschitz(2, 0.5) == doctest::Approx(std::sqrt(2.0)));
  CHECK(lifted_model_error(2, 0.5, 0.1) == doctest::Approx(0.1 * std::sqrt(2.0)));
  std::mt19937_64 rng(12);
  std::normal_distribution<double> G;
  std::uniform_real_distribution<double> U(0.0, 1.0);
  for (int k = 0; k < 2000; ++k) {
    const int d = 1 + k % 3, N = 1 + k % 5;
    auto ball = [&] {
      Vec v(d);
      for (auto& x : v) x = G(rng);
      return Vec(v.normalized() * 0.8 * std::pow(U(rng), 1.0 / d));
    };
    const Vec a = ball(), b = ball();
    CHECK((lift_state(a, N) - lift_state(b, N)).norm() <= lift_lipschitz(N, 0.8) * (a - b).norm() * (1 + 1e-12));
  }
}

TEST_CASE("segmented truncation adds in quadrature") {
  auto r = segmented_truncation({0, 10, 20}, {{10, 0.5, 1e-4}, {10, 0.5, 1e-4}});
  CHECK(r.ok);
  CHECK(r.global * r.global == doctest::Approx(2 * r.per_segment[0] * r.per_segment[0]));
  CHECK(r.per_segment[0] == doctest::Approx(std::sqrt(11.0) * 1e-4 / 0.5));
  auto bad = segmented_truncation({0, 5}, {{5, 1.2, 1e-4}});
  CHECK_FALSE(bad.ok);
  CHECK_THROWS_AS(segmented_truncation({0, 5}, {{4, 0.5, 1e-4}}), DimensionMismatch);
}

TEST_CASE("lifted system summary") {
  Mat A(1, 1);
  A << 0.5;
  auto sys = build_lifted_system({PolynomialMapCoeffs::linear(A, Vec::Zero(1))}, 3, 0.4);
  CHECK(sys.rho == doctest::Approx(0.5));
  CHECK(sys.gamma_N == 0.0);
  CHECK(sys.L_lift == doctest::Approx(lift_lipschitz(3, 0.4)));
  CHECK(sys.to_json()["Delta_N"] == 3);
}

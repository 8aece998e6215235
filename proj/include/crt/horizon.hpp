#pragma once

#include <cstdint>
#include <utility>
#include <vector>

#include <json.hpp>

#include "crt/carleman.hpp"
#include "crt/linalg.hpp"

namespace crt {

/// Block lower-bidiagonal system M Y = B_rhs over the window t = 0..T.
struct HorizonSystem {
  int T = 0;
  std::int64_t block = 0;  // Delta_N
  std::int64_t N_h = 0;    // (T + 1) Delta_N
  double rho = 0.0;
  SpMat M;
  Vec rhs;
  std::vector<SpMat> B;  // B(0..T-1)
  std::int64_t s_B_measured = 0;
  std::int64_t s_M_measured = 0;

  double scale() const { return 1.0 / (1.0 + rho); }
  SpMat M_bar() const;
  Vec rhs_bar() const;
  std::int64_t index(int t, std::int64_t r) const { return t * block + r; }
  nlohmann::json to_json() const;
};

/// A single step entry is reused for all t.
HorizonSystem assemble_horizon(const std::vector<LiftedStep>& steps, const Vec& y0, int T, double rho);

struct SparsityBounds {
  Mat S;                     // S_{j,s}, 1 <= j, s <= N
  std::int64_t s_B = 0;      // max_j sum_{s=1}^N S_{j,s}
  std::int64_t s_M = 0;      // s_B + 1
  std::int64_t uniform = 0;  // max_j s_*^j (C(N+j,j) - 1) with s_* = max_l s_l
  nlohmann::json to_json() const;
};

/// s_l = row sparsity of Q_l for l = 0..D.
SparsityBounds sparsity_bounds(const std::vector<std::int64_t>& s_l, int N);

/// sum_{s=1}^N C(s+j-1, j-1) and C(N+j, j) - 1, as exact integers.
std::int64_t hockey_stick_sum(int j, int N);
std::int64_t hockey_stick_closed(int j, int N);

struct ConditionReport {
  double rho = 0.0;
  int T = 0;
  double neumann = 0.0;  // (1+rho) sum_{k<=T} rho^k
  double geometric = 0.0;  // (1+rho)/(1-rho), inf if rho >= 1
  double linear = 0.0;     // 2(T+1)
  double bound = 0.0;      // min of the applicable forms
  bool measured = false;
  double kappa_measured = 0.0;
  double norm_measured = 0.0;
  nlohmann::json to_json() const;
};

/// Analytic bound; adds the SVD-measured kappa and ||M|| when M has at most max_dense rows.
ConditionReport condition_bounds(double rho, int T, const SpMat* M = nullptr,
                                 std::int64_t max_dense = 2000);

/// Row (t, r) of M_bar = M / (1 + rho) as (global column, value) pairs.
std::vector<std::pair<std::int64_t, double>> row_access(const HorizonSystem& sys, int t, std::int64_t r);

}  // namespace crt

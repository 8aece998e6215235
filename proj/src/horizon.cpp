#include "crt/horizon.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

#include "crt/errors.hpp"

namespace crt {

SpMat HorizonSystem::M_bar() const { return M * scale(); }

Vec HorizonSystem::rhs_bar() const { return rhs * scale(); }

nlohmann::json HorizonSystem::to_json() const {
  return {{"T", T},
          {"Delta_N", block},
          {"N_h", N_h},
          {"rho", rho},
          {"nnz", M.nonZeros()},
          {"s_B_measured", s_B_measured},
          {"s_M_measured", s_M_measured}};
}

HorizonSystem assemble_horizon(const std::vector<LiftedStep>& steps, const Vec& y0, int T, double rho) {
  if (T < 0) throw InvalidArgument("T must be >= 0");
  if (T > 0 && steps.empty()) throw InvalidArgument("no lifted steps supplied");
  HorizonSystem sys;
  sys.T = T;
  sys.block = y0.size();
  sys.N_h = (T + 1) * sys.block;
  sys.rho = rho;
  const std::int64_t n = sys.block;
  for (int t = 0; t < T; ++t) {
    const auto& st = steps[std::min<std::size_t>(t, steps.size() - 1)];
    if (st.B.rows() != n || st.B.cols() != n || st.c.size() != n) {
      throw DimensionMismatch("lifted step at t=" + std::to_string(t) + " has inconsistent size");
    }
    sys.B.push_back(st.B);
    sys.s_B_measured = std::max(sys.s_B_measured, max_row_nnz(st.B));
  }
  std::vector<Triplet> trips;
  trips.reserve(static_cast<std::size_t>(sys.N_h));
  for (std::int64_t i = 0; i < sys.N_h; ++i) trips.emplace_back(i, i, 1.0);
  for (int t = 1; t <= T; ++t) {
    const SpMat& B = sys.B[t - 1];
    for (std::int64_t r = 0; r < B.outerSize(); ++r) {
      for (SpMat::InnerIterator it(B, r); it; ++it) {
        trips.emplace_back(sys.index(t, it.row()), sys.index(t - 1, it.col()), -it.value());
      }
    }
  }
  sys.M.resize(sys.N_h, sys.N_h);
  sys.M.setFromTriplets(trips.begin(), trips.end());
  sys.rhs = Vec::Zero(sys.N_h);
  sys.rhs.head(n) = y0;
  for (int t = 1; t <= T; ++t) {
    const auto& st = steps[std::min<std::size_t>(t - 1, steps.size() - 1)];
    sys.rhs.segment(sys.index(t, 0), n) = st.c;
  }
  sys.s_M_measured = max_row_nnz(sys.M);
  return sys;
}

nlohmann::json SparsityBounds::to_json() const {
  return {{"s_B", s_B}, {"s_M", s_M}, {"uniform", uniform}};
}

SparsityBounds sparsity_bounds(const std::vector<std::int64_t>& s_l, int N) {
  if (s_l.empty()) throw InvalidArgument("need row sparsities for l = 0..D");
  const int D = static_cast<int>(s_l.size()) - 1;
  SparsityBounds b;
  b.S = Mat::Zero(N, N);
  // S_{j,s} = [x^s] (sum_l s_l x^l)^j, exact in doubles for the sizes used here.
  std::vector<double> pw{1.0};
  for (int j = 1; j <= N; ++j) {
    std::vector<double> next(pw.size() + D, 0.0);
    for (std::size_t a = 0; a < pw.size(); ++a) {
      for (int l = 0; l <= D; ++l) next[a + l] += pw[a] * static_cast<double>(s_l[l]);
    }
    pw = std::move(next);
    double row = 0.0;
    for (int s = 1; s <= N && s < static_cast<int>(pw.size()); ++s) {
      b.S(j - 1, s - 1) = pw[s];
      row += pw[s];
    }
    b.s_B = std::max(b.s_B, static_cast<std::int64_t>(row));
  }
  b.s_M = b.s_B + 1;
  const std::int64_t s_star = *std::max_element(s_l.begin(), s_l.end());
  for (int j = 1; j <= N; ++j) {
    double v = std::pow(static_cast<double>(s_star), j) * (binomial(N + j, j) - 1.0);
    b.uniform = std::max(b.uniform, static_cast<std::int64_t>(v));
  }
  return b;
}

std::int64_t hockey_stick_sum(int j, int N) {
  std::int64_t s = 0;
  for (int k = 1; k <= N; ++k) s += static_cast<std::int64_t>(binomial(k + j - 1, j - 1));
  return s;
}

std::int64_t hockey_stick_closed(int j, int N) {
  return static_cast<std::int64_t>(binomial(N + j, j)) - 1;
}

nlohmann::json ConditionReport::to_json() const {
  nlohmann::json j = {{"rho", rho},
                      {"T", T},
                      {"neumann", neumann},
                      {"geometric", std::isfinite(geometric) ? nlohmann::json(geometric) : nlohmann::json("inf")},
                      {"linear", linear},
                      {"bound", bound},
                      {"measured", measured}};
  if (measured) {
    j["kappa_measured"] = kappa_measured;
    j["norm_measured"] = norm_measured;
  }
  return j;
}

ConditionReport condition_bounds(double rho, int T, const SpMat* M, std::int64_t max_dense) {
  ConditionReport r;
  r.rho = rho;
  r.T = T;
  double s = 0.0, p = 1.0;
  for (int k = 0; k <= T; ++k) {
    s += p;
    p *= rho;
  }
  r.neumann = (1.0 + rho) * s;
  r.geometric = rho < 1.0 ? (1.0 + rho) / (1.0 - rho) : std::numeric_limits<double>::infinity();
  r.linear = 2.0 * (T + 1);
  r.bound = r.neumann;
  if (rho <= 1.0) r.bound = std::min({r.neumann, r.geometric, r.linear});
  if (M && M->rows() <= max_dense) {
    Eigen::JacobiSVD<Mat> svd{Mat(*M)};
    const auto& sv = svd.singularValues();
    r.measured = true;
    r.norm_measured = sv(0);
    r.kappa_measured = sv(0) / sv(sv.size() - 1);
  }
  return r;
}

std::vector<std::pair<std::int64_t, double>> row_access(const HorizonSystem& sys, int t, std::int64_t r) {
  if (t < 0 || t > sys.T || r < 0 || r >= sys.block) throw InvalidArgument("row index out of range");
  const double sc = sys.scale();
  std::vector<std::pair<std::int64_t, double>> out;
  if (t == 0) {
    out.emplace_back(sys.index(0, r), 1.0 * sc);
    return out;
  }
  const SpMat& B = sys.B[t - 1];
  for (SpMat::InnerIterator it(B, r); it; ++it) {
    out.emplace_back(sys.index(t - 1, it.col()), -it.value() * sc);
  }
  out.emplace_back(sys.index(t, r), 1.0 * sc);
  return out;
}

}  // namespace crt

#include "crt/carleman.hpp"

#include <algorithm>
#include <cmath>

#include "crt/errors.hpp"

namespace crt {

LiftLayout lift_layout(int d, int N, std::int64_t cap) {
  if (N < 1) throw InvalidArgument("cutoff N must be >= 1");
  if (d < 1) throw InvalidArgument("state dimension must be >= 1");
  LiftLayout L;
  L.d = d;
  L.N = N;
  L.offset.assign(N + 2, 0);
  std::int64_t total = 0;
  for (int j = 1; j <= N; ++j) {
    L.offset[j] = total;
    total += checked_pow(d, j, cap);
    if (total > cap) {
      throw MemoryBudgetExceeded("lifted dimension " + std::to_string(total) + " exceeds cap " +
                                 std::to_string(cap));
    }
  }
  L.offset[N + 1] = total;
  L.dim = total;
  return L;
}

Vec lift_state(const Vec& v, int N, std::int64_t cap) {
  const auto L = lift_layout(static_cast<int>(v.size()), N, cap);
  Vec y(L.dim);
  Vec level = v;
  for (int j = 1; j <= N; ++j) {
    y.segment(L.offset[j], level.size()) = level;
    if (j == N) break;
    Vec next(level.size() * v.size());
    for (Eigen::Index a = 0; a < level.size(); ++a) next.segment(a * v.size(), v.size()) = level(a) * v;
    level = std::move(next);
  }
  return y;
}

std::int64_t composition_count(int j, int s, int D) {
  // Inclusion-exclusion over parts exceeding D.
  std::int64_t total = 0;
  for (int k = 0; k <= j && k * (D + 1) <= s; ++k) {
    double term = binomial(j, k) * binomial(s - k * (D + 1) + j - 1, j - 1);
    total += (k % 2 == 0 ? 1 : -1) * static_cast<std::int64_t>(term);
  }
  return total;
}

SpMat carleman_block(int j, int s, const PolynomialMapCoeffs& c) {
  const int d = c.d, D = c.D;
  const std::int64_t rows = checked_pow(d, j, std::int64_t{1} << 40);
  const std::int64_t cols = checked_pow(d, s, std::int64_t{1} << 40);
  SpMat K(rows, cols);
  std::vector<SpMat> Q(D + 1);
  for (int l = 0; l <= std::min(D, s); ++l) Q[l] = c.Q(l);
  std::vector<int> alpha(j, 0);
  // Odometer over {0..D}^j, keeping compositions with |alpha| = s.
  while (true) {
    int sum = 0;
    for (int a : alpha) sum += a;
    if (sum == s) {
      SpMat term = Q[alpha[0]];
      for (int r = 1; r < j; ++r) term = kron(term, Q[alpha[r]]);
      K += term;
    }
    int pos = j - 1;
    while (pos >= 0 && alpha[pos] == D) alpha[pos--] = 0;
    if (pos < 0) break;
    ++alpha[pos];
  }
  return K;
}

LiftedStep build_lifted_step(const PolynomialMapCoeffs& c, int N, std::int64_t cap) {
  const auto L = lift_layout(c.d, N, cap);
  const int D = c.D;
  // Only Q_l with l <= N reach the truncated block.
  std::vector<SpMat> Q(D + 1);
  for (int l = 0; l <= std::min(D, N); ++l) Q[l] = c.Q(l);
  // prev[s] = K_{j-1,s}, s = 0..N
  std::vector<SpMat> prev(N + 1);
  for (int s = 0; s <= N; ++s) prev[s] = (s <= D) ? Q[s] : SpMat(c.d, checked_pow(c.d, s, cap));
  std::vector<Triplet> trips;
  Vec cvec = Vec::Zero(L.dim);
  for (int j = 1; j <= N; ++j) {
    if (j > 1) {
      std::vector<SpMat> cur(N + 1);
      for (int s = 0; s <= N; ++s) {
        SpMat acc(checked_pow(c.d, j, cap), checked_pow(c.d, s, cap));
        for (int l = 0; l <= std::min(D, s); ++l) {
          if (prev[s - l].nonZeros() == 0 || Q[l].nonZeros() == 0) continue;
          acc += kron(prev[s - l], Q[l]);
        }
        cur[s] = std::move(acc);
      }
      prev = std::move(cur);
    }
    for (std::int64_t r = 0; r < prev[0].rows(); ++r) {
      for (SpMat::InnerIterator it(prev[0], r); it; ++it) cvec(L.offset[j] + it.row()) += it.value();
    }
    for (int s = 1; s <= N; ++s) {
      const SpMat& K = prev[s];
      for (std::int64_t r = 0; r < K.outerSize(); ++r) {
        for (SpMat::InnerIterator it(K, r); it; ++it) {
          trips.emplace_back(L.offset[j] + it.row(), L.offset[s] + it.col(), it.value());
        }
      }
    }
  }
  LiftedStep st;
  st.B.resize(L.dim, L.dim);
  st.B.setFromTriplets(trips.begin(), trips.end());
  st.c = cvec;
  return st;
}

std::vector<Vec> run_truncated_recurrence(const std::vector<LiftedStep>& steps, const Vec& y0, int T) {
  if (steps.empty() && T > 0) throw InvalidArgument("no lifted steps supplied");
  std::vector<Vec> ys{y0};
  for (int t = 0; t < T; ++t) {
    const auto& st = steps[std::min<std::size_t>(t, steps.size() - 1)];
    if (st.B.cols() != ys.back().size()) throw DimensionMismatch("lifted step size mismatch");
    ys.push_back(st.B * ys.back() + st.c);
  }
  return ys;
}

Mat majorant_table(const std::vector<double>& norms, int N) {
  const int D = static_cast<int>(norms.size()) - 1;
  const int smax = N * std::max(D, 0);
  Mat R = Mat::Zero(N + 1, smax + 1);
  std::vector<double> pw{1.0};
  for (int j = 1; j <= N; ++j) {
    std::vector<double> next(pw.size() + D, 0.0);
    for (std::size_t a = 0; a < pw.size(); ++a) {
      for (int l = 0; l <= D; ++l) next[a + l] += pw[a] * norms[l];
    }
    pw = std::move(next);
    for (std::size_t s = 0; s < pw.size(); ++s) R(j, static_cast<Eigen::Index>(s)) = pw[s];
  }
  return R;
}

std::vector<double> coefficient_norms(const PolynomialMapCoeffs& c) {
  std::vector<double> n(c.D + 1);
  for (int l = 0; l <= c.D; ++l) n[l] = c.norm(l);
  return n;
}

nlohmann::json MajorantReport::to_json() const {
  return {{"norm", norm},   {"q1_norm", q1_norm},
          {"gamma", gamma}, {"sigma", sigma},
          {"linear_dominant_bound", linear_dominant_bound}};
}

MajorantReport majorant(const PolynomialMapCoeffs& c, int N) {
  auto norms = coefficient_norms(c);
  Mat tab = majorant_table(norms, N);
  MajorantReport rep;
  rep.R = Mat::Zero(N, N);
  for (int j = 1; j <= N; ++j) {
    for (int s = 1; s <= N && s < tab.cols(); ++s) rep.R(j - 1, s - 1) = tab(j, s);
  }
  rep.norm = spectral_norm(rep.R);
  rep.q1_norm = c.D >= 1 ? norms[1] : 0.0;
  rep.gamma = 1.0 - rep.q1_norm;
  Mat rem = rep.R;
  for (int j = 1; j <= N; ++j) rem(j - 1, j - 1) -= std::pow(rep.q1_norm, j);
  rep.sigma = spectral_norm(rem);
  rep.linear_dominant_bound = 1.0 - rep.gamma + rep.sigma;
  return rep;
}

double tail_constant(const PolynomialMapCoeffs& c, int N, double vbar) {
  auto tab = majorant_table(coefficient_norms(c), N);
  double acc = 0.0;
  for (int j = 1; j <= N; ++j) {
    double inner = 0.0;
    for (int s = N + 1; s <= j * c.D; ++s) inner += tab(j, s) * std::pow(vbar, s);
    acc += inner * inner;
  }
  return std::sqrt(acc);
}

double tail_constant(const std::vector<PolynomialMapCoeffs>& steps, int N, double vbar) {
  double g = 0.0;
  for (const auto& c : steps) g = std::max(g, tail_constant(c, N, vbar));
  return g;
}

double weighted_coefficient_sum(const PolynomialMapCoeffs& c, double lambda, double vbar) {
  double s = 0.0;
  for (int l = 0; l <= c.D; ++l) s += c.norm(l) * std::pow(lambda * vbar, l);
  return s;
}

double weighted_tail_bound(double lambda, double chi, int N) {
  if (!(chi < 1.0)) throw DesignInfeasible("weighted coefficient sum chi must be < 1");
  return std::pow(lambda, -(N + 1)) * chi / std::sqrt(1.0 - chi * chi);
}

int cutoff_from_weighted(int T, double rho, double eps_tr, double chi, double lambda) {
  if (!(chi < 1.0)) throw DesignInfeasible("weighted coefficient sum chi must be < 1");
  if (!(lambda > 1.0)) throw DesignInfeasible("weight lambda must exceed 1");
  if (!(rho < 1.0)) throw DesignInfeasible("contractivity rho must be < 1");
  const double arg = std::sqrt(T + 1.0) / ((1.0 - rho) * eps_tr) * chi / std::sqrt(1.0 - chi * chi);
  const double n = std::ceil(std::log(arg) / std::log(lambda) - 1.0);
  return std::max(1, static_cast<int>(n));
}

CutoffDesign design_cutoff(const std::vector<PolynomialMapCoeffs>& steps, double vbar, int T,
                           double eps_tr, int N_max) {
  for (int N = 1; N <= N_max; ++N) {
    double rho = 0.0;
    for (const auto& c : steps) rho = std::max(rho, majorant(c, N).norm);
    if (!(rho < 1.0)) continue;
    const double g = tail_constant(steps, N, vbar);
    const double stacked = std::sqrt(T + 1.0) * g / (1.0 - rho);
    if (stacked <= eps_tr) return {N, rho, g, stacked};
  }
  throw InfeasibleBudget("no cutoff N <= " + std::to_string(N_max) +
                         " meets the truncation budget " + std::to_string(eps_tr));
}

double lift_lipschitz(int N, double vbar) {
  double s = 0.0;
  for (int j = 1; j <= N; ++j) s += static_cast<double>(j) * j * std::pow(vbar, 2 * j - 2);
  return std::sqrt(s);
}

double lifted_model_error(int N, double vbar, double eps_base_step) {
  return lift_lipschitz(N, vbar) * eps_base_step;
}

SegmentResult segmented_truncation(const std::vector<int>& breakpoints,
                                   const std::vector<SegmentData>& segs) {
  if (breakpoints.size() != segs.size() + 1) {
    throw DimensionMismatch("need one more breakpoint than segments");
  }
  SegmentResult res;
  double sq = 0.0;
  for (std::size_t r = 0; r < segs.size(); ++r) {
    if (breakpoints[r + 1] <= breakpoints[r]) throw InvalidArgument("breakpoints must increase");
    if (segs[r].length != breakpoints[r + 1] - breakpoints[r]) {
      throw DimensionMismatch("segment length disagrees with breakpoints");
    }
    if (!(segs[r].rho < 1.0)) {
      res.ok = false;
      res.per_segment.push_back(INFINITY);
      continue;
    }
    double b = std::sqrt(segs[r].length + 1.0) * segs[r].gamma_N / (1.0 - segs[r].rho);
    res.per_segment.push_back(b);
    sq += b * b;
  }
  res.global = res.ok ? std::sqrt(sq) : INFINITY;
  return res;
}

nlohmann::json LiftedSystem::to_json() const {
  nlohmann::json maj = nlohmann::json::array();
  for (const auto& m : majorants) maj.push_back(m.to_json());
  return {{"d", layout.d},     {"N", layout.N},         {"Delta_N", layout.dim},
          {"rho", rho},        {"Gamma_N", gamma_N},    {"vbar", vbar},
          {"L_lift", L_lift},  {"majorants", maj}};
}

LiftedSystem build_lifted_system(const std::vector<PolynomialMapCoeffs>& coeffs, int N, double vbar,
                                 std::int64_t cap) {
  if (coeffs.empty()) throw InvalidArgument("no step coefficients");
  LiftedSystem sys;
  sys.layout = lift_layout(coeffs[0].d, N, cap);
  for (const auto& c : coeffs) {
    if (c.d != sys.layout.d) throw DimensionMismatch("inconsistent state dimension across steps");
    sys.steps.push_back(build_lifted_step(c, N, cap));
    sys.majorants.push_back(majorant(c, N));
    sys.rho = std::max(sys.rho, sys.majorants.back().norm);
  }
  sys.vbar = vbar;
  sys.gamma_N = tail_constant(coeffs, N, vbar);
  sys.L_lift = lift_lipschitz(N, vbar);
  return sys;
}

}  // namespace crt

#pragma once
// Dense reference constructions shared by the unit tests and the acceptance runner.

#include <cmath>
#include <random>
#include <vector>

#include "crt/carleman.hpp"
#include "crt/dynamics.hpp"
#include "crt/multipoly.hpp"

namespace oracle {

using crt::Mat;
using crt::MultiPoly;
using crt::Vec;

// v^{(x) l} with row-major tuples, by repeated outer products.
inline Vec dense_power(const Vec& v, int l) {
  Vec out = Vec::Ones(1);
  for (int k = 0; k < l; ++k) {
    Vec next(out.size() * v.size());
    for (Eigen::Index i = 0; i < out.size(); ++i) next.segment(i * v.size(), v.size()) = out(i) * v;
    out = next;
  }
  return out;
}

inline Vec dense_lift(const Vec& v, int N) {
  std::vector<Vec> parts;
  Eigen::Index n = 0;
  for (int j = 1; j <= N; ++j) {
    parts.push_back(dense_power(v, j));
    n += parts.back().size();
  }
  Vec out(n);
  n = 0;
  for (const auto& p : parts) {
    out.segment(n, p.size()) = p;
    n += p.size();
  }
  return out;
}

inline Mat dense_kron(const Mat& a, const Mat& b) {
  Mat k(a.rows() * b.rows(), a.cols() * b.cols());
  for (Eigen::Index i = 0; i < a.rows(); ++i) {
    for (Eigen::Index j = 0; j < a.cols(); ++j) k.block(i * b.rows(), j * b.cols(), b.rows(), b.cols()) = a(i, j) * b;
  }
  return k;
}

inline double multinomial(const std::vector<int>& e) {
  int n = 0;
  double r = 1.0;
  for (int k : e) {
    for (int i = 1; i <= k; ++i) r = r * (++n) / i;
  }
  return r;
}

// Symmetric d x d^l coefficient matrix of the degree-l part of a map, entry by entry.
inline Mat dense_Q(const std::vector<MultiPoly>& comps, int d, int l) {
  const Eigen::Index cols = static_cast<Eigen::Index>(std::llround(std::pow(d, l)));
  Mat Q = Mat::Zero(d, cols);
  for (Eigen::Index col = 0; col < cols; ++col) {
    std::vector<int> e(d, 0);
    Eigen::Index c = col;
    for (int k = 0; k < l; ++k) {
      ++e[c % d];
      c /= d;
    }
    for (int i = 0; i < d; ++i) Q(i, col) = comps[i].coeff(e) / multinomial(e);
  }
  return Q;
}

inline double svd_norm(const Mat& a) {
  if (a.size() == 0) return 0.0;
  return Eigen::JacobiSVD<Mat>(a).singularValues()(0);
}

// Majorant table R_{j,s} by explicit polynomial powers of sum_l n_l x^l.
inline Mat majorant_R(const std::vector<double>& n, int N) {
  const int D = static_cast<int>(n.size()) - 1;
  Mat R = Mat::Zero(N + 1, N * D + 1);
  std::vector<double> p{1.0};
  for (int j = 1; j <= N; ++j) {
    std::vector<double> q(p.size() + D, 0.0);
    for (std::size_t a = 0; a < p.size(); ++a) {
      for (int b = 0; b <= D; ++b) q[a + b] += p[a] * n[b];
    }
    p = q;
    for (std::size_t s = 0; s < p.size(); ++s) R(j, s) = p[s];
  }
  return R;
}

// Lifted step matrix (Delta_N x Delta_N) from dense Kronecker products over all compositions.
inline Mat dense_B(const std::vector<Mat>& Q, int d, int N) {
  const int D = static_cast<int>(Q.size()) - 1;
  std::vector<Eigen::Index> off{0};
  for (int j = 1; j <= N; ++j) off.push_back(off.back() + static_cast<Eigen::Index>(std::llround(std::pow(d, j))));
  Mat B = Mat::Zero(off.back(), off.back());
  for (int j = 1; j <= N; ++j) {
    std::vector<int> a(j, 0);
    while (true) {
      int s = 0;
      for (int x : a) s += x;
      if (s >= 1 && s <= N) {
        Mat t = Q[a[0]];
        for (int r = 1; r < j; ++r) t = dense_kron(t, Q[a[r]]);
        B.block(off[j - 1], off[s - 1], t.rows(), t.cols()) += t;
      }
      int pos = j - 1;
      while (pos >= 0 && a[pos] == D) a[pos--] = 0;
      if (pos < 0) break;
      ++a[pos];
    }
  }
  return B;
}

// Random polynomial map with a contractive linear part and small higher-order terms.
inline std::vector<MultiPoly> random_map(int d, int D, double lin, double higher, double constant,
                                         std::mt19937_64& rng) {
  std::uniform_real_distribution<double> U(-1.0, 1.0);
  std::vector<MultiPoly> comps(d, MultiPoly(d));
  for (int i = 0; i < d; ++i) {
    comps[i].add_term(std::vector<int>(d, 0), constant * U(rng));
    // All exponent vectors of total degree 1..D.
    std::vector<int> e(d, 0);
    while (true) {
      int k = d - 1;
      while (k >= 0 && e[k] == D) e[k--] = 0;
      if (k < 0) break;
      ++e[k];
      int deg = 0;
      for (int x : e) deg += x;
      if (deg < 1 || deg > D) continue;
      comps[i].add_term(e, (deg == 1 ? lin / d : higher) * U(rng));
    }
  }
  return comps;
}

inline Vec eval_map(const std::vector<MultiPoly>& comps, const Vec& v) {
  std::vector<double> x(v.data(), v.data() + v.size());
  Vec out(comps.size());
  for (std::size_t i = 0; i < comps.size(); ++i) out(i) = comps[i].eval(x);
  return out;
}

}  // namespace oracle

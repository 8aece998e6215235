#pragma once

// Small exact-structure rings used to push step maps through generic code:
// MultiPoly (sparse multivariate polynomials with double coefficients) and
// ModP (integers modulo 2^61 - 1).

#include <cstdint>
#include <map>
#include <vector>

namespace crt {

class ModP {
 public:
  static constexpr std::uint64_t P = (std::uint64_t{1} << 61) - 1;

  ModP() = default;
  ModP(double x) : v_(from_double(x)) {}  // NOLINT: implicit on purpose, mirrors double literals
  static ModP raw(std::uint64_t v) {
    ModP r;
    r.v_ = v % P;
    return r;
  }

  std::uint64_t value() const { return v_; }
  ModP inverse() const;
  ModP pow(std::uint64_t e) const;

  friend ModP operator+(ModP a, ModP b) { return raw_add(a.v_, b.v_); }
  friend ModP operator-(ModP a, ModP b) { return raw_add(a.v_, P - b.v_); }
  friend ModP operator-(ModP a) { return raw_add(0, P - a.v_); }
  friend ModP operator*(ModP a, ModP b) { return raw_mul(a.v_, b.v_); }
  friend ModP operator/(ModP a, ModP b) { return a * b.inverse(); }
  ModP& operator+=(ModP b) { return *this = *this + b; }
  ModP& operator-=(ModP b) { return *this = *this - b; }
  ModP& operator*=(ModP b) { return *this = *this * b; }
  friend bool operator==(ModP a, ModP b) { return a.v_ == b.v_; }
  friend bool operator!=(ModP a, ModP b) { return a.v_ != b.v_; }

 private:
  static std::uint64_t from_double(double x);
  static ModP raw_add(std::uint64_t a, std::uint64_t b) {
    std::uint64_t s = a + b;
    if (s >= P) s -= P;
    if (s >= P) s -= P;
    ModP r;
    r.v_ = s;
    return r;
  }
  static ModP raw_mul(std::uint64_t a, std::uint64_t b) {
    unsigned __int128 z = static_cast<unsigned __int128>(a) * b;
    std::uint64_t lo = static_cast<std::uint64_t>(z & P);
    std::uint64_t hi = static_cast<std::uint64_t>(z >> 61);
    return raw_add(lo, hi);
  }
  std::uint64_t v_ = 0;
};

/// Sparse polynomial in up to 6 variables; exponents packed 10 bits per variable.
class MultiPoly {
 public:
  static constexpr int kMaxVars = 6;
  static constexpr int kMaxExp = 1023;
  using Terms = std::map<std::uint64_t, double>;

  MultiPoly() = default;
  explicit MultiPoly(int nvars);
  MultiPoly(double c) { if (c != 0.0) terms_[0] = c; }  // NOLINT: constant polynomial

  static MultiPoly constant(int nvars, double c);
  static MultiPoly variable(int nvars, int i);

  int nvars() const { return nvars_; }
  /// Total degree; -1 for the zero polynomial.
  int degree() const;
  bool is_zero() const { return terms_.empty(); }
  const Terms& terms() const { return terms_; }

  static std::uint64_t pack(const std::vector<int>& e);
  static std::vector<int> unpack(std::uint64_t key, int nvars);
  static int key_degree(std::uint64_t key);

  void add_term(const std::vector<int>& e, double c);
  double coeff(const std::vector<int>& e) const;
  double eval(const std::vector<double>& x) const;

  /// Drops terms with |c| <= tol.
  void prune(double tol);

  MultiPoly& operator+=(const MultiPoly& b);
  MultiPoly& operator-=(const MultiPoly& b);
  MultiPoly& operator*=(double s);
  friend MultiPoly operator+(MultiPoly a, const MultiPoly& b) { return a += b; }
  friend MultiPoly operator-(MultiPoly a, const MultiPoly& b) { return a -= b; }
  friend MultiPoly operator-(MultiPoly a) { return a *= -1.0; }
  friend MultiPoly operator*(const MultiPoly& a, const MultiPoly& b);
  friend MultiPoly operator*(MultiPoly a, double s) { return a *= s; }
  friend MultiPoly operator*(double s, MultiPoly a) { return a *= s; }
  friend MultiPoly operator+(MultiPoly a, double c) { return a += MultiPoly(c); }
  friend MultiPoly operator+(double c, MultiPoly a) { return a += MultiPoly(c); }
  friend MultiPoly operator-(MultiPoly a, double c) { return a -= MultiPoly(c); }
  friend MultiPoly operator-(double c, const MultiPoly& a) { return MultiPoly(c) - a; }
  friend MultiPoly operator/(MultiPoly a, double s) { return a *= (1.0 / s); }

 private:
  int nvars_ = 0;
  Terms terms_;
};

/// Evaluates p at ring-valued arguments (double, ModP, MultiPoly, ...).
template <class R>
R eval_at(const MultiPoly& p, const std::vector<R>& x) {
  R acc = x.empty() ? R(0.0) : x[0] * 0.0;
  if (p.is_zero()) return acc;
  const int nv = static_cast<int>(x.size());
  std::vector<std::vector<R>> powers(nv);
  auto power = [&](int i, int k) -> const R& {
    auto& pw = powers[i];
    if (pw.empty()) pw.push_back(x[i] * 0.0 + 1.0);
    while (static_cast<int>(pw.size()) <= k) pw.push_back(pw.back() * x[i]);
    return pw[k];
  };
  for (const auto& [key, c] : p.terms()) {
    auto e = MultiPoly::unpack(key, nv);
    R term = x.empty() ? R(c) : x[0] * 0.0 + c;
    for (int i = 0; i < nv; ++i) {
      if (e[i] > 0) term = term * power(i, e[i]);
    }
    acc = acc + term;
  }
  return acc;
}

}  // namespace crt

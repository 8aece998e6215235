#include "crt/multipoly.hpp"

#include <algorithm>
#include <cmath>
#include <string>

#include "crt/errors.hpp"

namespace crt {

namespace {
constexpr int kBits = 10;
constexpr std::uint64_t kMask = (std::uint64_t{1} << kBits) - 1;
}  // namespace

std::uint64_t ModP::from_double(double x) {
  if (x == 0.0) return 0;
  if (!std::isfinite(x)) throw InvalidArgument("non-finite value cannot be mapped to F_p");
  int ex = 0;
  double f = std::frexp(std::abs(x), &ex);
  // |x| = mant * 2^(ex-53) with mant a 53-bit integer, exactly.
  auto mant = static_cast<std::uint64_t>(std::ldexp(f, 53));
  int e = ex - 53;
  int r = ((e % 61) + 61) % 61;  // 2^61 = 1 mod P
  ModP m = raw(mant) * raw(std::uint64_t{1} << r);
  if (x < 0) m = -m;
  return m.v_;
}

ModP ModP::pow(std::uint64_t e) const {
  ModP base = *this, r = raw(1);
  while (e) {
    if (e & 1) r *= base;
    base *= base;
    e >>= 1;
  }
  return r;
}

ModP ModP::inverse() const {
  if (v_ == 0) throw InvalidArgument("inverse of zero in F_p");
  return pow(P - 2);
}

MultiPoly::MultiPoly(int nvars) : nvars_(nvars) {
  if (nvars < 0 || nvars > kMaxVars) throw InvalidArgument("MultiPoly supports at most 6 variables");
}

MultiPoly MultiPoly::constant(int nvars, double c) {
  MultiPoly p(nvars);
  if (c != 0.0) p.terms_[0] = c;
  return p;
}

MultiPoly MultiPoly::variable(int nvars, int i) {
  MultiPoly p(nvars);
  if (i < 0 || i >= nvars) throw InvalidArgument("variable index out of range");
  p.terms_[std::uint64_t{1} << (kBits * i)] = 1.0;
  return p;
}

std::uint64_t MultiPoly::pack(const std::vector<int>& e) {
  if (static_cast<int>(e.size()) > kMaxVars) throw InvalidArgument("too many variables");
  std::uint64_t key = 0;
  for (std::size_t i = 0; i < e.size(); ++i) {
    if (e[i] < 0 || e[i] > kMaxExp) throw DegreeOverflow("exponent out of packed range");
    key |= static_cast<std::uint64_t>(e[i]) << (kBits * i);
  }
  return key;
}

std::vector<int> MultiPoly::unpack(std::uint64_t key, int nvars) {
  std::vector<int> e(nvars);
  for (int i = 0; i < nvars; ++i) e[i] = static_cast<int>((key >> (kBits * i)) & kMask);
  return e;
}

int MultiPoly::key_degree(std::uint64_t key) {
  int s = 0;
  for (int i = 0; i < kMaxVars; ++i) s += static_cast<int>((key >> (kBits * i)) & kMask);
  return s;
}

int MultiPoly::degree() const {
  int d = -1;
  for (const auto& kv : terms_) d = std::max(d, key_degree(kv.first));
  return d;
}

void MultiPoly::add_term(const std::vector<int>& e, double c) {
  nvars_ = std::max(nvars_, static_cast<int>(e.size()));
  auto key = pack(e);
  double& slot = terms_[key];
  slot += c;
  if (slot == 0.0) terms_.erase(key);
}

double MultiPoly::coeff(const std::vector<int>& e) const {
  auto it = terms_.find(pack(e));
  return it == terms_.end() ? 0.0 : it->second;
}

double MultiPoly::eval(const std::vector<double>& x) const { return eval_at<double>(*this, x); }

void MultiPoly::prune(double tol) {
  for (auto it = terms_.begin(); it != terms_.end();) {
    if (std::abs(it->second) <= tol) {
      it = terms_.erase(it);
    } else {
      ++it;
    }
  }
}

MultiPoly& MultiPoly::operator+=(const MultiPoly& b) {
  nvars_ = std::max(nvars_, b.nvars_);
  for (const auto& [k, c] : b.terms_) {
    double& slot = terms_[k];
    slot += c;
    if (slot == 0.0) terms_.erase(k);
  }
  return *this;
}

MultiPoly& MultiPoly::operator-=(const MultiPoly& b) {
  nvars_ = std::max(nvars_, b.nvars_);
  for (const auto& [k, c] : b.terms_) {
    double& slot = terms_[k];
    slot -= c;
    if (slot == 0.0) terms_.erase(k);
  }
  return *this;
}

MultiPoly& MultiPoly::operator*=(double s) {
  if (s == 0.0) {
    terms_.clear();
    return *this;
  }
  for (auto& kv : terms_) kv.second *= s;
  return *this;
}

MultiPoly operator*(const MultiPoly& a, const MultiPoly& b) {
  MultiPoly r(std::max(a.nvars_, b.nvars_));
  const int nv = MultiPoly::kMaxVars;
  for (const auto& [ka, ca] : a.terms_) {
    for (const auto& [kb, cb] : b.terms_) {
      // Per-field overflow check before the packed add.
      for (int i = 0; i < nv; ++i) {
        auto ea = (ka >> (kBits * i)) & kMask;
        auto eb = (kb >> (kBits * i)) & kMask;
        if (ea + eb > static_cast<std::uint64_t>(MultiPoly::kMaxExp)) {
          throw DegreeOverflow("per-variable exponent exceeds " + std::to_string(MultiPoly::kMaxExp));
        }
      }
      r.terms_[ka + kb] += ca * cb;
    }
  }
  for (auto it = r.terms_.begin(); it != r.terms_.end();) {
    if (it->second == 0.0) {
      it = r.terms_.erase(it);
    } else {
      ++it;
    }
  }
  return r;
}

}  // namespace crt

#include "crt/linalg.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <iomanip>
#include <limits>
#include <random>
#include <sstream>

#include "crt/errors.hpp"

namespace crt {

SpMat kron(const SpMat& a, const SpMat& b) {
  const std::int64_t rows = a.rows() * b.rows();
  const std::int64_t cols = a.cols() * b.cols();
  std::vector<Triplet> trips;
  trips.reserve(static_cast<std::size_t>(a.nonZeros() * b.nonZeros()));
  for (std::int64_t i = 0; i < a.outerSize(); ++i) {
    for (SpMat::InnerIterator ia(a, i); ia; ++ia) {
      for (std::int64_t k = 0; k < b.outerSize(); ++k) {
        for (SpMat::InnerIterator ib(b, k); ib; ++ib) {
          trips.emplace_back(ia.row() * b.rows() + ib.row(), ia.col() * b.cols() + ib.col(),
                             ia.value() * ib.value());
        }
      }
    }
  }
  SpMat out(rows, cols);
  out.setFromTriplets(trips.begin(), trips.end());
  return out;
}

double spectral_norm(const Mat& a) {
  if (a.size() == 0) return 0.0;
  Eigen::JacobiSVD<Mat> svd(a);
  return svd.singularValues()(0);
}

double spectral_norm(const SpMat& a, double rel_tol, int max_iter, std::int64_t dense_cutoff) {
  if (a.nonZeros() == 0) return 0.0;
  if (a.rows() + a.cols() <= dense_cutoff) return spectral_norm(Mat(a));
  std::mt19937_64 rng(0x5eed);
  std::normal_distribution<double> nd;
  Vec x(a.cols());
  for (auto& v : x) v = nd(rng);
  x.normalize();
  double prev = 0.0;
  for (int it = 0; it < max_iter; ++it) {
    Vec y = a.transpose() * (a * x);
    const double lam = y.norm();
    if (lam == 0.0) return 0.0;
    x = y / lam;
    if (std::abs(lam - prev) <= rel_tol * lam) return std::sqrt(lam);
    prev = lam;
  }
  return std::sqrt(prev);
}

std::int64_t max_row_nnz(const SpMat& a) {
  std::int64_t best = 0;
  for (std::int64_t i = 0; i < a.outerSize(); ++i) {
    std::int64_t cnt = 0;
    for (SpMat::InnerIterator it(a, i); it; ++it) {
      if (it.value() != 0.0) ++cnt;
    }
    best = std::max(best, cnt);
  }
  return best;
}

std::int64_t checked_pow(std::int64_t base, int exp, std::int64_t cap) {
  std::int64_t r = 1;
  for (int i = 0; i < exp; ++i) {
    if (r > cap / std::max<std::int64_t>(base, 1)) {
      throw MemoryBudgetExceeded("dimension " + std::to_string(base) + "^" + std::to_string(exp) +
                                 " exceeds cap " + std::to_string(cap));
    }
    r *= base;
  }
  return r;
}

double binomial(int n, int k) {
  if (k < 0 || k > n) return 0.0;
  k = std::min(k, n - k);
  double r = 1.0;
  for (int i = 1; i <= k; ++i) r = r * (n - k + i) / i;
  return std::round(r);
}

void write_matrix_market(const SpMat& a, const std::string& path, const std::string& comment) {
  std::ofstream out(path);
  if (!out) throw IoError("cannot open " + path + " for writing");
  out << "%%MatrixMarket matrix coordinate real general\n";
  if (!comment.empty()) {
    std::istringstream ss(comment);
    std::string line;
    while (std::getline(ss, line)) out << "% " << line << "\n";
  }
  out << a.rows() << " " << a.cols() << " " << a.nonZeros() << "\n";
  out << std::setprecision(17);
  // Row-major traversal gives a byte-stable ordering.
  for (std::int64_t i = 0; i < a.outerSize(); ++i) {
    for (SpMat::InnerIterator it(a, i); it; ++it) {
      out << it.row() + 1 << " " << it.col() + 1 << " " << it.value() << "\n";
    }
  }
  if (!out) throw IoError("write failed: " + path);
}

SpMat read_matrix_market(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open " + path);
  std::string line;
  std::getline(in, line);
  if (line.rfind("%%MatrixMarket matrix coordinate real general", 0) != 0) {
    throw IoError("unsupported Matrix Market header in " + path);
  }
  do {
    if (!std::getline(in, line)) throw IoError("truncated Matrix Market file " + path);
  } while (!line.empty() && line[0] == '%');
  std::int64_t rows = 0, cols = 0, nnz = 0;
  std::istringstream hdr(line);
  hdr >> rows >> cols >> nnz;
  std::vector<Triplet> trips;
  trips.reserve(static_cast<std::size_t>(nnz));
  for (std::int64_t k = 0; k < nnz; ++k) {
    std::int64_t i = 0, j = 0;
    double v = 0.0;
    if (!(in >> i >> j >> v)) throw IoError("truncated Matrix Market entries in " + path);
    trips.emplace_back(i - 1, j - 1, v);
  }
  SpMat a(rows, cols);
  a.setFromTriplets(trips.begin(), trips.end());
  return a;
}

void write_vector(const Vec& v, const std::string& path) {
  std::ofstream out(path);
  if (!out) throw IoError("cannot open " + path + " for writing");
  out << std::setprecision(17);
  for (Eigen::Index i = 0; i < v.size(); ++i) out << v(i) << "\n";
  if (!out) throw IoError("write failed: " + path);
}

Vec read_vector(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open " + path);
  std::vector<double> vals;
  double x = 0.0;
  while (in >> x) vals.push_back(x);
  return Eigen::Map<Vec>(vals.data(), static_cast<Eigen::Index>(vals.size()));
}

}  // namespace crt

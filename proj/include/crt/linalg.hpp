#pragma once

#include <Eigen/Dense>
#include <Eigen/Sparse>

#include <cstdint>
#include <string>
#include <vector>

namespace crt {

using Vec = Eigen::VectorXd;
using Mat = Eigen::MatrixXd;
using SpMat = Eigen::SparseMatrix<double, Eigen::RowMajor, std::int64_t>;
using Triplet = Eigen::Triplet<double, std::int64_t>;

/// Row-major Kronecker product: (A (x) B)(i*rows(B)+k, j*cols(B)+l) = A(i,j) B(k,l).
SpMat kron(const SpMat& a, const SpMat& b);

/// Largest singular value of a dense matrix.
double spectral_norm(const Mat& a);

/// Largest singular value of a sparse matrix, by power iteration on A^T A.
/// Dense SVD is used below `dense_cutoff` rows+cols.
double spectral_norm(const SpMat& a, double rel_tol = 1e-10, int max_iter = 5000,
                     std::int64_t dense_cutoff = 600);

/// Maximum number of stored nonzeros over the rows of `a`.
std::int64_t max_row_nnz(const SpMat& a);

/// Integer power with overflow check (throws MemoryBudgetExceeded past `cap`).
std::int64_t checked_pow(std::int64_t base, int exp, std::int64_t cap);

double binomial(int n, int k);

/// Matrix Market coordinate real general, 1-based indices, 17 significant digits.
void write_matrix_market(const SpMat& a, const std::string& path,
                         const std::string& comment = {});
SpMat read_matrix_market(const std::string& path);

/// One value per line, 17 significant digits.
void write_vector(const Vec& v, const std::string& path);
Vec read_vector(const std::string& path);

}  // namespace crt

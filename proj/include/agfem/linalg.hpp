#pragma once

#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "agfem/core.hpp"

namespace agfem {

/// Symmetric sparse matrix in compressed-row form.
struct CsrMatrix {
  std::int64_t n = 0;
  std::vector<std::int64_t> row_ptr;
  std::vector<std::int32_t> col;
  std::vector<double> val;

  std::size_t nnz() const { return col.size(); }
  void multiply(std::span<const double> x, std::span<double> y, Exec exec = Exec::Serial) const;
  std::vector<double> diagonal() const;
  double max_abs() const;
  /// max_ij |A - A^T| (structural lookup; matrix must be square)
  double symmetry_gap() const;
  double entry(std::int64_t i, std::int64_t j) const;
};

struct Triplet {
  std::int32_t row, col;
  double val;
};

/// Duplicates are summed; triplets are sorted by (row, col, insertion order)
/// so the summation order is reproducible for any thread count.
CsrMatrix csr_from_triplets(std::int64_t n, std::vector<Triplet>& triplets);

void write_matrix_market(const CsrMatrix& A, const std::string& path);

/// Row-major dense matrix used for element blocks and small oracles.
struct DenseMatrix {
  std::size_t rows = 0, cols = 0;
  std::vector<double> a;

  DenseMatrix() = default;
  DenseMatrix(std::size_t r, std::size_t c) : rows(r), cols(c), a(r * c, 0.0) {}
  double& operator()(std::size_t i, std::size_t j) { return a[i * cols + j]; }
  double operator()(std::size_t i, std::size_t j) const { return a[i * cols + j]; }
};

/// ||B||_2^2 by power iteration on B^T B, relative tolerance tol.
double spectral_norm_sq(const DenseMatrix& B, double tol);

/// Dense symmetric eigenvalues via cyclic Jacobi; ascending order.
std::vector<double> jacobi_eigenvalues(DenseMatrix A, int max_sweeps = 50);

/// In-place Cholesky A = L L^T (lower). Returns false if not positive definite.
bool cholesky(DenseMatrix& A);

/// Solves A x = b by Gaussian elimination with partial pivoting.
/// Returns false on (numerical) singularity.
bool solve_dense(DenseMatrix A, std::vector<double> b, std::vector<double>& x);

/// Largest generalized eigenvalue of B u = lambda D u for symmetric B and
/// symmetric positive definite D (Cholesky reduction + Jacobi).
double generalized_eig_max(const DenseMatrix& B, DenseMatrix D);

/// Eigenvalues of a symmetric tridiagonal matrix (diag d, off-diag e) by the
/// implicit QL algorithm; ascending order.
std::vector<double> tridiag_eigenvalues(std::vector<double> d, std::vector<double> e);

double dot_vec(std::span<const double> a, std::span<const double> b, Exec exec = Exec::Serial);
double norm_vec(std::span<const double> a, Exec exec = Exec::Serial);

}  // namespace agfem

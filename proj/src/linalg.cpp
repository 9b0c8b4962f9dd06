#include "agfem/linalg.hpp"

#include <omp.h>

#include <algorithm>
#include <cassert>
#include <cmath>
#include <fstream>
#include <limits>
#include <numeric>

namespace agfem {

void CsrMatrix::multiply(std::span<const double> x, std::span<double> y, Exec exec) const {
  assert(std::int64_t(x.size()) == n && std::int64_t(y.size()) == n);
  if (exec == Exec::Parallel) {
#pragma omp parallel for schedule(static)
    for (std::int64_t i = 0; i < n; ++i) {
      double s = 0.0;
      for (std::int64_t k = row_ptr[std::size_t(i)]; k < row_ptr[std::size_t(i) + 1]; ++k)
        s += val[std::size_t(k)] * x[std::size_t(col[std::size_t(k)])];
      y[std::size_t(i)] = s;
    }
  } else {
    for (std::int64_t i = 0; i < n; ++i) {
      double s = 0.0;
      for (std::int64_t k = row_ptr[std::size_t(i)]; k < row_ptr[std::size_t(i) + 1]; ++k)
        s += val[std::size_t(k)] * x[std::size_t(col[std::size_t(k)])];
      y[std::size_t(i)] = s;
    }
  }
}

std::vector<double> CsrMatrix::diagonal() const {
  std::vector<double> d(std::size_t(n), 0.0);
  for (std::int64_t i = 0; i < n; ++i)
    for (std::int64_t k = row_ptr[std::size_t(i)]; k < row_ptr[std::size_t(i) + 1]; ++k)
      if (col[std::size_t(k)] == i) d[std::size_t(i)] = val[std::size_t(k)];
  return d;
}

double CsrMatrix::max_abs() const {
  double m = 0.0;
  for (const double v : val) m = std::max(m, std::abs(v));
  return m;
}

double CsrMatrix::entry(std::int64_t i, std::int64_t j) const {
  for (std::int64_t k = row_ptr[std::size_t(i)]; k < row_ptr[std::size_t(i) + 1]; ++k)
    if (col[std::size_t(k)] == j) return val[std::size_t(k)];
  return 0.0;
}

double CsrMatrix::symmetry_gap() const {
  double g = 0.0;
  for (std::int64_t i = 0; i < n; ++i)
    for (std::int64_t k = row_ptr[std::size_t(i)]; k < row_ptr[std::size_t(i) + 1]; ++k)
      g = std::max(g, std::abs(val[std::size_t(k)] - entry(col[std::size_t(k)], i)));
  return g;
}

CsrMatrix csr_from_triplets(std::int64_t n, std::vector<Triplet>& t) {
  std::vector<std::size_t> order(t.size());
  std::iota(order.begin(), order.end(), std::size_t(0));
  std::sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
    if (t[a].row != t[b].row) return t[a].row < t[b].row;
    if (t[a].col != t[b].col) return t[a].col < t[b].col;
    return a < b;  // stable duplicate order -> reproducible sums
  });
  CsrMatrix A;
  A.n = n;
  A.row_ptr.assign(std::size_t(n) + 1, 0);
  std::int32_t prev_r = -1, prev_c = -1;
  for (const auto idx : order) {
    const auto& e = t[idx];
    if (e.row == prev_r && e.col == prev_c) {
      A.val.back() += e.val;
    } else {
      A.col.push_back(e.col);
      A.val.push_back(e.val);
      A.row_ptr[std::size_t(e.row) + 1] += 1;
      prev_r = e.row;
      prev_c = e.col;
    }
  }
  for (std::int64_t i = 0; i < n; ++i) A.row_ptr[std::size_t(i) + 1] += A.row_ptr[std::size_t(i)];
  return A;
}

void write_matrix_market(const CsrMatrix& A, const std::string& path) {
  std::ofstream f(path);
  if (!f) throw InputError("cannot write " + path);
  f << "%%MatrixMarket matrix coordinate real symmetric\n";
  std::size_t nnz_lower = 0;
  for (std::int64_t i = 0; i < A.n; ++i)
    for (std::int64_t k = A.row_ptr[std::size_t(i)]; k < A.row_ptr[std::size_t(i) + 1]; ++k)
      if (A.col[std::size_t(k)] <= i) ++nnz_lower;
  f << A.n << " " << A.n << " " << nnz_lower << "\n";
  char buf[64];
  for (std::int64_t i = 0; i < A.n; ++i)
    for (std::int64_t k = A.row_ptr[std::size_t(i)]; k < A.row_ptr[std::size_t(i) + 1]; ++k)
      if (A.col[std::size_t(k)] <= i) {
        std::snprintf(buf, sizeof buf, "%lld %d %.17g\n", static_cast<long long>(i + 1),
                      A.col[std::size_t(k)] + 1, A.val[std::size_t(k)]);
        f << buf;
      }
}

double spectral_norm_sq(const DenseMatrix& B, double tol) {
  if (B.rows == 0 || B.cols == 0) return 0.0;
  std::vector<double> x(B.cols, 1.0), y(B.rows), z(B.cols);
  double lam = 0.0;
  for (int it = 0; it < 500; ++it) {
    // y = B x ; z = B^T y
    for (std::size_t i = 0; i < B.rows; ++i) {
      double s = 0.0;
      for (std::size_t j = 0; j < B.cols; ++j) s += B(i, j) * x[j];
      y[i] = s;
    }
    for (std::size_t j = 0; j < B.cols; ++j) {
      double s = 0.0;
      for (std::size_t i = 0; i < B.rows; ++i) s += B(i, j) * y[i];
      z[j] = s;
    }
    double nz = 0.0;
    for (const double v : z) nz += v * v;
    nz = std::sqrt(nz);
    if (nz == 0.0) return 0.0;
    const double lam_new = nz;  // Rayleigh growth of ||B^T B x||
    for (std::size_t j = 0; j < B.cols; ++j) x[j] = z[j] / nz;
    if (it > 2 && std::abs(lam_new - lam) <= tol * lam_new) {
      lam = lam_new;
      break;
    }
    lam = lam_new;
  }
  return lam;
}

std::vector<double> jacobi_eigenvalues(DenseMatrix A, int max_sweeps) {
  const std::size_t n = A.rows;
  assert(A.cols == n);
  for (int sweep = 0; sweep < max_sweeps; ++sweep) {
    double off = 0.0;
    for (std::size_t i = 0; i < n; ++i)
      for (std::size_t j = i + 1; j < n; ++j) off += A(i, j) * A(i, j);
    if (off < 1e-30) break;
    for (std::size_t p = 0; p < n; ++p)
      for (std::size_t qq = p + 1; qq < n; ++qq) {
        if (A(p, qq) == 0.0) continue;
        const double theta = (A(qq, qq) - A(p, p)) / (2.0 * A(p, qq));
        const double t = (theta >= 0 ? 1.0 : -1.0) /
                         (std::abs(theta) + std::sqrt(theta * theta + 1.0));
        const double c = 1.0 / std::sqrt(t * t + 1.0);
        const double s = t * c;
        for (std::size_t k = 0; k < n; ++k) {
          const double akp = A(k, p), akq = A(k, qq);
          A(k, p) = c * akp - s * akq;
          A(k, qq) = s * akp + c * akq;
        }
        for (std::size_t k = 0; k < n; ++k) {
          const double apk = A(p, k), aqk = A(qq, k);
          A(p, k) = c * apk - s * aqk;
          A(qq, k) = s * apk + c * aqk;
        }
      }
  }
  std::vector<double> ev(n);
  for (std::size_t i = 0; i < n; ++i) ev[i] = A(i, i);
  std::sort(ev.begin(), ev.end());
  return ev;
}

bool cholesky(DenseMatrix& A) {
  const std::size_t n = A.rows;
  for (std::size_t j = 0; j < n; ++j) {
    double d = A(j, j);
    for (std::size_t k = 0; k < j; ++k) d -= A(j, k) * A(j, k);
    if (!(d > 0.0)) return false;
    A(j, j) = std::sqrt(d);
    for (std::size_t i = j + 1; i < n; ++i) {
      double s = A(i, j);
      for (std::size_t k = 0; k < j; ++k) s -= A(i, k) * A(j, k);
      A(i, j) = s / A(j, j);
    }
  }
  return true;
}

bool solve_dense(DenseMatrix A, std::vector<double> b, std::vector<double>& x) {
  const std::size_t n = A.rows;
  assert(A.cols == n && b.size() == n);
  std::vector<std::size_t> piv(n);
  std::iota(piv.begin(), piv.end(), std::size_t(0));
  for (std::size_t k = 0; k < n; ++k) {
    std::size_t p = k;
    for (std::size_t i = k + 1; i < n; ++i)
      if (std::abs(A(i, k)) > std::abs(A(p, k))) p = i;
    if (A(p, k) == 0.0) return false;
    if (p != k) {
      for (std::size_t j = 0; j < n; ++j) std::swap(A(p, j), A(k, j));
      std::swap(b[p], b[k]);
    }
    for (std::size_t i = k + 1; i < n; ++i) {
      const double f = A(i, k) / A(k, k);
      A(i, k) = 0.0;
      for (std::size_t j = k + 1; j < n; ++j) A(i, j) -= f * A(k, j);
      b[i] -= f * b[k];
    }
  }
  x.assign(n, 0.0);
  for (std::size_t ii = n; ii-- > 0;) {
    double s = b[ii];
    for (std::size_t j = ii + 1; j < n; ++j) s -= A(ii, j) * x[j];
    x[ii] = s / A(ii, ii);
  }
  return true;
}

double generalized_eig_max(const DenseMatrix& B, DenseMatrix D) {
  const std::size_t n = B.rows;
  if (!cholesky(D)) return std::numeric_limits<double>::infinity();
  // C = L^-1 B L^-T
  DenseMatrix C = B;
  // solve L Y = B (column-wise forward substitution on rows of C)
  for (std::size_t j = 0; j < n; ++j)
    for (std::size_t i = 0; i < n; ++i) {
      double s = C(i, j);
      for (std::size_t k = 0; k < i; ++k) s -= D(i, k) * C(k, j);
      C(i, j) = s / D(i, i);
    }
  // solve Z L^T = Y, i.e. L Z^T = Y^T
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t j = 0; j < n; ++j) {
      double s = C(i, j);
      for (std::size_t k = 0; k < j; ++k) s -= D(j, k) * C(i, k);
      C(i, j) = s / D(j, j);
    }
  const auto ev = jacobi_eigenvalues(C);
  return ev.empty() ? 0.0 : ev.back();
}

std::vector<double> tridiag_eigenvalues(std::vector<double> d, std::vector<double> e) {
  // implicit-shift QL, eigenvalues only
  const std::size_t n = d.size();
  if (n == 0) return {};
  e.resize(n, 0.0);  // e[i] couples i and i+1; e[n-1] unused
  for (std::size_t l = 0; l < n; ++l) {
    int iter = 0;
    std::size_t m;
    do {
      for (m = l; m + 1 < n; ++m) {
        const double dd = std::abs(d[m]) + std::abs(d[m + 1]);
        if (std::abs(e[m]) <= 1e-300 || std::abs(e[m]) <= 1e-16 * dd) break;
      }
      if (m != l) {
        if (iter++ == 100) break;
        double g = (d[l + 1] - d[l]) / (2.0 * e[l]);
        double r = std::hypot(g, 1.0);
        g = d[m] - d[l] + e[l] / (g + (g >= 0 ? r : -r));
        double s = 1.0, c = 1.0, p = 0.0;
        bool early = false;
        for (std::size_t i = m; i-- > l;) {
          double f = s * e[i], b = c * e[i];
          r = std::hypot(f, g);
          e[i + 1] = r;
          if (r == 0.0) {
            d[i + 1] -= p;
            e[m] = 0.0;
            early = true;
            break;
          }
          s = f / r;
          c = g / r;
          g = d[i + 1] - p;
          r = (d[i] - g) * s + 2.0 * c * b;
          p = s * r;
          d[i + 1] = g + p;
          g = c * r - b;
        }
        if (early) continue;
        d[l] -= p;
        e[l] = g;
        e[m] = 0.0;
      }
    } while (m != l);
  }
  std::sort(d.begin(), d.end());
  return d;
}

double dot_vec(std::span<const double> a, std::span<const double> b, Exec exec) {
  const std::int64_t n = std::int64_t(a.size());
  double s = 0.0;
  if (exec == Exec::Parallel) {
#pragma omp parallel for schedule(static) reduction(+ : s)
    for (std::int64_t i = 0; i < n; ++i) s += a[std::size_t(i)] * b[std::size_t(i)];
  } else {
    for (std::int64_t i = 0; i < n; ++i) s += a[std::size_t(i)] * b[std::size_t(i)];
  }
  return s;
}

double norm_vec(std::span<const double> a, Exec exec) { return std::sqrt(dot_vec(a, a, exec)); }

}  // namespace agfem

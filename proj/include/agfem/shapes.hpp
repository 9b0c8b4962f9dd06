#pragma once

#include "agfem/core.hpp"

namespace agfem {

/// 1D Lagrange basis of order q on equispaced nodes j/q, j = 0..q, evaluated
/// anywhere (including outside [0,1] — polynomial extrapolation).
inline double lagrange1d(int q, int i, double x) {
  double v = 1.0;
  for (int j = 0; j <= q; ++j) {
    if (j == i) continue;
    v *= (x * q - j) / double(i - j);
  }
  return v;
}

inline double dlagrange1d(int q, int i, double x) {
  double s = 0.0;
  for (int k = 0; k <= q; ++k) {
    if (k == i) continue;
    double p = double(q) / double(i - k);
    for (int j = 0; j <= q; ++j) {
      if (j == i || j == k) continue;
      p *= (x * q - j) / double(i - j);
    }
    s += p;
  }
  return s;
}

inline int nodes_per_cell(int dim, int q) {
  int n = 1;
  for (int a = 0; a < dim; ++a) n *= q + 1;
  return n;
}

/// Tensor-product shape values at reference coordinates xi in [0,1]^dim,
/// local nodes in lexicographic order (x fastest).
inline void shape_values(int dim, int q, const Vec3& xi, double* N) {
  const int n1 = q + 1;
  double lx[5], ly[5], lz[5];
  for (int i = 0; i < n1; ++i) {
    lx[i] = lagrange1d(q, i, xi[0]);
    ly[i] = lagrange1d(q, i, xi[1]);
    lz[i] = dim == 3 ? lagrange1d(q, i, xi[2]) : 1.0;
  }
  int m = 0;
  const int kmax = dim == 3 ? q : 0;
  for (int k = 0; k <= kmax; ++k)
    for (int j = 0; j <= q; ++j)
      for (int i = 0; i <= q; ++i) N[m++] = lx[i] * ly[j] * (dim == 3 ? lz[k] : 1.0);
}

/// Reference-space gradients at xi; physical gradients divide by the cell
/// spacing per axis.
inline void shape_grads_ref(int dim, int q, const Vec3& xi, Vec3* G) {
  const int n1 = q + 1;
  double lx[5], ly[5], lz[5], dx[5], dy[5], dz[5];
  for (int i = 0; i < n1; ++i) {
    lx[i] = lagrange1d(q, i, xi[0]);
    ly[i] = lagrange1d(q, i, xi[1]);
    lz[i] = dim == 3 ? lagrange1d(q, i, xi[2]) : 1.0;
    dx[i] = dlagrange1d(q, i, xi[0]);
    dy[i] = dlagrange1d(q, i, xi[1]);
    dz[i] = dim == 3 ? dlagrange1d(q, i, xi[2]) : 0.0;
  }
  int m = 0;
  const int kmax = dim == 3 ? q : 0;
  for (int k = 0; k <= kmax; ++k)
    for (int j = 0; j <= q; ++j)
      for (int i = 0; i <= q; ++i) {
        if (dim == 3) {
          G[m] = {dx[i] * ly[j] * lz[k], lx[i] * dy[j] * lz[k], lx[i] * ly[j] * dz[k]};
        } else {
          G[m] = {dx[i] * ly[j], lx[i] * dy[j], 0.0};
        }
        ++m;
      }
}

}  // namespace agfem

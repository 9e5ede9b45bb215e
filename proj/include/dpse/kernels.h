// SPDX-License-Identifier: Apache-2.0
//
// Data-parallel inner loops shared by the online WPE recursion, the
// beamformer statistics and the FastMNMF sweeps. Each kernel has a scalar
// reference implementation and an AVX2/FMA variant; the variant is chosen once
// per process from CPUID. Setting DPSE_SIMD=scalar forces the reference path.
//
// Complex buffers are interleaved (re, im) std::complex<double>. Matrices are
// row-major.

#ifndef DPSE_KERNELS_H_
#define DPSE_KERNELS_H_

#include <complex>

namespace dpse::kernels {

using cplx = std::complex<double>;

struct KernelTable {
  const char* name;

  // y = A x, A is rows x cols.
  void (*cgemv)(const cplx* a, const cplx* x, cplx* y, int rows, int cols);
  // y = A^H x, A is rows x cols, y has cols entries.
  void (*cgemv_adj)(const cplx* a, const cplx* x, cplx* y, int rows, int cols);
  // A = scale * (A + beta * x y^H), A is rows x cols.
  void (*cger_scaled)(cplx* a, const cplx* x, const cplx* y, int rows, int cols,
                      cplx beta, double scale);
  // sum_i conj(a_i) b_i
  cplx (*cdotc)(const cplx* a, const cplx* b, int n);
  // sum_i w_i conj(a_i) b_i
  cplx (*wcdotc)(const cplx* a, const cplx* b, const double* w, int n);
  // y += alpha x
  void (*caxpy)(cplx alpha, const cplx* x, cplx* y, int n);
  // p_i = |y_i|^2
  void (*cabs2)(const cplx* y, double* p, int n);
  double (*ddot)(const double* a, const double* b, int n);
  // y += alpha x
  void (*daxpy)(double alpha, const double* x, double* y, int n);
  // inv_i = 1 / model_i, ratio_i = power_i / model_i^2
  void (*recip_ratio)(const double* power, const double* model, double* inv,
                      double* ratio, int n);
};

const KernelTable& Scalar();
// nullptr when the CPU (or the build) lacks AVX2+FMA.
const KernelTable* Avx2();
// The dispatched table used by the library.
const KernelTable& Active();

}  // namespace dpse::kernels

#endif  // DPSE_KERNELS_H_

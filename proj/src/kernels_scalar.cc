// SPDX-License-Identifier: Apache-2.0

#include "dpse/kernels.h"

namespace dpse::kernels {
namespace {

void CgemvScalar(const cplx* a, const cplx* x, cplx* y, int rows, int cols) {
  for (int i = 0; i < rows; ++i) {
    cplx acc = 0.0;
    const cplx* row = a + size_t(i) * cols;
    for (int j = 0; j < cols; ++j) acc += row[j] * x[j];
    y[i] = acc;
  }
}

void CgemvAdjScalar(const cplx* a, const cplx* x, cplx* y, int rows, int cols) {
  for (int j = 0; j < cols; ++j) y[j] = 0.0;
  for (int i = 0; i < rows; ++i) {
    const cplx* row = a + size_t(i) * cols;
    const cplx xi = x[i];
    for (int j = 0; j < cols; ++j) y[j] += std::conj(row[j]) * xi;
  }
}

void CgerScaledScalar(cplx* a, const cplx* x, const cplx* y, int rows, int cols,
                      cplx beta, double scale) {
  for (int i = 0; i < rows; ++i) {
    cplx* row = a + size_t(i) * cols;
    const cplx bx = beta * x[i];
    for (int j = 0; j < cols; ++j) row[j] = scale * (row[j] + bx * std::conj(y[j]));
  }
}

cplx CdotcScalar(const cplx* a, const cplx* b, int n) {
  cplx acc = 0.0;
  for (int i = 0; i < n; ++i) acc += std::conj(a[i]) * b[i];
  return acc;
}

cplx WcdotcScalar(const cplx* a, const cplx* b, const double* w, int n) {
  cplx acc = 0.0;
  for (int i = 0; i < n; ++i) acc += w[i] * (std::conj(a[i]) * b[i]);
  return acc;
}

void CaxpyScalar(cplx alpha, const cplx* x, cplx* y, int n) {
  for (int i = 0; i < n; ++i) y[i] += alpha * x[i];
}

void Cabs2Scalar(const cplx* y, double* p, int n) {
  for (int i = 0; i < n; ++i) p[i] = std::norm(y[i]);
}

double DdotScalar(const double* a, const double* b, int n) {
  double acc = 0.0;
  for (int i = 0; i < n; ++i) acc += a[i] * b[i];
  return acc;
}

void DaxpyScalar(double alpha, const double* x, double* y, int n) {
  for (int i = 0; i < n; ++i) y[i] += alpha * x[i];
}

void RecipRatioScalar(const double* power, const double* model, double* inv,
                      double* ratio, int n) {
  for (int i = 0; i < n; ++i) {
    const double r = 1.0 / model[i];
    inv[i] = r;
    ratio[i] = power[i] * r * r;
  }
}

}  // namespace

const KernelTable& Scalar() {
  static const KernelTable table{
      "scalar",     CgemvScalar, CgemvAdjScalar, CgerScaledScalar,
      CdotcScalar,  WcdotcScalar, CaxpyScalar,   Cabs2Scalar,
      DdotScalar,   DaxpyScalar,  RecipRatioScalar,
  };
  return table;
}

}  // namespace dpse::kernels

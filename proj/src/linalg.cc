// SPDX-License-Identifier: Apache-2.0

#include "dpse/linalg.h"

#include <algorithm>
#include <cassert>
#include <cmath>
#include <cstdlib>
#include <limits>

#include "dpse/error.h"

namespace dpse {

const char* ErrorCodeName(ErrorCode code) {
  switch (code) {
    case ErrorCode::kInvalidArgument: return "InvalidArgument";
    case ErrorCode::kSingularMatrix: return "SingularMatrix";
    case ErrorCode::kChannelLengthMismatch: return "ChannelLengthMismatch";
    case ErrorCode::kBlockTooShort: return "BlockTooShort";
    case ErrorCode::kNumericalDivergence: return "NumericalDivergence";
    case ErrorCode::kSingularInitialization: return "SingularInitialization";
    case ErrorCode::kLikelihoodDiverged: return "LikelihoodDiverged";
    case ErrorCode::kDegenerateStatistics: return "DegenerateStatistics";
    case ErrorCode::kSilentReference: return "SilentReference";
    case ErrorCode::kIo: return "Io";
  }
  return "Unknown";
}

CMat::CMat(int rows, int cols)
    : rows_(rows), cols_(cols), data_(size_t(rows) * size_t(cols)) {
  if (rows <= 0 || cols <= 0)
    throw Error(ErrorCode::kInvalidArgument, "matrix dimensions must be positive");
}

CMat::CMat(int rows, int cols, std::span<const cplx> values) : CMat(rows, cols) {
  if (values.size() != data_.size())
    throw Error(ErrorCode::kInvalidArgument, "value count does not match shape");
  std::copy(values.begin(), values.end(), data_.begin());
}

CMat CMat::Identity(int n) {
  CMat m(n, n);
  for (int i = 0; i < n; ++i) m(i, i) = 1.0;
  return m;
}

CMat CMat::Column(std::span<const cplx> values) {
  return CMat(int(values.size()), 1, values);
}

CMat& CMat::operator+=(const CMat& other) {
  assert(rows_ == other.rows_ && cols_ == other.cols_);
  for (size_t i = 0; i < data_.size(); ++i) data_[i] += other.data_[i];
  return *this;
}

CMat& CMat::operator-=(const CMat& other) {
  assert(rows_ == other.rows_ && cols_ == other.cols_);
  for (size_t i = 0; i < data_.size(); ++i) data_[i] -= other.data_[i];
  return *this;
}

CMat& CMat::operator*=(cplx s) {
  for (auto& v : data_) v *= s;
  return *this;
}

CMat operator+(CMat a, const CMat& b) { return a += b; }
CMat operator-(CMat a, const CMat& b) { return a -= b; }
CMat operator*(cplx s, CMat a) { return a *= s; }

CMat operator*(const CMat& a, const CMat& b) {
  if (a.cols() != b.rows())
    throw Error(ErrorCode::kInvalidArgument, "matrix product shape mismatch");
  CMat c(a.rows(), b.cols());
  for (int i = 0; i < a.rows(); ++i) {
    for (int k = 0; k < a.cols(); ++k) {
      const cplx aik = a(i, k);
      for (int j = 0; j < b.cols(); ++j) c(i, j) += aik * b(k, j);
    }
  }
  return c;
}

CMat Adjoint(const CMat& a) {
  CMat r(a.cols(), a.rows());
  for (int i = 0; i < a.rows(); ++i)
    for (int j = 0; j < a.cols(); ++j) r(j, i) = std::conj(a(i, j));
  return r;
}

CMat Hermitianize(const CMat& a) {
  if (!a.square())
    throw Error(ErrorCode::kInvalidArgument, "hermitianize needs a square matrix");
  CMat r(a.rows(), a.cols());
  const int n = a.rows();
  for (int i = 0; i < n; ++i) {
    r(i, i) = a(i, i).real();
    for (int j = i + 1; j < n; ++j) {
      const cplx v = 0.5 * (a(i, j) + std::conj(a(j, i)));
      r(i, j) = v;
      r(j, i) = std::conj(v);
    }
  }
  return r;
}

cplx Trace(const CMat& a) {
  cplx t = 0.0;
  for (int i = 0; i < std::min(a.rows(), a.cols()); ++i) t += a(i, i);
  return t;
}

CMat Outer(std::span<const cplx> x, std::span<const cplx> y) {
  CMat r(int(x.size()), int(y.size()));
  for (size_t i = 0; i < x.size(); ++i)
    for (size_t j = 0; j < y.size(); ++j) r(int(i), int(j)) = x[i] * std::conj(y[j]);
  return r;
}

double MaxAbs(const CMat& a) {
  double m = 0.0;
  for (const auto& v : a.data()) m = std::max(m, std::abs(v));
  return m;
}

double MaxAbsDiff(const CMat& a, const CMat& b) {
  assert(a.rows() == b.rows() && a.cols() == b.cols());
  double m = 0.0;
  for (size_t i = 0; i < a.data().size(); ++i)
    m = std::max(m, std::abs(a.data()[i] - b.data()[i]));
  return m;
}

double FrobeniusNorm(const CMat& a) {
  double s = 0.0;
  for (const auto& v : a.data()) s += std::norm(v);
  return std::sqrt(s);
}

bool SolveInPlace(std::span<cplx> a, int n, std::span<cplx> b, int nrhs,
                  double loading, std::span<int> pivots) {
  assert(a.size() >= size_t(n) * n && b.size() >= size_t(n) * nrhs &&
         pivots.size() >= size_t(n));
  if (loading > 0.0) {
    double mean_diag = 0.0;
    for (int i = 0; i < n; ++i) mean_diag += std::abs(a[i * n + i]);
    mean_diag /= n;
    for (int i = 0; i < n; ++i) a[i * n + i] += loading * mean_diag;
  }

  double max_pivot = 0.0;
  double min_pivot = std::numeric_limits<double>::infinity();
  for (int k = 0; k < n; ++k) {
    int p = k;
    double best = std::abs(a[k * n + k]);
    for (int i = k + 1; i < n; ++i) {
      const double v = std::abs(a[i * n + k]);
      if (v > best) {
        best = v;
        p = i;
      }
    }
    pivots[k] = p;
    if (!(best > 0.0) || !std::isfinite(best)) return false;
    max_pivot = std::max(max_pivot, best);
    min_pivot = std::min(min_pivot, best);
    if (p != k) {
      for (int j = 0; j < n; ++j) std::swap(a[k * n + j], a[p * n + j]);
      for (int j = 0; j < nrhs; ++j) std::swap(b[k * nrhs + j], b[p * nrhs + j]);
    }
    const cplx inv_pivot = 1.0 / a[k * n + k];
    for (int i = k + 1; i < n; ++i) {
      const cplx factor = a[i * n + k] * inv_pivot;
      if (factor == cplx(0.0)) continue;
      a[i * n + k] = factor;
      for (int j = k + 1; j < n; ++j) a[i * n + j] -= factor * a[k * n + j];
      for (int j = 0; j < nrhs; ++j) b[i * nrhs + j] -= factor * b[k * nrhs + j];
    }
  }
  if (max_pivot > kMaxCondition * min_pivot) return false;

  for (int k = n - 1; k >= 0; --k) {
    const cplx inv_pivot = 1.0 / a[k * n + k];
    for (int j = 0; j < nrhs; ++j) {
      cplx acc = b[k * nrhs + j];
      for (int i = k + 1; i < n; ++i) acc -= a[k * n + i] * b[i * nrhs + j];
      b[k * nrhs + j] = acc * inv_pivot;
    }
  }
  return true;
}

void HermitianEigen(std::span<const cplx> a, int n, std::span<double> values,
                    std::span<cplx> vectors, std::span<cplx> work) {
  assert(a.size() >= size_t(n) * n && values.size() >= size_t(n) &&
         vectors.size() >= size_t(n) * n && work.size() >= size_t(n) * n);
  cplx* w = work.data();
  cplx* v = vectors.data();
  double scale = 0.0;
  for (int i = 0; i < n; ++i) {
    w[i * n + i] = a[i * n + i].real();
    for (int j = i + 1; j < n; ++j) {
      w[i * n + j] = a[i * n + j];
      w[j * n + i] = std::conj(a[i * n + j]);
    }
  }
  for (int i = 0; i < n * n; ++i) scale += std::norm(w[i]);
  for (int i = 0; i < n; ++i)
    for (int j = 0; j < n; ++j) v[i * n + j] = i == j ? 1.0 : 0.0;

  const double tol = 1e-30 * scale;
  for (int sweep = 0; sweep < 60; ++sweep) {
    double off = 0.0;
    for (int p = 0; p < n; ++p)
      for (int q = p + 1; q < n; ++q) off += std::norm(w[p * n + q]);
    if (off <= tol) break;
    for (int p = 0; p < n; ++p) {
      for (int q = p + 1; q < n; ++q) {
        const cplx apq = w[p * n + q];
        const double mag = std::abs(apq);
        if (mag == 0.0) continue;
        // Phase rotation makes the pivot real, then a real Givens rotation
        // zeroes it: U = diag(1, e^{-i phi}) [[c, -s], [s, c]].
        const cplx ph = std::conj(apq) / mag;
        const double theta =
            0.5 * std::atan2(2.0 * mag, w[p * n + p].real() - w[q * n + q].real());
        const double c = std::cos(theta), s = std::sin(theta);
        const cplx upp = c, upq = -s, uqp = ph * s, uqq = ph * c;
        for (int i = 0; i < n; ++i) {
          const cplx xp = w[i * n + p], xq = w[i * n + q];
          w[i * n + p] = xp * upp + xq * uqp;
          w[i * n + q] = xp * upq + xq * uqq;
          const cplx vp = v[i * n + p], vq = v[i * n + q];
          v[i * n + p] = vp * upp + vq * uqp;
          v[i * n + q] = vp * upq + vq * uqq;
        }
        for (int j = 0; j < n; ++j) {
          const cplx xp = w[p * n + j], xq = w[q * n + j];
          w[p * n + j] = std::conj(upp) * xp + std::conj(uqp) * xq;
          w[q * n + j] = std::conj(upq) * xp + std::conj(uqq) * xq;
        }
        w[p * n + q] = w[q * n + p] = 0.0;
        w[p * n + p] = w[p * n + p].real();
        w[q * n + q] = w[q * n + q].real();
      }
    }
  }
  // Insertion sort, ascending, carrying the eigenvector columns.
  for (int i = 0; i < n; ++i) values[i] = w[i * n + i].real();
  for (int i = 1; i < n; ++i) {
    for (int j = i; j > 0 && values[j - 1] > values[j]; --j) {
      std::swap(values[j - 1], values[j]);
      for (int r = 0; r < n; ++r) std::swap(v[r * n + j - 1], v[r * n + j]);
    }
  }
}

std::vector<double> HermitianEigenvalues(const CMat& a) {
  if (!a.square()) throw Error(ErrorCode::kInvalidArgument, "eigenvalues of a non-square matrix");
  const int n = a.rows();
  std::vector<double> values(n);
  std::vector<cplx> vectors(size_t(n) * n), work(size_t(n) * n);
  HermitianEigen(a.data(), n, values, vectors, work);
  return values;
}

CMat HermSolve(const CMat& a, const CMat& b, double loading) {
  if (!a.square() || a.rows() != b.rows())
    throw Error(ErrorCode::kInvalidArgument, "herm_solve shape mismatch");
  if (loading < 0.0)
    throw Error(ErrorCode::kInvalidArgument, "loading must be non-negative");
  const int n = a.rows();
  std::vector<cplx> lu(a.data().begin(), a.data().end());
  CMat x = b;
  std::vector<int> pivots(n);
  if (!SolveInPlace(lu, n, x.data(), b.cols(), loading, pivots))
    throw Error(ErrorCode::kSingularMatrix, "matrix is numerically singular");
  return x;
}

CMat Inverse(const CMat& a, double loading) {
  return HermSolve(a, CMat::Identity(a.rows()), loading);
}

}  // namespace dpse

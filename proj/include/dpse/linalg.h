// SPDX-License-Identifier: Apache-2.0
//
// Small dense complex matrices (M, MK <= 64). Everything here is pure and
// operates on caller-owned storage, so it is safe to call from any thread.

#ifndef DPSE_LINALG_H_
#define DPSE_LINALG_H_

#include <complex>
#include <span>
#include <vector>

namespace dpse {

using cplx = std::complex<double>;

// Row-major dense complex matrix with dimensions fixed at construction.
class CMat {
 public:
  CMat() = default;
  CMat(int rows, int cols);
  CMat(int rows, int cols, std::span<const cplx> values);

  static CMat Identity(int n);
  static CMat Zero(int rows, int cols) { return CMat(rows, cols); }
  static CMat Column(std::span<const cplx> values);

  int rows() const { return rows_; }
  int cols() const { return cols_; }
  bool square() const { return rows_ == cols_; }

  cplx& operator()(int r, int c) { return data_[r * cols_ + c]; }
  const cplx& operator()(int r, int c) const { return data_[r * cols_ + c]; }

  std::span<cplx> data() { return data_; }
  std::span<const cplx> data() const { return data_; }
  std::span<cplx> row(int r) { return {data_.data() + r * cols_, size_t(cols_)}; }
  std::span<const cplx> row(int r) const {
    return {data_.data() + r * cols_, size_t(cols_)};
  }

  CMat& operator+=(const CMat& other);
  CMat& operator-=(const CMat& other);
  CMat& operator*=(cplx s);

 private:
  int rows_ = 0;
  int cols_ = 0;
  std::vector<cplx> data_;
};

CMat operator+(CMat a, const CMat& b);
CMat operator-(CMat a, const CMat& b);
CMat operator*(const CMat& a, const CMat& b);
CMat operator*(cplx s, CMat a);

CMat Adjoint(const CMat& a);
// (A + A^H) / 2.
CMat Hermitianize(const CMat& a);
cplx Trace(const CMat& a);
// x y^H.
CMat Outer(std::span<const cplx> x, std::span<const cplx> y);
double MaxAbs(const CMat& a);
double MaxAbsDiff(const CMat& a, const CMat& b);
double FrobeniusNorm(const CMat& a);

// Solves (A + loading * mean(|diag A|) * I) X = B by LU with partial
// pivoting. A need only be square; Hermitian inputs are the common case.
// Throws Error(kSingularMatrix) when the loaded matrix is numerically
// singular (pivot-ratio condition estimate above 1e12).
CMat HermSolve(const CMat& a, const CMat& b, double loading);
CMat Inverse(const CMat& a, double loading = 0.0);

// Allocation-free kernel behind HermSolve. `a` (n x n) is overwritten by its
// LU factors and `b` (n x nrhs, row-major) by the solution; `pivots` needs n
// entries. Returns false instead of throwing when singular.
bool SolveInPlace(std::span<cplx> a, int n, std::span<cplx> b, int nrhs,
                  double loading, std::span<int> pivots);

// Cyclic Jacobi eigendecomposition of a Hermitian n x n matrix (only the
// upper triangle is read). `values` receives n ascending eigenvalues,
// `vectors` (n x n, row-major) the matching eigenvectors as columns, and
// `work` needs n * n entries. Allocation-free.
void HermitianEigen(std::span<const cplx> a, int n, std::span<double> values,
                    std::span<cplx> vectors, std::span<cplx> work);
std::vector<double> HermitianEigenvalues(const CMat& a);

// Largest pivot-ratio condition estimate accepted by the solvers.
inline constexpr double kMaxCondition = 1e12;

}  // namespace dpse

#endif  // DPSE_LINALG_H_

// SPDX-License-Identifier: Apache-2.0

#include "dpse/linalg.h"

#include "doctest.h"
#include "dpse/error.h"
#include "test_util.h"

namespace dpse {
namespace {

using testing::RandMat;
using testing::RandPd;

// Textbook Gauss-Jordan elimination without pivoting, fine for PD inputs.
CMat EliminationSolve(CMat a, CMat b) {
  const int n = a.rows();
  for (int k = 0; k < n; ++k) {
    const cplx piv = a(k, k);
    for (int j = 0; j < n; ++j) a(k, j) /= piv;
    for (int j = 0; j < b.cols(); ++j) b(k, j) /= piv;
    for (int i = 0; i < n; ++i) {
      if (i == k) continue;
      const cplx fac = a(i, k);
      for (int j = 0; j < n; ++j) a(i, j) -= fac * a(k, j);
      for (int j = 0; j < b.cols(); ++j) b(i, j) -= fac * b(k, j);
    }
  }
  return b;
}

double RelErr(const CMat& x, const CMat& ref) { return MaxAbsDiff(x, ref) / MaxAbs(ref); }

TEST_CASE("solve with trivial systems") {
  CMat e2(3, 1);
  e2(1, 0) = 1.0;
  CHECK(MaxAbsDiff(HermSolve(CMat::Identity(3), e2, 0.0), e2) == 0.0);

  CMat ones(2, 1);
  ones(0, 0) = ones(1, 0) = 1.0;
  const CMat x = HermSolve(2.0 * CMat::Identity(2), ones, 0.0);
  CHECK(x(0, 0) == cplx(0.5));
  CHECK(x(1, 0) == cplx(0.5));
}

TEST_CASE("solve matches an elimination oracle") {
  std::mt19937_64 rng(42);
  for (int trial = 0; trial < 20; ++trial) {
    const CMat a = RandPd(5, rng);
    const CMat b = RandMat(5, 1, rng);
    CHECK(RelErr(HermSolve(a, b, 0.0), EliminationSolve(a, b)) < 1e-8);
  }
}

TEST_CASE("solve recovers x for every size up to ten") {
  std::mt19937_64 rng(7);
  for (int n = 1; n <= 10; ++n) {
    const CMat a = RandPd(n, rng);
    const CMat x = RandMat(n, 3, rng);
    CHECK(RelErr(HermSolve(a, a * x, 0.0), x) < 1e-8);
  }
}

TEST_CASE("loading is relative to the mean diagonal") {
  std::mt19937_64 rng(3);
  const CMat a = RandPd(4, rng);
  const CMat b = RandMat(4, 2, rng);
  double mean_diag = 0.0;
  for (int i = 0; i < 4; ++i) mean_diag += std::abs(a(i, i));
  mean_diag /= 4;
  const CMat loaded = a + (0.3 * mean_diag) * CMat::Identity(4);
  const CMat x = HermSolve(a, b, 0.3);
  CHECK(MaxAbsDiff(loaded * x, b) < 1e-10 * MaxAbs(b));
  // Same answer at a different signal level.
  const CMat y = HermSolve(1e6 * a, 1e6 * b, 0.3);
  CHECK(RelErr(y, x) < 1e-10);
}

TEST_CASE("singular systems are reported") {
  CMat a(2, 2);
  a(0, 0) = a(0, 1) = a(1, 0) = a(1, 1) = 1.0;
  CMat b(2, 1);
  b(0, 0) = 1.0;
  try {
    HermSolve(a, b, 0.0);
    FAIL("expected SingularMatrix");
  } catch (const Error& e) {
    CHECK(e.code() == ErrorCode::kSingularMatrix);
  }
  CHECK_THROWS_AS(Inverse(CMat(3, 3)), Error);
  CMat near = CMat::Identity(2);
  near(1, 1) = 1e-14;
  CHECK_THROWS_AS(Inverse(near), Error);
  // Loading rescues it.
  CHECK_NOTHROW(Inverse(a, 1e-6));
}

TEST_CASE("inverse round trip") {
  std::mt19937_64 rng(9);
  const CMat a = RandMat(6, 6, rng);
  CHECK(MaxAbsDiff(a * Inverse(a), CMat::Identity(6)) < 1e-10);
}

TEST_CASE("hermitianize") {
  CMat a(2, 2);
  a(0, 1) = 1.0;
  const CMat h = Hermitianize(a);
  CHECK(h(0, 0) == cplx(0.0));
  CHECK(h(0, 1) == cplx(0.5));
  CHECK(h(1, 0) == cplx(0.5));
  CHECK(h(1, 1) == cplx(0.0));

  std::mt19937_64 rng(1);
  for (int n = 1; n <= 8; ++n) {
    const CMat r = RandMat(n, n, rng);
    const CMat s = Hermitianize(r);
    CHECK(MaxAbsDiff(s, Adjoint(s)) == 0.0);
    CHECK(MaxAbsDiff(Hermitianize(s), s) == 0.0);
    const CMat pd = testing::RandPd(n, rng);
    CHECK(MaxAbsDiff(Hermitianize(pd), pd) == 0.0);
  }
}

TEST_CASE("small helpers") {
  const std::vector<cplx> x{{1, 1}, {0, 2}};
  const std::vector<cplx> y{{2, 0}, {1, -1}};
  const CMat o = Outer(x, y);
  CHECK(o(0, 1) == x[0] * std::conj(y[1]));
  CHECK(o(1, 0) == x[1] * std::conj(y[0]));
  CHECK(Trace(CMat::Identity(4)) == cplx(4.0));
  CHECK(FrobeniusNorm(CMat::Identity(4)) == doctest::Approx(2.0));
  CHECK_THROWS_AS(CMat(2, 2) * CMat(3, 3), Error);
}

TEST_CASE("hermitian eigen matches a reference solver") {
  std::mt19937_64 rng(17);
  for (int n = 1; n <= 8; ++n) {
    CMat a = Hermitianize(RandMat(n, n, rng));
    std::vector<double> vals(n);
    std::vector<cplx> vecs(n * n), work(n * n);
    HermitianEigen(a.data(), n, vals, vecs, work);
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXcd> es(testing::ToEigen(a));
    for (int i = 0; i < n; ++i) CHECK(vals[i] == doctest::Approx(es.eigenvalues()(i)).epsilon(1e-10));
    // A V = V diag(vals), V unitary.
    const CMat v(n, n, vecs);
    CMat d = CMat::Zero(n, n);
    for (int i = 0; i < n; ++i) d(i, i) = vals[i];
    CHECK(MaxAbsDiff(a * v, v * d) <= 1e-10 * (1.0 + MaxAbs(a)));
    CHECK(MaxAbsDiff(Adjoint(v) * v, CMat::Identity(n)) <= 1e-12);
  }
}

TEST_CASE("hermitian eigen of diagonal and indefinite inputs") {
  CMat a = CMat::Zero(3, 3);
  a(0, 0) = 3.0;
  a(1, 1) = -1.0;
  a(2, 2) = 2.0;
  const auto v = HermitianEigenvalues(a);
  CHECK(v == std::vector<double>{-1.0, 2.0, 3.0});
  CMat b(2, 2);
  b(0, 1) = cplx(0, 1);
  b(1, 0) = cplx(0, -1);
  const auto w = HermitianEigenvalues(b);
  CHECK(w[0] == doctest::Approx(-1.0));
  CHECK(w[1] == doctest::Approx(1.0));
}

}  // namespace
}  // namespace dpse

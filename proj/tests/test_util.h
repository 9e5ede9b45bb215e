// SPDX-License-Identifier: Apache-2.0

#ifndef DPSE_TESTS_TEST_UTIL_H_
#define DPSE_TESTS_TEST_UTIL_H_

#include <Eigen/Dense>
#include <random>

#include "dpse/linalg.h"
#include "dpse/stft.h"

namespace dpse::testing {

inline cplx RandC(std::mt19937_64& rng) {
  std::normal_distribution<double> n(0.0, std::sqrt(0.5));
  return {n(rng), n(rng)};
}

inline CMat RandMat(int r, int c, std::mt19937_64& rng) {
  CMat a(r, c);
  for (auto& v : a.data()) v = RandC(rng);
  return a;
}

inline CMat RandPd(int n, std::mt19937_64& rng) {
  CMat b = RandMat(n, n, rng);
  return Hermitianize(b * Adjoint(b) + 0.1 * CMat::Identity(n));
}

inline SpectrogramBlock RandBlock(int bins, int frames, int channels, std::mt19937_64& rng) {
  SpectrogramBlock b(bins, frames, channels);
  for (auto& v : b.data()) v = RandC(rng);
  return b;
}

inline Eigen::MatrixXcd ToEigen(const CMat& a) {
  Eigen::MatrixXcd e(a.rows(), a.cols());
  for (int i = 0; i < a.rows(); ++i)
    for (int j = 0; j < a.cols(); ++j) e(i, j) = a(i, j);
  return e;
}

inline double MinEig(const CMat& a) {
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXcd> es(ToEigen(Hermitianize(a)));
  return es.eigenvalues().minCoeff();
}

inline double TraceRe(const CMat& a) { return Trace(a).real(); }

}  // namespace dpse::testing

#endif  // DPSE_TESTS_TEST_UTIL_H_

// SPDX-License-Identifier: Apache-2.0
//
// AVX2/FMA variants. One __m256d holds two interleaved complex doubles
// [re0, im0, re1, im1]. Built with -mavx2 -mfma; only reached after a CPUID
// check in kernels.cc.

#include "dpse/kernels.h"

#if defined(__AVX2__) && defined(__FMA__)

#include <immintrin.h>

namespace dpse::kernels {
namespace {

inline __m256d Load(const cplx* p) {
  return _mm256_loadu_pd(reinterpret_cast<const double*>(p));
}
inline void Store(cplx* p, __m256d v) {
  _mm256_storeu_pd(reinterpret_cast<double*>(p), v);
}
inline __m256d Swap(__m256d v) { return _mm256_permute_pd(v, 0x5); }
inline __m256d Conj(__m256d v) {
  return _mm256_xor_pd(v, _mm256_setr_pd(0.0, -0.0, 0.0, -0.0));
}
// v * s for a broadcast complex scalar s = (sr, si).
inline __m256d MulScalar(__m256d v, __m256d sr, __m256d si) {
  return _mm256_fmaddsub_pd(v, sr, _mm256_mul_pd(Swap(v), si));
}
inline double Hsum(__m256d v) {
  __m128d lo = _mm256_castpd256_pd128(v);
  __m128d hi = _mm256_extractf128_pd(v, 1);
  lo = _mm_add_pd(lo, hi);
  return _mm_cvtsd_f64(_mm_add_sd(lo, _mm_unpackhi_pd(lo, lo)));
}
// Sums the two complex lanes of v.
inline cplx HsumComplex(__m256d v) {
  __m128d lo = _mm256_castpd256_pd128(v);
  __m128d hi = _mm256_extractf128_pd(v, 1);
  __m128d s = _mm_add_pd(lo, hi);
  return {_mm_cvtsd_f64(s), _mm_cvtsd_f64(_mm_unpackhi_pd(s, s))};
}

// Accumulates sum a_i * b_i (no conjugation) with two partial sums:
// p1 = a * re(b), p2 = swap(a) * im(b).
inline cplx FinishProduct(__m256d p1, __m256d p2) {
  // re = ar br - ai bi, im = ai br + ar bi
  const __m256d v = _mm256_addsub_pd(p1, p2);
  return HsumComplex(v);
}

void CgemvAvx2(const cplx* a, const cplx* x, cplx* y, int rows, int cols) {
  const int pairs = cols / 2;
  for (int i = 0; i < rows; ++i) {
    const cplx* row = a + size_t(i) * cols;
    __m256d p1 = _mm256_setzero_pd();
    __m256d p2 = _mm256_setzero_pd();
    for (int j = 0; j < pairs; ++j) {
      const __m256d av = Load(row + 2 * j);
      const __m256d xv = Load(x + 2 * j);
      p1 = _mm256_fmadd_pd(av, _mm256_movedup_pd(xv), p1);
      p2 = _mm256_fmadd_pd(Swap(av), _mm256_permute_pd(xv, 0xF), p2);
    }
    cplx acc = FinishProduct(p1, p2);
    for (int j = 2 * pairs; j < cols; ++j) acc += row[j] * x[j];
    y[i] = acc;
  }
}

void CgemvAdjAvx2(const cplx* a, const cplx* x, cplx* y, int rows, int cols) {
  const int pairs = cols / 2;
  for (int j = 0; j < cols; ++j) y[j] = 0.0;
  for (int i = 0; i < rows; ++i) {
    const cplx* row = a + size_t(i) * cols;
    const __m256d xr = _mm256_set1_pd(x[i].real());
    const __m256d xi = _mm256_set1_pd(x[i].imag());
    for (int j = 0; j < pairs; ++j) {
      const __m256d prod = MulScalar(Conj(Load(row + 2 * j)), xr, xi);
      Store(y + 2 * j, _mm256_add_pd(Load(y + 2 * j), prod));
    }
    for (int j = 2 * pairs; j < cols; ++j) y[j] += std::conj(row[j]) * x[i];
  }
}

void CgerScaledAvx2(cplx* a, const cplx* x, const cplx* y, int rows, int cols,
                    cplx beta, double scale) {
  const int pairs = cols / 2;
  const __m256d sv = _mm256_set1_pd(scale);
  for (int i = 0; i < rows; ++i) {
    cplx* row = a + size_t(i) * cols;
    const cplx bx = beta * x[i];
    const __m256d br = _mm256_set1_pd(bx.real());
    const __m256d bi = _mm256_set1_pd(bx.imag());
    for (int j = 0; j < pairs; ++j) {
      const __m256d upd = MulScalar(Conj(Load(y + 2 * j)), br, bi);
      Store(row + 2 * j, _mm256_mul_pd(sv, _mm256_add_pd(Load(row + 2 * j), upd)));
    }
    for (int j = 2 * pairs; j < cols; ++j) row[j] = scale * (row[j] + bx * std::conj(y[j]));
  }
}

cplx CdotcAvx2(const cplx* a, const cplx* b, int n) {
  // conj(a) b: re = ar br + ai bi, im = ar bi - ai br.
  // p1 = b * re(a) = [ar br, ar bi], p2 = swap(b) * im(a) = [ai bi, ai br].
  const int pairs = n / 2;
  __m256d p1 = _mm256_setzero_pd();
  __m256d p2 = _mm256_setzero_pd();
  for (int i = 0; i < pairs; ++i) {
    const __m256d av = Load(a + 2 * i);
    const __m256d bv = Load(b + 2 * i);
    p1 = _mm256_fmadd_pd(bv, _mm256_movedup_pd(av), p1);
    p2 = _mm256_fmadd_pd(Swap(bv), _mm256_permute_pd(av, 0xF), p2);
  }
  // even lanes: p1 + p2, odd lanes: p1 - p2
  const __m256d v = _mm256_add_pd(p1, _mm256_xor_pd(p2, _mm256_setr_pd(0.0, -0.0, 0.0, -0.0)));
  cplx acc = HsumComplex(v);
  for (int i = 2 * pairs; i < n; ++i) acc += std::conj(a[i]) * b[i];
  return acc;
}

cplx WcdotcAvx2(const cplx* a, const cplx* b, const double* w, int n) {
  const int pairs = n / 2;
  __m256d p1 = _mm256_setzero_pd();
  __m256d p2 = _mm256_setzero_pd();
  for (int i = 0; i < pairs; ++i) {
    const __m128d w2 = _mm_loadu_pd(w + 2 * i);
    const __m256d wv = _mm256_permute4x64_pd(_mm256_castpd128_pd256(w2), 0x50);
    const __m256d av = _mm256_mul_pd(Load(a + 2 * i), wv);
    const __m256d bv = Load(b + 2 * i);
    p1 = _mm256_fmadd_pd(bv, _mm256_movedup_pd(av), p1);
    p2 = _mm256_fmadd_pd(Swap(bv), _mm256_permute_pd(av, 0xF), p2);
  }
  const __m256d v = _mm256_add_pd(p1, _mm256_xor_pd(p2, _mm256_setr_pd(0.0, -0.0, 0.0, -0.0)));
  cplx acc = HsumComplex(v);
  for (int i = 2 * pairs; i < n; ++i) acc += w[i] * (std::conj(a[i]) * b[i]);
  return acc;
}

void CaxpyAvx2(cplx alpha, const cplx* x, cplx* y, int n) {
  const int pairs = n / 2;
  const __m256d ar = _mm256_set1_pd(alpha.real());
  const __m256d ai = _mm256_set1_pd(alpha.imag());
  for (int i = 0; i < pairs; ++i) {
    Store(y + 2 * i, _mm256_add_pd(Load(y + 2 * i), MulScalar(Load(x + 2 * i), ar, ai)));
  }
  for (int i = 2 * pairs; i < n; ++i) y[i] += alpha * x[i];
}

void Cabs2Avx2(const cplx* y, double* p, int n) {
  const int quads = n / 4;
  for (int i = 0; i < quads; ++i) {
    const __m256d v0 = Load(y + 4 * i);
    const __m256d v1 = Load(y + 4 * i + 2);
    const __m256d h = _mm256_hadd_pd(_mm256_mul_pd(v0, v0), _mm256_mul_pd(v1, v1));
    _mm256_storeu_pd(p + 4 * i, _mm256_permute4x64_pd(h, 0xD8));
  }
  for (int i = 4 * quads; i < n; ++i) p[i] = std::norm(y[i]);
}

double DdotAvx2(const double* a, const double* b, int n) {
  const int quads = n / 4;
  __m256d acc = _mm256_setzero_pd();
  for (int i = 0; i < quads; ++i)
    acc = _mm256_fmadd_pd(_mm256_loadu_pd(a + 4 * i), _mm256_loadu_pd(b + 4 * i), acc);
  double s = Hsum(acc);
  for (int i = 4 * quads; i < n; ++i) s += a[i] * b[i];
  return s;
}

void DaxpyAvx2(double alpha, const double* x, double* y, int n) {
  const int quads = n / 4;
  const __m256d av = _mm256_set1_pd(alpha);
  for (int i = 0; i < quads; ++i) {
    _mm256_storeu_pd(y + 4 * i, _mm256_fmadd_pd(av, _mm256_loadu_pd(x + 4 * i),
                                                 _mm256_loadu_pd(y + 4 * i)));
  }
  for (int i = 4 * quads; i < n; ++i) y[i] += alpha * x[i];
}

void RecipRatioAvx2(const double* power, const double* model, double* inv,
                    double* ratio, int n) {
  const int quads = n / 4;
  const __m256d one = _mm256_set1_pd(1.0);
  for (int i = 0; i < quads; ++i) {
    const __m256d r = _mm256_div_pd(one, _mm256_loadu_pd(model + 4 * i));
    _mm256_storeu_pd(inv + 4 * i, r);
    _mm256_storeu_pd(ratio + 4 * i,
                     _mm256_mul_pd(_mm256_mul_pd(_mm256_loadu_pd(power + 4 * i), r), r));
  }
  for (int i = 4 * quads; i < n; ++i) {
    const double r = 1.0 / model[i];
    inv[i] = r;
    ratio[i] = power[i] * r * r;
  }
}

}  // namespace

const KernelTable* Avx2Table() {
  static const KernelTable table{
      "avx2",     CgemvAvx2,  CgemvAdjAvx2, CgerScaledAvx2,
      CdotcAvx2,  WcdotcAvx2, CaxpyAvx2,    Cabs2Avx2,
      DdotAvx2,   DaxpyAvx2,  RecipRatioAvx2,
  };
  return &table;
}

}  // namespace dpse::kernels

#else

namespace dpse::kernels {
const KernelTable* Avx2Table() { return nullptr; }
}  // namespace dpse::kernels

#endif

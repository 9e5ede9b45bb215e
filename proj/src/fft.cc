// SPDX-License-Identifier: Apache-2.0

#include "dpse/fft.h"

#include <fftw3.h>

#include <algorithm>
#include <cstring>
#include <mutex>

#include "dpse/error.h"

namespace dpse {
namespace {

std::mutex& PlannerMutex() {
  static std::mutex mu;
  return mu;
}

struct FftwFree {
  void operator()(void* p) const { fftw_free(p); }
};

}  // namespace

struct RealFft::Plans {
  fftw_plan forward = nullptr;
  fftw_plan inverse = nullptr;
  int n = 0;
  // c2r transforms clobber their input, so both directions run on scratch.
  std::unique_ptr<double, FftwFree> real;
  std::unique_ptr<fftw_complex, FftwFree> spec;

  ~Plans() {
    std::lock_guard<std::mutex> lock(PlannerMutex());
    if (forward) fftw_destroy_plan(forward);
    if (inverse) fftw_destroy_plan(inverse);
  }
};

RealFft::RealFft(int n) : n_(n), plans_(std::make_unique<Plans>()) {
  if (n < 2 || n % 2 != 0)
    throw Error(ErrorCode::kInvalidArgument, "FFT size must be even and >= 2");
  plans_->n = n;
  plans_->real.reset(fftw_alloc_real(n));
  plans_->spec.reset(fftw_alloc_complex(n / 2 + 1));
  double* real = plans_->real.get();
  fftw_complex* spec = plans_->spec.get();
  std::lock_guard<std::mutex> lock(PlannerMutex());
  plans_->forward = fftw_plan_dft_r2c_1d(n, real, spec, FFTW_ESTIMATE);
  plans_->inverse = fftw_plan_dft_c2r_1d(n, spec, real, FFTW_ESTIMATE);
  if (!plans_->forward || !plans_->inverse)
    throw Error(ErrorCode::kInvalidArgument, "FFTW planning failed");
}

RealFft::~RealFft() = default;
RealFft::RealFft(RealFft&&) noexcept = default;
RealFft& RealFft::operator=(RealFft&&) noexcept = default;

void RealFft::Forward(std::span<const double> in,
                      std::span<std::complex<double>> out) {
  std::copy(in.begin(), in.begin() + n_, plans_->real.get());
  fftw_execute(plans_->forward);
  std::memcpy(static_cast<void*>(out.data()), plans_->spec.get(), sizeof(fftw_complex) * bins());
}

void RealFft::Inverse(std::span<const std::complex<double>> in,
                      std::span<double> out) {
  std::memcpy(plans_->spec.get(), in.data(), sizeof(fftw_complex) * bins());
  fftw_execute(plans_->inverse);
  const double scale = 1.0 / n_;
  const double* real = plans_->real.get();
  for (int i = 0; i < n_; ++i) out[i] = real[i] * scale;
}

std::vector<double> FftConvolve(std::span<const double> x, std::span<const double> h) {
  if (x.empty() || h.empty()) return {};
  const size_t out_len = x.size() + h.size() - 1;
  size_t n = 256;
  while (n < 2 * h.size()) n *= 2;
  const size_t seg = n - h.size() + 1;
  RealFft fft{int(n)};
  std::vector<double> buf(n, 0.0);
  std::copy(h.begin(), h.end(), buf.begin());
  std::vector<std::complex<double>> hspec(fft.bins()), xspec(fft.bins());
  fft.Forward(buf, hspec);
  std::vector<double> out(out_len, 0.0);
  for (size_t start = 0; start < x.size(); start += seg) {
    const size_t len = std::min(seg, x.size() - start);
    std::fill(buf.begin(), buf.end(), 0.0);
    std::copy(x.begin() + start, x.begin() + start + len, buf.begin());
    fft.Forward(buf, xspec);
    for (int k = 0; k < fft.bins(); ++k) xspec[k] *= hspec[k];
    fft.Inverse(xspec, buf);
    const size_t valid = std::min(n, out_len - start);
    for (size_t i = 0; i < valid; ++i) out[start + i] += buf[i];
  }
  return out;
}

}  // namespace dpse

// SPDX-License-Identifier: Apache-2.0

#ifndef DPSE_FFT_H_
#define DPSE_FFT_H_

#include <complex>
#include <memory>
#include <span>
#include <vector>

namespace dpse {

// Real-input FFT of fixed size n (FFTW-backed). Forward produces n/2+1 bins;
// Inverse is normalized, so Inverse(Forward(x)) == x. Instances own their
// scratch buffers and are single-owner; plan creation is serialized
// internally so distinct instances may be used from different threads.
class RealFft {
 public:
  explicit RealFft(int n);
  ~RealFft();
  RealFft(const RealFft&) = delete;
  RealFft& operator=(const RealFft&) = delete;
  RealFft(RealFft&&) noexcept;
  RealFft& operator=(RealFft&&) noexcept;

  int size() const { return n_; }
  int bins() const { return n_ / 2 + 1; }

  void Forward(std::span<const double> in, std::span<std::complex<double>> out);
  void Inverse(std::span<const std::complex<double>> in, std::span<double> out);

 private:
  struct Plans;
  int n_ = 0;
  std::unique_ptr<Plans> plans_;
};

// Linear convolution of x with h via FFT overlap-add; output length
// x.size() + h.size() - 1.
std::vector<double> FftConvolve(std::span<const double> x, std::span<const double> h);

}  // namespace dpse

#endif  // DPSE_FFT_H_

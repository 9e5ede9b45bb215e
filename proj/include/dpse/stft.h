// SPDX-License-Identifier: Apache-2.0
//
// Multichannel STFT analysis and weighted overlap-add synthesis. Frame t
// covers samples [t * hop, t * hop + fft_size); analysis uses a periodic Hann
// window and synthesis uses the same window scaled so that the pair satisfies
// the constant-overlap-add condition.

#ifndef DPSE_STFT_H_
#define DPSE_STFT_H_

#include <complex>
#include <cstdint>
#include <span>
#include <vector>

#include "dpse/fft.h"

namespace dpse {

using cplx = std::complex<double>;

struct StftConfig {
  int fft_size = 1024;
  int hop = 256;
  double sample_rate = 16000.0;

  int num_bins() const { return fft_size / 2 + 1; }
  double hop_seconds() const { return hop / sample_rate; }
  // Throws Error(kInvalidArgument) unless hop divides fft_size and the
  // overlap is one the synthesis window can normalize.
  void Validate() const;
};

std::vector<double> AnalysisWindow(const StftConfig& cfg);
std::vector<double> SynthesisWindow(const StftConfig& cfg);

// Complex tensor [F x T x M] for one processing block. Storage is
// bin-major: element (f, t, m) sits at (f * T + t) * M + m.
class SpectrogramBlock {
 public:
  SpectrogramBlock() = default;
  SpectrogramBlock(int bins, int frames, int channels, int64_t start_frame = 0);

  int bins() const { return bins_; }
  int frames() const { return frames_; }
  int channels() const { return channels_; }
  int64_t start_frame() const { return start_frame_; }

  cplx& at(int f, int t, int m) { return data_[(size_t(f) * frames_ + t) * channels_ + m]; }
  const cplx& at(int f, int t, int m) const {
    return data_[(size_t(f) * frames_ + t) * channels_ + m];
  }
  // The M-vector x_ft.
  std::span<cplx> vec(int f, int t) {
    return {data_.data() + (size_t(f) * frames_ + t) * channels_, size_t(channels_)};
  }
  std::span<const cplx> vec(int f, int t) const {
    return {data_.data() + (size_t(f) * frames_ + t) * channels_, size_t(channels_)};
  }
  std::span<cplx> data() { return data_; }
  std::span<const cplx> data() const { return data_; }

 private:
  int bins_ = 0;
  int frames_ = 0;
  int channels_ = 0;
  int64_t start_frame_ = 0;
  std::vector<cplx> data_;
};

// Multichannel frame laid out [F x M]: element (f, m) at f * M + m.
using FrameBuffer = std::vector<cplx>;

// Streaming analyzer: feed one hop of samples per channel, get a frame once a
// full window is buffered.
class StftAnalyzer {
 public:
  StftAnalyzer(const StftConfig& cfg, int channels);

  // `hop_samples` is channel-major: channels() spans of hop samples each.
  // Returns true and fills `frame` ([F x M]) when a frame is complete.
  bool PushHop(std::span<const std::span<const double>> hop_samples, std::span<cplx> frame);

  int channels() const { return channels_; }
  const StftConfig& config() const { return cfg_; }

 private:
  StftConfig cfg_;
  int channels_;
  RealFft fft_;
  std::vector<double> window_;
  std::vector<std::vector<double>> history_;  // per channel, fft_size samples
  int filled_ = 0;
  std::vector<double> scratch_;
  std::vector<cplx> spectrum_;
};

// Streaming weighted overlap-add. After pushing frame t, the hop of samples
// starting at t * hop is final and is returned.
class StftSynthesizer {
 public:
  explicit StftSynthesizer(const StftConfig& cfg);

  // `frame` holds F one-sided bins; `out` receives hop samples.
  void PushFrame(std::span<const cplx> frame, std::span<double> out);
  // Remaining fft_size - hop partially overlapped samples.
  std::vector<double> Flush() const;

 private:
  StftConfig cfg_;
  RealFft fft_;
  std::vector<double> window_;
  std::vector<double> accum_;
  std::vector<double> scratch_;
};

// Offline analysis of equal-length channels. Throws kChannelLengthMismatch
// or kInvalidArgument (shorter than one window).
SpectrogramBlock Analyze(const std::vector<std::vector<double>>& channels,
                         const StftConfig& cfg);

// Offline synthesis of T single-channel frames (each F bins) into `length`
// samples (0 means (T - 1) * hop + fft_size).
std::vector<double> Synthesize(const std::vector<std::vector<cplx>>& frames,
                               const StftConfig& cfg, size_t length = 0);

}  // namespace dpse

#endif  // DPSE_STFT_H_

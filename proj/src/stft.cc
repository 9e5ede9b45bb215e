// SPDX-License-Identifier: Apache-2.0

#include "dpse/stft.h"

#include <algorithm>
#include <cmath>
#include <numbers>

#include "dpse/error.h"

namespace dpse {

void StftConfig::Validate() const {
  if (fft_size < 4 || fft_size % 2 != 0)
    throw Error(ErrorCode::kInvalidArgument, "fft_size must be even and >= 4");
  if (hop <= 0 || fft_size % hop != 0 || hop > fft_size / 2)
    throw Error(ErrorCode::kInvalidArgument, "hop must divide fft_size and be <= fft_size/2");
  if (!(sample_rate > 0.0))
    throw Error(ErrorCode::kInvalidArgument, "sample_rate must be positive");
}

std::vector<double> AnalysisWindow(const StftConfig& cfg) {
  std::vector<double> w(cfg.fft_size);
  for (int n = 0; n < cfg.fft_size; ++n)
    w[n] = 0.5 - 0.5 * std::cos(2.0 * std::numbers::pi * n / cfg.fft_size);
  return w;
}

std::vector<double> SynthesisWindow(const StftConfig& cfg) {
  cfg.Validate();
  const std::vector<double> wa = AnalysisWindow(cfg);
  std::vector<double> norm(cfg.hop, 0.0);
  for (int n = 0; n < cfg.fft_size; ++n) norm[n % cfg.hop] += wa[n] * wa[n];
  std::vector<double> ws(cfg.fft_size);
  for (int n = 0; n < cfg.fft_size; ++n) ws[n] = wa[n] / norm[n % cfg.hop];
  return ws;
}

SpectrogramBlock::SpectrogramBlock(int bins, int frames, int channels, int64_t start_frame)
    : bins_(bins),
      frames_(frames),
      channels_(channels),
      start_frame_(start_frame),
      data_(size_t(bins) * size_t(frames) * size_t(channels)) {
  if (bins <= 0 || frames < 0 || channels <= 0)
    throw Error(ErrorCode::kInvalidArgument, "invalid spectrogram dimensions");
}

StftAnalyzer::StftAnalyzer(const StftConfig& cfg, int channels)
    : cfg_(cfg),
      channels_(channels),
      fft_(cfg.fft_size),
      window_(AnalysisWindow(cfg)),
      history_(channels, std::vector<double>(cfg.fft_size, 0.0)),
      scratch_(cfg.fft_size),
      spectrum_(cfg.num_bins()) {
  cfg.Validate();
  if (channels <= 0) throw Error(ErrorCode::kInvalidArgument, "need at least one channel");
}

bool StftAnalyzer::PushHop(std::span<const std::span<const double>> hop_samples,
                           std::span<cplx> frame) {
  if (int(hop_samples.size()) != channels_)
    throw Error(ErrorCode::kChannelLengthMismatch, "channel count mismatch");
  const int n = cfg_.fft_size;
  const int hop = cfg_.hop;
  for (int m = 0; m < channels_; ++m) {
    if (int(hop_samples[m].size()) != hop)
      throw Error(ErrorCode::kChannelLengthMismatch, "each channel must supply one hop");
    auto& h = history_[m];
    std::copy(h.begin() + hop, h.end(), h.begin());
    std::copy(hop_samples[m].begin(), hop_samples[m].end(), h.end() - hop);
  }
  filled_ = std::min(filled_ + hop, n);
  if (filled_ < n) return false;

  const int bins = cfg_.num_bins();
  for (int m = 0; m < channels_; ++m) {
    const auto& h = history_[m];
    for (int i = 0; i < n; ++i) scratch_[i] = h[i] * window_[i];
    fft_.Forward(scratch_, spectrum_);
    for (int f = 0; f < bins; ++f) frame[size_t(f) * channels_ + m] = spectrum_[f];
  }
  return true;
}

StftSynthesizer::StftSynthesizer(const StftConfig& cfg)
    : cfg_(cfg),
      fft_(cfg.fft_size),
      window_(SynthesisWindow(cfg)),
      accum_(cfg.fft_size, 0.0),
      scratch_(cfg.fft_size) {}

void StftSynthesizer::PushFrame(std::span<const cplx> frame, std::span<double> out) {
  const int n = cfg_.fft_size;
  const int hop = cfg_.hop;
  fft_.Inverse(frame, scratch_);
  for (int i = 0; i < n; ++i) accum_[i] += scratch_[i] * window_[i];
  std::copy(accum_.begin(), accum_.begin() + hop, out.begin());
  std::copy(accum_.begin() + hop, accum_.end(), accum_.begin());
  std::fill(accum_.end() - hop, accum_.end(), 0.0);
}

std::vector<double> StftSynthesizer::Flush() const {
  return std::vector<double>(accum_.begin(), accum_.end() - cfg_.hop);
}

SpectrogramBlock Analyze(const std::vector<std::vector<double>>& channels,
                         const StftConfig& cfg) {
  cfg.Validate();
  if (channels.empty()) throw Error(ErrorCode::kInvalidArgument, "no channels");
  const size_t len = channels[0].size();
  for (const auto& ch : channels)
    if (ch.size() != len)
      throw Error(ErrorCode::kChannelLengthMismatch, "channels differ in length");
  if (len < size_t(cfg.fft_size))
    throw Error(ErrorCode::kInvalidArgument, "signal shorter than one analysis window");

  const int frames = int(1 + (len - cfg.fft_size) / cfg.hop);
  const int bins = cfg.num_bins();
  const int m_count = int(channels.size());
  SpectrogramBlock block(bins, frames, m_count, 0);
  RealFft fft(cfg.fft_size);
  const std::vector<double> window = AnalysisWindow(cfg);
  std::vector<double> seg(cfg.fft_size);
  std::vector<cplx> spec(bins);
  for (int m = 0; m < m_count; ++m) {
    for (int t = 0; t < frames; ++t) {
      const double* src = channels[m].data() + size_t(t) * cfg.hop;
      for (int i = 0; i < cfg.fft_size; ++i) seg[i] = src[i] * window[i];
      fft.Forward(seg, spec);
      for (int f = 0; f < bins; ++f) block.at(f, t, m) = spec[f];
    }
  }
  return block;
}

std::vector<double> Synthesize(const std::vector<std::vector<cplx>>& frames,
                               const StftConfig& cfg, size_t length) {
  cfg.Validate();
  const size_t natural =
      frames.empty() ? 0 : (frames.size() - 1) * cfg.hop + size_t(cfg.fft_size);
  if (length == 0) length = natural;
  std::vector<double> out(std::max(length, natural), 0.0);
  RealFft fft(cfg.fft_size);
  const std::vector<double> window = SynthesisWindow(cfg);
  std::vector<double> seg(cfg.fft_size);
  for (size_t t = 0; t < frames.size(); ++t) {
    if (int(frames[t].size()) != cfg.num_bins())
      throw Error(ErrorCode::kInvalidArgument, "frame has wrong bin count");
    fft.Inverse(frames[t], seg);
    double* dst = out.data() + t * cfg.hop;
    for (int i = 0; i < cfg.fft_size; ++i) dst[i] += seg[i] * window[i];
  }
  out.resize(length);
  return out;
}

}  // namespace dpse

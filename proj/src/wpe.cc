// SPDX-License-Identifier: Apache-2.0

#include "dpse/wpe.h"

#include <algorithm>
#include <cmath>

#include "dpse/error.h"
#include "dpse/kernels.h"

namespace dpse {

void WpeConfig::Validate() const {
  if (taps < 1) throw Error(ErrorCode::kInvalidArgument, "WPE taps must be >= 1");
  if (delay < 1) throw Error(ErrorCode::kInvalidArgument, "WPE delay must be >= 1");
  if (iterations < 1) throw Error(ErrorCode::kInvalidArgument, "WPE iterations must be >= 1");
  if (!(alpha > 0.0 && alpha <= 1.0))
    throw Error(ErrorCode::kInvalidArgument, "WPE alpha must lie in (0, 1]");
}

SpectrogramBlock OfflineWpe(const SpectrogramBlock& block, const WpeConfig& cfg) {
  cfg.Validate();
  const int frames = block.frames();
  const int m_count = block.channels();
  if (frames < cfg.delay + cfg.taps)
    throw Error(ErrorCode::kBlockTooShort, "block has fewer than delay + taps frames");
  const auto& k = kernels::Active();
  const int len = m_count * cfg.taps;

  double mean_power = 0.0;
  for (const cplx& v : block.data()) mean_power += std::norm(v);
  mean_power /= double(block.data().size());
  SpectrogramBlock out = block;
  if (mean_power == 0.0) return out;
  const double floor = 1e-10 * mean_power;

  std::vector<cplx> corr(size_t(len) * len), cross(size_t(len) * m_count);
  std::vector<cplx> stacked(size_t(frames) * len);
  std::vector<double> inv_power(frames);
  std::vector<int> pivots(len);
  std::vector<cplx> pred(m_count);

  for (int f = 0; f < block.bins(); ++f) {
    // Stacked delayed context per frame, zero before the block start.
    std::fill(stacked.begin(), stacked.end(), cplx(0.0));
    for (int t = 0; t < frames; ++t) {
      for (int tap = 0; tap < cfg.taps; ++tap) {
        const int src = t - cfg.delay - tap;
        if (src < 0) break;
        const auto x = block.vec(f, src);
        std::copy(x.begin(), x.end(), stacked.begin() + size_t(t) * len + tap * m_count);
      }
    }
    for (int iter = 0; iter < cfg.iterations; ++iter) {
      for (int t = 0; t < frames; ++t) {
        double p = 0.0;
        for (const cplx& v : out.vec(f, t)) p += std::norm(v);
        inv_power[t] = 1.0 / std::max(p / m_count, floor);
      }
      std::fill(corr.begin(), corr.end(), cplx(0.0));
      std::fill(cross.begin(), cross.end(), cplx(0.0));
      for (int t = cfg.delay; t < frames; ++t) {
        const cplx* xt = stacked.data() + size_t(t) * len;
        k.cger_scaled(corr.data(), xt, xt, len, len, inv_power[t], 1.0);
        k.cger_scaled(cross.data(), xt, block.vec(f, t).data(), len, m_count, inv_power[t], 1.0);
      }
      // A zero or degenerate bin keeps its input.
      if (!SolveInPlace(corr, len, cross, m_count, 1e-10, pivots)) break;
      for (int t = 0; t < frames; ++t) {
        k.cgemv_adj(cross.data(), stacked.data() + size_t(t) * len, pred.data(), len, m_count);
        const auto x = block.vec(f, t);
        auto y = out.vec(f, t);
        for (int m = 0; m < m_count; ++m) y[m] = x[m] - pred[m];
      }
    }
  }
  return out;
}

OnlineWpe::OnlineWpe(const WpeConfig& cfg, int bins, int channels)
    : cfg_(cfg),
      bins_(bins),
      channels_(channels),
      stacked_(channels * cfg.taps),
      ring_len_(cfg.delay + cfg.taps),
      rinv_(size_t(bins) * stacked_ * stacked_),
      filter_(size_t(bins) * stacked_ * channels),
      ring_(size_t(bins) * ring_len_ * channels),
      count_(bins),
      updates_(bins),
      phi_sum_(bins),
      last_phi_(bins),
      stacked_frame_(stacked_),
      gain_(stacked_),
      rx_(stacked_),
      err_(channels),
      pred_(channels) {
  cfg.Validate();
  if (cfg.alpha >= 1.0)
    throw Error(ErrorCode::kInvalidArgument, "online WPE needs alpha < 1");
  if (bins <= 0 || channels <= 0)
    throw Error(ErrorCode::kInvalidArgument, "invalid online WPE dimensions");
  Reset();
}

void OnlineWpe::Reset() {
  for (int f = 0; f < bins_; ++f) ResetBin(f);
}

void OnlineWpe::ResetBin(int f) {
  cplx* r = rinv_.data() + size_t(f) * stacked_ * stacked_;
  std::fill(r, r + stacked_ * stacked_, cplx(0.0));
  for (int i = 0; i < stacked_; ++i) r[i * stacked_ + i] = 1.0;
  cplx* h = filter_.data() + size_t(f) * stacked_ * channels_;
  std::fill(h, h + stacked_ * channels_, cplx(0.0));
  cplx* ring = ring_.data() + size_t(f) * ring_len_ * channels_;
  std::fill(ring, ring + ring_len_ * channels_, cplx(0.0));
  count_[f] = 0;
  updates_[f] = 0;
  phi_sum_[f] = 0.0;
  last_phi_[f] = 0.0;
}

bool OnlineWpe::Update(int f, const cplx* x, cplx* out) {
  const auto& k = kernels::Active();
  const int m_count = channels_;
  const int len = stacked_;
  const int64_t t = count_[f];
  cplx* ring = ring_.data() + size_t(f) * ring_len_ * m_count;
  std::copy(x, x + m_count, ring + (t % ring_len_) * m_count);
  count_[f] = t + 1;

  // Mean power over the newest `delay` frames, current frame included.
  double phi = 0.0;
  for (int d = 0; d < cfg_.delay && d <= t; ++d) {
    const cplx* fr = ring + ((t - d) % ring_len_) * m_count;
    for (int m = 0; m < m_count; ++m) phi += std::norm(fr[m]);
  }
  phi /= double(m_count * cfg_.delay);
  last_phi_[f] = phi;

  if (t + 1 < ring_len_) {
    std::copy(x, x + m_count, out);
    return true;
  }

  phi_sum_[f] += phi;
  const double mean_phi = phi_sum_[f] / double(t + 2 - ring_len_);
  if (phi <= 0.0 || phi < kSilenceGuard * mean_phi) {
    std::copy(x, x + m_count, out);
    return true;
  }

  cplx* xt = stacked_frame_.data();
  for (int tap = 0; tap < cfg_.taps; ++tap) {
    const cplx* fr = ring + ((t - cfg_.delay - tap) % ring_len_) * m_count;
    std::copy(fr, fr + m_count, xt + tap * m_count);
  }

  cplx* rinv = rinv_.data() + size_t(f) * len * len;
  cplx* h = filter_.data() + size_t(f) * len * m_count;
  const double alpha = cfg_.alpha;

  k.cgemv(rinv, xt, rx_.data(), len, len);
  const double quad = k.cdotc(xt, rx_.data(), len).real();
  const double denom = (1.0 - alpha) * phi + alpha * quad;
  const double gain_scale = alpha / denom;
  for (int i = 0; i < len; ++i) gain_[i] = gain_scale * rx_[i];

  // Prior prediction error with H_{t-1}.
  k.cgemv_adj(h, xt, pred_.data(), len, m_count);
  for (int m = 0; m < m_count; ++m) err_[m] = x[m] - pred_[m];

  k.cger_scaled(rinv, gain_.data(), rx_.data(), len, len, -1.0, 1.0 / (1.0 - alpha));
  k.cger_scaled(h, gain_.data(), err_.data(), len, m_count, 1.0, 1.0);

  if (++updates_[f] % 32 == 0) {
    for (int i = 0; i < len; ++i) {
      rinv[i * len + i] = rinv[i * len + i].real();
      for (int j = i + 1; j < len; ++j) {
        const cplx v = 0.5 * (rinv[i * len + j] + std::conj(rinv[j * len + i]));
        rinv[i * len + j] = v;
        rinv[j * len + i] = std::conj(v);
      }
    }
  }

  k.cgemv_adj(h, xt, pred_.data(), len, m_count);
  for (int m = 0; m < m_count; ++m) out[m] = x[m] - pred_[m];

  double max_diag = 0.0;
  for (int i = 0; i < len; ++i) max_diag = std::max(max_diag, rinv[i * len + i].real());
  return std::isfinite(max_diag) && max_diag <= kDivergenceLimit;
}

int OnlineWpe::Step(std::span<const cplx> frame, std::span<cplx> out) {
  int diverged = 0;
  for (int f = 0; f < bins_; ++f) {
    const cplx* x = frame.data() + size_t(f) * channels_;
    cplx* y = out.data() + size_t(f) * channels_;
    if (!Update(f, x, y)) {
      ResetBin(f);
      std::copy(x, x + channels_, y);
      ++diverged;
    }
  }
  return diverged;
}

void OnlineWpe::StepBin(int f, std::span<const cplx> x, std::span<cplx> out) {
  if (f < 0 || f >= bins_ || int(x.size()) != channels_ || int(out.size()) != channels_)
    throw Error(ErrorCode::kInvalidArgument, "online WPE bin/shape mismatch");
  if (!Update(f, x.data(), out.data())) {
    ResetBin(f);
    std::copy(x.begin(), x.end(), out.begin());
    throw Error(ErrorCode::kNumericalDivergence, "inverse correlation exceeded limit");
  }
}

CMat OnlineWpe::inverse_correlation(int f) const {
  return CMat(stacked_, stacked_,
              std::span<const cplx>(rinv_.data() + size_t(f) * stacked_ * stacked_,
                                    size_t(stacked_) * stacked_));
}

CMat OnlineWpe::filter(int f) const {
  return CMat(stacked_, channels_,
              std::span<const cplx>(filter_.data() + size_t(f) * stacked_ * channels_,
                                    size_t(stacked_) * channels_));
}

}  // namespace dpse

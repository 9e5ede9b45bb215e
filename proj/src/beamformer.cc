// SPDX-License-Identifier: Apache-2.0

#include "dpse/beamformer.h"

#include <algorithm>
#include <cmath>

#include "dpse/error.h"
#include "dpse/kernels.h"

namespace dpse {
namespace {

constexpr double kMinTrace = 1e-12;

void HermitianizeInPlace(cplx* a, int m) {
  for (int i = 0; i < m; ++i) {
    a[i * m + i] = a[i * m + i].real();
    for (int j = i + 1; j < m; ++j) {
      const cplx v = 0.5 * (a[i * m + j] + std::conj(a[j * m + i]));
      a[i * m + j] = v;
      a[j * m + i] = std::conj(v);
    }
  }
}

// Writes the MVDR weights into w. Upsilon is first replaced by its
// projection onto the PSD cone with eigenvalues floored at
// psd_floor * lambda_max; the per-frame Upsilon is a difference of moments
// and its EMA is often indefinite, which makes the plain solve blow up.
// Returns false for degenerate statistics.
bool SolveMvdr(const cplx* gamma, const cplx* upsilon, int m, int ref, double loading,
               double psd_floor, MvdrScratch& s, cplx* w) {
  HermitianEigen({upsilon, size_t(m * m)}, m, s.values, s.vectors, s.lhs);
  const double top = s.values[m - 1];
  if (!(top > 0.0) || !std::isfinite(top)) return false;
  for (int k = 0; k < m; ++k) s.values[k] = std::max(s.values[k], psd_floor * top);
  for (int i = 0; i < m; ++i) {
    for (int j = i; j < m; ++j) {
      cplx acc = 0.0;
      for (int k = 0; k < m; ++k)
        acc += s.vectors[i * m + k] * s.values[k] * std::conj(s.vectors[j * m + k]);
      s.lhs[i * m + j] = acc;
      s.lhs[j * m + i] = std::conj(acc);
    }
  }
  std::copy(gamma, gamma + m * m, s.rhs.begin());
  if (!SolveInPlace(s.lhs, m, s.rhs, m, loading, s.pivots)) return false;
  cplx tr = 0.0;
  for (int i = 0; i < m; ++i) tr += s.rhs[i * m + i];
  if (!(tr.real() >= kMinTrace) || !std::isfinite(tr.real())) return false;
  for (int i = 0; i < m; ++i) w[i] = s.rhs[i * m + ref] / tr;
  return true;
}

}  // namespace

FrameMoments ComputeFrameMoments(std::span<const cplx> x, const CMat& wiener, const CMat& sigma) {
  const int m = int(x.size());
  if (wiener.rows() != m || wiener.cols() != m || sigma.rows() != m || sigma.cols() != m)
    throw Error(ErrorCode::kInvalidArgument, "moment shapes do not match the frame");
  std::vector<cplx> wx(m);
  for (int i = 0; i < m; ++i) {
    cplx s = 0.0;
    for (int j = 0; j < m; ++j) s += wiener(i, j) * x[j];
    wx[i] = s;
  }
  FrameMoments out{Hermitianize(Outer(wx, wx) + sigma), CMat()};
  out.upsilon = Outer(x, x) - out.gamma;
  return out;
}

void AccumulateBlock(std::span<const CMat> frames, double alpha, bool first, CMat& ema) {
  if (frames.empty()) throw Error(ErrorCode::kInvalidArgument, "empty block");
  if (!(alpha > 0.0 && alpha <= 1.0))
    throw Error(ErrorCode::kInvalidArgument, "alpha_bf must lie in (0, 1]");
  CMat mean = CMat::Zero(frames[0].rows(), frames[0].cols());
  for (const CMat& f : frames) mean += f;
  const double a = first ? 1.0 : alpha;
  mean *= a / double(frames.size());
  if (!first) {
    CMat hist = ema;
    hist *= 1.0 - a;
    mean += hist;
  }
  ema = Hermitianize(mean);
}

MvdrScratch::MvdrScratch(int m)
    : values(m), vectors(size_t(m) * m), lhs(size_t(m) * m), rhs(size_t(m) * m), pivots(m) {}

std::vector<cplx> MvdrWeights(const CMat& gamma, const CMat& upsilon, int ref_mic,
                              double loading, double psd_floor) {
  const int m = gamma.rows();
  if (!gamma.square() || upsilon.rows() != m || upsilon.cols() != m || ref_mic < 0 ||
      ref_mic >= m)
    throw Error(ErrorCode::kInvalidArgument, "MVDR shape or reference mismatch");
  MvdrScratch scratch(m);
  std::vector<cplx> w(m);
  if (!SolveMvdr(gamma.data().data(), upsilon.data().data(), m, ref_mic, loading, psd_floor,
                 scratch, w.data()))
    throw Error(ErrorCode::kDegenerateStatistics, "tr(Upsilon^-1 Gamma) vanished");
  return w;
}

cplx ApplyWeights(std::span<const cplx> w, std::span<const cplx> x) {
  if (w.size() != x.size()) throw Error(ErrorCode::kInvalidArgument, "weight length mismatch");
  cplx s = 0.0;
  for (size_t i = 0; i < w.size(); ++i) s += std::conj(w[i]) * x[i];
  return s;
}

void BeamformerConfig::Validate(int channels) const {
  if (t_bf < 1) throw Error(ErrorCode::kInvalidArgument, "t_bf must be >= 1");
  if (!(alpha > 0.0 && alpha <= 1.0))
    throw Error(ErrorCode::kInvalidArgument, "alpha_bf must lie in (0, 1]");
  if (ref_mic < 0 || ref_mic >= channels)
    throw Error(ErrorCode::kInvalidArgument, "ref_mic out of range");
  if (loading < 0.0) throw Error(ErrorCode::kInvalidArgument, "loading must be >= 0");
  if (!(psd_floor >= 0.0 && psd_floor < 1.0))
    throw Error(ErrorCode::kInvalidArgument, "psd_floor must lie in [0, 1)");
}

Beamformer::Beamformer(const BeamformerConfig& cfg, int bins, int channels, int sources)
    : cfg_(cfg),
      bins_(bins),
      channels_(channels),
      sources_(sources),
      slots_(cfg.all_sources ? sources : 1),
      mm_(channels * channels),
      gamma_sum_(size_t(slots_) * bins * mm_),
      mix_sum_(size_t(bins) * mm_),
      gamma_ema_(size_t(slots_) * bins * mm_),
      upsilon_ema_(size_t(slots_) * bins * mm_),
      weights_(size_t(slots_) * bins * channels),
      wx_(channels),
      scratch_(channels) {
  cfg.Validate(channels);
  if (bins < 1 || sources < 1) throw Error(ErrorCode::kInvalidArgument, "bad beamformer dims");
  for (int s = 0; s < slots_; ++s)
    for (int f = 0; f < bins; ++f) weights_[(size_t(s) * bins + f) * channels + cfg.ref_mic] = 1.0;
}

bool Beamformer::Accumulate(std::span<const cplx> frame, const PosteriorSnapshot& snap) {
  if (int(frame.size()) != bins_ * channels_ || snap.bins() != bins_ ||
      snap.channels() != channels_ || snap.sources() != sources_)
    throw Error(ErrorCode::kInvalidArgument, "frame or snapshot shape mismatch");
  const auto& k = kernels::Active();
  const int m = channels_;
  if (!cfg_.all_sources) tracked_ = snap.target_source();
  for (int f = 0; f < bins_; ++f) {
    const cplx* x = frame.data() + size_t(f) * m;
    k.cger_scaled(mix_sum_.data() + size_t(f) * mm_, x, x, m, m, 1.0, 1.0);
    for (int n = 0; n < sources_; ++n) {
      if (!computes(n)) continue;
      cplx* g = gamma_sum_.data() + MatOff(Slot(n), f);
      k.cgemv(snap.wiener(n, f), x, wx_.data(), m, m);
      k.cger_scaled(g, wx_.data(), wx_.data(), m, m, 1.0, 1.0);
      const cplx* s = snap.cov(n, f);
      for (int i = 0; i < mm_; ++i) g[i] += s[i];
    }
  }
  if (++filled_ < cfg_.t_bf) return false;
  Refresh();
  return true;
}

void Beamformer::Refresh() {
  const int m = channels_;
  const double a = blocks_ == 0 ? 1.0 : cfg_.alpha;
  const double scale = a / filled_;
  degenerate_ = 0;
  for (int s = 0; s < slots_; ++s) {
    for (int f = 0; f < bins_; ++f) {
      const size_t off = MatOff(s, f);
      cplx* ge = gamma_ema_.data() + off;
      cplx* ue = upsilon_ema_.data() + off;
      const cplx* gs = gamma_sum_.data() + off;
      const cplx* xs = mix_sum_.data() + size_t(f) * mm_;
      for (int i = 0; i < mm_; ++i) {
        ge[i] = scale * gs[i] + (1.0 - a) * ge[i];
        ue[i] = scale * (xs[i] - gs[i]) + (1.0 - a) * ue[i];
      }
      HermitianizeInPlace(ge, m);
      HermitianizeInPlace(ue, m);
      if (!SolveMvdr(ge, ue, m, cfg_.ref_mic, cfg_.loading, cfg_.psd_floor, scratch_, wx_.data())) {
        ++degenerate_;
        continue;
      }
      std::copy(wx_.begin(), wx_.end(), weights_.begin() + (size_t(s) * bins_ + f) * m);
    }
  }
  std::fill(gamma_sum_.begin(), gamma_sum_.end(), cplx(0.0));
  std::fill(mix_sum_.begin(), mix_sum_.end(), cplx(0.0));
  filled_ = 0;
  ++blocks_;
}

void Beamformer::Apply(std::span<const cplx> frame, int n, std::span<cplx> out) const {
  if (!computes(n)) throw Error(ErrorCode::kInvalidArgument, "source not tracked");
  const auto& k = kernels::Active();
  const cplx* w = weights_.data() + size_t(Slot(n)) * bins_ * channels_;
  for (int f = 0; f < bins_; ++f)
    out[f] = k.cdotc(w + size_t(f) * channels_, frame.data() + size_t(f) * channels_, channels_);
}

CMat Beamformer::Gamma(int n, int f) const {
  return CMat(channels_, channels_,
              std::span<const cplx>(gamma_ema_.data() + MatOff(Slot(n), f), size_t(mm_)));
}

CMat Beamformer::Upsilon(int n, int f) const {
  return CMat(channels_, channels_,
              std::span<const cplx>(upsilon_ema_.data() + MatOff(Slot(n), f), size_t(mm_)));
}

std::vector<cplx> Beamformer::Weights(int n, int f) const {
  const cplx* w = weights_.data() + (size_t(Slot(n)) * bins_ + f) * channels_;
  return std::vector<cplx>(w, w + channels_);
}

}  // namespace dpse

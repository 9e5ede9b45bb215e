// SPDX-License-Identifier: Apache-2.0
//
// Front-end MVDR driven by back-end posteriors. For each frame the target
// image's second moment and the residual are
//
//   Gamma   = (W x)(W x)^H + Sigma
//   Upsilon = x x^H - Gamma
//
// and their block means are smoothed with weight alpha on the newest block.
// At the end of block j the Souden-form MVDR
//
//   w = Upsilon~^{-1} Gamma~ u_ref / tr(Upsilon~^{-1} Gamma~)
//
// is computed and applied to every frame of block j, so the front end adds
// t_bf frames of latency.

#ifndef DPSE_BEAMFORMER_H_
#define DPSE_BEAMFORMER_H_

#include <cstdint>
#include <span>
#include <vector>

#include "dpse/fastmnmf.h"
#include "dpse/linalg.h"

namespace dpse {

struct FrameMoments {
  CMat gamma;
  CMat upsilon;
};

// Moments of one frame x ([M]) under Wiener filter w and covariance sigma.
FrameMoments ComputeFrameMoments(std::span<const cplx> x, const CMat& wiener, const CMat& sigma);

// Block EMA: ema <- alpha * mean(frames) + (1 - alpha) * ema, with alpha
// forced to 1 when `first`. Result is hermitianized.
void AccumulateBlock(std::span<const CMat> frames, double alpha, bool first, CMat& ema);

// Workspace for one MVDR solve of size m.
struct MvdrScratch {
  explicit MvdrScratch(int m);
  std::vector<double> values;
  std::vector<cplx> vectors, lhs, rhs;
  std::vector<int> pivots;
};

// Upsilon is projected onto the PSD cone (eigenvalues floored at
// psd_floor * lambda_max) before the solve; `loading` is then added relative
// to the mean diagonal magnitude. Throws kDegenerateStatistics when
// tr(Upsilon^{-1} Gamma) < 1e-12, Upsilon has no positive eigenvalue, or the
// loaded matrix cannot be inverted.
std::vector<cplx> MvdrWeights(const CMat& gamma, const CMat& upsilon, int ref_mic,
                              double loading = 1e-6, double psd_floor = 1e-3);

// w^H x.
cplx ApplyWeights(std::span<const cplx> w, std::span<const cplx> x);

struct BeamformerConfig {
  int t_bf = 2;
  double alpha = 0.02;
  int ref_mic = 0;
  double loading = 1e-6;
  double psd_floor = 1e-3;
  bool all_sources = false;  // otherwise only the snapshot's target source

  void Validate(int channels) const;
};

// Streaming beamformer state: EMAs, weights and the running block sums. All
// storage is allocated up front; Accumulate and Apply do not allocate.
class Beamformer {
 public:
  Beamformer(const BeamformerConfig& cfg, int bins, int channels, int sources);

  // Adds the moments of frame x ([F x M]) under `snap`. When this completes
  // a block of t_bf frames the EMAs and weights are refreshed and true is
  // returned.
  bool Accumulate(std::span<const cplx> frame, const PosteriorSnapshot& snap);

  // out[f] = w_nf^H x_f with the current weights of source n.
  void Apply(std::span<const cplx> frame, int n, std::span<cplx> out) const;

  // Source whose weights the single-source configuration tracks.
  int tracked_source() const { return tracked_; }
  bool computes(int n) const { return cfg_.all_sources || n == tracked_; }
  int64_t blocks_done() const { return blocks_; }
  int frames_in_block() const { return filled_; }
  // Bins that kept their previous weights at the last refresh.
  int degenerate_bins() const { return degenerate_; }
  const BeamformerConfig& config() const { return cfg_; }

  CMat Gamma(int n, int f) const;
  CMat Upsilon(int n, int f) const;
  std::vector<cplx> Weights(int n, int f) const;

 private:
  int Slot(int n) const { return cfg_.all_sources ? n : 0; }
  size_t MatOff(int slot, int f) const { return (size_t(slot) * bins_ + f) * mm_; }
  void Refresh();

  BeamformerConfig cfg_;
  int bins_;
  int channels_;
  int sources_;
  int slots_;
  int mm_;
  int tracked_ = 0;
  int filled_ = 0;
  int64_t blocks_ = 0;
  int degenerate_ = 0;

  std::vector<cplx> gamma_sum_;  // [S][F][M][M]
  std::vector<cplx> mix_sum_;    // [F][M][M]
  std::vector<cplx> gamma_ema_;
  std::vector<cplx> upsilon_ema_;
  std::vector<cplx> weights_;  // [S][F][M]
  // scratch
  mutable std::vector<cplx> wx_;
  MvdrScratch scratch_;
};

}  // namespace dpse

#endif  // DPSE_BEAMFORMER_H_

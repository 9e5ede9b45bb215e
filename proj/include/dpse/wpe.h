// SPDX-License-Identifier: Apache-2.0
//
// Weighted prediction error dereverberation. OfflineWpe is the iterative
// block estimator used by the back end; OnlineWpe is the per-frame recursive
// variant used by the front end, whose statistics are exponential moving
// averages with weight alpha on the newest frame:
//
//   R_t = alpha / phi_t * xt xt^H + (1 - alpha) R_{t-1},   R_0 = I
//   P_t = alpha / phi_t * xt x_t^H + (1 - alpha) P_{t-1},  P_0 = 0
//   H_t = R_t^{-1} P_t,   xhat_t = x_t - H_t^H xt
//
// where xt stacks the K frames t-delay-K+1 .. t-delay and phi_t is the mean
// power over all channels of frames t-delay+1 .. t. R^{-1} is propagated with
// a rank-one (Kalman gain) update, so no inversion happens per frame.

#ifndef DPSE_WPE_H_
#define DPSE_WPE_H_

#include <cstdint>
#include <span>
#include <vector>

#include "dpse/linalg.h"
#include "dpse/stft.h"

namespace dpse {

struct WpeConfig {
  int taps = 5;
  int delay = 3;
  int iterations = 3;  // offline only
  double alpha = 0.005;  // online only

  void Validate() const;
};

// Dereverberates a block; output has the block's shape. Throws
// kBlockTooShort when the block has fewer than delay + taps frames.
SpectrogramBlock OfflineWpe(const SpectrogramBlock& block, const WpeConfig& cfg);

class OnlineWpe {
 public:
  // Relative guard: frames whose phi falls below this fraction of the running
  // mean phi pass through without a state update.
  static constexpr double kSilenceGuard = 1e-12;
  // Reset threshold on the largest diagonal entry of R^{-1}.
  static constexpr double kDivergenceLimit = 1e12;

  OnlineWpe(const WpeConfig& cfg, int bins, int channels);

  // One frame for all bins. `frame` and `out` are [F x M]. Bins that diverge
  // are reset and pass their input through; the count of such bins is
  // returned.
  int Step(std::span<const cplx> frame, std::span<cplx> out);

  // One frame for bin f. Throws kNumericalDivergence (after resetting the
  // bin) when R^{-1} blows up.
  void StepBin(int f, std::span<const cplx> x, std::span<cplx> out);

  void Reset();
  void ResetBin(int f);

  int bins() const { return bins_; }
  int channels() const { return channels_; }
  int stacked_size() const { return stacked_; }
  const WpeConfig& config() const { return cfg_; }

  CMat inverse_correlation(int f) const;
  CMat filter(int f) const;
  // phi of the most recent step for bin f.
  double last_power(int f) const { return last_phi_[f]; }
  int64_t frames_seen(int f) const { return count_[f]; }

 private:
  // Returns false on divergence.
  bool Update(int f, const cplx* x, cplx* out);

  WpeConfig cfg_;
  int bins_;
  int channels_;
  int stacked_;  // M * K
  int ring_len_;  // delay + taps
  std::vector<cplx> rinv_;  // [F][L][L]
  std::vector<cplx> filter_;  // [F][L][M]
  std::vector<cplx> ring_;  // [F][ring_len][M]
  std::vector<int64_t> count_;
  std::vector<int64_t> updates_;
  std::vector<double> phi_sum_;
  std::vector<double> last_phi_;
  // per-step scratch
  std::vector<cplx> stacked_frame_;
  std::vector<cplx> gain_;
  std::vector<cplx> rx_;
  std::vector<cplx> err_;
  std::vector<cplx> pred_;
};

}  // namespace dpse

#endif  // DPSE_WPE_H_

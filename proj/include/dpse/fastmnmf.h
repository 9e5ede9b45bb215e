// SPDX-License-Identifier: Apache-2.0
//
// FastMNMF back end. Each source image follows a zero-mean complex Gaussian
// with covariance lambda_nft * G_nf, where
//
//   lambda_nft = sum_c u_ncf v_nct                      (NMF spectral model)
//   G_nf       = Q_f^{-1} Diag(g_n) Q_f^{-H}            (shared diagonalizer)
//
// so in the diagonalized domain y_ft = Q_f x_ft every channel m is an
// independent Gaussian with variance yhat_mft = sum_n lambda_nft g_nm. The
// fit maximizes
//
//   L = sum_{f,t} [ -sum_m (|y_mft|^2 / yhat_mft + log yhat_mft) ]
//       + T sum_f log |det Q_f|^2
//
// with multiplicative (MM) updates for u, v, g and iterative projection for
// the rows of Q_f. Posterior Wiener filters and covariances of every source
// image given the mixture are read off the fitted model and averaged into the
// PosteriorSnapshot consumed by the front end.

#ifndef DPSE_FASTMNMF_H_
#define DPSE_FASTMNMF_H_

#include <cstdint>
#include <memory>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "dpse/linalg.h"
#include "dpse/stft.h"

namespace dpse {

struct MnmfDims {
  int sources = 3;     // N
  int channels = 4;    // M
  int bins = 513;      // F
  int components = 8;  // C
};

struct FitSchedule {
  int total_iters = 50;
  // Sweeps with gains shared across frequency before switching to
  // per-frequency gains.
  int warmup_iters = 40;
};

struct FastMnmfModel {
  MnmfDims dims;
  int frames = 0;  // T of the activations
  int target_source = 0;
  bool per_frequency_gains = false;

  std::vector<cplx> q;      // [F][M][M], row m is q_fm^H
  std::vector<cplx> q_inv;  // [F][M][M]
  std::vector<double> u;    // [N][F][C]
  std::vector<double> v;    // [N][C][T]
  // [N][F][M]; identical across f while per_frequency_gains is false.
  std::vector<double> g;

  CMat Q(int f) const;
  CMat QInv(int f) const;
  double& U(int n, int c, int f) { return u[(size_t(n) * dims.bins + f) * dims.components + c]; }
  double U(int n, int c, int f) const {
    return u[(size_t(n) * dims.bins + f) * dims.components + c];
  }
  double& V(int n, int c, int t) { return v[(size_t(n) * dims.components + c) * frames + t]; }
  double V(int n, int c, int t) const {
    return v[(size_t(n) * dims.components + c) * frames + t];
  }
  double& G(int n, int f, int m) { return g[(size_t(n) * dims.bins + f) * dims.channels + m]; }
  double G(int n, int f, int m) const {
    return g[(size_t(n) * dims.bins + f) * dims.channels + m];
  }
  // lambda_nft
  double Psd(int n, int f, int t) const;

  // Shifts the activations `shift` frames toward the past (warm start for a
  // block that advanced by `shift` frames). New frames take each
  // activation row's mean.
  void AdvanceFrames(int shift);
};

struct InitOptions {
  MnmfDims dims;
  int frames = 256;
  // One [F x M] steering array per directed source; source i gets entry i.
  std::vector<std::vector<cplx>> steering;
  uint64_t seed = 0;
};

// Builds the initial model. Columns of Q_f^{-1} for directed sources are the
// unit-normalized steering vectors; the remaining columns are canonical
// basis vectors orthogonalized against them. Throws kSingularInitialization
// only if Q_f^{-1} stays singular after a 1e-3 I perturbation.
FastMnmfModel InitModel(const InitOptions& opts);

struct FitOptions {
  FitSchedule schedule;
  // Evaluate the log-likelihood before and after every sweep.
  bool track_likelihood = true;
};

struct FitReport {
  // loglik[0] is the initial value, loglik[s] the value after sweep s.
  std::vector<double> loglik;
  std::vector<double> q_norms;  // Frobenius norm of Q_f averaged over f, per sweep
};

// Fits `model` to a dereverberated block in place. The block's frame count
// must equal model.frames. Throws kLikelihoodDiverged on NaN/Inf.
FitReport Fit(FastMnmfModel& model, const SpectrogramBlock& block, const FitOptions& opts = {});

// Model log-likelihood (up to constants) of `block`.
double LogLikelihood(const FastMnmfModel& model, const SpectrogramBlock& block);

// One record per sweep: {"iter": s, "loglik": L, "q_norm": ...}.
std::string FitReportJsonLines(const FitReport& report);

// Posterior of every source image at frame t of the fitted block:
//   W_nft = Q^{-1} Diag(r_nft) Q,  r_nft = lambda_nft g_n / sum_n' lambda_n'ft g_n'
//   S_nft = (I - W_nft) Q^{-1} Diag(lambda_nft g_n) Q^{-H}
struct FramePosterior {
  std::vector<CMat> wiener;  // [N]
  std::vector<CMat> cov;     // [N]
};
FramePosterior Posterior(const FastMnmfModel& model, int f, int t);

// Frame posteriors averaged over the fitted block, computed in the diagonal
// domain. Layout [N][F][M][M].
struct PosteriorMean {
  int sources = 0;
  int bins = 0;
  int channels = 0;
  std::vector<cplx> wiener;
  std::vector<cplx> cov;
};
PosteriorMean BlockPosteriorMean(const FastMnmfModel& model);
// The same average formed explicitly from per-frame posteriors.
PosteriorMean AveragePosteriors(std::span<const std::vector<FramePosterior>> frames_by_bin,
                                int sources, int channels);

// Exponential moving averages of the block posteriors; the only thing the
// back end hands to the front end. Immutable once published.
class PosteriorSnapshot {
 public:
  PosteriorSnapshot(int sources, int bins, int channels);

  int sources() const { return sources_; }
  int bins() const { return bins_; }
  int channels() const { return channels_; }
  int64_t block_index() const { return block_index_; }
  int target_source() const { return target_source_; }
  // Frame after which this snapshot may be used (last frame of its block).
  int64_t last_frame() const { return last_frame_; }

  const cplx* wiener(int n, int f) const { return wiener_.data() + Offset(n, f); }
  const cplx* cov(int n, int f) const { return cov_.data() + Offset(n, f); }
  cplx* wiener(int n, int f) { return wiener_.data() + Offset(n, f); }
  cplx* cov(int n, int f) { return cov_.data() + Offset(n, f); }
  CMat Wiener(int n, int f) const;
  CMat Cov(int n, int f) const;

  void set_block_index(int64_t i) { block_index_ = i; }
  void set_target_source(int n) { target_source_ = n; }
  void set_last_frame(int64_t t) { last_frame_ = t; }

  // Snapshot with W = I, Sigma = 0 for `target` and zeros elsewhere.
  static PosteriorSnapshot PassThrough(int sources, int bins, int channels, int target);

 private:
  size_t Offset(int n, int f) const {
    return (size_t(n) * bins_ + f) * size_t(channels_) * channels_;
  }
  int sources_;
  int bins_;
  int channels_;
  int64_t block_index_ = 0;
  int target_source_ = 0;
  int64_t last_frame_ = -1;
  std::vector<cplx> wiener_;
  std::vector<cplx> cov_;
};

// W~_i = alpha * mean + (1 - alpha) * W~_{i-1}, likewise for Sigma~ (which
// is hermitianized). alpha is forced to 1 when there is no previous snapshot.
PosteriorSnapshot PublishSnapshot(const PosteriorMean& block_mean,
                                  const PosteriorSnapshot* previous, double alpha);
// Same, from per-frame posteriors ([F][T] nesting: frames_by_bin[f][t]).
PosteriorSnapshot PublishSnapshot(std::span<const std::vector<FramePosterior>> frames_by_bin,
                                  const PosteriorSnapshot* previous, double alpha);

}  // namespace dpse

#endif  // DPSE_FASTMNMF_H_

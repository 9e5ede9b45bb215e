// SPDX-License-Identifier: Apache-2.0
//
// Scoring against simulator references: SI-SDR, the baseline ladder, the
// (t_bf, alpha_bf) grid and an offline FastMNMF oracle.
//
// Every streaming method sees a warm-up prefix first: the last `warmup_frames`
// hops of the mixture are prepended and the corresponding output is dropped
// before scoring, so the scores reflect adapted statistics rather than the
// cold start.

#ifndef DPSE_EVAL_H_
#define DPSE_EVAL_H_

#include <span>
#include <string>
#include <vector>

#include "dpse/pipeline.h"
#include "dpse/scenesim.h"

namespace dpse {

// Scale-invariant SDR in dB, capped at 100. Lengths are trimmed to the
// shorter signal. Throws kSilentReference.
double SiSdr(std::span<const double> estimate, std::span<const double> reference);

// SI-SDR of consecutive `segment` sample spans. A trailing partial span is
// scored if it holds at least half a segment.
std::vector<double> SegmentSiSdr(std::span<const double> estimate,
                                 std::span<const double> reference, size_t segment);

struct EvalOptions {
  PipelineConfig cfg;
  double segment_s = 8.0;
  int warmup_frames = 1024;
  double target_azimuth_deg = 0.0;
  // Relative diagonal loading for the MPDR baseline. Its steering is
  // far-field, so a near source needs enough loading to avoid cancelling
  // itself.
  double mpdr_loading = 1e-2;
};

struct MethodScore {
  std::string method;
  double si_sdr = 0.0;       // mean over segments
  double improvement = 0.0;  // over the noisy reference mic, mean over segments
  double frame_ms = 0.0;     // mean per-frame compute
  double frame_ms_p95 = 0.0;
  std::vector<double> segments;
};

struct MethodRun {
  std::vector<double> output;  // scene length, prefix removed
  std::vector<double> frame_ms;
};

// Streams `input` through the pipeline with the warm-up prefix. Replays
// `schedule` if given, else runs the back end in deterministic mode and, if
// `record` is set, stores its snapshot schedule there.
MethodRun RunProposed(const Scene& scene, const EvalOptions& opts,
                      const std::vector<SnapshotEvent>* schedule = nullptr,
                      std::vector<SnapshotEvent>* record = nullptr);

// The front-end-only baselines: "noisy", "wpe", "wpe+ds", "wpe+mpdr".
MethodRun RunBaseline(const std::string& method, const Scene& scene, const EvalOptions& opts);

MethodScore Score(const std::string& method, const MethodRun& run, const Scene& scene,
                  const EvalOptions& opts);

// Rows: noisy, wpe, wpe+ds, wpe+mpdr, proposed.
std::vector<MethodScore> RunBaselines(const Scene& scene, const EvalOptions& opts,
                                      const std::vector<SnapshotEvent>* schedule = nullptr);

struct GridCell {
  int t_bf = 0;
  double alpha_bf = 0.0;
  double si_sdr = 0.0;
  double improvement = 0.0;
  double frame_ms = 0.0;
};

// Full factorial over t_bf x alpha_bf. The back end does not depend on
// either, so one recorded schedule (computed here if null) is replayed for
// every cell.
std::vector<GridCell> GridSearch(const Scene& scene, const EvalOptions& opts,
                                 const std::vector<int>& t_bf, const std::vector<double>& alpha_bf,
                                 const std::vector<SnapshotEvent>* schedule = nullptr);

// FastMNMF fitted once on the whole mixture; the target image at the
// reference mic is the posterior mean. Returns the scene-length estimate.
std::vector<double> OfflineOracle(const Scene& scene, const EvalOptions& opts);

// SI-SDR improvement over the noisy reference mic in `window`-sample windows
// advanced by `hop` samples; entry k covers [k * hop, k * hop + window).
std::vector<double> WindowedImprovement(std::span<const double> estimate, const Scene& scene,
                                        size_t window, size_t hop);

std::string ScoreTable(const std::vector<MethodScore>& rows);
std::string GridTable(const std::vector<GridCell>& cells);

}  // namespace dpse

#endif  // DPSE_EVAL_H_

// SPDX-License-Identifier: Apache-2.0
//
// Dual-context enhancement pipeline. The front end runs per STFT frame:
// online WPE, beamformer statistics under the latest posterior snapshot, MVDR
// refresh every t_bf frames, output. The back end wakes every `shift` frames,
// dereverberates the newest t_bss mixture frames offline, refits FastMNMF
// (warm-started) and publishes a new snapshot. The only shared state is the
// mixture frame ring (front end writes) and the snapshot slot (back end
// writes).
//
// Timing convention: a back-end tick for the window ending at frame b - 1
// runs after the front end has consumed frame b - 1; in deterministic mode
// its snapshot is used from frame b on. Ticks happen when b >= t_bss and
// (b - t_bss) % shift == 0.

#ifndef DPSE_PIPELINE_H_
#define DPSE_PIPELINE_H_

#include <atomic>
#include <cstdint>
#include <memory>
#include <mutex>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "dpse/beamformer.h"
#include "dpse/fastmnmf.h"
#include "dpse/steering.h"
#include "dpse/stft.h"
#include "dpse/wpe.h"

namespace dpse {

struct PipelineConfig {
  StftConfig stft;
  int t_bss = 256;
  double bss_overlap = 0.75;
  double alpha_bss = 0.1;
  BeamformerConfig bf;  // t_bf 2, alpha_bf 0.02, ref mic 0
  WpeConfig wpe_front;  // alpha_wpe 0.005
  WpeConfig wpe_back;
  int sources = 3;
  int components = 8;
  FitSchedule schedule;
  // Target first; later entries initialize further directed sources.
  std::vector<double> directions_deg{0.0};
  bool cold_start = false;
  uint64_t seed = 0;

  PipelineConfig() { bf.t_bf = 2; bf.alpha = 0.02; }
  int shift() const;
  // Throws kInvalidArgument.
  void Validate(int channels) const;
};

using SnapshotPtr = std::shared_ptr<const PosteriorSnapshot>;

// Single-writer / single-reader slot holding the newest snapshot. Readers
// poll publications() and only take the lock when it changed; the lock is
// held for a pointer copy.
class SnapshotSlot {
 public:
  void Publish(SnapshotPtr snap);
  SnapshotPtr Load() const;
  uint64_t publications() const { return count_.load(std::memory_order_acquire); }

 private:
  mutable std::mutex mu_;
  SnapshotPtr current_;
  std::atomic<uint64_t> count_{0};
};

// Lock-free single-producer ring of mixture frames. The writer never waits;
// a reader that falls more than `capacity` frames behind sees Read fail.
class FrameRing {
 public:
  FrameRing(int capacity, int frame_size);

  void Push(std::span<const cplx> frame);
  int64_t written() const { return written_.load(std::memory_order_acquire); }
  // Copies frames [start, start + block.frames()) into `block` (F x T x M
  // layout, frame_size = F * M). False if any of them is unwritten or was
  // overwritten during the copy.
  bool Read(int64_t start, SpectrogramBlock& block) const;

 private:
  int capacity_;
  int frame_size_;
  std::vector<cplx> data_;
  std::atomic<int64_t> written_{0};
};

struct FrontendBlockRecord {
  int64_t j;
  int frames;
  double compute_ms;
};

struct BackendTickRecord {
  int64_t i;          // publication index (0 when not published)
  int64_t end_frame;  // window is [end_frame - t_bss, end_frame)
  int64_t publish_frame;  // first frame allowed to use the result
  double compute_ms;
  int skipped;  // shifts dropped just before this tick
  bool published;
};

class FrameSink {
 public:
  virtual ~FrameSink() = default;
  // One mono frame of F bins, in frame order.
  virtual void Emit(std::span<const cplx> frame) = 0;
};

class Frontend {
 public:
  Frontend(const PipelineConfig& cfg, int channels);

  // Consumes mixture frame t ([F x M]). `snap` is the newest usable
  // snapshot or null. Finished output frames go to `sink`: immediately
  // (dereverberated reference mic) while no snapshot exists, afterwards in
  // bursts of t_bf at block ends.
  void Process(std::span<const cplx> frame, const PosteriorSnapshot* snap, FrameSink& sink);
  // Emits frames of an unfinished block with the current weights.
  void Finish(FrameSink& sink);

  const std::vector<double>& frame_ms() const { return frame_ms_; }
  const std::vector<FrontendBlockRecord>& blocks() const { return blocks_; }
  const Beamformer& beamformer() const { return bf_; }
  int64_t diverged_bins() const { return diverged_; }

 private:
  void EmitBlock(FrameSink& sink);

  int bins_;
  int channels_;
  int ref_;
  OnlineWpe wpe_;
  Beamformer bf_;
  std::vector<cplx> dereverbed_;  // [t_bf][F][M]
  std::vector<cplx> mono_;
  int pending_ = 0;
  int target_ = 0;
  double block_ms_ = 0.0;
  int64_t diverged_ = 0;
  std::vector<double> frame_ms_;
  std::vector<FrontendBlockRecord> blocks_;
};

class Backend {
 public:
  // `directions` holds one [F x M] steering array per directed source.
  Backend(const PipelineConfig& cfg, int channels, std::vector<std::vector<cplx>> directions);

  // Runs offline WPE + FastMNMF on `block` (t_bss mixture frames whose
  // start_frame is set) and returns the new snapshot, or null if the fit
  // diverged (the model is then re-initialized).
  SnapshotPtr Tick(const SpectrogramBlock& block);

  const FastMnmfModel* model() const { return model_ ? &*model_ : nullptr; }
  const SnapshotPtr& last() const { return last_; }
  int64_t failures() const { return failures_; }

 private:
  FastMnmfModel FreshModel() const;

  PipelineConfig cfg_;
  int channels_;
  std::vector<std::vector<cplx>> directions_;
  std::optional<FastMnmfModel> model_;
  int64_t last_start_ = 0;
  SnapshotPtr last_;
  int64_t failures_ = 0;
};

enum class RunMode {
  kDeterministic,      // single context, back end always on schedule
  kSimulatedRealtime,  // single context, results delayed by measured compute
  kThreaded,           // two threads
};

struct SnapshotEvent {
  int64_t frame;  // first frame that uses it
  SnapshotPtr snapshot;
};

struct RunOptions {
  RunMode mode = RunMode::kDeterministic;
  // Replays recorded snapshots instead of running the back end.
  const std::vector<SnapshotEvent>* replay = nullptr;
  bool record_schedule = false;
  // Threaded mode: pace the front end at the frame rate times this factor
  // (0 runs as fast as possible).
  double pace = 0.0;
  // Threaded mode: artificial extra back-end latency per tick.
  double backend_delay_ms = 0.0;
};

struct RunResult {
  std::vector<double> output;
  std::vector<double> frame_ms;
  std::vector<FrontendBlockRecord> frontend_blocks;
  std::vector<BackendTickRecord> ticks;
  int skipped_ticks = 0;
  int64_t frames = 0;
  std::vector<SnapshotEvent> schedule;
};

// Enhances `input` (M equal-length channels). The result has the input's
// length. Steering vectors for cfg.directions_deg come from `steering`
// (may be null: no directional initialization).
RunResult RunStream(const std::vector<std::vector<double>>& input, const PipelineConfig& cfg,
                    const SteeringTable* steering, const RunOptions& opts = {});

// One record per line: {"kind":"fe","j":..,"frames":..,"compute_ms":..} and
// {"kind":"be","i":..,"end_frame":..,"publish_frame":..,"compute_ms":..,"skipped":..}.
std::string TimingJsonLines(const RunResult& result);

double Percentile(std::vector<double> values, double q);

}  // namespace dpse

#endif  // DPSE_PIPELINE_H_

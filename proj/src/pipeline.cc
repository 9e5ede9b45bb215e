// SPDX-License-Identifier: Apache-2.0

#include "dpse/pipeline.h"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <condition_variable>
#include <cstring>
#include <exception>
#include <sstream>
#include <thread>

#include "dpse/error.h"

namespace dpse {
namespace {

using Clock = std::chrono::steady_clock;

double MsSince(Clock::time_point t0) {
  return std::chrono::duration<double, std::milli>(Clock::now() - t0).count();
}

bool IsBoundary(int64_t b, const PipelineConfig& cfg) {
  return b >= cfg.t_bss && (b - cfg.t_bss) % cfg.shift() == 0;
}

// Collects synthesized samples from emitted frames.
class SynthSink : public FrameSink {
 public:
  SynthSink(const StftConfig& cfg, size_t reserve) : synth_(cfg), hop_(cfg.hop) {
    out_.reserve(reserve);
  }
  void Emit(std::span<const cplx> frame) override {
    synth_.PushFrame(frame, hop_);
    out_.insert(out_.end(), hop_.begin(), hop_.end());
  }
  std::vector<double> Take() {
    const auto tail = synth_.Flush();
    out_.insert(out_.end(), tail.begin(), tail.end());
    return std::move(out_);
  }

 private:
  StftSynthesizer synth_;
  std::vector<double> hop_;
  std::vector<double> out_;
};

// Streams the input through the analyzer. The signal is padded with
// fft - hop zeros on both sides so every input sample is covered by a full
// set of overlapping frames.
class FrameSource {
 public:
  FrameSource(const std::vector<std::vector<double>>& input, const StftConfig& cfg)
      : cfg_(cfg), analyzer_(cfg, int(input.size())), frame_(size_t(cfg.num_bins()) * input.size()) {
    const size_t pad = size_t(cfg.fft_size - cfg.hop);
    length_ = input[0].size();
    size_t total = pad + length_ + pad;
    total += (cfg.hop - (total - cfg.fft_size) % cfg.hop) % cfg.hop;
    padded_.resize(input.size());
    for (size_t m = 0; m < input.size(); ++m) {
      padded_[m].assign(total, 0.0);
      std::copy(input[m].begin(), input[m].end(), padded_[m].begin() + pad);
    }
    frames_ = int64_t((total - cfg.fft_size) / cfg.hop + 1);
    views_.resize(input.size());
  }

  int64_t frames() const { return frames_; }
  size_t pad() const { return size_t(cfg_.fft_size - cfg_.hop); }
  size_t length() const { return length_; }

  // Next frame, or empty span at the end.
  std::span<const cplx> Next() {
    while (pos_ + cfg_.hop <= padded_[0].size()) {
      for (size_t m = 0; m < padded_.size(); ++m)
        views_[m] = std::span<const double>(padded_[m].data() + pos_, size_t(cfg_.hop));
      pos_ += cfg_.hop;
      if (analyzer_.PushHop(views_, frame_)) return frame_;
    }
    return {};
  }

 private:
  StftConfig cfg_;
  StftAnalyzer analyzer_;
  std::vector<std::vector<double>> padded_;
  std::vector<std::span<const double>> views_;
  std::vector<cplx> frame_;
  size_t pos_ = 0;
  size_t length_ = 0;
  int64_t frames_ = 0;
};

std::vector<std::vector<cplx>> Directions(const PipelineConfig& cfg, int channels,
                                          const SteeringTable* steering) {
  std::vector<std::vector<cplx>> out;
  if (steering == nullptr) return out;
  if (steering->channels() != channels || steering->bins() != cfg.stft.num_bins())
    throw Error(ErrorCode::kInvalidArgument, "steering table does not match the input");
  for (double az : cfg.directions_deg) out.push_back(steering->ForAzimuth(az));
  return out;
}

}  // namespace

int PipelineConfig::shift() const {
  return int(std::lround(t_bss * (1.0 - bss_overlap)));
}

void PipelineConfig::Validate(int channels) const {
  stft.Validate();
  if (t_bss < 1) throw Error(ErrorCode::kInvalidArgument, "t_bss must be >= 1");
  if (!(bss_overlap >= 0.0 && bss_overlap < 1.0))
    throw Error(ErrorCode::kInvalidArgument, "bss_overlap must lie in [0, 1)");
  const double s = t_bss * (1.0 - bss_overlap);
  if (std::abs(s - std::round(s)) > 1e-9 || shift() < 1)
    throw Error(ErrorCode::kInvalidArgument, "t_bss * (1 - overlap) must be a positive integer");
  if (!(alpha_bss > 0.0 && alpha_bss <= 1.0))
    throw Error(ErrorCode::kInvalidArgument, "alpha_bss must lie in (0, 1]");
  bf.Validate(channels);
  wpe_front.Validate();
  wpe_back.Validate();
  if (wpe_front.alpha >= 1.0)
    throw Error(ErrorCode::kInvalidArgument, "alpha_wpe must be < 1 for the online filter");
  if (sources < 1 || components < 1)
    throw Error(ErrorCode::kInvalidArgument, "sources and components must be >= 1");
  if (int(directions_deg.size()) > std::min(sources, channels))
    throw Error(ErrorCode::kInvalidArgument, "more directions than sources or channels");
  if (schedule.total_iters < 0 || schedule.warmup_iters < 0)
    throw Error(ErrorCode::kInvalidArgument, "iteration counts must be >= 0");
  if (t_bss < wpe_back.delay + wpe_back.taps)
    throw Error(ErrorCode::kInvalidArgument, "t_bss shorter than the WPE context");
}

void SnapshotSlot::Publish(SnapshotPtr snap) {
  {
    std::lock_guard<std::mutex> lock(mu_);
    current_ = std::move(snap);
  }
  count_.fetch_add(1, std::memory_order_release);
}

SnapshotPtr SnapshotSlot::Load() const {
  std::lock_guard<std::mutex> lock(mu_);
  return current_;
}

FrameRing::FrameRing(int capacity, int frame_size)
    : capacity_(capacity), frame_size_(frame_size), data_(size_t(capacity) * frame_size) {
  if (capacity < 1 || frame_size < 1)
    throw Error(ErrorCode::kInvalidArgument, "bad frame ring dimensions");
}

void FrameRing::Push(std::span<const cplx> frame) {
  const int64_t w = written_.load(std::memory_order_relaxed);
  std::memcpy(static_cast<void*>(data_.data() + size_t(w % capacity_) * frame_size_), frame.data(),
              sizeof(cplx) * size_t(frame_size_));
  written_.store(w + 1, std::memory_order_release);
}

bool FrameRing::Read(int64_t start, SpectrogramBlock& block) const {
  const int frames = block.frames();
  const int ch = block.channels();
  const int bins = block.bins();
  if (bins * ch != frame_size_ || frames > capacity_) return false;
  const int64_t w0 = written_.load(std::memory_order_acquire);
  if (start < 0 || start + frames > w0 || start < w0 - capacity_) return false;
  for (int t = 0; t < frames; ++t) {
    const cplx* src = data_.data() + size_t((start + t) % capacity_) * frame_size_;
    for (int f = 0; f < bins; ++f)
      for (int m = 0; m < ch; ++m) block.at(f, t, m) = src[f * ch + m];
  }
  // Seqlock-style validation: if the writer lapped the oldest frame while we
  // copied, the copy may be torn and is discarded.
  std::atomic_thread_fence(std::memory_order_acquire);
  const int64_t w1 = written_.load(std::memory_order_acquire);
  return start >= w1 - capacity_;
}

Frontend::Frontend(const PipelineConfig& cfg, int channels)
    : bins_(cfg.stft.num_bins()),
      channels_(channels),
      ref_(cfg.bf.ref_mic),
      wpe_(cfg.wpe_front, cfg.stft.num_bins(), channels),
      bf_(cfg.bf, cfg.stft.num_bins(), channels, cfg.sources),
      dereverbed_(size_t(cfg.bf.t_bf) * cfg.stft.num_bins() * channels),
      mono_(cfg.stft.num_bins()) {
  frame_ms_.reserve(1 << 16);
}

void Frontend::Process(std::span<const cplx> frame, const PosteriorSnapshot* snap,
                       FrameSink& sink) {
  const auto t0 = Clock::now();
  const size_t frame_size = size_t(bins_) * channels_;
  std::span<cplx> xhat(dereverbed_.data() + size_t(pending_) * frame_size, frame_size);
  diverged_ += wpe_.Step(frame, xhat);

  if (snap == nullptr) {
    for (int f = 0; f < bins_; ++f) mono_[f] = xhat[size_t(f) * channels_ + ref_];
    frame_ms_.push_back(MsSince(t0));
    sink.Emit(mono_);
    return;
  }
  ++pending_;
  const bool done = bf_.Accumulate(xhat, *snap);
  if (!done) {
    const double ms = MsSince(t0);
    frame_ms_.push_back(ms);
    block_ms_ += ms;
    return;
  }
  // Weights of block j apply to every frame of block j. The mono result
  // overwrites the first F entries of each frame in place; bin f only reads
  // entries at or after f * M, so nothing is clobbered before use.
  const int n = bf_.tracked_source();
  const int frames = pending_;
  for (int k = 0; k < frames; ++k) {
    bf_.Apply(std::span<const cplx>(dereverbed_.data() + size_t(k) * frame_size, frame_size), n,
              std::span<cplx>(dereverbed_.data() + size_t(k) * frame_size, size_t(bins_)));
  }
  const double ms = MsSince(t0);
  frame_ms_.push_back(ms);
  block_ms_ += ms;
  blocks_.push_back({bf_.blocks_done(), frames, block_ms_});
  block_ms_ = 0.0;
  EmitBlock(sink);
}

void Frontend::EmitBlock(FrameSink& sink) {
  const size_t frame_size = size_t(bins_) * channels_;
  for (int k = 0; k < pending_; ++k)
    sink.Emit(std::span<const cplx>(dereverbed_.data() + size_t(k) * frame_size, size_t(bins_)));
  pending_ = 0;
}

void Frontend::Finish(FrameSink& sink) {
  if (pending_ == 0) return;
  const size_t frame_size = size_t(bins_) * channels_;
  for (int k = 0; k < pending_; ++k)
    bf_.Apply(std::span<const cplx>(dereverbed_.data() + size_t(k) * frame_size, frame_size),
              bf_.tracked_source(),
              std::span<cplx>(dereverbed_.data() + size_t(k) * frame_size, size_t(bins_)));
  EmitBlock(sink);
}

Backend::Backend(const PipelineConfig& cfg, int channels,
                 std::vector<std::vector<cplx>> directions)
    : cfg_(cfg), channels_(channels), directions_(std::move(directions)) {}

FastMnmfModel Backend::FreshModel() const {
  InitOptions init;
  init.dims = {cfg_.sources, channels_, cfg_.stft.num_bins(), cfg_.components};
  init.frames = cfg_.t_bss;
  init.steering = directions_;
  init.seed = cfg_.seed;
  return InitModel(init);
}

SnapshotPtr Backend::Tick(const SpectrogramBlock& block) {
  if (block.frames() != cfg_.t_bss || block.channels() != channels_)
    throw Error(ErrorCode::kInvalidArgument, "back-end block has the wrong shape");
  if (!model_ || cfg_.cold_start) {
    model_ = FreshModel();
  } else {
    model_->AdvanceFrames(int(std::min<int64_t>(block.start_frame() - last_start_, cfg_.t_bss)));
  }
  last_start_ = block.start_frame();
  const SpectrogramBlock dereverbed = OfflineWpe(block, cfg_.wpe_back);
  FitOptions opts;
  opts.schedule = cfg_.schedule;
  opts.track_likelihood = false;
  try {
    Fit(*model_, dereverbed, opts);
  } catch (const Error& e) {
    if (e.code() != ErrorCode::kLikelihoodDiverged) throw;
    ++failures_;
    model_.reset();
    return nullptr;
  }
  PosteriorSnapshot snap = PublishSnapshot(BlockPosteriorMean(*model_), last_.get(), cfg_.alpha_bss);
  snap.set_last_frame(block.start_frame() + block.frames() - 1);
  snap.set_target_source(model_->target_source);
  last_ = std::make_shared<const PosteriorSnapshot>(std::move(snap));
  return last_;
}

namespace {

struct StreamState {
  const PipelineConfig& cfg;
  int channels;
  FrameSource source;
  SynthSink sink;
  Frontend frontend;
  RunResult result;

  StreamState(const std::vector<std::vector<double>>& input, const PipelineConfig& c)
      : cfg(c),
        channels(int(input.size())),
        source(input, c.stft),
        sink(c.stft, input[0].size() + 4 * size_t(c.stft.fft_size)),
        frontend(c, int(input.size())) {}

  void Finish() {
    frontend.Finish(sink);
    std::vector<double> padded = sink.Take();
    const size_t pad = source.pad();
    result.output.assign(padded.begin() + pad, padded.begin() + pad + source.length());
    result.frame_ms = frontend.frame_ms();
    result.frontend_blocks = frontend.blocks();
  }
};

int SkippedBefore(int64_t b, int64_t last_b, const PipelineConfig& cfg) {
  if (last_b < 0) return int((b - cfg.t_bss) / cfg.shift());
  return int((b - last_b) / cfg.shift() - 1);
}

void RunSingleContext(StreamState& st, Backend* backend, const RunOptions& opts) {
  const PipelineConfig& cfg = st.cfg;
  const int bins = cfg.stft.num_bins();
  FrameRing ring(cfg.t_bss + cfg.shift(), bins * st.channels);
  SpectrogramBlock block(bins, cfg.t_bss, st.channels);
  SnapshotPtr current;
  std::vector<SnapshotEvent> pending;  // simulated real-time publications
  size_t replay_pos = 0;
  int64_t busy_until = 0;
  int64_t last_b = -1;
  int64_t published = 0;
  const double hop_ms = cfg.stft.hop_seconds() * 1000.0;

  for (int64_t t = 0;; ++t) {
    const std::span<const cplx> frame = st.source.Next();
    if (frame.empty()) break;
    if (opts.replay != nullptr) {
      while (replay_pos < opts.replay->size() && (*opts.replay)[replay_pos].frame <= t)
        current = (*opts.replay)[replay_pos++].snapshot;
    }
    while (!pending.empty() && pending.front().frame <= t) {
      current = pending.front().snapshot;
      if (opts.record_schedule) st.result.schedule.push_back(pending.front());
      pending.erase(pending.begin());
    }
    ring.Push(frame);
    st.frontend.Process(frame, current.get(), st.sink);
    ++st.result.frames;

    const int64_t b = t + 1;
    if (backend == nullptr || !IsBoundary(b, cfg) || b < busy_until) continue;
    block = SpectrogramBlock(bins, cfg.t_bss, st.channels, b - cfg.t_bss);
    if (!ring.Read(b - cfg.t_bss, block))
      throw Error(ErrorCode::kInvalidArgument, "frame ring lost a back-end window");
    const int skipped = SkippedBefore(b, last_b, cfg);
    last_b = b;
    const auto t0 = Clock::now();
    SnapshotPtr snap = backend->Tick(block);
    const double ms = MsSince(t0);
    int64_t publish = b;
    if (opts.mode == RunMode::kSimulatedRealtime) {
      publish = b + int64_t(std::ceil(ms / hop_ms));
      busy_until = publish;
    }
    st.result.skipped_ticks += skipped;
    st.result.ticks.push_back({snap ? ++published : 0, b, publish, ms, skipped, snap != nullptr});
    if (!snap) continue;
    pending.push_back({publish, snap});
  }
  if (opts.record_schedule)
    for (const auto& e : pending) st.result.schedule.push_back(e);
}

void RunThreaded(StreamState& st, Backend& backend, const RunOptions& opts) {
  const PipelineConfig& cfg = st.cfg;
  const int bins = cfg.stft.num_bins();
  FrameRing ring(4 * cfg.t_bss + cfg.shift(), bins * st.channels);
  SnapshotSlot slot;
  std::mutex mu;
  std::condition_variable cv;
  std::atomic<bool> stop{false};
  std::exception_ptr failure;
  std::vector<BackendTickRecord> ticks;
  int skipped_total = 0;

  std::thread worker([&] {
    try {
      SpectrogramBlock block(bins, cfg.t_bss, st.channels);
      int64_t last_b = -1;
      int64_t published = 0;
      while (!stop.load(std::memory_order_acquire)) {
        const int64_t w = ring.written();
        int64_t b = -1;
        if (w >= cfg.t_bss) b = cfg.t_bss + (w - cfg.t_bss) / cfg.shift() * cfg.shift();
        if (b < 0 || b <= last_b) {
          std::unique_lock<std::mutex> lock(mu);
          cv.wait_for(lock, std::chrono::milliseconds(2));
          continue;
        }
        const int skipped = SkippedBefore(b, last_b, cfg);
        last_b = b;
        block = SpectrogramBlock(bins, cfg.t_bss, st.channels, b - cfg.t_bss);
        if (!ring.Read(b - cfg.t_bss, block)) {
          skipped_total += skipped + 1;
          continue;
        }
        const auto t0 = Clock::now();
        SnapshotPtr snap = backend.Tick(block);
        if (opts.backend_delay_ms > 0.0)
          std::this_thread::sleep_for(std::chrono::duration<double, std::milli>(opts.backend_delay_ms));
        const double ms = MsSince(t0);
        if (snap) slot.Publish(snap);
        skipped_total += skipped;
        ticks.push_back({snap ? ++published : 0, b, ring.written(), ms, skipped, snap != nullptr});
      }
    } catch (...) {
      failure = std::current_exception();
    }
  });

  SnapshotPtr current;
  uint64_t seen = 0;
  const auto start = Clock::now();
  const double frame_s = cfg.stft.hop_seconds();
  for (int64_t t = 0;; ++t) {
    if (opts.pace > 0.0)
      std::this_thread::sleep_until(
          start + std::chrono::duration_cast<Clock::duration>(
                      std::chrono::duration<double>(t * frame_s / opts.pace)));
    const std::span<const cplx> frame = st.source.Next();
    if (frame.empty()) break;
    ring.Push(frame);
    cv.notify_one();
    if (slot.publications() != seen) {
      seen = slot.publications();
      current = slot.Load();
      if (opts.record_schedule) st.result.schedule.push_back({t, current});
    }
    st.frontend.Process(frame, current.get(), st.sink);
    ++st.result.frames;
  }
  stop.store(true, std::memory_order_release);
  cv.notify_one();
  worker.join();
  if (failure) std::rethrow_exception(failure);
  st.result.ticks = std::move(ticks);
  st.result.skipped_ticks = skipped_total;
}

}  // namespace

RunResult RunStream(const std::vector<std::vector<double>>& input, const PipelineConfig& cfg,
                    const SteeringTable* steering, const RunOptions& opts) {
  if (input.empty()) throw Error(ErrorCode::kInvalidArgument, "no input channels");
  for (const auto& ch : input)
    if (ch.size() != input[0].size())
      throw Error(ErrorCode::kChannelLengthMismatch, "input channels differ in length");
  const int channels = int(input.size());
  cfg.Validate(channels);
  if (opts.replay != nullptr && opts.mode == RunMode::kThreaded)
    throw Error(ErrorCode::kInvalidArgument, "replay needs a single-context mode");

  StreamState st(input, cfg);
  if (opts.replay != nullptr) {
    RunSingleContext(st, nullptr, opts);
  } else {
    Backend backend(cfg, channels, Directions(cfg, channels, steering));
    if (opts.mode == RunMode::kThreaded)
      RunThreaded(st, backend, opts);
    else
      RunSingleContext(st, &backend, opts);
  }
  st.Finish();
  return std::move(st.result);
}

std::string TimingJsonLines(const RunResult& result) {
  std::ostringstream os;
  os.precision(6);
  for (const auto& b : result.frontend_blocks)
    os << "{\"kind\":\"fe\",\"j\":" << b.j << ",\"frames\":" << b.frames
       << ",\"compute_ms\":" << b.compute_ms << "}\n";
  for (const auto& t : result.ticks)
    os << "{\"kind\":\"be\",\"i\":" << t.i << ",\"end_frame\":" << t.end_frame
       << ",\"publish_frame\":" << t.publish_frame << ",\"compute_ms\":" << t.compute_ms
       << ",\"skipped\":" << t.skipped << ",\"published\":" << (t.published ? "true" : "false")
       << "}\n";
  return os.str();
}

double Percentile(std::vector<double> values, double q) {
  if (values.empty()) return 0.0;
  std::sort(values.begin(), values.end());
  const size_t rank = size_t(std::ceil(q * values.size()));
  return values[std::min(values.size() - 1, rank == 0 ? 0 : rank - 1)];
}

}  // namespace dpse

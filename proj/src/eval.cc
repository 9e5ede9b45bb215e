// SPDX-License-Identifier: Apache-2.0

#include "dpse/eval.h"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <functional>
#include <numeric>

#include "dpse/error.h"
#include "dpse/fastmnmf.h"
#include "dpse/kernels.h"
#include "dpse/linalg.h"
#include "dpse/wpe.h"

namespace dpse {
namespace {

constexpr double kCapDb = 100.0;

using Clock = std::chrono::steady_clock;

std::vector<std::vector<double>> WithPrefix(const Scene& scene, size_t prefix) {
  std::vector<std::vector<double>> out(scene.mixture.size());
  for (size_t m = 0; m < out.size(); ++m) {
    const auto& x = scene.mixture[m];
    out[m].reserve(prefix + x.size());
    out[m].insert(out[m].end(), x.end() - std::ptrdiff_t(prefix), x.end());
    out[m].insert(out[m].end(), x.begin(), x.end());
  }
  return out;
}

size_t PrefixSamples(const Scene& scene, const EvalOptions& opts) {
  return std::min(scene.mixture[0].size(), size_t(opts.warmup_frames) * size_t(opts.cfg.stft.hop));
}

// Frame-by-frame processing of the padded signal with the same framing as
// the pipeline. `fn(t, x, out)` consumes frame t ([F x M]) and must have
// written out[t'] for every t' <= t by the time `finish(out)` returns.
using Frames = std::vector<std::vector<cplx>>;
using FrameFn = std::function<void(int, std::span<const cplx>, Frames&)>;

MethodRun ProcessFrames(const std::vector<std::vector<double>>& input, const StftConfig& stft,
                        const FrameFn& fn, const std::function<void(Frames&)>& finish = {}) {
  const size_t pad = size_t(stft.fft_size - stft.hop);
  const size_t len = input[0].size();
  size_t total = pad + len + pad;
  total += (stft.hop - (total - stft.fft_size) % stft.hop) % stft.hop;
  std::vector<std::vector<double>> padded(input.size(), std::vector<double>(total, 0.0));
  for (size_t m = 0; m < input.size(); ++m) std::copy(input[m].begin(), input[m].end(), padded[m].begin() + std::ptrdiff_t(pad));
  const SpectrogramBlock spec = Analyze(padded, stft);
  const int bins = spec.bins(), m_count = spec.channels();
  std::vector<cplx> frame(size_t(bins) * m_count);
  Frames out(spec.frames(), std::vector<cplx>(bins));
  MethodRun run;
  run.frame_ms.reserve(spec.frames());
  for (int t = 0; t < spec.frames(); ++t) {
    for (int f = 0; f < bins; ++f)
      for (int m = 0; m < m_count; ++m) frame[size_t(f) * m_count + m] = spec.at(f, t, m);
    const auto start = Clock::now();
    fn(t, frame, out);
    run.frame_ms.push_back(std::chrono::duration<double, std::milli>(Clock::now() - start).count());
  }
  if (finish) finish(out);
  const std::vector<double> y = Synthesize(out, stft, total);
  run.output.assign(y.begin() + std::ptrdiff_t(pad), y.begin() + std::ptrdiff_t(pad + len));
  return run;
}

// Steering vectors for the target, normalized to 1 at the reference mic.
std::vector<cplx> TargetSteering(const Scene& scene, const EvalOptions& opts) {
  std::vector<cplx> d = scene.steering.ForAzimuth(opts.target_azimuth_deg);
  const int m = scene.steering.channels();
  const int ref = opts.cfg.bf.ref_mic;
  for (size_t f = 0; f < d.size() / m; ++f) {
    const cplx r = d[f * m + ref];
    for (int i = 0; i < m; ++i) d[f * m + i] /= r;
  }
  return d;
}

MethodRun DropPrefix(MethodRun run, size_t prefix) {
  run.output.erase(run.output.begin(), run.output.begin() + std::ptrdiff_t(prefix));
  return run;
}

double Mean(const std::vector<double>& v) {
  return v.empty() ? 0.0 : std::accumulate(v.begin(), v.end(), 0.0) / double(v.size());
}

}  // namespace

double SiSdr(std::span<const double> estimate, std::span<const double> reference) {
  const size_t n = std::min(estimate.size(), reference.size());
  double rr = 0.0, er = 0.0;
  for (size_t i = 0; i < n; ++i) {
    rr += reference[i] * reference[i];
    er += estimate[i] * reference[i];
  }
  if (!(rr > 0.0)) throw Error(ErrorCode::kSilentReference, "reference has no energy");
  const double a = er / rr;
  double target = 0.0, resid = 0.0;
  for (size_t i = 0; i < n; ++i) {
    const double s = a * reference[i];
    const double e = estimate[i] - s;
    target += s * s;
    resid += e * e;
  }
  if (target <= 0.0) return -kCapDb;
  if (resid <= 0.0) return kCapDb;
  return std::clamp(10.0 * std::log10(target / resid), -kCapDb, kCapDb);
}

std::vector<double> SegmentSiSdr(std::span<const double> estimate,
                                 std::span<const double> reference, size_t segment) {
  if (segment == 0) throw Error(ErrorCode::kInvalidArgument, "segment length must be positive");
  const size_t n = std::min(estimate.size(), reference.size());
  std::vector<double> out;
  for (size_t s = 0; s < n; s += segment) {
    const size_t len = std::min(segment, n - s);
    if (2 * len < segment) break;
    out.push_back(SiSdr(estimate.subspan(s, len), reference.subspan(s, len)));
  }
  return out;
}

MethodRun RunProposed(const Scene& scene, const EvalOptions& opts,
                      const std::vector<SnapshotEvent>* schedule,
                      std::vector<SnapshotEvent>* record) {
  const size_t prefix = PrefixSamples(scene, opts);
  PipelineConfig cfg = opts.cfg;
  cfg.directions_deg = {opts.target_azimuth_deg};
  RunOptions ro;
  ro.mode = RunMode::kDeterministic;
  ro.replay = schedule;
  ro.record_schedule = record != nullptr;
  RunResult r = RunStream(WithPrefix(scene, prefix), cfg, &scene.steering, ro);
  if (record != nullptr) *record = std::move(r.schedule);
  MethodRun run{std::move(r.output), std::move(r.frame_ms)};
  return DropPrefix(std::move(run), prefix);
}

MethodRun RunBaseline(const std::string& method, const Scene& scene, const EvalOptions& opts) {
  const PipelineConfig& cfg = opts.cfg;
  const int m_count = int(scene.mixture.size());
  const int bins = cfg.stft.num_bins();
  const int ref = cfg.bf.ref_mic;
  cfg.bf.Validate(m_count);
  const size_t prefix = PrefixSamples(scene, opts);
  const auto input = WithPrefix(scene, prefix);

  if (method == "noisy") {
    MethodRun run{input[ref], {}};
    return DropPrefix(std::move(run), prefix);
  }

  OnlineWpe wpe(cfg.wpe_front, bins, m_count);
  std::vector<cplx> deverb(size_t(bins) * m_count);
  const auto& k = kernels::Active();
  if (method == "wpe") {
    auto fn = [&](int t, std::span<const cplx> x, Frames& out) {
      wpe.Step(x, deverb);
      for (int f = 0; f < bins; ++f) out[t][f] = deverb[size_t(f) * m_count + ref];
    };
    return DropPrefix(ProcessFrames(input, cfg.stft, fn), prefix);
  }

  const std::vector<cplx> d = TargetSteering(scene, opts);
  if (method == "wpe+ds") {
    std::vector<cplx> w(d);
    for (cplx& v : w) v /= double(m_count);
    auto fn = [&](int t, std::span<const cplx> x, Frames& out) {
      wpe.Step(x, deverb);
      for (int f = 0; f < bins; ++f)
        out[t][f] = k.cdotc(w.data() + size_t(f) * m_count, deverb.data() + size_t(f) * m_count, m_count);
    };
    return DropPrefix(ProcessFrames(input, cfg.stft, fn), prefix);
  }

  if (method == "wpe+mpdr") {
    // Block-EMA mixture covariance on the proposed system's cadence; a
    // block's weights are applied to that block's frames.
    const int mm = m_count * m_count;
    const int t_bf = cfg.bf.t_bf;
    std::vector<cplx> sum(size_t(bins) * mm, 0.0), ema(size_t(bins) * mm, 0.0);
    std::vector<cplx> w(size_t(bins) * m_count, 0.0);
    for (int f = 0; f < bins; ++f) w[size_t(f) * m_count + ref] = 1.0;
    std::vector<cplx> held(size_t(t_bf) * bins * m_count);
    std::vector<cplx> lhs(mm), rhs(m_count);
    std::vector<int> piv(m_count);
    int filled = 0, blocks = 0, last_t = -1;
    auto emit = [&](Frames& out) {
      for (int j = 0; j < filled; ++j)
        for (int f = 0; f < bins; ++f)
          out[last_t - filled + 1 + j][f] = k.cdotc(w.data() + size_t(f) * m_count,
                                                    held.data() + (size_t(j) * bins + f) * m_count, m_count);
    };
    auto fn = [&](int t, std::span<const cplx> x, Frames& out) {
      wpe.Step(x, deverb);
      std::copy(deverb.begin(), deverb.end(), held.begin() + std::ptrdiff_t(size_t(filled) * bins * m_count));
      for (int f = 0; f < bins; ++f) {
        const cplx* xf = deverb.data() + size_t(f) * m_count;
        k.cger_scaled(sum.data() + size_t(f) * mm, xf, xf, m_count, m_count, 1.0, 1.0);
      }
      last_t = t;
      if (++filled < t_bf) return;
      const double a = blocks == 0 ? 1.0 : cfg.bf.alpha;
      for (int f = 0; f < bins; ++f) {
        cplx* r = ema.data() + size_t(f) * mm;
        const cplx* s = sum.data() + size_t(f) * mm;
        for (int i = 0; i < mm; ++i) r[i] = a * s[i] / double(t_bf) + (1.0 - a) * r[i];
        std::copy(r, r + mm, lhs.begin());
        const cplx* df = d.data() + size_t(f) * m_count;
        std::copy(df, df + m_count, rhs.begin());
        if (!SolveInPlace(lhs, m_count, rhs, 1, opts.mpdr_loading, piv)) continue;
        const cplx denom = k.cdotc(df, rhs.data(), m_count);  // d^H R^-1 d
        if (!(denom.real() > 1e-12)) continue;
        for (int i = 0; i < m_count; ++i) w[size_t(f) * m_count + i] = rhs[i] / denom.real();
      }
      std::fill(sum.begin(), sum.end(), cplx(0.0));
      emit(out);
      filled = 0;
      ++blocks;
    };
    return DropPrefix(ProcessFrames(input, cfg.stft, fn, emit), prefix);
  }
  throw Error(ErrorCode::kInvalidArgument, "unknown method '" + method + "'");
}

MethodScore Score(const std::string& method, const MethodRun& run, const Scene& scene,
                  const EvalOptions& opts) {
  const size_t seg = size_t(std::llround(opts.segment_s * scene.spec.sample_rate));
  const auto& ref = scene.references[0];
  const auto& noisy = scene.mixture[scene.spec.ref_mic];
  MethodScore s;
  s.method = method;
  s.segments = SegmentSiSdr(run.output, ref, seg);
  const std::vector<double> base = SegmentSiSdr(noisy, ref, seg);
  s.si_sdr = Mean(s.segments);
  s.improvement = s.si_sdr - Mean(base);
  s.frame_ms = Mean(run.frame_ms);
  s.frame_ms_p95 = run.frame_ms.empty() ? 0.0 : Percentile(run.frame_ms, 0.95);
  return s;
}

std::vector<MethodScore> RunBaselines(const Scene& scene, const EvalOptions& opts,
                                      const std::vector<SnapshotEvent>* schedule) {
  std::vector<MethodScore> rows;
  for (const char* m : {"noisy", "wpe", "wpe+ds", "wpe+mpdr"})
    rows.push_back(Score(m, RunBaseline(m, scene, opts), scene, opts));
  rows.push_back(Score("proposed", RunProposed(scene, opts, schedule), scene, opts));
  return rows;
}

std::vector<GridCell> GridSearch(const Scene& scene, const EvalOptions& opts,
                                 const std::vector<int>& t_bf, const std::vector<double>& alpha_bf,
                                 const std::vector<SnapshotEvent>* schedule) {
  if (t_bf.empty() || alpha_bf.empty()) throw Error(ErrorCode::kInvalidArgument, "empty grid");
  std::vector<SnapshotEvent> recorded;
  if (schedule == nullptr) {
    RunProposed(scene, opts, nullptr, &recorded);
    schedule = &recorded;
  }
  std::vector<GridCell> cells;
  for (int t : t_bf)
    for (double a : alpha_bf) {
      EvalOptions o = opts;
      o.cfg.bf.t_bf = t;
      o.cfg.bf.alpha = a;
      const MethodScore s = Score("proposed", RunProposed(scene, o, schedule), scene, o);
      cells.push_back({t, a, s.si_sdr, s.improvement, s.frame_ms});
    }
  return cells;
}

std::vector<double> OfflineOracle(const Scene& scene, const EvalOptions& opts) {
  const PipelineConfig& cfg = opts.cfg;
  const int m_count = int(scene.mixture.size());
  const int ref = cfg.bf.ref_mic;
  const size_t len = scene.mixture[0].size();
  const size_t pad = size_t(cfg.stft.fft_size - cfg.stft.hop);
  size_t total = pad + len + pad;
  total += (cfg.stft.hop - (total - cfg.stft.fft_size) % cfg.stft.hop) % cfg.stft.hop;
  std::vector<std::vector<double>> padded(m_count, std::vector<double>(total, 0.0));
  for (int m = 0; m < m_count; ++m)
    std::copy(scene.mixture[m].begin(), scene.mixture[m].end(), padded[m].begin() + std::ptrdiff_t(pad));
  const SpectrogramBlock x = Analyze(padded, cfg.stft);

  InitOptions init;
  init.dims = {cfg.sources, m_count, x.bins(), cfg.components};
  init.frames = x.frames();
  init.steering = {scene.steering.ForAzimuth(opts.target_azimuth_deg)};
  init.seed = cfg.seed;
  FastMnmfModel model = InitModel(init);
  FitOptions fo;
  fo.schedule = cfg.schedule;
  fo.track_likelihood = false;
  Fit(model, x, fo);

  Frames out(x.frames(), std::vector<cplx>(x.bins()));
  const int n = model.target_source;
  for (int f = 0; f < x.bins(); ++f)
    for (int t = 0; t < x.frames(); ++t) {
      const FramePosterior p = Posterior(model, f, t);
      const CMat& w = p.wiener[n];
      cplx s = 0.0;
      for (int j = 0; j < m_count; ++j) s += w(ref, j) * x.at(f, t, j);
      out[t][f] = s;
    }
  const std::vector<double> y = Synthesize(out, cfg.stft, total);
  return std::vector<double>(y.begin() + std::ptrdiff_t(pad), y.begin() + std::ptrdiff_t(pad + len));
}

std::vector<double> WindowedImprovement(std::span<const double> estimate, const Scene& scene,
                                        size_t window, size_t hop) {
  if (window == 0 || hop == 0) throw Error(ErrorCode::kInvalidArgument, "window and hop must be positive");
  const std::span<const double> ref(scene.references[0]);
  const std::span<const double> noisy(scene.mixture[scene.spec.ref_mic]);
  const size_t n = std::min(estimate.size(), ref.size());
  std::vector<double> out;
  for (size_t s = 0; s + window <= n; s += hop)
    out.push_back(SiSdr(estimate.subspan(s, window), ref.subspan(s, window)) -
                  SiSdr(noisy.subspan(s, window), ref.subspan(s, window)));
  return out;
}

std::string ScoreTable(const std::vector<MethodScore>& rows) {
  std::string out = "method      si_sdr_db  improvement_db  frame_ms  frame_ms_p95  segments\n";
  char buf[256];
  for (const MethodScore& r : rows) {
    std::snprintf(buf, sizeof buf, "%-10s  %9.2f  %14.2f  %8.3f  %12.3f ", r.method.c_str(), r.si_sdr,
                  r.improvement, r.frame_ms, r.frame_ms_p95);
    out += buf;
    for (double v : r.segments) {
      std::snprintf(buf, sizeof buf, " %.2f", v);
      out += buf;
    }
    out += "\n";
  }
  return out;
}

std::string GridTable(const std::vector<GridCell>& cells) {
  std::string out = "t_bf  alpha_bf  si_sdr_db  improvement_db  frame_ms\n";
  char buf[128];
  for (const GridCell& c : cells) {
    std::snprintf(buf, sizeof buf, "%4d  %8.3f  %9.2f  %14.2f  %8.3f\n", c.t_bf, c.alpha_bf, c.si_sdr,
                  c.improvement, c.frame_ms);
    out += buf;
  }
  return out;
}

}  // namespace dpse

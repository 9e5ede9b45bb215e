// SPDX-License-Identifier: Apache-2.0

#include "dpse/stft.h"

#include <numbers>
#include <random>

#include "doctest.h"
#include "dpse/error.h"

namespace dpse {
namespace {

constexpr double kPi = std::numbers::pi;

std::vector<double> Noise(size_t n, uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> d;
  std::vector<double> x(n);
  for (auto& v : x) v = d(rng);
  return x;
}

double InteriorRms(const std::vector<double>& a, const std::vector<double>& b, size_t edge) {
  double err = 0.0, ref = 0.0;
  for (size_t i = edge; i + edge < a.size(); ++i) {
    err += (a[i] - b[i]) * (a[i] - b[i]);
    ref += a[i] * a[i];
  }
  return std::sqrt(err / ref);
}

std::vector<double> RoundTrip(const std::vector<double>& x, const StftConfig& cfg) {
  const SpectrogramBlock spec = Analyze({x}, cfg);
  std::vector<std::vector<cplx>> frames(spec.frames(), std::vector<cplx>(spec.bins()));
  for (int t = 0; t < spec.frames(); ++t)
    for (int f = 0; f < spec.bins(); ++f) frames[t][f] = spec.at(f, t, 0);
  return Synthesize(frames, cfg, x.size());
}

TEST_CASE("config validation") {
  StftConfig cfg;
  CHECK_NOTHROW(cfg.Validate());
  CHECK(cfg.num_bins() == 513);
  cfg.hop = 300;
  CHECK_THROWS_AS(cfg.Validate(), Error);
}

TEST_CASE("sine peaks at its bin") {
  StftConfig cfg;
  std::vector<double> x(4096);
  for (size_t i = 0; i < x.size(); ++i) x[i] = std::sin(2 * kPi * 1000.0 * i / 16000.0);
  const SpectrogramBlock spec = Analyze({x}, cfg);
  for (int t = 0; t < spec.frames(); ++t) {
    int best = 0;
    for (int f = 1; f < spec.bins(); ++f)
      if (std::abs(spec.at(f, t, 0)) > std::abs(spec.at(best, t, 0))) best = f;
    CHECK(best == 64);
  }
}

TEST_CASE("zero in, zero out") {
  StftConfig cfg;
  std::vector<double> x(2048, 0.0);
  const SpectrogramBlock spec = Analyze({x, x}, cfg);
  for (const cplx& v : spec.data()) CHECK(v == cplx(0.0));
  std::vector<std::vector<cplx>> frames(5, std::vector<cplx>(513));
  for (double s : Synthesize(frames, cfg)) CHECK(s == 0.0);
}

TEST_CASE("impulse spectrum equals the window value") {
  StftConfig cfg;
  const auto win = AnalysisWindow(cfg);
  for (int pos : {0, 100, 512}) {
    std::vector<double> x(1024, 0.0);
    x[pos] = 1.0;
    const SpectrogramBlock spec = Analyze({x}, cfg);
    for (int f = 0; f < 513; f += 37) {
      CHECK(std::abs(spec.at(f, 0, 0)) == doctest::Approx(win[pos]).epsilon(1e-12));
      // Direct DFT of the windowed impulse.
      const cplx ref = std::polar(win[pos], -2 * kPi * f * pos / 1024.0);
      CHECK(std::abs(spec.at(f, 0, 0) - ref) < 1e-12);
    }
  }
}

TEST_CASE("frames match a direct DFT") {
  StftConfig cfg;
  cfg.fft_size = 64;
  cfg.hop = 16;
  const auto x = Noise(256, 3);
  const auto win = AnalysisWindow(cfg);
  const SpectrogramBlock spec = Analyze({x}, cfg);
  CHECK(spec.frames() == 1 + (256 - 64) / 16);
  for (int t = 0; t < spec.frames(); ++t)
    for (int f = 0; f < spec.bins(); ++f) {
      cplx ref = 0.0;
      for (int n = 0; n < 64; ++n)
        ref += win[n] * x[t * 16 + n] * std::polar(1.0, -2 * kPi * f * n / 64.0);
      CHECK(std::abs(spec.at(f, t, 0) - ref) < 1e-12);
    }
}

TEST_CASE("window pair satisfies constant overlap-add") {
  StftConfig cfg;
  const auto wa = AnalysisWindow(cfg), ws = SynthesisWindow(cfg);
  for (int n = 0; n < cfg.hop; ++n) {
    double s = 0.0;
    for (int k = 0; k < cfg.fft_size / cfg.hop; ++k) s += wa[n + k * cfg.hop] * ws[n + k * cfg.hop];
    CHECK(std::abs(s - 1.0) < 1e-10);
  }
}

TEST_CASE("one-sided Parseval") {
  StftConfig cfg;
  const auto x = Noise(4096, 5);
  const auto win = AnalysisWindow(cfg);
  const SpectrogramBlock spec = Analyze({x}, cfg);
  for (int t = 0; t < spec.frames(); t += 3) {
    double time = 0.0;
    for (int n = 0; n < 1024; ++n) time += std::pow(win[n] * x[t * 256 + n], 2);
    double freq = 0.0;
    for (int f = 0; f < 513; ++f)
      freq += (f == 0 || f == 512 ? 1.0 : 2.0) * std::norm(spec.at(f, t, 0));
    CHECK(std::abs(freq / 1024.0 - time) < 1e-9 * time);
  }
}

TEST_CASE("analysis-synthesis round trip") {
  StftConfig cfg;
  const auto noise = Noise(16000, 9);
  CHECK(InteriorRms(noise, RoundTrip(noise, cfg), 1024) < 1e-6);
  std::vector<double> sine(16000);
  for (size_t i = 0; i < sine.size(); ++i) sine[i] = std::sin(2 * kPi * 440.0 * i / 16000.0);
  CHECK(InteriorRms(sine, RoundTrip(sine, cfg), 1024) < 1e-6);
}

TEST_CASE("streaming analyzer and synthesizer agree with the offline path") {
  StftConfig cfg;
  const auto a = Noise(8192, 1), b = Noise(8192, 2);
  const SpectrogramBlock spec = Analyze({a, b}, cfg);
  StftAnalyzer analyzer(cfg, 2);
  StftSynthesizer synth(cfg);
  std::vector<cplx> frame(size_t(cfg.num_bins()) * 2), mono(cfg.num_bins());
  std::vector<double> out, hop(cfg.hop);
  int t = 0;
  for (size_t start = 0; start + cfg.hop <= a.size(); start += cfg.hop) {
    const std::span<const double> chans[2] = {{a.data() + start, size_t(cfg.hop)},
                                              {b.data() + start, size_t(cfg.hop)}};
    if (!analyzer.PushHop(chans, frame)) continue;
    REQUIRE(t < spec.frames());
    for (int f = 0; f < cfg.num_bins(); ++f) {
      CHECK(std::abs(frame[f * 2] - spec.at(f, t, 0)) < 1e-12);
      CHECK(std::abs(frame[f * 2 + 1] - spec.at(f, t, 1)) < 1e-12);
      mono[f] = frame[f * 2];
    }
    synth.PushFrame(mono, hop);
    out.insert(out.end(), hop.begin(), hop.end());
    ++t;
  }
  CHECK(t == spec.frames());
  // Output hop t covers samples t*hop; the interior must match the input.
  for (size_t i = 1024; i + 1024 < out.size(); ++i) CHECK(std::abs(out[i] - a[i]) < 1e-9);
}

TEST_CASE("analysis rejects bad input") {
  StftConfig cfg;
  CHECK_THROWS_AS(Analyze({std::vector<double>(2048), std::vector<double>(2047)}, cfg), Error);
  try {
    Analyze({std::vector<double>(2048), std::vector<double>(2047)}, cfg);
  } catch (const Error& e) {
    CHECK(e.code() == ErrorCode::kChannelLengthMismatch);
  }
  CHECK_THROWS_AS(Analyze({std::vector<double>(100)}, cfg), Error);
}

}  // namespace
}  // namespace dpse

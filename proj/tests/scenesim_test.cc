// SPDX-License-Identifier: Apache-2.0

#include "dpse/scenesim.h"

#include <cmath>
#include <complex>
#include <numbers>
#include <filesystem>

#include "doctest.h"
#include "dpse/error.h"
#include "dpse/fft.h"
#include "dpse/wav.h"

namespace dpse {
namespace {

SceneSpec Small(double rt60) {
  SceneSpec spec;
  spec.duration_s = 1.0;
  spec.mics = {{-0.025, 0.0, 0.0}, {0.025, 0.0, 0.0}};
  spec.reverb.rt60 = rt60;
  spec.noise.enabled = false;
  spec.sources.resize(1);
  return spec;
}

// Delay (samples) of b relative to a from the cross-spectrum phase slope
// below 2 kHz (weighted least squares through the origin).
double PhaseDelay(const std::vector<double>& a, const std::vector<double>& b, double fs) {
  const size_t n = a.size();
  double num = 0.0, den = 0.0;
  for (int k = 1; k * fs / double(n) < 2000.0; ++k) {
    const double w = 2.0 * std::numbers::pi * k / double(n);
    std::complex<double> xa = 0.0, xb = 0.0;
    for (size_t i = 0; i < n; ++i) {
      const std::complex<double> e = std::polar(1.0, -w * double(i));
      xa += a[i] * e;
      xb += b[i] * e;
    }
    const std::complex<double> cross = xa * std::conj(xb);
    const double weight = std::abs(cross);
    num += weight * w * std::arg(cross);
    den += weight * w * w;
  }
  return num / den;
}

TEST_CASE("broadside source reaches both mics identically") {
  const Scene scene = Render(Small(0.0), 3);
  double diff = 0.0;
  for (size_t i = 0; i < scene.mixture[0].size(); ++i)
    diff = std::max(diff, std::abs(scene.mixture[0][i] - scene.mixture[1][i]));
  CHECK(diff <= 1e-10);
}

TEST_CASE("endfire source gives the far-field inter-mic delay") {
  SceneSpec spec = Small(0.0);
  spec.sources[0].schedule = {{0.0, 90.0}};
  const Scene scene = Render(spec, 3);
  // Source at +x: mic 1 (x = +0.025) hears it first.
  const double lag = PhaseDelay(scene.mixture[1], scene.mixture[0], 16000.0);
  CHECK(lag == doctest::Approx(0.05 / 343.0 * 16000.0).epsilon(0.01));
}

TEST_CASE("rendering is deterministic and seed dependent") {
  SceneSpec spec = DefaultSceneSpec();
  spec.duration_s = 2.0;
  spec.sources[1].schedule = {{0.0, 90.0}, {1.0, 225.0}};
  const Scene a = Render(spec, 11);
  const Scene b = Render(spec, 11);
  const Scene c = Render(spec, 12);
  CHECK(a.mixture == b.mixture);
  CHECK(a.images == b.images);
  CHECK(a.mixture != c.mixture);
}

TEST_CASE("mixture is exactly images plus noise") {
  SceneSpec spec = DefaultSceneSpec();
  spec.duration_s = 2.0;
  spec.sources[1].schedule = {{0.0, 90.0}, {1.0, 225.0}};
  const Scene s = Render(spec, 5);
  REQUIRE(s.images.size() == 2);
  for (size_t m = 0; m < s.mixture.size(); ++m)
    for (size_t i = 0; i < s.mixture[m].size(); ++i) {
      double sum = 0.0;
      for (const auto& img : s.images) sum += img[m][i];
      sum += s.noise[m][i];
      REQUIRE(s.mixture[m][i] == sum);
    }
  CHECK(s.references[0] == s.images[0][spec.ref_mic]);
}

TEST_CASE("noise is scaled to the requested SNR at the reference mic") {
  SceneSpec spec = DefaultSceneSpec();
  spec.duration_s = 2.0;
  spec.sources.resize(1);
  spec.noise.snr_db = 7.0;
  const Scene s = Render(spec, 5);
  double et = 0.0, en = 0.0;
  for (size_t i = 0; i < s.noise[0].size(); ++i) {
    et += s.images[0][0][i] * s.images[0][0][i];
    en += s.noise[0][i] * s.noise[0][i];
  }
  CHECK(10.0 * std::log10(et / en) == doctest::Approx(7.0).epsilon(1e-9));
}

TEST_CASE("diffuse noise is weakly coherent between distant mics") {
  SceneSpec spec = DefaultSceneSpec();
  spec.duration_s = 4.0;
  spec.sources.resize(1);
  spec.noise.reverberant = false;
  const Scene s = Render(spec, 5);
  double xy = 0.0, xx = 0.0, yy = 0.0;
  const auto& a = s.noise[0];
  const auto& b = s.noise[2];
  for (size_t i = 0; i < a.size(); ++i) {
    xy += a[i] * b[i];
    xx += a[i] * a[i];
    yy += b[i] * b[i];
  }
  // Pink noise is dominated by low frequencies, where a 12 cm spacing is
  // still fairly coherent; the point is that it is far from 1.
  CHECK(std::abs(xy) / std::sqrt(xx * yy) < 0.9);
}

TEST_CASE("RIR tails decay at the requested rt60") {
  for (double rt60 : {0.2, 0.3, 0.6}) {
    ReverbSpec reverb;
    reverb.rt60 = rt60;
    for (uint64_t seed = 1; seed <= 4; ++seed) {
      const std::vector<double> h =
          MakeRirs({1.5, 0.3, 0.0}, {{0.0, 0.0, 0.0}}, reverb, 16000.0, seed)[0];
      const double est = SchroederRt60(h, 16000.0);
      CHECK(est == doctest::Approx(rt60).epsilon(0.2));
    }
  }
}

TEST_CASE("sparse tails keep their energy and decay") {
  ReverbSpec reverb;
  reverb.rt60 = 0.4;
  reverb.density = 0.3;
  const std::vector<double> h = MakeRirs({2.0, 0.0, 0.0}, {{0.0, 0.0, 0.0}}, reverb, 16000.0, 9)[0];
  CHECK(SchroederRt60(h, 16000.0) == doctest::Approx(0.4).epsilon(0.2));
}

TEST_CASE("late tails are a diffuse field") {
  // Magnitude-squared coherence of the tails at two mics 4 cm apart should
  // follow sinc(k d): high below 1 kHz, low near 6 kHz.
  ReverbSpec reverb;
  reverb.rt60 = 0.5;
  const std::vector<Point3> mics{{0.0, 0.0, 0.0}, {0.04, 0.0, 0.0}};
  const int fft = 256;
  std::vector<cplx> sxy(fft / 2 + 1), sxx(fft / 2 + 1), syy(fft / 2 + 1);
  RealFft rfft(fft);
  std::vector<double> frame(fft);
  std::vector<cplx> a(fft / 2 + 1), b(fft / 2 + 1);
  for (uint64_t seed = 1; seed <= 40; ++seed) {
    const auto h = MakeRirs({0.0, 3.0, 0.0}, mics, reverb, 16000.0, seed);
    // Skip the direct path; take frames well inside the tail.
    for (size_t start = 800; start + fft <= 4000; start += fft) {
      std::copy(h[0].begin() + start, h[0].begin() + start + fft, frame.begin());
      rfft.Forward(frame, a);
      std::copy(h[1].begin() + start, h[1].begin() + start + fft, frame.begin());
      rfft.Forward(frame, b);
      for (size_t k = 0; k < a.size(); ++k) {
        sxy[k] += a[k] * std::conj(b[k]);
        sxx[k] += std::norm(a[k]);
        syy[k] += std::norm(b[k]);
      }
    }
  }
  auto coh = [&](double hz) {
    const size_t k = size_t(std::lround(hz / 16000.0 * fft));
    return std::norm(sxy[k]) / (sxx[k].real() * syy[k].real());
  };
  CHECK(coh(500.0) > 0.8);
  CHECK(coh(6000.0) < 0.3);
}

TEST_CASE("direct path has 1/r gain and the geometric delay") {
  ReverbSpec reverb;
  reverb.rt60 = 0.0;
  const std::vector<double> h = MakeRirs({2.0, 0.0, 0.0}, {{0.0, 0.0, 0.0}}, reverb, 16000.0, 1)[0];
  double sum = 0.0, first = 0.0;
  for (size_t i = 0; i < h.size(); ++i) {
    sum += h[i];
    first += double(i) * h[i];
  }
  CHECK(sum == doctest::Approx(0.5).epsilon(1e-3));  // DC gain of the windowed sinc ~ 1
  CHECK(first / sum == doctest::Approx(2.0 / 343.0 * 16000.0).epsilon(1e-3));
}

TEST_CASE("speech-like signal is unit RMS and syllabic") {
  const std::vector<double> x = SpeechLike(16000 * 8, 16000.0, 4);
  double e = 0.0;
  for (double v : x) e += v * v;
  CHECK(e / x.size() == doctest::Approx(1.0).epsilon(1e-9));
  // Envelope per 20 ms: strong modulation, including near-silent stretches.
  int quiet = 0, loud = 0;
  for (size_t s = 0; s + 320 <= x.size(); s += 320) {
    double p = 0.0;
    for (size_t i = s; i < s + 320; ++i) p += x[i] * x[i];
    p /= 320.0;
    quiet += p < 0.01;
    loud += p > 1.0;
  }
  CHECK(quiet > 20);
  CHECK(loud > 20);
  CHECK(SpeechLike(1000, 16000.0, 4) != SpeechLike(1000, 16000.0, 5));
}

TEST_CASE("steering table covers the azimuth grid") {
  const Scene s = Render(Small(0.0), 1);
  CHECK(s.steering.size() == 72);
  CHECK(s.steering.channels() == 2);
  CHECK(s.steering.bins() == 513);
}

TEST_CASE("scene spec validation") {
  SceneSpec spec = DefaultSceneSpec();
  CHECK_NOTHROW(spec.Validate());
  SceneSpec one_mic = spec;
  one_mic.mics.resize(1);
  CHECK_THROWS_AS(one_mic.Validate(), Error);
  SceneSpec unordered = spec;
  unordered.sources[1].schedule = {{0.0, 90.0}, {0.0, 180.0}};
  CHECK_THROWS_AS(unordered.Validate(), Error);
  SceneSpec loud = spec;
  loud.sources[0].level_db = INFINITY;
  CHECK_THROWS_AS(loud.Validate(), Error);
  SceneSpec few_waves = spec;
  few_waves.noise.waves = 4;
  CHECK_THROWS_AS(few_waves.Validate(), Error);
}

TEST_CASE("default scene matches the evaluation setup") {
  const SceneSpec spec = DefaultSceneSpec();
  CHECK(spec.mics.size() == 4);
  CHECK(spec.reverb.rt60 == 0.3);
  CHECK(spec.duration_s == 60.0);
  CHECK(spec.noise.snr_db == 5.0);
  REQUIRE(spec.sources.size() == 2);
  CHECK(spec.sources[0].schedule.size() == 1);
  CHECK(spec.sources[0].schedule[0].azimuth_deg == 0.0);
  CHECK(spec.sources[1].schedule.size() == 8);
  CHECK(spec.sources[1].schedule[4].start_s == 32.0);
  CHECK(spec.sources[1].schedule[4].azimuth_deg == 90.0);
}

TEST_CASE("scene spec JSON round trip and errors") {
  SceneSpec spec = DefaultSceneSpec();
  spec.reverb.rt60 = 0.25;
  spec.noise.waves = 12;
  const SceneSpec back = SceneSpecFromJson(SceneSpecToJson(spec));
  CHECK(SceneSpecToJson(back) == SceneSpecToJson(spec));
  CHECK(SceneSpecFromJson("{\"duration_s\": 20}").sources[1].schedule.size() == 3);
  CHECK_THROWS_AS(SceneSpecFromJson("{\"rt60\": 1}"), Error);
  CHECK_THROWS_AS(SceneSpecFromJson("{not json"), Error);
  CHECK_THROWS_AS(SceneSpecFromJson("{\"reverb\": {\"rt60\": -1}}"), Error);
}

TEST_CASE("scene save and load") {
  SceneSpec spec = DefaultSceneSpec();
  spec.duration_s = 1.0;
  spec.sources[1].schedule = {{0.0, 90.0}};
  const Scene s = Render(spec, 2);
  const auto dir = std::filesystem::temp_directory_path() / "dpse_scene_test";
  std::filesystem::remove_all(dir);
  SaveScene(s, dir.string());
  const Scene back = LoadScene(dir.string());
  REQUIRE(back.mixture.size() == 4);
  REQUIRE(back.references.size() == 2);
  CHECK(back.images[1].size() == 4);
  double err = 0.0;
  for (size_t i = 0; i < s.mixture[0].size(); ++i)
    err = std::max(err, std::abs(back.mixture[3][i] - s.mixture[3][i]));
  CHECK(err < 1e-6);
  CHECK(back.steering.size() == s.steering.size());
  std::filesystem::remove_all(dir);
}

TEST_CASE("file sources are looped and normalized") {
  const auto path = std::filesystem::temp_directory_path() / "dpse_src.wav";
  WavData w;
  w.channels = {std::vector<double>(4000)};
  for (size_t i = 0; i < 4000; ++i) w.channels[0][i] = 0.1 * std::sin(0.05 * double(i));
  WriteWav(path.string(), w);
  SceneSpec spec = Small(0.0);
  spec.sources[0].signal = "file";
  spec.sources[0].path = path.string();
  const Scene s = Render(spec, 1);
  double e = 0.0;
  for (double v : s.references[0]) e += v * v;
  CHECK(e > 0.0);
  spec.sources[0].path = "/nonexistent/x.wav";
  CHECK_THROWS_AS(Render(spec, 1), Error);
  std::filesystem::remove(path);
}

}  // namespace
}  // namespace dpse

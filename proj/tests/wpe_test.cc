// SPDX-License-Identifier: Apache-2.0

#include "dpse/wpe.h"

#include <cmath>

#include "doctest.h"
#include "dpse/error.h"
#include "test_util.h"

namespace dpse {
namespace {

using testing::RandBlock;
using testing::RandC;

double Energy(const SpectrogramBlock& b) {
  double e = 0.0;
  for (const cplx& v : b.data()) e += std::norm(v);
  return e;
}

TEST_CASE("offline WPE leaves uncorrelated frames alone") {
  std::mt19937_64 rng(1);
  const SpectrogramBlock in = RandBlock(2, 30000, 2, rng);
  const SpectrogramBlock out = OfflineWpe(in, {});
  double diff = 0.0;
  for (size_t i = 0; i < in.data().size(); ++i) diff += std::norm(in.data()[i] - out.data()[i]);
  CHECK(diff / Energy(in) <= 1e-3);
}

TEST_CASE("offline WPE removes a late echo") {
  std::mt19937_64 rng(2);
  const int frames = 2000, lag = 4;  // delay + 1
  SpectrogramBlock dry = RandBlock(3, frames, 2, rng);
  SpectrogramBlock wet = dry;
  const cplx gain[2] = {std::polar(0.5, 0.3), std::polar(0.5, -1.1)};  // 6 dB down
  for (int f = 0; f < 3; ++f)
    for (int t = lag; t < frames; ++t)
      for (int m = 0; m < 2; ++m) wet.at(f, t, m) += gain[m] * dry.at(f, t - lag, 0);
  const SpectrogramBlock out = OfflineWpe(wet, {});
  // Echo level = cross-correlation with the dry signal at the echo lag.
  for (int f = 0; f < 3; ++f)
    for (int m = 0; m < 2; ++m) {
      cplx before = 0.0, after = 0.0;
      for (int t = lag; t < frames; ++t) {
        before += wet.at(f, t, m) * std::conj(dry.at(f, t - lag, 0));
        after += out.at(f, t, m) * std::conj(dry.at(f, t - lag, 0));
      }
      CHECK(10 * std::log10(std::norm(before) / std::norm(after)) >= 10.0);
    }
}

TEST_CASE("offline WPE edge cases") {
  SpectrogramBlock zero(4, 20, 2);
  const SpectrogramBlock out = OfflineWpe(zero, {});
  for (const cplx& v : out.data()) CHECK(v == cplx(0.0));
  try {
    OfflineWpe(SpectrogramBlock(4, 7, 2), {});
    FAIL("expected BlockTooShort");
  } catch (const Error& e) {
    CHECK(e.code() == ErrorCode::kBlockTooShort);
  }
}

TEST_CASE("online WPE passes the first frames through") {
  std::mt19937_64 rng(3);
  WpeConfig cfg;
  OnlineWpe wpe(cfg, 1, 2);
  std::vector<cplx> x(2), y(2);
  for (int t = 0; t < cfg.delay + cfg.taps - 1; ++t) {
    x = {RandC(rng), RandC(rng)};
    wpe.StepBin(0, x, y);
    CHECK(y == x);
    CHECK(MaxAbs(wpe.filter(0)) == 0.0);
  }
  x = {RandC(rng), RandC(rng)};
  wpe.StepBin(0, x, y);
  CHECK(MaxAbs(wpe.filter(0)) > 0.0);
}

// For i.i.d. unit-variance input, R tends to I and every entry of P is an EMA
// of independent products, so E|H|_F^2 ~= M K * M * alpha / (2 - alpha).
double FilterNormAfter(int channels, double alpha, int steps, double* frame_norm) {
  std::mt19937_64 rng(4);
  WpeConfig cfg;
  cfg.alpha = alpha;
  OnlineWpe wpe(cfg, 1, channels);
  std::vector<cplx> x(channels), y(channels);
  *frame_norm = 0.0;
  for (int t = 0; t < steps; ++t) {
    double e = 0.0;
    for (auto& v : x) {
      v = RandC(rng);
      e += std::norm(v);
    }
    *frame_norm += std::sqrt(e) / steps;
    wpe.StepBin(0, x, y);
  }
  return FrobeniusNorm(wpe.filter(0));
}

TEST_CASE("online WPE learns almost nothing from uncorrelated input") {
  double frame_norm = 0.0;
  // Default alpha: the filter norm sits at the i.i.d. noise floor.
  const double h = FilterNormAfter(2, 0.005, 2000, &frame_norm);
  const double expected = std::sqrt(2 * 5 * 2 * 0.005 / (2 - 0.005));
  CHECK(h == doctest::Approx(expected).epsilon(0.3));
  // A longer memory brings it under a tenth of a frame.
  CHECK(FilterNormAfter(1, 0.002, 500, &frame_norm) <= 0.1 * frame_norm);
}

// Batch EMA oracle: R_t = alpha/phi_t xt xt^H + (1-alpha) R_{t-1}, R_0 = I,
// P_t likewise with x_t^H and P_0 = 0. R^{-1} and H = R^{-1} P must match the
// recursion.
void CheckAgainstBatch(int channels, int taps, double alpha, uint64_t seed) {
  std::mt19937_64 rng(seed);
  WpeConfig cfg;
  cfg.taps = taps;
  cfg.alpha = alpha;
  OnlineWpe wpe(cfg, 1, channels);
  const int len = channels * taps;
  CMat r = CMat::Identity(len), p(len, channels);
  std::vector<std::vector<cplx>> hist;
  std::vector<cplx> y(channels);
  for (int t = 0; t < 50; ++t) {
    std::vector<cplx> x(channels);
    for (auto& v : x) v = RandC(rng);
    hist.push_back(x);
    wpe.StepBin(0, x, y);
    if (t < cfg.delay + taps - 1) continue;
    std::vector<cplx> xt;
    for (int k = 0; k < taps; ++k) {
      const auto& fr = hist[t - cfg.delay - k];
      xt.insert(xt.end(), fr.begin(), fr.end());
    }
    const double phi = wpe.last_power(0);
    r = (alpha / phi) * Outer(xt, xt) + (1 - alpha) * r;
    p = (alpha / phi) * Outer(xt, x) + (1 - alpha) * p;
    const CMat rinv = Inverse(r);
    CHECK(MaxAbsDiff(wpe.inverse_correlation(0), rinv) <= 1e-8 * MaxAbs(rinv));
    const CMat h = rinv * p;
    CHECK(MaxAbsDiff(wpe.filter(0), h) <= 1e-8 * MaxAbs(h));
    const CMat ri = wpe.inverse_correlation(0);
    CHECK(MaxAbsDiff(ri, Adjoint(ri)) <= 1e-8 * MaxAbs(ri));
  }
}

TEST_CASE("online WPE recursion equals the inverted batch EMA") {
  CheckAgainstBatch(2, 5, 0.005, 1);
  CheckAgainstBatch(2, 5, 0.1, 2);
  CheckAgainstBatch(1, 3, 0.2, 3);
  CheckAgainstBatch(5, 2, 0.05, 4);
}

TEST_CASE("phi averages the newest delay frames") {
  WpeConfig cfg;
  cfg.delay = 2;
  OnlineWpe wpe(cfg, 1, 2);
  std::vector<cplx> y(2);
  wpe.StepBin(0, std::vector<cplx>{1.0, 1.0}, y);
  CHECK(wpe.last_power(0) == doctest::Approx(0.5));  // only one frame so far
  wpe.StepBin(0, std::vector<cplx>{2.0, 0.0}, y);
  CHECK(wpe.last_power(0) == doctest::Approx((1 + 1 + 4) / 4.0));
  wpe.StepBin(0, std::vector<cplx>{0.0, 0.0}, y);
  CHECK(wpe.last_power(0) == doctest::Approx(1.0));
}

TEST_CASE("online WPE is causal and scale covariant") {
  std::mt19937_64 rng(6);
  const int frames = 60, bins = 3, ch = 2;
  std::vector<cplx> stream(size_t(frames) * bins * ch);
  for (auto& v : stream) v = RandC(rng);
  auto run = [&](const std::vector<cplx>& s) {
    OnlineWpe wpe({}, bins, ch);
    std::vector<cplx> out(s.size());
    for (int t = 0; t < frames; ++t)
      wpe.Step(std::span(s).subspan(size_t(t) * bins * ch, bins * ch),
               std::span(out).subspan(size_t(t) * bins * ch, bins * ch));
    return out;
  };
  const auto base = run(stream);
  auto perturbed = stream;
  const int t0 = 40;
  for (size_t i = size_t(t0) * bins * ch; i < perturbed.size(); ++i) perturbed[i] *= -3.0;
  const auto pert = run(perturbed);
  for (size_t i = 0; i < size_t(t0) * bins * ch; ++i) CHECK(pert[i] == base[i]);

  auto scaled = stream;
  for (auto& v : scaled) v *= 1e3;
  const auto sc = run(scaled);
  for (size_t i = 0; i < base.size(); ++i) CHECK(std::abs(sc[i] - 1e3 * base[i]) < 1e-6 * 1e3);
}

TEST_CASE("silent frames pass through without updating") {
  std::mt19937_64 rng(7);
  OnlineWpe wpe({}, 1, 2);
  std::vector<cplx> y(2);
  for (int t = 0; t < 20; ++t) {
    const std::vector<cplx> zero(2, 0.0);
    wpe.StepBin(0, zero, y);
    CHECK(y == zero);
    CHECK(wpe.last_power(0) >= 0.0);
  }
  CHECK(MaxAbsDiff(wpe.inverse_correlation(0), CMat::Identity(10)) == 0.0);
  CHECK(MaxAbs(wpe.filter(0)) == 0.0);
}

TEST_CASE("divergence resets the bin") {
  WpeConfig cfg;
  cfg.taps = 1;
  cfg.delay = 1;
  cfg.alpha = 0.999;
  OnlineWpe wpe(cfg, 1, 2);
  std::vector<cplx> y(2);
  const std::vector<cplx> x{1.0, 0.0};
  bool threw = false;
  for (int t = 0; t < 20 && !threw; ++t) {
    try {
      wpe.StepBin(0, x, y);
    } catch (const Error& e) {
      CHECK(e.code() == ErrorCode::kNumericalDivergence);
      threw = true;
    }
  }
  CHECK(threw);
  CHECK(MaxAbsDiff(wpe.inverse_correlation(0), CMat::Identity(2)) == 0.0);
  CHECK(wpe.frames_seen(0) == 0);

  cfg.alpha = 1.0;
  CHECK_THROWS_AS(OnlineWpe(cfg, 1, 2), Error);
}

}  // namespace
}  // namespace dpse

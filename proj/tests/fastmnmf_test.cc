// SPDX-License-Identifier: Apache-2.0

#include "dpse/fastmnmf.h"

#include <cmath>
#include <numbers>

#include "doctest.h"
#include "dpse/error.h"
#include "test_util.h"

namespace dpse {
namespace {

using testing::MinEig;
using testing::RandBlock;
using testing::RandC;
using testing::TraceRe;

FastMnmfModel FittedModel(int n, int m, int f, int t, uint64_t seed, int iters = 5) {
  std::mt19937_64 rng(seed);
  InitOptions init;
  init.dims = {n, m, f, 3};
  init.frames = t;
  init.seed = seed;
  FastMnmfModel model = InitModel(init);
  FitOptions opts;
  opts.schedule = {iters, iters / 2};
  opts.track_likelihood = false;
  Fit(model, RandBlock(f, t, m, rng), opts);
  return model;
}

TEST_CASE("init without directions gives identity diagonalizer") {
  InitOptions init;
  init.dims = {3, 3, 5, 2};
  init.frames = 8;
  const FastMnmfModel model = InitModel(init);
  for (int f = 0; f < 5; ++f) {
    CHECK(MaxAbsDiff(model.QInv(f), CMat::Identity(3)) == 0.0);
    CHECK(MaxAbsDiff(model.Q(f), CMat::Identity(3)) == 0.0);
  }
  CHECK(model.G(0, 0, 0) == 1.0);
  CHECK(model.G(0, 0, 1) == doctest::Approx(1e-2));
  CHECK(model.G(2, 4, 2) == 1.0);
  for (double u : model.u) CHECK((u >= 0.5 && u < 1.5));
  for (double v : model.v) CHECK((v >= 0.5 && v < 1.5));
}

TEST_CASE("target steering vector becomes the first column of Q^-1") {
  const int bins = 9;
  std::vector<cplx> steer(size_t(bins) * 2);
  for (int f = 0; f < bins; ++f) {
    steer[f * 2] = 1.0;
    steer[f * 2 + 1] = std::polar(1.0, -0.3 * f);
  }
  InitOptions init;
  init.dims = {2, 2, bins, 2};
  init.frames = 4;
  init.steering = {steer};
  const FastMnmfModel model = InitModel(init);
  for (int f = 0; f < bins; ++f) {
    const CMat qi = model.QInv(f);
    CHECK(std::abs(qi(0, 0) - steer[f * 2] / std::sqrt(2.0)) < 1e-15);
    CHECK(std::abs(qi(1, 0) - steer[f * 2 + 1] / std::sqrt(2.0)) < 1e-15);
    // second column orthogonal to the first
    CHECK(std::abs(std::conj(qi(0, 0)) * qi(0, 1) + std::conj(qi(1, 0)) * qi(1, 1)) < 1e-12);
    CHECK(MaxAbsDiff(model.Q(f) * qi, CMat::Identity(2)) < 1e-12);
  }
}

TEST_CASE("parallel steering vectors fall back to a perturbed diagonalizer") {
  std::vector<cplx> steer(4, 1.0);
  InitOptions init;
  init.dims = {2, 2, 2, 2};
  init.frames = 4;
  init.steering = {steer, steer};
  const FastMnmfModel model = InitModel(init);
  for (int f = 0; f < 2; ++f) CHECK(MaxAbsDiff(model.Q(f) * model.QInv(f), CMat::Identity(2)) < 1e-8);

  init.steering = {steer, steer, steer};
  CHECK_THROWS_AS(InitModel(init), Error);
}

TEST_CASE("init and fit are deterministic") {
  std::mt19937_64 rng(11);
  const SpectrogramBlock block = RandBlock(7, 16, 3, rng);
  InitOptions init;
  init.dims = {2, 3, 7, 2};
  init.frames = 16;
  init.seed = 99;
  FastMnmfModel a = InitModel(init), b = InitModel(init);
  CHECK(a.u == b.u);
  CHECK(a.v == b.v);
  Fit(a, block);
  Fit(b, block);
  CHECK(a.q == b.q);
  CHECK(a.g == b.g);
  CHECK(a.v == b.v);
}

TEST_CASE("single-channel single-source fit is monotone NMF") {
  std::mt19937_64 rng(3);
  const SpectrogramBlock block = RandBlock(12, 20, 1, rng);
  InitOptions init;
  init.dims = {1, 1, 12, 3};
  init.frames = 20;
  FastMnmfModel model = InitModel(init);
  const FitReport rep = Fit(model, block);
  REQUIRE(rep.loglik.size() == 51);
  for (size_t s = 1; s < rep.loglik.size(); ++s)
    CHECK(rep.loglik[s] >= rep.loglik[s - 1] - 1e-6 * std::abs(rep.loglik[s - 1]));
}

TEST_CASE("random four-channel fit ends above its start") {
  std::mt19937_64 rng(5);
  const SpectrogramBlock block = RandBlock(9, 32, 4, rng);
  InitOptions init;
  init.dims = {3, 4, 9, 4};
  init.frames = 32;
  init.seed = 17;
  FastMnmfModel model = InitModel(init);
  const FitReport rep = Fit(model, block);
  CHECK(rep.loglik.back() > rep.loglik.front());
  CHECK(rep.loglik.front() == doctest::Approx(LogLikelihood(InitModel(init), block)));
  CHECK(rep.loglik.back() == doctest::Approx(LogLikelihood(model, block)).epsilon(1e-9));
  CHECK(model.per_frequency_gains);
  for (int f = 0; f < 9; ++f) CHECK(MaxAbsDiff(model.Q(f) * model.QInv(f), CMat::Identity(4)) < 1e-8);
  for (double u : model.u) CHECK(u > 0.0);
  for (int n = 0; n < 3; ++n)
    for (int f = 0; f < 9; ++f) {
      double s = 0.0;
      for (int m = 0; m < 4; ++m) s += model.G(n, f, m);
      CHECK(s == doctest::Approx(4.0));
    }
  const std::string json = FitReportJsonLines(rep);
  CHECK(std::count(json.begin(), json.end(), '\n') == 51);
}

TEST_CASE("orthogonal spatial signatures separate onto their own channels") {
  std::mt19937_64 rng(21);
  const int bins = 16, frames = 64;
  SpectrogramBlock block(bins, frames, 2);
  std::uniform_real_distribution<double> uni(0.0, 1.0);
  for (int f = 0; f < bins; ++f)
    for (int t = 0; t < frames; ++t) {
      // Source A is loud in the first half, B in the second.
      const double pa = (t < frames / 2 ? 4.0 : 0.25) * (0.5 + uni(rng));
      const double pb = (t < frames / 2 ? 0.25 : 4.0) * (0.5 + uni(rng));
      block.at(f, t, 0) = std::sqrt(pa) * RandC(rng);
      block.at(f, t, 1) = std::sqrt(pb) * RandC(rng);
    }
  InitOptions init;
  init.dims = {2, 2, bins, 2};
  init.frames = frames;
  init.seed = 4;
  FastMnmfModel model = InitModel(init);
  Fit(model, block);
  for (int f = 0; f < bins; ++f) {
    // Spatial covariance of each source in the Q domain is diag(g_n).
    for (int n = 0; n < 2; ++n) {
      const double own = model.G(n, f, n);
      const double total = model.G(n, f, 0) + model.G(n, f, 1);
      CHECK(own / total >= 0.95);
    }
    // Q stays close to diagonal: the mixture channels were never mixed.
    const CMat q = model.Q(f);
    CHECK(std::abs(q(0, 1)) < 0.2 * std::abs(q(0, 0)));
    CHECK(std::abs(q(1, 0)) < 0.2 * std::abs(q(1, 1)));
  }
}

TEST_CASE("permuting sources at init permutes the fit") {
  std::mt19937_64 rng(8);
  const SpectrogramBlock block = RandBlock(6, 24, 3, rng);
  InitOptions init;
  init.dims = {3, 3, 6, 2};
  init.frames = 24;
  init.seed = 12;
  FastMnmfModel a = InitModel(init);
  FastMnmfModel b = a;
  const int perm[3] = {2, 0, 1};  // b's source perm[n] is a's source n
  for (int n = 0; n < 3; ++n) {
    for (int f = 0; f < 6; ++f) {
      for (int c = 0; c < 2; ++c) b.U(perm[n], c, f) = a.U(n, c, f);
      for (int m = 0; m < 3; ++m) b.G(perm[n], f, m) = a.G(n, f, m);
    }
    for (int c = 0; c < 2; ++c)
      for (int t = 0; t < 24; ++t) b.V(perm[n], c, t) = a.V(n, c, t);
  }
  FitOptions opts;
  opts.schedule = {12, 8};
  Fit(a, block, opts);
  Fit(b, block, opts);
  for (int n = 0; n < 3; ++n)
    for (int f = 0; f < 6; ++f)
      for (int m = 0; m < 3; ++m)
        CHECK(b.G(perm[n], f, m) == doctest::Approx(a.G(n, f, m)).epsilon(1e-8));
  for (int f = 0; f < 6; ++f) CHECK(MaxAbsDiff(a.Q(f), b.Q(f)) < 1e-8 * MaxAbs(a.Q(f)));
}

TEST_CASE("posterior edge cases") {
  SUBCASE("single source passes everything") {
    FastMnmfModel model = FittedModel(1, 2, 4, 8, 1);
    const FramePosterior p = Posterior(model, 2, 3);
    CHECK(MaxAbsDiff(p.wiener[0], CMat::Identity(2)) < 1e-12);
    CHECK(MaxAbs(p.cov[0]) < 1e-12 * model.Psd(0, 2, 3));
  }
  SUBCASE("equal sources split evenly") {
    InitOptions init;
    init.dims = {2, 2, 3, 1};
    init.frames = 4;
    FastMnmfModel model = InitModel(init);
    std::fill(model.u.begin(), model.u.end(), 1.0);
    std::fill(model.v.begin(), model.v.end(), 1.0);
    std::fill(model.g.begin(), model.g.end(), 1.0);
    const FramePosterior p = Posterior(model, 1, 1);
    for (int n = 0; n < 2; ++n)
      CHECK(MaxAbsDiff(p.wiener[n], 0.5 * CMat::Identity(2)) < 1e-15);
  }
}

TEST_CASE("posteriors partition the mixture and have PSD covariances") {
  for (uint64_t seed = 1; seed <= 5; ++seed) {
    FastMnmfModel model = FittedModel(2, 3, 5, 12, seed);
    for (int f = 0; f < 5; ++f)
      for (int t = 0; t < 12; t += 3) {
        const FramePosterior p = Posterior(model, f, t);
        CMat sum = p.wiener[0] + p.wiener[1];
        CHECK(MaxAbsDiff(sum, CMat::Identity(3)) < 1e-10);
        for (const CMat& s : p.cov) {
          CHECK(MaxAbsDiff(s, Adjoint(s)) == 0.0);
          CHECK(MinEig(s) >= -1e-10 * TraceRe(s));
        }
        // Closed form (I - W) Q^-1 diag(lambda g) Q^-H.
        for (int n = 0; n < 2; ++n) {
          CMat d(3, 3);
          for (int m = 0; m < 3; ++m) d(m, m) = model.Psd(n, f, t) * model.G(n, f, m);
          const CMat ref = (CMat::Identity(3) - p.wiener[n]) * model.QInv(f) * d *
                           Adjoint(model.QInv(f));
          CHECK(MaxAbsDiff(ref, p.cov[n]) < 1e-10 * MaxAbs(ref));
        }
      }
  }
}

TEST_CASE("block mean in the diagonal domain matches explicit averaging") {
  FastMnmfModel model = FittedModel(3, 4, 6, 10, 7);
  std::vector<std::vector<FramePosterior>> frames(6);
  for (int f = 0; f < 6; ++f)
    for (int t = 0; t < 10; ++t) frames[f].push_back(Posterior(model, f, t));
  const PosteriorMean fast = BlockPosteriorMean(model);
  const PosteriorMean slow = AveragePosteriors(frames, 3, 4);
  double scale = 0.0;
  for (const cplx& v : slow.cov) scale = std::max(scale, std::abs(v));
  for (size_t i = 0; i < fast.wiener.size(); ++i) {
    CHECK(std::abs(fast.wiener[i] - slow.wiener[i]) < 1e-12);
    CHECK(std::abs(fast.cov[i] - slow.cov[i]) < 1e-12 * scale);
  }
}

TEST_CASE("snapshot averaging") {
  FastMnmfModel model = FittedModel(2, 2, 3, 6, 2);
  const PosteriorMean mean = BlockPosteriorMean(model);

  SUBCASE("first block is the plain mean whatever alpha") {
    const PosteriorSnapshot s = PublishSnapshot(mean, nullptr, 0.1);
    CHECK(s.block_index() == 1);
    for (int n = 0; n < 2; ++n)
      for (int f = 0; f < 3; ++f)
        for (int i = 0; i < 4; ++i) CHECK(s.wiener(n, f)[i] == mean.wiener[(n * 3 + f) * 4 + i]);
  }
  SUBCASE("alpha one ignores history") {
    PosteriorSnapshot prev = PosteriorSnapshot::PassThrough(2, 3, 2, 0);
    const PosteriorSnapshot s = PublishSnapshot(mean, &prev, 1.0);
    for (int i = 0; i < 4; ++i) CHECK(s.wiener(1, 2)[i] == mean.wiener[(1 * 3 + 2) * 4 + i]);
  }
  SUBCASE("constant input converges geometrically") {
    PosteriorSnapshot s = PosteriorSnapshot::PassThrough(2, 3, 2, 0);
    const double alpha = 0.1;
    const double err0 = std::abs(s.wiener(0, 1)[1] - mean.wiener[(0 * 3 + 1) * 4 + 1]);
    // Treat the pass-through as an already-published history.
    s.set_block_index(1);
    for (int i = 1; i <= 20; ++i) {
      s = PublishSnapshot(mean, &s, alpha);
      const double err = std::abs(s.wiener(0, 1)[1] - mean.wiener[(0 * 3 + 1) * 4 + 1]);
      CHECK(err == doctest::Approx(err0 * std::pow(1 - alpha, i)).epsilon(1e-9));
    }
    CHECK(s.block_index() == 21);
  }
  SUBCASE("linear in the block input") {
    PosteriorMean scaled = mean;
    for (auto& v : scaled.wiener) v *= 2.5;
    for (auto& v : scaled.cov) v *= 2.5;
    const PosteriorSnapshot a = PublishSnapshot(mean, nullptr, 0.3);
    const PosteriorSnapshot b = PublishSnapshot(scaled, nullptr, 0.3);
    CHECK(MaxAbsDiff(2.5 * a.Wiener(1, 1), b.Wiener(1, 1)) < 1e-14);
    CHECK(MaxAbsDiff(2.5 * a.Cov(0, 2), b.Cov(0, 2)) < 1e-12 * MaxAbs(b.Cov(0, 2)));
  }
  SUBCASE("partition of unity and PSD survive averaging") {
    PosteriorSnapshot s = PublishSnapshot(mean, nullptr, 0.1);
    s = PublishSnapshot(BlockPosteriorMean(FittedModel(2, 2, 3, 6, 9)), &s, 0.1);
    for (int f = 0; f < 3; ++f) {
      CHECK(MaxAbsDiff(s.Wiener(0, f) + s.Wiener(1, f), CMat::Identity(2)) < 1e-6);
      for (int n = 0; n < 2; ++n) CHECK(MinEig(s.Cov(n, f)) >= -1e-8 * TraceRe(s.Cov(n, f)));
    }
  }
  CHECK_THROWS_AS(PublishSnapshot(mean, nullptr, 0.0), Error);
}

TEST_CASE("advancing frames shifts activations and pads with the row mean") {
  InitOptions init;
  init.dims = {1, 1, 2, 1};
  init.frames = 4;
  FastMnmfModel model = InitModel(init);
  model.v = {1, 2, 3, 6};
  model.AdvanceFrames(1);
  CHECK(model.v == std::vector<double>{2, 3, 6, 3});
  model.AdvanceFrames(10);
  CHECK(model.v == std::vector<double>{3.5, 3.5, 3.5, 3.5});
}

TEST_CASE("fit rejects a mismatched block") {
  std::mt19937_64 rng(1);
  InitOptions init;
  init.dims = {2, 2, 4, 2};
  init.frames = 8;
  FastMnmfModel model = InitModel(init);
  CHECK_THROWS_AS(Fit(model, RandBlock(4, 9, 2, rng)), Error);
}

}  // namespace
}  // namespace dpse

// SPDX-License-Identifier: Apache-2.0

#include "dpse/config.h"

#include "doctest.h"
#include "dpse/error.h"

namespace dpse {
namespace {

TEST_CASE("config JSON round trip") {
  PipelineConfig cfg;
  cfg.bf.t_bf = 4;
  cfg.bf.alpha = 0.1;
  cfg.bf.psd_floor = 1e-4;
  cfg.alpha_bss = 0.2;
  cfg.wpe_front.alpha = 0.01;
  cfg.components = 6;
  cfg.directions_deg = {10.0, 200.0};
  cfg.seed = 99;
  PipelineConfig back;
  OverlayPipelineConfig(PipelineConfigToJson(cfg), back);
  CHECK(back.bf.t_bf == 4);
  CHECK(back.bf.alpha == 0.1);
  CHECK(back.bf.psd_floor == 1e-4);
  CHECK(back.alpha_bss == 0.2);
  CHECK(back.wpe_front.alpha == 0.01);
  CHECK(back.components == 6);
  CHECK(back.directions_deg == std::vector<double>{10.0, 200.0});
  CHECK(back.seed == 99);
  CHECK(PipelineConfigToJson(back) == PipelineConfigToJson(cfg));
}

TEST_CASE("config overlay keeps absent keys") {
  PipelineConfig cfg;
  cfg.bf.t_bf = 16;
  OverlayPipelineConfig(R"({"bf": {"alpha": 0.5}, "t_bss": 128})", cfg);
  CHECK(cfg.bf.t_bf == 16);
  CHECK(cfg.bf.alpha == 0.5);
  CHECK(cfg.t_bss == 128);
  CHECK(cfg.stft.fft_size == 1024);
}

TEST_CASE("config errors") {
  PipelineConfig cfg;
  CHECK_THROWS_AS(OverlayPipelineConfig("{", cfg), Error);
  CHECK_THROWS_AS(OverlayPipelineConfig(R"({"bogus": 1})", cfg), Error);
  CHECK_THROWS_AS(OverlayPipelineConfig(R"({"bf": {"tbf": 1}})", cfg), Error);
  CHECK_THROWS_AS(OverlayPipelineConfig(R"({"t_bss": "many"})", cfg), Error);
}

}  // namespace
}  // namespace dpse

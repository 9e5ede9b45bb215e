// SPDX-License-Identifier: Apache-2.0

#include "dpse/config.h"

#include <initializer_list>

#include <json.hpp>

#include "dpse/error.h"

namespace dpse {
namespace {

using Json = nlohmann::json;

void CheckKeys(const Json& j, std::initializer_list<const char*> allowed, const std::string& where) {
  if (!j.is_object()) throw Error(ErrorCode::kInvalidArgument, where + " must be an object");
  for (auto it = j.begin(); it != j.end(); ++it) {
    bool ok = false;
    for (const char* k : allowed) ok = ok || it.key() == k;
    if (!ok) throw Error(ErrorCode::kInvalidArgument, "unknown key '" + it.key() + "' in " + where);
  }
}

template <typename T>
void Take(const Json& j, const char* key, T& out) {
  if (j.contains(key)) out = j.at(key).get<T>();
}

}  // namespace

void OverlayPipelineConfig(const std::string& json_text, PipelineConfig& cfg) {
  try {
    const Json j = Json::parse(json_text);
    CheckKeys(j, {"stft", "t_bss", "bss_overlap", "alpha_bss", "bf", "wpe_front", "wpe_back", "sources",
                  "components", "schedule", "directions_deg", "cold_start", "seed"},
              "config");
    if (j.contains("stft")) {
      const Json& s = j["stft"];
      CheckKeys(s, {"fft_size", "hop", "sample_rate"}, "stft");
      Take(s, "fft_size", cfg.stft.fft_size);
      Take(s, "hop", cfg.stft.hop);
      Take(s, "sample_rate", cfg.stft.sample_rate);
    }
    Take(j, "t_bss", cfg.t_bss);
    Take(j, "bss_overlap", cfg.bss_overlap);
    Take(j, "alpha_bss", cfg.alpha_bss);
    if (j.contains("bf")) {
      const Json& b = j["bf"];
      CheckKeys(b, {"t_bf", "alpha", "ref_mic", "loading", "psd_floor", "all_sources"}, "bf");
      Take(b, "t_bf", cfg.bf.t_bf);
      Take(b, "alpha", cfg.bf.alpha);
      Take(b, "ref_mic", cfg.bf.ref_mic);
      Take(b, "loading", cfg.bf.loading);
      Take(b, "psd_floor", cfg.bf.psd_floor);
      Take(b, "all_sources", cfg.bf.all_sources);
    }
    for (const char* name : {"wpe_front", "wpe_back"}) {
      if (!j.contains(name)) continue;
      const Json& w = j[name];
      WpeConfig& dst = std::string(name) == "wpe_front" ? cfg.wpe_front : cfg.wpe_back;
      CheckKeys(w, {"taps", "delay", "iterations", "alpha"}, name);
      Take(w, "taps", dst.taps);
      Take(w, "delay", dst.delay);
      Take(w, "iterations", dst.iterations);
      Take(w, "alpha", dst.alpha);
    }
    Take(j, "sources", cfg.sources);
    Take(j, "components", cfg.components);
    if (j.contains("schedule")) {
      const Json& s = j["schedule"];
      CheckKeys(s, {"total_iters", "warmup_iters"}, "schedule");
      Take(s, "total_iters", cfg.schedule.total_iters);
      Take(s, "warmup_iters", cfg.schedule.warmup_iters);
    }
    Take(j, "directions_deg", cfg.directions_deg);
    Take(j, "cold_start", cfg.cold_start);
    Take(j, "seed", cfg.seed);
  } catch (const Json::exception& e) {
    throw Error(ErrorCode::kInvalidArgument, std::string("config: ") + e.what());
  }
}

std::string PipelineConfigToJson(const PipelineConfig& cfg) {
  Json j;
  j["stft"] = {{"fft_size", cfg.stft.fft_size}, {"hop", cfg.stft.hop}, {"sample_rate", cfg.stft.sample_rate}};
  j["t_bss"] = cfg.t_bss;
  j["bss_overlap"] = cfg.bss_overlap;
  j["alpha_bss"] = cfg.alpha_bss;
  j["bf"] = {{"t_bf", cfg.bf.t_bf}, {"alpha", cfg.bf.alpha}, {"ref_mic", cfg.bf.ref_mic},
             {"loading", cfg.bf.loading}, {"psd_floor", cfg.bf.psd_floor}, {"all_sources", cfg.bf.all_sources}};
  j["wpe_front"] = {{"taps", cfg.wpe_front.taps}, {"delay", cfg.wpe_front.delay},
                    {"alpha", cfg.wpe_front.alpha}};
  j["wpe_back"] = {{"taps", cfg.wpe_back.taps}, {"delay", cfg.wpe_back.delay},
                   {"iterations", cfg.wpe_back.iterations}};
  j["sources"] = cfg.sources;
  j["components"] = cfg.components;
  j["schedule"] = {{"total_iters", cfg.schedule.total_iters}, {"warmup_iters", cfg.schedule.warmup_iters}};
  j["directions_deg"] = cfg.directions_deg;
  j["cold_start"] = cfg.cold_start;
  j["seed"] = cfg.seed;
  return j.dump(2);
}

}  // namespace dpse

// SPDX-License-Identifier: Apache-2.0
//
// JSON form of PipelineConfig. Keys mirror the struct:
//
//   {"stft": {"fft_size": 1024, "hop": 256, "sample_rate": 16000},
//    "t_bss": 256, "bss_overlap": 0.75, "alpha_bss": 0.1,
//    "bf": {"t_bf": 2, "alpha": 0.02, "ref_mic": 0, "loading": 1e-6, "psd_floor": 1e-3},
//    "wpe_front": {"taps": 5, "delay": 3, "alpha": 0.005},
//    "wpe_back": {"taps": 5, "delay": 3, "iterations": 3},
//    "sources": 3, "components": 8,
//    "schedule": {"total_iters": 50, "warmup_iters": 40},
//    "directions_deg": [0], "cold_start": false, "seed": 0}
//
// Absent keys keep the value of the config being overlaid; unknown keys are
// errors.

#ifndef DPSE_CONFIG_H_
#define DPSE_CONFIG_H_

#include <string>

#include "dpse/pipeline.h"

namespace dpse {

// Throws kInvalidArgument on malformed JSON or unknown keys.
void OverlayPipelineConfig(const std::string& json_text, PipelineConfig& cfg);
std::string PipelineConfigToJson(const PipelineConfig& cfg);

}  // namespace dpse

#endif  // DPSE_CONFIG_H_

// SPDX-License-Identifier: Apache-2.0
//
// Minimal RIFF/WAVE reader and writer. Reads PCM 16/24/32-bit and IEEE float
// 32/64-bit (WAVE_FORMAT_EXTENSIBLE included); writes 32-bit float.

#ifndef DPSE_WAV_H_
#define DPSE_WAV_H_

#include <string>
#include <vector>

namespace dpse {

struct WavData {
  double sample_rate = 16000.0;
  std::vector<std::vector<double>> channels;  // [M][L], full scale = 1.0
};

// Throws Error(kIo) on unreadable or unsupported files.
WavData ReadWav(const std::string& path);
void WriteWav(const std::string& path, const WavData& wav);

}  // namespace dpse

#endif  // DPSE_WAV_H_

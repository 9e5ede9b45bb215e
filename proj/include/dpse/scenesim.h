// SPDX-License-Identifier: Apache-2.0
//
// Synthetic multichannel scenes: a static target, sources that jump between
// azimuths on a schedule, diffuse noise and exponentially decaying
// reverberation. Everything is a pure function of the spec and the seed.
//
// Room impulse responses are a direct path (windowed-sinc fractional delay of
// the exact source-to-mic distance, gain 1/r) plus a diffuse late tail: seeded
// Gaussian sequences from random directions on the sphere whose amplitude
// decays by 60 dB over rt60. The tail energy is set so that direct and
// reverberant energy are equal at `critical_distance_m`. Diffuse noise is a
// sum of horizontal plane waves from evenly spread directions, each carrying
// an independent pink-noise signal.

#ifndef DPSE_SCENESIM_H_
#define DPSE_SCENESIM_H_

#include <cstdint>
#include <string>
#include <vector>

#include "dpse/steering.h"
#include "dpse/stft.h"

namespace dpse {

struct SchedulePoint {
  double start_s;
  double azimuth_deg;
};

struct SourceSpec {
  // "speechlike": seeded pink noise with a syllabic envelope; "file": WAV
  // at `path` (first channel, looped to the duration).
  std::string signal = "speechlike";
  std::string path;
  uint64_t seed = 1;
  std::vector<SchedulePoint> schedule{{0.0, 0.0}};
  double distance_m = 1.5;
  double level_db = 0.0;  // dry level relative to unit RMS
};

struct NoiseSpec {
  bool enabled = true;
  double snr_db = 5.0;  // target image vs noise at the reference mic
  uint64_t seed = 1000;
  int waves = 16;
  bool reverberant = true;  // pass each wave's signal through a room tail
};

struct ReverbSpec {
  double rt60 = 0.3;
  double density = 1.0;  // fraction of non-zero tail taps, (0, 1]
  // Sabine estimate for a ~70 m^3 office at rt60 0.3 s and a talker with
  // directivity factor 2.
  double critical_distance_m = 1.2;
};

struct SceneSpec {
  double sample_rate = 16000.0;
  double duration_s = 60.0;
  std::vector<Point3> mics;
  int ref_mic = 0;
  std::vector<SourceSpec> sources;  // sources[0] is the target
  NoiseSpec noise;
  ReverbSpec reverb;
  double steering_step_deg = 5.0;

  // Throws kInvalidArgument.
  void Validate() const;
};

// The criterion scene: 4 mics, rt60 0.3 s, target at 0 deg, an interferer
// cycling through 4 azimuths every 8 s, diffuse noise at 5 dB SNR, 60 s.
SceneSpec DefaultSceneSpec();

SceneSpec SceneSpecFromJson(const std::string& text);
std::string SceneSpecToJson(const SceneSpec& spec);

struct Scene {
  SceneSpec spec;
  std::vector<std::vector<double>> mixture;                  // [M][L]
  std::vector<std::vector<std::vector<double>>> images;      // [S][M][L]
  std::vector<std::vector<double>> noise;                    // [M][L]
  std::vector<std::vector<double>> references;               // [S][L] at ref mic
  SteeringTable steering;
};

// mixture = images[0] + images[1] + ... + noise, summed in that order.
Scene Render(const SceneSpec& spec, uint64_t seed);

// Building blocks, exposed for tests.
std::vector<double> SpeechLike(size_t length, double sample_rate, uint64_t seed);
// One RIR per mic: exact fractional-delay direct path with 1/r gain plus a
// diffuse late tail (plane waves from random directions) of energy
// 1/critical_distance^2 decaying at rt60.
std::vector<std::vector<double>> MakeRirs(const Point3& source, const std::vector<Point3>& mics,
                                          const ReverbSpec& reverb, double sample_rate,
                                          uint64_t seed);
// Source position for azimuth/distance relative to the array centroid.
Point3 SourcePosition(const std::vector<Point3>& mics, double azimuth_deg, double distance_m);
// rt60 estimated from the Schroeder integral of an impulse response (linear
// fit between -5 and -35 dB of the energy decay curve).
double SchroederRt60(const std::vector<double>& rir, double sample_rate);

// Scene files: mixture.wav, ref_<n>.wav, image_<n>.wav, noise.wav,
// steering.bin, scene.json.
void SaveScene(const Scene& scene, const std::string& dir);
Scene LoadScene(const std::string& dir);

}  // namespace dpse

#endif  // DPSE_SCENESIM_H_

// SPDX-License-Identifier: Apache-2.0
//
// Far-field steering vectors and their on-disk table.
//
// Azimuth convention: 0 deg points along +y (broadside of an array laid out on
// the x axis), 90 deg along +x. The unit vector toward a source at azimuth a
// (elevation 0) is (sin a, cos a, 0). Vectors are phase-referenced to mic 0:
// d_m(f) = exp(-j 2 pi f_hz tau_m), tau_m = (p_0 - p_m) . u / c.
//
// File format (little-endian):
//   char[8]  magic "DPSESTV1"
//   u32      version (1)
//   u32      azimuth count A
//   u32      channel count M
//   u32      bin count F
//   u32      fft size
//   f64      sample rate (Hz)
//   f64[A]   azimuths (deg)
//   then for each azimuth, for each mic, F (re, im) f64 pairs.

#ifndef DPSE_STEERING_H_
#define DPSE_STEERING_H_

#include <array>
#include <complex>
#include <span>
#include <string>
#include <vector>

#include "dpse/stft.h"

namespace dpse {

inline constexpr double kSpeedOfSound = 343.0;

using Point3 = std::array<double, 3>;

Point3 DirectionFromAzimuth(double azimuth_deg);

class SteeringTable {
 public:
  SteeringTable() = default;
  SteeringTable(std::vector<double> azimuths_deg, int channels, int bins, int fft_size,
                double sample_rate);

  static SteeringTable FarField(std::span<const Point3> mics,
                                std::vector<double> azimuths_deg, const StftConfig& cfg);

  static SteeringTable Load(const std::string& path);
  void Save(const std::string& path) const;

  int size() const { return int(azimuths_.size()); }
  int channels() const { return channels_; }
  int bins() const { return bins_; }
  int fft_size() const { return fft_size_; }
  double sample_rate() const { return sample_rate_; }
  const std::vector<double>& azimuths() const { return azimuths_; }

  // Index of the azimuth closest to `azimuth_deg` on the circle.
  int NearestIndex(double azimuth_deg) const;
  std::span<cplx> vec(int index, int f) {
    return {data_.data() + (size_t(index) * bins_ + f) * channels_, size_t(channels_)};
  }
  std::span<const cplx> vec(int index, int f) const {
    return {data_.data() + (size_t(index) * bins_ + f) * channels_, size_t(channels_)};
  }
  // [F x M] steering vectors for the nearest tabulated azimuth.
  std::vector<cplx> ForAzimuth(double azimuth_deg) const;

 private:
  std::vector<double> azimuths_;
  int channels_ = 0;
  int bins_ = 0;
  int fft_size_ = 0;
  double sample_rate_ = 0.0;
  std::vector<cplx> data_;  // [A][F][M]
};

}  // namespace dpse

#endif  // DPSE_STEERING_H_

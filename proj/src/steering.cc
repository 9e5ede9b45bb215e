// SPDX-License-Identifier: Apache-2.0

#include "dpse/steering.h"

#include <bit>
#include <cmath>
#include <cstdint>
#include <cstring>
#include <fstream>
#include <numbers>

#include "dpse/error.h"

namespace dpse {
namespace {

static_assert(std::endian::native == std::endian::little,
              "steering table I/O assumes a little-endian host");

constexpr char kMagic[8] = {'D', 'P', 'S', 'E', 'S', 'T', 'V', '1'};

template <typename T>
void Put(std::ofstream& out, T v) {
  out.write(reinterpret_cast<const char*>(&v), sizeof(T));
}

template <typename T>
T Get(std::ifstream& in) {
  T v{};
  in.read(reinterpret_cast<char*>(&v), sizeof(T));
  if (!in) throw Error(ErrorCode::kIo, "truncated steering table");
  return v;
}

}  // namespace

Point3 DirectionFromAzimuth(double azimuth_deg) {
  const double a = azimuth_deg * std::numbers::pi / 180.0;
  return {std::sin(a), std::cos(a), 0.0};
}

SteeringTable::SteeringTable(std::vector<double> azimuths_deg, int channels, int bins,
                             int fft_size, double sample_rate)
    : azimuths_(std::move(azimuths_deg)),
      channels_(channels),
      bins_(bins),
      fft_size_(fft_size),
      sample_rate_(sample_rate),
      data_(azimuths_.size() * size_t(bins) * size_t(channels)) {
  if (azimuths_.empty() || channels <= 0 || bins <= 0)
    throw Error(ErrorCode::kInvalidArgument, "empty steering table");
}

SteeringTable SteeringTable::FarField(std::span<const Point3> mics,
                                      std::vector<double> azimuths_deg,
                                      const StftConfig& cfg) {
  SteeringTable table(std::move(azimuths_deg), int(mics.size()), cfg.num_bins(),
                      cfg.fft_size, cfg.sample_rate);
  for (int a = 0; a < table.size(); ++a) {
    const Point3 u = DirectionFromAzimuth(table.azimuths_[a]);
    for (int f = 0; f < table.bins_; ++f) {
      const double hz = f * cfg.sample_rate / cfg.fft_size;
      auto d = table.vec(a, f);
      for (int m = 0; m < table.channels_; ++m) {
        double proj = 0.0;
        for (int k = 0; k < 3; ++k) proj += (mics[0][k] - mics[m][k]) * u[k];
        const double tau = proj / kSpeedOfSound;
        d[m] = std::polar(1.0, -2.0 * std::numbers::pi * hz * tau);
      }
    }
  }
  return table;
}

int SteeringTable::NearestIndex(double azimuth_deg) const {
  int best = 0;
  double best_dist = 1e300;
  for (int a = 0; a < size(); ++a) {
    double d = std::fmod(std::abs(azimuths_[a] - azimuth_deg), 360.0);
    d = std::min(d, 360.0 - d);
    if (d < best_dist) {
      best_dist = d;
      best = a;
    }
  }
  return best;
}

std::vector<cplx> SteeringTable::ForAzimuth(double azimuth_deg) const {
  const int a = NearestIndex(azimuth_deg);
  const auto* begin = data_.data() + size_t(a) * bins_ * channels_;
  return std::vector<cplx>(begin, begin + size_t(bins_) * channels_);
}

void SteeringTable::Save(const std::string& path) const {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw Error(ErrorCode::kIo, "cannot open " + path + " for writing");
  out.write(kMagic, sizeof(kMagic));
  Put<uint32_t>(out, 1);
  Put<uint32_t>(out, uint32_t(size()));
  Put<uint32_t>(out, uint32_t(channels_));
  Put<uint32_t>(out, uint32_t(bins_));
  Put<uint32_t>(out, uint32_t(fft_size_));
  Put<double>(out, sample_rate_);
  for (double a : azimuths_) Put<double>(out, a);
  for (int a = 0; a < size(); ++a)
    for (int m = 0; m < channels_; ++m)
      for (int f = 0; f < bins_; ++f) {
        const cplx v = vec(a, f)[m];
        Put<double>(out, v.real());
        Put<double>(out, v.imag());
      }
  if (!out) throw Error(ErrorCode::kIo, "failed writing " + path);
}

SteeringTable SteeringTable::Load(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error(ErrorCode::kIo, "cannot open steering table " + path);
  char magic[8];
  in.read(magic, sizeof(magic));
  if (!in || std::memcmp(magic, kMagic, sizeof(kMagic)) != 0)
    throw Error(ErrorCode::kIo, path + " is not a steering table");
  if (Get<uint32_t>(in) != 1) throw Error(ErrorCode::kIo, "unsupported steering table version");
  const uint32_t count = Get<uint32_t>(in);
  const uint32_t channels = Get<uint32_t>(in);
  const uint32_t bins = Get<uint32_t>(in);
  const uint32_t fft_size = Get<uint32_t>(in);
  const double rate = Get<double>(in);
  if (count == 0 || channels == 0 || bins == 0 || count > 100000 || channels > 64 ||
      bins > 65537)
    throw Error(ErrorCode::kIo, "implausible steering table header");
  std::vector<double> az(count);
  for (auto& a : az) a = Get<double>(in);
  SteeringTable table(std::move(az), int(channels), int(bins), int(fft_size), rate);
  for (int a = 0; a < table.size(); ++a)
    for (int m = 0; m < table.channels_; ++m)
      for (int f = 0; f < table.bins_; ++f) {
        const double re = Get<double>(in);
        const double im = Get<double>(in);
        table.vec(a, f)[m] = {re, im};
      }
  return table;
}

}  // namespace dpse

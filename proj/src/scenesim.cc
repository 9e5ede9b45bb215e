// SPDX-License-Identifier: Apache-2.0

#include "dpse/scenesim.h"

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <initializer_list>
#include <numbers>
#include <random>
#include <sstream>

#include <json.hpp>

#include "dpse/error.h"
#include "dpse/fft.h"
#include "dpse/wav.h"

namespace dpse {
namespace {

using Json = nlohmann::json;

constexpr int kHalfTaps = 32;  // windowed-sinc half length
constexpr int kTailWaves = 24;

std::mt19937_64 MakeRng(std::initializer_list<uint64_t> parts) {
  std::vector<uint32_t> words;
  for (uint64_t p : parts) {
    words.push_back(uint32_t(p));
    words.push_back(uint32_t(p >> 32));
  }
  std::seed_seq seq(words.begin(), words.end());
  return std::mt19937_64(seq);
}

// Adds gain * delta(n - delay) band-limited with a Blackman-windowed sinc.
void AddFractionalImpulse(std::vector<double>& h, double delay, double gain) {
  const long n0 = long(std::floor(delay));
  for (long k = n0 - kHalfTaps + 1; k <= n0 + kHalfTaps; ++k) {
    if (k < 0 || k >= long(h.size())) continue;
    const double x = double(k) - delay;
    const double sinc = std::abs(x) < 1e-12 ? 1.0 : std::sin(std::numbers::pi * x) / (std::numbers::pi * x);
    const double u = x / kHalfTaps;
    const double win = 0.42 + 0.5 * std::cos(std::numbers::pi * u) + 0.08 * std::cos(2.0 * std::numbers::pi * u);
    h[size_t(k)] += gain * sinc * win;
  }
}

Point3 Centroid(const std::vector<Point3>& mics) {
  Point3 c{0.0, 0.0, 0.0};
  for (const Point3& p : mics)
    for (int k = 0; k < 3; ++k) c[k] += p[k] / double(mics.size());
  return c;
}

double ArrayRadius(const std::vector<Point3>& mics) {
  const Point3 c = Centroid(mics);
  double r = 0.0;
  for (const Point3& p : mics) {
    double d2 = 0.0;
    for (int k = 0; k < 3; ++k) d2 += (p[k] - c[k]) * (p[k] - c[k]);
    r = std::max(r, std::sqrt(d2));
  }
  return r;
}

size_t TailLength(const ReverbSpec& reverb, double fs) {
  return reverb.rt60 > 0.0 ? size_t(std::ceil(reverb.rt60 * fs)) : 0;
}

// Diffuse late reverberation: kTailWaves seeded, exponentially decaying
// Gaussian sequences, each arriving from a random direction on the sphere and
// reaching mic m with its plane-wave delay. The tail starts just after
// `onset` (samples, at the array centroid); expected energy per mic is
// `energy`.
void AddDiffuseTail(std::vector<std::vector<double>>& h, const std::vector<Point3>& mics,
                    double onset, const ReverbSpec& reverb, double fs, double energy,
                    std::mt19937_64& rng) {
  if (reverb.rt60 <= 0.0) return;
  const double q = std::pow(10.0, -6.0 / (reverb.rt60 * fs));
  const double amp = std::sqrt(energy * (1.0 - q) / reverb.density / kTailWaves);
  const size_t len = TailLength(reverb, fs);
  const Point3 c = Centroid(mics);
  std::normal_distribution<double> gauss;
  std::uniform_real_distribution<double> unit;
  std::vector<double> seq(len), kernel(2 * size_t(kHalfTaps) + 2);
  for (int w = 0; w < kTailWaves; ++w) {
    const double z = 2.0 * unit(rng) - 1.0;
    const double phi = 2.0 * std::numbers::pi * unit(rng);
    const double rho = std::sqrt(1.0 - z * z);
    const Point3 u{rho * std::cos(phi), rho * std::sin(phi), z};
    for (size_t n = 0; n < len; ++n) {
      const double g = gauss(rng);
      const bool on = reverb.density >= 1.0 || unit(rng) < reverb.density;
      seq[n] = on ? amp * std::pow(10.0, -3.0 * double(n + 1) / fs / reverb.rt60) * g : 0.0;
    }
    for (size_t m = 0; m < mics.size(); ++m) {
      double proj = 0.0;
      for (int k = 0; k < 3; ++k) proj += (mics[m][k] - c[k]) * u[k];
      // Tail sample n reaches mic m at onset + 1 + n - proj / c.
      const double arrival = onset + 1.0 - proj / kSpeedOfSound * fs;
      const long base = long(std::floor(arrival)) - kHalfTaps;
      std::fill(kernel.begin(), kernel.end(), 0.0);
      AddFractionalImpulse(kernel, arrival - double(base), 1.0);
      std::vector<double>& hm = h[m];
      for (size_t j = 0; j < kernel.size(); ++j) {
        if (kernel[j] == 0.0) continue;
        for (size_t n = 0; n < len; ++n) {
          const long idx = base + long(j) + long(n);
          if (idx >= 0 && idx < long(hm.size())) hm[size_t(idx)] += kernel[j] * seq[n];
        }
      }
    }
  }
}

std::vector<double> PinkNoise(size_t length, std::mt19937_64& rng) {
  std::normal_distribution<double> gauss;
  double b[7] = {};
  std::vector<double> out(length);
  for (size_t i = 0; i < length; ++i) {
    const double w = gauss(rng);
    b[0] = 0.99886 * b[0] + w * 0.0555179;
    b[1] = 0.99332 * b[1] + w * 0.0750759;
    b[2] = 0.96900 * b[2] + w * 0.1538520;
    b[3] = 0.86650 * b[3] + w * 0.3104856;
    b[4] = 0.55000 * b[4] + w * 0.5329522;
    b[5] = -0.7616 * b[5] - w * 0.0168980;
    out[i] = b[0] + b[1] + b[2] + b[3] + b[4] + b[5] + b[6] + w * 0.5362;
    b[6] = w * 0.115926;
  }
  return out;
}

void NormalizeRms(std::vector<double>& x) {
  double e = 0.0;
  for (double v : x) e += v * v;
  if (e <= 0.0) return;
  const double g = 1.0 / std::sqrt(e / double(x.size()));
  for (double& v : x) v *= g;
}

double Energy(const std::vector<double>& x) {
  double e = 0.0;
  for (double v : x) e += v * v;
  return e;
}

std::vector<double> FileSignal(const SourceSpec& src, size_t length, double fs) {
  WavData wav = ReadWav(src.path);
  if (std::abs(wav.sample_rate - fs) > 1e-6)
    throw Error(ErrorCode::kInvalidArgument,
                src.path + ": sample rate " + std::to_string(wav.sample_rate) + " does not match scene");
  const std::vector<double>& ch = wav.channels[0];
  if (ch.empty()) throw Error(ErrorCode::kInvalidArgument, src.path + " is empty");
  std::vector<double> out(length);
  for (size_t i = 0; i < length; ++i) out[i] = ch[i % ch.size()];
  NormalizeRms(out);
  return out;
}

Point3 ToPoint(const Json& j) {
  if (!j.is_array() || j.size() != 3) throw Error(ErrorCode::kInvalidArgument, "mic position needs 3 coordinates");
  return {j[0].get<double>(), j[1].get<double>(), j[2].get<double>()};
}

void CheckKeys(const Json& j, std::initializer_list<const char*> allowed, const std::string& where) {
  for (auto it = j.begin(); it != j.end(); ++it) {
    if (std::none_of(allowed.begin(), allowed.end(), [&](const char* k) { return it.key() == k; }))
      throw Error(ErrorCode::kInvalidArgument, "unknown key '" + it.key() + "' in " + where);
  }
}

std::vector<double> ChannelOf(const WavData& wav, size_t c, const std::string& name) {
  if (c >= wav.channels.size()) throw Error(ErrorCode::kIo, name + " has too few channels");
  return wav.channels[c];
}

}  // namespace

void SceneSpec::Validate() const {
  auto bad = [](const std::string& what) { throw Error(ErrorCode::kInvalidArgument, what); };
  if (!(sample_rate > 0.0)) bad("sample_rate must be positive");
  if (!(duration_s > 0.0) || !std::isfinite(duration_s)) bad("duration_s must be positive");
  if (mics.size() < 2) bad("need at least 2 microphones");
  if (ref_mic < 0 || ref_mic >= int(mics.size())) bad("ref_mic out of range");
  if (sources.empty()) bad("need at least one source");
  for (const SourceSpec& s : sources) {
    if (s.signal != "speechlike" && s.signal != "file") bad("source signal must be speechlike or file");
    if (s.signal == "file" && s.path.empty()) bad("file source without path");
    if (s.schedule.empty()) bad("empty azimuth schedule");
    if (s.schedule[0].start_s < 0.0) bad("schedule starts before 0");
    for (size_t k = 0; k < s.schedule.size(); ++k) {
      if (!std::isfinite(s.schedule[k].azimuth_deg)) bad("non-finite azimuth");
      if (k > 0 && !(s.schedule[k].start_s > s.schedule[k - 1].start_s))
        bad("schedule times must be strictly increasing");
    }
    if (!(s.distance_m >= 0.1) || !std::isfinite(s.distance_m)) bad("source distance must be >= 0.1 m");
    if (!std::isfinite(s.level_db)) bad("source level must be finite");
  }
  if (noise.enabled) {
    if (!std::isfinite(noise.snr_db)) bad("noise snr_db must be finite");
    if (noise.waves < 8) bad("diffuse noise needs at least 8 plane waves");
  }
  if (!(reverb.rt60 >= 0.0) || !std::isfinite(reverb.rt60)) bad("rt60 must be >= 0");
  if (!(reverb.density > 0.0 && reverb.density <= 1.0)) bad("reverb density must lie in (0, 1]");
  if (!(reverb.critical_distance_m > 0.0)) bad("critical distance must be positive");
  if (!(steering_step_deg > 0.0 && steering_step_deg <= 180.0)) bad("steering step must lie in (0, 180]");
}

namespace {

SourceSpec CyclingInterferer(double duration_s) {
  SourceSpec s;
  s.seed = 2;
  const double cycle[] = {90.0, 225.0, 315.0, 180.0};
  s.schedule.clear();
  for (int k = 0; k * 8.0 < duration_s; ++k) s.schedule.push_back({k * 8.0, cycle[k % 4]});
  return s;
}

}  // namespace

SceneSpec DefaultSceneSpec() {
  SceneSpec spec;
  // Irregular planar array, ~13 cm aperture. Planar so front and back differ.
  spec.mics = {{0.0, 0.0, 0.0}, {0.072, 0.018, 0.0}, {0.118, -0.034, 0.0}, {0.041, -0.081, 0.0}};
  SourceSpec target;
  target.seed = 1;
  target.schedule = {{0.0, 0.0}};
  target.distance_m = 1.0;
  spec.sources = {target, CyclingInterferer(spec.duration_s)};
  return spec;
}

Point3 SourcePosition(const std::vector<Point3>& mics, double azimuth_deg, double distance_m) {
  Point3 c{0.0, 0.0, 0.0};
  for (const Point3& p : mics)
    for (int k = 0; k < 3; ++k) c[k] += p[k] / double(mics.size());
  const Point3 u = DirectionFromAzimuth(azimuth_deg);
  return {c[0] + distance_m * u[0], c[1] + distance_m * u[1], c[2] + distance_m * u[2]};
}

std::vector<std::vector<double>> MakeRirs(const Point3& source, const std::vector<Point3>& mics,
                                          const ReverbSpec& reverb, double sample_rate,
                                          uint64_t seed) {
  const Point3 c = Centroid(mics);
  double rc2 = 0.0;
  for (int k = 0; k < 3; ++k) rc2 += (source[k] - c[k]) * (source[k] - c[k]);
  const double onset = std::sqrt(rc2) / kSpeedOfSound * sample_rate;
  const size_t len = size_t(std::ceil(onset + ArrayRadius(mics) / kSpeedOfSound * sample_rate)) +
                     2 * kHalfTaps + 2 + TailLength(reverb, sample_rate);
  std::vector<std::vector<double>> h(mics.size(), std::vector<double>(len, 0.0));
  for (size_t m = 0; m < mics.size(); ++m) {
    double r2 = 0.0;
    for (int k = 0; k < 3; ++k) r2 += (source[k] - mics[m][k]) * (source[k] - mics[m][k]);
    const double r = std::sqrt(r2);
    AddFractionalImpulse(h[m], r / kSpeedOfSound * sample_rate, 1.0 / r);
  }
  auto rng = MakeRng({seed, 0x52495200});
  const double rcd = reverb.critical_distance_m;
  AddDiffuseTail(h, mics, onset, reverb, sample_rate, 1.0 / (rcd * rcd), rng);
  return h;
}

std::vector<double> SpeechLike(size_t length, double sample_rate, uint64_t seed) {
  auto rng = MakeRng({seed, 0x53504348});
  std::vector<double> pink = PinkNoise(length, rng);
  // High-pass (~100 Hz) the pink noise, and derive a darker low-passed copy
  // (~800 Hz) so syllables can differ in spectral tilt.
  const double hp = std::exp(-2.0 * std::numbers::pi * 100.0 / sample_rate);
  const double lp = std::exp(-2.0 * std::numbers::pi * 800.0 / sample_rate);
  std::vector<double> bright(length), dark(length);
  double prev_in = 0.0, prev_hp = 0.0, state_lp = 0.0;
  for (size_t i = 0; i < length; ++i) {
    const double y = hp * (prev_hp + pink[i] - prev_in);
    prev_in = pink[i];
    prev_hp = y;
    bright[i] = y;
    state_lp = lp * state_lp + (1.0 - lp) * y;
    dark[i] = 3.0 * state_lp;
  }

  std::uniform_real_distribution<double> unit;
  std::vector<double> out(length, 0.0);
  size_t pos = 0;
  while (pos < length) {
    if (unit(rng) < 0.15) {  // pause
      pos += size_t((0.2 + 0.4 * unit(rng)) * sample_rate);
      continue;
    }
    const size_t dur = std::max<size_t>(2, size_t((0.15 + 0.2 * unit(rng)) * sample_rate));
    const double gain = std::exp(-1.2 * unit(rng));
    const double tilt = unit(rng);
    for (size_t i = 0; i < dur && pos + i < length; ++i) {
      const double s = std::sin(std::numbers::pi * double(i) / double(dur));
      out[pos + i] = gain * s * s * (tilt * bright[pos + i] + (1.0 - tilt) * dark[pos + i]);
    }
    pos += dur;
  }
  NormalizeRms(out);
  return out;
}

double SchroederRt60(const std::vector<double>& rir, double sample_rate) {
  std::vector<double> edc(rir.size());
  double acc = 0.0;
  for (size_t i = rir.size(); i-- > 0;) {
    acc += rir[i] * rir[i];
    edc[i] = acc;
  }
  if (acc <= 0.0) throw Error(ErrorCode::kInvalidArgument, "silent impulse response");
  double sx = 0.0, sy = 0.0, sxx = 0.0, sxy = 0.0;
  int n = 0;
  for (size_t i = 0; i < edc.size(); ++i) {
    const double db = 10.0 * std::log10(std::max(edc[i], 1e-300) / acc);
    if (db > -5.0) continue;
    if (db < -35.0) break;
    const double x = double(i);
    sx += x;
    sy += db;
    sxx += x * x;
    sxy += x * db;
    ++n;
  }
  if (n < 2) throw Error(ErrorCode::kInvalidArgument, "decay curve too short for a fit");
  const double slope = (n * sxy - sx * sy) / (n * sxx - sx * sx);  // dB per sample
  return -60.0 / (slope * sample_rate);
}

Scene Render(const SceneSpec& spec, uint64_t seed) {
  spec.Validate();
  const double fs = spec.sample_rate;
  const size_t len = size_t(std::llround(spec.duration_s * fs));
  const int m_count = int(spec.mics.size());
  const int s_count = int(spec.sources.size());

  Scene scene;
  scene.spec = spec;
  scene.images.assign(s_count, std::vector<std::vector<double>>(m_count, std::vector<double>(len, 0.0)));

  for (int s = 0; s < s_count; ++s) {
    const SourceSpec& src = spec.sources[s];
    std::vector<double> dry = src.signal == "file" ? FileSignal(src, len, fs)
                                                   : SpeechLike(len, fs, src.seed ^ (seed * 0x9E3779B97F4A7C15ull));
    const double level = std::pow(10.0, src.level_db / 20.0);
    for (double& v : dry) v *= level;

    for (size_t k = 0; k < src.schedule.size(); ++k) {
      const size_t begin = std::min(len, size_t(std::llround(src.schedule[k].start_s * fs)));
      const size_t end = k + 1 < src.schedule.size()
                             ? std::min(len, size_t(std::llround(src.schedule[k + 1].start_s * fs)))
                             : len;
      if (begin >= end) continue;
      const Point3 pos = SourcePosition(spec.mics, src.schedule[k].azimuth_deg, src.distance_m);
      const std::span<const double> seg(dry.data() + begin, end - begin);
      const uint64_t rir_seed = MakeRng({seed, src.seed, uint64_t(s), k})();
      const auto rirs = MakeRirs(pos, spec.mics, spec.reverb, fs, rir_seed);
      for (int m = 0; m < m_count; ++m) {
        const std::vector<double> y = FftConvolve(seg, rirs[m]);
        std::vector<double>& img = scene.images[s][m];
        for (size_t i = 0; i < y.size() && begin + i < len; ++i) img[begin + i] += y[i];
      }
    }
  }

  scene.noise.assign(m_count, std::vector<double>(len, 0.0));
  if (spec.noise.enabled) {
    const Point3 centroid = Centroid(spec.mics);
    const double radius = ArrayRadius(spec.mics) / kSpeedOfSound * fs;
    const double base = radius + kHalfTaps;
    const size_t tail = spec.noise.reverberant ? TailLength(spec.reverb, fs) : 0;
    const size_t h_len = size_t(std::ceil(base + radius)) + 2 * kHalfTaps + 2 + tail;
    // Discard the first `pre` output samples so the reverberant field is
    // already built up at t = 0.
    const size_t pre = size_t(std::floor(base)) + tail;
    const int waves = spec.noise.waves;
    auto rng = MakeRng({seed, spec.noise.seed, 0x4e4f4953});
    std::uniform_real_distribution<double> unit;
    const double offset = 360.0 / waves * unit(rng);
    for (int w = 0; w < waves; ++w) {
      auto wave_rng = MakeRng({seed, spec.noise.seed, uint64_t(w)});
      const std::vector<double> sig = PinkNoise(len + pre, wave_rng);
      const Point3 u = DirectionFromAzimuth(offset + 360.0 * w / waves);
      std::vector<std::vector<double>> h(m_count, std::vector<double>(h_len, 0.0));
      for (int m = 0; m < m_count; ++m) {
        double proj = 0.0;
        for (int k = 0; k < 3; ++k) proj += (spec.mics[m][k] - centroid[k]) * u[k];
        AddFractionalImpulse(h[m], base - proj / kSpeedOfSound * fs, 1.0);
      }
      if (spec.noise.reverberant) AddDiffuseTail(h, spec.mics, base, spec.reverb, fs, 1.0, wave_rng);
      for (int m = 0; m < m_count; ++m) {
        const std::vector<double> y = FftConvolve(sig, h[m]);
        std::vector<double>& out = scene.noise[m];
        for (size_t i = 0; i < len; ++i) out[i] += y[i + pre];
      }
    }
    const double e_target = Energy(scene.images[0][spec.ref_mic]);
    const double e_noise = Energy(scene.noise[spec.ref_mic]);
    if (e_target > 0.0 && e_noise > 0.0) {
      const double g = std::sqrt(e_target / e_noise * std::pow(10.0, -spec.noise.snr_db / 10.0));
      for (auto& ch : scene.noise)
        for (double& v : ch) v *= g;
    }
  }

  scene.mixture.assign(m_count, std::vector<double>(len, 0.0));
  for (int m = 0; m < m_count; ++m) {
    std::vector<double>& mix = scene.mixture[m];
    for (int s = 0; s < s_count; ++s)
      for (size_t i = 0; i < len; ++i) mix[i] += scene.images[s][m][i];
    for (size_t i = 0; i < len; ++i) mix[i] += scene.noise[m][i];
  }
  for (int s = 0; s < s_count; ++s) scene.references.push_back(scene.images[s][spec.ref_mic]);

  std::vector<double> grid;
  for (double a = 0.0; a < 360.0 - 1e-9; a += spec.steering_step_deg) grid.push_back(a);
  StftConfig stft;
  stft.sample_rate = fs;
  scene.steering = SteeringTable::FarField(spec.mics, std::move(grid), stft);
  return scene;
}

std::string SceneSpecToJson(const SceneSpec& spec) {
  Json j;
  j["sample_rate"] = spec.sample_rate;
  j["duration_s"] = spec.duration_s;
  j["ref_mic"] = spec.ref_mic;
  j["mics"] = Json::array();
  for (const Point3& p : spec.mics) j["mics"].push_back({p[0], p[1], p[2]});
  j["sources"] = Json::array();
  for (const SourceSpec& s : spec.sources) {
    Json js{{"signal", s.signal}, {"path", s.path}, {"seed", s.seed},
            {"distance_m", s.distance_m}, {"level_db", s.level_db}};
    js["schedule"] = Json::array();
    for (const SchedulePoint& p : s.schedule) js["schedule"].push_back({p.start_s, p.azimuth_deg});
    j["sources"].push_back(js);
  }
  j["noise"] = {{"enabled", spec.noise.enabled}, {"snr_db", spec.noise.snr_db}, {"seed", spec.noise.seed},
                {"waves", spec.noise.waves}, {"reverberant", spec.noise.reverberant}};
  j["reverb"] = {{"rt60", spec.reverb.rt60}, {"density", spec.reverb.density},
                 {"critical_distance_m", spec.reverb.critical_distance_m}};
  j["steering_step_deg"] = spec.steering_step_deg;
  return j.dump(2);
}

SceneSpec SceneSpecFromJson(const std::string& text) {
  SceneSpec spec = DefaultSceneSpec();
  try {
    const Json j = Json::parse(text);
    CheckKeys(j, {"sample_rate", "duration_s", "ref_mic", "mics", "sources", "noise", "reverb",
                  "steering_step_deg", "seed"},
              "scene");
    spec.sample_rate = j.value("sample_rate", spec.sample_rate);
    spec.ref_mic = j.value("ref_mic", spec.ref_mic);
    spec.steering_step_deg = j.value("steering_step_deg", spec.steering_step_deg);
    if (j.contains("mics")) {
      spec.mics.clear();
      for (const Json& p : j["mics"]) spec.mics.push_back(ToPoint(p));
    }
    if (j.contains("duration_s")) {
      spec.duration_s = j["duration_s"].get<double>();
      if (!j.contains("sources")) spec.sources[1] = CyclingInterferer(spec.duration_s);
    }
    if (j.contains("sources")) {
      spec.sources.clear();
      for (const Json& js : j["sources"]) {
        CheckKeys(js, {"signal", "path", "seed", "distance_m", "level_db", "schedule"}, "source");
        SourceSpec s;
        s.signal = js.value("signal", s.signal);
        s.path = js.value("path", s.path);
        s.seed = js.value("seed", s.seed);
        s.distance_m = js.value("distance_m", s.distance_m);
        s.level_db = js.value("level_db", s.level_db);
        if (js.contains("schedule")) {
          s.schedule.clear();
          for (const Json& p : js["schedule"]) {
            if (!p.is_array() || p.size() != 2)
              throw Error(ErrorCode::kInvalidArgument, "schedule entries are [start_s, azimuth_deg]");
            s.schedule.push_back({p[0].get<double>(), p[1].get<double>()});
          }
        }
        spec.sources.push_back(std::move(s));
      }
    }
    if (j.contains("noise")) {
      const Json& n = j["noise"];
      CheckKeys(n, {"enabled", "snr_db", "seed", "waves", "reverberant"}, "noise");
      spec.noise.enabled = n.value("enabled", spec.noise.enabled);
      spec.noise.snr_db = n.value("snr_db", spec.noise.snr_db);
      spec.noise.seed = n.value("seed", spec.noise.seed);
      spec.noise.waves = n.value("waves", spec.noise.waves);
      spec.noise.reverberant = n.value("reverberant", spec.noise.reverberant);
    }
    if (j.contains("reverb")) {
      const Json& r = j["reverb"];
      CheckKeys(r, {"rt60", "density", "critical_distance_m"}, "reverb");
      spec.reverb.rt60 = r.value("rt60", spec.reverb.rt60);
      spec.reverb.density = r.value("density", spec.reverb.density);
      spec.reverb.critical_distance_m = r.value("critical_distance_m", spec.reverb.critical_distance_m);
    }
  } catch (const Json::exception& e) {
    throw Error(ErrorCode::kInvalidArgument, std::string("scene spec: ") + e.what());
  }
  spec.Validate();
  return spec;
}

void SaveScene(const Scene& scene, const std::string& dir) {
  namespace fs = std::filesystem;
  fs::create_directories(dir);
  const fs::path root(dir);
  const double rate = scene.spec.sample_rate;
  WriteWav((root / "mixture.wav").string(), {rate, scene.mixture});
  WriteWav((root / "noise.wav").string(), {rate, scene.noise});
  for (size_t s = 0; s < scene.images.size(); ++s) {
    WriteWav((root / ("ref_" + std::to_string(s) + ".wav")).string(), {rate, {scene.references[s]}});
    WriteWav((root / ("image_" + std::to_string(s) + ".wav")).string(), {rate, scene.images[s]});
  }
  scene.steering.Save((root / "steering.bin").string());
  std::ofstream out(root / "scene.json");
  if (!out) throw Error(ErrorCode::kIo, "cannot write scene.json in " + dir);
  out << SceneSpecToJson(scene.spec) << "\n";
}

Scene LoadScene(const std::string& dir) {
  namespace fs = std::filesystem;
  const fs::path root(dir);
  std::ifstream in(root / "scene.json");
  if (!in) throw Error(ErrorCode::kIo, "no scene.json in " + dir);
  std::stringstream text;
  text << in.rdbuf();
  Scene scene;
  scene.spec = SceneSpecFromJson(text.str());
  scene.mixture = ReadWav((root / "mixture.wav").string()).channels;
  scene.noise = ReadWav((root / "noise.wav").string()).channels;
  for (size_t s = 0; s < scene.spec.sources.size(); ++s) {
    const std::string ref = (root / ("ref_" + std::to_string(s) + ".wav")).string();
    scene.references.push_back(ChannelOf(ReadWav(ref), 0, ref));
    scene.images.push_back(ReadWav((root / ("image_" + std::to_string(s) + ".wav")).string()).channels);
  }
  scene.steering = SteeringTable::Load((root / "steering.bin").string());
  if (int(scene.mixture.size()) != int(scene.spec.mics.size()))
    throw Error(ErrorCode::kIo, "mixture channel count does not match scene.json");
  return scene;
}

}  // namespace dpse

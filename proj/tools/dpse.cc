// SPDX-License-Identifier: Apache-2.0
//
// dpse enhance | simulate | eval {baselines,grid,oracle}
//
// Exit codes: 0 success, 1 processing error, 2 usage error.
// DPSE_LOG=error|warn|info|debug sets stderr verbosity (default info).

#include <cstdio>
#include <cstdlib>
#include <fstream>
#include <iostream>
#include <sstream>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "dpse/config.h"
#include "dpse/error.h"
#include "dpse/eval.h"
#include "dpse/pipeline.h"
#include "dpse/scenesim.h"
#include "dpse/wav.h"

namespace {

enum Level { kError = 0, kWarn = 1, kInfo = 2, kDebug = 3 };

Level LogLevel() {
  static const Level level = [] {
    const char* env = std::getenv("DPSE_LOG");
    const std::string v = env ? env : "info";
    if (v == "error") return kError;
    if (v == "warn") return kWarn;
    if (v == "debug") return kDebug;
    return kInfo;
  }();
  return level;
}

void Log(Level level, const std::string& msg) {
  static const char* names[] = {"error", "warn", "info", "debug"};
  if (level <= LogLevel()) std::cerr << "[" << names[level] << "] " << msg << "\n";
}

std::string ReadFile(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw dpse::Error(dpse::ErrorCode::kIo, "cannot read " + path);
  std::stringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

// Flags that override config-file values. Unset flags leave the config alone.
struct Overrides {
  int t_bf = 0;
  double alpha_bf = 0.0, alpha_bss = 0.0, alpha_wpe = 0.0;
  uint64_t seed = 0;
  std::string config;

  void Add(CLI::App* app, bool beamformer = true) {
    app->add_option("--config", config, "pipeline config (JSON)")->check(CLI::ExistingFile);
    if (beamformer) {
      app->add_option("--t-bf", t_bf, "beamformer block length in frames")->check(CLI::PositiveNumber);
      app->add_option("--alpha-bf", alpha_bf, "beamformer EMA weight")->check(CLI::Range(1e-9, 1.0));
    }
    app->add_option("--alpha-bss", alpha_bss, "snapshot EMA weight")->check(CLI::Range(1e-9, 1.0));
    app->add_option("--alpha-wpe", alpha_wpe, "online WPE forgetting weight")->check(CLI::Range(1e-9, 0.999999));
    app->add_option("--seed", seed, "model initialization seed");
  }

  dpse::PipelineConfig Resolve(CLI::App* app) const {
    dpse::PipelineConfig cfg;
    if (!config.empty()) dpse::OverlayPipelineConfig(ReadFile(config), cfg);
    if (t_bf > 0) cfg.bf.t_bf = t_bf;
    if (alpha_bf > 0.0) cfg.bf.alpha = alpha_bf;
    if (alpha_bss > 0.0) cfg.alpha_bss = alpha_bss;
    if (alpha_wpe > 0.0) cfg.wpe_front.alpha = alpha_wpe;
    if (app->count("--seed") > 0) cfg.seed = seed;
    Log(kInfo, "effective config: " + dpse::PipelineConfigToJson(cfg));
    return cfg;
  }
};

struct EnhanceArgs {
  std::string in, steering, out, timing_log;
  double target_az = 0.0;
  bool deterministic = false, threaded = false;
  Overrides ov;
};

int Enhance(const EnhanceArgs& a, CLI::App* app) {
  dpse::PipelineConfig cfg = a.ov.Resolve(app);
  const dpse::WavData wav = dpse::ReadWav(a.in);
  const dpse::SteeringTable table = dpse::SteeringTable::Load(a.steering);
  if (std::abs(wav.sample_rate - cfg.stft.sample_rate) > 1e-6)
    throw dpse::Error(dpse::ErrorCode::kInvalidArgument,
                      "input sample rate " + std::to_string(wav.sample_rate) + " differs from config");
  if (table.channels() != int(wav.channels.size()) || table.bins() != cfg.stft.num_bins())
    throw dpse::Error(dpse::ErrorCode::kInvalidArgument, "steering table does not match input/STFT");
  cfg.directions_deg = {a.target_az};

  dpse::RunOptions ro;
  ro.mode = a.deterministic ? dpse::RunMode::kDeterministic
            : a.threaded    ? dpse::RunMode::kThreaded
                            : dpse::RunMode::kSimulatedRealtime;
  const dpse::RunResult r = dpse::RunStream(wav.channels, cfg, &table, ro);
  dpse::WriteWav(a.out, {wav.sample_rate, {r.output}});
  if (!a.timing_log.empty()) {
    std::ofstream log(a.timing_log);
    if (!log) throw dpse::Error(dpse::ErrorCode::kIo, "cannot write " + a.timing_log);
    log << dpse::TimingJsonLines(r);
  }
  char buf[200];
  std::snprintf(buf, sizeof buf, "%lld frames, front end p95 %.3f ms/frame, %zu ticks (%d skipped)",
                static_cast<long long>(r.frames), dpse::Percentile(r.frame_ms, 0.95), r.ticks.size(),
                r.skipped_ticks);
  Log(kInfo, buf);
  return 0;
}

int Simulate(const std::string& spec_path, uint64_t seed, const std::string& out) {
  const dpse::SceneSpec spec =
      spec_path.empty() ? dpse::DefaultSceneSpec() : dpse::SceneSpecFromJson(ReadFile(spec_path));
  Log(kInfo, "rendering " + std::to_string(spec.duration_s) + " s scene, seed " + std::to_string(seed));
  const dpse::Scene scene = dpse::Render(spec, seed);
  dpse::SaveScene(scene, out);
  Log(kInfo, "wrote " + out);
  return 0;
}

dpse::EvalOptions EvalOpts(const dpse::Scene& scene, const Overrides& ov, CLI::App* app) {
  dpse::EvalOptions o;
  o.cfg = ov.Resolve(app);
  o.target_azimuth_deg = scene.spec.sources[0].schedule[0].azimuth_deg;
  return o;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Dual-process speech enhancement"};
  app.require_subcommand(1);

  EnhanceArgs ea;
  CLI::App* enhance = app.add_subcommand("enhance", "enhance a multichannel WAV file");
  enhance->add_option("--in", ea.in, "M-channel input WAV")->required()->check(CLI::ExistingFile);
  enhance->add_option("--steering", ea.steering, "steering table file")->required()->check(CLI::ExistingFile);
  enhance->add_option("--target-az", ea.target_az, "target azimuth (deg)")->required();
  enhance->add_option("--out", ea.out, "mono output WAV")->required();
  enhance->add_option("--timing-log", ea.timing_log, "per-block timing as JSON lines");
  enhance->add_flag("--deterministic", ea.deterministic, "single context, back end on schedule");
  enhance->add_flag("--threaded", ea.threaded, "run the back end on its own thread");
  ea.ov.Add(enhance);

  std::string spec_path, sim_out;
  uint64_t sim_seed = 0;
  CLI::App* simulate = app.add_subcommand("simulate", "render a synthetic scene");
  simulate->add_option("--spec", spec_path, "scene spec (JSON); default scene if omitted")
      ->check(CLI::ExistingFile);
  simulate->add_option("--seed", sim_seed, "render seed");
  simulate->add_option("--out", sim_out, "output directory")->required();

  CLI::App* eval = app.add_subcommand("eval", "score methods on a rendered scene");
  eval->require_subcommand(1);
  std::string scene_dir;
  Overrides eval_ov;
  std::vector<int> grid_t;
  std::vector<double> grid_a;
  CLI::App* baselines = eval->add_subcommand("baselines", "noisy / WPE / +DS / +MPDR / proposed");
  CLI::App* grid = eval->add_subcommand("grid", "t_bf x alpha_bf grid");
  CLI::App* oracle = eval->add_subcommand("oracle", "offline FastMNMF on the whole signal");
  for (CLI::App* sub : {baselines, grid, oracle}) {
    sub->add_option("--scene", scene_dir, "scene directory from `simulate`")->required()->check(CLI::ExistingDirectory);
    eval_ov.Add(sub, sub != grid);
  }
  grid->add_option("--t-bf", grid_t, "comma-separated t_bf values")->required()->delimiter(',');
  grid->add_option("--alpha-bf", grid_a, "comma-separated alpha_bf values")->required()->delimiter(',');

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int rc = app.exit(e);
    return rc == 0 ? 0 : 2;
  }

  try {
    if (*enhance) {
      if (ea.deterministic && ea.threaded) {
        std::cerr << "--deterministic and --threaded are exclusive\n";
        return 2;
      }
      return Enhance(ea, enhance);
    }
    if (*simulate) return Simulate(spec_path, sim_seed, sim_out);
    const dpse::Scene scene = dpse::LoadScene(scene_dir);
    if (*baselines) {
      std::cout << dpse::ScoreTable(dpse::RunBaselines(scene, EvalOpts(scene, eval_ov, baselines)));
    } else if (*grid) {
      for (int t : grid_t)
        if (t < 1) {
          std::cerr << "--t-bf: values must be >= 1\n";
          return 2;
        }
      for (double a : grid_a)
        if (!(a > 0.0 && a <= 1.0)) {
          std::cerr << "--alpha-bf: values must lie in (0, 1]\n";
          return 2;
        }
      std::cout << dpse::GridTable(dpse::GridSearch(scene, EvalOpts(scene, eval_ov, grid), grid_t, grid_a));
    } else if (*oracle) {
      const dpse::EvalOptions o = EvalOpts(scene, eval_ov, oracle);
      const dpse::MethodRun run{dpse::OfflineOracle(scene, o), {}};
      std::cout << dpse::ScoreTable({dpse::Score("oracle", run, scene, o)});
    }
    return 0;
  } catch (const std::exception& e) {
    Log(kError, e.what());
    return 1;
  }
}

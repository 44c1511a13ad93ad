// gazefix CLI: deterministic gaze-fixation perception experiments.
//
//   gazefix distance-eval [--out DIR] [--seed N] [--noise sv,sw] [--mode M]
//   gazefix scenario      --config FILE [--out DIR] [--seed N] [--frames]
//   gazefix pick-demo     --config FILE [--out DIR] [--seed N]
//   gazefix flow-viz      --config FILE --t SEC --out FILE.ppm

#include "gazefix/commands.hpp"

#include <CLI11.hpp>

#include <cstdio>

namespace {

bool parse_noise(const std::string& s, double& sv, double& sw) {
  return std::sscanf(s.c_str(), "%lf,%lf", &sv, &sw) == 2;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"gaze-fixation perception simulator"};
  app.require_subcommand(1);

  gazefix::DistanceEvalOptions de;
  std::string de_noise, de_out;
  auto* de_cmd = app.add_subcommand(
      "distance-eval", "fixation vs translation-only distance estimation sweep");
  de_cmd->add_option("--out", de_out, "output directory for CSV");
  de_cmd->add_option("--seed", de.seed, "random seed");
  de_cmd->add_option("--noise", de_noise, "odometry noise 'sigma_v,sigma_w'");
  de_cmd->add_option("--mode", de.mode, "fixation|translation|both")
      ->check(CLI::IsMember({"fixation", "translation", "both"}));
  de_cmd->add_option("--distances", de.distances, "grid distances in meters");
  de_cmd->add_flag("--oracle", de.oracle, "exact perception (no renderer)");

  gazefix::ScenarioCmdOptions sc;
  std::uint64_t sc_seed = 0;
  std::string sc_noise;
  bool sc_translation = false;
  auto* sc_cmd = app.add_subcommand("scenario", "run a scenario file end to end");
  sc_cmd->add_option("--config", sc.config_path, "scenario JSON")->required();
  sc_cmd->add_option("--out", sc.out_dir, "output directory");
  auto* sc_seed_opt = sc_cmd->add_option("--seed", sc_seed, "seed override");
  sc_cmd->add_option("--noise", sc_noise, "odometry noise 'sigma_v,sigma_w'");
  sc_cmd->add_flag("--frames", sc.frames, "dump PPM frames and flow images");
  sc_cmd->add_flag("--translation", sc_translation,
                   "translation-only motion (no fixation)");

  gazefix::PickCmdOptions pk;
  std::uint64_t pk_seed = 0;
  auto* pk_cmd = app.add_subcommand("pick-demo", "obstacle-impeded pick behavior");
  pk_cmd->add_option("--config", pk.config_path, "scenario JSON")->required();
  pk_cmd->add_option("--out", pk.out_dir, "output directory");
  auto* pk_seed_opt = pk_cmd->add_option("--seed", pk_seed, "seed override");
  pk_cmd->add_option("--clearance", pk.min_clearance, "required clearance [m]");

  std::string fv_config, fv_out;
  double fv_t = 0.0;
  auto* fv_cmd = app.add_subcommand("flow-viz", "dense optic-flow image at time t");
  fv_cmd->add_option("--config", fv_config, "scenario JSON")->required();
  fv_cmd->add_option("--t", fv_t, "time in seconds")->required();
  fv_cmd->add_option("--out", fv_out, "output PPM path")->required();

  CLI11_PARSE(app, argc, argv);

  try {
    if (de_cmd->parsed()) {
      if (!de_noise.empty() && !parse_noise(de_noise, de.sigma_v, de.sigma_w)) {
        std::fprintf(stderr, "bad --noise, expected 'sigma_v,sigma_w'\n");
        return 2;
      }
      de.out_dir = de_out;
      return gazefix::cmd_distance_eval(de);
    }
    if (sc_cmd->parsed()) {
      if (sc_seed_opt->count() > 0) sc.seed = sc_seed;
      if (!sc_noise.empty()) {
        double sv, sw;
        if (!parse_noise(sc_noise, sv, sw)) {
          std::fprintf(stderr, "bad --noise, expected 'sigma_v,sigma_w'\n");
          return 2;
        }
        sc.sigma_v = sv;
        sc.sigma_w = sw;
      }
      sc.fixation = !sc_translation;
      return gazefix::cmd_scenario(sc);
    }
    if (pk_cmd->parsed()) {
      if (pk_seed_opt->count() > 0) pk.seed = pk_seed;
      return gazefix::cmd_pick_demo(pk);
    }
    if (fv_cmd->parsed()) {
      return gazefix::cmd_flow_viz(fv_config, fv_t, fv_out);
    }
  } catch (const std::exception& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return 2;
  }
  return 2;
}

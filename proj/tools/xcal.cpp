#include <cstdint>
#include <cstdio>
#include <optional>
#include <string>

#include <CLI11.hpp>

#include "xcal/app.hpp"

int main(int argc, char** argv) {
  xcal::app::configure_logging();
  CLI::App cli{"Multi-rig ToF/stereo calibration toolkit"};
  cli.require_subcommand(1);
  cli.set_version_flag("--version", std::string(xcal::io::kToolkitVersion));

  xcal::app::SimulateArgs sim;
  std::string sim_config;
  std::uint64_t sim_seed = 0;
  auto* simulate = cli.add_subcommand("simulate", "Generate a synthetic dataset");
  simulate->add_option("config", sim_config, "Scene config JSON (defaults when omitted)")->check(CLI::ExistingFile);
  simulate->add_option("--out", sim.out, "Output dataset directory")->required();
  auto* sim_seed_opt = simulate->add_option("--seed", sim_seed, "Override the scene seed");

  xcal::app::CalibrateArgs cal;
  std::string cal_config, cal_mode;
  std::uint64_t cal_seed = 0;
  double thr_mm = 0, thr_px = 0;
  int max_iters = 0, ref = 0;
  auto* calibrate = cli.add_subcommand("calibrate", "Calibrate every rig and the network");
  calibrate->add_option("dataset", cal.dataset, "Dataset directory")->required();
  calibrate->add_option("--out", cal.out, "Bundle JSON path")->required();
  auto* cal_config_opt = calibrate->add_option("--config", cal_config, "Pipeline config JSON");
  auto* mode_opt = calibrate->add_option("--mode", cal_mode, "joint, separate, similarity or dlt-only");
  auto* seed_opt = calibrate->add_option("--seed", cal_seed, "RANSAC seed");
  auto* mm_opt = calibrate->add_option("--ransac-threshold-mm", thr_mm, "Plane-fit inlier threshold");
  auto* px_opt = calibrate->add_option("--ransac-threshold-px", thr_px, "Fundamental-fit inlier threshold");
  auto* iters_opt = calibrate->add_option("--max-iters", max_iters, "LM iteration cap");
  auto* ref_opt = calibrate->add_option("--reference-rig", ref, "World frame rig");

  xcal::app::EvaluateArgs ev;
  std::string pairs;
  auto* evaluate = cli.add_subcommand("evaluate", "Report calibration and total error");
  evaluate->add_option("dataset", ev.dataset, "Dataset directory")->required();
  evaluate->add_option("bundle", ev.bundle, "Bundle JSON")->required();
  evaluate->add_option("--out", ev.out, "Report directory")->required();
  auto* pairs_opt = evaluate->add_option("--pairs", pairs, "i:j[,i:j...] (all ordered pairs by default)");

  try {
    cli.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = cli.exit(e);
    return code == 0 ? 0 : xcal::app::kExitInputError;
  }

  if (simulate->parsed()) {
    if (!sim_config.empty()) sim.config = sim_config;
    if (*sim_seed_opt) sim.seed = sim_seed;
    return xcal::app::run_simulate(sim);
  }
  if (calibrate->parsed()) {
    if (*cal_config_opt) cal.config = cal_config;
    if (*mode_opt) cal.mode = cal_mode;
    if (*seed_opt) cal.seed = cal_seed;
    if (*mm_opt) cal.ransac_threshold_mm = thr_mm;
    if (*px_opt) cal.ransac_threshold_px = thr_px;
    if (*iters_opt) cal.max_iters = max_iters;
    if (*ref_opt) cal.reference_rig = ref;
    return xcal::app::run_calibrate(cal);
  }
  if (*pairs_opt) {
    try {
      ev.pairs = xcal::app::parse_pairs(pairs);
    } catch (const xcal::Error& e) {
      std::fprintf(stderr, "[error] evaluate: %s\n", e.what());
      return xcal::app::kExitInputError;
    }
  }
  return xcal::app::run_evaluate(ev);
}

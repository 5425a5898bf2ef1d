#include "xcal/app.hpp"

#include <cstdlib>
#include <fstream>
#include <iomanip>
#include <map>
#include <set>
#include <sstream>

#include <fmt/format.h>
#include <spdlog/sinks/stdout_color_sinks.h>
#include <spdlog/spdlog.h>

#include "xcal/synth.hpp"

namespace xcal::app {

namespace fs = std::filesystem;
using io::Json;

namespace {

[[noreturn]] void input_error(const std::string& msg) { throw Error(ErrorCode::kInputError, msg); }

template <typename F>
int guarded(const char* command, F&& body) {
  try {
    body();
    return kExitOk;
  } catch (const Error& e) {
    spdlog::error("{}: {}", command, e.what());
    return exit_code_for(e.code());
  } catch (const Json::exception& e) {
    spdlog::error("{}: {}", command, e.what());
    return kExitInputError;
  } catch (const fs::filesystem_error& e) {
    spdlog::error("{}: {}", command, e.what());
    return kExitInputError;
  } catch (const std::exception& e) {
    spdlog::error("{}: {}", command, e.what());
    return kExitSolverFailure;
  }
}

std::string format_double(double v) {
  std::ostringstream out;
  out << std::setprecision(17) << v;
  return out.str();
}

Json summary_json(const eval::ErrorReport& report) {
  if (report.empty()) return {{"status", "no data"}, {"count", 0}};
  const auto& s = report.summary();
  Json hist = Json::array();
  for (const std::size_t c : report.histogram()) hist.push_back(c);
  return {{"status", "ok"},
          {"mean_px", s.mean},
          {"median_px", s.median},
          {"max_px", s.max},
          {"count", s.count},
          {"histogram", hist}};
}

struct Row {
  std::string metric;
  std::string scope;
  std::string i;
  std::string j;
  const eval::ErrorReport* report;
};

}  // namespace

int exit_code_for(ErrorCode code) {
  switch (code) {
    case ErrorCode::kInputError:
    case ErrorCode::kEmptyScene:
    case ErrorCode::kInvalidArgument:
      return kExitInputError;
    case ErrorCode::kDisconnectedNetwork:
      return kExitDisconnected;
    case ErrorCode::kContamination:
      return kExitContamination;
    default:
      return kExitSolverFailure;
  }
}

void configure_logging() {
  auto logger = spdlog::stderr_color_mt("xcal");
  logger->set_pattern("[%l] %v");
  spdlog::set_default_logger(logger);
  spdlog::set_level(spdlog::level::warn);
  const char* env = std::getenv("XCAL_LOG");
  if (env == nullptr) return;
  const std::string level(env);
  static const std::map<std::string, spdlog::level::level_enum> levels = {
      {"error", spdlog::level::err},
      {"warn", spdlog::level::warn},
      {"info", spdlog::level::info},
      {"debug", spdlog::level::debug}};
  const auto it = levels.find(level);
  if (it == levels.end()) {
    spdlog::warn("ignoring XCAL_LOG='{}' (expected error, warn, info or debug)", level);
    return;
  }
  spdlog::set_level(it->second);
}

pipeline::CalibrationOptions options_from_json(const Json& j) {
  static const std::set<std::string> known = {
      "mode", "stereo", "projective_edges", "reference_rig", "min_shared_boards", "plane_threshold_mm",
      "fundamental_threshold_px", "ransac_max_iterations", "max_iterations", "seed"};
  if (!j.is_object()) input_error("pipeline config: expected an object");
  for (const auto& [key, value] : j.items()) {
    if (known.count(key) == 0) input_error("pipeline config: unknown key '" + key + "'");
  }
  pipeline::CalibrationOptions o;
  try {
    if (j.contains("mode")) {
      try {
        o.mode = align::refinement_mode_from_string(j["mode"].get<std::string>());
      } catch (const Error& e) {
        input_error(std::string("pipeline config.mode: ") + e.what());
      }
    }
    if (j.contains("stereo")) {
      const std::string s = j["stereo"].get<std::string>();
      if (s == "calibrated") {
        o.stereo = pipeline::StereoModel::kCalibrated;
      } else if (s == "projective") {
        o.stereo = pipeline::StereoModel::kProjective;
      } else {
        input_error("pipeline config.stereo: expected calibrated or projective");
      }
    }
    if (j.contains("projective_edges")) o.projective_edges = j["projective_edges"].get<bool>();
    if (j.contains("reference_rig")) o.reference_rig = j["reference_rig"].get<int>();
    if (j.contains("min_shared_boards")) o.min_shared_boards = j["min_shared_boards"].get<int>();
    if (j.contains("plane_threshold_mm")) o.plane_threshold_mm = j["plane_threshold_mm"].get<double>();
    if (j.contains("fundamental_threshold_px")) {
      o.fundamental_threshold_px = j["fundamental_threshold_px"].get<double>();
    }
    if (j.contains("ransac_max_iterations")) o.ransac_max_iterations = j["ransac_max_iterations"].get<int>();
    if (j.contains("max_iterations")) o.max_iterations = j["max_iterations"].get<int>();
    if (j.contains("seed")) o.seed = j["seed"].get<std::uint64_t>();
  } catch (const Json::exception& e) {
    input_error(std::string("pipeline config: ") + e.what());
  }
  if (!(o.plane_threshold_mm > 0.0)) input_error("plane_threshold_mm must be positive");
  if (!(o.fundamental_threshold_px > 0.0)) input_error("fundamental_threshold_px must be positive");
  if (o.ransac_max_iterations < 1) input_error("ransac_max_iterations must be at least 1");
  if (o.max_iterations < 0) input_error("max_iterations must be non-negative");
  if (o.min_shared_boards < 1) input_error("min_shared_boards must be at least 1");
  return o;
}

Json to_json(const pipeline::CalibrationOptions& o) {
  return {{"mode", align::to_string(o.mode)},
          {"stereo", o.stereo == pipeline::StereoModel::kProjective ? "projective" : "calibrated"},
          {"projective_edges", o.projective_edges},
          {"reference_rig", o.reference_rig},
          {"min_shared_boards", o.min_shared_boards},
          {"plane_threshold_mm", o.plane_threshold_mm},
          {"fundamental_threshold_px", o.fundamental_threshold_px},
          {"ransac_max_iterations", o.ransac_max_iterations},
          {"max_iterations", o.max_iterations},
          {"seed", o.seed}};
}

std::vector<std::pair<int, int>> parse_pairs(const std::string& text) {
  std::vector<std::pair<int, int>> out;
  std::istringstream ss(text);
  std::string item;
  while (std::getline(ss, item, ',')) {
    const auto colon = item.find(':');
    if (colon == std::string::npos) input_error("bad pair '" + item + "' (expected i:j)");
    try {
      std::size_t a = 0;
      std::size_t b = 0;
      const std::string left = item.substr(0, colon);
      const std::string right = item.substr(colon + 1);
      const int i = std::stoi(left, &a);
      const int j = std::stoi(right, &b);
      if (a != left.size() || b != right.size()) throw std::invalid_argument(item);
      out.emplace_back(i, j);
    } catch (const std::logic_error&) {
      input_error("bad pair '" + item + "' (expected i:j)");
    }
  }
  if (out.empty()) input_error("no pairs given");
  return out;
}

int run_simulate(const SimulateArgs& args) {
  return guarded("simulate", [&] {
    synth::SceneConfig config;
    if (args.config) config = io::scene_config_from_json(io::read_json_file(*args.config));
    if (args.seed) config.seed = *args.seed;
    spdlog::info("simulating {} rig(s), seed {}", config.rig_count, config.seed);
    const synth::SyntheticData data = synth::generate_dataset(config);
    io::write_dataset(args.out, data, config);
    const Json config_json = io::to_json(config);
    const Json manifest = {{"version", io::kToolkitVersion},
                           {"config_hash", io::content_hash(config_json.dump())},
                           {"boards", data.dataset.fitting_boards.size() + data.dataset.evaluation_boards.size()},
                           {"views", data.dataset.views.size()}};
    io::write_text_file(args.out / "manifest.json", manifest.dump(2) + "\n");
    spdlog::info("wrote {} views to {}", data.dataset.views.size(), args.out.string());
  });
}

int run_calibrate(const CalibrateArgs& args) {
  return guarded("calibrate", [&] {
    pipeline::CalibrationOptions options;
    if (args.config) options = options_from_json(io::read_json_file(*args.config));
    if (args.mode) {
      try {
        options.mode = align::refinement_mode_from_string(*args.mode);
      } catch (const Error& e) {
        input_error(std::string("--mode: ") + e.what());
      }
    }
    if (args.seed) options.seed = *args.seed;
    if (args.ransac_threshold_mm) options.plane_threshold_mm = *args.ransac_threshold_mm;
    if (args.ransac_threshold_px) options.fundamental_threshold_px = *args.ransac_threshold_px;
    if (args.max_iters) options.max_iterations = *args.max_iters;
    if (args.reference_rig) options.reference_rig = *args.reference_rig;
    const Json resolved = to_json(options);
    options = options_from_json(resolved);

    Dataset dataset = io::read_dataset(args.dataset);
    dataset.rig(options.reference_rig);
    spdlog::info("calibrating {} rig(s) in {} mode", dataset.rigs.size(), align::to_string(options.mode));
    const pipeline::Calibration cal = pipeline::calibrate(dataset, options);
    for (const auto& r : cal.rigs) {
      spdlog::info("rig {}: {} correspondences, error {:.4f} -> {:.4f} px in {} iterations", r.id,
                   r.correspondences, r.result.initial_error, r.result.final_error, r.result.iterations);
    }
    for (const auto& d : cal.discrepancies) {
      spdlog::debug("cycle {}-{}: {:.3g} deg, {:.3g} mm", d.i, d.j, d.rotation_deg, d.translation_mm);
    }
    io::CalibrationBundle bundle = io::make_bundle(cal, resolved, resolved["stereo"].get<std::string>());
    bundle.input_hash = io::directory_hash(args.dataset);
    io::write_text_file(args.out, io::to_json(bundle).dump(2) + "\n");
    spdlog::info("bundle written to {}", args.out.string());
  });
}

int run_evaluate(const EvaluateArgs& args) {
  return guarded("evaluate", [&] {
    const Json bundle_json = io::read_json_file(args.bundle);
    const io::CalibrationBundle bundle = io::bundle_from_json(bundle_json);
    Dataset dataset = io::read_dataset(args.dataset);
    pipeline::check_disjoint(bundle.fitting_boards, bundle.evaluation_boards);
    pipeline::check_disjoint(bundle.fitting_boards, dataset.evaluation_boards);
    const pipeline::CalibrationOptions options = options_from_json(bundle.config);
    const network::NetworkGraph graph = io::build_graph(bundle);

    std::set<int> ids;
    for (const auto& r : bundle.rigs) ids.insert(r.id);
    for (const auto& [i, j] : args.pairs) {
      if (ids.count(i) == 0 || ids.count(j) == 0) {
        input_error("pair " + std::to_string(i) + ":" + std::to_string(j) + " names an unknown rig");
      }
    }
    pipeline::fit_planes(dataset, dataset.evaluation_boards, options.plane_threshold_mm,
                         options.ransac_max_iterations, options.seed);
    const std::vector<pipeline::PairReport> reports = pipeline::evaluate(dataset, graph, args.pairs);

    eval::ErrorReport intra_cal, intra_total, inter_cal, inter_total;
    for (const auto& r : reports) {
      auto& cal = r.i == r.j ? intra_cal : inter_cal;
      auto& tot = r.i == r.j ? intra_total : inter_total;
      cal = cal.merged(r.calibration);
      tot = tot.merged(r.total);
    }
    std::vector<Row> rows;
    for (const auto& r : reports) {
      rows.push_back({"calibration", "pair", std::to_string(r.i), std::to_string(r.j), &r.calibration});
      rows.push_back({"total", "pair", std::to_string(r.i), std::to_string(r.j), &r.total});
    }
    rows.push_back({"calibration", "intra", "*", "*", &intra_cal});
    rows.push_back({"total", "intra", "*", "*", &intra_total});
    rows.push_back({"calibration", "inter", "*", "*", &inter_cal});
    rows.push_back({"total", "inter", "*", "*", &inter_total});

    fs::create_directories(args.out);
    std::ostringstream csv;
    csv << "metric,scope,i,j,mean_px,median_px,max_px,count,status\n";
    std::string table = fmt::format("{:<12} {:<6} {:>3} {:>3} {:>10} {:>10} {:>10} {:>8}\n", "metric", "scope",
                                    "i", "j", "mean", "median", "max", "count");
    for (const auto& row : rows) {
      const std::string stem = row.metric + "_" + (row.scope == "pair" ? row.i + "_" + row.j : row.scope);
      if (row.report->empty()) {
        csv << row.metric << ',' << row.scope << ',' << row.i << ',' << row.j << ",,,,0,no data\n";
        table += fmt::format("{:<12} {:<6} {:>3} {:>3} {:>10} {:>10} {:>10} {:>8}\n", row.metric, row.scope, row.i,
                             row.j, "no data", "", "", 0);
        continue;
      }
      const auto& s = row.report->summary();
      csv << row.metric << ',' << row.scope << ',' << row.i << ',' << row.j << ',' << format_double(s.mean) << ','
          << format_double(s.median) << ',' << format_double(s.max) << ',' << s.count << ",ok\n";
      table += fmt::format("{:<12} {:<6} {:>3} {:>3} {:>10.4f} {:>10.4f} {:>10.4f} {:>8}\n", row.metric, row.scope,
                           row.i, row.j, s.mean, s.median, s.max, s.count);
      std::ostringstream hist;
      eval::write_histogram_csv(hist, *row.report);
      io::write_text_file(args.out / "histograms" / (stem + ".csv"), hist.str());
      if (row.scope == "pair") {
        std::ostringstream points;
        eval::write_points_csv(points, *row.report);
        io::write_text_file(args.out / "points" / (stem + ".csv"), points.str());
      }
    }
    io::write_text_file(args.out / "summary.csv", csv.str());

    Json pairs = Json::array();
    for (const auto& r : reports) {
      pairs.push_back({{"i", r.i}, {"j", r.j}, {"calibration", summary_json(r.calibration)},
                       {"total", summary_json(r.total)}});
    }
    const Json report = {
        {"version", io::kToolkitVersion},
        {"config", bundle.config},
        {"config_hash", bundle.config_hash},
        {"input_hash", io::content_hash(io::directory_hash(args.dataset) + io::content_hash(bundle_json.dump()))},
        {"evaluation_boards", dataset.evaluation_boards},
        {"pairs", pairs},
        {"pooled",
         {{"intra", {{"calibration", summary_json(intra_cal)}, {"total", summary_json(intra_total)}}},
          {"inter", {{"calibration", summary_json(inter_cal)}, {"total", summary_json(inter_total)}}}}}};
    io::write_text_file(args.out / "report.json", report.dump(2) + "\n");
    std::fputs(table.c_str(), stdout);
  });
}

}  // namespace xcal::app

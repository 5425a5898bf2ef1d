#include <gtest/gtest.h>

#include <sys/wait.h>
#include <unistd.h>

#include <cstdlib>
#include <fstream>
#include <map>
#include <sstream>

#include "support.hpp"
#include "xcal/app.hpp"
#include "xcal/io.hpp"

namespace xcal {
namespace {

namespace fs = std::filesystem;
using io::Json;

const fs::path& root() {
  static const fs::path p = [] {
    fs::path d = fs::temp_directory_path() / ("xcal_cli_" + std::to_string(::getpid()));
    fs::remove_all(d);
    fs::create_directories(d);
    return d;
  }();
  return p;
}

struct CliResult {
  int code;
  std::string out;
  std::string err;
};

std::string slurp(const fs::path& p) {
  std::ifstream in(p);
  std::ostringstream s;
  s << in.rdbuf();
  return s.str();
}

CliResult xcal(const std::string& args) {
  static int counter = 0;
  const fs::path out = root() / ("stdout" + std::to_string(counter));
  const fs::path err = root() / ("stderr" + std::to_string(counter++));
  const std::string cmd = std::string(XCAL_CLI_PATH) + " " + args + " >" + out.string() + " 2>" + err.string();
  const int status = std::system(cmd.c_str());
  return {WIFEXITED(status) ? WEXITSTATUS(status) : -1, slurp(out), slurp(err)};
}

fs::path write_config(const std::string& name, const std::string& text) {
  const fs::path p = root() / name;
  io::write_text_file(p, text);
  return p;
}

// Parsed summary.csv rows keyed by "metric,scope,i,j".
std::map<std::string, std::vector<std::string>> summary_rows(const fs::path& dir) {
  std::map<std::string, std::vector<std::string>> rows;
  std::istringstream in(slurp(dir / "summary.csv"));
  std::string line;
  std::getline(in, line);
  while (std::getline(in, line)) {
    std::vector<std::string> cells;
    std::istringstream ls(line);
    std::string cell;
    while (std::getline(ls, cell, ',')) cells.push_back(cell);
    if (!line.empty() && line.back() == ',') cells.emplace_back();
    rows[cells[0] + "," + cells[1] + "," + cells[2] + "," + cells[3]] = cells;
  }
  return rows;
}

class Cli : public ::testing::Test {
 protected:
  static void SetUpTestSuite() {
    const fs::path clean = write_config("clean.json", R"({"noise": {"rgb_vertex_sigma_px": 0, "tof_vertex_sigma_px": 0,
      "range_sigma_mm": 0, "outlier_rate": 0}})");
    ASSERT_EQ(xcal("simulate " + clean.string() + " --out " + (root() / "clean").string()).code, 0);
    ASSERT_EQ(xcal("simulate --out " + (root() / "noisy").string()).code, 0);
  }
};

TEST_F(Cli, SimulateMinimal) {
  const fs::path cfg = write_config("one.json", R"({"rig_count": 1})");
  const CliResult r = xcal("simulate " + cfg.string() + " --out " + (root() / "one").string());
  EXPECT_EQ(r.code, 0) << r.err;
  EXPECT_TRUE(fs::exists(root() / "one" / "vertices.csv"));
  EXPECT_TRUE(fs::exists(root() / "one" / "scene_config.json"));
  EXPECT_TRUE(fs::exists(root() / "one" / "ground_truth.json"));
  EXPECT_FALSE(fs::is_empty(root() / "one" / "range"));
  EXPECT_EQ(io::read_json_file(root() / "one" / "scene_config.json")["rig_count"], 1);
}

TEST_F(Cli, SimulateDeterministic) {
  const fs::path cfg = write_config("det.json", R"({"rig_count": 2, "seed": 9})");
  ASSERT_EQ(xcal("simulate " + cfg.string() + " --out " + (root() / "det1").string()).code, 0);
  ASSERT_EQ(xcal("simulate " + cfg.string() + " --out " + (root() / "det2").string()).code, 0);
  EXPECT_EQ(io::directory_hash(root() / "det1"), io::directory_hash(root() / "det2"));
  ASSERT_EQ(xcal("simulate " + cfg.string() + " --seed 10 --out " + (root() / "det3").string()).code, 0);
  EXPECT_NE(io::directory_hash(root() / "det1"), io::directory_hash(root() / "det3"));
}

TEST_F(Cli, SimulateErrors) {
  const fs::path zero = write_config("zero.json", R"({"fitting_boards_per_rig": 0, "evaluation_boards_per_rig": 0,
    "shared_fitting_boards": 0, "shared_evaluation_boards": 0})");
  const CliResult r = xcal("simulate " + zero.string() + " --out " + (root() / "zero").string());
  EXPECT_EQ(r.code, 2);
  EXPECT_NE(r.err.find("empty-scene"), std::string::npos);
  const fs::path bad = write_config("bad.json", R"({"rigcount": 2})");
  const CliResult b = xcal("simulate " + bad.string() + " --out " + (root() / "bad").string());
  EXPECT_EQ(b.code, 2);
  EXPECT_NE(b.err.find("rigcount"), std::string::npos);
  EXPECT_EQ(xcal("simulate").code, 2);
}

TEST_F(Cli, CalibrateCleanMatchesTruth) {
  const fs::path bundle = root() / "clean_bundle.json";
  const CliResult r = xcal("calibrate " + (root() / "clean").string() + " --mode joint --out " + bundle.string());
  ASSERT_EQ(r.code, 0) << r.err;
  const io::CalibrationBundle b = io::bundle_from_json(io::read_json_file(bundle));
  const Json truth = io::read_json_file(root() / "clean" / "ground_truth.json");
  for (const auto& rig : b.rigs) {
    const Mat4 h = io::matrix_from_json(truth["rigs"][static_cast<std::size_t>(rig.id)]["stereo_to_tof"], 4, 4);
    EXPECT_LE(testing::unit_distance(rig.stereo_to_tof, h), 1e-8);
    EXPECT_EQ(rig.diagnostics.mode, "joint");
  }
  EXPECT_EQ(b.version, std::string(io::kToolkitVersion));
  EXPECT_FALSE(b.input_hash.empty());
  // The written file is the canonical serialization of its own parse.
  EXPECT_EQ(io::to_json(b).dump(2) + "\n", slurp(bundle));

  const fs::path out = root() / "clean_eval";
  const CliResult e = xcal("evaluate " + (root() / "clean").string() + " " + bundle.string() + " --out " + out.string());
  ASSERT_EQ(e.code, 0) << e.err;
  for (const auto& [key, row] : summary_rows(out)) {
    if (row[8] != "ok") continue;
    EXPECT_LE(std::stod(row[4]), 1e-6) << key;
  }
  EXPECT_TRUE(fs::exists(out / "report.json"));
  EXPECT_TRUE(fs::exists(out / "histograms" / "calibration_0_0.csv"));
  EXPECT_TRUE(fs::exists(out / "points" / "total_1_2.csv"));
  EXPECT_NE(e.out.find("median"), std::string::npos);
}

TEST_F(Cli, NoisyEvaluationBookkeepingAndDeterminism) {
  const fs::path b1 = root() / "noisy_b1.json";
  const fs::path b2 = root() / "noisy_b2.json";
  ASSERT_EQ(xcal("calibrate " + (root() / "noisy").string() + " --out " + b1.string()).code, 0);
  ASSERT_EQ(xcal("calibrate " + (root() / "noisy").string() + " --out " + b2.string()).code, 0);
  EXPECT_EQ(slurp(b1), slurp(b2));
  const fs::path e1 = root() / "noisy_e1";
  const fs::path e2 = root() / "noisy_e2";
  ASSERT_EQ(xcal("evaluate " + (root() / "noisy").string() + " " + b1.string() + " --out " + e1.string()).code, 0);
  ASSERT_EQ(xcal("evaluate " + (root() / "noisy").string() + " " + b1.string() + " --out " + e2.string()).code, 0);
  EXPECT_EQ(io::directory_hash(e1), io::directory_hash(e2));
  const auto rows = summary_rows(e1);
  EXPECT_EQ(rows.at("calibration,intra,*,*")[7], "1470");
  EXPECT_LT(std::stod(rows.at("calibration,intra,*,*")[4]), 1.0);
  const Json report = io::read_json_file(e1 / "report.json");
  EXPECT_EQ(report["config"]["mode"], "joint");
  EXPECT_FALSE(report["input_hash"].get<std::string>().empty());
}

TEST_F(Cli, SimilarityWorseOnDistortedData) {
  const fs::path cfg = write_config("dist.json", R"({"rig_count": 1,
    "noise": {"depth_distortion": {"inverse_disparity": [0.0003, 0.97]}}})");
  const fs::path dir = root() / "dist";
  ASSERT_EQ(xcal("simulate " + cfg.string() + " --out " + dir.string()).code, 0);
  ASSERT_EQ(xcal("calibrate " + dir.string() + " --mode joint --out " + (root() / "dj.json").string()).code, 0);
  ASSERT_EQ(xcal("calibrate " + dir.string() + " --mode similarity --out " + (root() / "ds.json").string()).code, 0);
  const auto j = io::bundle_from_json(io::read_json_file(root() / "dj.json"));
  const auto s = io::bundle_from_json(io::read_json_file(root() / "ds.json"));
  EXPECT_GT(s.rigs[0].diagnostics.final_error, j.rigs[0].diagnostics.final_error);
}

TEST_F(Cli, MissingRangeFile) {
  const fs::path dir = root() / "broken";
  fs::copy(root() / "noisy", dir, fs::copy_options::recursive);
  fs::remove(dir / "range" / "rig1_board3.csv");
  if (fs::exists(dir / "range" / "rig1_board3.csv")) GTEST_SKIP();
  const fs::path victim = *fs::directory_iterator(dir / "range");
  fs::remove(victim);
  const CliResult r = xcal("calibrate " + dir.string() + " --out " + (root() / "broken.json").string());
  EXPECT_EQ(r.code, 2);
  EXPECT_NE(r.err.find(victim.filename().string()), std::string::npos);
}

TEST_F(Cli, ContaminationGuard) {
  const fs::path bundle = root() / "cont_src.json";
  ASSERT_EQ(xcal("calibrate " + (root() / "clean").string() + " --out " + bundle.string()).code, 0);
  Json j = io::read_json_file(bundle);
  const Json first = j["fitting_boards"][0];
  j["evaluation_boards"].push_back(first);
  const fs::path tampered = root() / "cont.json";
  io::write_text_file(tampered, j.dump());
  const CliResult r = xcal("evaluate " + (root() / "clean").string() + " " + tampered.string() + " --out " +
                     (root() / "cont_eval").string());
  EXPECT_EQ(r.code, 4);
}

TEST_F(Cli, DisconnectedNetwork) {
  const fs::path cfg = write_config("pipe.json", R"({"min_shared_boards": 1000})");
  const CliResult r = xcal("calibrate " + (root() / "clean").string() + " --config " + cfg.string() + " --out " +
                     (root() / "disc.json").string());
  EXPECT_EQ(r.code, 3);
  EXPECT_NE(r.err.find("0-1"), std::string::npos);
}

TEST_F(Cli, PipelineConfigValidation) {
  const fs::path cfg = write_config("pipe_bad.json", R"({"mode": "joint", "threshold": 3})");
  EXPECT_EQ(xcal("calibrate " + (root() / "clean").string() + " --config " + cfg.string() + " --out x.json").code, 2);
  EXPECT_EQ(xcal("calibrate " + (root() / "clean").string() + " --mode warp --out x.json").code, 2);
  EXPECT_EQ(xcal("calibrate " + (root() / "clean").string() + " --ransac-threshold-mm -1 --out x.json").code, 2);
  EXPECT_EQ(xcal("calibrate " + (root() / "missing").string() + " --out x.json").code, 2);
}

TEST_F(Cli, NoDataPair) {
  const fs::path cfg = write_config("apart.json", R"({"shared_evaluation_boards": 0})");
  const fs::path dir = root() / "apart";
  ASSERT_EQ(xcal("simulate " + cfg.string() + " --out " + dir.string()).code, 0);
  const fs::path bundle = root() / "apart.json";
  ASSERT_EQ(xcal("calibrate " + dir.string() + " --out " + bundle.string()).code, 0);
  const fs::path out = root() / "apart_eval";
  const CliResult r = xcal("evaluate " + dir.string() + " " + bundle.string() + " --pairs 0:2,2:2 --out " + out.string());
  EXPECT_EQ(r.code, 0) << r.err;
  const auto rows = summary_rows(out);
  EXPECT_EQ(rows.at("calibration,pair,0,2")[8], "no data");
  EXPECT_EQ(rows.at("calibration,pair,2,2")[8], "ok");
  EXPECT_NE(r.out.find("no data"), std::string::npos);
  EXPECT_EQ(xcal("evaluate " + dir.string() + " " + bundle.string() + " --pairs 0-2 --out " + out.string()).code, 2);
}

TEST(AppUnit, ParsePairs) {
  EXPECT_EQ(app::parse_pairs("0:1,2:0"), (std::vector<std::pair<int, int>>{{0, 1}, {2, 0}}));
  EXPECT_THROW(app::parse_pairs("0:1,x"), Error);
  EXPECT_THROW(app::parse_pairs("1:2:3"), Error);
}

TEST(AppUnit, ExitCodes) {
  EXPECT_EQ(app::exit_code_for(ErrorCode::kInputError), 2);
  EXPECT_EQ(app::exit_code_for(ErrorCode::kEmptyScene), 2);
  EXPECT_EQ(app::exit_code_for(ErrorCode::kDisconnectedNetwork), 3);
  EXPECT_EQ(app::exit_code_for(ErrorCode::kContamination), 4);
  EXPECT_EQ(app::exit_code_for(ErrorCode::kNoConsensus), 5);
}

TEST(AppUnit, OptionsRoundTrip) {
  pipeline::CalibrationOptions o;
  o.mode = align::RefinementMode::kSeparate;
  o.seed = 77;
  const Json j = app::to_json(o);
  EXPECT_EQ(app::to_json(app::options_from_json(j)), j);
}

}  // namespace
}  // namespace xcal

#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include <json.hpp>

#include "xcal/dataset.hpp"
#include "xcal/network.hpp"
#include "xcal/pipeline.hpp"
#include "xcal/synth.hpp"

namespace xcal::io {

using Json = nlohmann::json;

inline constexpr std::string_view kToolkitVersion = "0.3.0";
inline constexpr int kDatasetFormat = 1;
inline constexpr int kBundleFormat = 1;

Json matrix_to_json(const Eigen::Ref<const Eigen::MatrixXd>& m);  // row-major nested arrays
Eigen::MatrixXd matrix_from_json(const Json& j, Eigen::Index rows, Eigen::Index cols);

/// FNV-1a, 64 bit, as 16 hex digits.
std::string content_hash(std::string_view bytes);
/// Hash over the relative paths and contents of every regular file.
std::string directory_hash(const std::filesystem::path& dir);

/// Unknown keys are rejected with kInputError naming the key.
synth::SceneConfig scene_config_from_json(const Json& j);
Json to_json(const synth::SceneConfig& config);

/// dataset.json, scene_config.json, vertices.csv, range/*.csv and the
/// ground-truth sidecar (ground_truth.json, labels.csv).
void write_dataset(const std::filesystem::path& dir, const synth::SyntheticData& data,
                   const synth::SceneConfig& config);
/// Throws kInputError naming the offending file.
Dataset read_dataset(const std::filesystem::path& dir);

struct BundleDiagnostics {
  std::string mode;
  int iterations = 0;
  bool converged = false;
  double initial_error = 0.0;
  double final_error = 0.0;
  double initial_cost = 0.0;
  double final_cost = 0.0;
  int raw_parameters = 0;
  int effective_parameters = 0;
  std::size_t correspondences = 0;
};

struct BundleRig {
  int id = 0;
  Mat34 tof_camera = Mat34::Zero();
  Mat34 left_camera = Mat34::Zero();
  Mat34 right_camera = Mat34::Zero();
  Mat4 stereo_to_tof = Mat4::Identity();
  Mat4 tof_to_rgb = Mat4::Identity();
  Mat4 dlt = Mat4::Identity();
  std::optional<Mat34> refined_left;
  std::optional<Mat34> refined_right;
  std::vector<int> boards;
  BundleDiagnostics diagnostics;
};

struct BundleEdge {
  int i = 0;
  int j = 0;
  Mat4 matrix = Mat4::Identity();
  bool rigid = true;
  std::string provenance;
  std::vector<int> path;
};

struct CalibrationBundle {
  std::string version{kToolkitVersion};
  int format = kBundleFormat;
  std::string config_hash;
  std::string input_hash;
  Json config = Json::object();
  std::string mode;
  std::string stereo;
  int reference_rig = 0;
  std::vector<int> fitting_boards;
  std::vector<int> evaluation_boards;
  std::vector<BundleRig> rigs;
  std::vector<BundleEdge> edges;
  std::vector<network::CycleDiscrepancy> discrepancies;
};

CalibrationBundle make_bundle(const pipeline::Calibration& calibration, const Json& config,
                              std::string_view stereo_model);
Json to_json(const CalibrationBundle& bundle);
/// Throws kInputError on missing fields or a version mismatch.
CalibrationBundle bundle_from_json(const Json& j);
/// Rebuilds the finalized network from the bundle's direct edges.
network::NetworkGraph build_graph(const CalibrationBundle& bundle);

Json read_json_file(const std::filesystem::path& path);
void write_text_file(const std::filesystem::path& path, std::string_view text);

}  // namespace xcal::io

#include "xcal/io.hpp"

#include <algorithm>
#include <fstream>
#include <iomanip>
#include <map>
#include <set>
#include <sstream>

namespace xcal::io {

namespace fs = std::filesystem;

namespace {

[[noreturn]] void input_error(const std::string& msg) { throw Error(ErrorCode::kInputError, msg); }

void check_keys(const Json& j, std::initializer_list<std::string_view> allowed, std::string_view where) {
  if (!j.is_object()) input_error(std::string(where) + ": expected an object");
  for (const auto& [key, value] : j.items()) {
    if (std::find(allowed.begin(), allowed.end(), key) == allowed.end()) {
      input_error(std::string(where) + ": unknown key '" + key + "'");
    }
  }
}

template <typename T>
void read_opt(const Json& j, const char* key, T& out, std::string_view where) {
  if (!j.contains(key)) return;
  try {
    out = j.at(key).get<T>();
  } catch (const Json::exception& e) {
    input_error(std::string(where) + "." + key + ": " + e.what());
  }
}

Vec2 vec2_from(const Json& j, std::string_view where) {
  if (!j.is_array() || j.size() != 2) input_error(std::string(where) + ": expected 2 numbers");
  return Vec2(j[0].get<double>(), j[1].get<double>());
}

Vec3 vec3_from(const Json& j, std::string_view where) {
  if (!j.is_array() || j.size() != 3) input_error(std::string(where) + ": expected 3 numbers");
  return Vec3(j[0].get<double>(), j[1].get<double>(), j[2].get<double>());
}

Json intrinsics_to_json(const synth::Intrinsics& k) {
  return {{"focal_px", k.focal_px},
          {"principal_px", {k.principal_px.x(), k.principal_px.y()}},
          {"width", k.size.width},
          {"height", k.size.height}};
}

synth::Intrinsics intrinsics_from_json(const Json& j, synth::Intrinsics k, std::string_view where) {
  check_keys(j, {"focal_px", "principal_px", "width", "height"}, where);
  read_opt(j, "focal_px", k.focal_px, where);
  if (j.contains("principal_px")) k.principal_px = vec2_from(j["principal_px"], where);
  read_opt(j, "width", k.size.width, where);
  read_opt(j, "height", k.size.height, where);
  return k;
}

std::string split_name(synth::Split s) { return s == synth::Split::kFitting ? "fitting" : "evaluation"; }

synth::Split split_from(const std::string& s) {
  if (s == "fitting") return synth::Split::kFitting;
  if (s == "evaluation") return synth::Split::kEvaluation;
  input_error("unknown board split '" + s + "'");
}

eval::Region region_from(std::string_view s, const std::string& where) {
  if (s == "black") return eval::Region::kBlack;
  if (s == "white") return eval::Region::kWhite;
  if (s == "none" || s.empty()) return eval::Region::kNone;
  input_error(where + ": unknown region '" + std::string(s) + "'");
}

std::vector<std::string> split_csv(const std::string& line) {
  std::vector<std::string> out;
  std::string cell;
  std::istringstream ss(line);
  while (std::getline(ss, cell, ',')) out.push_back(cell);
  if (!line.empty() && line.back() == ',') out.emplace_back();
  return out;
}

double to_double(const std::string& s, const std::string& where) {
  std::size_t used = 0;
  double v = 0.0;
  try {
    v = std::stod(s, &used);
  } catch (const std::exception&) {
    input_error(where + ": not a number '" + s + "'");
  }
  if (used != s.size()) input_error(where + ": not a number '" + s + "'");
  return v;
}

int to_int(const std::string& s, const std::string& where) {
  const double v = to_double(s, where);
  if (v != static_cast<double>(static_cast<int>(v))) input_error(where + ": not an integer '" + s + "'");
  return static_cast<int>(v);
}

// Rows of a CSV file after its header; the header must match exactly.
std::vector<std::vector<std::string>> read_csv(const fs::path& path,
                                               std::initializer_list<std::string_view> header,
                                               std::size_t min_columns) {
  std::ifstream in(path);
  if (!in) input_error("cannot open " + path.string());
  std::string line;
  if (!std::getline(in, line)) input_error(path.string() + ": empty file");
  const auto cols = split_csv(line);
  if (cols.size() < min_columns || cols.size() > header.size() ||
      !std::equal(cols.begin(), cols.end(), header.begin())) {
    input_error(path.string() + ": unexpected header '" + line + "'");
  }
  std::vector<std::vector<std::string>> rows;
  std::size_t line_no = 1;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.empty()) continue;
    auto row = split_csv(line);
    if (row.size() != cols.size()) {
      input_error(path.string() + ":" + std::to_string(line_no) + ": expected " +
                  std::to_string(cols.size()) + " columns");
    }
    rows.push_back(std::move(row));
  }
  return rows;
}

std::string range_file_name(int rig, int board) {
  return "rig" + std::to_string(rig) + "_board" + std::to_string(board) + ".csv";
}

Json rigid_to_json(const RigidTransform3& t) { return matrix_to_json(t.matrix()); }

}  // namespace

Json matrix_to_json(const Eigen::Ref<const Eigen::MatrixXd>& m) {
  Json rows = Json::array();
  for (Eigen::Index r = 0; r < m.rows(); ++r) {
    Json row = Json::array();
    for (Eigen::Index c = 0; c < m.cols(); ++c) row.push_back(m(r, c));
    rows.push_back(std::move(row));
  }
  return rows;
}

Eigen::MatrixXd matrix_from_json(const Json& j, Eigen::Index rows, Eigen::Index cols) {
  if (!j.is_array() || static_cast<Eigen::Index>(j.size()) != rows) {
    input_error("expected a " + std::to_string(rows) + "x" + std::to_string(cols) + " matrix");
  }
  Eigen::MatrixXd m(rows, cols);
  for (Eigen::Index r = 0; r < rows; ++r) {
    const Json& row = j[static_cast<std::size_t>(r)];
    if (!row.is_array() || static_cast<Eigen::Index>(row.size()) != cols) {
      input_error("expected a " + std::to_string(rows) + "x" + std::to_string(cols) + " matrix");
    }
    for (Eigen::Index c = 0; c < cols; ++c) {
      const Json& v = row[static_cast<std::size_t>(c)];
      if (!v.is_number()) input_error("matrix entries must be numbers");
      m(r, c) = v.get<double>();
    }
  }
  return m;
}

std::string content_hash(std::string_view bytes) {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (const unsigned char c : bytes) {
    h ^= c;
    h *= 0x100000001b3ULL;
  }
  std::ostringstream out;
  out << std::hex << std::setw(16) << std::setfill('0') << h;
  return out.str();
}

std::string directory_hash(const fs::path& dir) {
  std::vector<fs::path> files;
  for (const auto& entry : fs::recursive_directory_iterator(dir)) {
    if (entry.is_regular_file()) files.push_back(entry.path());
  }
  std::sort(files.begin(), files.end());
  std::string all;
  for (const auto& f : files) {
    std::ifstream in(f, std::ios::binary);
    std::ostringstream content;
    content << in.rdbuf();
    all += fs::relative(f, dir).generic_string();
    all.push_back('\0');
    all += content_hash(content.str());
    all.push_back('\0');
  }
  return content_hash(all);
}

Json to_json(const synth::SceneConfig& c) {
  Json noise = {{"rgb_vertex_sigma_px", c.noise.rgb_vertex_sigma_px},
                {"tof_vertex_sigma_px", c.noise.tof_vertex_sigma_px},
                {"range_sigma_mm", c.noise.range_sigma_mm},
                {"outlier_rate", c.noise.outlier_rate},
                {"outlier_scale_mm", c.noise.outlier_scale_mm},
                {"black_square_range_sigma_multiplier", c.noise.black_square_range_sigma_multiplier}};
  if (c.noise.depth_distortion) {
    noise["depth_distortion"] = {{"matrix", matrix_to_json(c.noise.depth_distortion->matrix())}};
  }
  if (c.noise.range_seed) noise["range_seed"] = *c.noise.range_seed;
  Json poses = Json::array();
  for (const auto& b : c.board_poses) {
    poses.push_back({{"id", b.id},
                     {"split", split_name(b.split)},
                     {"rotation", matrix_to_json(b.rotation)},
                     {"translation", {b.translation.x(), b.translation.y(), b.translation.z()}}});
  }
  return {{"rig_count", c.rig_count},
          {"seed", c.seed},
          {"rgb", intrinsics_to_json(c.rgb)},
          {"tof", intrinsics_to_json(c.tof)},
          {"tof_max_range_mm", c.tof_max_range_mm},
          {"stereo_baseline_mm", c.stereo_baseline_mm},
          {"rig_spacing_mm", c.rig_spacing_mm},
          {"network_radius_mm", c.network_radius_mm},
          {"tof_offset_mm", {c.tof_offset_mm.x(), c.tof_offset_mm.y(), c.tof_offset_mm.z()}},
          {"tof_rotation_deg", {c.tof_rotation_deg.x(), c.tof_rotation_deg.y(), c.tof_rotation_deg.z()}},
          {"board", {{"cols", c.board.cols}, {"rows", c.board.rows}, {"square_mm", c.board.square_mm}}},
          {"fitting_boards_per_rig", c.fitting_boards_per_rig},
          {"evaluation_boards_per_rig", c.evaluation_boards_per_rig},
          {"shared_fitting_boards", c.shared_fitting_boards},
          {"shared_evaluation_boards", c.shared_evaluation_boards},
          {"near_depth_min_mm", c.near_depth_min_mm},
          {"near_depth_max_mm", c.near_depth_max_mm},
          {"max_tilt_deg", c.max_tilt_deg},
          {"preset", c.preset == synth::PosePreset::kSlanted ? "slanted" : "standard"},
          {"slanted_fraction", c.slanted_fraction},
          {"slanted_tilt_min_deg", c.slanted_tilt_min_deg},
          {"slanted_tilt_max_deg", c.slanted_tilt_max_deg},
          {"board_poses", poses},
          {"noise", noise}};
}

synth::SceneConfig scene_config_from_json(const Json& j) {
  constexpr std::string_view w = "scene config";
  check_keys(j, {"rig_count", "seed", "rgb", "tof", "tof_max_range_mm", "stereo_baseline_mm",
                 "rig_spacing_mm", "network_radius_mm", "tof_offset_mm", "tof_rotation_deg", "board",
                 "fitting_boards_per_rig", "evaluation_boards_per_rig", "shared_fitting_boards",
                 "shared_evaluation_boards", "near_depth_min_mm", "near_depth_max_mm", "max_tilt_deg",
                 "preset", "slanted_fraction", "slanted_tilt_min_deg", "slanted_tilt_max_deg",
                 "board_poses", "noise"},
             w);
  synth::SceneConfig c;
  read_opt(j, "rig_count", c.rig_count, w);
  read_opt(j, "seed", c.seed, w);
  if (j.contains("rgb")) c.rgb = intrinsics_from_json(j["rgb"], c.rgb, "scene config.rgb");
  if (j.contains("tof")) c.tof = intrinsics_from_json(j["tof"], c.tof, "scene config.tof");
  read_opt(j, "tof_max_range_mm", c.tof_max_range_mm, w);
  read_opt(j, "stereo_baseline_mm", c.stereo_baseline_mm, w);
  read_opt(j, "rig_spacing_mm", c.rig_spacing_mm, w);
  read_opt(j, "network_radius_mm", c.network_radius_mm, w);
  if (j.contains("tof_offset_mm")) c.tof_offset_mm = vec3_from(j["tof_offset_mm"], "tof_offset_mm");
  if (j.contains("tof_rotation_deg")) c.tof_rotation_deg = vec3_from(j["tof_rotation_deg"], "tof_rotation_deg");
  if (j.contains("board")) {
    const Json& b = j["board"];
    check_keys(b, {"cols", "rows", "square_mm"}, "scene config.board");
    read_opt(b, "cols", c.board.cols, "board");
    read_opt(b, "rows", c.board.rows, "board");
    read_opt(b, "square_mm", c.board.square_mm, "board");
  }
  read_opt(j, "fitting_boards_per_rig", c.fitting_boards_per_rig, w);
  read_opt(j, "evaluation_boards_per_rig", c.evaluation_boards_per_rig, w);
  read_opt(j, "shared_fitting_boards", c.shared_fitting_boards, w);
  read_opt(j, "shared_evaluation_boards", c.shared_evaluation_boards, w);
  read_opt(j, "near_depth_min_mm", c.near_depth_min_mm, w);
  read_opt(j, "near_depth_max_mm", c.near_depth_max_mm, w);
  read_opt(j, "max_tilt_deg", c.max_tilt_deg, w);
  if (j.contains("preset")) {
    const std::string p = j["preset"].get<std::string>();
    if (p == "standard") {
      c.preset = synth::PosePreset::kStandard;
    } else if (p == "slanted") {
      c.preset = synth::PosePreset::kSlanted;
    } else {
      input_error("scene config.preset: unknown preset '" + p + "'");
    }
  }
  read_opt(j, "slanted_fraction", c.slanted_fraction, w);
  read_opt(j, "slanted_tilt_min_deg", c.slanted_tilt_min_deg, w);
  read_opt(j, "slanted_tilt_max_deg", c.slanted_tilt_max_deg, w);
  if (j.contains("board_poses")) {
    for (const Json& b : j["board_poses"]) {
      check_keys(b, {"id", "split", "rotation", "rodrigues_deg", "translation"}, "board_poses[]");
      synth::PlacedBoard pb;
      read_opt(b, "id", pb.id, "board_poses[]");
      if (b.contains("split")) pb.split = split_from(b["split"].get<std::string>());
      if (b.contains("rotation")) pb.rotation = matrix_from_json(b["rotation"], 3, 3);
      if (b.contains("rodrigues_deg")) {
        pb.rotation = rodrigues_to_matrix(vec3_from(b["rodrigues_deg"], "rodrigues_deg") * (M_PI / 180.0));
      }
      if (b.contains("translation")) pb.translation = vec3_from(b["translation"], "translation");
      c.board_poses.push_back(pb);
    }
  }
  if (j.contains("noise")) {
    const Json& n = j["noise"];
    constexpr std::string_view nw = "scene config.noise";
    check_keys(n, {"rgb_vertex_sigma_px", "tof_vertex_sigma_px", "range_sigma_mm", "outlier_rate",
                   "outlier_scale_mm", "black_square_range_sigma_multiplier", "depth_distortion",
                   "range_seed"},
               nw);
    read_opt(n, "rgb_vertex_sigma_px", c.noise.rgb_vertex_sigma_px, nw);
    read_opt(n, "tof_vertex_sigma_px", c.noise.tof_vertex_sigma_px, nw);
    read_opt(n, "range_sigma_mm", c.noise.range_sigma_mm, nw);
    read_opt(n, "outlier_rate", c.noise.outlier_rate, nw);
    read_opt(n, "outlier_scale_mm", c.noise.outlier_scale_mm, nw);
    read_opt(n, "black_square_range_sigma_multiplier", c.noise.black_square_range_sigma_multiplier, nw);
    if (n.contains("range_seed")) c.noise.range_seed = n["range_seed"].get<std::uint64_t>();
    if (n.contains("depth_distortion")) {
      const Json& d = n["depth_distortion"];
      check_keys(d, {"matrix", "inverse_disparity"}, "scene config.noise.depth_distortion");
      try {
        if (d.contains("matrix")) {
          c.noise.depth_distortion = Homography3(matrix_from_json(d["matrix"], 4, 4));
        } else if (d.contains("inverse_disparity")) {
          const Vec2 p = vec2_from(d["inverse_disparity"], "inverse_disparity");
          Mat4 h = Mat4::Identity();
          h(3, 2) = p.x();
          h(3, 3) = p.y();
          c.noise.depth_distortion = Homography3(h);
        }
      } catch (const Error& e) {
        if (e.code() == ErrorCode::kInputError) throw;
        input_error(std::string("scene config.noise.depth_distortion: ") + e.what());
      }
    }
  }
  try {
    synth::validate(c);
  } catch (const Error& e) {
    input_error(std::string("scene config: ") + e.what());
  }
  return c;
}

void write_text_file(const fs::path& path, std::string_view text) {
  if (path.has_parent_path()) fs::create_directories(path.parent_path());
  std::ofstream out(path, std::ios::binary);
  if (!out) throw Error(ErrorCode::kInputError, "cannot write " + path.string());
  out << text;
}

Json read_json_file(const fs::path& path) {
  std::ifstream in(path);
  if (!in) input_error("cannot open " + path.string());
  try {
    return Json::parse(in);
  } catch (const Json::exception& e) {
    input_error(path.string() + ": " + e.what());
  }
}

void write_dataset(const fs::path& dir, const synth::SyntheticData& data, const synth::SceneConfig& config) {
  fs::create_directories(dir / "range");
  const Dataset& ds = data.dataset;
  Json rigs = Json::array();
  for (const auto& r : ds.rigs) {
    rigs.push_back({{"id", r.id},
                    {"tof_camera", matrix_to_json(r.tof_camera.matrix())},
                    {"left_camera", matrix_to_json(r.left_camera.matrix())},
                    {"right_camera", matrix_to_json(r.right_camera.matrix())},
                    {"tof_size", {r.tof_size.width, r.tof_size.height}},
                    {"rgb_size", {r.rgb_size.width, r.rgb_size.height}},
                    {"max_range_mm", r.max_range_mm}});
  }
  const Json meta = {{"format", kDatasetFormat},
                     {"version", kToolkitVersion},
                     {"rigs", rigs},
                     {"fitting_boards", ds.fitting_boards},
                     {"evaluation_boards", ds.evaluation_boards}};
  write_text_file(dir / "dataset.json", meta.dump(2) + "\n");
  write_text_file(dir / "scene_config.json", to_json(config).dump(2) + "\n");

  std::ostringstream vertices;
  vertices << std::setprecision(17) << "board_id,rig_id,camera,vertex_id,x_px,y_px\n";
  for (const auto& [key, view] : ds.views) {
    const std::pair<const char*, const std::vector<Vec2>*> cams[] = {
        {"tof", &view.tof_vertices}, {"left", &view.left_vertices}, {"right", &view.right_vertices}};
    for (const auto& [name, pts] : cams) {
      for (std::size_t k = 0; k < pts->size(); ++k) {
        vertices << key.first << ',' << key.second << ',' << name << ',' << k << ',' << (*pts)[k].x()
                 << ',' << (*pts)[k].y() << '\n';
      }
    }
    std::ostringstream range;
    range << std::setprecision(17) << "x_px,y_px,range_mm,hull_id,region\n";
    for (std::size_t k = 0; k < view.hull.size(); ++k) {
      const auto& s = view.hull[k];
      const eval::Region region = view.hull_regions.empty() ? eval::Region::kNone : view.hull_regions[k];
      range << s.pixel().x() << ',' << s.pixel().y() << ',' << s.range() << ',' << key.first << ','
            << eval::to_string(region) << '\n';
    }
    write_text_file(dir / "range" / range_file_name(key.second, key.first), range.str());
  }
  write_text_file(dir / "vertices.csv", vertices.str());

  const synth::GroundTruth& gt = data.truth;
  Json gt_rigs = Json::array();
  for (const auto& r : gt.rigs) {
    gt_rigs.push_back({{"id", r.id},
                       {"stereo_to_tof", matrix_to_json(r.stereo_to_tof.matrix())},
                       {"world_from_rig", rigid_to_json(r.world_from_rig)},
                       {"tof_from_rig", rigid_to_json(r.tof_from_rig)}});
  }
  Json relative = Json::array();
  for (const auto& a : gt.rigs) {
    for (const auto& b : gt.rigs) {
      if (a.id != b.id) {
        relative.push_back({{"i", a.id}, {"j", b.id}, {"matrix", rigid_to_json(gt.relative(a.id, b.id))}});
      }
    }
  }
  Json boards = Json::array();
  for (const auto& b : gt.boards) {
    boards.push_back({{"id", b.id},
                      {"split", split_name(b.split)},
                      {"rotation", matrix_to_json(b.rotation)},
                      {"translation", {b.translation.x(), b.translation.y(), b.translation.z()}}});
  }
  Json planes = Json::array();
  for (const auto& [key, plane] : gt.tof_planes) {
    const Vec4& v = plane.coeffs();
    planes.push_back({{"board_id", key.first}, {"rig_id", key.second}, {"plane", {v[0], v[1], v[2], v[3]}}});
  }
  const Json truth = {{"rigs", gt_rigs}, {"relative", relative}, {"boards", boards}, {"tof_planes", planes}};
  write_text_file(dir / "ground_truth.json", truth.dump(2) + "\n");

  std::ostringstream labels;
  labels << std::setprecision(17) << "board_id,rig_id,sample_index,outlier,region,true_range_mm\n";
  for (const auto& [key, list] : gt.hull_labels) {
    for (std::size_t k = 0; k < list.size(); ++k) {
      labels << key.first << ',' << key.second << ',' << k << ',' << (list[k].outlier ? 1 : 0) << ','
             << eval::to_string(list[k].region) << ',' << list[k].true_range_mm << '\n';
    }
  }
  write_text_file(dir / "labels.csv", labels.str());
}

Dataset read_dataset(const fs::path& dir) {
  const fs::path meta_path = dir / "dataset.json";
  const Json meta = read_json_file(meta_path);
  const std::string where = meta_path.string();
  Dataset ds;
  try {
    if (meta.at("format").get<int>() != kDatasetFormat) input_error(where + ": unsupported format");
    for (const Json& r : meta.at("rigs")) {
      RigSensors s;
      s.id = r.at("id").get<int>();
      s.tof_camera = CameraMatrix(matrix_from_json(r.at("tof_camera"), 3, 4));
      s.left_camera = CameraMatrix(matrix_from_json(r.at("left_camera"), 3, 4));
      s.right_camera = CameraMatrix(matrix_from_json(r.at("right_camera"), 3, 4));
      s.tof_size = {r.at("tof_size").at(0).get<int>(), r.at("tof_size").at(1).get<int>()};
      s.rgb_size = {r.at("rgb_size").at(0).get<int>(), r.at("rgb_size").at(1).get<int>()};
      s.max_range_mm = r.at("max_range_mm").get<double>();
      ds.rigs.push_back(s);
    }
    ds.fitting_boards = meta.at("fitting_boards").get<std::vector<int>>();
    ds.evaluation_boards = meta.at("evaluation_boards").get<std::vector<int>>();
  } catch (const Json::exception& e) {
    input_error(where + ": " + e.what());
  } catch (const Error& e) {
    if (e.code() == ErrorCode::kInputError) throw;
    input_error(where + ": " + e.what());
  }

  const fs::path vpath = dir / "vertices.csv";
  const auto rows = read_csv(vpath, {"board_id", "rig_id", "camera", "vertex_id", "x_px", "y_px", "range_mm"}, 6);
  std::map<std::pair<int, int>, std::map<std::string, std::map<int, Vec2>>> detections;
  std::size_t line = 1;
  for (const auto& row : rows) {
    const std::string at = vpath.string() + ":" + std::to_string(++line);
    const int board = to_int(row[0], at);
    const int rig = to_int(row[1], at);
    if (row[2] != "tof" && row[2] != "left" && row[2] != "right") input_error(at + ": unknown camera '" + row[2] + "'");
    detections[{board, rig}][row[2]][to_int(row[3], at)] = Vec2(to_double(row[4], at), to_double(row[5], at));
  }
  for (const auto& [key, cams] : detections) {
    const std::string at = vpath.string() + " board " + std::to_string(key.first) + " rig " + std::to_string(key.second);
    eval::BoardView view;
    view.board_id = key.first;
    view.rig_id = key.second;
    const RigSensors& rig = ds.rig(key.second);
    std::size_t count = 0;
    for (const char* cam : {"tof", "left", "right"}) {
      const auto it = cams.find(cam);
      if (it == cams.end()) input_error(at + ": missing " + cam + " detections");
      std::vector<Vec2>& dst = std::string(cam) == "tof" ? view.tof_vertices
                               : std::string(cam) == "left" ? view.left_vertices
                                                            : view.right_vertices;
      int expected = 0;
      for (const auto& [id, p] : it->second) {
        if (id != expected++) input_error(at + ": vertex ids must be 0..n-1");
        dst.push_back(p);
      }
      if (count != 0 && dst.size() != count) input_error(at + ": vertex counts differ between cameras");
      count = dst.size();
    }
    const fs::path rpath = dir / "range" / range_file_name(key.second, key.first);
    if (!fs::exists(rpath)) input_error("missing range file " + rpath.string());
    const auto rrows = read_csv(rpath, {"x_px", "y_px", "range_mm", "hull_id", "region"}, 4);
    std::vector<tof::RangeSample> all;
    std::vector<eval::Region> regions;
    std::vector<bool> member;
    std::size_t rl = 1;
    for (const auto& row : rrows) {
      const std::string rat = rpath.string() + ":" + std::to_string(++rl);
      try {
        all.emplace_back(Vec2(to_double(row[0], rat), to_double(row[1], rat)), to_double(row[2], rat),
                         rig.max_range_mm);
      } catch (const Error& e) {
        if (e.code() == ErrorCode::kInputError) throw;
        input_error(rat + ": " + e.what());
      }
      member.push_back(to_int(row[3], rat) == key.first);
      regions.push_back(row.size() > 4 ? region_from(row[4], rat) : eval::Region::kNone);
    }
    const bool labelled = std::any_of(member.begin(), member.end(), [](bool b) { return b; });
    if (!labelled) {
      // No explicit hull: keep samples inside the convex hull of the ToF vertices.
      const auto inside = eval::pixels_in_convex_hull(view.tof_vertices, rig.tof_size.width, rig.tof_size.height);
      std::set<std::pair<long, long>> keep;
      for (const auto& p : inside) keep.emplace(std::lround(p.x()), std::lround(p.y()));
      for (std::size_t k = 0; k < all.size(); ++k) {
        const Vec2& p = all[k].pixel();
        member[k] = p.x() == std::round(p.x()) && p.y() == std::round(p.y()) &&
                    keep.count({std::lround(p.x()), std::lround(p.y())}) != 0;
      }
    }
    for (std::size_t k = 0; k < all.size(); ++k) {
      if (!member[k]) continue;
      view.hull.push_back(all[k]);
      view.hull_regions.push_back(regions[k]);
    }
    ds.views[key] = std::move(view);
  }
  return ds;
}

CalibrationBundle make_bundle(const pipeline::Calibration& cal, const Json& config, std::string_view stereo_model) {
  CalibrationBundle b;
  b.config = config;
  b.config_hash = content_hash(config.dump());
  b.stereo = std::string(stereo_model);
  b.reference_rig = cal.graph.reference_rig();
  b.fitting_boards = cal.fitting_boards;
  b.evaluation_boards = cal.evaluation_boards;
  for (const auto& r : cal.rigs) {
    BundleRig br;
    br.id = r.id;
    br.tof_camera = r.tof_camera.matrix();
    br.left_camera = r.left_camera.matrix();
    br.right_camera = r.right_camera.matrix();
    br.stereo_to_tof = r.result.homography.matrix();
    br.tof_to_rgb = r.result.homography.inverse_matrix();
    br.dlt = r.dlt.matrix();
    if (r.result.refined_left) br.refined_left = r.result.refined_left->matrix();
    if (r.result.refined_right) br.refined_right = r.result.refined_right->matrix();
    br.boards = r.boards;
    const auto& res = r.result;
    br.diagnostics = {std::string(align::to_string(res.mode)), res.iterations, res.converged,
                      res.initial_error, res.final_error, res.initial_cost, res.final_cost,
                      res.raw_parameters, res.effective_parameters, r.correspondences};
    b.mode = br.diagnostics.mode;
    b.rigs.push_back(std::move(br));
  }
  for (const auto& e : cal.graph.all_edges()) {
    b.edges.push_back({e.i, e.j, e.transform, e.rigid.has_value(),
                       std::string(network::to_string(e.provenance)), e.path});
  }
  b.discrepancies = cal.discrepancies;
  return b;
}

Json to_json(const CalibrationBundle& b) {
  Json rigs = Json::array();
  for (const auto& r : b.rigs) {
    const auto& d = r.diagnostics;
    Json jr = {{"id", r.id},
               {"tof_camera", matrix_to_json(r.tof_camera)},
               {"left_camera", matrix_to_json(r.left_camera)},
               {"right_camera", matrix_to_json(r.right_camera)},
               {"stereo_to_tof", matrix_to_json(r.stereo_to_tof)},
               {"tof_to_rgb", matrix_to_json(r.tof_to_rgb)},
               {"dlt", matrix_to_json(r.dlt)},
               {"boards", r.boards},
               {"diagnostics",
                {{"mode", d.mode},
                 {"iterations", d.iterations},
                 {"converged", d.converged},
                 {"initial_error_px", d.initial_error},
                 {"final_error_px", d.final_error},
                 {"initial_cost", d.initial_cost},
                 {"final_cost", d.final_cost},
                 {"raw_parameters", d.raw_parameters},
                 {"effective_parameters", d.effective_parameters},
                 {"correspondences", d.correspondences}}}};
    if (r.refined_left) jr["refined_left"] = matrix_to_json(*r.refined_left);
    if (r.refined_right) jr["refined_right"] = matrix_to_json(*r.refined_right);
    rigs.push_back(std::move(jr));
  }
  Json edges = Json::array();
  for (const auto& e : b.edges) {
    edges.push_back({{"i", e.i},
                     {"j", e.j},
                     {"matrix", matrix_to_json(e.matrix)},
                     {"rigid", e.rigid},
                     {"provenance", e.provenance},
                     {"path", e.path}});
  }
  Json disc = Json::array();
  for (const auto& d : b.discrepancies) {
    disc.push_back({{"i", d.i}, {"j", d.j}, {"rotation_deg", d.rotation_deg}, {"translation_mm", d.translation_mm}});
  }
  return {{"version", b.version},
          {"format", b.format},
          {"config_hash", b.config_hash},
          {"input_hash", b.input_hash},
          {"config", b.config},
          {"mode", b.mode},
          {"stereo", b.stereo},
          {"reference_rig", b.reference_rig},
          {"fitting_boards", b.fitting_boards},
          {"evaluation_boards", b.evaluation_boards},
          {"rigs", rigs},
          {"edges", edges},
          {"discrepancies", disc}};
}

CalibrationBundle bundle_from_json(const Json& j) {
  CalibrationBundle b;
  try {
    if (!j.contains("version")) input_error("bundle: missing version");
    b.version = j.at("version").get<std::string>();
    b.format = j.at("format").get<int>();
    if (b.format != kBundleFormat) input_error("bundle: unsupported format");
    b.config_hash = j.at("config_hash").get<std::string>();
    b.input_hash = j.at("input_hash").get<std::string>();
    b.config = j.at("config");
    b.mode = j.at("mode").get<std::string>();
    b.stereo = j.at("stereo").get<std::string>();
    b.reference_rig = j.at("reference_rig").get<int>();
    b.fitting_boards = j.at("fitting_boards").get<std::vector<int>>();
    b.evaluation_boards = j.at("evaluation_boards").get<std::vector<int>>();
    for (const Json& jr : j.at("rigs")) {
      BundleRig r;
      r.id = jr.at("id").get<int>();
      r.tof_camera = matrix_from_json(jr.at("tof_camera"), 3, 4);
      r.left_camera = matrix_from_json(jr.at("left_camera"), 3, 4);
      r.right_camera = matrix_from_json(jr.at("right_camera"), 3, 4);
      r.stereo_to_tof = matrix_from_json(jr.at("stereo_to_tof"), 4, 4);
      r.tof_to_rgb = matrix_from_json(jr.at("tof_to_rgb"), 4, 4);
      r.dlt = matrix_from_json(jr.at("dlt"), 4, 4);
      r.boards = jr.at("boards").get<std::vector<int>>();
      if (jr.contains("refined_left")) r.refined_left = matrix_from_json(jr["refined_left"], 3, 4);
      if (jr.contains("refined_right")) r.refined_right = matrix_from_json(jr["refined_right"], 3, 4);
      const Json& d = jr.at("diagnostics");
      r.diagnostics = {d.at("mode").get<std::string>(),     d.at("iterations").get<int>(),
                       d.at("converged").get<bool>(),       d.at("initial_error_px").get<double>(),
                       d.at("final_error_px").get<double>(), d.at("initial_cost").get<double>(),
                       d.at("final_cost").get<double>(),    d.at("raw_parameters").get<int>(),
                       d.at("effective_parameters").get<int>(), d.at("correspondences").get<std::size_t>()};
      b.rigs.push_back(std::move(r));
    }
    for (const Json& je : j.at("edges")) {
      b.edges.push_back({je.at("i").get<int>(), je.at("j").get<int>(), matrix_from_json(je.at("matrix"), 4, 4),
                         je.at("rigid").get<bool>(), je.at("provenance").get<std::string>(),
                         je.at("path").get<std::vector<int>>()});
    }
    for (const Json& jd : j.at("discrepancies")) {
      b.discrepancies.push_back({jd.at("i").get<int>(), jd.at("j").get<int>(),
                                 jd.at("rotation_deg").get<double>(), jd.at("translation_mm").get<double>()});
    }
  } catch (const Json::exception& e) {
    input_error(std::string("bundle: ") + e.what());
  }
  return b;
}

network::NetworkGraph build_graph(const CalibrationBundle& b) {
  std::vector<network::Rig> rigs;
  for (const auto& r : b.rigs) {
    network::Rig nr(r.id, CameraMatrix(r.tof_camera), CameraMatrix(r.left_camera), CameraMatrix(r.right_camera),
                    Homography3(r.stereo_to_tof));
    if (r.refined_left) nr.refined_left = CameraMatrix(*r.refined_left);
    if (r.refined_right) nr.refined_right = CameraMatrix(*r.refined_right);
    rigs.push_back(std::move(nr));
  }
  network::NetworkGraph graph(std::move(rigs), b.reference_rig);
  for (const auto& e : b.edges) {
    if (e.provenance != "direct" || e.i > e.j) continue;
    if (e.rigid) {
      graph.add_direct_edge(e.i, e.j, RigidTransform3(e.matrix.topLeftCorner<3, 3>(), e.matrix.topRightCorner<3, 1>()));
    } else {
      graph.add_direct_projective_edge(e.i, e.j, Homography3(e.matrix));
    }
  }
  graph.finalize();
  return graph;
}

}  // namespace xcal::io

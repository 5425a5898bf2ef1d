#pragma once

#include <array>
#include <functional>
#include <map>
#include <optional>
#include <ostream>
#include <span>
#include <string_view>
#include <utility>
#include <vector>

#include "xcal/geom.hpp"
#include "xcal/network.hpp"
#include "xcal/tof.hpp"

namespace xcal::eval {

class Homography2 {
 public:
  explicit Homography2(const Mat3& entries);

  const Mat3& matrix() const { return entries_; }
  const Mat3& inverse_matrix() const { return inverse_; }
  HPoint2 apply(const HPoint2& p) const { return HPoint2(entries_ * p.coords()); }

 private:
  Mat3 entries_;
  Mat3 inverse_;
};

/// Normalized DLT followed by LM on the symmetric transfer error. Needs at
/// least four correspondences with no three of four collinear.
Homography2 dlt_homography2(std::span<const HPoint2> src, std::span<const HPoint2> dst);

enum class Region { kNone, kBlack, kWhite };
std::string_view to_string(Region r);

// One board as seen by one rig. Vertices are indexed identically across
// views; hull samples are raw range pixels covered by the board.
struct BoardView {
  int board_id = 0;
  int rig_id = 0;
  std::vector<Vec2> tof_vertices;
  std::vector<Vec2> left_vertices;
  std::vector<Vec2> right_vertices;
  std::vector<tof::RangeSample> hull;
  std::vector<Region> hull_regions;  // parallel to hull, may be empty
  std::optional<tof::FittedPlane> fitted_plane;
};

// Keyed by (board_id, rig_id).
using BoardViews = std::map<std::pair<int, int>, BoardView>;

struct PointError {
  int board_id = 0;
  int point_id = 0;  // vertex id or hull sample index
  int rig_i = 0;
  int rig_j = 0;
  network::Side side = network::Side::kLeft;
  double error = 0.0;  // px, unsquared
  Region region = Region::kNone;
};

inline constexpr int kHistogramBins = 30;  // 0.1 px on [0, 3]
inline constexpr double kHistogramWidth = 0.1;
using Histogram = std::array<std::size_t, kHistogramBins + 1>;  // last = overflow

struct Summary {
  double mean = 0.0;
  double median = 0.0;
  double max = 0.0;
  std::size_t count = 0;
};

class ErrorReport {
 public:
  ErrorReport() = default;
  explicit ErrorReport(std::vector<PointError> errors);

  const std::vector<PointError>& errors() const { return errors_; }
  bool empty() const { return errors_.empty(); }
  const Summary& summary() const { return summary_; }
  const Histogram& histogram() const { return histogram_; }

  ErrorReport filtered(const std::function<bool(const PointError&)>& keep) const;
  ErrorReport merged(const ErrorReport& other) const;

 private:
  std::vector<PointError> errors_;
  Summary summary_;
  Histogram histogram_{};
};

/// Throws kEmptyReport for an empty report.
Summary summarize(const ErrorReport& report);
std::size_t histogram_bin(double error);

/// Per-point CSV and histogram CSV (bin_low, bin_high, count; overflow row
/// has bin_high = inf).
void write_points_csv(std::ostream& out, const ErrorReport& report);
void write_histogram_csv(std::ostream& out, const ErrorReport& report);

/// Fitted-plane vertices of rig j's ToF view projected into rig i's RGB
/// images and compared with the detected vertices there. Boards missing from
/// either rig are skipped.
ErrorReport calibration_error(const network::NetworkGraph& graph, const BoardViews& views, int i,
                              int j);

/// Raw hull samples of rig j reprojected into rig i and compared with the
/// 2D transfer of their pixels (vertex-fitted ToF-to-RGB homography).
ErrorReport total_error(const network::NetworkGraph& graph, const BoardViews& views, int i, int j);

/// Integer pixels inside the convex hull of the given points, clipped to the
/// image. Fallback hull for datasets lacking explicit hull labels.
std::vector<Vec2> pixels_in_convex_hull(std::span<const Vec2> points, int width, int height);

}  // namespace xcal::eval

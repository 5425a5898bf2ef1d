#include "xcal/geom.hpp"

#include <cmath>

#include <Eigen/LU>
#include <Eigen/SVD>

namespace xcal {

std::string_view to_string(ErrorCode code) {
  switch (code) {
    case ErrorCode::kPointAtInfinity: return "point-at-infinity";
    case ErrorCode::kDegenerateScale: return "degenerate-scale";
    case ErrorCode::kNotInvertible: return "not-invertible";
    case ErrorCode::kInsufficientData: return "insufficient-data";
    case ErrorCode::kNoConsensus: return "no-consensus";
    case ErrorCode::kInvalidFrame: return "invalid-frame";
    case ErrorCode::kDegenerateGeometry: return "degenerate-geometry";
    case ErrorCode::kInvalidCamera: return "invalid-camera";
    case ErrorCode::kInvalidSample: return "invalid-sample";
    case ErrorCode::kDegenerateData: return "degenerate-data";
    case ErrorCode::kRayParallelToPlane: return "ray-parallel-to-plane";
    case ErrorCode::kPlaneBehindCamera: return "plane-behind-camera";
    case ErrorCode::kDegenerateConfiguration: return "degenerate-configuration";
    case ErrorCode::kInvalidInitialization: return "invalid-initialization";
    case ErrorCode::kDisconnectedNetwork: return "disconnected-network";
    case ErrorCode::kMissingPlane: return "missing-plane";
    case ErrorCode::kTransferEstimation: return "transfer-estimation";
    case ErrorCode::kEmptyReport: return "empty-report";
    case ErrorCode::kEmptyScene: return "empty-scene";
    case ErrorCode::kBehindCamera: return "behind-camera";
    case ErrorCode::kInvalidArgument: return "invalid-argument";
    case ErrorCode::kInputError: return "input-error";
    case ErrorCode::kContamination: return "contamination";
  }
  return "unknown";
}

HPoint3::HPoint3(const Vec4& coords) : coords_(coords) {
  if (coords_.isZero(0.0) || !coords_.allFinite()) {
    throw Error(ErrorCode::kInvalidArgument, "homogeneous point must be finite and non-zero");
  }
}

Vec3 HPoint3::euclidean() const {
  if (coords_[3] == 0.0) throw Error(ErrorCode::kPointAtInfinity, "point has w = 0");
  return coords_.head<3>() / coords_[3];
}

HPlane3::HPlane3(const Vec4& coeffs) : coeffs_(coeffs) {
  if (coeffs_.isZero(0.0) || !coeffs_.allFinite()) {
    throw Error(ErrorCode::kInvalidArgument, "plane coefficients must be finite and non-zero");
  }
}

HPlane3 HPlane3::normalized() const {
  const double n = coeffs_.head<3>().norm();
  if (n == 0.0) throw Error(ErrorCode::kPointAtInfinity, "plane at infinity has no unit normal");
  return HPlane3(coeffs_ / n);
}

double HPlane3::residual(const HPoint3& p) const {
  return normalized().coeffs().dot(p.euclidean().homogeneous());
}

HPoint2::HPoint2(const Vec3& coords) : coords_(coords) {
  if (coords_.isZero(0.0) || !coords_.allFinite()) {
    throw Error(ErrorCode::kInvalidArgument, "homogeneous image point must be finite and non-zero");
  }
}

Vec2 HPoint2::pixel() const {
  if (coords_[2] == 0.0) throw Error(ErrorCode::kPointAtInfinity, "image point has w = 0");
  return coords_.head<2>() / coords_[2];
}

CameraMatrix::CameraMatrix(const Mat34& entries) : entries_(entries) {
  if (!entries_.allFinite()) throw Error(ErrorCode::kInvalidCamera, "non-finite camera entries");
}

Vec4 CameraMatrix::centre() const {
  Eigen::JacobiSVD<Eigen::Matrix<double, 3, 4>> svd(entries_, Eigen::ComputeFullV);
  return svd.matrixV().col(3);
}

Homography3::Homography3(const Mat4& entries) : entries_(entries) {
  if (!entries_.allFinite()) throw Error(ErrorCode::kNotInvertible, "non-finite homography");
  const double f = entries_.norm();
  if (f == 0.0) throw Error(ErrorCode::kNotInvertible, "zero homography");
  Eigen::JacobiSVD<Mat4> svd(entries_ / f);
  const auto& s = svd.singularValues();
  if (!(s[3] > 1e-14 * s[0])) {
    throw Error(ErrorCode::kNotInvertible, "homography is singular");
  }
  inverse_ = entries_.inverse();
}

Homography3 Homography3::normalized() const {
  return Homography3(canonical(entries_));
}

RigidTransform3::RigidTransform3(const Mat3& rotation, const Vec3& translation)
    : rotation_(rotation), translation_(translation) {
  if ((rotation_.transpose() * rotation_ - Mat3::Identity()).norm() > 1e-9 ||
      rotation_.determinant() < 0.0) {
    throw Error(ErrorCode::kInvalidArgument, "rigid transform needs a proper rotation");
  }
}

Mat4 RigidTransform3::matrix() const {
  Mat4 m = Mat4::Identity();
  m.topLeftCorner<3, 3>() = rotation_;
  m.topRightCorner<3, 1>() = translation_;
  return m;
}

RigidTransform3 RigidTransform3::inverse() const {
  const Mat3 rt = rotation_.transpose();
  return {rt, -rt * translation_};
}

Mat3 rodrigues_to_matrix(const Vec3& rodrigues) {
  const double angle = rodrigues.norm();
  if (angle == 0.0) return Mat3::Identity();
  return Eigen::AngleAxisd(angle, rodrigues / angle).toRotationMatrix();
}

Vec3 matrix_to_rodrigues(const Mat3& rotation) {
  const Eigen::AngleAxisd aa(rotation);
  return aa.angle() * aa.axis();
}

Similarity3::Similarity3(double scale, const Vec3& rodrigues, const Vec3& translation)
    : scale_(scale),
      rodrigues_(rodrigues),
      rotation_(rodrigues_to_matrix(rodrigues)),
      translation_(translation) {
  if (!(scale_ > 0.0) || !std::isfinite(scale_)) {
    throw Error(ErrorCode::kInvalidArgument, "similarity scale must be positive");
  }
}

Similarity3 Similarity3::from_matrix(double scale, const Mat3& rotation, const Vec3& translation) {
  if ((rotation.transpose() * rotation - Mat3::Identity()).norm() > 1e-9 ||
      rotation.determinant() < 0.0) {
    throw Error(ErrorCode::kInvalidArgument, "similarity needs a proper rotation");
  }
  return Similarity3(scale, matrix_to_rodrigues(rotation), translation);
}

Mat4 Similarity3::matrix() const {
  Mat4 m = Mat4::Identity();
  m.topLeftCorner<3, 3>() = scale_ * rotation_;
  m.topRightCorner<3, 1>() = translation_;
  return m;
}

Similarity3 Similarity3::inverse() const {
  const Mat3 rt = rotation_.transpose();
  return Similarity3(1.0 / scale_, -rodrigues_, -(rt * translation_) / scale_);
}

Eigen::MatrixXd canonical(const Eigen::Ref<const Eigen::MatrixXd>& m) {
  const double n = m.norm();
  if (n == 0.0) throw Error(ErrorCode::kInvalidArgument, "cannot canonicalize a zero quantity");
  Eigen::Index r = 0;
  Eigen::Index c = 0;
  m.cwiseAbs().maxCoeff(&r, &c);
  return (m(r, c) < 0.0 ? -1.0 : 1.0) * m / n;
}

double homogeneous_distance(const Eigen::Ref<const Eigen::MatrixXd>& a,
                            const Eigen::Ref<const Eigen::MatrixXd>& b) {
  if (a.rows() != b.rows() || a.cols() != b.cols()) {
    throw Error(ErrorCode::kInvalidArgument, "shape mismatch in homogeneous comparison");
  }
  return (canonical(a) - canonical(b)).norm();
}

bool homogeneous_equal(const Eigen::Ref<const Eigen::MatrixXd>& a,
                       const Eigen::Ref<const Eigen::MatrixXd>& b, double tolerance) {
  return homogeneous_distance(a, b) <= tolerance;
}

double inhomog_distance(const HPoint2& p, const HPoint2& q) {
  return (p.pixel() - q.pixel()).norm();
}

Mat3 cross_matrix(const Vec3& u) {
  Mat3 m;
  m << 0.0, -u.z(), u.y(),
       u.z(), 0.0, -u.x(),
       -u.y(), u.x(), 0.0;
  return m;
}

Mat64 wedge(const HPoint3& q) {
  Mat64 w = Mat64::Zero();
  w.topLeftCorner<3, 3>() = q.w() * Mat3::Identity();
  w.topRightCorner<3, 1>() = -q.delta();
  w.bottomLeftCorner<3, 3>() = cross_matrix(q.delta());
  return w;
}

namespace {

template <int Dim>
struct NormalizeResult {
  std::vector<Eigen::Matrix<double, Dim, 1>> euclidean;
  Eigen::Matrix<double, Dim + 1, Dim + 1> transform;
};

template <int Dim, typename Point>
NormalizeResult<Dim> normalize_impl(std::span<const Point> points, double target_mean_norm) {
  using Vec = Eigen::Matrix<double, Dim, 1>;
  if (points.size() < 2) {
    throw Error(ErrorCode::kInsufficientData, "normalization needs at least two points");
  }
  NormalizeResult<Dim> out;
  out.euclidean.reserve(points.size());
  Vec centroid = Vec::Zero();
  for (const auto& p : points) {
    const auto& c = p.coords();
    if (c[Dim] == 0.0) throw Error(ErrorCode::kPointAtInfinity, "cannot normalize a point at infinity");
    out.euclidean.push_back(c.template head<Dim>() / c[Dim]);
    centroid += out.euclidean.back();
  }
  centroid /= static_cast<double>(points.size());
  double mean_norm = 0.0;
  for (const auto& e : out.euclidean) mean_norm += (e - centroid).norm();
  mean_norm /= static_cast<double>(points.size());
  if (!(mean_norm > 1e-12 * (1.0 + centroid.norm()))) {
    throw Error(ErrorCode::kDegenerateScale, "all points coincide");
  }
  const double s = target_mean_norm / mean_norm;
  out.transform.setIdentity();
  out.transform.template topLeftCorner<Dim, Dim>() *= s;
  out.transform.template topRightCorner<Dim, 1>() = -s * centroid;
  for (auto& e : out.euclidean) e = s * (e - centroid);
  return out;
}

}  // namespace

NormalizedPoints3 normalize_points(std::span<const HPoint3> points) {
  auto r = normalize_impl<3>(points, std::sqrt(3.0));
  NormalizedPoints3 out{{}, r.transform};
  out.points.reserve(r.euclidean.size());
  for (const auto& e : r.euclidean) out.points.push_back(HPoint3::from_euclidean(e));
  return out;
}

NormalizedPoints2 normalize_points(std::span<const HPoint2> points) {
  auto r = normalize_impl<2>(points, std::sqrt(2.0));
  NormalizedPoints2 out{{}, r.transform};
  out.points.reserve(r.euclidean.size());
  for (const auto& e : r.euclidean) out.points.push_back(HPoint2::from_pixel(e));
  return out;
}

SimilarityFit fit_similarity(std::span<const Vec3> source, std::span<const Vec3> target,
                             bool estimate_scale) {
  if (source.size() != target.size()) {
    throw Error(ErrorCode::kInvalidArgument, "point lists differ in length");
  }
  if (source.size() < 3) throw Error(ErrorCode::kDegenerateData, "need at least 3 point pairs");
  const double n = static_cast<double>(source.size());
  Vec3 mu_s = Vec3::Zero();
  Vec3 mu_t = Vec3::Zero();
  for (std::size_t k = 0; k < source.size(); ++k) {
    mu_s += source[k];
    mu_t += target[k];
  }
  mu_s /= n;
  mu_t /= n;
  Mat3 cross = Mat3::Zero();
  Mat3 cov_s = Mat3::Zero();
  double var_s = 0.0;
  for (std::size_t k = 0; k < source.size(); ++k) {
    const Vec3 ds = source[k] - mu_s;
    cross += (target[k] - mu_t) * ds.transpose();
    cov_s += ds * ds.transpose();
    var_s += ds.squaredNorm();
  }
  cross /= n;
  var_s /= n;
  const Eigen::JacobiSVD<Mat3> cov_svd(cov_s);
  if (!(cov_svd.singularValues()[1] > 1e-12 * cov_svd.singularValues()[0])) {
    throw Error(ErrorCode::kDegenerateData, "source points are collinear");
  }
  const Eigen::JacobiSVD<Mat3> svd(cross, Eigen::ComputeFullU | Eigen::ComputeFullV);
  Vec3 signs = Vec3::Ones();
  if (svd.matrixU().determinant() * svd.matrixV().determinant() < 0.0) signs[2] = -1.0;
  SimilarityFit fit;
  fit.rotation = svd.matrixU() * signs.asDiagonal() * svd.matrixV().transpose();
  fit.scale = estimate_scale ? svd.singularValues().dot(signs) / var_s : 1.0;
  if (!(fit.scale > 0.0)) throw Error(ErrorCode::kDegenerateData, "non-positive similarity scale");
  fit.translation = mu_t - fit.scale * fit.rotation * mu_s;
  return fit;
}

HPoint3 apply_homography(const Homography3& h, const HPoint3& p) {
  return HPoint3(h.matrix() * p.coords());
}

HPlane3 transform_plane(const Homography3& h, const HPlane3& u) {
  return HPlane3(h.inverse_matrix().transpose() * u.coeffs());
}

}  // namespace xcal

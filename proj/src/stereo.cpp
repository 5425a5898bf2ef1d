#include "xcal/stereo.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <random>

#include <Eigen/Eigenvalues>
#include <Eigen/LU>
#include <Eigen/SVD>

namespace xcal::stereo {

namespace {

Mat3 enforce_rank2(const Mat3& m, Vec3* right_epipole) {
  Eigen::JacobiSVD<Mat3> svd(m, Eigen::ComputeFullU | Eigen::ComputeFullV);
  Vec3 s = svd.singularValues();
  s[2] = 0.0;
  if (right_epipole != nullptr) *right_epipole = svd.matrixU().col(2);
  return svd.matrixU() * s.asDiagonal() * svd.matrixV().transpose();
}

FundamentalMatrix eight_point(std::span<const Correspondence2D2D> matches,
                              std::span<const std::size_t> subset) {
  std::vector<HPoint2> left;
  std::vector<HPoint2> right;
  left.reserve(subset.size());
  right.reserve(subset.size());
  for (std::size_t idx : subset) {
    left.push_back(matches[idx].left);
    right.push_back(matches[idx].right);
  }
  const auto nl = normalize_points(std::span<const HPoint2>(left));
  const auto nr = normalize_points(std::span<const HPoint2>(right));

  Eigen::MatrixXd a(static_cast<Eigen::Index>(subset.size()), 9);
  for (std::size_t k = 0; k < subset.size(); ++k) {
    const Vec3& l = nl.points[k].coords();
    const Vec3& r = nr.points[k].coords();
    for (int i = 0; i < 3; ++i) {
      for (int j = 0; j < 3; ++j) a(static_cast<Eigen::Index>(k), 3 * i + j) = r[i] * l[j];
    }
  }
  Eigen::JacobiSVD<Eigen::MatrixXd> svd(a, Eigen::ComputeFullV);
  const Eigen::VectorXd f = svd.matrixV().col(8);
  Mat3 fn;
  fn << f[0], f[1], f[2], f[3], f[4], f[5], f[6], f[7], f[8];
  fn = enforce_rank2(fn, nullptr);
  Mat3 denorm = nr.transform.transpose() * fn * nl.transform;
  return FundamentalMatrix(denorm / denorm.norm());
}

// Flags members of the set whose Sampson distance exceeds the threshold under
// the 8-point fit of the set without them (rank-one downdate of A^T A).
std::vector<std::size_t> deleted_residual_outliers(std::span<const Correspondence2D2D> matches,
                                                   const std::vector<std::size_t>& subset, double threshold) {
  std::vector<HPoint2> left;
  std::vector<HPoint2> right;
  for (std::size_t idx : subset) {
    left.push_back(matches[idx].left);
    right.push_back(matches[idx].right);
  }
  const auto nl = normalize_points(std::span<const HPoint2>(left));
  const auto nr = normalize_points(std::span<const HPoint2>(right));
  std::vector<Eigen::Matrix<double, 9, 1>> rows(subset.size());
  Eigen::Matrix<double, 9, 9> m = Eigen::Matrix<double, 9, 9>::Zero();
  for (std::size_t k = 0; k < subset.size(); ++k) {
    const Vec3& l = nl.points[k].coords();
    const Vec3& r = nr.points[k].coords();
    for (int i = 0; i < 3; ++i) {
      for (int j = 0; j < 3; ++j) rows[k][3 * i + j] = r[i] * l[j];
    }
    m += rows[k] * rows[k].transpose();
  }
  std::vector<std::size_t> out;
  for (std::size_t k = 0; k < subset.size(); ++k) {
    const Eigen::SelfAdjointEigenSolver<Eigen::Matrix<double, 9, 9>> es(m - rows[k] * rows[k].transpose());
    const Eigen::Matrix<double, 9, 1> f = es.eigenvectors().col(0);
    Mat3 fn;
    fn << f[0], f[1], f[2], f[3], f[4], f[5], f[6], f[7], f[8];
    const Mat3 denorm = nr.transform.transpose() * enforce_rank2(fn, nullptr) * nl.transform;
    if (FundamentalMatrix(denorm / denorm.norm()).sampson_distance(matches[subset[k]]) > threshold) {
      out.push_back(subset[k]);
    }
  }
  return out;
}

}  // namespace

FundamentalMatrix::FundamentalMatrix(const Mat3& entries) {
  if (!entries.allFinite() || entries.norm() == 0.0) {
    throw Error(ErrorCode::kInvalidArgument, "fundamental matrix must be finite and non-zero");
  }
  entries_ = enforce_rank2(entries, &right_epipole_);
}

Vec3 FundamentalMatrix::left_epipole() const {
  Eigen::JacobiSVD<Mat3> svd(entries_, Eigen::ComputeFullV);
  return svd.matrixV().col(2);
}

double FundamentalMatrix::algebraic_error(const Correspondence2D2D& m) const {
  return m.right.coords().dot(entries_ * m.left.coords());
}

double FundamentalMatrix::sampson_distance(const Correspondence2D2D& m) const {
  const Vec3 xl = m.left.pixel().homogeneous();
  const Vec3 xr = m.right.pixel().homogeneous();
  const Vec3 fl = entries_ * xl;
  const Vec3 fr = entries_.transpose() * xr;
  const double num = xr.dot(fl);
  const double den = fl.head<2>().squaredNorm() + fr.head<2>().squaredNorm();
  if (den == 0.0) return std::numeric_limits<double>::infinity();
  return std::abs(num) / std::sqrt(den);
}

FundamentalMatrix estimate_fundamental_8point(std::span<const Correspondence2D2D> matches) {
  if (matches.size() < 8) {
    throw Error(ErrorCode::kInsufficientData, "8-point estimation needs at least 8 matches");
  }
  std::vector<std::size_t> all(matches.size());
  std::iota(all.begin(), all.end(), std::size_t{0});
  return eight_point(matches, all);
}

FundamentalEstimate estimate_fundamental_ransac(std::span<const Correspondence2D2D> matches,
                                                const RansacOptions& options) {
  constexpr std::size_t kSample = 8;
  if (matches.size() < kSample) {
    throw Error(ErrorCode::kInsufficientData, "RANSAC needs at least 8 matches");
  }
  if (!(options.threshold_px > 0.0)) {
    throw Error(ErrorCode::kInvalidArgument, "threshold must be positive");
  }
  const std::size_t n = matches.size();
  std::mt19937_64 rng(options.seed);

  // Truncated quadratic cost; the inlier count alone cannot tell an exact
  // model from a nearby contaminated one.
  const double t2 = options.threshold_px * options.threshold_px;
  double cost = 0.0;
  auto score = [&](const FundamentalMatrix& f, std::vector<bool>& mask) {
    std::size_t count = 0;
    cost = 0.0;
    mask.assign(n, false);
    for (std::size_t k = 0; k < n; ++k) {
      const double d = f.sampson_distance(matches[k]);
      if (d <= options.threshold_px) {
        mask[k] = true;
        ++count;
        cost += d * d;
      } else {
        cost += t2;
      }
    }
    return count;
  };

  std::vector<bool> best_mask;
  std::size_t best_count = 0;
  double best_cost = std::numeric_limits<double>::infinity();
  std::vector<bool> mask;
  std::vector<std::size_t> sample(kSample);
  double required = static_cast<double>(options.max_iterations);
  int it = 0;
  for (; it < options.max_iterations && it < required; ++it) {
    // Partial Fisher-Yates draw of 8 distinct indices.
    std::vector<std::size_t> pool(n);
    std::iota(pool.begin(), pool.end(), std::size_t{0});
    for (std::size_t s = 0; s < kSample; ++s) {
      std::uniform_int_distribution<std::size_t> pick(s, n - 1);
      std::swap(pool[s], pool[pick(rng)]);
      sample[s] = pool[s];
    }
    try {
      const FundamentalMatrix f = eight_point(matches, sample);
      const std::size_t count = score(f, mask);
      if (count >= kSample && cost < best_cost) {
        best_cost = cost;
        best_count = count;
        best_mask = mask;
        const double w = static_cast<double>(count) / static_cast<double>(n);
        const double p_good = std::pow(w, static_cast<double>(kSample));
        if (p_good >= 1.0) {
          required = 0.0;
        } else if (-std::log1p(-p_good) > 0.0) {
          required = std::log(1.0 - options.confidence) / std::log1p(-p_good);
        }
      }
    } catch (const Error&) {
      // Degenerate minimal sample; draw again.
    }
  }
  if (best_count < kSample) {
    throw Error(ErrorCode::kNoConsensus, "no model reached 8 inliers");
  }

  // Refit on the consensus set until the mask settles; the final mask is
  // always scored against the returned F.
  std::vector<bool> current = best_mask;
  std::vector<bool> rejected(n, false);
  FundamentalMatrix f = FundamentalMatrix(Mat3::Identity());
  for (int round = 0; round < 10; ++round) {
    std::vector<std::size_t> idx;
    for (std::size_t k = 0; k < n; ++k) {
      if (current[k]) idx.push_back(k);
    }
    if (idx.size() < kSample) throw Error(ErrorCode::kNoConsensus, "consensus set collapsed");
    f = eight_point(matches, idx);
    std::size_t count = score(f, mask);
    if (count > kSample) {
      std::vector<std::size_t> members;
      for (std::size_t k = 0; k < n; ++k) {
        if (mask[k]) members.push_back(k);
      }
      for (std::size_t k : deleted_residual_outliers(matches, members, options.threshold_px)) {
        mask[k] = false;
        rejected[k] = true;
        --count;
      }
    }
    if (mask == current || count < kSample) {
      if (count < kSample) throw Error(ErrorCode::kNoConsensus, "refit lost consensus");
      break;
    }
    current = mask;
  }
  score(f, mask);
  for (std::size_t k = 0; k < n; ++k) mask[k] = mask[k] && !rejected[k];
  return {f, mask, it};
}

StereoCameras cameras_from_fundamental(const FundamentalMatrix& f, const ProjectiveFrame& frame) {
  if (frame.gamma == 0.0 || !std::isfinite(frame.gamma) || !frame.g.allFinite()) {
    throw Error(ErrorCode::kInvalidFrame, "projective frame needs gamma != 0");
  }
  const Vec3& e = f.right_epipole();
  Mat34 left = Mat34::Zero();
  left.leftCols<3>() = Mat3::Identity();
  Mat34 right;
  right.leftCols<3>() = cross_matrix(e) * f.matrix() + e * frame.g.transpose();
  right.col(3) = frame.gamma * e;
  return {CameraMatrix(left), CameraMatrix(right)};
}

FundamentalMatrix fundamental_from_cameras(const CameraMatrix& left, const CameraMatrix& right) {
  const Vec4 d = left.centre();
  const Vec3 e = right.matrix() * d;
  if (e.norm() <= 1e-12 * right.matrix().norm()) {
    throw Error(ErrorCode::kDegenerateGeometry, "camera centres coincide");
  }
  const Mat34& cl = left.matrix();
  const Eigen::Matrix<double, 4, 3> pinv = cl.transpose() * (cl * cl.transpose()).inverse();
  const Mat3 f = cross_matrix(e) * right.matrix() * pinv;
  return FundamentalMatrix(f / f.norm());
}

HPoint3 triangulate(const CameraMatrix& left, const CameraMatrix& right,
                    const Correspondence2D2D& m) {
  if (homogeneous_equal(left.centre(), right.centre(), 1e-10)) {
    throw Error(ErrorCode::kDegenerateGeometry, "camera centres coincide");
  }
  const Vec2 pl = m.left.pixel();
  const Vec2 pr = m.right.pixel();
  Mat4 a;
  a.row(0) = pl.x() * left.matrix().row(2) - left.matrix().row(0);
  a.row(1) = pl.y() * left.matrix().row(2) - left.matrix().row(1);
  a.row(2) = pr.x() * right.matrix().row(2) - right.matrix().row(0);
  a.row(3) = pr.y() * right.matrix().row(2) - right.matrix().row(1);
  for (int i = 0; i < 4; ++i) a.row(i).normalize();
  Eigen::JacobiSVD<Mat4> svd(a, Eigen::ComputeFullV);
  const Vec4& s = svd.singularValues();
  if (s[2] < 1e-9 * s[0]) {
    throw Error(ErrorCode::kDegenerateGeometry, "no parallax: point lies on the baseline");
  }
  Vec4 x = svd.matrixV().col(3);
  if (x[3] != 0.0) x /= x[3];
  return HPoint3(x);
}

}  // namespace xcal::stereo

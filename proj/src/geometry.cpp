#include "homofuse/geometry.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <sstream>

#include <Eigen/Geometry>

#include "homofuse/error.hpp"

namespace homofuse {

void CameraIntrinsics::validate() const {
  if (!std::isfinite(fx) || !std::isfinite(fy) || !std::isfinite(cx) ||
      !std::isfinite(cy) || fx <= 0.0 || fy <= 0.0) {
    std::ostringstream os;
    os << "invalid intrinsics fx=" << fx << " fy=" << fy << " cx=" << cx
       << " cy=" << cy;
    throw Error(ErrorCode::kInvalidArgument, os.str());
  }
}

Eigen::Matrix3d CameraIntrinsics::matrix() const {
  Eigen::Matrix3d K;
  K << fx, 0.0, cx,
       0.0, fy, cy,
       0.0, 0.0, 1.0;
  return K;
}

Eigen::Matrix3d CameraIntrinsics::inverse() const {
  Eigen::Matrix3d K_inv;
  K_inv << 1.0 / fx, 0.0, -cx / fx,
           0.0, 1.0 / fy, -cy / fy,
           0.0, 0.0, 1.0;
  return K_inv;
}

void RelativePose::validate() const {
  const double orth = (R.transpose() * R - Eigen::Matrix3d::Identity()).cwiseAbs().maxCoeff();
  const double det = R.determinant();
  if (!R.allFinite() || !t.allFinite() || orth > 1e-9 || std::abs(det - 1.0) > 1e-9) {
    std::ostringstream os;
    os << "pose rotation is not a proper rotation (orthogonality error " << orth
       << ", det " << det << ")";
    throw Error(ErrorCode::kInvalidArgument, os.str());
  }
}

RelativePose RelativePose::inverse() const {
  RelativePose out;
  out.R = R.transpose();
  out.t = -(out.R * t);
  return out;
}

RelativePose RelativePose::operator*(const RelativePose& rhs) const {
  RelativePose out;
  out.R = R * rhs.R;
  out.t = R * rhs.t + t;
  return out;
}

RelativePose RelativePose::from_camera_to_world(const Eigen::Matrix3d& R_wc_current,
                                                const Eigen::Vector3d& t_wc_current,
                                                const Eigen::Matrix3d& R_wc_ref,
                                                const Eigen::Vector3d& t_wc_ref) {
  // X_w = R_cur X_cur + t_cur = R_ref X_ref + t_ref
  RelativePose out;
  out.R = R_wc_ref.transpose() * R_wc_current;
  out.t = R_wc_ref.transpose() * (t_wc_current - t_wc_ref);
  return out;
}

bool SurfaceNormal::in_chart() const {
  constexpr double half_pi = std::numbers::pi / 2.0;
  return std::isfinite(theta) && std::isfinite(phi) && std::abs(theta) < half_pi &&
         std::abs(phi) < half_pi;
}

void PlaneConfig::validate() const {
  if (!std::isfinite(d) || d <= 0.0) {
    throw Error(ErrorCode::kInvalidArgument, "camera height must be positive");
  }
}

Eigen::Vector3d normal_vector(const SurfaceNormal& sn) {
  const double ct = std::cos(sn.theta);
  return {-std::sin(sn.phi) * ct, -std::cos(sn.phi) * ct, std::sin(sn.theta)};
}

SurfaceNormal angles_from_vector(const Eigen::Vector3d& n) {
  if (!n.allFinite() || std::abs(n.norm() - 1.0) > 1e-9) {
    throw Error(ErrorCode::kInvalidArgument, "normal vector is not unit length");
  }
  if (n.y() >= 0.0) {
    throw Error(ErrorCode::kSingularChart,
                "normal vector has n_y >= 0 and lies outside the upward chart");
  }
  return {std::asin(std::clamp(n.z(), -1.0, 1.0)), std::atan2(-n.x(), -n.y())};
}

Homography homography_matrix(const CameraIntrinsics& K, const RelativePose& pose,
                             const SurfaceNormal& sn, const PlaneConfig& plane) {
  return homography_matrix(K, pose, normal_vector(sn), plane);
}

Homography homography_matrix(const CameraIntrinsics& K, const RelativePose& pose,
                             const Eigen::Vector3d& n, const PlaneConfig& plane) {
  const Eigen::Matrix3d Km = K.matrix();
  const Eigen::Matrix3d K_inv = K.inverse();
  // Written as I + K (R - I) K^-1 - ... so that R = I, t = 0 yields the
  // identity bit-exactly.
  const Eigen::Matrix3d R_minus_I = pose.R - Eigen::Matrix3d::Identity();
  const Eigen::Vector3d Kt = Km * pose.t;
  const Eigen::RowVector3d nK_inv = n.transpose() * K_inv;
  Homography H;
  H.h = Eigen::Matrix3d::Identity() + Km * R_minus_I * K_inv - (Kt * nK_inv) / plane.d;
  return H;
}

Eigen::Vector2d project_point(const Homography& H, const Eigen::Vector2d& p) {
  const Eigen::Vector3d q = H.h * p.homogeneous();
  if (!(std::abs(q.z()) > 1e-12)) {
    throw Error(ErrorCode::kDegenerateProjection, "point maps to the line at infinity");
  }
  return {q.x() / q.z(), q.y() / q.z()};
}

Eigen::Matrix3d jac_homogeneous_wrt_normal(const CameraIntrinsics& K,
                                           const RelativePose& pose,
                                           const PlaneConfig& plane,
                                           const Eigen::Vector2d& p_t) {
  const Eigen::Vector3d ray = K.inverse() * p_t.homogeneous();
  return -(1.0 / plane.d) * (K.matrix() * pose.t) * ray.transpose();
}

Eigen::Matrix<double, 2, 3> jac_point_wrt_normal(const CameraIntrinsics& K,
                                                 const RelativePose& pose,
                                                 const SurfaceNormal& sn,
                                                 const PlaneConfig& plane,
                                                 const Eigen::Vector2d& p_t) {
  return jac_point_wrt_normal(K, pose, normal_vector(sn), plane, p_t);
}

Eigen::Matrix<double, 2, 3> jac_point_wrt_normal(const CameraIntrinsics& K,
                                                 const RelativePose& pose,
                                                 const Eigen::Vector3d& n,
                                                 const PlaneConfig& plane,
                                                 const Eigen::Vector2d& p_t) {
  const Eigen::Vector3d q = homography_matrix(K, pose, n, plane).h * p_t.homogeneous();
  if (!(std::abs(q.z()) > 1e-12)) {
    throw Error(ErrorCode::kDegenerateProjection, "point maps to the line at infinity");
  }
  const double inv_w = 1.0 / q.z();
  Eigen::Matrix<double, 2, 3> divide;
  divide << inv_w, 0.0, -q.x() * inv_w * inv_w,
            0.0, inv_w, -q.y() * inv_w * inv_w;
  return divide * jac_homogeneous_wrt_normal(K, pose, plane, p_t);
}

Eigen::Vector3d jac_normal_wrt_theta(const SurfaceNormal& sn) {
  const Eigen::Vector3d n = normal_vector(sn);
  const double s = 1.0 - n.z() * n.z();
  if (s <= 1e-12) {
    throw Error(ErrorCode::kSingularChart, "pitch derivative undefined at |theta| = pi/2");
  }
  const double root = std::sqrt(s);
  return {-n.x() * n.z() / root, -n.y() * n.z() / root, root};
}

Eigen::Vector3d jac_normal_wrt_phi(const SurfaceNormal& sn) {
  const Eigen::Vector3d n = normal_vector(sn);
  return {n.y(), -n.x(), 0.0};
}

Eigen::Matrix3d axis_angle(const Eigen::Vector3d& axis, double angle) {
  return Eigen::AngleAxisd(angle, axis.normalized()).toRotationMatrix();
}

}  // namespace homofuse

#pragma once

#include <Eigen/Core>

namespace homofuse {

// Conventions used throughout the library:
//   pixels (u, v): origin top-left, u to the right, v downward.
//   camera axes:   x right, y down, z forward.
//   RelativePose:  maps current-frame coordinates to reference-frame
//                  coordinates, X_ref = R * X_cur + t.
//   road plane:    n^T X = -d in the current camera frame, with n the
//                  upward unit normal ((0, -1, 0) for a level road) and d the
//                  camera height.

struct CameraIntrinsics {
  double fx = 1.0;
  double fy = 1.0;
  double cx = 0.0;
  double cy = 0.0;

  /// Throws kInvalidArgument unless fx, fy > 0 and all values are finite.
  void validate() const;

  Eigen::Matrix3d matrix() const;
  /// Closed-form inverse of matrix().
  Eigen::Matrix3d inverse() const;
};

struct RelativePose {
  Eigen::Matrix3d R = Eigen::Matrix3d::Identity();
  Eigen::Vector3d t = Eigen::Vector3d::Zero();

  /// Orthonormality and det(R) = 1, both within 1e-9.
  void validate() const;

  RelativePose inverse() const;
  /// Composition: (a * b) applies b first, then a.
  RelativePose operator*(const RelativePose& rhs) const;

  static RelativePose from_camera_to_world(const Eigen::Matrix3d& R_wc_current,
                                           const Eigen::Vector3d& t_wc_current,
                                           const Eigen::Matrix3d& R_wc_ref,
                                           const Eigen::Vector3d& t_wc_ref);
};

/// Road-surface orientation as pitch (theta) and roll (phi), radians.
struct SurfaceNormal {
  double theta = 0.15;
  double phi = 0.0;

  /// Chart validity: |theta| < pi/2 and |phi| < pi/2.
  bool in_chart() const;
};

struct PlaneConfig {
  double d = 1.0;  // camera height above the road, meters

  void validate() const;
};

struct Homography {
  Eigen::Matrix3d h = Eigen::Matrix3d::Identity();
};

/// n = (-sin(phi) cos(theta), -cos(phi) cos(theta), sin(theta)).
Eigen::Vector3d normal_vector(const SurfaceNormal& sn);

/// Inverse of normal_vector on the upward chart (n.y < 0).
SurfaceNormal angles_from_vector(const Eigen::Vector3d& n);

/// H = K (R - t n^T / d) K^-1, exact for points on n^T X = -d.
Homography homography_matrix(const CameraIntrinsics& K, const RelativePose& pose,
                             const SurfaceNormal& sn, const PlaneConfig& plane);

/// Same construction for an arbitrary (not necessarily unit) normal vector.
Homography homography_matrix(const CameraIntrinsics& K, const RelativePose& pose,
                             const Eigen::Vector3d& n, const PlaneConfig& plane);

/// Applies H to p (+) 1 and dehomogenizes. Throws kDegenerateProjection when
/// the homogeneous scale is within 1e-12 of zero.
Eigen::Vector2d project_point(const Homography& H, const Eigen::Vector2d& p);

/// Pre-divide derivative of H (p (+) 1) with respect to n:
/// -(1/d) K t (K^-1 (p (+) 1))^T.
Eigen::Matrix3d jac_homogeneous_wrt_normal(const CameraIntrinsics& K,
                                           const RelativePose& pose,
                                           const PlaneConfig& plane,
                                           const Eigen::Vector2d& p_t);

/// Derivative of the projected pixel with respect to n: the homogeneous
/// derivative composed with the derivative of the perspective divide.
Eigen::Matrix<double, 2, 3> jac_point_wrt_normal(const CameraIntrinsics& K,
                                                 const RelativePose& pose,
                                                 const SurfaceNormal& sn,
                                                 const PlaneConfig& plane,
                                                 const Eigen::Vector2d& p_t);

/// Overload taking a raw normal vector (used by the finite-difference checks).
Eigen::Matrix<double, 2, 3> jac_point_wrt_normal(const CameraIntrinsics& K,
                                                 const RelativePose& pose,
                                                 const Eigen::Vector3d& n,
                                                 const PlaneConfig& plane,
                                                 const Eigen::Vector2d& p_t);

/// dn/dtheta expressed in terms of n. Throws kSingularChart when
/// 1 - n_3^2 <= 1e-12.
Eigen::Vector3d jac_normal_wrt_theta(const SurfaceNormal& sn);

/// dn/dphi = (n_2, -n_1, 0).
Eigen::Vector3d jac_normal_wrt_phi(const SurfaceNormal& sn);

/// Rotation about a unit axis (Rodrigues).
Eigen::Matrix3d axis_angle(const Eigen::Vector3d& axis, double angle);

}  // namespace homofuse

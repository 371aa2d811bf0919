#pragma once

#include <cstdint>
#include <string>
#include <vector>

namespace homofuse {

struct JacobianSuiteResult {
  std::string name;
  int trials = 0;
  double max_rel_error = 0.0;
  double tolerance = 0.0;
  bool passed() const { return max_rel_error < tolerance; }
};

inline constexpr double kGeometryTolerance = 1e-5;
inline constexpr double kGradientTolerance = 1e-3;

/// Central finite-difference checks of every analytic derivative the
/// estimator uses, at `trials` seeded random configurations each:
///   dn/dtheta, dn/dphi        normal parameterization
///   dq/dn                     pre-divide homogeneous projection
///   dp/dn                     projected pixel
///   dp/d(theta, phi)          chained through the normal
///   bilinear gradient         feature-grid sampling
///   normal-equation gradient  against the robust total error
/// Relative error is ||analytic - fd||_inf / max(||analytic||_inf, 1e-12)
/// (directional derivative against ||g|| for the gradient suite).
/// Throws kInvalidArgument when trials < 1.
std::vector<JacobianSuiteResult> run_jacobian_checks(std::uint64_t seed, int trials);

}  // namespace homofuse

#pragma once

#include <iosfwd>
#include <vector>

#include <Eigen/Core>

#include "homofuse/frame_set.hpp"
#include "homofuse/robust_kernel.hpp"

namespace homofuse {

/// Road-surface normal estimation: robust Levenberg-Marquardt over
/// (pitch, roll), driven by feature residuals between each sample point of
/// the current frame and its homography-projected location in every
/// reference frame.

struct LmConfig {
  double lambda_theta = 0.1;
  double lambda_phi = 0.1;
  int max_iters = 20;
  double conv_threshold = 1e-4;  // radians
  /// Multiply damping by 10 when a step increases the error (and divide by
  /// 10 after an accepted step). Off by default.
  bool adaptive_damping = false;

  void validate() const;
};

/// Minimum number of valid (frame, sample) pairs the estimator accepts.
inline constexpr int kMinValidPairs = 8;
/// Steps are shortened so that |theta|, |phi| stay below pi/2 minus this.
inline constexpr double kChartMargin = 0.01;
inline constexpr int kMaxStepHalvings = 8;
inline constexpr double kMaxConditionNumber = 1e12;

struct AlignmentProblem {
  FrameSet frames;
  std::vector<Eigen::Vector2d> samples;

  void validate() const;
};

/// Residual blocks laid out reference-major: index = ref * m + sample, with
/// references in canonical (ascending id) order.
struct ResidualSet {
  int num_references = 0;
  int num_samples = 0;
  Eigen::MatrixXd values;     // C x (refs * m); invalid columns are zero
  std::vector<char> valid;    // per column
  std::vector<Eigen::Vector2d> projected;

  int valid_count() const;
};

ResidualSet residuals(const AlignmentProblem& prob, const SurfaceNormal& sn);

/// Sum of rho(||r||) over valid residual blocks, in index order.
double total_error(const ResidualSet& res, const RobustKernel& kernel);

struct NormalEquations {
  Eigen::Matrix2d hessian = Eigen::Matrix2d::Zero();
  Eigen::Vector2d gradient = Eigen::Vector2d::Zero();
  double error = 0.0;
  int valid = 0;
};

/// Gauss-Newton system with per-block IRLS weights w = rho'(x)/x:
/// H = sum w J^T J, g = sum w J^T r. g is the exact gradient of
/// total_error with respect to (theta, phi).
NormalEquations build_normal_equations(const AlignmentProblem& prob, const SurfaceNormal& sn,
                                       const RobustKernel& kernel);

/// Solves (H + diag(lambda_theta H00, lambda_phi H11)) step = -g.
/// Throws kSingularSystem when the damped matrix is not positive definite or
/// its condition number exceeds 1e12.
Eigen::Vector2d lm_step(const Eigen::Matrix2d& H, const Eigen::Vector2d& g, const LmConfig& cfg);

struct IterationRecord {
  int iteration = 0;
  double error = 0.0;
  SurfaceNormal normal;  // iterate at which `error` was evaluated
  Eigen::Vector2d step = Eigen::Vector2d::Zero();
};

struct LmState {
  SurfaceNormal normal;
  int iterations = 0;
  std::vector<IterationRecord> trace;
  Eigen::Vector2d last_step = Eigen::Vector2d::Zero();
  bool converged = false;
  double final_error = 0.0;  // total error at `normal`

  std::vector<double> error_trace() const;
};

/// True when some reference frame is translated relative to the current one.
/// Without translation the homography does not depend on the normal, so the
/// normal is unobservable.
bool has_parallax(const FrameSet& frames);

/// Runs the damped update loop from `init` until the largest step component
/// drops below conv_threshold or max_iters is reached. Throws
/// kSampleStarvation when fewer than kMinValidPairs pairs are valid,
/// kSingularSystem when the normal is unobservable, kSingularChart when a
/// step cannot be kept inside the chart.
LmState optimize(const AlignmentProblem& prob, const LmConfig& cfg, const RobustKernel& kernel,
                 const SurfaceNormal& init = SurfaceNormal{0.15, 0.0});

/// CSV with header iteration,E,theta,phi,d_theta,d_phi (LF line endings).
void write_trace_csv(std::ostream& os, const LmState& state);

}  // namespace homofuse

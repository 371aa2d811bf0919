#pragma once

#include <cstdint>
#include <memory>
#include <vector>

#include "homofuse/geometry.hpp"
#include "homofuse/grid.hpp"

namespace homofuse {

/// Top-down road texture attached to the road plane. Plane coordinates are
/// (a, b): a lateral along the projection of the camera x axis onto the
/// plane, b forward, both in meters from the foot point -d n.
struct RoadTexture {
  FeatureGrid grid;
  double meters_per_texel = 0.04;
  double lateral_min = -24.0;  // a at column 0
  double forward_min = -4.0;   // b at row 0

  Eigen::Vector2d texel(double a, double b) const {
    return {(a - lateral_min) / meters_per_texel, (b - forward_min) / meters_per_texel};
  }
};

struct TextureOptions {
  double meters_per_texel = 0.04;
  double lateral_min = -24.0;
  double lateral_max = 24.0;
  double forward_min = -4.0;
  double forward_max = 48.0;
  double blur_sigma_m = 0.12;
  int stains = 220;
  int markings = 70;
};

/// Seeded procedural road: low-frequency asphalt variation on a faint
/// checker, lane lines, scattered markings and stains, Gaussian blurred.
/// Three channels in [0, 1].
std::shared_ptr<const RoadTexture> make_road_texture(std::uint64_t seed,
                                                     const TextureOptions& opts = {});

struct Occluder {
  int frame = 0;  // index into the trajectory
  int row = 0;
  int col = 0;
  int rows = 0;
  int cols = 0;
  std::vector<float> fill;  // one value per channel, or a single broadcast value

  bool operator==(const Occluder&) const = default;
};

struct SceneSpec {
  std::shared_ptr<const RoadTexture> texture;
  CameraIntrinsics intrinsics;
  PlaneConfig plane;
  SurfaceNormal true_normal;
  int height = 68;
  int width = 212;
  /// Pose of every rendered frame relative to the current frame
  /// (current -> frame). The current frame is the last entry and must be
  /// the identity.
  std::vector<RelativePose> trajectory;
  /// Camera-to-vehicle calibration error applied to the poses reported to
  /// the estimator; identity means the reported poses are exact.
  RelativePose extrinsic_error;
  double noise_sigma = 0.0;
  std::vector<Occluder> occluders;
  std::uint64_t seed = 0;

  void validate() const;
  int current_index() const { return static_cast<int>(trajectory.size()) - 1; }
  /// Poses an estimator would be given: R' = Q^T R Q, t' = Q^T (t + (R - I) delta)
  /// for extrinsic_error = (Q, delta).
  std::vector<RelativePose> observed_trajectory() const;
};

bool operator==(const SceneSpec& a, const SceneSpec& b);

struct RenderedSequence {
  std::vector<FeatureGrid> frames;
  std::vector<FeatureGrid> clean_frames;
  SceneSpec spec;
};

/// Renders every trajectory frame by inverse-warping the texture through the
/// plane-to-image homography at the true normal, then paints occluders, then
/// adds seeded Gaussian noise clamped to [0, 1]. Throws kTextureTooSmall if
/// any pixel sees the plane outside the texture (or sees no plane at all).
RenderedSequence render(const SceneSpec& spec);

/// Forward motion with a slight yaw, `step_m` meters and `yaw_step_rad`
/// between consecutive frames; `count` frames, the last being the current.
std::vector<RelativePose> forward_trajectory(int count, double step_m, double yaw_step_rad);

/// 68 x 212 three-channel scene (the default feature resolution), camera
/// 1.5 m above the road, four frames 0.75 m apart, true normal (0.15, 0).
SceneSpec make_default_scene(std::uint64_t seed);

struct SuiteVariant {
  SceneSpec spec;
  double pitch = 0.0;
  double roll = 0.0;
  double rotation_error_deg = 0.0;
  double translation_error_m = 0.0;
  double occluder_coverage = 0.0;
};

// Axes of the perturbation suite.
inline constexpr double kSuitePitches[] = {0.05, 0.075, 0.10, 0.125, 0.15, 0.175, 0.20, 0.225, 0.25};
inline constexpr double kSuiteRolls[] = {-0.05, -0.025, 0.0, 0.025, 0.05};
inline constexpr double kSuiteRotationErrorsDeg[] = {0.0, 10.0, 20.0, 30.0};
inline constexpr double kSuiteTranslationErrorsM[] = {0.0, 1.0 / 3.0, 2.0 / 3.0, 1.0};
inline constexpr double kSuiteCoverages[] = {0.0, 0.10, 0.25};
inline constexpr std::size_t kSuiteSize = std::size(kSuitePitches) * std::size(kSuiteRolls) *
                                          std::size(kSuiteRotationErrorsDeg) *
                                          std::size(kSuiteCoverages);

/// Full grid over pitch x roll x extrinsic-error level x occluder coverage
/// (9 x 5 x 4 x 3 = 540 variants), ordered with coverage fastest. Each
/// variant copies `base`, sets the true normal, sets extrinsic_error
/// (rotation about a seeded random axis, translation along a seeded random
/// direction) and appends one occluder per reference frame covering the
/// given fraction of the image.
std::vector<SuiteVariant> perturbation_suite(const SceneSpec& base);

/// One axis-aligned occluder per reference frame with the given area
/// fraction, placed over the lower (road) part of the image.
std::vector<Occluder> reference_occluders(const SceneSpec& spec, double coverage,
                                          std::uint64_t seed, float fill = 0.05f);

}  // namespace homofuse

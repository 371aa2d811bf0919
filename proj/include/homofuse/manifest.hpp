#pragma once

#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include <json.hpp>

#include "homofuse/geometry.hpp"
#include "homofuse/synth.hpp"

namespace homofuse {

/// Written into every manifest and checked on load, so files cannot be read
/// under a different pose or plane convention than they were written with.
inline constexpr const char* kPoseConvention = "X_frame = R * X_anchor + t";
inline constexpr const char* kPlaneConvention = "n^T X = -d, n upward, camera x right y down z forward";

enum class PoseType { kRelative, kCameraToWorld };

struct ManifestFrame {
  int id = 0;
  std::string file;  // may be empty when frames come from --frames
  /// kRelative: pose of this frame relative to the anchor frame (anchor
  /// coordinates -> frame coordinates). kCameraToWorld: R_wc, t_wc.
  Eigen::Matrix3d R = Eigen::Matrix3d::Identity();
  Eigen::Vector3d t = Eigen::Vector3d::Zero();
};

/// Calibration plus frame list. Poses of any two frames can be related
/// through relative_pose() regardless of which frame is later the target.
struct Manifest {
  CameraIntrinsics intrinsics;
  PlaneConfig plane;
  PoseType pose_type = PoseType::kRelative;
  std::vector<ManifestFrame> frames;  // ascending unique ids
  std::optional<SurfaceNormal> true_normal;
  std::optional<std::uint64_t> seed;
  std::filesystem::path base_dir;  // relative frame files resolve against this

  void validate() const;
  /// Pose mapping target-frame coordinates to frame coordinates.
  RelativePose relative_pose(std::size_t frame, std::size_t target) const;
  std::filesystem::path frame_path(std::size_t i) const;
};

Manifest manifest_from_json(const nlohmann::json& j, const std::filesystem::path& base_dir = {});
nlohmann::json manifest_to_json(const Manifest& m);
Manifest read_manifest(const std::filesystem::path& path);
void write_manifest(const std::filesystem::path& path, const Manifest& m);

/// Scene description for the synth command. Every field is optional; omitted
/// fields take the defaults of default_synth_scene().
struct SynthDescription {
  std::uint64_t seed = 7;
  TextureOptions texture;
  SceneSpec spec;  // texture pointer filled by build()

  SceneSpec build() const;
};

/// Seven frames at 272 x 848 (four times the default feature resolution, so
/// the CLI's default 4x downsample lands on 68 x 212), 0.375 m apart, camera
/// 1.5 m above a road with normal (0.15, 0).
SynthDescription default_synth_scene(std::uint64_t seed);

SynthDescription synth_from_json(const nlohmann::json& j);
nlohmann::json synth_to_json(const SynthDescription& s);

}  // namespace homofuse

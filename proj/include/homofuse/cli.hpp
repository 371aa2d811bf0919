#pragma once

#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <optional>
#include <string>
#include <vector>

#include <json.hpp>

#include "homofuse/error.hpp"
#include "homofuse/fusion.hpp"
#include "homofuse/manifest.hpp"
#include "homofuse/rsne.hpp"

namespace homofuse {

/// Flags shared by every command; each command reads the subset it needs.
struct CliOptions {
  std::string calib;   // calibration/manifest JSON
  std::string frames;  // glob of image files, or a manifest JSON
  int n = 4;
  int gap = 2;
  int samples = 256;
  std::string kernel = "cauchy";
  double kernel_scale = 0.25;
  double lambda_theta = 0.1;
  double lambda_phi = 0.1;
  int max_iters = 20;
  double conv_threshold = 1e-4;
  bool adaptive_damping = false;
  int downsample = 4;
  std::optional<int> target;  // frame id; default is the last frame
  std::optional<std::uint64_t> seed;
  std::filesystem::path out = ".";

  std::optional<SurfaceNormal> normal;  // warp/fuse: skip estimation
  bool dense = false;                   // fuse every on-road pixel
  std::string spec;                     // synth scene description
  int trials = 1000;                    // check-jacobians

  void validate() const;
};

/// Process exit code per failure class (0 is success).
inline constexpr int kExitInternal = 1;
inline constexpr int kExitUsage = 2;
inline constexpr int kExitJacobianMismatch = 16;
int exit_code(ErrorCode code);

/// Frames chosen for one run, decoded, downsampled and tied together with
/// poses relative to the target.
struct LoadedFrames {
  FrameSet frames;
  std::vector<int> selected_ids;  // ascending, target last
  Manifest manifest;
};

LoadedFrames load_frames(const CliOptions& opt);

/// Intrinsics of a box-downsampled image: pixel centers (f-1)/2 + f*u'.
CameraIntrinsics downsample_intrinsics(const CameraIntrinsics& K, int factor);

/// Each command writes its artifacts and report.json into opt.out and
/// returns the report. Every path listed in the report is relative to
/// opt.out and exists when the command returns.
nlohmann::json cmd_estimate_normal(const CliOptions& opt);
nlohmann::json cmd_warp(const CliOptions& opt);
nlohmann::json cmd_fuse(const CliOptions& opt);
nlohmann::json cmd_synth(const CliOptions& opt);
nlohmann::json cmd_check_jacobians(const CliOptions& opt, std::ostream& table);

/// Dispatches by command name, printing errors to `err`; returns the exit code.
int run_command(const std::string& command, const CliOptions& opt, std::ostream& out,
                std::ostream& err);

}  // namespace homofuse

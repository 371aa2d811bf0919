#pragma once

#include <span>
#include <vector>

#include <Eigen/Core>

#include "homofuse/frame_set.hpp"

namespace homofuse {

/// Frame sampling: the target plus frame_count - 1 earlier frames spaced
/// frame_gap apart.
struct SequenceConfig {
  int frame_count = 4;
  int frame_gap = 2;

  void validate() const;
};

/// Positions (ascending) of the frames selected from `available` frames when
/// targeting position `target`. Frames before the start of the sequence are
/// dropped; fewer than two selected frames is kInsufficientFrames.
std::vector<int> select_frames(int available, int target, const SequenceConfig& cfg);

/// Triangular on-road area in front of the vehicle.
struct SampleRegion {
  Eigen::Vector2d apex;
  Eigen::Vector2d base_left;
  Eigen::Vector2d base_right;
  int m = 256;

  /// Strictly inside the triangle.
  bool contains(const Eigen::Vector2d& p) const;

  /// Apex at (W/2, 0.55 H), base corners at (0.02 W, H-1) and (0.98 W, H-1).
  static SampleRegion default_for(int height, int width, int m = 256);
};

inline constexpr int kMinSamples = 8;

/// m points of a rank-1 (R2) lattice folded into the triangle; every point is
/// strictly inside. Deterministic.
std::vector<Eigen::Vector2d> sample_region_points(const SampleRegion& region, int height,
                                                  int width);

/// Cosine similarity of L2-normalized vectors; 0 when either has norm < 1e-12.
double similarity(const Eigen::VectorXd& q, const Eigen::VectorXd& k);

/// Softmax. Throws kNoAdmittedFrames for an empty input.
std::vector<double> attention_weights(std::span<const double> similarities);

struct KeyWeight {
  int frame_id = 0;
  bool admitted = false;
  double similarity = 0.0;
  double weight = 0.0;  // 0 when not admitted
};

struct FusionOutput {
  std::vector<Eigen::Vector2d> points;
  std::vector<Eigen::VectorXd> fused;          // per point, F_t + sum_i W_i F_i
  std::vector<std::vector<KeyWeight>> weights;  // per point: current frame first, then refs by id
  std::vector<int> admitted_counts;
  /// Copy of the current frame with each fused value written at the pixel
  /// nearest its point.
  FeatureGrid grid;
};

/// Pixel-to-pixel attention across frames. For each point the current frame
/// is the query and also the first key; each reference contributes the value
/// at the homography-projected location. Keys that project out of frame (or
/// to infinity) are excluded from the softmax.
FusionOutput fuse(const FrameSet& frames, const SurfaceNormal& sn,
                  std::span<const Eigen::Vector2d> points);

/// Every integer pixel whose viewing ray meets the road plane in front of
/// the camera (dense fusion mode).
std::vector<Eigen::Vector2d> dense_road_points(const CameraIntrinsics& K, const SurfaceNormal& sn,
                                               int height, int width);

/// Mean over points of || fused / 2 - clean[p] ||_2.
double fused_alignment_error(const FusionOutput& out, const FeatureGrid& clean);

struct WarpResult {
  FeatureGrid image;
  std::vector<char> valid;  // per pixel, row-major
};

/// Inverse-warps `ref` onto a height x width grid: pixel p takes ref[H p].
/// Pixels mapping outside `ref` are zero and flagged invalid.
WarpResult warp_to_current(const FeatureGrid& ref, const Homography& H, int height, int width);

}  // namespace homofuse

#pragma once

#include <memory>
#include <vector>

#include "homofuse/geometry.hpp"
#include "homofuse/grid.hpp"

namespace homofuse {

struct ReferenceFrame {
  int id = 0;
  std::shared_ptr<const FeatureGrid> grid;
  RelativePose pose;  // current -> this frame
};

/// A current frame, its reference frames, and the calibration tying them to
/// the road plane.
struct FrameSet {
  std::shared_ptr<const FeatureGrid> current;
  int current_id = 0;
  std::vector<ReferenceFrame> references;
  CameraIntrinsics intrinsics;
  PlaneConfig plane;

  /// All grids present with a common channel count, unique frame ids,
  /// intrinsics, plane and poses valid. Zero references is allowed.
  void validate() const;

  /// References sorted by ascending id. Reductions over frames run in this
  /// order so results do not depend on the order frames were supplied in.
  std::vector<const ReferenceFrame*> canonical_order() const;
};

}  // namespace homofuse

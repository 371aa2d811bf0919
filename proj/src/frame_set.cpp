#include "homofuse/frame_set.hpp"

#include <algorithm>

#include "homofuse/error.hpp"

namespace homofuse {

void FrameSet::validate() const {
  intrinsics.validate();
  plane.validate();
  if (!current || current->empty()) {
    throw Error(ErrorCode::kInvalidArgument, "current frame is missing");
  }
  for (const auto& ref : references) {
    if (ref.id == current_id ||
        std::count_if(references.begin(), references.end(),
                      [&](const ReferenceFrame& r) { return r.id == ref.id; }) > 1) {
      throw Error(ErrorCode::kInvalidArgument, "frame id " + std::to_string(ref.id) + " is not unique");
    }
    if (!ref.grid || ref.grid->empty()) {
      throw Error(ErrorCode::kInvalidArgument, "reference frame " + std::to_string(ref.id) + " is missing");
    }
    if (ref.grid->channels() != current->channels()) {
      throw Error(ErrorCode::kInvalidArgument, "reference frame " + std::to_string(ref.id) +
                                                   " has a different channel count");
    }
    ref.pose.validate();
  }
}

std::vector<const ReferenceFrame*> FrameSet::canonical_order() const {
  std::vector<const ReferenceFrame*> out;
  out.reserve(references.size());
  for (const auto& ref : references) out.push_back(&ref);
  std::stable_sort(out.begin(), out.end(),
                   [](const ReferenceFrame* a, const ReferenceFrame* b) { return a->id < b->id; });
  return out;
}

}  // namespace homofuse

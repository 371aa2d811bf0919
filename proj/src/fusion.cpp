#include "homofuse/fusion.hpp"

#include <algorithm>
#include <cmath>

#include <Eigen/Geometry>

#include "homofuse/error.hpp"

namespace homofuse {

namespace {

double cross(const Eigen::Vector2d& a, const Eigen::Vector2d& b) {
  return a.x() * b.y() - a.y() * b.x();
}

bool strictly_inside(const SampleRegion& r, const Eigen::Vector2d& p) {
  const double orient = cross(r.base_left - r.apex, r.base_right - r.apex);
  const double s0 = cross(r.base_left - r.apex, p - r.apex) * orient;
  const double s1 = cross(r.base_right - r.base_left, p - r.base_left) * orient;
  const double s2 = cross(r.apex - r.base_right, p - r.base_right) * orient;
  return s0 > 0.0 && s1 > 0.0 && s2 > 0.0;
}

}  // namespace

void SequenceConfig::validate() const {
  if (frame_count < 1) throw Error(ErrorCode::kInvalidArgument, "frame count must be >= 1");
  if (frame_gap < 1) throw Error(ErrorCode::kInvalidArgument, "frame gap must be >= 1");
}

std::vector<int> select_frames(int available, int target, const SequenceConfig& cfg) {
  cfg.validate();
  if (target < 0 || target >= available) {
    throw Error(ErrorCode::kInvalidArgument, "target frame out of range");
  }
  std::vector<int> out;
  for (int s = cfg.frame_count - 1; s >= 0; --s) {
    const int pos = target - s * cfg.frame_gap;
    if (pos >= 0) out.push_back(pos);
  }
  if (out.size() < 2) {
    throw Error(ErrorCode::kInsufficientFrames,
                "need at least two frames at gap " + std::to_string(cfg.frame_gap));
  }
  return out;
}

bool SampleRegion::contains(const Eigen::Vector2d& p) const { return strictly_inside(*this, p); }

SampleRegion SampleRegion::default_for(int height, int width, int m) {
  SampleRegion r;
  r.apex = {width / 2.0, 0.55 * height};
  r.base_left = {0.02 * width, height - 1.0};
  r.base_right = {0.98 * width, height - 1.0};
  r.m = m;
  return r;
}

std::vector<Eigen::Vector2d> sample_region_points(const SampleRegion& region, int height,
                                                  int width) {
  if (region.m < kMinSamples) {
    throw Error(ErrorCode::kInvalidArgument,
                "sample count " + std::to_string(region.m) + " is below the minimum of 8");
  }
  for (const auto& v : {region.apex, region.base_left, region.base_right}) {
    if (!v.allFinite() || v.x() < 0.0 || v.y() < 0.0 || v.x() > width - 1 || v.y() > height - 1) {
      throw Error(ErrorCode::kInvalidArgument, "sample region vertex outside the image");
    }
  }
  const Eigen::Vector2d e1 = region.base_left - region.apex;
  const Eigen::Vector2d e2 = region.base_right - region.apex;
  if (std::abs(cross(e1, e2)) < 1e-9) {
    throw Error(ErrorCode::kDegenerateRegion, "sample region vertices are collinear");
  }

  // R2 sequence: additive recurrence with the inverse powers of the plastic
  // number, folded across the diagonal into barycentric coordinates.
  constexpr double g = 1.32471795724474602596;
  constexpr double a1 = 1.0 / g;
  constexpr double a2 = 1.0 / (g * g);
  std::vector<Eigen::Vector2d> out;
  out.reserve(region.m);
  for (long n = 1; static_cast<int>(out.size()) < region.m; ++n) {
    double s = std::fmod(0.5 + n * a1, 1.0);
    double t = std::fmod(0.5 + n * a2, 1.0);
    if (s + t > 1.0) {
      s = 1.0 - s;
      t = 1.0 - t;
    }
    const Eigen::Vector2d p = region.apex + s * e1 + t * e2;
    if (strictly_inside(region, p)) out.push_back(p);
  }
  return out;
}

double similarity(const Eigen::VectorXd& q, const Eigen::VectorXd& k) {
  const double nq = q.norm();
  const double nk = k.norm();
  if (nq < 1e-12 || nk < 1e-12) return 0.0;
  return (q / nq).dot(k / nk);
}

std::vector<double> attention_weights(std::span<const double> similarities) {
  if (similarities.empty()) {
    throw Error(ErrorCode::kNoAdmittedFrames, "no admitted keys for the softmax");
  }
  const double peak = *std::max_element(similarities.begin(), similarities.end());
  std::vector<double> w(similarities.size());
  double sum = 0.0;
  for (std::size_t i = 0; i < w.size(); ++i) {
    w[i] = std::exp(similarities[i] - peak);
    sum += w[i];
  }
  for (double& v : w) v /= sum;
  return w;
}

FusionOutput fuse(const FrameSet& frames, const SurfaceNormal& sn,
                  std::span<const Eigen::Vector2d> points) {
  frames.validate();
  const auto refs = frames.canonical_order();
  std::vector<Homography> homographies;
  for (const ReferenceFrame* ref : refs) {
    homographies.push_back(homography_matrix(frames.intrinsics, ref->pose, sn, frames.plane));
  }

  FusionOutput out;
  out.grid = *frames.current;
  out.points.assign(points.begin(), points.end());
  out.fused.reserve(points.size());
  out.weights.reserve(points.size());
  out.admitted_counts.reserve(points.size());

  std::vector<Eigen::VectorXd> values;
  std::vector<double> sims;
  for (const Eigen::Vector2d& p : points) {
    const SampleResult query = sample_bilinear(*frames.current, p);
    std::vector<KeyWeight> keys;
    values.clear();
    sims.clear();

    keys.push_back({frames.current_id, query.in_bounds, 0.0, 0.0});
    if (query.in_bounds) {
      keys.back().similarity = similarity(query.value, query.value);
      values.push_back(query.value);
      sims.push_back(keys.back().similarity);
    }
    for (std::size_t i = 0; i < refs.size(); ++i) {
      KeyWeight key{refs[i]->id, false, 0.0, 0.0};
      const Eigen::Vector3d q = homographies[i].h * p.homogeneous();
      if (query.in_bounds && std::abs(q.z()) > 1e-12) {
        const SampleResult s = sample_bilinear(*refs[i]->grid, q.hnormalized());
        if (s.in_bounds) {
          key.admitted = true;
          key.similarity = similarity(query.value, s.value);
          values.push_back(s.value);
          sims.push_back(key.similarity);
        }
      }
      keys.push_back(key);
    }

    Eigen::VectorXd fused = query.value;
    if (!sims.empty()) {
      const std::vector<double> w = attention_weights(sims);
      std::size_t next = 0;
      for (auto& key : keys) {
        if (key.admitted) key.weight = w[next++];
      }
      // sum_i W_i F_i written as F_t + sum_i W_i (F_i - F_t), equal because
      // the weights sum to one; identical keys then contribute exactly F_t.
      Eigen::VectorXd mix = query.value;
      for (std::size_t i = 0; i < values.size(); ++i) mix += w[i] * (values[i] - query.value);
      fused += mix;
    }

    const int col = static_cast<int>(std::lround(p.x()));
    const int row = static_cast<int>(std::lround(p.y()));
    if (row >= 0 && row < out.grid.height() && col >= 0 && col < out.grid.width()) {
      out.grid.set_pixel(row, col, fused);
    }
    out.admitted_counts.push_back(static_cast<int>(sims.size()));
    out.weights.push_back(std::move(keys));
    out.fused.push_back(std::move(fused));
  }
  return out;
}

std::vector<Eigen::Vector2d> dense_road_points(const CameraIntrinsics& K, const SurfaceNormal& sn,
                                               int height, int width) {
  const Eigen::RowVector3d nK_inv = normal_vector(sn).transpose() * K.inverse();
  std::vector<Eigen::Vector2d> out;
  for (int v = 0; v < height; ++v) {
    for (int u = 0; u < width; ++u) {
      if (nK_inv.dot(Eigen::Vector3d(u, v, 1.0)) < 0.0) out.emplace_back(u, v);
    }
  }
  return out;
}

double fused_alignment_error(const FusionOutput& out, const FeatureGrid& clean) {
  if (out.points.empty()) return 0.0;
  double acc = 0.0;
  for (std::size_t i = 0; i < out.points.size(); ++i) {
    acc += (0.5 * out.fused[i] - sample_bilinear(clean, out.points[i]).value).norm();
  }
  return acc / static_cast<double>(out.points.size());
}

WarpResult warp_to_current(const FeatureGrid& ref, const Homography& H, int height, int width) {
  WarpResult out{FeatureGrid(height, width, ref.channels()),
                 std::vector<char>(std::size_t(height) * std::size_t(width), 0)};
  for (int v = 0; v < height; ++v) {
    for (int u = 0; u < width; ++u) {
      const Eigen::Vector3d q = H.h * Eigen::Vector3d(u, v, 1.0);
      if (!(std::abs(q.z()) > 1e-12)) continue;
      const SampleResult s = sample_bilinear(ref, q.hnormalized());
      if (!s.in_bounds) continue;
      out.image.set_pixel(v, u, s.value);
      out.valid[std::size_t(v) * width + u] = 1;
    }
  }
  return out;
}

}  // namespace homofuse

#include "homofuse/synth.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <random>

#include <Eigen/Geometry>
#include <Eigen/LU>

#include "homofuse/error.hpp"

namespace homofuse {

namespace {

std::uint64_t mix_seed(std::uint64_t seed, std::uint64_t salt) {
  // splitmix64 finalizer
  std::uint64_t z = seed + 0x9e3779b97f4a7c15ULL * (salt + 1);
  z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
  z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
  return z ^ (z >> 31);
}

struct Canvas {
  int rows, cols;
  std::vector<double> r, g, b;

  Canvas(int rows_, int cols_)
      : rows(rows_), cols(cols_), r(std::size_t(rows_) * cols_), g(r.size()), b(r.size()) {}
};

void blur_axis(std::vector<double>& img, int rows, int cols, const std::vector<double>& kernel,
               bool horizontal) {
  const int radius = static_cast<int>(kernel.size() / 2);
  std::vector<double> out(img.size());
  for (int y = 0; y < rows; ++y) {
    for (int x = 0; x < cols; ++x) {
      double acc = 0.0;
      for (int k = -radius; k <= radius; ++k) {
        const int xx = horizontal ? std::clamp(x + k, 0, cols - 1) : x;
        const int yy = horizontal ? y : std::clamp(y + k, 0, rows - 1);
        acc += kernel[k + radius] * img[std::size_t(yy) * cols + xx];
      }
      out[std::size_t(y) * cols + x] = acc;
    }
  }
  img.swap(out);
}

bool pose_equal(const RelativePose& a, const RelativePose& b) { return a.R == b.R && a.t == b.t; }

// Plane basis in current-camera coordinates for the plane n^T X = -d.
struct PlaneFrame {
  Eigen::Vector3d origin;   // foot point -d n
  Eigen::Vector3d lateral;  // e1
  Eigen::Vector3d forward;  // e2 = n x e1
};

PlaneFrame plane_frame(const SurfaceNormal& sn, double d) {
  const Eigen::Vector3d n = normal_vector(sn);
  const Eigen::Vector3d x = Eigen::Vector3d::UnitX();
  PlaneFrame f;
  f.origin = -d * n;
  f.lateral = (x - x.dot(n) * n).normalized();
  f.forward = n.cross(f.lateral);
  return f;
}

}  // namespace

std::shared_ptr<const RoadTexture> make_road_texture(std::uint64_t seed,
                                                     const TextureOptions& opts) {
  const double res = opts.meters_per_texel;
  const int cols = static_cast<int>(std::ceil((opts.lateral_max - opts.lateral_min) / res)) + 1;
  const int rows = static_cast<int>(std::ceil((opts.forward_max - opts.forward_min) / res)) + 1;
  std::mt19937_64 rng(mix_seed(seed, 0x7e87));
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  auto uniform = [&](double lo, double hi) { return lo + (hi - lo) * unit(rng); };

  Canvas canvas(rows, cols);
  auto coord = [&](int row, int col) {
    return Eigen::Vector2d(opts.lateral_min + col * res, opts.forward_min + row * res);
  };

  // Asphalt: a few low-frequency plane waves on a faint 2 m checker.
  struct Wave { double kx, ky, phase, amp; };
  std::vector<Wave> waves;
  for (int i = 0; i < 8; ++i) {
    const double wavelength = uniform(0.6, 3.0);
    const double dir = uniform(0.0, 2.0 * std::numbers::pi);
    const double k = 2.0 * std::numbers::pi / wavelength;
    waves.push_back({k * std::cos(dir), k * std::sin(dir), uniform(0.0, 2.0 * std::numbers::pi), 0.025});
  }
  for (int row = 0; row < rows; ++row) {
    for (int col = 0; col < cols; ++col) {
      const Eigen::Vector2d p = coord(row, col);
      double v = 0.32;
      for (const auto& w : waves) v += w.amp * std::sin(w.kx * p.x() + w.ky * p.y() + w.phase);
      const long checker = static_cast<long>(std::floor(p.x() / 2.0)) +
                           static_cast<long>(std::floor(p.y() / 2.0));
      v += (checker % 2 == 0) ? 0.03 : -0.03;
      const std::size_t i = std::size_t(row) * cols + col;
      canvas.r[i] = v;
      canvas.g[i] = 0.98 * v;
      canvas.b[i] = 0.95 * v;
    }
  }

  auto paint = [&](auto&& inside, double lo_a, double hi_a, double lo_b, double hi_b,
                   const Eigen::Vector3d& color, bool additive) {
    const int c0 = std::max(0, static_cast<int>(std::floor((lo_a - opts.lateral_min) / res)));
    const int c1 = std::min(cols - 1, static_cast<int>(std::ceil((hi_a - opts.lateral_min) / res)));
    const int r0 = std::max(0, static_cast<int>(std::floor((lo_b - opts.forward_min) / res)));
    const int r1 = std::min(rows - 1, static_cast<int>(std::ceil((hi_b - opts.forward_min) / res)));
    for (int row = r0; row <= r1; ++row) {
      for (int col = c0; col <= c1; ++col) {
        if (!inside(coord(row, col))) continue;
        const std::size_t i = std::size_t(row) * cols + col;
        if (additive) {
          canvas.r[i] += color.x();
          canvas.g[i] += color.y();
          canvas.b[i] += color.z();
        } else {
          canvas.r[i] = color.x();
          canvas.g[i] = color.y();
          canvas.b[i] = color.z();
        }
      }
    }
  };

  // Stains and patches.
  for (int i = 0; i < opts.stains; ++i) {
    const Eigen::Vector2d c(uniform(opts.lateral_min, opts.lateral_max),
                            uniform(opts.forward_min, opts.forward_max));
    const double ra = uniform(0.15, 0.8);
    const double rb = uniform(0.15, 0.8);
    const double delta = uniform(-0.12, 0.12);
    paint([&](const Eigen::Vector2d& p) {
            const double x = (p.x() - c.x()) / ra;
            const double y = (p.y() - c.y()) / rb;
            return x * x + y * y <= 1.0;
          },
          c.x() - ra, c.x() + ra, c.y() - rb, c.y() + rb, Eigen::Vector3d::Constant(delta), true);
  }

  const Eigen::Vector3d white(0.92, 0.92, 0.90);
  const Eigen::Vector3d yellow(0.90, 0.75, 0.20);
  auto lane_line = [&](double a, double width, double dash, const Eigen::Vector3d& color) {
    paint([&](const Eigen::Vector2d& p) {
            if (std::abs(p.x() - a) > width / 2.0) return false;
            if (dash <= 0.0) return true;
            return std::fmod(p.y() - opts.forward_min, 2.0 * dash) < dash;
          },
          a - width, a + width, opts.forward_min, opts.forward_max, color, false);
  };
  lane_line(-1.75, 0.15, 0.0, white);
  lane_line(1.75, 0.15, 3.0, white);
  lane_line(-5.25, 0.15, 0.0, yellow);
  lane_line(5.25, 0.15, 3.0, white);

  // Markings: oriented bars and arrow heads scattered over the near lanes.
  for (int i = 0; i < opts.markings; ++i) {
    const Eigen::Vector2d c(uniform(-6.0, 6.0), uniform(opts.forward_min, opts.forward_max));
    const double angle = uniform(0.0, std::numbers::pi);
    const double half_len = uniform(0.3, 1.0);
    const double half_wid = uniform(0.08, 0.2);
    const Eigen::Vector2d axis(std::cos(angle), std::sin(angle));
    const Eigen::Vector2d perp(-axis.y(), axis.x());
    const bool arrow = (i % 3 == 0);
    const Eigen::Vector3d color = (i % 5 == 0) ? yellow : white;
    const double extent = half_len + 0.6;
    paint([&](const Eigen::Vector2d& p) {
            const Eigen::Vector2d d = p - c;
            const double along = d.dot(axis);
            const double across = std::abs(d.dot(perp));
            if (std::abs(along) <= half_len && across <= half_wid) return true;
            if (!arrow) return false;
            // triangular head beyond the stem tip
            const double beyond = along - half_len;
            return beyond >= 0.0 && beyond <= 0.5 && across <= 0.35 * (1.0 - beyond / 0.5);
          },
          c.x() - extent, c.x() + extent, c.y() - extent, c.y() + extent, color, false);
  }

  const double sigma = opts.blur_sigma_m / res;
  if (sigma > 0.0) {
    const int radius = static_cast<int>(std::ceil(3.0 * sigma));
    std::vector<double> kernel(2 * radius + 1);
    double sum = 0.0;
    for (int k = -radius; k <= radius; ++k) {
      kernel[k + radius] = std::exp(-0.5 * k * k / (sigma * sigma));
      sum += kernel[k + radius];
    }
    for (double& k : kernel) k /= sum;
    for (auto* ch : {&canvas.r, &canvas.g, &canvas.b}) {
      blur_axis(*ch, rows, cols, kernel, true);
      blur_axis(*ch, rows, cols, kernel, false);
    }
  }

  std::vector<float> data(std::size_t(rows) * cols * 3);
  for (std::size_t i = 0; i < canvas.r.size(); ++i) {
    data[3 * i + 0] = static_cast<float>(std::clamp(canvas.r[i], 0.0, 1.0));
    data[3 * i + 1] = static_cast<float>(std::clamp(canvas.g[i], 0.0, 1.0));
    data[3 * i + 2] = static_cast<float>(std::clamp(canvas.b[i], 0.0, 1.0));
  }
  auto tex = std::make_shared<RoadTexture>();
  tex->grid = FeatureGrid(rows, cols, 3, std::move(data));
  tex->meters_per_texel = res;
  tex->lateral_min = opts.lateral_min;
  tex->forward_min = opts.forward_min;
  return tex;
}

void SceneSpec::validate() const {
  if (!texture || texture->grid.empty()) {
    throw Error(ErrorCode::kInvalidArgument, "scene has no texture");
  }
  intrinsics.validate();
  plane.validate();
  if (!true_normal.in_chart()) throw Error(ErrorCode::kInvalidArgument, "true normal outside chart");
  if (height <= 0 || width <= 0) throw Error(ErrorCode::kInvalidArgument, "bad image size");
  if (trajectory.empty()) throw Error(ErrorCode::kInvalidArgument, "trajectory is empty");
  for (const auto& pose : trajectory) pose.validate();
  extrinsic_error.validate();
  const RelativePose& cur = trajectory.back();
  if ((cur.R - Eigen::Matrix3d::Identity()).cwiseAbs().maxCoeff() > 1e-12 ||
      cur.t.cwiseAbs().maxCoeff() > 1e-12) {
    throw Error(ErrorCode::kInvalidArgument, "last trajectory pose (current frame) must be identity");
  }
  if (!(noise_sigma >= 0.0) || !(noise_sigma < 0.2)) {
    throw Error(ErrorCode::kInvalidArgument, "noise sigma must be in [0, 0.2)");
  }
  const int C = texture->grid.channels();
  for (const auto& occ : occluders) {
    if (occ.frame < 0 || occ.frame >= static_cast<int>(trajectory.size()) || occ.rows <= 0 ||
        occ.cols <= 0 || occ.row < 0 || occ.col < 0 || occ.row + occ.rows > height ||
        occ.col + occ.cols > width) {
      throw Error(ErrorCode::kInvalidArgument, "occluder rectangle outside the frame");
    }
    if (occ.fill.size() != 1 && static_cast<int>(occ.fill.size()) != C) {
      throw Error(ErrorCode::kInvalidArgument, "occluder fill must have 1 or C values");
    }
  }
}

std::vector<RelativePose> SceneSpec::observed_trajectory() const {
  const Eigen::Matrix3d& Q = extrinsic_error.R;
  const Eigen::Vector3d& delta = extrinsic_error.t;
  std::vector<RelativePose> out;
  out.reserve(trajectory.size());
  for (const auto& pose : trajectory) {
    RelativePose p;
    p.R = Q.transpose() * pose.R * Q;
    p.t = Q.transpose() * (pose.t + (pose.R - Eigen::Matrix3d::Identity()) * delta);
    out.push_back(p);
  }
  return out;
}

bool operator==(const SceneSpec& a, const SceneSpec& b) {
  if (a.trajectory.size() != b.trajectory.size()) return false;
  for (std::size_t i = 0; i < a.trajectory.size(); ++i) {
    if (!pose_equal(a.trajectory[i], b.trajectory[i])) return false;
  }
  return a.texture == b.texture && a.intrinsics.fx == b.intrinsics.fx &&
         a.intrinsics.fy == b.intrinsics.fy && a.intrinsics.cx == b.intrinsics.cx &&
         a.intrinsics.cy == b.intrinsics.cy && a.plane.d == b.plane.d &&
         a.true_normal.theta == b.true_normal.theta && a.true_normal.phi == b.true_normal.phi &&
         a.height == b.height && a.width == b.width &&
         pose_equal(a.extrinsic_error, b.extrinsic_error) && a.noise_sigma == b.noise_sigma &&
         a.occluders == b.occluders && a.seed == b.seed;
}

RenderedSequence render(const SceneSpec& spec) {
  spec.validate();
  const RoadTexture& tex = *spec.texture;
  const PlaneFrame pf = plane_frame(spec.true_normal, spec.plane.d);
  const Eigen::Matrix3d K = spec.intrinsics.matrix();
  const int C = tex.grid.channels();

  RenderedSequence seq;
  seq.spec = spec;
  for (std::size_t k = 0; k < spec.trajectory.size(); ++k) {
    const RelativePose& pose = spec.trajectory[k];
    // Plane coordinates (a, b, 1) -> frame-k pixel.
    Eigen::Matrix3d M;
    M.col(0) = pose.R * pf.lateral;
    M.col(1) = pose.R * pf.forward;
    M.col(2) = pose.R * pf.origin + pose.t;
    const Eigen::Matrix3d pixel_to_plane = (K * M).inverse();

    FeatureGrid clean(spec.height, spec.width, C);
    for (int v = 0; v < spec.height; ++v) {
      for (int u = 0; u < spec.width; ++u) {
        const Eigen::Vector3d h = pixel_to_plane * Eigen::Vector3d(u, v, 1.0);
        const Eigen::Vector2d ab = h.hnormalized();
        const double depth = (M * ab.homogeneous()).z();
        const SampleResult s = sample_bilinear(tex.grid, tex.texel(ab.x(), ab.y()));
        if (!(std::abs(h.z()) > 1e-12) || !(depth > 0.0) || !s.in_bounds) {
          throw Error(ErrorCode::kTextureTooSmall,
                      "frame " + std::to_string(k) + " pixel (" + std::to_string(u) + ", " +
                          std::to_string(v) + ") sees the road outside the texture");
        }
        clean.set_pixel(v, u, s.value);
      }
    }

    FeatureGrid frame = clean;
    for (const auto& occ : spec.occluders) {
      if (occ.frame != static_cast<int>(k)) continue;
      for (int r = occ.row; r < occ.row + occ.rows; ++r) {
        for (int c = occ.col; c < occ.col + occ.cols; ++c) {
          for (int ch = 0; ch < C; ++ch) frame.at(r, c, ch) = occ.fill.size() == 1 ? occ.fill[0] : occ.fill[ch];
        }
      }
    }
    if (spec.noise_sigma > 0.0) {
      std::mt19937_64 rng(mix_seed(spec.seed, 1000 + k));
      std::normal_distribution<double> noise(0.0, spec.noise_sigma);
      for (float& v : frame.data()) v = static_cast<float>(std::clamp(v + noise(rng), 0.0, 1.0));
    }
    seq.clean_frames.push_back(std::move(clean));
    seq.frames.push_back(std::move(frame));
  }
  return seq;
}

std::vector<RelativePose> forward_trajectory(int count, double step_m, double yaw_step_rad) {
  if (count <= 0) throw Error(ErrorCode::kInvalidArgument, "trajectory needs at least one frame");
  std::vector<RelativePose> out;
  for (int k = 0; k < count; ++k) {
    const int back = count - 1 - k;
    const Eigen::Matrix3d R_wc = axis_angle(Eigen::Vector3d::UnitY(), -back * yaw_step_rad);
    const Eigen::Vector3d c =
        axis_angle(Eigen::Vector3d::UnitY(), -0.5 * back * yaw_step_rad) *
        Eigen::Vector3d(0.0, 0.0, -back * step_m);
    if (back == 0) {
      out.emplace_back();
    } else {
      out.push_back(RelativePose::from_camera_to_world(Eigen::Matrix3d::Identity(),
                                                       Eigen::Vector3d::Zero(), R_wc, c));
    }
  }
  return out;
}

SceneSpec make_default_scene(std::uint64_t seed) {
  SceneSpec spec;
  spec.texture = make_road_texture(seed);
  spec.intrinsics = {144.0, 144.0, 105.5, -50.0};
  spec.plane = {1.5};
  spec.true_normal = {0.15, 0.0};
  spec.height = 68;
  spec.width = 212;
  spec.trajectory = forward_trajectory(4, 0.75, 0.5 * std::numbers::pi / 180.0);
  spec.seed = seed;
  return spec;
}

std::vector<Occluder> reference_occluders(const SceneSpec& spec, double coverage,
                                          std::uint64_t seed, float fill) {
  std::vector<Occluder> out;
  if (coverage <= 0.0) return out;
  const double area = coverage * spec.height * spec.width;
  const int cols = std::clamp(static_cast<int>(std::lround(std::sqrt(area * 2.5))), 1, spec.width);
  const int rows = std::clamp(static_cast<int>(std::lround(area / cols)), 1, spec.height);
  std::mt19937_64 rng(mix_seed(seed, 0x0cc1));
  for (int k = 0; k < spec.current_index(); ++k) {
    const int row_lo = std::min(static_cast<int>(0.4 * spec.height), spec.height - rows);
    std::uniform_int_distribution<int> row_dist(row_lo, spec.height - rows);
    std::uniform_int_distribution<int> col_dist(0, spec.width - cols);
    Occluder occ;
    occ.frame = k;
    occ.row = row_dist(rng);
    occ.col = col_dist(rng);
    occ.rows = rows;
    occ.cols = cols;
    occ.fill = {fill};
    out.push_back(occ);
  }
  return out;
}

std::vector<SuiteVariant> perturbation_suite(const SceneSpec& base) {
  base.validate();
  std::vector<SuiteVariant> out;
  out.reserve(kSuiteSize);
  std::uint64_t index = 0;
  for (double pitch : kSuitePitches) {
    for (double roll : kSuiteRolls) {
      for (std::size_t level = 0; level < std::size(kSuiteRotationErrorsDeg); ++level) {
        for (double coverage : kSuiteCoverages) {
          SuiteVariant v;
          v.spec = base;
          v.pitch = pitch;
          v.roll = roll;
          v.rotation_error_deg = kSuiteRotationErrorsDeg[level];
          v.translation_error_m = kSuiteTranslationErrorsM[level];
          v.occluder_coverage = coverage;
          v.spec.true_normal = {pitch, roll};
          if (level > 0) {
            std::mt19937_64 rng(mix_seed(base.seed, 0x51170000ULL + index));
            std::normal_distribution<double> gauss(0.0, 1.0);
            const Eigen::Vector3d axis = Eigen::Vector3d(gauss(rng), gauss(rng), gauss(rng)).normalized();
            const Eigen::Vector3d dir = Eigen::Vector3d(gauss(rng), gauss(rng), gauss(rng)).normalized();
            v.spec.extrinsic_error.R = axis_angle(axis, v.rotation_error_deg * std::numbers::pi / 180.0);
            v.spec.extrinsic_error.t = v.translation_error_m * dir;
          }
          const auto extra = reference_occluders(v.spec, coverage, mix_seed(base.seed, index));
          v.spec.occluders.insert(v.spec.occluders.end(), extra.begin(), extra.end());
          out.push_back(std::move(v));
          ++index;
        }
      }
    }
  }
  return out;
}

}  // namespace homofuse

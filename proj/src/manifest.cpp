#include "homofuse/manifest.hpp"

#include <cmath>
#include <fstream>
#include <numbers>

#include "homofuse/error.hpp"

namespace homofuse {

using nlohmann::json;

namespace {

// Any nlohmann type or range error is a malformed input, not a crash.
template <typename F>
auto guarded(const char* what, F&& f) {
  try {
    return f();
  } catch (const json::exception& e) {
    throw Error(ErrorCode::kInvalidArgument, std::string(what) + ": " + e.what());
  }
}

Eigen::Matrix3d matrix_from_json(const json& j) {
  if (!j.is_array() || j.size() != 9) {
    throw Error(ErrorCode::kInvalidArgument, "R must be 9 numbers, row-major");
  }
  Eigen::Matrix3d R;
  for (int r = 0; r < 3; ++r) {
    for (int c = 0; c < 3; ++c) R(r, c) = j.at(3 * r + c).get<double>();
  }
  return R;
}

Eigen::Vector3d vector_from_json(const json& j) {
  if (!j.is_array() || j.size() != 3) throw Error(ErrorCode::kInvalidArgument, "t must be 3 numbers");
  return {j[0].get<double>(), j[1].get<double>(), j[2].get<double>()};
}

json to_json(const Eigen::Matrix3d& R) {
  json out = json::array();
  for (int r = 0; r < 3; ++r) {
    for (int c = 0; c < 3; ++c) out.push_back(R(r, c));
  }
  return out;
}

json to_json(const Eigen::Vector3d& t) { return json::array({t.x(), t.y(), t.z()}); }

CameraIntrinsics intrinsics_from_json(const json& j) {
  CameraIntrinsics K{j.at("fx").get<double>(), j.at("fy").get<double>(), j.at("cx").get<double>(),
                     j.at("cy").get<double>()};
  K.validate();
  return K;
}

json to_json(const CameraIntrinsics& K) {
  return {{"fx", K.fx}, {"fy", K.fy}, {"cx", K.cx}, {"cy", K.cy}};
}

json to_json(const RelativePose& p) { return {{"R", to_json(p.R)}, {"t", to_json(p.t)}}; }

RelativePose pose_from_json(const json& j) {
  RelativePose p{matrix_from_json(j.at("R")), vector_from_json(j.at("t"))};
  p.validate();
  return p;
}

}  // namespace

void Manifest::validate() const {
  intrinsics.validate();
  plane.validate();
  if (frames.empty()) throw Error(ErrorCode::kInvalidArgument, "manifest lists no frames");
  for (std::size_t i = 0; i < frames.size(); ++i) {
    RelativePose{frames[i].R, frames[i].t}.validate();
    if (i > 0 && frames[i].id <= frames[i - 1].id) {
      throw Error(ErrorCode::kInvalidArgument, "frame ids must be unique and ascending");
    }
  }
  if (true_normal && !true_normal->in_chart()) {
    throw Error(ErrorCode::kInvalidArgument, "true_normal outside the chart");
  }
}

RelativePose Manifest::relative_pose(std::size_t frame, std::size_t target) const {
  const auto& f = frames.at(frame);
  const auto& g = frames.at(target);
  if (pose_type == PoseType::kCameraToWorld) {
    return RelativePose::from_camera_to_world(g.R, g.t, f.R, f.t);
  }
  const RelativePose pf{f.R, f.t};
  const RelativePose pg{g.R, g.t};
  // Skip the composition when the target is the anchor so stored poses are
  // used exactly as written.
  if (pg.R == Eigen::Matrix3d::Identity() && pg.t.isZero(0.0)) return pf;
  return pf * pg.inverse();
}

std::filesystem::path Manifest::frame_path(std::size_t i) const {
  const std::filesystem::path p = frames.at(i).file;
  return p.is_absolute() ? p : base_dir / p;
}

Manifest manifest_from_json(const json& j, const std::filesystem::path& base_dir) {
  return guarded("manifest", [&] {
    const json& conv = j.at("convention");
    if (conv.at("pose").get<std::string>() != kPoseConvention ||
        conv.at("plane").get<std::string>() != kPlaneConvention) {
      throw Error(ErrorCode::kInvalidArgument,
                  "manifest convention does not match this build (expected pose \"" +
                      std::string(kPoseConvention) + "\")");
    }
    Manifest m;
    m.base_dir = base_dir;
    m.intrinsics = intrinsics_from_json(j.at("intrinsics"));
    m.plane.d = j.at("camera_height").get<double>();
    const std::string type = j.value("pose_type", std::string("relative"));
    if (type == "relative") {
      m.pose_type = PoseType::kRelative;
    } else if (type == "camera_to_world") {
      m.pose_type = PoseType::kCameraToWorld;
    } else {
      throw Error(ErrorCode::kInvalidArgument, "pose_type must be relative or camera_to_world");
    }
    for (const json& f : j.at("frames")) {
      ManifestFrame mf;
      mf.id = f.at("id").get<int>();
      mf.file = f.value("file", std::string());
      mf.R = matrix_from_json(f.at("R"));
      mf.t = vector_from_json(f.at("t"));
      m.frames.push_back(std::move(mf));
    }
    if (j.contains("true_normal")) {
      m.true_normal = SurfaceNormal{j["true_normal"].at("theta").get<double>(),
                                    j["true_normal"].at("phi").get<double>()};
    }
    if (j.contains("seed")) m.seed = j["seed"].get<std::uint64_t>();
    m.validate();
    return m;
  });
}

json manifest_to_json(const Manifest& m) {
  json j;
  j["convention"] = {{"pose", kPoseConvention}, {"plane", kPlaneConvention}};
  j["intrinsics"] = to_json(m.intrinsics);
  j["camera_height"] = m.plane.d;
  j["pose_type"] = m.pose_type == PoseType::kRelative ? "relative" : "camera_to_world";
  json frames = json::array();
  for (const auto& f : m.frames) {
    json jf = {{"id", f.id}, {"R", to_json(f.R)}, {"t", to_json(f.t)}};
    if (!f.file.empty()) jf["file"] = f.file;
    frames.push_back(std::move(jf));
  }
  j["frames"] = std::move(frames);
  if (m.true_normal) j["true_normal"] = {{"theta", m.true_normal->theta}, {"phi", m.true_normal->phi}};
  if (m.seed) j["seed"] = *m.seed;
  return j;
}

Manifest read_manifest(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw Error(ErrorCode::kIoError, "cannot open manifest " + path.string());
  json j;
  try {
    in >> j;
  } catch (const json::exception& e) {
    throw Error(ErrorCode::kInvalidArgument, "manifest " + path.string() + " is not JSON: " + e.what());
  }
  return manifest_from_json(j, path.parent_path());
}

void write_manifest(const std::filesystem::path& path, const Manifest& m) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw Error(ErrorCode::kIoError, "cannot write " + path.string());
  out << manifest_to_json(m).dump(2) << '\n';
  if (!out) throw Error(ErrorCode::kIoError, "write failed for " + path.string());
}

SceneSpec SynthDescription::build() const {
  SceneSpec s = spec;
  s.texture = make_road_texture(seed, texture);
  s.seed = seed;
  s.validate();
  return s;
}

SynthDescription default_synth_scene(std::uint64_t seed) {
  SynthDescription d;
  d.seed = seed;
  d.spec = make_default_scene(seed);
  d.spec.texture.reset();
  d.spec.intrinsics = {576.0, 576.0, 423.5, -198.5};
  d.spec.height = 272;
  d.spec.width = 848;
  d.spec.trajectory = forward_trajectory(7, 0.375, 0.25 * std::numbers::pi / 180.0);
  return d;
}

SynthDescription synth_from_json(const json& j) {
  return guarded("scene spec", [&] {
    SynthDescription d = default_synth_scene(j.value("seed", std::uint64_t{7}));
    if (j.contains("texture")) {
      const json& t = j["texture"];
      auto& o = d.texture;
      o.meters_per_texel = t.value("meters_per_texel", o.meters_per_texel);
      o.lateral_min = t.value("lateral_min", o.lateral_min);
      o.lateral_max = t.value("lateral_max", o.lateral_max);
      o.forward_min = t.value("forward_min", o.forward_min);
      o.forward_max = t.value("forward_max", o.forward_max);
      o.blur_sigma_m = t.value("blur_sigma_m", o.blur_sigma_m);
      o.stains = t.value("stains", o.stains);
      o.markings = t.value("markings", o.markings);
      if (!(o.meters_per_texel > 0.0) || !(o.lateral_max > o.lateral_min) ||
          !(o.forward_max > o.forward_min) || !(o.blur_sigma_m >= 0.0) || o.stains < 0 ||
          o.markings < 0) {
        throw Error(ErrorCode::kInvalidArgument, "invalid texture options");
      }
    }
    SceneSpec& s = d.spec;
    if (j.contains("intrinsics")) s.intrinsics = intrinsics_from_json(j["intrinsics"]);
    s.plane.d = j.value("camera_height", s.plane.d);
    if (j.contains("true_normal")) {
      s.true_normal = {j["true_normal"].at("theta").get<double>(),
                       j["true_normal"].at("phi").get<double>()};
    }
    s.height = j.value("height", s.height);
    s.width = j.value("width", s.width);
    if (j.contains("trajectory")) {
      const json& t = j["trajectory"];
      if (t.is_array()) {
        s.trajectory.clear();
        for (const json& p : t) s.trajectory.push_back(pose_from_json(p));
      } else {
        s.trajectory = forward_trajectory(t.at("count").get<int>(), t.at("step_m").get<double>(),
                                          t.value("yaw_step_deg", 0.0) * std::numbers::pi / 180.0);
      }
    }
    if (j.contains("extrinsic_error")) s.extrinsic_error = pose_from_json(j["extrinsic_error"]);
    s.noise_sigma = j.value("noise_sigma", s.noise_sigma);
    if (j.contains("occluders")) {
      s.occluders.clear();
      for (const json& o : j["occluders"]) {
        Occluder occ;
        occ.frame = o.at("frame").get<int>();
        occ.row = o.at("row").get<int>();
        occ.col = o.at("col").get<int>();
        occ.rows = o.at("rows").get<int>();
        occ.cols = o.at("cols").get<int>();
        const json& fill = o.at("fill");
        occ.fill = fill.is_array() ? fill.get<std::vector<float>>()
                                   : std::vector<float>{fill.get<float>()};
        s.occluders.push_back(std::move(occ));
      }
    }
    return d;
  });
}

json synth_to_json(const SynthDescription& d) {
  const SceneSpec& s = d.spec;
  const TextureOptions& o = d.texture;
  json j;
  j["seed"] = d.seed;
  j["texture"] = {{"meters_per_texel", o.meters_per_texel}, {"lateral_min", o.lateral_min},
                  {"lateral_max", o.lateral_max},           {"forward_min", o.forward_min},
                  {"forward_max", o.forward_max},           {"blur_sigma_m", o.blur_sigma_m},
                  {"stains", o.stains},                     {"markings", o.markings}};
  j["intrinsics"] = to_json(s.intrinsics);
  j["camera_height"] = s.plane.d;
  j["true_normal"] = {{"theta", s.true_normal.theta}, {"phi", s.true_normal.phi}};
  j["height"] = s.height;
  j["width"] = s.width;
  json traj = json::array();
  for (const auto& p : s.trajectory) traj.push_back(to_json(p));
  j["trajectory"] = std::move(traj);
  j["extrinsic_error"] = to_json(s.extrinsic_error);
  j["noise_sigma"] = s.noise_sigma;
  json occ = json::array();
  for (const auto& o : s.occluders) {
    occ.push_back({{"frame", o.frame}, {"row", o.row}, {"col", o.col}, {"rows", o.rows},
                   {"cols", o.cols}, {"fill", o.fill}});
  }
  j["occluders"] = std::move(occ);
  return j;
}

}  // namespace homofuse

#include <doctest.h>

#include <numbers>
#include <set>

#include "homofuse/error.hpp"
#include "homofuse/synth.hpp"
#include "support/oracles.hpp"

using namespace homofuse;

namespace {

ErrorCode code_of(auto&& f) {
  try {
    f();
  } catch (const Error& e) {
    return e.code();
  }
  FAIL("expected an error");
  return ErrorCode::kInvalidArgument;
}

}  // namespace

TEST_CASE("default scene matches its documented layout") {
  const SceneSpec& s = oracle::default_scene();
  CHECK(s.height == 68);
  CHECK(s.width == 212);
  CHECK(s.plane.d == 1.5);
  CHECK(s.true_normal.theta == 0.15);
  CHECK(s.true_normal.phi == 0.0);
  REQUIRE(s.trajectory.size() == 4);
  CHECK(s.trajectory.back().t.isZero(0.0));
  CHECK(s.trajectory.back().R == Eigen::Matrix3d::Identity());
  for (int k = 0; k + 1 < 4; ++k) {
    const RelativePose step = s.trajectory[k] * s.trajectory[k + 1].inverse();
    CHECK(step.t.norm() == doctest::Approx(0.75).epsilon(1e-3));  // centres lie on a gentle arc
  }
  CHECK_NOTHROW(s.validate());
}

TEST_CASE("forward trajectory moves the earlier cameras backwards") {
  const auto traj = forward_trajectory(3, 1.0, 0.0);
  // Reference frames lie behind the current camera: X_ref = X_cur + (0, 0, k).
  CHECK(traj[0].t.isApprox(Eigen::Vector3d(0, 0, 2.0)));
  CHECK(traj[1].t.isApprox(Eigen::Vector3d(0, 0, 1.0)));
  CHECK(code_of([] { forward_trajectory(0, 1.0, 0.0); }) == ErrorCode::kInvalidArgument);
}

TEST_CASE("identity trajectory renders bit-identical frames") {
  SceneSpec s = oracle::default_scene();
  s.trajectory.assign(3, RelativePose{});
  const RenderedSequence seq = render(s);
  REQUIRE(seq.frames.size() == 3);
  CHECK(seq.frames[0] == seq.frames[1]);
  CHECK(seq.frames[1] == seq.frames[2]);
  CHECK(seq.clean_frames[0] == seq.frames[0]);
  for (float v : seq.frames[0].data()) {
    CHECK(v >= 0.0f);
    CHECK(v <= 1.0f);
  }
}

TEST_CASE("seeded noise is reproducible") {
  SceneSpec s = oracle::default_scene();
  s.noise_sigma = 0.05;
  const RenderedSequence a = render(s);
  const RenderedSequence b = render(s);
  CHECK(a.frames == b.frames);
  s.seed += 1;
  const RenderedSequence c = render(s);
  CHECK(c.frames != a.frames);
  CHECK(c.clean_frames == a.clean_frames);

  // Noise statistics: clamping aside, the perturbation has the requested sigma.
  double sum = 0.0, sq = 0.0;
  int n = 0;
  for (std::size_t i = 0; i < a.frames[0].data().size(); ++i) {
    const float clean = a.clean_frames[0].data()[i];
    if (clean < 0.2f || clean > 0.8f) continue;
    const double d = a.frames[0].data()[i] - clean;
    sum += d;
    sq += d * d;
    ++n;
  }
  REQUIRE(n > 1000);
  CHECK(std::abs(sum / n) < 0.005);
  CHECK(std::sqrt(sq / n) == doctest::Approx(0.05).epsilon(0.05));
}

TEST_CASE("texture generation is seeded") {
  TextureOptions small;
  small.lateral_min = -2;
  small.lateral_max = 2;
  small.forward_min = 0;
  small.forward_max = 4;
  const auto a = make_road_texture(3, small);
  const auto b = make_road_texture(3, small);
  const auto c = make_road_texture(4, small);
  CHECK(a->grid == b->grid);
  CHECK(a->grid != c->grid);
  CHECK(a->grid.channels() == 3);
  CHECK(a->texel(-2.0, 0.0).isZero());
}

TEST_CASE("renderer and homography agree on cross-frame correspondences") {
  // Independent chain: back-project through the plane, move the camera,
  // project, and sample; compare with the current frame at 4x resolution.
  SceneSpec s = oracle::upscaled(oracle::default_scene(), 4);
  s.true_normal = {0.12, 0.02};
  const RenderedSequence seq = render(s);
  const FeatureGrid& cur = seq.clean_frames.back();
  const auto pts = sample_region_points(SampleRegion::default_for(s.height, s.width), s.height, s.width);
  double sum = 0.0;
  int n = 0;
  for (int k = 0; k < s.current_index(); ++k) {
    for (const auto& p : pts) {
      const Eigen::Vector2d q =
          oracle::reproject_via_plane(s.intrinsics, s.trajectory[k], normal_vector(s.true_normal), s.plane.d, p);
      const SampleResult r = sample_bilinear(seq.clean_frames[k], q);
      if (!r.in_bounds) continue;
      sum += (r.value - sample_bilinear(cur, p).value).cwiseAbs().sum();
      n += 3;
    }
  }
  REQUIRE(n > 0);
  CHECK(sum / n < 1e-3);
}

TEST_CASE("occluders are painted only into noisy frames") {
  SceneSpec s = oracle::default_scene();
  s.occluders.push_back({1, 10, 20, 5, 7, {0.25f, 0.5f, 0.75f}});
  const RenderedSequence seq = render(s);
  CHECK(seq.frames[1].at(12, 22, 1) == 0.5f);
  CHECK(seq.frames[1].at(14, 26, 2) == 0.75f);
  CHECK(seq.clean_frames[1].at(12, 22, 1) != 0.5f);
  CHECK(seq.frames[0] == seq.clean_frames[0]);

  s.occluders = {{0, 60, 200, 10, 20, {0.1f}}};
  CHECK(code_of([&] { s.validate(); }) == ErrorCode::kInvalidArgument);
}

TEST_CASE("reference occluders cover the requested area of every reference") {
  const SceneSpec& s = oracle::default_scene();
  const auto occ = reference_occluders(s, 0.15, 5);
  REQUIRE(occ.size() == static_cast<std::size_t>(s.current_index()));
  std::set<int> frames;
  for (const auto& o : occ) {
    frames.insert(o.frame);
    CHECK(o.frame != s.current_index());
    CHECK(o.rows * o.cols == doctest::Approx(0.15 * s.height * s.width).epsilon(0.1));
    CHECK(o.row >= static_cast<int>(0.4 * s.height) - 1);
    CHECK(o.row + o.rows <= s.height);
    CHECK(o.col + o.cols <= s.width);
  }
  CHECK(frames.size() == occ.size());
  CHECK(reference_occluders(s, 0.0, 5).empty());
  CHECK(reference_occluders(s, 0.15, 5) == occ);
}

TEST_CASE("observed trajectory applies the extrinsic error by conjugation") {
  SceneSpec s = oracle::default_scene();
  CHECK(s.observed_trajectory().front().t == s.trajectory.front().t);
  const Eigen::Matrix3d Q = axis_angle({0.3, 1, 0.2}, 0.2);
  const Eigen::Vector3d delta(0.4, -0.1, 0.3);
  s.extrinsic_error.R = Q;
  s.extrinsic_error.t = delta;
  const auto obs = s.observed_trajectory();
  for (std::size_t k = 0; k < s.trajectory.size(); ++k) {
    // Frames of a rigidly mounted but mis-calibrated camera: X' = Q^T (X - delta).
    const RelativePose& T = s.trajectory[k];
    const Eigen::Vector3d X(0.5, 1.0, 7.0);
    const Eigen::Vector3d Xp = Q.transpose() * (X - delta);
    const Eigen::Vector3d Yp = Q.transpose() * ((T.R * X + T.t) - delta);
    CHECK((obs[k].R * Xp + obs[k].t - Yp).norm() < 1e-12);
  }
  CHECK(obs.back().t.norm() < 1e-15);
}

TEST_CASE("perturbation suite enumerates the full grid") {
  const SceneSpec& base = oracle::default_scene();
  const auto suite = perturbation_suite(base);
  CHECK(suite.size() == 540);
  CHECK(kSuiteSize == 540);

  int identity = 0;
  for (const auto& v : suite) {
    CHECK(v.spec.true_normal.theta == v.pitch);
    CHECK(v.spec.true_normal.phi == v.roll);
    CHECK(v.spec.trajectory.size() == base.trajectory.size());
    const double angle = Eigen::AngleAxisd(v.spec.extrinsic_error.R).angle() * 180.0 / std::numbers::pi;
    CHECK(angle == doctest::Approx(v.rotation_error_deg).epsilon(1e-9));
    CHECK(v.spec.extrinsic_error.t.norm() == doctest::Approx(v.translation_error_m).epsilon(1e-9));
    CHECK(v.rotation_error_deg <= 30.0);
    CHECK(v.translation_error_m <= 1.0);
    CHECK(v.spec.occluders.size() == (v.occluder_coverage > 0 ? 3u : 0u));
    if (v.pitch == base.true_normal.theta && v.roll == 0.0 && v.rotation_error_deg == 0.0 &&
        v.occluder_coverage == 0.0) {
      CHECK(v.spec == base);
      ++identity;
    }
  }
  CHECK(identity == 1);
  // Coverage is the fastest axis.
  CHECK(suite[0].occluder_coverage == 0.0);
  CHECK(suite[1].occluder_coverage == 0.10);
  CHECK(suite[3].rotation_error_deg == 10.0);

  const auto again = perturbation_suite(base);
  for (std::size_t i = 0; i < suite.size(); ++i) CHECK(again[i].spec == suite[i].spec);
}

TEST_CASE("extrinsic noise perturbs observed poses but not the rendered truth") {
  const SceneSpec& base = oracle::default_scene();
  const auto suite = perturbation_suite(base);
  const SuiteVariant& v = suite[3 * 3 + 0];  // first pitch, first roll, level 3, no occluders
  REQUIRE(v.rotation_error_deg == 30.0);
  CHECK(v.spec.true_normal.theta == v.pitch);
  CHECK(v.spec.trajectory.front().t == base.trajectory.front().t);
  CHECK((v.spec.observed_trajectory().front().t - base.trajectory.front().t).norm() > 0.01);
}

TEST_CASE("scene validation") {
  SceneSpec s = oracle::default_scene();
  s.noise_sigma = 0.2;
  CHECK(code_of([&] { s.validate(); }) == ErrorCode::kInvalidArgument);
  s = oracle::default_scene();
  s.trajectory.back().t = {0, 0, 1};
  CHECK(code_of([&] { s.validate(); }) == ErrorCode::kInvalidArgument);
  s = oracle::default_scene();
  s.trajectory.clear();
  CHECK(code_of([&] { s.validate(); }) == ErrorCode::kInvalidArgument);
  s = oracle::default_scene();
  s.texture.reset();
  CHECK(code_of([&] { s.validate(); }) == ErrorCode::kInvalidArgument);
}

TEST_CASE("rendering beyond the texture is rejected") {
  SceneSpec s = oracle::default_scene();
  s.intrinsics.cy = 60.0;  // horizon inside the image: rays above it miss the road
  CHECK(code_of([&] { render(s); }) == ErrorCode::kTextureTooSmall);
  s = oracle::default_scene();
  s.trajectory.front().t = {0, 0, 100.0};
  CHECK(code_of([&] { render(s); }) == ErrorCode::kTextureTooSmall);
}

#include <doctest.h>

#include <algorithm>
#include <numbers>
#include <random>

#include "homofuse/error.hpp"
#include "homofuse/fusion.hpp"
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

FeatureGrid textured(int h, int w, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<float> u(0.05f, 1.0f);
  FeatureGrid g(h, w, 3);
  for (float& v : g.data()) v = u(rng);
  return g;
}

FrameSet frame_set_from(const RenderedSequence& seq) {
  FrameSet fs;
  fs.intrinsics = seq.spec.intrinsics;
  fs.plane = seq.spec.plane;
  fs.current = std::make_shared<FeatureGrid>(seq.frames.back());
  fs.current_id = seq.spec.current_index();
  const auto observed = seq.spec.observed_trajectory();
  for (int k = 0; k < seq.spec.current_index(); ++k) {
    fs.references.push_back({k, std::make_shared<FeatureGrid>(seq.frames[k]), observed[k]});
  }
  return fs;
}

std::vector<Eigen::Vector2d> default_points(int h, int w, int m = 256) {
  return sample_region_points(SampleRegion::default_for(h, w, m), h, w);
}

}  // namespace

TEST_CASE("similarity examples") {
  CHECK(similarity(Eigen::Vector2d(3, 4), Eigen::Vector2d(4, 3)) == doctest::Approx(0.96).epsilon(1e-15));
  CHECK(similarity(Eigen::Vector3d(1, 2, 3), Eigen::Vector3d(1, 2, 3)) == doctest::Approx(1.0).epsilon(1e-15));
  CHECK(similarity(Eigen::Vector2d(1, 0), Eigen::Vector2d(0, 5)) == 0.0);
  CHECK(similarity(Eigen::Vector2d(0, 0), Eigen::Vector2d(1, 0)) == 0.0);
  CHECK(similarity(Eigen::Vector2d(2, 0), Eigen::Vector2d(-1, 0)) == -1.0);
}

TEST_CASE("attention weight examples") {
  const std::vector<double> equal{0.3, 0.3, 0.3, 0.3};
  for (double w : attention_weights(equal)) CHECK(w == doctest::Approx(0.25).epsilon(1e-15));
  const std::vector<double> two{1.0, 0.0};
  const auto w = attention_weights(two);
  CHECK(w[0] == doctest::Approx(std::numbers::e / (std::numbers::e + 1)).epsilon(1e-14));
  CHECK(w[1] == doctest::Approx(0.2689414213699951).epsilon(1e-14));
  CHECK(code_of([] { attention_weights({}); }) == ErrorCode::kNoAdmittedFrames);
}

TEST_CASE("attention weights match the direct softmax and are shift invariant") {
  std::mt19937_64 rng(1);
  std::uniform_real_distribution<double> u(-1.0, 1.0);
  for (int i = 0; i < 200; ++i) {
    std::vector<double> s(1 + i % 7);
    for (double& v : s) v = u(rng);
    const auto w = attention_weights(s);
    const auto expected = oracle::softmax(s);
    double sum = 0.0;
    for (std::size_t k = 0; k < s.size(); ++k) {
      CHECK(std::abs(w[k] - expected[k]) < 1e-15);
      CHECK(w[k] >= 0.0);
      sum += w[k];
    }
    CHECK(std::abs(sum - 1.0) < 1e-12);
    std::vector<double> shifted = s;
    for (double& v : shifted) v += 37.5;
    const auto ws = attention_weights(shifted);
    for (std::size_t k = 0; k < s.size(); ++k) CHECK(std::abs(ws[k] - w[k]) < 1e-12);
  }
}

TEST_CASE("select_frames picks the target and earlier frames at the gap") {
  CHECK(select_frames(10, 9, {}) == std::vector<int>{3, 5, 7, 9});
  CHECK(select_frames(10, 4, {}) == std::vector<int>{0, 2, 4});
  CHECK(select_frames(2, 1, {2, 1}) == std::vector<int>{0, 1});
  CHECK(code_of([] { select_frames(2, 1, {}); }) == ErrorCode::kInsufficientFrames);
  CHECK(code_of([] { select_frames(3, 3, {}); }) == ErrorCode::kInvalidArgument);
  CHECK(code_of([] { select_frames(3, 2, {0, 1}); }) == ErrorCode::kInvalidArgument);
}

TEST_CASE("sample region points are deterministic and strictly inside") {
  const SampleRegion r = SampleRegion::default_for(68, 212);
  const auto a = sample_region_points(r, 68, 212);
  const auto b = sample_region_points(r, 68, 212);
  CHECK(a.size() == 256);
  CHECK(a == b);
  for (const auto& p : a) {
    CHECK(r.contains(p));
    // Independent barycentric test.
    const Eigen::Matrix2d E = (Eigen::Matrix2d() << r.base_left - r.apex, r.base_right - r.apex).finished();
    const Eigen::Vector2d st = E.partialPivLu().solve(p - r.apex);
    CHECK(st.minCoeff() > 0.0);
    CHECK(st.sum() < 1.0);
  }
  // Points spread over the region rather than clumping.
  double min_v = 1e9, max_v = -1e9;
  for (const auto& p : a) {
    min_v = std::min(min_v, p.y());
    max_v = std::max(max_v, p.y());
  }
  CHECK(min_v < 0.55 * 68 + 5);
  CHECK(max_v > 62);

  SampleRegion small = r;
  small.m = 4;
  CHECK(code_of([&] { sample_region_points(small, 68, 212); }) == ErrorCode::kInvalidArgument);
  SampleRegion flat = r;
  flat.apex = {106, 67};
  CHECK(code_of([&] { sample_region_points(flat, 68, 212); }) == ErrorCode::kDegenerateRegion);
  SampleRegion outside = r;
  outside.apex = {300, 30};
  CHECK(code_of([&] { sample_region_points(outside, 68, 212); }) == ErrorCode::kInvalidArgument);
}

TEST_CASE("identical frames fuse to exactly twice the current frame") {
  const FeatureGrid g = textured(40, 60, 2);
  for (int n : {1, 2, 4}) {
    FrameSet fs;
    fs.intrinsics = {80, 80, 30, -10};
    fs.plane = {1.5};
    fs.current = std::make_shared<FeatureGrid>(g);
    fs.current_id = n - 1;
    for (int k = 0; k < n - 1; ++k) fs.references.push_back({k, fs.current, RelativePose{}});
    const auto pts = default_points(40, 60, 64);
    const FusionOutput out = fuse(fs, {0.15, 0.0}, pts);
    REQUIRE(out.fused.size() == pts.size());
    for (std::size_t i = 0; i < pts.size(); ++i) {
      CHECK(out.fused[i] == 2.0 * sample_bilinear(g, pts[i]).value);
      CHECK(out.admitted_counts[i] == n);
      REQUIRE(out.weights[i].size() == static_cast<std::size_t>(n));
      CHECK(out.weights[i].front().frame_id == n - 1);
      for (const auto& k : out.weights[i]) CHECK(k.weight == doctest::Approx(1.0 / n).epsilon(1e-15));
    }
  }
}

TEST_CASE("fusion output follows the attention formula on a rendered scene") {
  SceneSpec spec = oracle::default_scene();
  spec.noise_sigma = 0.01;
  const RenderedSequence seq = render(spec);
  const FrameSet fs = frame_set_from(seq);
  const auto pts = default_points(spec.height, spec.width);
  const FusionOutput out = fuse(fs, spec.true_normal, pts);

  for (std::size_t i = 0; i < pts.size(); ++i) {
    // Independent recomputation of every key from the geometry oracle.
    const Eigen::VectorXd q = sample_bilinear(*fs.current, pts[i]).value;
    std::vector<Eigen::VectorXd> vals{q};
    std::vector<double> sims{1.0};
    std::vector<int> ids{fs.current_id};
    for (const auto& ref : fs.references) {
      const Eigen::Vector2d pr =
          oracle::reproject_via_plane(fs.intrinsics, ref.pose, normal_vector(spec.true_normal), fs.plane.d, pts[i]);
      const SampleResult s = sample_bilinear(*ref.grid, pr);
      if (!s.in_bounds) continue;
      vals.push_back(s.value);
      sims.push_back(q.dot(s.value) / (q.norm() * s.value.norm()));
      ids.push_back(ref.id);
    }
    const auto w = oracle::softmax(sims);
    Eigen::VectorXd expected = q;
    for (std::size_t k = 0; k < vals.size(); ++k) expected += w[k] * vals[k];
    CHECK((out.fused[i] - expected).cwiseAbs().maxCoeff() < 1e-9);
    CHECK(out.admitted_counts[i] == static_cast<int>(vals.size()));

    double sum = 0.0;
    for (const auto& k : out.weights[i]) {
      CHECK(k.weight >= 0.0);
      if (!k.admitted) CHECK(k.weight == 0.0);
      sum += k.weight;
    }
    CHECK(std::abs(sum - 1.0) < 1e-6);
  }
}

TEST_CASE("fusion is invariant to reference order") {
  SceneSpec spec = oracle::default_scene();
  spec.noise_sigma = 0.02;
  const RenderedSequence seq = render(spec);
  FrameSet fs = frame_set_from(seq);
  const auto pts = default_points(spec.height, spec.width);
  const FusionOutput a = fuse(fs, {0.17, 0.01}, pts);
  std::mt19937_64 rng(3);
  for (int i = 0; i < 5; ++i) {
    std::shuffle(fs.references.begin(), fs.references.end(), rng);
    const FusionOutput b = fuse(fs, {0.17, 0.01}, pts);
    CHECK(b.fused == a.fused);
    CHECK(b.grid == a.grid);
    for (std::size_t k = 0; k < pts.size(); ++k) {
      for (std::size_t j = 0; j < a.weights[k].size(); ++j) {
        CHECK(b.weights[k][j].frame_id == a.weights[k][j].frame_id);
        CHECK(b.weights[k][j].weight == a.weights[k][j].weight);
      }
    }
  }
}

TEST_CASE("out-of-frame keys are excluded from the softmax") {
  const FeatureGrid g = textured(40, 60, 4);
  FrameSet fs;
  fs.intrinsics = {80, 80, 30, -10};
  fs.plane = {1.5};
  fs.current = std::make_shared<FeatureGrid>(g);
  fs.current_id = 2;
  RelativePose far;
  far.t = {0, 0, -500};
  fs.references.push_back({0, fs.current, far});
  fs.references.push_back({1, fs.current, RelativePose{}});
  const auto pts = default_points(40, 60, 32);
  const FusionOutput out = fuse(fs, {0.15, 0.0}, pts);
  for (std::size_t i = 0; i < pts.size(); ++i) {
    CHECK(out.admitted_counts[i] == 2);
    CHECK(out.weights[i][1].frame_id == 0);
    CHECK_FALSE(out.weights[i][1].admitted);
    CHECK(out.weights[i][1].weight == 0.0);
    CHECK(out.weights[i][2].weight == doctest::Approx(0.5));
    CHECK(out.fused[i] == 2.0 * sample_bilinear(g, pts[i]).value);
  }
}

TEST_CASE("fused grid copies the current frame away from the samples") {
  const FeatureGrid g = textured(40, 60, 5);
  FrameSet fs;
  fs.intrinsics = {80, 80, 30, -10};
  fs.plane = {1.5};
  fs.current = std::make_shared<FeatureGrid>(g);
  fs.current_id = 1;
  fs.references.push_back({0, fs.current, RelativePose{}});
  const std::vector<Eigen::Vector2d> pts{{10.0, 30.0}, {20.4, 25.6}};
  const FusionOutput out = fuse(fs, {0.15, 0.0}, pts);
  CHECK(out.grid.at(30, 10, 1) == static_cast<float>(2.0 * g.at(30, 10, 1)));
  CHECK(out.grid.at(26, 20, 0) == static_cast<float>(out.fused[1][0]));
  int changed = 0;
  for (std::size_t i = 0; i < g.data().size(); ++i) changed += out.grid.data()[i] != g.data()[i];
  CHECK(changed <= 6);
}

TEST_CASE("occluded current frame: recovery ratio follows the current-frame weight") {
  // With references matching the clean frame, F_f / 2 - clean equals
  // (1 + W_t) / 2 times the current-frame error at every sample.
  SceneSpec spec = oracle::default_scene();
  const RenderedSequence clean_seq = render(spec);
  spec.occluders.push_back({spec.current_index(), 45, 80, 18, 50, {0.05f}});
  const RenderedSequence seq = render(spec);
  const FrameSet fs = frame_set_from(seq);
  std::vector<Eigen::Vector2d> pts;
  for (const auto& p : default_points(spec.height, spec.width))
    if (p.x() > 81 && p.x() < 128 && p.y() > 46 && p.y() < 62) pts.push_back(p);
  REQUIRE(pts.size() >= 10);
  const FusionOutput out = fuse(fs, spec.true_normal, pts);
  const FeatureGrid& clean = seq.clean_frames.back();
  double fused_err = 0.0, current_err = 0.0;
  for (std::size_t i = 0; i < pts.size(); ++i) {
    const Eigen::VectorXd c = sample_bilinear(clean, pts[i]).value;
    const Eigen::VectorXd e = sample_bilinear(*fs.current, pts[i]).value - c;
    const double wt = out.weights[i].front().weight;
    CHECK(wt > 0.0);
    CHECK((0.5 * out.fused[i] - c).norm() == doctest::Approx(0.5 * (1.0 + wt) * e.norm()).epsilon(0.05));
    fused_err += (0.5 * out.fused[i] - c).norm();
    current_err += e.norm();
  }
  // Fusion does help, but the current frame always keeps half the error.
  CHECK(fused_err < current_err);
  CHECK(fused_err > 0.5 * current_err);
}

TEST_CASE("dense road points are exactly the pixels whose ray meets the road") {
  const CameraIntrinsics K{144, 144, 105.5, -50};
  const auto pts = dense_road_points(K, {0.15, 0.0}, 68, 212);
  CHECK(pts.size() == 68u * 212u);
  const auto level = dense_road_points({144, 144, 105.5, 20}, {0.0, 0.0}, 40, 212);
  // Level road: rows below the principal point only.
  for (const auto& p : level) CHECK(p.y() > 20.0);
  CHECK(level.size() == 19u * 212u);
}

TEST_CASE("warp_to_current with identity reproduces the input") {
  const FeatureGrid g = textured(30, 40, 6);
  const WarpResult w = warp_to_current(g, Homography{}, 30, 40);
  CHECK(w.image == g);
  CHECK(std::all_of(w.valid.begin(), w.valid.end(), [](char v) { return v == 1; }));
  Homography shift;
  shift.h(0, 2) = 100.0;
  const WarpResult off = warp_to_current(g, shift, 30, 40);
  CHECK(std::none_of(off.valid.begin(), off.valid.end(), [](char v) { return v == 1; }));
  CHECK(off.image.data()[0] == 0.0f);
}

TEST_CASE("fused alignment error is zero for perfectly aligned clean frames") {
  const RenderedSequence seq = render(oracle::default_scene());
  FrameSet fs = frame_set_from(seq);
  fs.current = std::make_shared<FeatureGrid>(seq.clean_frames.back());
  const auto pts = default_points(seq.spec.height, seq.spec.width);
  FusionOutput out = fuse(fs, seq.spec.true_normal, pts);
  CHECK(fused_alignment_error(out, seq.clean_frames.back()) < 0.01);
  const FusionOutput wrong = fuse(fs, {0.30, 0.05}, pts);
  CHECK(fused_alignment_error(wrong, seq.clean_frames.back()) > fused_alignment_error(out, seq.clean_frames.back()));
}

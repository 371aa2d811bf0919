#include "homofuse/jacobian_check.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <random>

#include <Eigen/Geometry>

#include "homofuse/error.hpp"
#include "homofuse/fusion.hpp"
#include "homofuse/geometry.hpp"
#include "homofuse/grid.hpp"
#include "homofuse/rsne.hpp"
#include "homofuse/synth.hpp"

namespace homofuse {

namespace {

constexpr double kStep = 1e-6;

double rel_error(const Eigen::MatrixXd& analytic, const Eigen::MatrixXd& fd) {
  return (analytic - fd).cwiseAbs().maxCoeff() / std::max(analytic.cwiseAbs().maxCoeff(), 1e-12);
}

struct Sampler {
  std::mt19937_64 rng;
  double uniform(double lo, double hi) { return std::uniform_real_distribution<double>(lo, hi)(rng); }
  int integer(int lo, int hi) { return std::uniform_int_distribution<int>(lo, hi)(rng); }
  Eigen::Vector3d direction() {
    std::normal_distribution<double> g(0.0, 1.0);
    return Eigen::Vector3d(g(rng), g(rng), g(rng)).normalized();
  }
};

// A random but well-posed projection setup: the current-frame pixel maps to
// a finite point in the reference frame.
struct Config {
  CameraIntrinsics K;
  RelativePose pose;
  SurfaceNormal sn;
  PlaneConfig plane;
  Eigen::Vector2d p;
};

Config random_config(Sampler& s) {
  for (;;) {
    Config c;
    const double w = s.uniform(320.0, 1920.0);
    const double h = s.uniform(240.0, 1080.0);
    c.K = {s.uniform(200.0, 1200.0), s.uniform(200.0, 1200.0), s.uniform(0.3, 0.7) * w,
           s.uniform(0.3, 0.7) * h};
    c.pose.R = axis_angle(s.direction(), s.uniform(0.0, 0.2));
    c.pose.t = Eigen::Vector3d(s.uniform(-1.0, 1.0), s.uniform(-0.3, 0.3), s.uniform(-2.0, 0.5));
    c.sn = {s.uniform(-0.4, 0.4), s.uniform(-0.3, 0.3)};
    c.plane.d = s.uniform(0.5, 3.0);
    c.p = {s.uniform(0.0, w), s.uniform(0.5 * h, h)};
    const Eigen::Vector3d q = homography_matrix(c.K, c.pose, c.sn, c.plane).h * c.p.homogeneous();
    if (std::abs(q.z()) > 1e-3 * q.norm()) return c;
  }
}

Eigen::Vector2d project(const Config& c, const Eigen::Vector3d& n) {
  return project_point(homography_matrix(c.K, c.pose, n, c.plane), c.p);
}

Eigen::Vector2d project(const Config& c, const SurfaceNormal& sn) {
  return project_point(homography_matrix(c.K, c.pose, sn, c.plane), c.p);
}

JacobianSuiteResult normal_suite(Sampler& s, int trials, bool theta) {
  JacobianSuiteResult r{theta ? "dn/dtheta" : "dn/dphi", trials, 0.0, kGeometryTolerance};
  for (int i = 0; i < trials; ++i) {
    const SurfaceNormal sn{s.uniform(-1.2, 1.2), s.uniform(-1.2, 1.2)};
    SurfaceNormal hi = sn, lo = sn;
    (theta ? hi.theta : hi.phi) += kStep;
    (theta ? lo.theta : lo.phi) -= kStep;
    const Eigen::Vector3d fd = (normal_vector(hi) - normal_vector(lo)) / (2.0 * kStep);
    const Eigen::Vector3d a = theta ? jac_normal_wrt_theta(sn) : jac_normal_wrt_phi(sn);
    r.max_rel_error = std::max(r.max_rel_error, rel_error(a, fd));
  }
  return r;
}

JacobianSuiteResult homogeneous_suite(Sampler& s, int trials) {
  JacobianSuiteResult r{"dq/dn", trials, 0.0, kGeometryTolerance};
  for (int i = 0; i < trials; ++i) {
    const Config c = random_config(s);
    const Eigen::Vector3d n = normal_vector(c.sn);
    Eigen::Matrix3d fd;
    for (int k = 0; k < 3; ++k) {
      const Eigen::Vector3d e = Eigen::Vector3d::Unit(k) * kStep;
      fd.col(k) = (homography_matrix(c.K, c.pose, Eigen::Vector3d(n + e), c.plane).h -
                   homography_matrix(c.K, c.pose, Eigen::Vector3d(n - e), c.plane).h) *
                  c.p.homogeneous() / (2.0 * kStep);
    }
    r.max_rel_error =
        std::max(r.max_rel_error, rel_error(jac_homogeneous_wrt_normal(c.K, c.pose, c.plane, c.p), fd));
  }
  return r;
}

JacobianSuiteResult point_suite(Sampler& s, int trials) {
  JacobianSuiteResult r{"dp/dn", trials, 0.0, kGeometryTolerance};
  for (int i = 0; i < trials; ++i) {
    const Config c = random_config(s);
    const Eigen::Vector3d n = normal_vector(c.sn);
    Eigen::Matrix<double, 2, 3> fd;
    for (int k = 0; k < 3; ++k) {
      const Eigen::Vector3d e = Eigen::Vector3d::Unit(k) * kStep;
      fd.col(k) = (project(c, Eigen::Vector3d(n + e)) - project(c, Eigen::Vector3d(n - e))) / (2.0 * kStep);
    }
    r.max_rel_error =
        std::max(r.max_rel_error, rel_error(jac_point_wrt_normal(c.K, c.pose, c.sn, c.plane, c.p), fd));
  }
  return r;
}

JacobianSuiteResult chained_suite(Sampler& s, int trials) {
  JacobianSuiteResult r{"dp/d(theta,phi)", trials, 0.0, kGeometryTolerance};
  for (int i = 0; i < trials; ++i) {
    const Config c = random_config(s);
    Eigen::Matrix<double, 3, 2> dn;
    dn << jac_normal_wrt_theta(c.sn), jac_normal_wrt_phi(c.sn);
    const Eigen::Matrix2d a = jac_point_wrt_normal(c.K, c.pose, c.sn, c.plane, c.p) * dn;
    Eigen::Matrix2d fd;
    fd.col(0) = (project(c, SurfaceNormal{c.sn.theta + kStep, c.sn.phi}) -
                 project(c, SurfaceNormal{c.sn.theta - kStep, c.sn.phi})) / (2.0 * kStep);
    fd.col(1) = (project(c, SurfaceNormal{c.sn.theta, c.sn.phi + kStep}) -
                 project(c, SurfaceNormal{c.sn.theta, c.sn.phi - kStep})) / (2.0 * kStep);
    r.max_rel_error = std::max(r.max_rel_error, rel_error(a, fd));
  }
  return r;
}

JacobianSuiteResult bilinear_suite(Sampler& s, int trials) {
  JacobianSuiteResult r{"bilinear gradient", trials, 0.0, kGeometryTolerance};
  for (int i = 0; i < trials; ++i) {
    const int h = s.integer(2, 24);
    const int w = s.integer(2, 24);
    const int ch = s.integer(1, 4);
    FeatureGrid g(h, w, ch);
    for (float& v : g.data()) v = static_cast<float>(s.uniform(0.0, 1.0));
    // Stay clear of cell boundaries, where the surface has a kink.
    const Eigen::Vector2d p(s.integer(0, w - 2) + s.uniform(0.01, 0.99),
                            s.integer(0, h - 2) + s.uniform(0.01, 0.99));
    const SampleWithGradient a = sample_bilinear_with_gradient(g, p);
    Eigen::MatrixX2d fd(ch, 2);
    for (int k = 0; k < 2; ++k) {
      const Eigen::Vector2d e = Eigen::Vector2d::Unit(k) * kStep;
      fd.col(k) = (sample_bilinear(g, p + e).value - sample_bilinear(g, p - e).value) / (2.0 * kStep);
    }
    r.max_rel_error = std::max(r.max_rel_error, rel_error(a.gradient, fd));
  }
  return r;
}

bool same_cells(const ResidualSet& a, const ResidualSet& b) {
  if (a.valid != b.valid) return false;
  for (std::size_t k = 0; k < a.projected.size(); ++k) {
    if (!a.valid[k]) continue;
    if (std::floor(a.projected[k].x()) != std::floor(b.projected[k].x()) ||
        std::floor(a.projected[k].y()) != std::floor(b.projected[k].y())) {
      return false;
    }
  }
  return true;
}

JacobianSuiteResult gradient_suite(Sampler& s, int trials) {
  JacobianSuiteResult r{"normal-equation gradient", trials, 0.0, kGradientTolerance};

  const SceneSpec base = make_default_scene(s.rng());
  std::vector<AlignmentProblem> problems;
  for (const SurfaceNormal truth : {SurfaceNormal{0.08, -0.03}, SurfaceNormal{0.15, 0.0},
                                    SurfaceNormal{0.22, 0.04}}) {
    SceneSpec spec = base;
    spec.true_normal = truth;
    spec.noise_sigma = 0.01;
    spec.seed = s.rng();
    spec.occluders = reference_occluders(spec, 0.1, spec.seed);
    const RenderedSequence seq = render(spec);
    AlignmentProblem prob;
    prob.frames.intrinsics = spec.intrinsics;
    prob.frames.plane = spec.plane;
    prob.frames.current = std::make_shared<FeatureGrid>(seq.frames.back());
    prob.frames.current_id = spec.current_index();
    for (int k = 0; k < spec.current_index(); ++k) {
      prob.frames.references.push_back(
          {k, std::make_shared<FeatureGrid>(seq.frames[k]), spec.trajectory[k]});
    }
    prob.samples = sample_region_points(SampleRegion::default_for(spec.height, spec.width, 64),
                                        spec.height, spec.width);
    problems.push_back(std::move(prob));
  }

  const std::vector<RobustKernel> kernels = {RobustKernel::quadratic(0.25), RobustKernel::cauchy(),
                                             RobustKernel::geman_mcclure(), RobustKernel::welsch(),
                                             RobustKernel(1.0, 0.2)};
  for (int i = 0; i < trials;) {
    const AlignmentProblem& prob = problems[s.integer(0, static_cast<int>(problems.size()) - 1)];
    const RobustKernel& kernel = kernels[s.integer(0, static_cast<int>(kernels.size()) - 1)];
    const SurfaceNormal sn{s.uniform(0.05, 0.25), s.uniform(-0.06, 0.06)};
    const double angle = s.uniform(0.0, 2.0 * std::numbers::pi);
    const Eigen::Vector2d v(std::cos(angle), std::sin(angle));
    const double h = 1e-7;
    const ResidualSet mid = residuals(prob, sn);
    const ResidualSet hi = residuals(prob, {sn.theta + h * v.x(), sn.phi + h * v.y()});
    const ResidualSet lo = residuals(prob, {sn.theta - h * v.x(), sn.phi - h * v.y()});
    // The bilinear surface is only piecewise smooth; a configuration where
    // some projection crosses a pixel-grid line (or the frame border) inside
    // [-h, h] has no derivative to compare against.
    if (!same_cells(mid, hi) || !same_cells(mid, lo)) continue;
    const double fd = (total_error(hi, kernel) - total_error(lo, kernel)) / (2.0 * h);
    const NormalEquations ne = build_normal_equations(prob, sn, kernel);
    const double err = std::abs(ne.gradient.dot(v) - fd) / std::max(ne.gradient.norm(), 1e-12);
    r.max_rel_error = std::max(r.max_rel_error, err);
    ++i;
  }
  return r;
}

}  // namespace

std::vector<JacobianSuiteResult> run_jacobian_checks(std::uint64_t seed, int trials) {
  if (trials < 1) throw Error(ErrorCode::kInvalidArgument, "trials must be >= 1");
  Sampler s{std::mt19937_64(seed)};
  std::vector<JacobianSuiteResult> out;
  out.push_back(normal_suite(s, trials, true));
  out.push_back(normal_suite(s, trials, false));
  out.push_back(homogeneous_suite(s, trials));
  out.push_back(point_suite(s, trials));
  out.push_back(chained_suite(s, trials));
  out.push_back(bilinear_suite(s, trials));
  out.push_back(gradient_suite(s, trials));
  return out;
}

}  // namespace homofuse

#include "homofuse/rsne.hpp"

#include <algorithm>
#include <cmath>
#include <iomanip>
#include <numbers>
#include <ostream>

#include <Eigen/Cholesky>
#include <Eigen/Geometry>
#include <Eigen/LU>

#include "homofuse/error.hpp"

namespace homofuse {

namespace {

// Per-reference quantities shared by every sample.
struct ProjectionContext {
  const ReferenceFrame* ref;
  Homography H;
  Eigen::Vector3d Kt_over_d;  // K t / d
};

std::vector<ProjectionContext> make_contexts(const AlignmentProblem& prob,
                                             const SurfaceNormal& sn) {
  const auto& fs = prob.frames;
  const Eigen::Matrix3d K = fs.intrinsics.matrix();
  std::vector<ProjectionContext> out;
  for (const ReferenceFrame* ref : fs.canonical_order()) {
    out.push_back({ref, homography_matrix(fs.intrinsics, ref->pose, sn, fs.plane),
                   K * ref->pose.t / fs.plane.d});
  }
  return out;
}

// Returns false for projections onto (or near) the line at infinity.
bool project(const Homography& H, const Eigen::Vector2d& p, Eigen::Vector3d& q) {
  q = H.h * p.homogeneous();
  return std::abs(q.z()) > 1e-12;
}

}  // namespace

void LmConfig::validate() const {
  if (!(lambda_theta >= 0.0) || !(lambda_phi >= 0.0) || !std::isfinite(lambda_theta) ||
      !std::isfinite(lambda_phi)) {
    throw Error(ErrorCode::kInvalidArgument, "damping factors must be finite and >= 0");
  }
  if (max_iters <= 0) throw Error(ErrorCode::kInvalidArgument, "max_iters must be positive");
  if (!(conv_threshold > 0.0)) {
    throw Error(ErrorCode::kInvalidArgument, "conv_threshold must be positive");
  }
}

void AlignmentProblem::validate() const {
  frames.validate();
  if (frames.references.empty()) {
    throw Error(ErrorCode::kInsufficientFrames, "alignment needs at least one reference frame");
  }
  if (samples.size() < static_cast<std::size_t>(kMinValidPairs)) {
    throw Error(ErrorCode::kInvalidArgument, "alignment needs at least 8 sample points");
  }
}

int ResidualSet::valid_count() const {
  return static_cast<int>(std::count(valid.begin(), valid.end(), char{1}));
}

ResidualSet residuals(const AlignmentProblem& prob, const SurfaceNormal& sn) {
  const auto& fs = prob.frames;
  const int C = fs.current->channels();
  const int m = static_cast<int>(prob.samples.size());
  const auto contexts = make_contexts(prob, sn);

  ResidualSet out;
  out.num_references = static_cast<int>(contexts.size());
  out.num_samples = m;
  out.values = Eigen::MatrixXd::Zero(C, out.num_references * m);
  out.valid.assign(out.values.cols(), 0);
  out.projected.assign(out.values.cols(), Eigen::Vector2d::Zero());

  std::vector<SampleResult> query(m);
  for (int j = 0; j < m; ++j) query[j] = sample_bilinear(*fs.current, prob.samples[j]);

  for (int i = 0; i < out.num_references; ++i) {
    const auto& ctx = contexts[i];
    for (int j = 0; j < m; ++j) {
      const int col = i * m + j;
      Eigen::Vector3d q;
      if (!query[j].in_bounds || !project(ctx.H, prob.samples[j], q)) continue;
      const Eigen::Vector2d p_i = q.hnormalized();
      out.projected[col] = p_i;
      const SampleResult s = sample_bilinear(*ctx.ref->grid, p_i);
      if (!s.in_bounds) continue;
      out.values.col(col) = s.value - query[j].value;
      out.valid[col] = 1;
    }
  }
  return out;
}

double total_error(const ResidualSet& res, const RobustKernel& kernel) {
  double e = 0.0;
  for (Eigen::Index col = 0; col < res.values.cols(); ++col) {
    if (res.valid[col]) e += kernel.rho(res.values.col(col).norm());
  }
  return e;
}

NormalEquations build_normal_equations(const AlignmentProblem& prob, const SurfaceNormal& sn,
                                       const RobustKernel& kernel) {
  const auto& fs = prob.frames;
  const int m = static_cast<int>(prob.samples.size());
  const auto contexts = make_contexts(prob, sn);
  const Eigen::Matrix3d K_inv = fs.intrinsics.inverse();

  Eigen::Matrix<double, 3, 2> dn_dangles;
  dn_dangles.col(0) = jac_normal_wrt_theta(sn);
  dn_dangles.col(1) = jac_normal_wrt_phi(sn);

  NormalEquations out;
  std::vector<SampleResult> query(m);
  for (int j = 0; j < m; ++j) query[j] = sample_bilinear(*fs.current, prob.samples[j]);

  for (const auto& ctx : contexts) {
    for (int j = 0; j < m; ++j) {
      Eigen::Vector3d q;
      if (!query[j].in_bounds || !project(ctx.H, prob.samples[j], q)) continue;
      const Eigen::Vector2d p_i = q.hnormalized();
      const SampleWithGradient s = sample_bilinear_with_gradient(*ctx.ref->grid, p_i);
      if (!s.sample.in_bounds) continue;

      // d(pixel)/dn: perspective divide composed with -(1/d) K t (K^-1 p)^T.
      const double inv_w = 1.0 / q.z();
      Eigen::Matrix<double, 2, 3> divide;
      divide << inv_w, 0.0, -q.x() * inv_w * inv_w,
                0.0, inv_w, -q.y() * inv_w * inv_w;
      const Eigen::Vector3d ray = K_inv * prob.samples[j].homogeneous();
      const Eigen::Matrix<double, 2, 3> dp_dn = -(divide * ctx.Kt_over_d) * ray.transpose();

      const Eigen::VectorXd r = s.sample.value - query[j].value;
      const Eigen::MatrixX2d J = s.gradient * (dp_dn * dn_dangles);
      const double x = r.norm();
      const double w = kernel.weight(x);
      out.hessian.noalias() += w * J.transpose() * J;
      out.gradient.noalias() += w * J.transpose() * r;
      out.error += kernel.rho(x);
      ++out.valid;
    }
  }
  return out;
}

Eigen::Vector2d lm_step(const Eigen::Matrix2d& H, const Eigen::Vector2d& g, const LmConfig& cfg) {
  Eigen::Matrix2d A = H;
  A(0, 0) += cfg.lambda_theta * H(0, 0);
  A(1, 1) += cfg.lambda_phi * H(1, 1);
  A = 0.5 * (A + A.transpose()).eval();

  // Closed-form eigenvalues of the symmetric 2x2 system.
  const double mean = 0.5 * (A(0, 0) + A(1, 1));
  const double half_diff = 0.5 * (A(0, 0) - A(1, 1));
  const double radius = std::hypot(half_diff, A(0, 1));
  const double ev_max = mean + radius;
  const double ev_min = mean - radius;
  if (!A.allFinite() || !(ev_max > 0.0) || !(ev_min > 0.0) ||
      ev_max > kMaxConditionNumber * ev_min) {
    throw Error(ErrorCode::kSingularSystem,
                "damped normal equations are singular; the surface normal is unobservable");
  }

  Eigen::LLT<Eigen::Matrix2d> llt(A);
  if (llt.info() == Eigen::Success) {
    const Eigen::Vector2d step = -llt.solve(g);
    if (step.allFinite()) return step;
  }
  return -(A.inverse() * g);
}

std::vector<double> LmState::error_trace() const {
  std::vector<double> out;
  out.reserve(trace.size());
  for (const auto& rec : trace) out.push_back(rec.error);
  return out;
}

bool has_parallax(const FrameSet& frames) {
  for (const auto& ref : frames.references) {
    if (ref.pose.t.norm() > 1e-9 * frames.plane.d) return true;
  }
  return false;
}

LmState optimize(const AlignmentProblem& prob, const LmConfig& cfg, const RobustKernel& kernel,
                 const SurfaceNormal& init) {
  prob.validate();
  cfg.validate();
  const double chart_limit = std::numbers::pi / 2.0 - kChartMargin;
  if (std::abs(init.theta) >= chart_limit || std::abs(init.phi) >= chart_limit) {
    throw Error(ErrorCode::kSingularChart, "initial normal lies outside the chart");
  }

  LmState state;
  state.normal = init;
  LmConfig damping = cfg;

  for (int k = 1; k <= cfg.max_iters; ++k) {
    const NormalEquations ne = build_normal_equations(prob, state.normal, kernel);
    if (ne.valid < kMinValidPairs) {
      throw Error(ErrorCode::kSampleStarvation,
                  "only " + std::to_string(ne.valid) +
                      " valid sample projections; the surface normal cannot be estimated");
    }

    Eigen::Vector2d step = Eigen::Vector2d::Zero();
    if (ne.error != 0.0) {
      step = lm_step(ne.hessian, ne.gradient, damping);
      for (int halvings = 0;; ++halvings) {
        const double th = state.normal.theta + step.x();
        const double ph = state.normal.phi + step.y();
        if (std::abs(th) < chart_limit && std::abs(ph) < chart_limit) break;
        if (halvings == kMaxStepHalvings) {
          throw Error(ErrorCode::kSingularChart, "update step leaves the normal chart");
        }
        step *= 0.5;
      }

      if (cfg.adaptive_damping) {
        bool accepted = false;
        for (int attempt = 0; attempt < 10 && !accepted; ++attempt) {
          const SurfaceNormal candidate{state.normal.theta + step.x(), state.normal.phi + step.y()};
          const ResidualSet res = residuals(prob, candidate);
          if (res.valid_count() >= kMinValidPairs && total_error(res, kernel) <= ne.error) {
            accepted = true;
            damping.lambda_theta /= 10.0;
            damping.lambda_phi /= 10.0;
          } else {
            damping.lambda_theta = std::max(damping.lambda_theta * 10.0, 1e-6);
            damping.lambda_phi = std::max(damping.lambda_phi * 10.0, 1e-6);
            step = lm_step(ne.hessian, ne.gradient, damping);
          }
        }
        if (!accepted) step.setZero();
      }
    }

    state.trace.push_back({k, ne.error, state.normal, step});
    state.normal.theta += step.x();
    state.normal.phi += step.y();
    state.last_step = step;
    state.iterations = k;
    if (step.cwiseAbs().maxCoeff() < cfg.conv_threshold) {
      state.converged = true;
      break;
    }
  }

  state.final_error = total_error(residuals(prob, state.normal), kernel);
  return state;
}

void write_trace_csv(std::ostream& os, const LmState& state) {
  os << "iteration,E,theta,phi,d_theta,d_phi\n";
  os << std::setprecision(17);
  for (const auto& rec : state.trace) {
    os << rec.iteration << ',' << rec.error << ',' << rec.normal.theta << ',' << rec.normal.phi
       << ',' << rec.step.x() << ',' << rec.step.y() << '\n';
  }
}

}  // namespace homofuse

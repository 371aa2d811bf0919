#pragma once

// Test-only oracles. Each one computes its answer by a route independent of
// the library code it checks (brute-force geometry, finite differences,
// direct formulas), plus small fixtures shared by several test binaries.

#include <cmath>
#include <filesystem>
#include <fstream>
#include <iterator>
#include <random>
#include <stdexcept>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "homofuse/fusion.hpp"
#include "homofuse/rsne.hpp"
#include "homofuse/synth.hpp"

namespace oracle {

using namespace homofuse;

// Back-project p onto the plane n^T X = -d, move into the reference camera
// and project. Uses a generic LU solve instead of the closed-form K^-1.
inline Eigen::Vector2d reproject_via_plane(const CameraIntrinsics& K, const RelativePose& pose,
                                           const Eigen::Vector3d& n, double d,
                                           const Eigen::Vector2d& p) {
  Eigen::Matrix3d Km;
  Km << K.fx, 0, K.cx, 0, K.fy, K.cy, 0, 0, 1;
  const Eigen::Vector3d ray = Km.partialPivLu().solve(Eigen::Vector3d(p.x(), p.y(), 1.0));
  const Eigen::Vector3d X = ray * (-d / n.dot(ray));
  const Eigen::Vector3d q = Km * (pose.R * X + pose.t);
  return q.head<2>() / q.z();
}

// Pixel of a 3D point in the current camera.
inline Eigen::Vector2d project(const CameraIntrinsics& K, const Eigen::Vector3d& X) {
  return {K.fx * X.x() / X.z() + K.cx, K.fy * X.y() / X.z() + K.cy};
}

// Central differences of f: R^n -> R^k, one column per input coordinate.
template <typename F>
Eigen::MatrixXd central_difference(F&& f, const Eigen::VectorXd& x, double h) {
  const Eigen::VectorXd f0 = f(x);
  Eigen::MatrixXd J(f0.size(), x.size());
  for (Eigen::Index k = 0; k < x.size(); ++k) {
    Eigen::VectorXd hi = x, lo = x;
    hi[k] += h;
    lo[k] -= h;
    J.col(k) = (f(hi) - f(lo)) / (2.0 * h);
  }
  return J;
}

inline double max_rel_error(const Eigen::MatrixXd& analytic, const Eigen::MatrixXd& fd) {
  return (analytic - fd).cwiseAbs().maxCoeff() / std::max(analytic.cwiseAbs().maxCoeff(), 1e-12);
}

// Written out per named case from the general robust loss.
inline double barron(double x, double alpha, double c) {
  const double z = (x / c) * (x / c);
  if (alpha == 2.0) return 0.5 * z;
  if (alpha == 0.0) return std::log(0.5 * z + 1.0);
  if (std::isinf(alpha) && alpha < 0) return 1.0 - std::exp(-0.5 * z);
  const double b = std::abs(alpha - 2.0);
  return b / alpha * (std::pow(z / b + 1.0, alpha / 2.0) - 1.0);
}

inline std::vector<double> softmax(const std::vector<double>& s) {
  std::vector<double> out;
  double sum = 0.0;
  for (double v : s) sum += std::exp(v);
  for (double v : s) out.push_back(std::exp(v) / sum);
  return out;
}

inline RelativePose random_rotation_pose(std::mt19937_64& rng, double max_angle, double max_t) {
  std::normal_distribution<double> g(0.0, 1.0);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  RelativePose p;
  const Eigen::Vector3d axis = Eigen::Vector3d(g(rng), g(rng), g(rng)).normalized();
  p.R = Eigen::AngleAxisd(max_angle * u(rng), axis).toRotationMatrix();
  p.t = Eigen::Vector3d(g(rng), g(rng), g(rng)).normalized() * (max_t * u(rng));
  return p;
}

// Alignment problem built from a rendered sequence: the last frame is the
// current one, every earlier frame a reference carrying the observed pose.
inline AlignmentProblem problem_from(const RenderedSequence& seq, int m = 256) {
  const SceneSpec& s = seq.spec;
  AlignmentProblem p;
  p.frames.intrinsics = s.intrinsics;
  p.frames.plane = s.plane;
  p.frames.current = std::make_shared<FeatureGrid>(seq.frames.back());
  p.frames.current_id = s.current_index();
  const auto observed = s.observed_trajectory();
  for (int k = 0; k < s.current_index(); ++k) {
    p.frames.references.push_back({k, std::make_shared<FeatureGrid>(seq.frames[k]), observed[k]});
  }
  p.samples = sample_region_points(SampleRegion::default_for(s.height, s.width, m), s.height, s.width);
  return p;
}

// The default scene is expensive to texture; share one per seed.
inline const SceneSpec& default_scene() {
  static const SceneSpec scene = make_default_scene(7);
  return scene;
}

// Same scene rendered at `factor` times the resolution: focal lengths scale,
// and pixel centres map so that box downsampling recovers the original grid.
inline SceneSpec upscaled(SceneSpec s, int factor) {
  s.height *= factor;
  s.width *= factor;
  const CameraIntrinsics& K = s.intrinsics;
  s.intrinsics = {K.fx * factor, K.fy * factor, (K.cx + 0.5) * factor - 0.5, (K.cy + 0.5) * factor - 0.5};
  for (auto& o : s.occluders) {
    o.row *= factor;
    o.col *= factor;
    o.rows *= factor;
    o.cols *= factor;
  }
  return s;
}

// Mean absolute residual component over valid blocks.
inline double mean_abs_residual(const ResidualSet& r) {
  double sum = 0.0;
  int n = 0;
  for (Eigen::Index j = 0; j < r.values.cols(); ++j) {
    if (!r.valid[j]) continue;
    sum += r.values.col(j).cwiseAbs().sum();
    n += static_cast<int>(r.values.rows());
  }
  return n > 0 ? sum / n : 0.0;
}

inline std::string read_file(const std::filesystem::path& p) {
  std::ifstream in(p, std::ios::binary);
  return {std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
}

inline std::filesystem::path fresh_dir(const std::string& name) {
  const auto dir = std::filesystem::temp_directory_path() / ("homofuse_test_" + name);
  std::filesystem::remove_all(dir);
  std::filesystem::create_directories(dir);
  return dir;
}

// Strict RFC 4180 reader (LF record separators as the writer promises).
// Throws on a bare quote inside an unquoted field, an unterminated quoted
// field, CR characters, or rows whose field count differs from the header.
inline std::vector<std::vector<std::string>> parse_csv(const std::string& text) {
  std::vector<std::vector<std::string>> rows;
  std::vector<std::string> row;
  std::string field;
  bool quoted = false, in_quotes = false, field_started = false;
  for (std::size_t i = 0; i < text.size(); ++i) {
    const char ch = text[i];
    if (in_quotes) {
      if (ch == '"') {
        if (i + 1 < text.size() && text[i + 1] == '"') {
          field += '"';
          ++i;
        } else {
          in_quotes = false;
        }
      } else {
        field += ch;
      }
      continue;
    }
    if (ch == '\r') throw std::runtime_error("CR in CSV");
    if (ch == '"') {
      if (field_started) throw std::runtime_error("quote inside unquoted field");
      quoted = in_quotes = field_started = true;
    } else if (ch == ',') {
      row.push_back(field);
      field.clear();
      quoted = field_started = false;
    } else if (ch == '\n') {
      row.push_back(field);
      rows.push_back(row);
      row.clear();
      field.clear();
      quoted = field_started = false;
    } else {
      if (quoted) throw std::runtime_error("text after closing quote");
      field += ch;
      field_started = true;
    }
  }
  if (in_quotes) throw std::runtime_error("unterminated quoted field");
  if (field_started || !row.empty()) throw std::runtime_error("last record lacks a line ending");
  for (const auto& r : rows) {
    if (r.size() != rows.front().size()) throw std::runtime_error("ragged CSV row");
  }
  return rows;
}

}  // namespace oracle

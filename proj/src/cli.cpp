#include "homofuse/cli.hpp"

#include <fnmatch.h>

#include <algorithm>
#include <cmath>
#include <fstream>
#include <iomanip>
#include <ostream>
#include <sstream>

#include "homofuse/image_io.hpp"
#include "homofuse/jacobian_check.hpp"
#include "homofuse/synth.hpp"

namespace homofuse {

using nlohmann::json;
namespace fs = std::filesystem;

namespace {

bool ends_with_json(const std::string& s) {
  return s.size() >= 5 && s.compare(s.size() - 5, 5, ".json") == 0;
}

std::vector<fs::path> expand_glob(const std::string& pattern) {
  const fs::path p(pattern);
  const fs::path dir = p.has_parent_path() ? p.parent_path() : fs::path(".");
  const std::string name = p.filename().string();
  std::error_code ec;
  if (!fs::is_directory(dir, ec)) {
    throw Error(ErrorCode::kIoError, "frame directory " + dir.string() + " does not exist");
  }
  std::vector<fs::path> out;
  for (const auto& entry : fs::directory_iterator(dir)) {
    if (entry.is_regular_file() &&
        fnmatch(name.c_str(), entry.path().filename().c_str(), FNM_PERIOD) == 0) {
      out.push_back(entry.path());
    }
  }
  std::sort(out.begin(), out.end());
  if (out.empty()) throw Error(ErrorCode::kIoError, "no files match " + pattern);
  return out;
}

void write_text(const fs::path& path, const std::string& text) {
  std::ofstream os(path, std::ios::binary);
  if (!os) throw Error(ErrorCode::kIoError, "cannot write " + path.string());
  os << text;
  if (!os) throw Error(ErrorCode::kIoError, "write failed for " + path.string());
}

json config_echo(const CliOptions& opt) {
  json j = {{"n", opt.n},
            {"gap", opt.gap},
            {"samples", opt.samples},
            {"kernel", opt.kernel},
            {"kernel_scale", opt.kernel_scale},
            {"lambda", {opt.lambda_theta, opt.lambda_phi}},
            {"max_iters", opt.max_iters},
            {"conv_threshold", opt.conv_threshold},
            {"adaptive_damping", opt.adaptive_damping},
            {"downsample", opt.downsample}};
  if (opt.target) j["target"] = *opt.target;
  if (opt.seed) j["seed"] = *opt.seed;
  return j;
}

json normal_json(const SurfaceNormal& sn) { return {{"theta", sn.theta}, {"phi", sn.phi}}; }

// Report skeleton shared by the frame-consuming commands.
json base_report(const std::string& command, const CliOptions& opt, const LoadedFrames& lf) {
  json j;
  j["command"] = command;
  j["config"] = config_echo(opt);
  j["frames"] = {{"target", lf.frames.current_id}, {"selected", lf.selected_ids}};
  j["grid"] = {{"height", lf.frames.current->height()},
               {"width", lf.frames.current->width()},
               {"channels", lf.frames.current->channels()}};
  j["artifacts"] = json::array();
  return j;
}

void finish(json& report, const CliOptions& opt) {
  for (const auto& a : report["artifacts"]) {
    if (!fs::exists(opt.out / a.get<std::string>())) {
      throw Error(ErrorCode::kIoError, "artifact " + a.get<std::string>() + " was not written");
    }
  }
  write_text(opt.out / "report.json", report.dump(2) + "\n");
}

void add_artifact(json& report, const std::string& name) { report["artifacts"].push_back(name); }

bool previewable(const FeatureGrid& g) { return g.channels() == 1 || g.channels() == 3; }

AlignmentProblem make_problem(const CliOptions& opt, const FrameSet& frames) {
  AlignmentProblem prob;
  prob.frames = frames;
  const int h = frames.current->height();
  const int w = frames.current->width();
  prob.samples = sample_region_points(SampleRegion::default_for(h, w, opt.samples), h, w);
  return prob;
}

// Runs the estimator and records trace.csv; fills the estimate fields.
SurfaceNormal estimate(const CliOptions& opt, const FrameSet& frames, json& report) {
  if (!has_parallax(frames)) {
    throw Error(ErrorCode::kSingularSystem,
                "no reference frame is translated relative to the target; the surface normal is "
                "unobservable");
  }
  const AlignmentProblem prob = make_problem(opt, frames);
  LmConfig cfg;
  cfg.lambda_theta = opt.lambda_theta;
  cfg.lambda_phi = opt.lambda_phi;
  cfg.max_iters = opt.max_iters;
  cfg.conv_threshold = opt.conv_threshold;
  cfg.adaptive_damping = opt.adaptive_damping;
  const LmState st = optimize(prob, cfg, RobustKernel::from_name(opt.kernel, opt.kernel_scale));

  std::ostringstream csv;
  write_trace_csv(csv, st);
  write_text(opt.out / "trace.csv", csv.str());
  add_artifact(report, "trace.csv");
  report["normal"] = normal_json(st.normal);
  report["normal_source"] = "estimated";
  report["iterations"] = st.iterations;
  report["converged"] = st.converged;
  report["final_error"] = st.final_error;
  report["trace_csv"] = "trace.csv";
  return st.normal;
}

SurfaceNormal normal_for(const CliOptions& opt, const FrameSet& frames, json& report) {
  if (!opt.normal) return estimate(opt, frames, report);
  if (!opt.normal->in_chart()) throw Error(ErrorCode::kInvalidArgument, "--normal outside the chart");
  report["normal"] = normal_json(*opt.normal);
  report["normal_source"] = "given";
  return *opt.normal;
}

std::string frame_name(const char* prefix, int id, const char* ext) {
  std::ostringstream os;
  os << prefix << std::setw(3) << std::setfill('0') << id << ext;
  return os.str();
}

}  // namespace

void CliOptions::validate() const {
  if (n < 2) throw Error(ErrorCode::kInvalidArgument, "--n must be >= 2");
  if (gap < 1) throw Error(ErrorCode::kInvalidArgument, "--gap must be >= 1");
  if (samples < kMinSamples) throw Error(ErrorCode::kInvalidArgument, "--samples must be >= 8");
  if (!(kernel_scale > 0.0)) throw Error(ErrorCode::kInvalidArgument, "--kernel-scale must be > 0");
  if (downsample < 1) throw Error(ErrorCode::kInvalidArgument, "--downsample must be >= 1");
  LmConfig cfg{lambda_theta, lambda_phi, max_iters, conv_threshold, adaptive_damping};
  cfg.validate();
  RobustKernel::from_name(kernel, kernel_scale);
}

int exit_code(ErrorCode code) {
  switch (code) {
    case ErrorCode::kInvalidArgument: return 3;
    case ErrorCode::kIoError: return 4;
    case ErrorCode::kMalformedHeader: return 5;
    case ErrorCode::kTruncatedPayload: return 6;
    case ErrorCode::kDimensionOverflow: return 7;
    case ErrorCode::kInsufficientFrames: return 8;
    case ErrorCode::kSingularSystem: return 9;
    case ErrorCode::kSampleStarvation: return 10;
    case ErrorCode::kSingularChart: return 11;
    case ErrorCode::kDegenerateProjection: return 12;
    case ErrorCode::kDegenerateRegion: return 13;
    case ErrorCode::kNoAdmittedFrames: return 14;
    case ErrorCode::kTextureTooSmall: return 15;
  }
  return kExitInternal;
}

CameraIntrinsics downsample_intrinsics(const CameraIntrinsics& K, int factor) {
  const double f = factor;
  const double shift = (f - 1.0) / 2.0;
  return {K.fx / f, K.fy / f, (K.cx - shift) / f, (K.cy - shift) / f};
}

LoadedFrames load_frames(const CliOptions& opt) {
  opt.validate();
  LoadedFrames lf;
  Manifest& m = lf.manifest;
  std::vector<fs::path> files;
  if (!opt.frames.empty() && ends_with_json(opt.frames)) {
    if (!opt.calib.empty()) {
      throw Error(ErrorCode::kInvalidArgument, "give either --calib or a manifest in --frames, not both");
    }
    m = read_manifest(opt.frames);
  } else {
    if (opt.calib.empty()) throw Error(ErrorCode::kInvalidArgument, "--calib is required");
    m = read_manifest(opt.calib);
  }
  if (!opt.frames.empty() && !ends_with_json(opt.frames)) {
    files = expand_glob(opt.frames);
    if (files.size() != m.frames.size()) {
      throw Error(ErrorCode::kInvalidArgument,
                  std::to_string(files.size()) + " files match --frames but the calibration lists " +
                      std::to_string(m.frames.size()) + " poses");
    }
  } else {
    for (std::size_t i = 0; i < m.frames.size(); ++i) {
      if (m.frames[i].file.empty()) {
        throw Error(ErrorCode::kInvalidArgument, "frame " + std::to_string(m.frames[i].id) +
                                                     " has no file; pass --frames");
      }
      files.push_back(m.frame_path(i));
    }
  }

  std::size_t target = m.frames.size() - 1;
  if (opt.target) {
    const auto it = std::find_if(m.frames.begin(), m.frames.end(),
                                 [&](const ManifestFrame& f) { return f.id == *opt.target; });
    if (it == m.frames.end()) {
      throw Error(ErrorCode::kInvalidArgument, "--target " + std::to_string(*opt.target) + " is not a frame id");
    }
    target = static_cast<std::size_t>(it - m.frames.begin());
  }
  const std::vector<int> picks = select_frames(static_cast<int>(m.frames.size()),
                                               static_cast<int>(target), {opt.n, opt.gap});

  FrameSet& fset = lf.frames;
  fset.intrinsics = downsample_intrinsics(m.intrinsics, opt.downsample);
  fset.plane = m.plane;
  for (const int pos : picks) {
    auto grid = std::make_shared<FeatureGrid>(downsample_box(read_any(files[pos]), opt.downsample));
    lf.selected_ids.push_back(m.frames[pos].id);
    if (pos == static_cast<int>(target)) {
      fset.current = std::move(grid);
      fset.current_id = m.frames[pos].id;
    } else {
      fset.references.push_back({m.frames[pos].id, std::move(grid), m.relative_pose(pos, target)});
    }
  }
  for (const auto& ref : fset.references) {
    if (ref.grid->height() != fset.current->height() || ref.grid->width() != fset.current->width()) {
      throw Error(ErrorCode::kInvalidArgument, "frames differ in size");
    }
  }
  fset.validate();
  return lf;
}

json cmd_estimate_normal(const CliOptions& opt) {
  fs::create_directories(opt.out);
  const LoadedFrames lf = load_frames(opt);
  json report = base_report("estimate-normal", opt, lf);
  estimate(opt, lf.frames, report);
  finish(report, opt);
  return report;
}

json cmd_warp(const CliOptions& opt) {
  fs::create_directories(opt.out);
  const LoadedFrames lf = load_frames(opt);
  const FrameSet& fset = lf.frames;
  json report = base_report("warp", opt, lf);
  const SurfaceNormal sn = normal_for(opt, fset, report);

  const FeatureGrid& cur = *fset.current;
  const int h = cur.height();
  const int w = cur.width();
  const int C = cur.channels();
  const SampleRegion region = SampleRegion::default_for(h, w, opt.samples);

  // Mean over the current frame and every valid warped pixel.
  std::vector<double> sum(std::size_t(h) * w * C, 0.0);
  std::vector<int> count(std::size_t(h) * w, 1);
  for (int v = 0; v < h; ++v) {
    for (int u = 0; u < w; ++u) {
      for (int c = 0; c < C; ++c) sum[(std::size_t(v) * w + u) * C + c] = cur.at(v, u, c);
    }
  }

  json per_frame = json::array();
  for (const ReferenceFrame* ref : fset.canonical_order()) {
    const Homography H = homography_matrix(fset.intrinsics, ref->pose, sn, fset.plane);
    const WarpResult wr = warp_to_current(*ref->grid, H, h, w);
    const std::string grid_name = frame_name("warped_", ref->id, ".fgrid");
    write_grid(opt.out / grid_name, wr.image);
    add_artifact(report, grid_name);
    if (previewable(wr.image)) {
      const std::string ppm = frame_name("warped_", ref->id, C == 1 ? ".pgm" : ".ppm");
      write_pnm(opt.out / ppm, wr.image);
      add_artifact(report, ppm);
    }

    double diff = 0.0;
    long valid_in_region = 0;
    long valid = 0;
    for (int v = 0; v < h; ++v) {
      for (int u = 0; u < w; ++u) {
        const std::size_t i = std::size_t(v) * w + u;
        if (!wr.valid[i]) continue;
        ++valid;
        ++count[i];
        for (int c = 0; c < C; ++c) sum[i * C + c] += wr.image.at(v, u, c);
        if (!region.contains({double(u), double(v)})) continue;
        ++valid_in_region;
        for (int c = 0; c < C; ++c) diff += std::abs(double(wr.image.at(v, u, c)) - cur.at(v, u, c));
      }
    }
    per_frame.push_back(
        {{"id", ref->id},
         {"file", grid_name},
         {"valid_fraction", double(valid) / double(std::size_t(h) * w)},
         {"region_mean_abs_diff", valid_in_region ? diff / double(valid_in_region * C) : 0.0}});
  }

  FeatureGrid mean(h, w, C);
  for (int v = 0; v < h; ++v) {
    for (int u = 0; u < w; ++u) {
      const std::size_t i = std::size_t(v) * w + u;
      for (int c = 0; c < C; ++c) mean.at(v, u, c) = static_cast<float>(sum[i * C + c] / count[i]);
    }
  }
  write_grid(opt.out / "fused_mean.fgrid", mean);
  add_artifact(report, "fused_mean.fgrid");
  if (previewable(mean)) {
    const std::string ppm = C == 1 ? "fused_mean.pgm" : "fused_mean.ppm";
    write_pnm(opt.out / ppm, mean);
    add_artifact(report, ppm);
  }
  report["warped"] = std::move(per_frame);
  finish(report, opt);
  return report;
}

json cmd_fuse(const CliOptions& opt) {
  fs::create_directories(opt.out);
  const LoadedFrames lf = load_frames(opt);
  const FrameSet& fset = lf.frames;
  json report = base_report("fuse", opt, lf);
  const SurfaceNormal sn = normal_for(opt, fset, report);

  const int h = fset.current->height();
  const int w = fset.current->width();
  const std::vector<Eigen::Vector2d> points =
      opt.dense ? dense_road_points(fset.intrinsics, sn, h, w)
                : sample_region_points(SampleRegion::default_for(h, w, opt.samples), h, w);
  const FusionOutput fo = fuse(fset, sn, points);

  write_grid(opt.out / "fused.fgrid", fo.grid);
  add_artifact(report, "fused.fgrid");
  if (previewable(fo.grid)) {
    const std::string ppm = fo.grid.channels() == 1 ? "fused_preview.pgm" : "fused_preview.ppm";
    write_pnm(opt.out / ppm, fo.grid, 0.5);
    add_artifact(report, ppm);
  }

  std::ostringstream csv;
  csv << std::setprecision(17);
  csv << "sample,u,v,frame_id,admitted,similarity,weight\n";
  for (std::size_t s = 0; s < fo.points.size(); ++s) {
    for (const KeyWeight& k : fo.weights[s]) {
      csv << s << ',' << fo.points[s].x() << ',' << fo.points[s].y() << ',' << k.frame_id << ','
          << (k.admitted ? 1 : 0) << ',' << k.similarity << ',' << k.weight << '\n';
    }
  }
  write_text(opt.out / "weights.csv", csv.str());
  add_artifact(report, "weights.csv");

  report["mode"] = opt.dense ? "dense" : "samples";
  report["fused_points"] = fo.points.size();
  report["fused_scale"] =
      "fused.fgrid holds F_t + sum_i W_i F_i (about twice the input magnitude) at fused pixels and "
      "the current frame elsewhere; the preview image is divided by 2";
  report["weights_csv"] = "weights.csv";
  finish(report, opt);
  return report;
}

json cmd_synth(const CliOptions& opt) {
  SynthDescription desc;
  if (!opt.spec.empty()) {
    std::ifstream in(opt.spec);
    if (!in) throw Error(ErrorCode::kIoError, "cannot open scene spec " + opt.spec);
    json j;
    try {
      in >> j;
    } catch (const json::exception& e) {
      throw Error(ErrorCode::kInvalidArgument, "scene spec is not JSON: " + std::string(e.what()));
    }
    desc = synth_from_json(j);
  } else {
    desc = default_synth_scene(opt.seed.value_or(7));
  }
  if (opt.seed) desc.seed = *opt.seed;
  const SceneSpec spec = desc.build();
  const RenderedSequence seq = render(spec);

  fs::create_directories(opt.out);
  json report;
  report["command"] = "synth";
  report["artifacts"] = json::array();

  Manifest m;
  m.intrinsics = spec.intrinsics;
  m.plane = spec.plane;
  m.pose_type = PoseType::kRelative;
  m.true_normal = spec.true_normal;
  m.seed = desc.seed;
  const std::vector<RelativePose> observed = spec.observed_trajectory();
  for (std::size_t k = 0; k < seq.frames.size(); ++k) {
    const int id = static_cast<int>(k);
    const std::string name = frame_name("frame_", id, ".fgrid");
    const std::string clean = frame_name("clean_", id, ".fgrid");
    const std::string ppm = frame_name("frame_", id, ".ppm");
    write_grid(opt.out / name, seq.frames[k]);
    write_grid(opt.out / clean, seq.clean_frames[k]);
    write_pnm(opt.out / ppm, seq.frames[k]);
    for (const auto& a : {name, clean, ppm}) add_artifact(report, a);
    m.frames.push_back({id, name, observed[k].R, observed[k].t});
  }
  write_manifest(opt.out / "manifest.json", m);
  add_artifact(report, "manifest.json");
  json scene = synth_to_json(desc);
  scene["seed"] = desc.seed;
  write_text(opt.out / "scene.json", scene.dump(2) + "\n");
  add_artifact(report, "scene.json");

  report["frames"] = seq.frames.size();
  report["true_normal"] = normal_json(spec.true_normal);
  report["seed"] = desc.seed;
  report["manifest"] = "manifest.json";
  finish(report, opt);
  return report;
}

json cmd_check_jacobians(const CliOptions& opt, std::ostream& table) {
  const auto results = run_jacobian_checks(opt.seed.value_or(0), opt.trials);
  json report;
  report["command"] = "check-jacobians";
  report["seed"] = opt.seed.value_or(0);
  report["trials"] = opt.trials;
  report["artifacts"] = json::array();
  json suites = json::array();
  bool all = true;
  table << std::left << std::setw(28) << "suite" << std::setw(8) << "trials" << std::setw(16)
        << "max_rel_error" << std::setw(12) << "tolerance" << "result\n";
  for (const auto& r : results) {
    all = all && r.passed();
    std::ostringstream err;
    err << std::scientific << std::setprecision(3) << r.max_rel_error;
    std::ostringstream tol;
    tol << std::scientific << std::setprecision(0) << r.tolerance;
    table << std::left << std::setw(28) << r.name << std::setw(8) << r.trials << std::setw(16)
          << err.str() << std::setw(12) << tol.str() << (r.passed() ? "PASS" : "FAIL") << '\n';
    suites.push_back({{"name", r.name},
                      {"trials", r.trials},
                      {"max_rel_error", r.max_rel_error},
                      {"tolerance", r.tolerance},
                      {"passed", r.passed()}});
  }
  report["suites"] = std::move(suites);
  report["passed"] = all;
  if (!opt.out.empty()) {
    fs::create_directories(opt.out);
    finish(report, opt);
  }
  return report;
}

int run_command(const std::string& command, const CliOptions& opt, std::ostream& out,
                std::ostream& err) {
  try {
    json report;
    if (command == "estimate-normal") {
      report = cmd_estimate_normal(opt);
    } else if (command == "warp") {
      report = cmd_warp(opt);
    } else if (command == "fuse") {
      report = cmd_fuse(opt);
    } else if (command == "synth") {
      report = cmd_synth(opt);
    } else if (command == "check-jacobians") {
      report = cmd_check_jacobians(opt, out);
      return report["passed"].get<bool>() ? 0 : kExitJacobianMismatch;
    } else {
      err << "unknown command " << command << '\n';
      return kExitUsage;
    }
    out << report.dump(2) << '\n';
    return 0;
  } catch (const Error& e) {
    err << "error (" << to_string(e.code()) << "): " << e.what() << '\n';
    return exit_code(e.code());
  } catch (const fs::filesystem_error& e) {
    err << "error (io): " << e.what() << '\n';
    return exit_code(ErrorCode::kIoError);
  } catch (const std::exception& e) {
    err << "internal error: " << e.what() << '\n';
    return kExitInternal;
  }
}

}  // namespace homofuse

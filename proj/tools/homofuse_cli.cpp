#include <iostream>
#include <sstream>

#include <CLI11.hpp>

#include "homofuse/cli.hpp"

namespace {

// "a,b" -> two doubles.
bool parse_pair(const std::string& s, double& a, double& b) {
  std::istringstream is(s);
  char comma = 0;
  return (is >> a >> comma >> b) && comma == ',' && (is >> std::ws).eof();
}

}  // namespace

int main(int argc, char** argv) {
  using homofuse::CliOptions;
  CLI::App app{"Homography-guided multi-frame road alignment and fusion"};
  app.require_subcommand(1);

  CliOptions opt;
  std::string lambda = "0.1,0.1";
  std::string normal;
  std::string out;
  int target = 0;
  std::uint64_t seed = 0;

  auto shared = [&](CLI::App* sub) {
    sub->add_option("--calib", opt.calib, "calibration/manifest JSON");
    sub->add_option("--frames", opt.frames, "frame files (glob) or manifest JSON");
    sub->add_option("--n", opt.n, "frames per run")->capture_default_str();
    sub->add_option("--gap", opt.gap, "frame gap")->capture_default_str();
    sub->add_option("--samples", opt.samples, "sample points")->capture_default_str();
    sub->add_option("--kernel", opt.kernel, "robust kernel")
        ->check(CLI::IsMember({"quadratic", "cauchy", "geman", "welsch"}))
        ->capture_default_str();
    sub->add_option("--kernel-scale", opt.kernel_scale, "kernel scale c")->capture_default_str();
    sub->add_option("--lambda", lambda, "damping THETA,PHI")->capture_default_str();
    sub->add_option("--max-iters", opt.max_iters)->capture_default_str();
    sub->add_option("--conv-threshold", opt.conv_threshold)->capture_default_str();
    sub->add_flag("--adaptive-damping", opt.adaptive_damping, "raise/lower damping on rejected/accepted steps");
    sub->add_option("--downsample", opt.downsample, "integer box downsample")->capture_default_str();
    sub->add_option("--target", target, "target frame id (default: last)");
    sub->add_option("--seed", seed);
    sub->add_option("--out", out, "output directory");
  };

  auto* est = app.add_subcommand("estimate-normal", "estimate the road-surface normal");
  shared(est);
  auto* warp = app.add_subcommand("warp", "warp reference frames onto the target frame");
  shared(warp);
  warp->add_option("--normal", normal, "THETA,PHI (default: estimate)");
  auto* fuse = app.add_subcommand("fuse", "attention fusion at the estimated normal");
  shared(fuse);
  fuse->add_option("--normal", normal, "THETA,PHI (default: estimate)");
  fuse->add_flag("--dense", opt.dense, "fuse every on-road pixel instead of the sample points");
  auto* synth = app.add_subcommand("synth", "render a synthetic road sequence");
  synth->add_option("--spec", opt.spec, "scene description JSON (default scene if omitted)");
  synth->add_option("--seed", seed);
  synth->add_option("--out", out, "output directory");
  auto* jac = app.add_subcommand("check-jacobians", "finite-difference derivative checks");
  jac->add_option("--seed", seed);
  jac->add_option("--trials", opt.trials)->capture_default_str();
  jac->add_option("--out", out, "write report.json here");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int rc = app.exit(e);
    return rc == 0 ? 0 : homofuse::kExitUsage;
  }

  CLI::App* sub = app.get_subcommands().front();
  if (!parse_pair(lambda, opt.lambda_theta, opt.lambda_phi)) {
    std::cerr << "--lambda expects THETA,PHI\n";
    return homofuse::kExitUsage;
  }
  if (!normal.empty()) {
    homofuse::SurfaceNormal sn;
    if (!parse_pair(normal, sn.theta, sn.phi)) {
      std::cerr << "--normal expects THETA,PHI\n";
      return homofuse::kExitUsage;
    }
    opt.normal = sn;
  }
  auto given = [&](const char* name) {
    const CLI::Option* o = sub->get_option_no_throw(name);
    return o != nullptr && o->count() > 0;
  };
  if (given("--target")) opt.target = target;
  if (given("--seed")) opt.seed = seed;
  if (!out.empty()) {
    opt.out = out;
  } else if (sub == jac) {
    opt.out.clear();
  }
  return homofuse::run_command(sub->get_name(), opt, std::cout, std::cerr);
}

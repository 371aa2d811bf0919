#include "homofuse/robust_kernel.hpp"

#include <cmath>

#include "homofuse/error.hpp"

namespace homofuse {

RobustKernel::RobustKernel(double alpha, double c) : alpha_(alpha), c_(c) {
  if (!(c > 0.0) || !std::isfinite(c) || std::isnan(alpha) || alpha == std::numeric_limits<double>::infinity()) {
    throw Error(ErrorCode::kInvalidArgument, "robust kernel needs c > 0 and alpha in [-inf, inf)");
  }
}

RobustKernel RobustKernel::from_name(const std::string& name, double c) {
  if (name == "quadratic") return quadratic(c);
  if (name == "cauchy") return cauchy(c);
  if (name == "geman") return geman_mcclure(c);
  if (name == "welsch") return welsch(c);
  throw Error(ErrorCode::kInvalidArgument, "unknown kernel '" + name + "'");
}

std::string RobustKernel::name() const {
  if (alpha_ == 2.0) return "quadratic";
  if (alpha_ == 0.0) return "cauchy";
  if (alpha_ == -2.0) return "geman";
  if (std::isinf(alpha_)) return "welsch";
  return "barron(" + std::to_string(alpha_) + ")";
}

double RobustKernel::rho(double x) const {
  const double z = (x / c_) * (x / c_);
  if (alpha_ == 2.0) return 0.5 * z;
  if (alpha_ == 0.0) return std::log1p(0.5 * z);
  if (std::isinf(alpha_)) return -std::expm1(-0.5 * z);
  const double b = std::abs(alpha_ - 2.0);
  return b / alpha_ * (std::pow(z / b + 1.0, 0.5 * alpha_) - 1.0);
}

double RobustKernel::weight(double x) const {
  const double z = (x / c_) * (x / c_);
  const double inv_c2 = 1.0 / (c_ * c_);
  if (alpha_ == 2.0) return inv_c2;
  if (alpha_ == 0.0) return inv_c2 / (0.5 * z + 1.0);
  if (std::isinf(alpha_)) return inv_c2 * std::exp(-0.5 * z);
  const double b = std::abs(alpha_ - 2.0);
  return inv_c2 * std::pow(z / b + 1.0, 0.5 * alpha_ - 1.0);
}

double RobustKernel::derivative(double x) const { return x * weight(x); }

}  // namespace homofuse

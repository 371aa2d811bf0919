#pragma once

#include <limits>
#include <string>

namespace homofuse {

/**
 * Barron's general and adaptive robust loss applied to a residual magnitude x:
 *
 *   rho(x; alpha, c) = |alpha - 2| / alpha * (((x/c)^2 / |alpha - 2| + 1)^(alpha/2) - 1)
 *
 * with the removable singularities filled in by their limits:
 *   alpha =  2   quadratic       (x/c)^2 / 2
 *   alpha =  0   Cauchy          log((x/c)^2 / 2 + 1)
 *   alpha = -2   Geman-McClure   2 (x/c)^2 / ((x/c)^2 + 4)
 *   alpha = -inf Welsch          1 - exp(-(x/c)^2 / 2)
 */
class RobustKernel {
 public:
  RobustKernel(double alpha, double c);

  static RobustKernel quadratic(double c = 1.0) { return {2.0, c}; }
  static RobustKernel cauchy(double c = 0.25) { return {0.0, c}; }
  static RobustKernel geman_mcclure(double c = 0.25) { return {-2.0, c}; }
  static RobustKernel welsch(double c = 0.25) {
    return {-std::numeric_limits<double>::infinity(), c};
  }
  /// "quadratic", "cauchy", "geman" or "welsch".
  static RobustKernel from_name(const std::string& name, double c);

  double alpha() const { return alpha_; }
  double scale() const { return c_; }
  std::string name() const;

  double rho(double x) const;
  /// d rho / d x.
  double derivative(double x) const;
  /// IRLS weight rho'(x) / x, evaluated in closed form so x = 0 is finite
  /// (it equals 1/c^2 there for every alpha).
  double weight(double x) const;

 private:
  double alpha_;
  double c_;
};

}  // namespace homofuse

#include "rosmm/mixture.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <sstream>

#include "rosmm/error.hpp"

namespace rosmm {

void GaussianMixtureSpec::validate() const {
  if (!(c > 1.0) || !std::isfinite(c)) throw ConfigError("mixture coefficient c must be > 1");
  if (!(sigma1 > 0.0) || !(sigma2 > 0.0) || !std::isfinite(sigma1) || !std::isfinite(sigma2))
    throw ConfigError("mixture scales must be positive and finite");
}

std::string GaussianMixtureSpec::describe() const {
  std::ostringstream os;
  os.precision(17);
  os << "(c=" << c << ", sigma1=" << sigma1 << ", sigma2=" << sigma2 << ")";
  return os.str();
}

double gaussian2d_pdf(double x, double y, double sigma) {
  const double s2 = sigma * sigma;
  return std::exp(-0.5 * (x * x + y * y) / s2) / (2.0 * std::numbers::pi * s2);
}

double rayleigh_pdf(double r, double sigma) {
  const double s2 = sigma * sigma;
  return r / s2 * std::exp(-0.5 * r * r / s2);
}

double rayleigh_quantile(double z, double sigma) {
  return std::sqrt(-2.0 * sigma * sigma * std::log1p(-z));
}

double density(const GaussianMixtureSpec& spec, double x, double y) {
  return spec.c * gaussian2d_pdf(x, y, spec.sigma1) +
         (1.0 - spec.c) * gaussian2d_pdf(x, y, spec.sigma2);
}

double radial_density(const GaussianMixtureSpec& spec, double r) {
  return spec.c * rayleigh_pdf(r, spec.sigma1) + (1.0 - spec.c) * rayleigh_pdf(r, spec.sigma2);
}

double radial_cdf(const GaussianMixtureSpec& spec, double r) {
  const double e1 = std::exp(-0.5 * r * r / (spec.sigma1 * spec.sigma1));
  const double e2 = std::exp(-0.5 * r * r / (spec.sigma2 * spec.sigma2));
  return 1.0 - spec.c * e1 + (spec.c - 1.0) * e2;
}

bool is_nonnegative(const GaussianMixtureSpec& spec) {
  if (spec.sigma2 < spec.sigma1)
    return spec.c / (spec.sigma1 * spec.sigma1) >= (spec.c - 1.0) / (spec.sigma2 * spec.sigma2);
  // equal scales collapse to a single positive Gaussian of mass 1
  return spec.sigma2 == spec.sigma1;
}

double radial_quantile(const GaussianMixtureSpec& spec, double z, double tol) {
  if (!is_nonnegative(spec))
    throw NonInvertibleCdfError("radial CDF of " + spec.describe() +
                                " is not monotone; inverse transform sampling is impossible");
  if (!(z >= 0.0) || !(z < 1.0)) throw ConfigError("quantile level must lie in [0, 1)");
  double lo = 0.0;
  double hi = 100.0 * std::max(spec.sigma1, spec.sigma2);
  while (hi - lo > tol) {
    const double mid = 0.5 * (lo + hi);
    if (radial_cdf(spec, mid) < z)
      lo = mid;
    else
      hi = mid;
  }
  return 0.5 * (lo + hi);
}

double analytic_ratio(const GaussianMixtureSpec& target, const GaussianMixtureSpec& reference,
                      double x, double y) {
  const double ref = density(reference, x, y);
  if (ref == 0.0) throw DegenerateError("reference density vanishes; ratio undefined");
  return density(target, x, y) / ref;
}

double radial_second_moment(const GaussianMixtureSpec& spec) {
  return 2.0 * (spec.c * spec.sigma1 * spec.sigma1 +
                (1.0 - spec.c) * spec.sigma2 * spec.sigma2);
}

}  // namespace rosmm

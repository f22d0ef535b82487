#pragma once

#include <string>

namespace rosmm {

/// Isotropic 2D signed Gaussian mixture
///   q(x, y) = c N(x, y; sigma1) + (1 - c) N(x, y; sigma2),   c > 1,
/// so the second component enters with negative mass 1 - c.
struct GaussianMixtureSpec {
  double c = 2.0;
  double sigma1 = 2.0;
  double sigma2 = 1.2;

  void validate() const;
  std::string describe() const;
  bool operator==(const GaussianMixtureSpec&) const = default;
};

/// Reference distribution (class 0) of the toy problem.
inline constexpr GaussianMixtureSpec kReferenceSpec{4.0 / 3.0, 2.5, 2.3};
/// Target (class 1) whose density, and ratio to the reference, stay nonnegative.
inline constexpr GaussianMixtureSpec kNonnegTargetSpec{2.0, 2.0, 1.42};
/// Target with a negative-density core around the origin.
inline constexpr GaussianMixtureSpec kSignedTargetSpec{2.0, 2.0, 1.2};

/// Isotropic 2D normal pdf with scale sigma.
double gaussian2d_pdf(double x, double y, double sigma);
/// Rayleigh radial pdf r / sigma^2 exp(-r^2 / 2 sigma^2).
double rayleigh_pdf(double r, double sigma);
/// Closed-form single-component radial quantile sqrt(-2 sigma^2 ln(1 - z)).
double rayleigh_quantile(double z, double sigma);

double density(const GaussianMixtureSpec& spec, double x, double y);
double radial_density(const GaussianMixtureSpec& spec, double r);
double radial_cdf(const GaussianMixtureSpec& spec, double r);

/// Whether the radial density is nonnegative everywhere. Closed form: with
/// sigma2 < sigma1 the sign is decided at r -> 0+, with sigma2 > sigma1 the
/// negative component decays slower and eventually dominates.
bool is_nonnegative(const GaussianMixtureSpec& spec);

/// Numerical inverse of radial_cdf by bisection on [0, 100 max(sigma)].
/// Requires is_nonnegative(spec).
double radial_quantile(const GaussianMixtureSpec& spec, double z, double tol = 1e-10);

/// density(target) / density(reference). Signed in general.
double analytic_ratio(const GaussianMixtureSpec& target, const GaussianMixtureSpec& reference,
                      double x, double y);

/// E[R^2] = 2 (c sigma1^2 + (1 - c) sigma2^2) of the mixture's radial law.
double radial_second_moment(const GaussianMixtureSpec& spec);

}  // namespace rosmm

#pragma once

#include <functional>
#include <string>
#include <string_view>

namespace rosmm {

/// Classifier outputs are clamped to [kProbClamp, 1 - kProbClamp] inside BCE.
inline constexpr double kProbClamp = 1e-12;
/// Per-sample loss magnitude used for samples that land on a PARE pole.
inline constexpr double kPoleLossClamp = 1e12;

/// Targets of the pole-adjusted ratio estimation loss. The classifier-ratio
/// map s = (t0 + t1 r) / (t0^2 + t1^2 r) is singular at r = -(t0/t1)^2.
struct PareParams {
  double t0 = 25619.0;
  double t1 = 58.0;

  void validate() const;
  double pole() const { return -(t0 / t1) * (t0 / t1); }
  /// Half-width of the excluded band around the pole, measured on t0^2 + t1^2 r.
  double pole_band() const { return 1e-6 * t0 * t0; }
  double target(int y) const { return y == 0 ? t0 : t1; }
};

enum class LossKind { Bce, Mse, Pare };

std::string_view to_string(LossKind kind);
LossKind loss_kind_from_string(std::string_view name);

struct LossSpec {
  LossKind kind = LossKind::Bce;
  PareParams pare{};
};

double weighted_bce(double s, int y, double w);
double weighted_mse(double s, int y, double w);
double pare_loss(double s, int y, double w, const PareParams& t);

double loss_value(const LossSpec& spec, double s, int y, double w);
/// d loss / d s for one sample.
double loss_grad_s(const LossSpec& spec, double s, int y, double w);
/// d loss / d z where s = sigmoid(z). For BCE this is w (s - y) inside the
/// clamp band and 0 outside it, which is exact for the clamped loss.
double loss_grad_logit(const LossSpec& spec, double s, int y, double w);

/// BCE/MSE ratio trick: r = s / (1 - s).
double ratio_from_classifier_bce(double s);
/// Inverse of the BCE ratio trick: s = r / (1 + r). Singular at r = -1.
double classifier_from_ratio_bce(double r);

double classifier_from_ratio_pare(double r, const PareParams& t);
double ratio_from_classifier_pare(double s, const PareParams& t);
/// True when r sits inside the excluded band around the PARE pole.
bool in_pole_band(double r, const PareParams& t);

/// q1 / (q0 + q1). Not clipped: signed densities give values outside (0,1).
double analytic_optimal_classifier(const std::function<double(double)>& q0_density,
                                   const std::function<double(double)>& q1_density, double x);
double analytic_optimal_classifier(double q0, double q1);

}  // namespace rosmm

#include "rosmm/losses.hpp"

#include <algorithm>
#include <cmath>

#include "rosmm/error.hpp"

namespace rosmm {

void PareParams::validate() const {
  if (!(t0 > 0.0) || !(t1 > 0.0) || !std::isfinite(t0) || !std::isfinite(t1))
    throw ConfigError("PARE parameters t0, t1 must be positive and finite");
  if (t0 == t1) throw ConfigError("PARE parameters t0 and t1 must differ");
}

std::string_view to_string(LossKind kind) {
  switch (kind) {
    case LossKind::Bce: return "bce";
    case LossKind::Mse: return "mse";
    case LossKind::Pare: return "pare";
  }
  return "bce";
}

LossKind loss_kind_from_string(std::string_view name) {
  if (name == "bce") return LossKind::Bce;
  if (name == "mse") return LossKind::Mse;
  if (name == "pare") return LossKind::Pare;
  throw FormatError("unknown loss kind '" + std::string(name) + "'");
}

double weighted_bce(double s, int y, double w) {
  if (w == 0.0) return 0.0;
  const double sc = std::clamp(s, kProbClamp, 1.0 - kProbClamp);
  return -w * (y == 1 ? std::log(sc) : std::log1p(-sc));
}

double weighted_mse(double s, int y, double w) {
  const double d = s - static_cast<double>(y);
  return w * d * d;
}

double pare_loss(double s, int y, double w, const PareParams& t) {
  const double d = 1.0 - s * t.target(y);
  return w * d * d;
}

double loss_value(const LossSpec& spec, double s, int y, double w) {
  switch (spec.kind) {
    case LossKind::Bce: return weighted_bce(s, y, w);
    case LossKind::Mse: return weighted_mse(s, y, w);
    case LossKind::Pare: return pare_loss(s, y, w, spec.pare);
  }
  return 0.0;
}

double loss_grad_s(const LossSpec& spec, double s, int y, double w) {
  switch (spec.kind) {
    case LossKind::Bce:
      if (s < kProbClamp || s > 1.0 - kProbClamp) return 0.0;
      return y == 1 ? -w / s : w / (1.0 - s);
    case LossKind::Mse: return 2.0 * w * (s - static_cast<double>(y));
    case LossKind::Pare: {
      const double t = spec.pare.target(y);
      return -2.0 * w * t * (1.0 - s * t);
    }
  }
  return 0.0;
}

double loss_grad_logit(const LossSpec& spec, double s, int y, double w) {
  if (spec.kind == LossKind::Bce) {
    if (s < kProbClamp || s > 1.0 - kProbClamp) return 0.0;
    return w * (s - static_cast<double>(y));
  }
  return loss_grad_s(spec, s, y, w) * s * (1.0 - s);
}

double ratio_from_classifier_bce(double s) {
  if (s >= 1.0 - kProbClamp) throw SaturationError("classifier output saturated at 1");
  if (!(s > 0.0)) throw SaturationError("classifier output must be in (0,1)");
  return s / (1.0 - s);
}

double classifier_from_ratio_bce(double r) { return r / (1.0 + r); }

bool in_pole_band(double r, const PareParams& t) {
  return std::abs(t.t0 * t.t0 + t.t1 * t.t1 * r) <= t.pole_band();
}

double classifier_from_ratio_pare(double r, const PareParams& t) {
  const double den = t.t0 * t.t0 + t.t1 * t.t1 * r;
  if (std::abs(den) <= t.pole_band())
    throw PoleError("ratio " + std::to_string(r) + " is inside the PARE pole band around " +
                    std::to_string(t.pole()));
  return (t.t0 + t.t1 * r) / den;
}

double ratio_from_classifier_pare(double s, const PareParams& t) {
  const double den = 1.0 - t.t1 * s;
  if (std::abs(den) <= 1e-12) throw PoleError("classifier output at 1/t1 maps to an infinite ratio");
  return -(t.t0 / t.t1) * (1.0 - t.t0 * s) / den;
}

double analytic_optimal_classifier(double q0, double q1) {
  const double den = q0 + q1;
  if (den == 0.0) throw DegenerateError("q0 + q1 vanishes; optimal classifier undefined");
  return q1 / den;
}

double analytic_optimal_classifier(const std::function<double(double)>& q0_density,
                                   const std::function<double(double)>& q1_density, double x) {
  return analytic_optimal_classifier(q0_density(x), q1_density(x));
}

}  // namespace rosmm

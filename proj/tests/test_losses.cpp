#include <doctest.h>

#include <cmath>
#include <random>

#include "rosmm/error.hpp"
#include "rosmm/losses.hpp"

using namespace rosmm;

namespace {
// Direct formula for a signed 2D mixture at the origin.
double mixture_at_origin(double c, double s1, double s2) {
  return c / (2 * M_PI * s1 * s1) + (1 - c) / (2 * M_PI * s2 * s2);
}
}  // namespace

TEST_CASE("weighted_bce") {
  CHECK(weighted_bce(0.5, 1, 1.0) == doctest::Approx(std::log(2.0)));
  CHECK(weighted_bce(0.9, 0, -1.0) == doctest::Approx(-2.302585093));
  CHECK(weighted_bce(0.3, 1, 0.0) == 0.0);
  CHECK(weighted_bce(0.0, 0, 0.0) == 0.0);
  CHECK(std::isfinite(weighted_bce(0.0, 1, 1.0)));
  CHECK(weighted_bce(0.0, 1, 1.0) == doctest::Approx(-std::log(kProbClamp)));
}

TEST_CASE("weighted_mse") {
  CHECK(weighted_mse(1.0, 1, 1.0) == 0.0);
  CHECK(weighted_mse(0.5, 0, 2.0) == 0.5);
  CHECK(weighted_mse(0.5, 1, -1.0) == -0.25);
}

TEST_CASE("pare_loss") {
  const PareParams t;
  CHECK(pare_loss(1.0 / 25619.0, 0, 1.0, t) == doctest::Approx(0.0).epsilon(1e-20));
  CHECK(pare_loss(1.0 / 58.0, 1, 1.0, t) == doctest::Approx(0.0).epsilon(1e-20));
  CHECK(pare_loss(0.0, 0, 3.5, t) == 3.5);
  CHECK(pare_loss(0.0, 0, 2.0, PareParams{3.0, 4.0}) == 2.0);
  for (double s : {-1e6, -3.0, 0.0, 0.7, 5.0, 1e6}) CHECK(std::isfinite(pare_loss(s, 1, -2.0, t)));
}

TEST_CASE("per-sample gradients match finite differences") {
  std::mt19937_64 gen(3);
  std::uniform_real_distribution<double> us(0.05, 0.95), uw(-3.0, 3.0);
  for (int i = 0; i < 100; ++i) {
    const double s = us(gen), w = uw(gen);
    const int y = i % 2;
    for (LossKind k : {LossKind::Bce, LossKind::Mse, LossKind::Pare}) {
      const LossSpec spec{k};
      const double h = 1e-6;
      const double fd = (loss_value(spec, s + h, y, w) - loss_value(spec, s - h, y, w)) / (2 * h);
      CHECK(loss_grad_s(spec, s, y, w) == doctest::Approx(fd).epsilon(1e-6));
      const double z = std::log(s / (1 - s)), hz = 1e-6;
      const auto at = [&](double zz) { return loss_value(spec, 1 / (1 + std::exp(-zz)), y, w); };
      const double fdz = (at(z + hz) - at(z - hz)) / (2 * hz);
      CHECK(loss_grad_logit(spec, s, y, w) == doctest::Approx(fdz).epsilon(1e-6));
    }
  }
}

TEST_CASE("BCE ratio trick") {
  CHECK(ratio_from_classifier_bce(0.5) == 1.0);
  CHECK(ratio_from_classifier_bce(2.0 / 3.0) == doctest::Approx(2.0));
  CHECK_THROWS_AS(ratio_from_classifier_bce(0.9999999999999), SaturationError);
  CHECK_THROWS_AS(ratio_from_classifier_bce(0.0), SaturationError);
  for (double s : {0.01, 0.3, 0.5, 0.77, 0.999})
    CHECK(classifier_from_ratio_bce(ratio_from_classifier_bce(s)) == doctest::Approx(s).epsilon(1e-12));
}

TEST_CASE("PARE classifier-ratio map") {
  const PareParams t;
  CHECK(classifier_from_ratio_pare(0.0, t) == doctest::Approx(1.0 / 25619.0).epsilon(1e-14));
  CHECK(classifier_from_ratio_pare(0.0, t) == doctest::Approx(3.9034e-5).epsilon(1e-4));
  CHECK(classifier_from_ratio_pare(1e12, t) == doctest::Approx(1.0 / 58.0).epsilon(1e-6));
  CHECK(t.pole() == doctest::Approx(-195105).epsilon(1e-5));
  CHECK_THROWS_AS(classifier_from_ratio_pare(t.pole(), t), PoleError);
  CHECK_THROWS_AS(classifier_from_ratio_pare(-195105.0, t), PoleError);
  CHECK(in_pole_band(t.pole(), t));
  CHECK_FALSE(in_pole_band(-1000.0, t));

  CHECK(std::abs(ratio_from_classifier_pare(1.0 / 25619.0, t)) < 1e-9);
  CHECK(ratio_from_classifier_pare(0.0, t) == doctest::Approx(-25619.0 / 58.0));
  CHECK(ratio_from_classifier_pare(0.0, t) == doctest::Approx(-441.707).epsilon(1e-6));
  CHECK_THROWS_AS(ratio_from_classifier_pare(1.0 / 58.0, t), PoleError);

  for (double r : {-5.0, -1.0, 0.0, 0.5, 10.0}) {
    const double back = ratio_from_classifier_pare(classifier_from_ratio_pare(r, t), t);
    CHECK(std::abs(back - r) <= 1e-10 * std::max(std::abs(r), 1.0));
  }
  for (double s : {-0.3, 1e-5, 0.004, 0.2, 3.0}) {
    const double back = classifier_from_ratio_pare(ratio_from_classifier_pare(s, t), t);
    CHECK(back == doctest::Approx(s).epsilon(1e-10));
  }
}

TEST_CASE("PARE functional optimum solves the two-point quadratic") {
  std::mt19937_64 gen(8);
  std::uniform_real_distribution<double> uq(0.1, 5.0), ut(1.0, 100.0);
  for (int i = 0; i < 200; ++i) {
    const double q0 = uq(gen);
    double q1 = uq(gen);
    if (i % 3 == 0) q1 = -0.5 * q0 * uq(gen) / 5.0;  // negative mass, ratio in (-0.5, 0)
    const PareParams t{ut(gen), ut(gen)};
    if (t.t0 == t.t1) continue;
    // d/ds [q0 (1 - t0 s)^2 + q1 (1 - t1 s)^2] = 0  <=>  s (q0 t0^2 + q1 t1^2) = q0 t0 + q1 t1.
    const double a = q0 * t.t0 * t.t0 + q1 * t.t1 * t.t1;
    const double b = q0 * t.t0 + q1 * t.t1;
    if (std::abs(a) < 1e-6 || in_pole_band(q1 / q0, t)) continue;
    CHECK(classifier_from_ratio_pare(q1 / q0, t) == doctest::Approx(b / a).epsilon(1e-12));
    // It is a minimum when the quadratic opens upward.
    if (a > 0) {
      const double s = b / a;
      const auto f = [&](double v) { return pare_loss(v, 0, q0, t) + pare_loss(v, 1, q1, t); };
      CHECK(f(s) <= f(s + 1e-3));
      CHECK(f(s) <= f(s - 1e-3));
    }
  }
}

TEST_CASE("analytic optimal classifier") {
  CHECK(analytic_optimal_classifier(0.7, 0.7) == 0.5);
  CHECK(analytic_optimal_classifier(0.3, 0.0) == 0.0);
  CHECK_THROWS_AS(analytic_optimal_classifier(0.4, -0.4), DegenerateError);

  const double q1 = mixture_at_origin(2.0, 2.0, 1.2);
  const double q0 = mixture_at_origin(4.0 / 3.0, 2.5, 2.3);
  CHECK(q1 == doctest::Approx(-0.030946).epsilon(1e-4));
  CHECK(q0 == doctest::Approx(0.023925).epsilon(1e-4));
  const auto f0 = [&](double) { return q0; };
  const auto f1 = [&](double) { return q1; };
  const double s = analytic_optimal_classifier(f0, f1, 0.0);
  CHECK(s == doctest::Approx(q1 / (q0 + q1)).epsilon(1e-14));
  CHECK(s == doctest::Approx(4.4066).epsilon(1e-4));
  CHECK(s > 1.0);
}

TEST_CASE("PARE parameter validation and names") {
  CHECK_NOTHROW(PareParams{}.validate());
  CHECK_THROWS_AS((PareParams{5.0, 5.0}.validate()), ConfigError);
  CHECK_THROWS_AS((PareParams{-1.0, 5.0}.validate()), ConfigError);
  CHECK(loss_kind_from_string("pare") == LossKind::Pare);
  CHECK(to_string(LossKind::Mse) == "mse");
  CHECK_THROWS_AS(loss_kind_from_string("hinge"), FormatError);
}

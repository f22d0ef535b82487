#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <fstream>
#include <numbers>
#include <vector>

#include "rosmm/dataset_io.hpp"
#include "rosmm/error.hpp"
#include "rosmm/mixture.hpp"
#include "rosmm/quasidata.hpp"
#include "rosmm/rng.hpp"
#include "support.hpp"

using namespace rosmm;
using testing::simpson;

namespace {

const GaussianMixtureSpec kToySpecs[] = {kReferenceSpec, kNonnegTargetSpec, kSignedTargetSpec};

double radius(std::span<const double> x) { return std::hypot(x[0], x[1]); }

double rayleigh_cdf(double r, double sigma) { return 1.0 - std::exp(-r * r / (2 * sigma * sigma)); }

// Two-sided KS statistic of `samples` against `cdf`.
template <typename Cdf>
double ks_statistic(std::vector<double> samples, Cdf cdf) {
  std::sort(samples.begin(), samples.end());
  const double n = static_cast<double>(samples.size());
  double d = 0.0;
  for (std::size_t i = 0; i < samples.size(); ++i) {
    const double f = cdf(samples[i]);
    d = std::max({d, static_cast<double>(i + 1) / n - f, f - static_cast<double>(i) / n});
  }
  return d;
}

}  // namespace

TEST_CASE("density point values") {
  CHECK(density(kSignedTargetSpec, 0, 0) ==
        doctest::Approx((2.0 / 4.0 - 1.0 / 1.44) / (2 * std::numbers::pi)).epsilon(1e-14));
  CHECK(density(kSignedTargetSpec, 0, 0) == doctest::Approx(-0.0309).epsilon(1e-3));
  CHECK(density(kNonnegTargetSpec, 0, 0) == doctest::Approx(6.46e-4).epsilon(2e-3));
  const GaussianMixtureSpec near_one{1.0 + 1e-12, 1.7, 0.4};
  for (double x : {-2.0, 0.0, 0.3, 3.1})
    CHECK(density(near_one, x, 0.5) == doctest::Approx(gaussian2d_pdf(x, 0.5, 1.7)).epsilon(1e-9));
}

TEST_CASE("radial density integrates to one and has the expected signs") {
  for (const auto& s : kToySpecs) {
    CHECK(radial_density(s, 0.0) == 0.0);
    const double total = simpson([&](double r) { return radial_density(s, r); }, 0.0, 50.0, 100000);
    CHECK(std::abs(total - 1.0) < 1e-10);
  }
  CHECK(radial_density(kSignedTargetSpec, 0.1) < 0.0);
  CHECK(radial_density(kSignedTargetSpec, 3.0) > 0.0);
}

TEST_CASE("2D density integrates to one") {
  for (const auto& s : kToySpecs) {
    const double lim = 30.0;
    const auto inner = [&](double x) {
      return simpson([&](double y) { return density(s, x, y); }, -lim, lim, 1200);
    };
    CHECK(std::abs(simpson(inner, -lim, lim, 1200) - 1.0) < 1e-8);
  }
}

TEST_CASE("polar factorization") {
  for (const auto& s : kToySpecs)
    for (double x : {0.3, -1.2, 2.5})
      for (double y : {0.1, 1.9, -4.0}) {
        const double r = std::hypot(x, y);
        CHECK(density(s, x, y) ==
              doctest::Approx(radial_density(s, r) / (2 * std::numbers::pi * r)).epsilon(1e-12));
      }
}

TEST_CASE("radial CDF") {
  for (const auto& s : kToySpecs) {
    CHECK(radial_cdf(s, 0.0) == 0.0);
    CHECK(std::abs(radial_cdf(s, 100 * s.sigma1) - 1.0) < 1e-12);
    for (double r : {0.5, 1.0, 2.0, 5.0}) {
      const double q = simpson([&](double t) { return radial_density(s, t); }, 0.0, r, 20000);
      CHECK(std::abs(radial_cdf(s, r) - q) < 1e-8);
    }
  }
}

TEST_CASE("nonnegativity classification agrees with a grid scan") {
  CHECK(is_nonnegative(kReferenceSpec));
  CHECK_FALSE(is_nonnegative(kSignedTargetSpec));
  CHECK(is_nonnegative(kNonnegTargetSpec));
  // Prose variant with sigma1 = 2.5 would not be nonnegative.
  CHECK_FALSE(is_nonnegative(GaussianMixtureSpec{2.0, 2.5, 1.42}));

  const GaussianMixtureSpec extra[] = {{1.5, 1.0, 2.0}, {1.1, 1.0, 1.05}, {3.0, 2.0, 1.0}, {1.2, 2.0, 1.0}};
  auto scan = [](const GaussianMixtureSpec& s) {
    for (double r = 1e-4; r <= 40.0; r += 1e-3)
      if (radial_density(s, r) < 0.0) return false;
    return true;
  };
  for (const auto& s : kToySpecs) CHECK(is_nonnegative(s) == scan(s));
  for (const auto& s : extra) CHECK(is_nonnegative(s) == scan(s));
}

TEST_CASE("quantiles") {
  const GaussianMixtureSpec near_one{1.0 + 1e-12, 1.5, 0.9};
  for (double z : {0.01, 0.3, 0.5, 0.9, 0.999}) {
    CHECK(std::abs(radial_quantile(near_one, z) - rayleigh_quantile(z, 1.5)) < 1e-8);
    CHECK(rayleigh_quantile(z, 1.5) == doctest::Approx(std::sqrt(-2 * 2.25 * std::log(1 - z))));
  }
  for (double z : {0.05, 0.5, 0.95})
    CHECK(radial_cdf(kReferenceSpec, radial_quantile(kReferenceSpec, z)) == doctest::Approx(z).epsilon(1e-9));
  CHECK_THROWS_AS(radial_quantile(kSignedTargetSpec, 0.5), NonInvertibleCdfError);
}

TEST_CASE("weighted sampler follows the signed law") {
  const std::size_t n = 100000;
  const WeightedDataset d2 = sample_weighted(kSignedTargetSpec, n, 5);
  double pos = 0;
  for (double w : d2.weights()) {
    CHECK((w == 1.0 || w == -1.0));
    pos += w > 0;
  }
  const double p = 2.0 / 3.0;
  CHECK(std::abs(pos / n - p) < 3 * std::sqrt(p * (1 - p) / n));

  const WeightedDataset d43 = sample_weighted(kReferenceSpec, n, 6);
  const double mean_w = d43.sum_w() / n;
  const double pa = 0.8;  // c / (2c - 1) at c = 4/3
  const double sd = 2 * std::sqrt(pa * (1 - pa) / n);
  CHECK(std::abs(mean_w - 0.6) < 3 * sd);

  // Each branch is Rayleigh with its own scale.
  std::vector<double> r_pos, r_neg;
  for (std::size_t i = 0; i < n; ++i) (d2.w(i) > 0 ? r_pos : r_neg).push_back(radius(d2.x(i)));
  CHECK(ks_statistic(r_pos, [](double r) { return rayleigh_cdf(r, 2.0); }) < testing::ks_critical_001(r_pos.size()));
  CHECK(ks_statistic(r_neg, [](double r) { return rayleigh_cdf(r, 1.2); }) < testing::ks_critical_001(r_neg.size()));
}

TEST_CASE("weighted empirical radial CDF matches the analytic CDF") {
  const std::size_t n = 1000000;
  const WeightedDataset d = sample_weighted(kNonnegTargetSpec, n, 17);
  const double W = d.sum_w();
  for (double r0 : {1.0, 2.0, 3.0}) {
    // F = A / W with A = sum w 1[r <= r0]; delta-method error per sample.
    double a = 0;
    for (std::size_t i = 0; i < n; ++i)
      if (radius(d.x(i)) <= r0) a += d.w(i);
    const double f = a / W;
    double var = 0;
    for (std::size_t i = 0; i < n; ++i) {
      const double ind = radius(d.x(i)) <= r0 ? 1.0 : 0.0;
      const double t = d.w(i) * (ind - f);
      var += t * t;
    }
    const double se = std::sqrt(var) / std::abs(W);
    CAPTURE(r0);
    CHECK(std::abs(f - radial_cdf(kNonnegTargetSpec, r0)) < 3 * se);
  }
}

TEST_CASE("inverse-transform sampler") {
  CHECK_THROWS_AS(sample_unweighted(kSignedTargetSpec, 10, 1), NonInvertibleCdfError);
  const std::size_t n = 100000;
  const WeightedDataset d = sample_unweighted(kReferenceSpec, n, 9);
  std::vector<double> r(n);
  for (std::size_t i = 0; i < n; ++i) {
    r[i] = radius(d.x(i));
    CHECK(d.w(i) == 1.0);
  }
  CHECK(ks_statistic(r, [](double v) { return radial_cdf(kReferenceSpec, v); }) < testing::ks_critical_001(n));
}

TEST_CASE("samplers are deterministic and chunk-stable") {
  const WeightedDataset a = sample_weighted(kSignedTargetSpec, 1000, 3);
  const WeightedDataset b = sample_weighted(kSignedTargetSpec, 1000, 3);
  CHECK(a.features() == b.features());
  CHECK(a.weights() == b.weights());
  const WeightedDataset big = sample_weighted(kSignedTargetSpec, kSampleChunk + 500, 3);
  CHECK(std::equal(a.features().begin(), a.features().end(), big.features().begin()));
  const WeightedDataset c = sample_weighted(kSignedTargetSpec, 1000, 4);
  CHECK(a.features() != c.features());
  CHECK_THROWS_AS(sample_weighted(kSignedTargetSpec, 0, 1), ConfigError);
}

TEST_CASE("weight noise law") {
  const WeightNoiseSpec half{0.5, 2.0, 3};
  CHECK(half.high_weight() == doctest::Approx(3.0));
  CHECK(half.low_weight() == doctest::Approx(-1.0));
  CHECK_THROWS_AS((WeightNoiseSpec{0.1, 0.0, 1}.validate()), ConfigError);
  CHECK_THROWS_AS((WeightNoiseSpec{0.9, 1.0, 1}.validate()), ConfigError);
  CHECK_THROWS_AS((WeightNoiseSpec{0.0, 1.0, 1}.validate()), ConfigError);

  const std::size_t n = 100000;
  const WeightedDataset base = sample_unweighted(kReferenceSpec, n, 2);
  for (double sigma : {1.0, 3.0})
    for (double eta_frac : {0.2, 0.8}) {
      const double eta = eta_frac * WeightNoiseSpec::eta_max(sigma);
      const WeightedDataset d = inject_weight_noise(base, {eta, sigma, 11});
      CHECK(d.features() == base.features());
      double s = 0, s2 = 0, neg = 0, m2 = 0;
      for (double w : d.weights()) s += w, s2 += w * w, neg += w < 0, m2 += w * w - w;
      const double mean = s / n, var = s2 / n - mean * mean;
      // Two-point law: exact moments give the standard errors.
      const double hi = WeightNoiseSpec{eta, sigma, 0}.high_weight();
      const double lo = WeightNoiseSpec{eta, sigma, 0}.low_weight();
      const double mu4 = (1 - eta) * std::pow(hi - 1, 4) + eta * std::pow(lo - 1, 4);
      const double q2 = (1 - eta) * std::pow(hi * hi - hi, 2) + eta * std::pow(lo * lo - lo, 2);
      CAPTURE(sigma);
      CAPTURE(eta);
      CHECK(std::abs(mean - 1) < 3 * sigma / std::sqrt(n));
      CHECK(std::abs(var - sigma * sigma) < 3 * std::sqrt((mu4 - std::pow(sigma, 4)) / n));
      CHECK(std::abs(neg / n - eta) < 3 * std::sqrt(eta * (1 - eta) / n));
      CHECK(std::abs(m2 / n - sigma * sigma) < 3 * std::sqrt((q2 - std::pow(sigma, 4)) / n));
    }

  WeightedDataset signed_data = sample_weighted(kSignedTargetSpec, 100, 1);
  CHECK_THROWS_AS(inject_weight_noise(signed_data, half), DataError);
}

TEST_CASE("analytic ratio") {
  for (double x : {0.0, 1.0, -3.0})
    CHECK(analytic_ratio(kReferenceSpec, kReferenceSpec, x, 0.7) == doctest::Approx(1.0));
  CHECK(analytic_ratio(kSignedTargetSpec, kReferenceSpec, 0, 0) == doctest::Approx(-1.293).epsilon(1e-3));
  CHECK(radial_second_moment(kSignedTargetSpec) == doctest::Approx(13.12));

  // Reweighting the reference reproduces the target's second radial moment.
  const std::size_t n = 1000000;
  const WeightedDataset ref = sample_unweighted(kReferenceSpec, n, 21);
  double sw = 0, swf = 0;
  std::vector<double> wr(n), f(n);
  for (std::size_t i = 0; i < n; ++i) {
    const auto x = ref.x(i);
    wr[i] = analytic_ratio(kSignedTargetSpec, kReferenceSpec, x[0], x[1]);
    f[i] = x[0] * x[0] + x[1] * x[1];
    sw += wr[i];
    swf += wr[i] * f[i];
  }
  const double est = swf / sw;
  double var = 0;
  for (std::size_t i = 0; i < n; ++i) var += std::pow(wr[i] * (f[i] - est), 2);
  const double se = std::sqrt(var) / std::abs(sw);
  CHECK(std::abs(est - 13.12) < 3 * se);
}

TEST_CASE("experiment generation") {
  const ExperimentSizes defaults{};
  CHECK(defaults.n_train == 2000000);
  CHECK(defaults.n_val == 600000);
  CHECK(defaults.n_test == 1400000);
  const ExperimentSizes small{2000, 500, 3000};
  const ExperimentData nn = generate_experiment(ExperimentKind::Nonneg, small, 1);
  CHECK(nn.target == kNonnegTargetSpec);
  CHECK(nn.reference == kReferenceSpec);
  for (double w : nn.target_test.weights()) CHECK(w == 1.0);
  for (double w : nn.ref_test.weights()) CHECK(w == 1.0);
  CHECK(nn.ref_train.size() == 2000);
  CHECK(nn.target_val.size() == 500);

  const ExperimentData sg = generate_experiment(ExperimentKind::Signed, small, 1);
  CHECK(sg.target == kSignedTargetSpec);
  const auto& tw = sg.target_test.weights();
  CHECK(std::find(tw.begin(), tw.end(), -1.0) != tw.end());
  CHECK(std::find(tw.begin(), tw.end(), 1.0) != tw.end());
  for (int y : sg.target_train.labels()) CHECK(y == 1);
  for (int y : sg.ref_train.labels()) CHECK(y == 0);
  const ExperimentData again = generate_experiment(ExperimentKind::Signed, small, 1);
  CHECK(again.target_train.features() == sg.target_train.features());
}

TEST_CASE("CSV round trip is lossless") {
  const auto dir = testing::scratch_dir("csv");
  WeightedDataset d = sample_weighted(kSignedTargetSpec, 500, 8, 1);
  const std::vector<double> odd{1e-300, -0.1};
  d.push_back(odd, 3.0000000000000004, 0);
  write_dataset(dir / "d.csv", d);
  const WeightedDataset back = read_csv(dir / "d.csv");
  CHECK(back.features() == d.features());
  CHECK(back.weights() == d.weights());
  CHECK(back.labels() == d.labels());
  REQUIRE(back.provenance.spec.has_value());
  CHECK(*back.provenance.spec == kSignedTargetSpec);
  CHECK(back.provenance.seed == 8);

  // External data of another dimension, no sidecar.
  WeightedDataset ext(3);
  const std::vector<double> row{1.5, -2.0, 0.25};
  ext.push_back(row, -0.7, 1);
  write_csv(dir / "ext.csv", ext);
  const WeightedDataset e = read_csv(dir / "ext.csv");
  CHECK(e.dim() == 3);
  CHECK(e.w(0) == -0.7);
  CHECK_FALSE(e.provenance.spec.has_value());

  std::ofstream(dir / "bad.csv") << "x0,x1,w,y\n1,2,abc,0\n";
  CHECK_THROWS_AS(read_csv(dir / "bad.csv"), FormatError);
  std::ofstream(dir / "hdr.csv") << "x0,x1,weight\n1,2,3\n";
  CHECK_THROWS_AS(read_csv(dir / "hdr.csv"), FormatError);
  CHECK_THROWS_AS(read_csv(dir / "missing.csv"), DataError);

  // A sidecar that disagrees with the rows is rejected.
  write_dataset(dir / "m.csv", d);
  std::ofstream(dir / "m.csv", std::ios::app) << "0,0,1,0\n";
  CHECK_THROWS_AS(read_csv(dir / "m.csv"), FormatError);
}

TEST_CASE("dataset bookkeeping") {
  WeightedDataset d(2);
  const std::vector<double> x{0.0, 1.0};
  d.push_back(x, 2.0, 0);
  d.push_back(x, -1.0, 0);
  d.push_back(x, 4.0, 1);
  const ClassStats s0 = d.class_stats(0);
  CHECK(s0.count == 2);
  CHECK(s0.sum_w == 1.0);
  CHECK(s0.sum_w2 == 5.0);
  const WeightedDataset b = class_balanced(d);
  CHECK(b.class_stats(0).sum_w == doctest::Approx(1.5));
  CHECK(b.class_stats(1).sum_w == doctest::Approx(1.5));
  CHECK_THROWS_AS(d.push_back(x, 1.0, 2), DataError);
  WeightedDataset z(2);
  z.push_back(x, 1.0, 0);
  z.push_back(x, -1.0, 0);
  CHECK_THROWS_AS(class_balanced(z), DegenerateError);
}

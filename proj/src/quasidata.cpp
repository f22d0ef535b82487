#include "rosmm/quasidata.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>

#include "rosmm/error.hpp"
#include "rosmm/rng.hpp"

namespace rosmm {

namespace {

double nonzero_uniform(Rng& rng) {
  double u = rng.uniform();
  while (u == 0.0) u = rng.uniform();
  return u;
}

// Runs fill(rng, begin, end, out) for each chunk with its own derived stream.
template <typename Fill>
WeightedDataset chunked(std::size_t n, std::uint64_t seed, const GaussianMixtureSpec& spec,
                        Fill fill) {
  WeightedDataset out(2);
  out.provenance = {spec, seed};
  out.reserve(n);
  for (std::size_t start = 0, chunk = 0; start < n; start += kSampleChunk, ++chunk) {
    Rng rng(derive_seed(seed, static_cast<std::uint64_t>(chunk)));
    const std::size_t end = std::min(n, start + kSampleChunk);
    for (std::size_t i = start; i < end; ++i) fill(rng, out);
  }
  return out;
}

}  // namespace

WeightedDataset sample_weighted(const GaussianMixtureSpec& spec, std::size_t n, std::uint64_t seed,
                                int label) {
  spec.validate();
  if (n == 0) throw ConfigError("sample count must be >= 1");
  const double p_a = spec.c / (2.0 * spec.c - 1.0);
  return chunked(n, seed, spec, [&](Rng& rng, WeightedDataset& out) {
    const double p = rng.uniform();
    const double u1 = nonzero_uniform(rng);
    const double u2 = rng.uniform();
    const double phi = 2.0 * std::numbers::pi * u2;
    const bool first = p < p_a;
    const double sigma = first ? spec.sigma1 : spec.sigma2;
    const double r = std::sqrt(-2.0 * sigma * sigma * std::log(u1));
    const double x[2] = {r * std::cos(phi), r * std::sin(phi)};
    out.push_back(x, first ? 1.0 : -1.0, label);
  });
}

WeightedDataset sample_unweighted(const GaussianMixtureSpec& spec, std::size_t n,
                                  std::uint64_t seed, int label) {
  spec.validate();
  if (n == 0) throw ConfigError("sample count must be >= 1");
  if (!is_nonnegative(spec))
    throw NonInvertibleCdfError("cannot sample " + spec.describe() +
                                " directly: its density is negative in places");
  return chunked(n, seed, spec, [&](Rng& rng, WeightedDataset& out) {
    const double z = rng.uniform();
    const double phi = 2.0 * std::numbers::pi * rng.uniform();
    const double r = radial_quantile(spec, z);
    const double x[2] = {r * std::cos(phi), r * std::sin(phi)};
    out.push_back(x, 1.0, label);
  });
}

void WeightNoiseSpec::validate() const {
  if (!(sigma_w >= 0.0) || !std::isfinite(sigma_w))
    throw ConfigError("sigma_w must be finite and >= 0");
  if (!(eta > 0.0) || !(eta < eta_max(sigma_w)))
    throw ConfigError("eta must lie in the open interval (0, sigma_w^2 / (1 + sigma_w^2))");
}

double WeightNoiseSpec::high_weight() const { return 1.0 + sigma_w * std::sqrt(eta / (1.0 - eta)); }

double WeightNoiseSpec::low_weight() const { return 1.0 - sigma_w * std::sqrt((1.0 - eta) / eta); }

WeightedDataset inject_weight_noise(const WeightedDataset& data, const WeightNoiseSpec& noise) {
  noise.validate();
  for (std::size_t i = 0; i < data.size(); ++i)
    if (data.w(i) != 1.0)
      throw DataError("weight noise expects an unweighted dataset (all weights +1)");
  WeightedDataset out = data;
  const double hi = noise.high_weight();
  const double lo = noise.low_weight();
  auto& w = out.weights();
  for (std::size_t start = 0, chunk = 0; start < w.size(); start += kSampleChunk, ++chunk) {
    Rng rng(derive_seed(noise.seed, static_cast<std::uint64_t>(chunk)));
    const std::size_t end = std::min(w.size(), start + kSampleChunk);
    for (std::size_t i = start; i < end; ++i) w[i] = rng.uniform() < noise.eta ? lo : hi;
  }
  return out;
}

GaussianMixtureSpec target_spec_for(ExperimentKind kind) {
  return kind == ExperimentKind::Nonneg ? kNonnegTargetSpec : kSignedTargetSpec;
}

WeightedDataset ExperimentData::combined_train() const {
  WeightedDataset out = ref_train;
  out.append(target_train);
  return out;
}

WeightedDataset ExperimentData::combined_val() const {
  WeightedDataset out = ref_val;
  out.append(target_val);
  return out;
}

ExperimentData generate_experiment(ExperimentKind kind, const ExperimentSizes& sizes,
                                   std::uint64_t seed) {
  if (sizes.n_train == 0 || sizes.n_val == 0 || sizes.n_test == 0)
    throw ConfigError("experiment split sizes must be positive");
  ExperimentData d;
  d.reference = kReferenceSpec;
  d.target = target_spec_for(kind);
  d.ref_train = sample_weighted(d.reference, sizes.n_train, derive_seed(seed, "ref/train"), 0);
  d.ref_val = sample_weighted(d.reference, sizes.n_val, derive_seed(seed, "ref/val"), 0);
  d.ref_test = sample_unweighted(d.reference, sizes.n_test, derive_seed(seed, "ref/test"), 0);
  d.target_train = sample_weighted(d.target, sizes.n_train, derive_seed(seed, "target/train"), 1);
  d.target_val = sample_weighted(d.target, sizes.n_val, derive_seed(seed, "target/val"), 1);
  const std::uint64_t test_seed = derive_seed(seed, "target/test");
  d.target_test = is_nonnegative(d.target) ? sample_unweighted(d.target, sizes.n_test, test_seed, 1)
                                           : sample_weighted(d.target, sizes.n_test, test_seed, 1);
  return d;
}

}  // namespace rosmm

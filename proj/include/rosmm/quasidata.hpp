#pragma once

#include <array>
#include <cstddef>
#include <cstdint>

#include "rosmm/dataset.hpp"
#include "rosmm/mixture.hpp"

namespace rosmm {

/// Samples drawn per independently seeded chunk. Chunk k uses
/// derive_seed(seed, k), so output never depends on how chunks are scheduled.
inline constexpr std::size_t kSampleChunk = 1 << 16;

/// Two-component signed sampler: component 1 with probability c / (2c - 1)
/// and weight +1, component 2 otherwise with weight -1.
WeightedDataset sample_weighted(const GaussianMixtureSpec& spec, std::size_t n,
                                std::uint64_t seed, int label = 0);

/// Inverse-transform sampler, all weights +1. Throws NonInvertibleCdfError for
/// specs whose radial density goes negative.
WeightedDataset sample_unweighted(const GaussianMixtureSpec& spec, std::size_t n,
                                  std::uint64_t seed, int label = 0);

/// Weight law with P(W < 0) = eta and Var(W) = sigma_w^2, E[W] = 1:
///   W = 1 + sigma_w / sqrt(eta (1 - eta)) (eta - Bern(eta)).
struct WeightNoiseSpec {
  double eta = 0.25;
  double sigma_w = 1.0;
  std::uint64_t seed = 0;

  /// Upper end of the admissible open interval for eta.
  static double eta_max(double sigma_w) { return sigma_w * sigma_w / (1.0 + sigma_w * sigma_w); }
  void validate() const;
  /// Weight assigned with probability 1 - eta.
  double high_weight() const;
  /// Weight assigned with probability eta; negative on the admissible interval.
  double low_weight() const;
};

/// Replaces every weight independently of position. Requires all input
/// weights to be +1.
WeightedDataset inject_weight_noise(const WeightedDataset& data, const WeightNoiseSpec& noise);

enum class ExperimentKind { Nonneg, Signed };

struct ExperimentSizes {
  std::size_t n_train = 2'000'000;
  std::size_t n_val = 600'000;
  std::size_t n_test = 1'400'000;
};

/// Reference (y = 0) and target (y = 1) splits of the toy problem.
struct ExperimentData {
  GaussianMixtureSpec reference;
  GaussianMixtureSpec target;
  WeightedDataset ref_train, ref_val, ref_test;
  WeightedDataset target_train, target_val, target_test;

  /// Both classes of a split in one dataset (reference rows first).
  WeightedDataset combined_train() const;
  WeightedDataset combined_val() const;
};

GaussianMixtureSpec target_spec_for(ExperimentKind kind);

/// Train/val come from the signed sampler; test sets come from the
/// inverse-transform sampler when the spec allows it (reference always, target
/// in the nonneg case) and from the signed sampler otherwise.
ExperimentData generate_experiment(ExperimentKind kind, const ExperimentSizes& sizes,
                                   std::uint64_t seed);

}  // namespace rosmm

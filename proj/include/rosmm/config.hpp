#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include <json.hpp>

#include "rosmm/losses.hpp"
#include "rosmm/mixture.hpp"
#include "rosmm/nn.hpp"
#include "rosmm/quasidata.hpp"
#include "rosmm/rosmm_model.hpp"

namespace rosmm {

struct DataSection {
  /// "nonneg", "signed" or "external".
  std::string kind = "signed";
  GaussianMixtureSpec reference = kReferenceSpec;
  /// Target spec; defaults follow `kind`.
  GaussianMixtureSpec target = kSignedTargetSpec;
  ExperimentSizes sizes{};
  std::uint64_t seed = 1;
};

struct TrainSection {
  double lr = 1e-4;
  std::size_t batch_size = 256;
  int patience = 20;
  std::size_t epoch_cap = 100000;
  int max_epochs = 10000;
  /// Hidden layer widths of the baseline classifier.
  std::vector<int> hidden{64, 64};
  /// Hidden layer widths of each subratio classifier.
  std::vector<int> subratio_hidden{32, 32};
  std::uint64_t seed = 1;
};

struct TuneSection {
  double lr = 1e-3;
  double subratio_lr = 1e-4;
  std::size_t batch_size = 512;
  int patience = 10;
  std::size_t epoch_cap = 100000;
  int max_epochs = 2000;
};

struct EvalSection {
  std::size_t bins = 50;
  double r_min = 0.0;
  double r_max = 10.0;
  std::vector<std::string> features{"x", "y", "r"};
};

struct SweepSection {
  std::vector<double> sigma_w{1.0, 2.0, 3.0, 4.0, 5.0};
  std::size_t eta_count = 3;
  double eta_min = 0.02;
  /// Unweighted samples per class before the train/val/test split.
  std::size_t n = 200000;
  double train_fraction = 0.55;
  double val_fraction = 0.15;
  std::uint64_t seed = 1;
};

struct RunConfig {
  DataSection data;
  TrainSection train;
  PareParams pare;
  TuneSection tune;
  EvalSection eval;
  SweepSection sweep;

  void validate() const;
  TrainConfig mlp_train_config() const;
  SubratioTraining subratio_training(std::size_t input_dim) const;
  TuneConfig tune_config() const;
  ExperimentKind experiment_kind() const;
};

/// Sectioned INI text. Unknown sections or keys are a ConfigError.
RunConfig parse_config(const std::string& text);
RunConfig load_config(const std::filesystem::path& path);
/// Applies one `section.key=value` assignment.
void set_config_value(RunConfig& config, const std::string& dotted_key, const std::string& value);

nlohmann::json config_to_json(const RunConfig& config);

/// Uniform eta grid on [eta_min, eta_max(sigma_w)], both ends included. The
/// upper end lies outside the open admissible interval, so it is pulled in by
/// a relative 1e-6.
std::vector<double> eta_grid(double sigma_w, double eta_min, std::size_t count);

}  // namespace rosmm

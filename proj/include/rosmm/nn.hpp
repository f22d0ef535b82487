#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <functional>
#include <span>
#include <vector>

#include <Eigen/Core>
#include <json.hpp>

#include "rosmm/dataset.hpp"
#include "rosmm/losses.hpp"

namespace rosmm {

/// Per-layer weight matrices (fan_out x fan_in) and bias vectors. Used both
/// for model parameters and for gradients / optimizer moments of the same shape.
struct ParamSet {
  std::vector<Eigen::MatrixXd> weights;
  std::vector<Eigen::VectorXd> biases;

  static ParamSet zeros_like(const ParamSet& other);
  std::size_t count() const;
  void set_zero();
  bool all_finite() const;
  bool same_shape(const ParamSet& other) const;
  ParamSet& operator+=(const ParamSet& other);
  ParamSet& operator*=(double k);

  /// Layer-major, row-major within each weight matrix, weights before bias.
  std::vector<double> flatten() const;
  void assign_flat(std::span<const double> flat);
  bool operator==(const ParamSet& other) const;
};

/// Fully connected ReLU network with a single logistic-sigmoid output.
struct MlpModel {
  std::vector<int> layer_sizes;
  ParamSet params;
  std::uint64_t seed = 0;
  LossKind loss = LossKind::Bce;

  int input_dim() const { return layer_sizes.front(); }
  std::size_t num_layers() const { return params.weights.size(); }
  std::size_t parameter_count() const { return params.count(); }
};

/// Weights uniform on [-1/sqrt(fan_in), 1/sqrt(fan_in)], biases zero.
MlpModel mlp_init(const std::vector<int>& layer_sizes, std::uint64_t seed);

double sigmoid(double z);

double forward(const MlpModel& model, std::span<const double> x);
/// Column-wise evaluation of a dim x n input block.
Eigen::RowVectorXd forward_batch(const MlpModel& model,
                                 const Eigen::Ref<const Eigen::MatrixXd>& inputs);
/// Evaluates every row of a dataset, in blocks.
std::vector<double> predict(const MlpModel& model, const WeightedDataset& data);

/// Layer inputs kept for the backward pass. inputs[l] feeds layer l.
struct ForwardCache {
  std::vector<Eigen::MatrixXd> inputs;
  Eigen::RowVectorXd output;
};

void forward_cached(const MlpModel& model, const Eigen::Ref<const Eigen::MatrixXd>& inputs,
                    ForwardCache& cache);
/// Adds to `grad` the parameter gradient given d loss / d logit for each column.
void backward(const MlpModel& model, const ForwardCache& cache,
              const Eigen::Ref<const Eigen::RowVectorXd>& dlogit, ParamSet& grad);

/// Gradient of (1/N) sum_i loss(s(x_i), y_i, w_i) over the batch.
ParamSet grad(const MlpModel& model, const WeightedDataset& batch, const LossSpec& loss);
/// (1/N) sum_i loss(s(x_i), y_i, w_i).
double mean_loss(const MlpModel& model, const WeightedDataset& data, const LossSpec& loss);

struct AdamState {
  ParamSet m;
  ParamSet v;
  long step = 0;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;
};

AdamState adam_init(const ParamSet& params);
/// Bias-corrected Adam update of `params` in place.
void adam_step(ParamSet& params, AdamState& state, const ParamSet& gradient, double lr);

struct TrainConfig {
  double learning_rate = 1e-4;
  std::size_t batch_size = 256;
  int patience = 20;
  std::size_t epoch_cap = 100000;
  std::uint64_t seed = 0;
  int max_epochs = 10000;
  /// Called after every epoch with (epoch, train loss, val loss).
  std::function<void(int, double, double)> on_epoch;

  void validate() const;
};

/// Epoch numbers are 1-based.
struct LossCurve {
  std::vector<double> train;
  std::vector<double> val;
  int best_epoch = 0;
  int stopped_epoch = 0;
};

/// Stops once the validation loss has stayed above the running minimum for
/// `patience` consecutive epochs.
class EarlyStopping {
 public:
  explicit EarlyStopping(int patience) : patience_(patience) {}

  /// Records the next epoch's loss; returns true when it is a new minimum.
  bool update(double val_loss);
  bool should_stop() const { return bad_epochs_ >= patience_; }
  int epoch() const { return epoch_; }
  int best_epoch() const { return best_epoch_; }
  double best_loss() const { return best_; }

 private:
  int patience_;
  int epoch_ = 0;
  int best_epoch_ = 0;
  int bad_epochs_ = 0;
  double best_ = 0.0;
};

struct TrainResult {
  MlpModel model;
  LossCurve curve;
};

/// Mini-batch Adam with per-epoch reshuffling. An epoch visits the first
/// min(|train|, epoch_cap) entries of a fresh permutation. Returns the
/// parameters of the best validation epoch.
TrainResult train(MlpModel model, const WeightedDataset& train_set,
                  const WeightedDataset& val_set, const TrainConfig& config, const LossSpec& loss);

nlohmann::json mlp_to_json(const MlpModel& model);
MlpModel mlp_from_json(const nlohmann::json& j);
void save_mlp(const std::filesystem::path& path, const MlpModel& model);
MlpModel load_mlp(const std::filesystem::path& path);

/// Copies columns `idx` of the dataset's feature matrix into `out`.
void gather_columns(const WeightedDataset& data, std::span<const std::size_t> idx,
                    Eigen::MatrixXd& out);

}  // namespace rosmm

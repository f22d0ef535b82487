#pragma once

#include <array>
#include <cstdint>
#include <filesystem>
#include <optional>
#include <string_view>
#include <vector>

#include <json.hpp>

#include "rosmm/dataset.hpp"
#include "rosmm/losses.hpp"
#include "rosmm/nn.hpp"

namespace rosmm {

/// Sign-pair index (k0, k1): k0 is the sign partition of class 0, k1 of class 1.
enum class Subratio { PP = 0, PN = 1, NP = 2, NN = 3 };

inline constexpr std::array<Subratio, 4> kAllSubratios{Subratio::PP, Subratio::PN, Subratio::NP,
                                                       Subratio::NN};

std::string_view key_of(Subratio k);  // "pp", "pn", "np", "nn"
bool class0_negative(Subratio k);
bool class1_negative(Subratio k);

/// Per-class split by weight sign. Negative rows carry |w|.
struct SignPartition {
  std::array<WeightedDataset, 2> positive;
  std::array<WeightedDataset, 2> negative;

  const WeightedDataset& side(int y, bool negative_side) const {
    return negative_side ? negative[y] : positive[y];
  }
  /// A class is degenerate when it has no negative-weight rows.
  bool degenerate(int y) const { return negative[y].empty(); }
};

SignPartition partition(const WeightedDataset& data);

/// Subratios needed for a partition: class-y negative sides only when class y
/// has negative weights.
std::vector<Subratio> required_subratios(const SignPartition& p);

struct SubratioTraining {
  std::vector<int> arch{2, 32, 32, 1};
  TrainConfig train{};
};

/// Builds the balanced pair dataset for one subratio: both sides subsampled
/// without replacement to N = min(sizes), weights divided by their side mean,
/// class-0 side labelled 0 and class-1 side labelled 1.
WeightedDataset subratio_pair_dataset(const SignPartition& p, Subratio k, std::uint64_t seed);

struct SubratioResult {
  Subratio key;
  MlpModel model;
  LossCurve curve;
};

/// Trains one BCE classifier per required pair. Seeds derive from `seed` and
/// the pair key; trainings are independent and run on up to `threads` workers.
std::vector<SubratioResult> train_subratios(const SignPartition& train_part,
                                            const SignPartition& val_part,
                                            const SubratioTraining& config, std::uint64_t seed,
                                            unsigned threads = 1);

/// Inverse subratio p_{k0}(x | Y=0) / p_{k1}(x | Y=1) = (1 - s) / s.
double subratio_value(const MlpModel& classifier, std::span<const double> x);
double inverse_ratio_from_output(double s);

/// Inverse subratio values at one point; absent entries belong to degenerate classes.
using InverseSubratios = std::array<std::optional<double>, 4>;

/// Mixture assembly of the signed likelihood ratio
///   [c0/c1 inv_pp + (1-c0)/c1 inv_np]^-1 + [c0/(1-c1) inv_pn + (1-c0)/(1-c1) inv_nn]^-1,
/// dropping every term carrying a (1 - c_y) factor when c_y == 1 exactly.
double assemble_ratio(double c0, double c1, const InverseSubratios& inv);

enum class RosmmVariant { Plain, CoefTuned, FullTuned };
std::string_view to_string(RosmmVariant v);
RosmmVariant variant_from_string(std::string_view s);

struct RosmmModel {
  std::array<std::optional<MlpModel>, 4> subratios;
  double c0 = 1.0;
  double c1 = 1.0;
  PareParams pare{};
  RosmmVariant variant = RosmmVariant::Plain;

  const std::optional<MlpModel>& at(Subratio k) const { return subratios[static_cast<int>(k)]; }
  std::optional<MlpModel>& at(Subratio k) { return subratios[static_cast<int>(k)]; }
  /// Class 0 (1) is degenerate when both of its negative-side subratios are absent.
  bool degenerate(int y) const;
};

/// c_y = sum_{w >= 0} w / sum w per class; a class without rows gets 1.
std::array<double, 2> estimate_coefficients(const WeightedDataset& data);

RosmmModel assemble_model(std::vector<SubratioResult> subratios, std::array<double, 2> coefficients,
                          const PareParams& pare);

double rosmm_ratio(const RosmmModel& model, std::span<const double> x);
/// Inverse subratio values for every row, indexed [subratio][row]; absent
/// subratios give empty vectors.
std::array<std::vector<double>, 4> inverse_subratio_table(const RosmmModel& model,
                                                          const WeightedDataset& data);
std::vector<double> rosmm_ratios(const RosmmModel& model, const WeightedDataset& data);

struct TuneConfig {
  double learning_rate = 1e-3;
  /// Learning rate for subratio parameters during full tuning.
  double subratio_learning_rate = 1e-4;
  std::size_t batch_size = 512;
  int patience = 10;
  std::size_t epoch_cap = 100000;
  int max_epochs = 2000;
  std::uint64_t seed = 0;
  /// Failing batches (pole hits) tolerated, as a fraction of all batches.
  double max_failed_fraction = 0.01;
  std::function<void(int, double, double)> on_epoch;

  void validate() const;
};

struct TuneResult {
  RosmmModel model;
  LossCurve curve;
  /// Validation loss before the first update.
  double initial_val_loss = 0.0;
  std::size_t failed_batches = 0;
  std::size_t total_batches = 0;
};

enum class CoefficientObjective { Pare, MseRatioTrick };

/// Mean per-sample objective at coefficients (c0, c1) with frozen subratios:
/// PARE uses s = (t0 + t1 r) / (t0^2 + t1^2 r) and w (1 - s t_y)^2; the MSE
/// variant uses s = r / (1 + r) and w (s - y)^2. Pole hits contribute
/// kPoleLossClamp in magnitude. `data` should be class balanced.
double coefficient_objective(const std::array<std::vector<double>, 4>& inverse_table,
                             const WeightedDataset& data, double c0, double c1,
                             const PareParams& pare, CoefficientObjective objective);

/// Adam on (c0, c1) only, minimizing the PARE objective; subratios frozen.
/// Degenerate classes keep c_y = 1.
TuneResult tune_coefficients(const RosmmModel& model, const WeightedDataset& train_set,
                             const WeightedDataset& val_set, const TuneConfig& config);

/// Same objective with gradients flowing into the subratio networks too.
TuneResult tune_full(const RosmmModel& model, const WeightedDataset& train_set,
                     const WeightedDataset& val_set, const TuneConfig& config);

/// Per-sample PARE loss and its gradient with respect to every parameter of
/// the assembled model, used by full tuning and by gradient checks.
struct RosmmGradient {
  std::array<std::optional<ParamSet>, 4> subratios;
  double c0 = 0.0;
  double c1 = 0.0;
};
/// Mean PARE loss over `batch` and its gradient. Throws PoleError if any
/// sample falls in the pole band or on a degenerate assembly point.
double rosmm_pare_loss_and_grad(const RosmmModel& model, const WeightedDataset& batch,
                                RosmmGradient* gradient);

nlohmann::json rosmm_to_json(const RosmmModel& model);
RosmmModel rosmm_from_json(const nlohmann::json& j);
void save_rosmm(const std::filesystem::path& path, const RosmmModel& model);
RosmmModel load_rosmm(const std::filesystem::path& path);

}  // namespace rosmm

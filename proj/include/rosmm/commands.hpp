#pragma once

#include <cstddef>
#include <filesystem>
#include <iosfwd>
#include <optional>
#include <string>
#include <vector>

#include "rosmm/config.hpp"
#include "rosmm/dataset.hpp"
#include "rosmm/eval.hpp"
#include "rosmm/rosmm_model.hpp"

namespace rosmm {

/// File names of the six splits inside a data directory.
struct SplitFiles {
  static std::filesystem::path path(const std::filesystem::path& dir, const std::string& cls,
                                    const std::string& split) {
    return dir / (cls + "_" + split + ".csv");
  }
};

/// Worker count from ROSMM_THREADS (default 1, minimum 1).
unsigned worker_threads();

/// Writes the effective configuration and command line next to outputs.
void write_run_json(const std::filesystem::path& out_dir, const std::string& command,
                    const RunConfig& config, const nlohmann::json& extra = nlohmann::json::object());

/// generate: six CSV files plus sidecars.
void cmd_generate(const RunConfig& config, const std::filesystem::path& out_dir);

enum class ModelKind { Mlp, Rosmm, RosmmC, RosmmR };
ModelKind model_kind_from_string(const std::string& s);
std::string to_string(ModelKind kind);

/// Reference rows (y = 0) followed by target rows (y = 1) of one split.
WeightedDataset load_split(const std::filesystem::path& data_dir, const std::string& split);

struct TrainedRosmm {
  RosmmModel plain;
  std::vector<SubratioResult> subratios;
  std::optional<TuneResult> coef;
  std::optional<TuneResult> full;

  /// The model of the requested flavour.
  const RosmmModel& model(ModelKind kind) const;
};

/// Subratios, assembly, then (if asked) coefficient and full tuning.
/// `train_set` and `val_set` hold raw weights of both classes.
TrainedRosmm train_rosmm(const RunConfig& config, const WeightedDataset& train_set,
                         const WeightedDataset& val_set, ModelKind up_to, unsigned threads,
                         std::ostream* log = nullptr);

/// Weighted-BCE baseline on class-balanced data.
TrainResult train_baseline(const RunConfig& config, const WeightedDataset& train_set,
                           const WeightedDataset& val_set, std::ostream* log = nullptr);

/// train: checkpoint (model.json) and loss curves (loss_curve.csv).
void cmd_train(const RunConfig& config, const std::filesystem::path& data_dir, ModelKind kind,
               const std::filesystem::path& out_dir, unsigned threads);

/// Per-row ratios of an MLP (ratio trick) or RoSMM checkpoint.
std::vector<double> checkpoint_ratios(const nlohmann::json& checkpoint, const WeightedDataset& data);

struct EvaluateResult {
  std::string model;
  std::vector<ClosureReport> reports;
};

/// evaluate: one JSON/CSV report per feature plus summary.csv.
EvaluateResult cmd_evaluate(const RunConfig& config, const std::filesystem::path& data_dir,
                            const std::optional<std::filesystem::path>& model_path, bool oracle,
                            const std::vector<std::string>& features,
                            const std::filesystem::path& out_dir);

struct SweepRow {
  double sigma_w = 0.0;
  double eta = 0.0;
  std::string model;
  double vlrc_auc = 0.0;
  double tsallis_d2 = 0.0;
  double chi2 = 0.0;
  std::string status = "ok";
};

struct SweepSummary {
  std::vector<SweepRow> rows;
  /// Pearson correlation of MLP VLRC AUC with sigma_w.
  double mlp_vlrc_correlation = 0.0;
  /// Least-squares slopes of per-sigma_w median D vs sigma_w.
  double mlp_median_d_slope = 0.0;
  double rosmm_median_d_slope = 0.0;
  std::size_t points = 0;
  std::size_t failed_points = 0;
};

SweepSummary summarize_sweep(std::vector<SweepRow> rows);

/// sweep: sweep.csv and sweep_summary.json. Throws NumericFailure when fewer
/// than 90% of the points succeed.
SweepSummary cmd_sweep(const RunConfig& config, const std::filesystem::path& out_dir,
                       unsigned threads, std::ostream* log = nullptr);

/// oracle: answers queries of the forms
///   density {reference|target} X Y      ratio X Y
///   cdf {reference|target} R            quantile {reference|target} Z
///   nonneg {reference|target}
/// writing "<query> = <value>" lines.
void cmd_oracle(const RunConfig& config, const std::vector<std::string>& queries, std::ostream& out);

double pearson(const std::vector<double>& x, const std::vector<double>& y);
double ls_slope(const std::vector<double>& x, const std::vector<double>& y);

}  // namespace rosmm

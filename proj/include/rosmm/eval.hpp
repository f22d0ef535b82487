#pragma once

#include <cstddef>
#include <filesystem>
#include <functional>
#include <span>
#include <string>
#include <vector>

#include <json.hpp>

#include "rosmm/dataset.hpp"
#include "rosmm/losses.hpp"
#include "rosmm/nn.hpp"

namespace rosmm {

/// Ratio evaluated on one feature row.
using RatioFn = std::function<double(std::span<const double>)>;
/// Scalar feature of one row (a column, the radius, ...).
using FeatureFn = std::function<double(std::span<const double>)>;

/// w_i -> w_i r(x_i). Throws NumericFailure naming the first non-finite ratio.
WeightedDataset reweight(const WeightedDataset& data, const RatioFn& ratio);
/// Same, with ratios already evaluated per row.
WeightedDataset reweight(const WeightedDataset& data, std::span<const double> ratios);

struct Estimate {
  double value = 0.0;
  double std_error = 0.0;
};

/// Self-normalized sum w f / sum w with a delta-method standard error.
Estimate weighted_expectation(const WeightedDataset& data, const FeatureFn& f);

struct WeightedHistogram {
  std::vector<double> edges;
  std::vector<double> sum_w;
  std::vector<double> sum_w2;
  /// Raw row count per bin.
  std::vector<std::size_t> entries;
  double total_w = 0.0;
  double underflow = 0.0;
  double overflow = 0.0;

  std::size_t bins() const { return sum_w.size(); }
  WeightedHistogram& operator+=(const WeightedHistogram& other);
};

std::vector<double> uniform_edges(std::size_t bins, double lo, double hi);

/// Half-open bins [e_i, e_{i+1}); the last edge is exclusive too.
WeightedHistogram histogram(const WeightedDataset& data, const FeatureFn& feature,
                            const std::vector<double>& edges);

/// Bins with fewer rows than this on either side are left out of chi^2: the
/// sum-of-squared-weights variance estimate is unreliable there.
inline constexpr std::size_t kMinBinEntries = 10;

/// Variance-normalized chi^2 per usable bin between unit-normalized histograms.
double chi2_score(const WeightedHistogram& a, const WeightedHistogram& b);

/// Tsallis relative entropy of order 2, D(p || q) = sum p^2 / q - 1, on
/// unit-normalized bin masses with |q| floored at kTsallisFloor.
inline constexpr double kTsallisFloor = 1e-9;
double tsallis_d2(const WeightedHistogram& p, const WeightedHistogram& q);
double tsallis_d2(std::span<const double> p, std::span<const double> q);

/// Area between the validation curve and its value at the stopping epoch.
double vlrc_auc(const LossCurve& curve);

/// (gamma^2 / N_batch) (1/N) sum_i (w_i^2 - w_i) g_i^2 per parameter, with g_i
/// the unweighted per-sample loss gradient. Flat layout as ParamSet::flatten.
std::vector<double> grad_variance_excess(const WeightedDataset& data, const MlpModel& model,
                                         const LossSpec& loss, double learning_rate,
                                         std::size_t batch_size);

/// Feature selector: "x", "y", "r" on 2D data, or a column name or index.
struct Feature {
  std::string name;
  FeatureFn fn;
};
Feature resolve_feature(const WeightedDataset& data, const std::string& name);

struct ClosureReport {
  std::string feature;
  WeightedHistogram target;
  WeightedHistogram reweighted;
  double chi2 = 0.0;
  double tsallis_d2 = 0.0;
  std::size_t n_bins_used = 0;
  /// Bins where the target has negative mass but the reweighted reference
  /// carries (almost) none.
  std::vector<std::size_t> zeroed_negative_bins;
};

ClosureReport closure_report(const WeightedDataset& target_test, const WeightedDataset& ref_test,
                             std::span<const double> ratios, const Feature& feature,
                             const std::vector<double>& edges);

/// Default binning: 50 bins, [0, 10] for the radius, [-10, 10] for x and y,
/// and the target's [min, max] for other columns.
std::vector<double> default_edges(const WeightedDataset& target, const std::string& feature,
                                  std::size_t bins = 50);

nlohmann::json report_to_json(const ClosureReport& report);
/// bin_lo,bin_hi,target_w,target_err,reweighted_w,reweighted_err
void write_report_csv(const std::filesystem::path& path, const ClosureReport& report);

}  // namespace rosmm

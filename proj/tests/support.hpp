#pragma once

#include <cmath>
#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <functional>
#include <random>
#include <string>
#include <vector>

#include "rosmm/dataset.hpp"
#include "rosmm/nn.hpp"

namespace testing {

/// Composite Simpson rule with `panels` (even) sub-intervals.
inline double simpson(const std::function<double(double)>& f, double a, double b,
                      std::size_t panels) {
  if (panels % 2) ++panels;
  const double h = (b - a) / static_cast<double>(panels);
  double s = f(a) + f(b);
  for (std::size_t i = 1; i < panels; ++i) s += (i % 2 ? 4.0 : 2.0) * f(a + h * static_cast<double>(i));
  return s * h / 3.0;
}

/// Central differences of `f` with respect to each entry of `x`.
inline std::vector<double> central_diff(const std::function<double(const std::vector<double>&)>& f,
                                        std::vector<double> x, double h) {
  std::vector<double> g(x.size());
  for (std::size_t i = 0; i < x.size(); ++i) {
    const double keep = x[i];
    x[i] = keep + h;
    const double up = f(x);
    x[i] = keep - h;
    const double down = f(x);
    x[i] = keep;
    g[i] = (up - down) / (2.0 * h);
  }
  return g;
}

/// Richardson-extrapolated central differences, (4 D(h/2) - D(h)) / 3.
inline std::vector<double> central_diff_richardson(
    const std::function<double(const std::vector<double>&)>& f, const std::vector<double>& x,
    double h) {
  const auto coarse = central_diff(f, x, h);
  auto fine = central_diff(f, x, h / 2);
  for (std::size_t i = 0; i < fine.size(); ++i) fine[i] = (4.0 * fine[i] - coarse[i]) / 3.0;
  return fine;
}

/// max |a - b| / max(|a|, |b|, floor) over entries.
inline double max_rel_error(const std::vector<double>& a, const std::vector<double>& b,
                            double floor = 1e-6) {
  double worst = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    const double scale = std::max({std::abs(a[i]), std::abs(b[i]), floor});
    worst = std::max(worst, std::abs(a[i] - b[i]) / scale);
  }
  return worst;
}

/// Random batch with standard-normal features, mixed labels and weights
/// uniform on [-2, 2].
inline rosmm::WeightedDataset random_batch(std::size_t n, std::size_t dim, std::mt19937_64& gen) {
  std::normal_distribution<double> nd;
  std::uniform_real_distribution<double> wd(-2.0, 2.0);
  rosmm::WeightedDataset d(dim);
  std::vector<double> x(dim);
  for (std::size_t i = 0; i < n; ++i) {
    for (auto& v : x) v = nd(gen);
    d.push_back(x, wd(gen), static_cast<int>(i % 2));
  }
  return d;
}

/// Smallest |hidden pre-activation| over a batch. Central differences are only
/// a valid oracle when no ReLU kink lies within the step.
inline double relu_margin(const rosmm::MlpModel& m, const rosmm::WeightedDataset& batch) {
  double margin = INFINITY;
  Eigen::MatrixXd a = batch.feature_matrix();
  for (std::size_t l = 0; l + 1 < m.num_layers(); ++l) {
    Eigen::MatrixXd z = (m.params.weights[l] * a).colwise() + m.params.biases[l];
    margin = std::min(margin, z.cwiseAbs().minCoeff());
    a = z.cwiseMax(0.0);
  }
  return margin;
}

/// Two-sided Kolmogorov-Smirnov critical value at alpha = 0.01.
inline double ks_critical_001(std::size_t n) { return 1.6276 / std::sqrt(static_cast<double>(n)); }

/// Fresh scratch directory under the system temp dir.
inline std::filesystem::path scratch_dir(const std::string& name) {
  auto p = std::filesystem::temp_directory_path() / ("rosmm_test_" + name);
  std::filesystem::remove_all(p);
  std::filesystem::create_directories(p);
  return p;
}

}  // namespace testing

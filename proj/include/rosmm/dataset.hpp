#pragma once

#include <array>
#include <cstddef>
#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include <Eigen/Core>

#include "rosmm/mixture.hpp"

namespace rosmm {

/// Non-owning view of one row of a WeightedDataset.
struct WeightedSample {
  std::span<const double> x;
  double w;
  int y;
};

struct ClassStats {
  std::size_t count = 0;
  double sum_w = 0.0;
  double sum_w2 = 0.0;
};

/// Where a dataset came from. A missing spec means external data.
struct Provenance {
  std::optional<GaussianMixtureSpec> spec;
  std::uint64_t seed = 0;
};

/// Sample-major feature storage: sample i occupies x[i*dim, (i+1)*dim).
/// Per-class counts and weight sums are derived from the rows on demand, so
/// they cannot drift from the data.
class WeightedDataset {
 public:
  WeightedDataset() = default;
  explicit WeightedDataset(std::size_t dim);

  std::size_t dim() const { return dim_; }
  std::size_t size() const { return w_.size(); }
  bool empty() const { return w_.empty(); }

  void reserve(std::size_t n);
  void push_back(std::span<const double> x, double w, int y);
  void append(const WeightedDataset& other);

  WeightedSample operator[](std::size_t i) const;
  std::span<const double> x(std::size_t i) const { return {x_.data() + i * dim_, dim_}; }
  double w(std::size_t i) const { return w_[i]; }
  int y(std::size_t i) const { return y_[i]; }

  const std::vector<double>& features() const { return x_; }
  const std::vector<double>& weights() const { return w_; }
  std::vector<double>& weights() { return w_; }
  const std::vector<int>& labels() const { return y_; }
  std::vector<int>& labels() { return y_; }

  /// dim x n view; column i is sample i.
  Eigen::Map<const Eigen::MatrixXd> feature_matrix() const;

  WeightedDataset subset(std::span<const std::size_t> indices) const;
  /// Rows with label y.
  WeightedDataset select_class(int y) const;

  ClassStats class_stats(int y) const;
  double sum_w() const;

  Provenance provenance;
  /// Column names; defaults to x0..x{d-1}.
  std::vector<std::string> feature_names;

 private:
  std::size_t dim_ = 0;
  std::vector<double> x_;
  std::vector<double> w_;
  std::vector<int> y_;
};

/// Rescales weights per class so each present class carries total weight
/// n_total / n_classes
/// (class balance, and E[W | Y] = 1 when classes have equal size).
/// Throws DegenerateError if a present class has zero weight sum.
WeightedDataset class_balanced(const WeightedDataset& data);

}  // namespace rosmm

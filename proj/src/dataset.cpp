#include "rosmm/dataset.hpp"

#include <cmath>

#include "rosmm/error.hpp"

namespace rosmm {

WeightedDataset::WeightedDataset(std::size_t dim) : dim_(dim) {
  if (dim == 0) throw ConfigError("dataset dimension must be >= 1");
  feature_names.reserve(dim);
  for (std::size_t j = 0; j < dim; ++j) feature_names.push_back("x" + std::to_string(j));
}

void WeightedDataset::reserve(std::size_t n) {
  x_.reserve(n * dim_);
  w_.reserve(n);
  y_.reserve(n);
}

void WeightedDataset::push_back(std::span<const double> x, double w, int y) {
  if (x.size() != dim_)
    throw DataError("sample has " + std::to_string(x.size()) + " features, dataset expects " +
                    std::to_string(dim_));
  if (y != 0 && y != 1) throw DataError("class label must be 0 or 1");
  x_.insert(x_.end(), x.begin(), x.end());
  w_.push_back(w);
  y_.push_back(y);
}

void WeightedDataset::append(const WeightedDataset& other) {
  if (other.empty()) return;
  if (dim_ == 0 && empty()) {
    *this = WeightedDataset(other.dim_);
    feature_names = other.feature_names;
    provenance = other.provenance;
  }
  if (other.dim_ != dim_) throw DataError("cannot append datasets of different dimension");
  x_.insert(x_.end(), other.x_.begin(), other.x_.end());
  w_.insert(w_.end(), other.w_.begin(), other.w_.end());
  y_.insert(y_.end(), other.y_.begin(), other.y_.end());
}

WeightedSample WeightedDataset::operator[](std::size_t i) const { return {x(i), w_[i], y_[i]}; }

Eigen::Map<const Eigen::MatrixXd> WeightedDataset::feature_matrix() const {
  return {x_.data(), static_cast<Eigen::Index>(dim_), static_cast<Eigen::Index>(size())};
}

WeightedDataset WeightedDataset::subset(std::span<const std::size_t> indices) const {
  WeightedDataset out(dim_);
  out.feature_names = feature_names;
  out.provenance = provenance;
  out.reserve(indices.size());
  for (std::size_t i : indices) out.push_back(x(i), w_[i], y_[i]);
  return out;
}

WeightedDataset WeightedDataset::select_class(int y) const {
  std::vector<std::size_t> idx;
  for (std::size_t i = 0; i < size(); ++i)
    if (y_[i] == y) idx.push_back(i);
  return subset(idx);
}

ClassStats WeightedDataset::class_stats(int y) const {
  ClassStats s;
  for (std::size_t i = 0; i < size(); ++i) {
    if (y_[i] != y) continue;
    ++s.count;
    s.sum_w += w_[i];
    s.sum_w2 += w_[i] * w_[i];
  }
  return s;
}

double WeightedDataset::sum_w() const {
  double s = 0.0;
  for (double w : w_) s += w;
  return s;
}

WeightedDataset class_balanced(const WeightedDataset& data) {
  WeightedDataset out = data;
  const std::array<ClassStats, 2> stats{data.class_stats(0), data.class_stats(1)};
  const int present = (stats[0].count > 0) + (stats[1].count > 0);
  const double share = present == 0 ? 0.0 : static_cast<double>(data.size()) / present;
  std::array<double, 2> scale{1.0, 1.0};
  for (int y = 0; y < 2; ++y) {
    const ClassStats& s = stats[y];
    if (s.count == 0) continue;
    if (s.sum_w == 0.0 || !std::isfinite(s.sum_w))
      throw DegenerateError("class " + std::to_string(y) + " has zero total weight");
    scale[y] = share / s.sum_w;
  }
  for (std::size_t i = 0; i < out.size(); ++i) out.weights()[i] *= scale[out.y(i)];
  return out;
}

}  // namespace rosmm

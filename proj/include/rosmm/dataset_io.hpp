#pragma once

#include <filesystem>
#include <string>

#include <json.hpp>

#include "rosmm/dataset.hpp"

namespace rosmm {

/// Fixed-width round-trip formatting used for every float written to CSV.
std::string format_double(double v);

/// CSV layout: header `<feature names...>,w,y`, one sample per row, floats with
/// 17 significant digits, y as 0/1.
void write_csv(const std::filesystem::path& path, const WeightedDataset& data);
/// Reads any feature dimension. The last two columns must be `w` and `y`. If a
/// `<stem>.meta.json` sidecar exists, it is checked against the rows and its
/// provenance is attached; a mismatch is a FormatError.
WeightedDataset read_csv(const std::filesystem::path& path);

nlohmann::json meta_json(const WeightedDataset& data);
std::filesystem::path meta_path_for(const std::filesystem::path& csv_path);
/// Writes both the CSV and its sidecar.
void write_dataset(const std::filesystem::path& csv_path, const WeightedDataset& data);

nlohmann::json spec_to_json(const GaussianMixtureSpec& spec);
GaussianMixtureSpec spec_from_json(const nlohmann::json& j);

}  // namespace rosmm

#include "rosmm/dataset_io.hpp"

#include <charconv>
#include <cstdio>
#include <fstream>
#include <sstream>
#include <string_view>

#include "rosmm/error.hpp"

namespace rosmm {

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

std::vector<std::string_view> split_commas(std::string_view line) {
  std::vector<std::string_view> out;
  std::size_t start = 0;
  while (true) {
    const std::size_t pos = line.find(',', start);
    out.push_back(line.substr(start, pos == std::string_view::npos ? pos : pos - start));
    if (pos == std::string_view::npos) break;
    start = pos + 1;
  }
  return out;
}

double parse_double(std::string_view field, std::size_t line_no) {
  while (!field.empty() && field.front() == ' ') field.remove_prefix(1);
  while (!field.empty() && (field.back() == ' ' || field.back() == '\r')) field.remove_suffix(1);
  double v = 0.0;
  auto [ptr, ec] = std::from_chars(field.data(), field.data() + field.size(), v);
  if (ec != std::errc() || ptr != field.data() + field.size() || !std::isfinite(v))
    throw FormatError("line " + std::to_string(line_no) + ": bad number '" + std::string(field) +
                      "'");
  return v;
}

std::string trim(std::string_view s) {
  while (!s.empty() && (s.front() == ' ' || s.front() == '\r')) s.remove_prefix(1);
  while (!s.empty() && (s.back() == ' ' || s.back() == '\r')) s.remove_suffix(1);
  return std::string(s);
}

json class_json(const ClassStats& s) {
  return json{{"n", s.count}, {"sum_w", s.sum_w}, {"sum_w2", s.sum_w2}};
}

}  // namespace

std::string format_double(double v) {
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

void write_csv(const fs::path& path, const WeightedDataset& data) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw DataError("cannot open " + path.string() + " for writing");
  for (const auto& name : data.feature_names) out << name << ',';
  out << "w,y\n";
  std::string line;
  for (std::size_t i = 0; i < data.size(); ++i) {
    line.clear();
    for (double v : data.x(i)) {
      line += format_double(v);
      line += ',';
    }
    line += format_double(data.w(i));
    line += ',';
    line += data.y(i) == 1 ? '1' : '0';
    line += '\n';
    out << line;
  }
  if (!out) throw DataError("write to " + path.string() + " failed");
}

WeightedDataset read_csv(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw DataError("cannot open " + path.string());
  std::string line;
  if (!std::getline(in, line)) throw FormatError(path.string() + ": empty file");
  const auto header = split_commas(line);
  if (header.size() < 3 || trim(header[header.size() - 2]) != "w" || trim(header.back()) != "y")
    throw FormatError(path.string() + ": header must end with columns w,y");
  const std::size_t dim = header.size() - 2;
  WeightedDataset data(dim);
  for (std::size_t j = 0; j < dim; ++j) data.feature_names[j] = trim(header[j]);

  std::vector<double> x(dim);
  std::size_t line_no = 1;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.empty() || line == "\r") continue;
    const auto fields = split_commas(line);
    if (fields.size() != dim + 2)
      throw FormatError(path.string() + ": line " + std::to_string(line_no) + " has " +
                        std::to_string(fields.size()) + " columns, expected " +
                        std::to_string(dim + 2));
    for (std::size_t j = 0; j < dim; ++j) x[j] = parse_double(fields[j], line_no);
    const double w = parse_double(fields[dim], line_no);
    const double yv = parse_double(fields[dim + 1], line_no);
    if (yv != 0.0 && yv != 1.0)
      throw FormatError(path.string() + ": line " + std::to_string(line_no) + ": label not 0/1");
    data.push_back(x, w, static_cast<int>(yv));
  }

  const fs::path meta = meta_path_for(path);
  if (fs::exists(meta)) {
    std::ifstream mf(meta);
    json j;
    try {
      mf >> j;
    } catch (const json::exception& e) {
      throw FormatError(meta.string() + ": " + e.what());
    }
    if (j.value("n", std::size_t{0}) != data.size())
      throw FormatError(meta.string() + ": sample count does not match " + path.string());
    if (j.contains("spec") && j["spec"].is_object()) data.provenance.spec = spec_from_json(j["spec"]);
    data.provenance.seed = j.value("seed", std::uint64_t{0});
  }
  return data;
}

json spec_to_json(const GaussianMixtureSpec& spec) {
  return json{{"c", spec.c}, {"sigma1", spec.sigma1}, {"sigma2", spec.sigma2}};
}

GaussianMixtureSpec spec_from_json(const json& j) {
  try {
    return {j.at("c").get<double>(), j.at("sigma1").get<double>(), j.at("sigma2").get<double>()};
  } catch (const json::exception& e) {
    throw FormatError(std::string("bad mixture spec: ") + e.what());
  }
}

json meta_json(const WeightedDataset& data) {
  json j;
  j["spec"] = data.provenance.spec ? spec_to_json(*data.provenance.spec) : json("external");
  j["seed"] = data.provenance.seed;
  j["n"] = data.size();
  j["sum_w"] = data.sum_w();
  double sum_w2 = 0.0;
  for (double w : data.weights()) sum_w2 += w * w;
  j["sum_w2"] = sum_w2;
  j["classes"] = json::object();
  for (int y = 0; y < 2; ++y) {
    const ClassStats s = data.class_stats(y);
    if (s.count > 0) j["classes"][std::to_string(y)] = class_json(s);
  }
  return j;
}

fs::path meta_path_for(const fs::path& csv_path) {
  fs::path p = csv_path;
  p.replace_extension(".meta.json");
  return p;
}

void write_dataset(const fs::path& csv_path, const WeightedDataset& data) {
  write_csv(csv_path, data);
  std::ofstream out(meta_path_for(csv_path), std::ios::binary);
  if (!out) throw DataError("cannot write metadata for " + csv_path.string());
  out << meta_json(data).dump(2) << '\n';
}

}  // namespace rosmm

#include "rosmm/eval.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <limits>

#include "rosmm/dataset_io.hpp"
#include "rosmm/error.hpp"

namespace rosmm {

using nlohmann::json;

WeightedDataset reweight(const WeightedDataset& data, std::span<const double> ratios) {
  if (ratios.size() != data.size()) throw ConfigError("one ratio per row is required");
  WeightedDataset out = data;
  auto& w = out.weights();
  for (std::size_t i = 0; i < w.size(); ++i) {
    if (!std::isfinite(ratios[i]))
      throw NumericFailure("non-finite ratio at sample " + std::to_string(i),
                           static_cast<long>(i));
    w[i] *= ratios[i];
  }
  return out;
}

WeightedDataset reweight(const WeightedDataset& data, const RatioFn& ratio) {
  std::vector<double> r(data.size());
  for (std::size_t i = 0; i < data.size(); ++i) r[i] = ratio(data.x(i));
  return reweight(data, r);
}

Estimate weighted_expectation(const WeightedDataset& data, const FeatureFn& f) {
  double sw = 0.0, swf = 0.0;
  std::vector<double> fv(data.size());
  for (std::size_t i = 0; i < data.size(); ++i) {
    fv[i] = f(data.x(i));
    sw += data.w(i);
    swf += data.w(i) * fv[i];
  }
  if (sw == 0.0) throw DegenerateError("weights sum to zero; expectation is undefined");
  const double mean = swf / sw;
  // Linearized ratio estimator: Var ~ sum w_i^2 (f_i - mean)^2 / (sum w)^2
  double acc = 0.0;
  for (std::size_t i = 0; i < data.size(); ++i) {
    const double d = data.w(i) * (fv[i] - mean);
    acc += d * d;
  }
  return {mean, std::sqrt(acc) / std::abs(sw)};
}

WeightedHistogram& WeightedHistogram::operator+=(const WeightedHistogram& other) {
  if (edges != other.edges) throw ConfigError("histograms have different binning");
  for (std::size_t b = 0; b < bins(); ++b) {
    sum_w[b] += other.sum_w[b];
    sum_w2[b] += other.sum_w2[b];
    entries[b] += other.entries[b];
  }
  total_w += other.total_w;
  underflow += other.underflow;
  overflow += other.overflow;
  return *this;
}

std::vector<double> uniform_edges(std::size_t bins, double lo, double hi) {
  if (bins == 0 || !(hi > lo)) throw ConfigError("binning needs bins > 0 and hi > lo");
  std::vector<double> e(bins + 1);
  for (std::size_t i = 0; i <= bins; ++i)
    e[i] = lo + (hi - lo) * static_cast<double>(i) / static_cast<double>(bins);
  return e;
}

WeightedHistogram histogram(const WeightedDataset& data, const FeatureFn& feature,
                            const std::vector<double>& edges) {
  if (edges.size() < 2) throw ConfigError("a histogram needs at least two edges");
  for (std::size_t i = 1; i < edges.size(); ++i)
    if (!(edges[i] > edges[i - 1])) throw ConfigError("histogram edges must increase strictly");
  WeightedHistogram h;
  h.edges = edges;
  h.sum_w.assign(edges.size() - 1, 0.0);
  h.sum_w2.assign(edges.size() - 1, 0.0);
  h.entries.assign(edges.size() - 1, 0);
  for (std::size_t i = 0; i < data.size(); ++i) {
    const double v = feature(data.x(i));
    const double w = data.w(i);
    h.total_w += w;
    if (v < edges.front()) {
      h.underflow += w;
    } else if (v >= edges.back()) {
      h.overflow += w;
    } else {
      const auto b = static_cast<std::size_t>(
          std::upper_bound(edges.begin(), edges.end(), v) - edges.begin() - 1);
      h.sum_w[b] += w;
      h.sum_w2[b] += w * w;
      ++h.entries[b];
    }
  }
  return h;
}

namespace {

void check_pair(const WeightedHistogram& a, const WeightedHistogram& b) {
  if (a.edges != b.edges) throw ConfigError("histograms have different binning");
  if (a.total_w == 0.0 || b.total_w == 0.0)
    throw DegenerateError("histogram total weight is zero");
}

std::vector<double> masses(const WeightedHistogram& h) {
  std::vector<double> p(h.bins());
  for (std::size_t b = 0; b < h.bins(); ++b) p[b] = h.sum_w[b] / h.total_w;
  return p;
}

std::pair<double, std::size_t> chi2_parts(const WeightedHistogram& a, const WeightedHistogram& b) {
  check_pair(a, b);
  const double ta2 = a.total_w * a.total_w;
  const double tb2 = b.total_w * b.total_w;
  double sum = 0.0;
  std::size_t used = 0;
  for (std::size_t i = 0; i < a.bins(); ++i) {
    if (a.entries[i] < kMinBinEntries || b.entries[i] < kMinBinEntries) continue;
    const double var = a.sum_w2[i] / ta2 + b.sum_w2[i] / tb2;
    if (!(var > 0.0)) continue;
    const double d = a.sum_w[i] / a.total_w - b.sum_w[i] / b.total_w;
    sum += d * d / var;
    ++used;
  }
  if (used == 0) throw DegenerateError("no bins with enough entries for a chi^2 comparison");
  return {sum, used};
}

}  // namespace

double chi2_score(const WeightedHistogram& a, const WeightedHistogram& b) {
  const auto [sum, used] = chi2_parts(a, b);
  return sum / static_cast<double>(used);
}

double tsallis_d2(std::span<const double> p, std::span<const double> q) {
  if (p.size() != q.size()) throw ConfigError("distributions have different lengths");
  double s = 0.0;
  for (std::size_t b = 0; b < p.size(); ++b) {
    const double mag = std::max(std::abs(q[b]), kTsallisFloor);
    s += p[b] * p[b] / (q[b] < 0.0 ? -mag : mag);
  }
  return s - 1.0;
}

double tsallis_d2(const WeightedHistogram& p, const WeightedHistogram& q) {
  check_pair(p, q);
  return tsallis_d2(masses(p), masses(q));
}

double vlrc_auc(const LossCurve& curve) {
  if (curve.val.empty()) throw ConfigError("empty loss curve");
  const std::size_t stop =
      curve.stopped_epoch > 0 ? std::min<std::size_t>(curve.stopped_epoch, curve.val.size())
                              : curve.val.size();
  const double final_loss = curve.val[stop - 1];
  double auc = 0.0;
  for (std::size_t e = 0; e < stop; ++e) auc += curve.val[e] - final_loss;
  return auc;
}

std::vector<double> grad_variance_excess(const WeightedDataset& data, const MlpModel& model,
                                         const LossSpec& loss, double learning_rate,
                                         std::size_t batch_size) {
  if (data.empty() || batch_size == 0) throw ConfigError("empty dataset or zero batch size");
  const std::size_t p = model.parameter_count();
  std::vector<double> acc(p, 0.0);
  ForwardCache cache;
  ParamSet g = ParamSet::zeros_like(model.params);
  Eigen::RowVectorXd dlogit(1);
  const auto xs = data.feature_matrix();
  for (std::size_t i = 0; i < data.size(); ++i) {
    const double w = data.w(i);
    const double excess = w * w - w;
    if (excess == 0.0) continue;
    forward_cached(model, xs.col(static_cast<Eigen::Index>(i)), cache);
    dlogit(0) = loss_grad_logit(loss, cache.output(0), data.y(i), 1.0);
    g.set_zero();
    backward(model, cache, dlogit, g);
    const std::vector<double> flat = g.flatten();
    for (std::size_t k = 0; k < p; ++k) acc[k] += excess * flat[k] * flat[k];
  }
  const double scale = learning_rate * learning_rate / static_cast<double>(batch_size) /
                       static_cast<double>(data.size());
  for (double& v : acc) v *= scale;
  return acc;
}

Feature resolve_feature(const WeightedDataset& data, const std::string& name) {
  const std::size_t d = data.dim();
  if (d == 2 && (name == "x" || name == "y")) {
    const std::size_t col = name == "x" ? 0 : 1;
    return {name, [col](std::span<const double> x) { return x[col]; }};
  }
  if (d == 2 && name == "r")
    return {name, [](std::span<const double> x) { return std::hypot(x[0], x[1]); }};
  for (std::size_t c = 0; c < data.feature_names.size(); ++c)
    if (data.feature_names[c] == name)
      return {name, [c](std::span<const double> x) { return x[c]; }};
  std::size_t col = 0;
  std::size_t used = 0;
  try {
    col = std::stoul(name, &used);
  } catch (const std::exception&) {
    used = 0;
  }
  if (used == name.size() && used > 0 && col < d)
    return {name, [col](std::span<const double> x) { return x[col]; }};
  throw ConfigError("unknown feature '" + name + "'");
}

std::vector<double> default_edges(const WeightedDataset& target, const std::string& feature,
                                  std::size_t bins) {
  if (target.dim() == 2 && feature == "r") return uniform_edges(bins, 0.0, 10.0);
  if (target.dim() == 2 && (feature == "x" || feature == "y"))
    return uniform_edges(bins, -10.0, 10.0);
  const Feature f = resolve_feature(target, feature);
  double lo = std::numeric_limits<double>::infinity();
  double hi = -lo;
  for (std::size_t i = 0; i < target.size(); ++i) {
    const double v = f.fn(target.x(i));
    lo = std::min(lo, v);
    hi = std::max(hi, v);
  }
  if (!(hi > lo)) throw DegenerateError("feature '" + feature + "' has no spread in the target");
  // widen so the maximum lands inside the last half-open bin
  return uniform_edges(bins, lo, std::nextafter(hi, std::numeric_limits<double>::infinity()));
}

ClosureReport closure_report(const WeightedDataset& target_test, const WeightedDataset& ref_test,
                             std::span<const double> ratios, const Feature& feature,
                             const std::vector<double>& edges) {
  if (target_test.dim() != ref_test.dim())
    throw DataError("target and reference test sets differ in dimension");
  ClosureReport rep;
  rep.feature = feature.name;
  rep.target = histogram(target_test, feature.fn, edges);
  rep.reweighted = histogram(reweight(ref_test, ratios), feature.fn, edges);
  const auto [sum, used] = chi2_parts(rep.target, rep.reweighted);
  rep.chi2 = sum / static_cast<double>(used);
  rep.n_bins_used = used;
  rep.tsallis_d2 = tsallis_d2(rep.target, rep.reweighted);
  const auto p = masses(rep.target);
  const auto q = masses(rep.reweighted);
  for (std::size_t b = 0; b < p.size(); ++b) {
    const double err = std::sqrt(rep.target.sum_w2[b]) / std::abs(rep.target.total_w);
    if (p[b] < -2.0 * err && std::abs(q[b]) < 0.1 * std::abs(p[b]))
      rep.zeroed_negative_bins.push_back(b);
  }
  return rep;
}

namespace {

json hist_json(const WeightedHistogram& h) {
  return {{"edges", h.edges},         {"sum_w", h.sum_w},         {"sum_w2", h.sum_w2},
          {"entries", h.entries},         {"total_w", h.total_w},     {"underflow", h.underflow}, {"overflow", h.overflow}};
}

}  // namespace

json report_to_json(const ClosureReport& r) {
  return {{"feature", r.feature},
          {"chi2", r.chi2},
          {"tsallis_d2", r.tsallis_d2},
          {"n_bins_used", r.n_bins_used},
          {"zeroed_negative_bins", r.zeroed_negative_bins},
          {"target", hist_json(r.target)},
          {"reweighted", hist_json(r.reweighted)}};
}

void write_report_csv(const std::filesystem::path& path, const ClosureReport& r) {
  std::ofstream out(path);
  if (!out) throw DataError("cannot write " + path.string());
  out << "bin_lo,bin_hi,target_w,target_err,reweighted_w,reweighted_err\n";
  for (std::size_t b = 0; b < r.target.bins(); ++b)
    out << format_double(r.target.edges[b]) << ',' << format_double(r.target.edges[b + 1]) << ','
        << format_double(r.target.sum_w[b]) << ','
        << format_double(std::sqrt(r.target.sum_w2[b])) << ','
        << format_double(r.reweighted.sum_w[b]) << ','
        << format_double(std::sqrt(r.reweighted.sum_w2[b])) << '\n';
}

}  // namespace rosmm

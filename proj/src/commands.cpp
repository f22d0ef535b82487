#include "rosmm/commands.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <cstdlib>
#include <fstream>
#include <iostream>
#include <mutex>
#include <ostream>
#include <sstream>
#include <thread>

#include "rosmm/dataset_io.hpp"
#include "rosmm/error.hpp"
#include "rosmm/mixture.hpp"
#include "rosmm/quasidata.hpp"
#include "rosmm/rng.hpp"

namespace rosmm {

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

const char* const kClasses[2] = {"ref", "target"};
const char* const kSplits[3] = {"train", "val", "test"};

void ensure_dir(const fs::path& dir) {
  std::error_code ec;
  fs::create_directories(dir, ec);
  if (ec || !fs::is_directory(dir)) throw DataError("cannot create directory " + dir.string());
}

void write_text(const fs::path& path, const std::string& text) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw DataError("cannot write " + path.string());
  out << text;
}

WeightedDataset relabel(WeightedDataset d, int y) {
  for (int& l : d.labels()) l = y;
  return d;
}

std::string curve_rows(const std::string& stage, const LossCurve& c) {
  std::string s;
  for (std::size_t e = 0; e < c.val.size(); ++e)
    s += stage + "," + std::to_string(e + 1) + "," + format_double(c.train[e]) + "," +
         format_double(c.val[e]) + "\n";
  return s;
}

std::vector<double> mlp_ratios(const MlpModel& model, const WeightedDataset& data) {
  std::vector<double> r = predict(model, data);
  for (double& v : r) v = ratio_from_classifier_bce(v);
  return r;
}

GaussianMixtureSpec spec_or(const WeightedDataset& d, const GaussianMixtureSpec& fallback) {
  return d.provenance.spec ? *d.provenance.spec : fallback;
}

}  // namespace

unsigned worker_threads() {
  const char* env = std::getenv("ROSMM_THREADS");
  if (!env || !*env) return 1;
  char* end = nullptr;
  const long v = std::strtol(env, &end, 10);
  if (*end != '\0' || v < 1) throw ConfigError("ROSMM_THREADS must be a positive integer");
  return static_cast<unsigned>(std::min<long>(v, 256));
}

void write_run_json(const fs::path& out_dir, const std::string& command, const RunConfig& config,
                    const json& extra) {
  ensure_dir(out_dir);
  json j = {{"command", command}, {"config", config_to_json(config)}};
  for (auto it = extra.begin(); it != extra.end(); ++it) j[it.key()] = it.value();
  write_text(out_dir / "run.json", j.dump(2) + "\n");
}

// ---------------------------------------------------------------- generate

void cmd_generate(const RunConfig& config, const fs::path& out_dir) {
  config.validate();
  const ExperimentKind kind = config.experiment_kind();
  ensure_dir(out_dir);
  ExperimentData d = generate_experiment(kind, config.data.sizes, config.data.seed);
  if (!(config.data.reference == d.reference) || !(config.data.target == d.target)) {
    // spec overrides from the config: regenerate with the same seed streams
    ExperimentData o;
    o.reference = config.data.reference;
    o.target = config.data.target;
    const std::uint64_t s = config.data.seed;
    const auto& z = config.data.sizes;
    o.ref_train = sample_weighted(o.reference, z.n_train, derive_seed(s, "ref/train"), 0);
    o.ref_val = sample_weighted(o.reference, z.n_val, derive_seed(s, "ref/val"), 0);
    o.target_train = sample_weighted(o.target, z.n_train, derive_seed(s, "target/train"), 1);
    o.target_val = sample_weighted(o.target, z.n_val, derive_seed(s, "target/val"), 1);
    o.ref_test = is_nonnegative(o.reference)
                     ? sample_unweighted(o.reference, z.n_test, derive_seed(s, "ref/test"), 0)
                     : sample_weighted(o.reference, z.n_test, derive_seed(s, "ref/test"), 0);
    o.target_test = is_nonnegative(o.target)
                        ? sample_unweighted(o.target, z.n_test, derive_seed(s, "target/test"), 1)
                        : sample_weighted(o.target, z.n_test, derive_seed(s, "target/test"), 1);
    d = std::move(o);
  }
  const WeightedDataset* sets[2][3] = {{&d.ref_train, &d.ref_val, &d.ref_test},
                                       {&d.target_train, &d.target_val, &d.target_test}};
  for (int c = 0; c < 2; ++c)
    for (int s = 0; s < 3; ++s) write_dataset(SplitFiles::path(out_dir, kClasses[c], kSplits[s]), *sets[c][s]);
  write_run_json(out_dir, "generate", config);
}

// ---------------------------------------------------------------- train

ModelKind model_kind_from_string(const std::string& s) {
  if (s == "mlp") return ModelKind::Mlp;
  if (s == "rosmm") return ModelKind::Rosmm;
  if (s == "rosmm_c") return ModelKind::RosmmC;
  if (s == "rosmm_r") return ModelKind::RosmmR;
  throw ConfigError("unknown model kind '" + s + "'");
}

std::string to_string(ModelKind kind) {
  switch (kind) {
    case ModelKind::Mlp: return "mlp";
    case ModelKind::Rosmm: return "rosmm";
    case ModelKind::RosmmC: return "rosmm_c";
    case ModelKind::RosmmR: return "rosmm_r";
  }
  return "mlp";
}

WeightedDataset load_split(const fs::path& data_dir, const std::string& split) {
  WeightedDataset ref = relabel(read_csv(SplitFiles::path(data_dir, "ref", split)), 0);
  const WeightedDataset target = relabel(read_csv(SplitFiles::path(data_dir, "target", split)), 1);
  if (ref.dim() != target.dim()) throw FormatError("reference and target differ in dimension");
  ref.append(target);
  return ref;
}

const RosmmModel& TrainedRosmm::model(ModelKind kind) const {
  switch (kind) {
    case ModelKind::RosmmC:
      if (coef) return coef->model;
      break;
    case ModelKind::RosmmR:
      if (full) return full->model;
      break;
    default:
      return plain;
  }
  throw ConfigError("requested RoSMM flavour was not trained");
}

TrainedRosmm train_rosmm(const RunConfig& config, const WeightedDataset& train_set,
                         const WeightedDataset& val_set, ModelKind up_to, unsigned threads,
                         std::ostream* log) {
  TrainedRosmm out;
  const SignPartition train_part = partition(train_set);
  const SignPartition val_part = partition(val_set);
  out.subratios = train_subratios(train_part, val_part, config.subratio_training(train_set.dim()),
                                  derive_seed(config.train.seed, "subratios"), threads);
  if (log)
    for (const auto& s : out.subratios)
      *log << "subratio " << key_of(s.key) << ": best epoch " << s.curve.best_epoch << " of "
           << s.curve.stopped_epoch << "\n";
  out.plain = assemble_model(out.subratios, estimate_coefficients(train_set), config.pare);
  if (log) *log << "coefficients c0=" << out.plain.c0 << " c1=" << out.plain.c1 << "\n";
  if (up_to == ModelKind::RosmmC || up_to == ModelKind::RosmmR) {
    out.coef = tune_coefficients(out.plain, train_set, val_set, config.tune_config());
    if (log)
      *log << "coefficient tuning: c0=" << out.coef->model.c0 << " c1=" << out.coef->model.c1
           << " val " << out.coef->initial_val_loss << " -> "
           << (out.coef->curve.best_epoch ? out.coef->curve.val[out.coef->curve.best_epoch - 1]
                                          : out.coef->initial_val_loss)
           << "\n";
  }
  if (up_to == ModelKind::RosmmR) {
    TuneConfig tc = config.tune_config();
    tc.seed = derive_seed(tc.seed, "full");
    out.full = tune_full(out.coef->model, train_set, val_set, tc);
    if (log)
      *log << "full tuning: c0=" << out.full->model.c0 << " c1=" << out.full->model.c1 << "\n";
  }
  return out;
}

TrainResult train_baseline(const RunConfig& config, const WeightedDataset& train_set,
                           const WeightedDataset& val_set, std::ostream* log) {
  std::vector<int> arch{static_cast<int>(train_set.dim())};
  arch.insert(arch.end(), config.train.hidden.begin(), config.train.hidden.end());
  arch.push_back(1);
  TrainConfig tc = config.mlp_train_config();
  tc.seed = derive_seed(config.train.seed, "mlp/shuffle");
  TrainResult r = train(mlp_init(arch, derive_seed(config.train.seed, "mlp/init")),
                        class_balanced(train_set), class_balanced(val_set), tc,
                        LossSpec{LossKind::Bce, config.pare});
  if (log)
    *log << "mlp: best epoch " << r.curve.best_epoch << " of " << r.curve.stopped_epoch << "\n";
  return r;
}

void cmd_train(const RunConfig& config, const fs::path& data_dir, ModelKind kind,
               const fs::path& out_dir, unsigned threads) {
  config.validate();
  const WeightedDataset train_set = load_split(data_dir, "train");
  const WeightedDataset val_set = load_split(data_dir, "val");
  ensure_dir(out_dir);
  std::string curves = "stage,epoch,train_loss,val_loss\n";
  if (kind == ModelKind::Mlp) {
    const TrainResult r = train_baseline(config, train_set, val_set, &std::cerr);
    save_mlp(out_dir / "model.json", r.model);
    curves += curve_rows("mlp", r.curve);
  } else {
    const TrainedRosmm t = train_rosmm(config, train_set, val_set, kind, threads, &std::cerr);
    for (const auto& s : t.subratios) curves += curve_rows(std::string(key_of(s.key)), s.curve);
    if (t.coef) curves += curve_rows("coef", t.coef->curve);
    if (t.full) curves += curve_rows("full", t.full->curve);
    save_rosmm(out_dir / "model.json", t.model(kind));
  }
  write_text(out_dir / "loss_curve.csv", curves);
  write_run_json(out_dir, "train", config,
                 {{"model", to_string(kind)}, {"data", data_dir.string()}, {"threads", threads}});
}

// ---------------------------------------------------------------- evaluate

std::vector<double> checkpoint_ratios(const json& checkpoint, const WeightedDataset& data) {
  const std::string kind = checkpoint.value("kind", "");
  if (kind == "mlp") return mlp_ratios(mlp_from_json(checkpoint), data);
  if (kind == "rosmm") return rosmm_ratios(rosmm_from_json(checkpoint), data);
  throw FormatError("unknown checkpoint kind '" + kind + "'");
}

EvaluateResult cmd_evaluate(const RunConfig& config, const fs::path& data_dir,
                            const std::optional<fs::path>& model_path, bool oracle,
                            const std::vector<std::string>& features, const fs::path& out_dir) {
  config.validate();
  if (oracle == model_path.has_value())
    throw ConfigError("evaluate needs exactly one of --model or --oracle");
  const WeightedDataset target = read_csv(SplitFiles::path(data_dir, "target", "test"));
  const WeightedDataset ref = read_csv(SplitFiles::path(data_dir, "ref", "test"));
  if (target.dim() != ref.dim()) throw FormatError("reference and target differ in dimension");

  EvaluateResult res;
  std::vector<double> ratios;
  if (oracle) {
    if (ref.dim() != 2) throw ConfigError("the analytic oracle needs 2D toy data");
    const GaussianMixtureSpec rs = spec_or(ref, config.data.reference);
    const GaussianMixtureSpec ts = spec_or(target, config.data.target);
    ratios.resize(ref.size());
    for (std::size_t i = 0; i < ref.size(); ++i)
      ratios[i] = analytic_ratio(ts, rs, ref.x(i)[0], ref.x(i)[1]);
    res.model = "oracle";
  } else {
    std::ifstream in(*model_path);
    if (!in) throw DataError("cannot open " + model_path->string());
    json ckpt;
    try {
      in >> ckpt;
    } catch (const json::exception& e) {
      throw FormatError(model_path->string() + ": " + e.what());
    }
    ratios = checkpoint_ratios(ckpt, ref);
    if (ckpt.value("kind", "") == "mlp") {
      res.model = "mlp";
    } else {
      const std::string v = ckpt.value("variant", "plain");
      res.model = v == "coef" ? "rosmm_c" : v == "full" ? "rosmm_r" : "rosmm";
    }
  }

  std::vector<std::string> feats = features;
  if (feats.empty()) feats = ref.dim() == 2 ? config.eval.features : target.feature_names;
  ensure_dir(out_dir);
  std::string summary = "model,feature,chi2,tsallis_d2,zeroed_negative_bins\n";
  for (const auto& name : feats) {
    const Feature f = resolve_feature(target, name);
    const std::vector<double> edges =
        (target.dim() == 2 && name == "r")
            ? uniform_edges(config.eval.bins, config.eval.r_min, config.eval.r_max)
            : default_edges(target, name, config.eval.bins);
    ClosureReport rep = closure_report(target, ref, ratios, f, edges);
    const std::string stem = res.model + "_" + name;
    write_text(out_dir / (stem + ".json"), report_to_json(rep).dump(2) + "\n");
    write_report_csv(out_dir / (stem + ".csv"), rep);
    summary += res.model + "," + name + "," + format_double(rep.chi2) + "," +
               format_double(rep.tsallis_d2) + "," + std::to_string(rep.zeroed_negative_bins.size()) +
               "\n";
    if (!rep.zeroed_negative_bins.empty())
      std::cerr << "warning: " << rep.zeroed_negative_bins.size() << " bin(s) of feature " << name
                << " have negative target mass but a reweighted reference near zero\n";
    res.reports.push_back(std::move(rep));
  }
  write_text(out_dir / "summary.csv", summary);
  json extra = {{"model", res.model}, {"data", data_dir.string()}, {"features", feats}};
  if (model_path) extra["checkpoint"] = model_path->string();
  write_run_json(out_dir, "evaluate", config, extra);
  return res;
}

// ---------------------------------------------------------------- sweep

double pearson(const std::vector<double>& x, const std::vector<double>& y) {
  if (x.size() != y.size() || x.size() < 2) throw ConfigError("correlation needs >= 2 pairs");
  const double n = static_cast<double>(x.size());
  double mx = 0.0, my = 0.0;
  for (std::size_t i = 0; i < x.size(); ++i) {
    mx += x[i];
    my += y[i];
  }
  mx /= n;
  my /= n;
  double sxy = 0.0, sxx = 0.0, syy = 0.0;
  for (std::size_t i = 0; i < x.size(); ++i) {
    sxy += (x[i] - mx) * (y[i] - my);
    sxx += (x[i] - mx) * (x[i] - mx);
    syy += (y[i] - my) * (y[i] - my);
  }
  if (sxx == 0.0 || syy == 0.0) return 0.0;
  return sxy / std::sqrt(sxx * syy);
}

double ls_slope(const std::vector<double>& x, const std::vector<double>& y) {
  if (x.size() != y.size() || x.size() < 2) throw ConfigError("a slope needs >= 2 points");
  const double n = static_cast<double>(x.size());
  double mx = 0.0, my = 0.0;
  for (std::size_t i = 0; i < x.size(); ++i) {
    mx += x[i];
    my += y[i];
  }
  mx /= n;
  my /= n;
  double sxy = 0.0, sxx = 0.0;
  for (std::size_t i = 0; i < x.size(); ++i) {
    sxy += (x[i] - mx) * (y[i] - my);
    sxx += (x[i] - mx) * (x[i] - mx);
  }
  if (sxx == 0.0) throw ConfigError("a slope needs distinct x values");
  return sxy / sxx;
}

SweepSummary summarize_sweep(std::vector<SweepRow> rows) {
  SweepSummary s;
  s.rows = std::move(rows);
  std::vector<double> sig, auc;
  std::vector<double> sigmas;
  for (const auto& r : s.rows) {
    if (r.model == "mlp") ++s.points;
    if (r.status != "ok") continue;
    if (r.model == "mlp") {
      sig.push_back(r.sigma_w);
      auc.push_back(r.vlrc_auc);
    }
    if (std::find(sigmas.begin(), sigmas.end(), r.sigma_w) == sigmas.end())
      sigmas.push_back(r.sigma_w);
  }
  std::vector<std::pair<double, double>> point_ok;  // (sigma, eta) where both models succeeded
  for (const auto& r : s.rows)
    if (r.model == "mlp") {
      bool ok = r.status == "ok";
      for (const auto& o : s.rows)
        if (o.model != "mlp" && o.sigma_w == r.sigma_w && o.eta == r.eta) ok = ok && o.status == "ok";
      if (!ok) ++s.failed_points;
    }
  if (sig.size() >= 2) s.mlp_vlrc_correlation = pearson(sig, auc);
  std::sort(sigmas.begin(), sigmas.end());
  auto median_slope = [&](const std::string& model) {
    std::vector<double> xs, meds;
    for (double sw : sigmas) {
      std::vector<double> d;
      for (const auto& r : s.rows)
        if (r.model == model && r.status == "ok" && r.sigma_w == sw) d.push_back(r.tsallis_d2);
      if (d.empty()) continue;
      std::sort(d.begin(), d.end());
      const std::size_t m = d.size() / 2;
      meds.push_back(d.size() % 2 ? d[m] : 0.5 * (d[m - 1] + d[m]));
      xs.push_back(sw);
    }
    return xs.size() >= 2 ? ls_slope(xs, meds) : 0.0;
  };
  s.mlp_median_d_slope = median_slope("mlp");
  s.rosmm_median_d_slope = median_slope("rosmm_r");
  return s;
}

namespace {

struct SweepBase {
  WeightedDataset train, val, ref_test, target_test;
};

SweepBase sweep_base(const RunConfig& config) {
  const GaussianMixtureSpec ref = config.data.reference;
  const GaussianMixtureSpec target =
      config.data.kind == "nonneg" ? config.data.target : kNonnegTargetSpec;
  const auto& sw = config.sweep;
  const auto n_train = static_cast<std::size_t>(std::llround(sw.train_fraction * static_cast<double>(sw.n)));
  const auto n_val = static_cast<std::size_t>(std::llround(sw.val_fraction * static_cast<double>(sw.n)));
  if (n_train == 0 || n_val == 0 || n_train + n_val >= sw.n)
    throw ConfigError("sweep.n is too small for the requested split");
  SweepBase b;
  const GaussianMixtureSpec specs[2] = {ref, target};
  for (int y = 0; y < 2; ++y) {
    const WeightedDataset all =
        sample_unweighted(specs[y], sw.n, derive_seed(sw.seed, kClasses[y]), y);
    std::vector<std::size_t> idx(sw.n);
    for (std::size_t i = 0; i < sw.n; ++i) idx[i] = i;
    const std::span<const std::size_t> s(idx);
    WeightedDataset tr = all.subset(s.subspan(0, n_train));
    WeightedDataset va = all.subset(s.subspan(n_train, n_val));
    WeightedDataset te = all.subset(s.subspan(n_train + n_val));
    if (y == 0) {
      b.train = std::move(tr);
      b.val = std::move(va);
      b.ref_test = std::move(te);
    } else {
      b.train.append(tr);
      b.val.append(va);
      b.target_test = std::move(te);
    }
  }
  return b;
}

WeightedDataset noisy(const WeightedDataset& base, double sigma_w, double eta, std::uint64_t seed) {
  // each class gets its own noise stream
  WeightedDataset out(base.dim());
  out.feature_names = base.feature_names;
  for (int y = 0; y < 2; ++y) {
    const WeightedDataset cls = base.select_class(y);
    out.append(inject_weight_noise(cls, WeightNoiseSpec{eta, sigma_w, derive_seed(seed, y)}));
  }
  return out;
}

std::string status_of(const Error& e) {
  switch (e.category()) {
    case ErrorCategory::Config: return "config_error";
    case ErrorCategory::Data: return "data_error";
    case ErrorCategory::Numeric: return "numeric_failure";
  }
  return "error";
}

std::pair<double, double> radial_closure(const RunConfig& config, const SweepBase& base,
                                         const std::vector<double>& ratios) {
  const Feature f = resolve_feature(base.target_test, "r");
  const auto edges = uniform_edges(config.eval.bins, config.eval.r_min, config.eval.r_max);
  const ClosureReport rep = closure_report(base.target_test, base.ref_test, ratios, f, edges);
  return {rep.tsallis_d2, rep.chi2};
}

std::vector<SweepRow> run_point(const RunConfig& config, const SweepBase& base, double sigma_w,
                                double eta, std::uint64_t seed) {
  SweepRow mlp_row{sigma_w, eta, "mlp"};
  SweepRow rosmm_row{sigma_w, eta, "rosmm_r"};
  RunConfig cfg = config;
  cfg.train.seed = derive_seed(seed, "train");
  WeightedDataset train_set, val_set;
  try {
    train_set = noisy(base.train, sigma_w, eta, derive_seed(seed, "noise/train"));
    val_set = noisy(base.val, sigma_w, eta, derive_seed(seed, "noise/val"));
  } catch (const Error& e) {
    mlp_row.status = rosmm_row.status = status_of(e);
    return {mlp_row, rosmm_row};
  }
  try {
    const TrainResult r = train_baseline(cfg, train_set, val_set);
    mlp_row.vlrc_auc = vlrc_auc(r.curve);
    std::tie(mlp_row.tsallis_d2, mlp_row.chi2) =
        radial_closure(cfg, base, mlp_ratios(r.model, base.ref_test));
  } catch (const Error& e) {
    mlp_row.status = status_of(e);
  }
  try {
    const TrainedRosmm t = train_rosmm(cfg, train_set, val_set, ModelKind::RosmmR, 1);
    rosmm_row.vlrc_auc = vlrc_auc(t.full->curve.val.empty() ? t.coef->curve : t.full->curve);
    std::tie(rosmm_row.tsallis_d2, rosmm_row.chi2) =
        radial_closure(cfg, base, rosmm_ratios(t.full->model, base.ref_test));
  } catch (const Error& e) {
    rosmm_row.status = status_of(e);
  }
  return {mlp_row, rosmm_row};
}

}  // namespace

SweepSummary cmd_sweep(const RunConfig& config, const fs::path& out_dir, unsigned threads,
                       std::ostream* log) {
  config.validate();
  struct Point {
    double sigma_w, eta;
  };
  std::vector<Point> points;
  for (double sw : config.sweep.sigma_w)
    for (double eta : eta_grid(sw, config.sweep.eta_min, config.sweep.eta_count))
      points.push_back({sw, eta});
  const SweepBase base = sweep_base(config);
  ensure_dir(out_dir);

  std::vector<std::vector<SweepRow>> results(points.size());
  std::atomic<std::size_t> next{0};
  std::mutex log_mu;
  auto worker = [&] {
    for (std::size_t i = next++; i < points.size(); i = next++) {
      results[i] = run_point(config, base, points[i].sigma_w, points[i].eta,
                             derive_seed(config.sweep.seed, static_cast<std::uint64_t>(i)));
      if (log) {
        std::lock_guard lock(log_mu);
        *log << "point " << i + 1 << "/" << points.size() << " sigma_w=" << points[i].sigma_w
             << " eta=" << points[i].eta;
        for (const auto& r : results[i])
          *log << " | " << r.model << " D=" << r.tsallis_d2 << " auc=" << r.vlrc_auc << " "
               << r.status;
        *log << std::endl;
      }
    }
  };
  const unsigned n = std::max(1u, std::min<unsigned>(threads, static_cast<unsigned>(points.size())));
  if (n == 1) {
    worker();
  } else {
    std::vector<std::thread> pool;
    for (unsigned t = 0; t < n; ++t) pool.emplace_back(worker);
    for (auto& t : pool) t.join();
  }

  std::vector<SweepRow> rows;
  for (auto& r : results) rows.insert(rows.end(), r.begin(), r.end());
  SweepSummary s = summarize_sweep(std::move(rows));

  std::string csv = "sigma_w,eta,model,vlrc_auc,tsallis_d2,chi2,status\n";
  for (const auto& r : s.rows)
    csv += format_double(r.sigma_w) + "," + format_double(r.eta) + "," + r.model + "," +
           format_double(r.vlrc_auc) + "," + format_double(r.tsallis_d2) + "," +
           format_double(r.chi2) + "," + r.status + "\n";
  write_text(out_dir / "sweep.csv", csv);
  const json summary = {{"points", s.points},
                        {"failed_points", s.failed_points},
                        {"mlp_vlrc_correlation", s.mlp_vlrc_correlation},
                        {"mlp_median_d_slope", s.mlp_median_d_slope},
                        {"rosmm_r_median_d_slope", s.rosmm_median_d_slope}};
  write_text(out_dir / "sweep_summary.json", summary.dump(2) + "\n");
  write_run_json(out_dir, "sweep", config, {{"threads", threads}});
  if (static_cast<double>(s.failed_points) > 0.1 * static_cast<double>(s.points))
    throw NumericFailure(std::to_string(s.failed_points) + " of " + std::to_string(s.points) +
                         " sweep points failed");
  return s;
}

// ---------------------------------------------------------------- oracle

void cmd_oracle(const RunConfig& config, const std::vector<std::string>& queries,
                std::ostream& out) {
  if (queries.empty()) throw ConfigError("oracle needs at least one query");
  const GaussianMixtureSpec ref = config.data.reference;
  const GaussianMixtureSpec target = config.data.target;
  ref.validate();
  target.validate();
  out.precision(17);
  for (const auto& q : queries) {
    std::istringstream in(q);
    std::vector<std::string> tok;
    for (std::string t; in >> t;) tok.push_back(t);
    if (tok.empty()) continue;
    auto num = [&](std::size_t i) {
      if (i >= tok.size()) throw ConfigError("query '" + q + "' is missing an argument");
      std::size_t used = 0;
      double v = 0.0;
      try {
        v = std::stod(tok[i], &used);
      } catch (const std::exception&) {
        used = 0;
      }
      if (used != tok[i].size() || used == 0)
        throw ConfigError("query '" + q + "': '" + tok[i] + "' is not a number");
      return v;
    };
    auto which = [&]() -> const GaussianMixtureSpec& {
      if (tok.size() < 2) throw ConfigError("query '" + q + "' is missing a distribution");
      if (tok[1] == "reference") return ref;
      if (tok[1] == "target") return target;
      throw ConfigError("query '" + q + "': distribution must be reference or target");
    };
    auto arity = [&](std::size_t n) {
      if (tok.size() != n) throw ConfigError("query '" + q + "' has the wrong number of arguments");
    };
    const std::string& op = tok[0];
    std::ostringstream v;
    v.precision(17);
    if (op == "density") {
      arity(4);
      v << density(which(), num(2), num(3));
    } else if (op == "ratio") {
      arity(3);
      v << analytic_ratio(target, ref, num(1), num(2));
    } else if (op == "cdf") {
      arity(3);
      const double r = num(2);
      if (r < 0.0) throw ConfigError("cdf radius must be >= 0");
      v << radial_cdf(which(), r);
    } else if (op == "quantile") {
      arity(3);
      const double z = num(2);
      if (!(z >= 0.0 && z < 1.0)) throw ConfigError("quantile level must lie in [0, 1)");
      v << radial_quantile(which(), z);
    } else if (op == "nonneg") {
      arity(2);
      v << (is_nonnegative(which()) ? "true" : "false");
    } else {
      throw ConfigError("unknown oracle query '" + op + "'");
    }
    out << q << " = " << v.str() << "\n";
  }
}

}  // namespace rosmm

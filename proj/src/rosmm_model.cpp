#include "rosmm/rosmm_model.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <fstream>
#include <thread>

#include "rosmm/error.hpp"
#include "rosmm/rng.hpp"

namespace rosmm {

using nlohmann::json;

namespace {

constexpr std::size_t kBlock = 8192;

int idx(Subratio k) { return static_cast<int>(k); }

// r = c1 / D_A + (1 - c1) / D_B with
//   D_A = c0 inv_pp + (1 - c0) inv_np,   D_B = c0 inv_pn + (1 - c0) inv_nn,
// which is the bracket form multiplied through by c1 and (1 - c1).
struct Assembly {
  double r = 0.0;
  double dr_dc0 = 0.0;
  double dr_dc1 = 0.0;
  std::array<double, 4> dr_dinv{};  // indexed by Subratio
  bool ok = true;
};

using Presence = std::array<bool, 4>;

// Values of absent subratios are ignored. A present (1 - c_y) term contributes
// nothing to r at c_y = 1 but still contributes to the gradient there.
Assembly assemble(double c0, double c1, const double* inv, const Presence& present,
                  bool with_grad) {
  Assembly a;
  const double pp = inv[idx(Subratio::PP)];
  const bool has_np = present[idx(Subratio::NP)];
  const bool has_nn = present[idx(Subratio::NN)];
  const double np = has_np ? inv[idx(Subratio::NP)] : 0.0;
  const double da = c0 * pp + (1.0 - c0) * np;
  if (da == 0.0 && c1 != 0.0) {
    a.ok = false;
    return a;
  }
  a.r = c1 == 0.0 ? 0.0 : c1 / da;
  if (present[idx(Subratio::PN)]) {
    const double pn = inv[idx(Subratio::PN)];
    const double nn = has_nn ? inv[idx(Subratio::NN)] : 0.0;
    const double db = c0 * pn + (1.0 - c0) * nn;
    if (db == 0.0 && c1 != 1.0) {
      a.ok = false;
      return a;
    }
    if (c1 != 1.0) a.r += (1.0 - c1) / db;
    if (with_grad && db != 0.0) {
      const double db2 = db * db;
      a.dr_dc1 -= 1.0 / db;
      a.dr_dc0 -= (1.0 - c1) * (pn - nn) / db2;
      a.dr_dinv[idx(Subratio::PN)] = -(1.0 - c1) * c0 / db2;
      if (has_nn) a.dr_dinv[idx(Subratio::NN)] = -(1.0 - c1) * (1.0 - c0) / db2;
    }
  }
  if (with_grad && c1 != 0.0) {
    const double da2 = da * da;
    a.dr_dc1 += 1.0 / da;
    a.dr_dc0 -= c1 * (pp - np) / da2;
    a.dr_dinv[idx(Subratio::PP)] = -c1 * c0 / da2;
    if (has_np) a.dr_dinv[idx(Subratio::NP)] = -c1 * (1.0 - c0) / da2;
  }
  return a;
}

Presence presence_of(const std::array<std::vector<double>, 4>& table) {
  Presence p{};
  for (Subratio k : kAllSubratios) p[idx(k)] = !table[idx(k)].empty();
  return p;
}

Presence presence_of(const RosmmModel& m) {
  Presence p{};
  for (Subratio k : kAllSubratios) p[idx(k)] = m.at(k).has_value();
  return p;
}

// PARE objective for one sample given the assembled ratio. Returns false on a pole hit.
struct PareTerm {
  double loss = 0.0;
  double dloss_dr = 0.0;
};

bool pare_term(double r, int y, double w, const PareParams& t, PareTerm& out) {
  const double den = t.t0 * t.t0 + t.t1 * t.t1 * r;
  if (std::abs(den) <= t.pole_band() || !std::isfinite(r)) return false;
  const double s = (t.t0 + t.t1 * r) / den;
  const double ty = t.target(y);
  const double resid = 1.0 - s * ty;
  out.loss = w * resid * resid;
  const double ds_dr = t.t0 * t.t1 * (t.t0 - t.t1) / (den * den);
  out.dloss_dr = -2.0 * w * ty * resid * ds_dr;
  return std::isfinite(out.loss) && std::isfinite(out.dloss_dr);
}

double clamped_pole_loss(double w) { return w >= 0.0 ? kPoleLossClamp : -kPoleLossClamp; }

std::array<bool, 2> tunable(const RosmmModel& m) { return {!m.degenerate(0), !m.degenerate(1)}; }

}  // namespace

// ---------------------------------------------------------------- keys

std::string_view key_of(Subratio k) {
  switch (k) {
    case Subratio::PP: return "pp";
    case Subratio::PN: return "pn";
    case Subratio::NP: return "np";
    case Subratio::NN: return "nn";
  }
  return "pp";
}

bool class0_negative(Subratio k) { return k == Subratio::NP || k == Subratio::NN; }
bool class1_negative(Subratio k) { return k == Subratio::PN || k == Subratio::NN; }

std::string_view to_string(RosmmVariant v) {
  switch (v) {
    case RosmmVariant::Plain: return "plain";
    case RosmmVariant::CoefTuned: return "coef";
    case RosmmVariant::FullTuned: return "full";
  }
  return "plain";
}

RosmmVariant variant_from_string(std::string_view s) {
  if (s == "plain") return RosmmVariant::Plain;
  if (s == "coef") return RosmmVariant::CoefTuned;
  if (s == "full") return RosmmVariant::FullTuned;
  throw FormatError("unknown RoSMM variant '" + std::string(s) + "'");
}

// ---------------------------------------------------------------- partition

SignPartition partition(const WeightedDataset& data) {
  SignPartition p;
  for (int y = 0; y < 2; ++y) {
    p.positive[y] = WeightedDataset(data.dim());
    p.negative[y] = WeightedDataset(data.dim());
    p.positive[y].feature_names = p.negative[y].feature_names = data.feature_names;
  }
  for (std::size_t i = 0; i < data.size(); ++i) {
    const double w = data.w(i);
    const int y = data.y(i);
    if (w >= 0.0)
      p.positive[y].push_back(data.x(i), w, y);
    else
      p.negative[y].push_back(data.x(i), -w, y);
  }
  return p;
}

std::vector<Subratio> required_subratios(const SignPartition& p) {
  std::vector<Subratio> out;
  for (Subratio k : kAllSubratios) {
    if (class0_negative(k) && p.degenerate(0)) continue;
    if (class1_negative(k) && p.degenerate(1)) continue;
    out.push_back(k);
  }
  return out;
}

WeightedDataset subratio_pair_dataset(const SignPartition& p, Subratio k, std::uint64_t seed) {
  const WeightedDataset& side0 = p.side(0, class0_negative(k));
  const WeightedDataset& side1 = p.side(1, class1_negative(k));
  if (side0.empty() || side1.empty())
    throw InsufficientSupportError("subratio " + std::string(key_of(k)) +
                                   " has an empty partition (class 0: " +
                                   std::to_string(side0.size()) + ", class 1: " +
                                   std::to_string(side1.size()) + " rows)");
  const std::size_t n = std::min(side0.size(), side1.size());
  WeightedDataset out(side0.dim());
  out.feature_names = side0.feature_names;
  out.reserve(2 * n);
  for (int y = 0; y < 2; ++y) {
    const WeightedDataset& side = y == 0 ? side0 : side1;
    Rng rng(derive_seed(seed, static_cast<std::uint64_t>(y)));
    std::vector<std::size_t> perm = rng.permutation(side.size());
    perm.resize(n);
    double mean = 0.0;
    for (std::size_t i : perm) mean += side.w(i);
    mean /= static_cast<double>(n);
    if (!(mean > 0.0))
      throw InsufficientSupportError("subratio " + std::string(key_of(k)) + ": side " +
                                     std::to_string(y) + " has zero total weight");
    for (std::size_t i : perm) out.push_back(side.x(i), side.w(i) / mean, y);
  }
  return out;
}

std::vector<SubratioResult> train_subratios(const SignPartition& train_part,
                                            const SignPartition& val_part,
                                            const SubratioTraining& config, std::uint64_t seed,
                                            unsigned threads) {
  const std::vector<Subratio> keys = required_subratios(train_part);
  for (Subratio k : keys)
    if ((class0_negative(k) && val_part.degenerate(0)) ||
        (class1_negative(k) && val_part.degenerate(1)))
      throw InsufficientSupportError("validation data has no rows for subratio " +
                                     std::string(key_of(k)));

  // Materialize pair datasets up front; the jobs then share nothing mutable.
  struct Job {
    Subratio key;
    WeightedDataset train;
    WeightedDataset val;
    std::uint64_t init_seed;
    TrainConfig cfg;
  };
  std::vector<Job> jobs;
  for (Subratio k : keys) {
    const std::uint64_t ks = derive_seed(seed, key_of(k));
    TrainConfig cfg = config.train;
    cfg.seed = derive_seed(ks, "shuffle");
    jobs.push_back({k, subratio_pair_dataset(train_part, k, derive_seed(ks, "train")),
                    subratio_pair_dataset(val_part, k, derive_seed(ks, "val")),
                    derive_seed(ks, "init"), cfg});
  }

  std::vector<std::optional<SubratioResult>> results(jobs.size());
  std::vector<std::exception_ptr> errors(jobs.size());
  auto run = [&](std::size_t j) {
    try {
      std::vector<int> arch = config.arch;
      arch.front() = static_cast<int>(jobs[j].train.dim());
      TrainResult r = train(mlp_init(arch, jobs[j].init_seed), jobs[j].train, jobs[j].val,
                            jobs[j].cfg, LossSpec{LossKind::Bce, {}});
      results[j] = SubratioResult{jobs[j].key, std::move(r.model), std::move(r.curve)};
    } catch (...) {
      errors[j] = std::current_exception();
    }
  };
  const unsigned workers = std::max(1u, std::min<unsigned>(threads, static_cast<unsigned>(jobs.size())));
  if (workers == 1) {
    for (std::size_t j = 0; j < jobs.size(); ++j) run(j);
  } else {
    std::atomic<std::size_t> next{0};
    std::vector<std::thread> pool;
    for (unsigned t = 0; t < workers; ++t)
      pool.emplace_back([&] {
        for (std::size_t j = next++; j < jobs.size(); j = next++) run(j);
      });
    for (auto& th : pool) th.join();
  }
  for (auto& e : errors)
    if (e) std::rethrow_exception(e);
  std::vector<SubratioResult> out;
  for (auto& r : results) out.push_back(std::move(*r));
  return out;
}

// ---------------------------------------------------------------- evaluation

double inverse_ratio_from_output(double s) {
  const double sc = std::clamp(s, kProbClamp, 1.0 - kProbClamp);
  return (1.0 - sc) / sc;
}

double subratio_value(const MlpModel& classifier, std::span<const double> x) {
  return inverse_ratio_from_output(forward(classifier, x));
}

double assemble_ratio(double c0, double c1, const InverseSubratios& inv) {
  std::array<double, 4> v{};
  Presence present{};
  const bool keep0 = c0 != 1.0;
  const bool keep1 = c1 != 1.0;
  for (Subratio k : kAllSubratios) {
    const bool needed = (!class0_negative(k) || keep0) && (!class1_negative(k) || keep1);
    if (inv[idx(k)]) {
      v[idx(k)] = *inv[idx(k)];
      present[idx(k)] = true;
    } else if (needed) {
      throw ConfigError("subratio " + std::string(key_of(k)) +
                        " is required at these coefficients but absent");
    }
  }
  const Assembly a = assemble(c0, c1, v.data(), present, false);
  if (!a.ok) throw DegenerateError("mixture bracket vanishes; assembled ratio is undefined");
  return a.r;
}

bool RosmmModel::degenerate(int y) const {
  if (y == 0) return !at(Subratio::NP) && !at(Subratio::NN);
  return !at(Subratio::PN) && !at(Subratio::NN);
}

std::array<double, 2> estimate_coefficients(const WeightedDataset& data) {
  std::array<double, 2> pos{0.0, 0.0};
  std::array<double, 2> total{0.0, 0.0};
  std::array<std::size_t, 2> count{0, 0};
  for (std::size_t i = 0; i < data.size(); ++i) {
    const int y = data.y(i);
    const double w = data.w(i);
    total[y] += w;
    if (w >= 0.0) pos[y] += w;
    ++count[y];
  }
  std::array<double, 2> c{1.0, 1.0};
  for (int y = 0; y < 2; ++y) {
    if (count[y] == 0) continue;
    if (total[y] == 0.0)
      throw DegenerateError("class " + std::to_string(y) + " weights sum to zero");
    c[y] = pos[y] / total[y];
  }
  return c;
}

RosmmModel assemble_model(std::vector<SubratioResult> subratios, std::array<double, 2> coefficients,
                          const PareParams& pare) {
  pare.validate();
  RosmmModel m;
  m.pare = pare;
  for (auto& s : subratios) m.at(s.key) = std::move(s.model);
  if (!m.at(Subratio::PP)) throw InsufficientSupportError("the (+,+) subratio is required");
  for (int y = 0; y < 2; ++y) {
    // initial estimates live in [1, inf); degenerate classes are exactly 1
    double& c = y == 0 ? m.c0 : m.c1;
    c = m.degenerate(y) ? 1.0 : std::max(1.0, coefficients[y]);
  }
  return m;
}

std::array<std::vector<double>, 4> inverse_subratio_table(const RosmmModel& model,
                                                          const WeightedDataset& data) {
  std::array<std::vector<double>, 4> table;
  for (Subratio k : kAllSubratios) {
    if (!model.at(k)) continue;
    std::vector<double> s = predict(*model.at(k), data);
    for (double& v : s) v = inverse_ratio_from_output(v);
    table[idx(k)] = std::move(s);
  }
  return table;
}

std::vector<double> rosmm_ratios(const RosmmModel& model, const WeightedDataset& data) {
  const auto table = inverse_subratio_table(model, data);
  std::vector<double> out(data.size());
  InverseSubratios inv;
  for (std::size_t i = 0; i < data.size(); ++i) {
    for (Subratio k : kAllSubratios)
      inv[idx(k)] = table[idx(k)].empty() ? std::nullopt : std::optional<double>(table[idx(k)][i]);
    out[i] = assemble_ratio(model.c0, model.c1, inv);
  }
  return out;
}

double rosmm_ratio(const RosmmModel& model, std::span<const double> x) {
  InverseSubratios inv;
  for (Subratio k : kAllSubratios)
    if (model.at(k)) inv[idx(k)] = subratio_value(*model.at(k), x);
  return assemble_ratio(model.c0, model.c1, inv);
}

// ---------------------------------------------------------------- tuning

void TuneConfig::validate() const {
  if (!(learning_rate >= 0.0) || !(subratio_learning_rate >= 0.0))
    throw ConfigError("tuning learning rates must be >= 0");
  if (batch_size == 0 || patience <= 0 || epoch_cap == 0 || max_epochs <= 0)
    throw ConfigError("tuning batch size, patience, epoch cap and max epochs must be positive");
}

double coefficient_objective(const std::array<std::vector<double>, 4>& table,
                             const WeightedDataset& data, double c0, double c1,
                             const PareParams& pare, CoefficientObjective objective) {
  if (data.empty()) throw ConfigError("objective over an empty dataset");
  double total = 0.0;
  std::array<double, 4> v{};
  const Presence present = presence_of(table);
  for (std::size_t i = 0; i < data.size(); ++i) {
    for (Subratio k : kAllSubratios)
      v[idx(k)] = present[idx(k)] ? table[idx(k)][i] : 0.0;
    const Assembly a = assemble(c0, c1, v.data(), present, false);
    const double w = data.w(i);
    const int y = data.y(i);
    if (objective == CoefficientObjective::Pare) {
      PareTerm term;
      total += (a.ok && pare_term(a.r, y, w, pare, term)) ? term.loss : clamped_pole_loss(w);
    } else {
      if (!a.ok || a.r == -1.0) {
        total += clamped_pole_loss(w);
        continue;
      }
      const double s = classifier_from_ratio_bce(a.r);
      total += weighted_mse(s, y, w);
    }
  }
  return total / static_cast<double>(data.size());
}

namespace {

ParamSet coefficient_params(const RosmmModel& m) {
  ParamSet p;
  Eigen::VectorXd c(2);
  c << m.c0, m.c1;
  p.biases.push_back(c);
  return p;
}

// Shared loop for coefficient-only and full tuning. `step` performs one batch
// update and returns false when the batch hit a pole; `validate` returns the
// current validation loss.
template <typename Step, typename Validate>
TuneResult tuning_loop(RosmmModel model, std::size_t n_train, const TuneConfig& config,
                       RosmmVariant variant, Step step, Validate validate) {
  TuneResult res;
  res.initial_val_loss = validate(model);
  double best = res.initial_val_loss;
  res.model = model;
  res.model.variant = variant;
  Rng rng(config.seed);
  int bad = 0;
  const std::size_t epoch_len = std::min(n_train, config.epoch_cap);
  int epoch = 1;
  for (; epoch <= config.max_epochs; ++epoch) {
    const std::vector<std::size_t> perm = rng.permutation(n_train);
    double epoch_loss = 0.0;
    std::size_t good = 0;
    for (std::size_t start = 0; start < epoch_len; start += config.batch_size) {
      const std::size_t n = std::min(config.batch_size, epoch_len - start);
      double batch_loss = 0.0;
      ++res.total_batches;
      if (step(model, std::span<const std::size_t>(perm.data() + start, n), batch_loss)) {
        epoch_loss += batch_loss;
        ++good;
      } else {
        ++res.failed_batches;
      }
    }
    const double val = validate(model);
    if (!std::isfinite(val))
      throw NumericFailure("non-finite tuning validation loss at epoch " + std::to_string(epoch), -1,
                           epoch);
    res.curve.train.push_back(good ? epoch_loss / static_cast<double>(good) : kPoleLossClamp);
    res.curve.val.push_back(val);
    if (config.on_epoch) config.on_epoch(epoch, res.curve.train.back(), val);
    if (val <= best) {
      best = val;
      res.model = model;
      res.model.variant = variant;
      res.curve.best_epoch = epoch;
      bad = 0;
    } else if (++bad >= config.patience) {
      break;
    }
  }
  res.curve.stopped_epoch = std::min(epoch, config.max_epochs);
  if (res.total_batches > 0 &&
      static_cast<double>(res.failed_batches) >
          config.max_failed_fraction * static_cast<double>(res.total_batches))
    throw NumericFailure("PARE pole hit in " + std::to_string(res.failed_batches) + " of " +
                         std::to_string(res.total_batches) + " tuning batches");
  return res;
}

void check_tuning_inputs(const RosmmModel& model, const WeightedDataset& train_set,
                         const WeightedDataset& val_set, const TuneConfig& config) {
  config.validate();
  model.pare.validate();
  if (train_set.empty() || val_set.empty())
    throw DataError("tuning requires non-empty training and validation sets");
  if (!model.at(Subratio::PP)) throw ConfigError("model has no (+,+) subratio");
  if (static_cast<int>(train_set.dim()) != model.at(Subratio::PP)->input_dim())
    throw DataError("dataset dimension does not match the subratio models");
}

}  // namespace

TuneResult tune_coefficients(const RosmmModel& model, const WeightedDataset& train_raw,
                             const WeightedDataset& val_raw, const TuneConfig& config) {
  check_tuning_inputs(model, train_raw, val_raw, config);
  const WeightedDataset train_set = class_balanced(train_raw);
  const WeightedDataset val_set = class_balanced(val_raw);
  const auto train_table = inverse_subratio_table(model, train_set);
  const auto val_table = inverse_subratio_table(model, val_set);
  const auto free = tunable(model);
  const Presence train_present = presence_of(train_table);

  ParamSet coef = coefficient_params(model);
  AdamState adam = adam_init(coef);
  ParamSet g = ParamSet::zeros_like(coef);

  auto step = [&](RosmmModel& m, std::span<const std::size_t> batch, double& loss) {
    double dc0 = 0.0, dc1 = 0.0, total = 0.0;
    std::array<double, 4> v{};
    for (std::size_t i : batch) {
      for (Subratio k : kAllSubratios)
        v[idx(k)] = train_table[idx(k)].empty() ? 0.0 : train_table[idx(k)][i];
      const Assembly a = assemble(m.c0, m.c1, v.data(), train_present, true);
      PareTerm term;
      if (!a.ok || !pare_term(a.r, train_set.y(i), train_set.w(i), m.pare, term)) return false;
      total += term.loss;
      dc0 += term.dloss_dr * a.dr_dc0;
      dc1 += term.dloss_dr * a.dr_dc1;
    }
    const double inv_n = 1.0 / static_cast<double>(batch.size());
    loss = total * inv_n;
    g.biases[0] << (free[0] ? dc0 * inv_n : 0.0), (free[1] ? dc1 * inv_n : 0.0);
    adam_step(coef, adam, g, config.learning_rate);
    if (free[0]) m.c0 = coef.biases[0](0);
    if (free[1]) m.c1 = coef.biases[0](1);
    return true;
  };
  auto validate = [&](const RosmmModel& m) {
    return coefficient_objective(val_table, val_set, m.c0, m.c1, m.pare, CoefficientObjective::Pare);
  };
  return tuning_loop(model, train_set.size(), config, RosmmVariant::CoefTuned, step, validate);
}

double rosmm_pare_loss_and_grad(const RosmmModel& model, const WeightedDataset& batch,
                                RosmmGradient* gradient) {
  if (batch.empty()) throw ConfigError("loss of an empty batch");
  const auto xb = batch.feature_matrix();
  std::array<ForwardCache, 4> caches;
  for (Subratio k : kAllSubratios)
    if (model.at(k)) forward_cached(*model.at(k), xb, caches[idx(k)]);

  const auto n = static_cast<Eigen::Index>(batch.size());
  const double inv_n = 1.0 / static_cast<double>(n);
  std::array<Eigen::RowVectorXd, 4> dlogit;
  for (Subratio k : kAllSubratios)
    if (model.at(k)) dlogit[idx(k)] = Eigen::RowVectorXd::Zero(n);
  double total = 0.0, dc0 = 0.0, dc1 = 0.0;
  std::array<double, 4> v{};
  const Presence present = presence_of(model);
  for (Eigen::Index i = 0; i < n; ++i) {
    for (Subratio k : kAllSubratios)
      v[idx(k)] = model.at(k) ? inverse_ratio_from_output(caches[idx(k)].output(i)) : 0.0;
    const Assembly a = assemble(model.c0, model.c1, v.data(), present, gradient != nullptr);
    PareTerm term;
    const auto si = static_cast<std::size_t>(i);
    if (!a.ok || !pare_term(a.r, batch.y(si), batch.w(si), model.pare, term))
      throw PoleError("sample " + std::to_string(i) + " hits the PARE pole or a degenerate point");
    total += term.loss;
    if (!gradient) continue;
    dc0 += term.dloss_dr * a.dr_dc0;
    dc1 += term.dloss_dr * a.dr_dc1;
    for (Subratio k : kAllSubratios) {
      if (!model.at(k)) continue;
      const double s = caches[idx(k)].output(i);
      // inv = (1 - s) / s, so d inv / d logit = -inv inside the clamp band
      const double dinv_dz = (s < kProbClamp || s > 1.0 - kProbClamp) ? 0.0 : -v[idx(k)];
      dlogit[idx(k)](i) = term.dloss_dr * a.dr_dinv[idx(k)] * dinv_dz * inv_n;
    }
  }
  if (gradient) {
    gradient->c0 = dc0 * inv_n;
    gradient->c1 = dc1 * inv_n;
    for (Subratio k : kAllSubratios) {
      if (!model.at(k)) {
        gradient->subratios[idx(k)].reset();
        continue;
      }
      ParamSet g = ParamSet::zeros_like(model.at(k)->params);
      backward(*model.at(k), caches[idx(k)], dlogit[idx(k)], g);
      gradient->subratios[idx(k)] = std::move(g);
    }
  }
  return total * inv_n;
}

TuneResult tune_full(const RosmmModel& model, const WeightedDataset& train_raw,
                     const WeightedDataset& val_raw, const TuneConfig& config) {
  check_tuning_inputs(model, train_raw, val_raw, config);
  const WeightedDataset train_set = class_balanced(train_raw);
  const WeightedDataset val_set = class_balanced(val_raw);
  const auto free = tunable(model);

  ParamSet coef = coefficient_params(model);
  AdamState coef_adam = adam_init(coef);
  ParamSet coef_grad = ParamSet::zeros_like(coef);
  std::array<std::optional<AdamState>, 4> adams;
  for (Subratio k : kAllSubratios)
    if (model.at(k)) adams[idx(k)] = adam_init(model.at(k)->params);

  std::vector<std::size_t> order;
  auto step = [&](RosmmModel& m, std::span<const std::size_t> batch, double& loss) {
    order.assign(batch.begin(), batch.end());
    const WeightedDataset b = train_set.subset(order);
    RosmmGradient g;
    try {
      loss = rosmm_pare_loss_and_grad(m, b, &g);
    } catch (const PoleError&) {
      return false;
    }
    for (Subratio k : kAllSubratios)
      if (m.at(k)) adam_step(m.at(k)->params, *adams[idx(k)], *g.subratios[idx(k)],
                             config.subratio_learning_rate);
    coef_grad.biases[0] << (free[0] ? g.c0 : 0.0), (free[1] ? g.c1 : 0.0);
    adam_step(coef, coef_adam, coef_grad, config.learning_rate);
    if (free[0]) m.c0 = coef.biases[0](0);
    if (free[1]) m.c1 = coef.biases[0](1);
    return true;
  };
  auto validate = [&](const RosmmModel& m) {
    const auto table = inverse_subratio_table(m, val_set);
    return coefficient_objective(table, val_set, m.c0, m.c1, m.pare, CoefficientObjective::Pare);
  };
  return tuning_loop(model, train_set.size(), config, RosmmVariant::FullTuned, step, validate);
}

// ---------------------------------------------------------------- checkpoints

json rosmm_to_json(const RosmmModel& model) {
  json j;
  j["kind"] = "rosmm";
  j["variant"] = std::string(to_string(model.variant));
  j["c0"] = model.c0;
  j["c1"] = model.c1;
  j["t0"] = model.pare.t0;
  j["t1"] = model.pare.t1;
  json subs = json::object();
  for (Subratio k : kAllSubratios)
    if (model.at(k)) subs[std::string(key_of(k))] = mlp_to_json(*model.at(k));
  j["subratios"] = std::move(subs);
  return j;
}

RosmmModel rosmm_from_json(const json& j) {
  try {
    const std::string kind = j.at("kind").get<std::string>();
    if (kind != "rosmm")
      throw FormatError("checkpoint kind is '" + kind + "', expected 'rosmm'");
    RosmmModel m;
    m.variant = variant_from_string(j.at("variant").get<std::string>());
    m.c0 = j.at("c0").get<double>();
    m.c1 = j.at("c1").get<double>();
    m.pare.t0 = j.at("t0").get<double>();
    m.pare.t1 = j.at("t1").get<double>();
    const json& subs = j.at("subratios");
    for (auto it = subs.begin(); it != subs.end(); ++it) {
      bool known = false;
      for (Subratio k : kAllSubratios)
        if (it.key() == key_of(k)) {
          m.at(k) = mlp_from_json(it.value());
          known = true;
        }
      if (!known) throw FormatError("unknown subratio key '" + it.key() + "'");
    }
    if (!m.at(Subratio::PP)) throw FormatError("RoSMM checkpoint lacks the pp subratio");
    return m;
  } catch (const json::exception& e) {
    throw FormatError(std::string("malformed RoSMM checkpoint: ") + e.what());
  }
}

void save_rosmm(const std::filesystem::path& path, const RosmmModel& model) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw DataError("cannot write " + path.string());
  out << rosmm_to_json(model).dump() << '\n';
}

RosmmModel load_rosmm(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw DataError("cannot open " + path.string());
  json j;
  try {
    in >> j;
  } catch (const json::exception& e) {
    throw FormatError(path.string() + ": " + e.what());
  }
  return rosmm_from_json(j);
}

}  // namespace rosmm

#include "rosmm/nn.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>

#include "rosmm/error.hpp"
#include "rosmm/rng.hpp"

namespace rosmm {

using nlohmann::json;

namespace {

constexpr std::size_t kEvalBlock = 8192;

void check_sizes(const std::vector<int>& sizes) {
  if (sizes.size() < 2) throw ConfigError("an MLP needs at least an input and an output layer");
  for (int s : sizes)
    if (s <= 0) throw ConfigError("layer sizes must be positive");
  if (sizes.back() != 1) throw ConfigError("the output layer must have exactly one unit");
}

}  // namespace

// ---------------------------------------------------------------- ParamSet

ParamSet ParamSet::zeros_like(const ParamSet& other) {
  ParamSet p;
  for (const auto& w : other.weights) p.weights.push_back(Eigen::MatrixXd::Zero(w.rows(), w.cols()));
  for (const auto& b : other.biases) p.biases.push_back(Eigen::VectorXd::Zero(b.size()));
  return p;
}

std::size_t ParamSet::count() const {
  std::size_t n = 0;
  for (const auto& w : weights) n += static_cast<std::size_t>(w.size());
  for (const auto& b : biases) n += static_cast<std::size_t>(b.size());
  return n;
}

void ParamSet::set_zero() {
  for (auto& w : weights) w.setZero();
  for (auto& b : biases) b.setZero();
}

bool ParamSet::all_finite() const {
  for (const auto& w : weights)
    if (!w.allFinite()) return false;
  for (const auto& b : biases)
    if (!b.allFinite()) return false;
  return true;
}

bool ParamSet::same_shape(const ParamSet& other) const {
  if (weights.size() != other.weights.size() || biases.size() != other.biases.size()) return false;
  for (std::size_t l = 0; l < weights.size(); ++l)
    if (weights[l].rows() != other.weights[l].rows() || weights[l].cols() != other.weights[l].cols())
      return false;
  for (std::size_t l = 0; l < biases.size(); ++l)
    if (biases[l].size() != other.biases[l].size()) return false;
  return true;
}

ParamSet& ParamSet::operator+=(const ParamSet& other) {
  for (std::size_t l = 0; l < weights.size(); ++l) weights[l] += other.weights[l];
  for (std::size_t l = 0; l < biases.size(); ++l) biases[l] += other.biases[l];
  return *this;
}

ParamSet& ParamSet::operator*=(double k) {
  for (auto& w : weights) w *= k;
  for (auto& b : biases) b *= k;
  return *this;
}

std::vector<double> ParamSet::flatten() const {
  std::vector<double> out;
  out.reserve(count());
  for (std::size_t l = 0; l < weights.size(); ++l) {
    const auto& w = weights[l];
    for (Eigen::Index r = 0; r < w.rows(); ++r)
      for (Eigen::Index c = 0; c < w.cols(); ++c) out.push_back(w(r, c));
    for (Eigen::Index i = 0; i < biases[l].size(); ++i) out.push_back(biases[l](i));
  }
  return out;
}

void ParamSet::assign_flat(std::span<const double> flat) {
  if (flat.size() != count()) throw ConfigError("flat parameter vector has the wrong length");
  std::size_t k = 0;
  for (std::size_t l = 0; l < weights.size(); ++l) {
    auto& w = weights[l];
    for (Eigen::Index r = 0; r < w.rows(); ++r)
      for (Eigen::Index c = 0; c < w.cols(); ++c) w(r, c) = flat[k++];
    for (Eigen::Index i = 0; i < biases[l].size(); ++i) biases[l](i) = flat[k++];
  }
}

bool ParamSet::operator==(const ParamSet& other) const {
  if (!same_shape(other)) return false;
  for (std::size_t l = 0; l < weights.size(); ++l)
    if (weights[l] != other.weights[l] || biases[l] != other.biases[l]) return false;
  return true;
}

// ---------------------------------------------------------------- model

MlpModel mlp_init(const std::vector<int>& layer_sizes, std::uint64_t seed) {
  check_sizes(layer_sizes);
  MlpModel m;
  m.layer_sizes = layer_sizes;
  m.seed = seed;
  Rng rng(seed);
  for (std::size_t l = 0; l + 1 < layer_sizes.size(); ++l) {
    const int fan_in = layer_sizes[l];
    const int fan_out = layer_sizes[l + 1];
    const double bound = 1.0 / std::sqrt(static_cast<double>(fan_in));
    Eigen::MatrixXd w(fan_out, fan_in);
    for (int r = 0; r < fan_out; ++r)
      for (int c = 0; c < fan_in; ++c) w(r, c) = bound * (2.0 * rng.uniform() - 1.0);
    m.params.weights.push_back(std::move(w));
    m.params.biases.push_back(Eigen::VectorXd::Zero(fan_out));
  }
  return m;
}

double sigmoid(double z) {
  if (z >= 0.0) return 1.0 / (1.0 + std::exp(-z));
  const double e = std::exp(z);
  return e / (1.0 + e);
}

void forward_cached(const MlpModel& model, const Eigen::Ref<const Eigen::MatrixXd>& inputs,
                    ForwardCache& cache) {
  if (inputs.rows() != model.input_dim())
    throw ConfigError("input dimension " + std::to_string(inputs.rows()) +
                      " does not match model input " + std::to_string(model.input_dim()));
  if (!inputs.allFinite()) throw NumericInputError("non-finite model input");
  const std::size_t layers = model.num_layers();
  cache.inputs.resize(layers);
  cache.inputs[0] = inputs;
  for (std::size_t l = 0; l + 1 < layers; ++l) {
    cache.inputs[l + 1].noalias() = model.params.weights[l] * cache.inputs[l];
    cache.inputs[l + 1].colwise() += model.params.biases[l];
    cache.inputs[l + 1] = cache.inputs[l + 1].cwiseMax(0.0);
  }
  Eigen::RowVectorXd z = model.params.weights[layers - 1] * cache.inputs[layers - 1];
  z.array() += model.params.biases[layers - 1](0);
  cache.output = z.unaryExpr([](double v) { return sigmoid(v); });
}

void backward(const MlpModel& model, const ForwardCache& cache,
              const Eigen::Ref<const Eigen::RowVectorXd>& dlogit, ParamSet& grad) {
  const std::size_t layers = model.num_layers();
  Eigen::MatrixXd delta = dlogit;
  for (std::size_t l = layers; l-- > 0;) {
    grad.weights[l].noalias() += delta * cache.inputs[l].transpose();
    grad.biases[l] += delta.rowwise().sum();
    if (l == 0) break;
    Eigen::MatrixXd upstream = model.params.weights[l].transpose() * delta;
    // ReLU derivative: the cached layer input is positive exactly where z > 0
    delta = (cache.inputs[l].array() > 0.0).select(upstream, 0.0);
  }
}

Eigen::RowVectorXd forward_batch(const MlpModel& model,
                                 const Eigen::Ref<const Eigen::MatrixXd>& inputs) {
  ForwardCache cache;
  forward_cached(model, inputs, cache);
  return cache.output;
}

double forward(const MlpModel& model, std::span<const double> x) {
  if (static_cast<int>(x.size()) != model.input_dim())
    throw ConfigError("input length does not match model input dimension");
  Eigen::Map<const Eigen::MatrixXd> col(x.data(), static_cast<Eigen::Index>(x.size()), 1);
  return forward_batch(model, col)(0);
}

std::vector<double> predict(const MlpModel& model, const WeightedDataset& data) {
  std::vector<double> out(data.size());
  const auto all = data.feature_matrix();
  ForwardCache cache;
  for (std::size_t start = 0; start < data.size(); start += kEvalBlock) {
    const auto n = static_cast<Eigen::Index>(std::min(kEvalBlock, data.size() - start));
    forward_cached(model, all.middleCols(static_cast<Eigen::Index>(start), n), cache);
    std::copy(cache.output.data(), cache.output.data() + n, out.begin() + static_cast<long>(start));
  }
  return out;
}

ParamSet grad(const MlpModel& model, const WeightedDataset& batch, const LossSpec& loss) {
  if (batch.empty()) throw ConfigError("gradient of an empty batch");
  ForwardCache cache;
  forward_cached(model, batch.feature_matrix(), cache);
  const auto n = static_cast<Eigen::Index>(batch.size());
  Eigen::RowVectorXd dlogit(n);
  const double inv_n = 1.0 / static_cast<double>(n);
  for (Eigen::Index i = 0; i < n; ++i) {
    const auto k = static_cast<std::size_t>(i);
    const double s = cache.output(i);
    const double g = loss_grad_logit(loss, s, batch.y(k), batch.w(k));
    if (!std::isfinite(g) || !std::isfinite(loss_value(loss, s, batch.y(k), batch.w(k))))
      throw NumericFailure("non-finite loss gradient at sample " + std::to_string(i), i);
    dlogit(i) = g * inv_n;
  }
  ParamSet g = ParamSet::zeros_like(model.params);
  backward(model, cache, dlogit, g);
  return g;
}

double mean_loss(const MlpModel& model, const WeightedDataset& data, const LossSpec& loss) {
  if (data.empty()) throw ConfigError("loss of an empty dataset");
  const std::vector<double> s = predict(model, data);
  double total = 0.0;
  for (std::size_t i = 0; i < data.size(); ++i) total += loss_value(loss, s[i], data.y(i), data.w(i));
  return total / static_cast<double>(data.size());
}

// ---------------------------------------------------------------- Adam

AdamState adam_init(const ParamSet& params) {
  AdamState st;
  st.m = ParamSet::zeros_like(params);
  st.v = ParamSet::zeros_like(params);
  return st;
}

void adam_step(ParamSet& params, AdamState& st, const ParamSet& g, double lr) {
  if (!params.same_shape(g) || !params.same_shape(st.m))
    throw ConfigError("Adam: gradient / state shapes do not match parameters");
  if (!g.all_finite()) throw NumericFailure("Adam: non-finite gradient");
  ++st.step;
  const double c1 = 1.0 - std::pow(st.beta1, static_cast<double>(st.step));
  const double c2 = 1.0 - std::pow(st.beta2, static_cast<double>(st.step));
  auto update = [&](auto& p, auto& m, auto& v, const auto& gr) {
    m = st.beta1 * m + (1.0 - st.beta1) * gr;
    v = st.beta2 * v + (1.0 - st.beta2) * gr.cwiseProduct(gr);
    p.array() -= lr * (m.array() / c1) / ((v.array() / c2).sqrt() + st.eps);
  };
  for (std::size_t l = 0; l < params.weights.size(); ++l)
    update(params.weights[l], st.m.weights[l], st.v.weights[l], g.weights[l]);
  for (std::size_t l = 0; l < params.biases.size(); ++l)
    update(params.biases[l], st.m.biases[l], st.v.biases[l], g.biases[l]);
}

// ---------------------------------------------------------------- training

void TrainConfig::validate() const {
  if (!(learning_rate >= 0.0) || !std::isfinite(learning_rate))
    throw ConfigError("learning rate must be finite and >= 0");
  if (batch_size == 0) throw ConfigError("batch size must be positive");
  if (patience <= 0) throw ConfigError("patience must be positive");
  if (epoch_cap == 0) throw ConfigError("epoch cap must be positive");
  if (max_epochs <= 0) throw ConfigError("max_epochs must be positive");
}

bool EarlyStopping::update(double val_loss) {
  ++epoch_;
  if (epoch_ == 1 || val_loss <= best_) {
    best_ = val_loss;
    best_epoch_ = epoch_;
    bad_epochs_ = 0;
    return true;
  }
  ++bad_epochs_;
  return false;
}

void gather_columns(const WeightedDataset& data, std::span<const std::size_t> idx,
                    Eigen::MatrixXd& out) {
  const auto d = static_cast<Eigen::Index>(data.dim());
  out.resize(d, static_cast<Eigen::Index>(idx.size()));
  for (std::size_t j = 0; j < idx.size(); ++j) {
    const auto x = data.x(idx[j]);
    for (Eigen::Index r = 0; r < d; ++r) out(r, static_cast<Eigen::Index>(j)) = x[r];
  }
}

TrainResult train(MlpModel model, const WeightedDataset& train_set, const WeightedDataset& val_set,
                  const TrainConfig& config, const LossSpec& loss) {
  config.validate();
  if (train_set.empty() || val_set.empty()) throw DataError("training and validation sets must be non-empty");
  if (static_cast<int>(train_set.dim()) != model.input_dim() ||
      static_cast<int>(val_set.dim()) != model.input_dim())
    throw DataError("dataset dimension does not match model input");
  model.loss = loss.kind;

  Rng rng(config.seed);
  AdamState adam = adam_init(model.params);
  EarlyStopping stopper(config.patience);
  TrainResult result{model, {}};
  ForwardCache cache;
  Eigen::MatrixXd xb;
  Eigen::RowVectorXd dlogit;
  ParamSet g = ParamSet::zeros_like(model.params);
  const std::size_t epoch_len = std::min(train_set.size(), config.epoch_cap);

  for (int epoch = 1; epoch <= config.max_epochs; ++epoch) {
    const std::vector<std::size_t> perm = rng.permutation(train_set.size());
    double epoch_loss = 0.0;
    std::size_t batches = 0;
    for (std::size_t start = 0; start < epoch_len; start += config.batch_size, ++batches) {
      const std::size_t n = std::min(config.batch_size, epoch_len - start);
      const std::span<const std::size_t> idx(perm.data() + start, n);
      gather_columns(train_set, idx, xb);
      forward_cached(model, xb, cache);
      dlogit.resize(static_cast<Eigen::Index>(n));
      double batch_loss = 0.0;
      const double inv_n = 1.0 / static_cast<double>(n);
      for (std::size_t j = 0; j < n; ++j) {
        const std::size_t i = idx[j];
        const double s = cache.output(static_cast<Eigen::Index>(j));
        batch_loss += loss_value(loss, s, train_set.y(i), train_set.w(i));
        dlogit(static_cast<Eigen::Index>(j)) =
            loss_grad_logit(loss, s, train_set.y(i), train_set.w(i)) * inv_n;
      }
      batch_loss *= inv_n;
      if (!std::isfinite(batch_loss) || !dlogit.allFinite())
        throw NumericFailure("non-finite training loss at epoch " + std::to_string(epoch) +
                                 ", batch " + std::to_string(batches),
                             -1, epoch, static_cast<long>(batches));
      g.set_zero();
      backward(model, cache, dlogit, g);
      adam_step(model.params, adam, g, config.learning_rate);
      epoch_loss += batch_loss;
    }
    const double train_loss = epoch_loss / static_cast<double>(std::max<std::size_t>(batches, 1));
    const double val_loss = mean_loss(model, val_set, loss);
    if (!std::isfinite(val_loss))
      throw NumericFailure("non-finite validation loss at epoch " + std::to_string(epoch), -1, epoch);
    result.curve.train.push_back(train_loss);
    result.curve.val.push_back(val_loss);
    if (stopper.update(val_loss)) result.model = model;
    if (config.on_epoch) config.on_epoch(epoch, train_loss, val_loss);
    if (stopper.should_stop()) break;
  }
  result.curve.best_epoch = stopper.best_epoch();
  result.curve.stopped_epoch = stopper.epoch();
  return result;
}

// ---------------------------------------------------------------- checkpoints

json mlp_to_json(const MlpModel& model) {
  json j;
  j["kind"] = "mlp";
  j["arch"] = model.layer_sizes;
  j["activation"] = "relu";
  json weights = json::array();
  json biases = json::array();
  for (std::size_t l = 0; l < model.num_layers(); ++l) {
    const auto& w = model.params.weights[l];
    std::vector<double> flat;
    flat.reserve(static_cast<std::size_t>(w.size()));
    for (Eigen::Index r = 0; r < w.rows(); ++r)
      for (Eigen::Index c = 0; c < w.cols(); ++c) flat.push_back(w(r, c));
    weights.push_back(flat);
    const auto& b = model.params.biases[l];
    biases.push_back(std::vector<double>(b.data(), b.data() + b.size()));
  }
  j["weights"] = std::move(weights);
  j["biases"] = std::move(biases);
  j["seed"] = model.seed;
  j["loss"] = std::string(to_string(model.loss));
  j["adam"] = {{"beta1", 0.9}, {"beta2", 0.999}, {"eps", 1e-8}};
  return j;
}

MlpModel mlp_from_json(const json& j) {
  try {
    if (j.at("kind").get<std::string>() != "mlp")
      throw FormatError("checkpoint kind is '" + j.at("kind").get<std::string>() + "', expected 'mlp'");
    if (j.value("activation", std::string("relu")) != "relu")
      throw FormatError("only relu hidden activations are supported");
    MlpModel m;
    m.layer_sizes = j.at("arch").get<std::vector<int>>();
    try {
      check_sizes(m.layer_sizes);
    } catch (const ConfigError& e) {
      throw FormatError(e.what());
    }
    m.seed = j.value("seed", std::uint64_t{0});
    m.loss = loss_kind_from_string(j.value("loss", std::string("bce")));
    const auto& weights = j.at("weights");
    const auto& biases = j.at("biases");
    if (weights.size() != m.layer_sizes.size() - 1 || biases.size() != weights.size())
      throw FormatError("checkpoint layer count does not match arch");
    for (std::size_t l = 0; l + 1 < m.layer_sizes.size(); ++l) {
      const int fan_in = m.layer_sizes[l];
      const int fan_out = m.layer_sizes[l + 1];
      const auto flat = weights[l].get<std::vector<double>>();
      const auto bias = biases[l].get<std::vector<double>>();
      if (flat.size() != static_cast<std::size_t>(fan_in) * fan_out ||
          bias.size() != static_cast<std::size_t>(fan_out))
        throw FormatError("checkpoint layer " + std::to_string(l) + " has the wrong shape");
      Eigen::MatrixXd w(fan_out, fan_in);
      for (int r = 0; r < fan_out; ++r)
        for (int c = 0; c < fan_in; ++c) w(r, c) = flat[static_cast<std::size_t>(r) * fan_in + c];
      m.params.weights.push_back(std::move(w));
      m.params.biases.push_back(Eigen::Map<const Eigen::VectorXd>(bias.data(), fan_out));
    }
    return m;
  } catch (const json::exception& e) {
    throw FormatError(std::string("malformed MLP checkpoint: ") + e.what());
  }
}

void save_mlp(const std::filesystem::path& path, const MlpModel& model) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw DataError("cannot write " + path.string());
  out << mlp_to_json(model).dump() << '\n';
}

MlpModel load_mlp(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw DataError("cannot open " + path.string());
  json j;
  try {
    in >> j;
  } catch (const json::exception& e) {
    throw FormatError(path.string() + ": " + e.what());
  }
  return mlp_from_json(j);
}

}  // namespace rosmm

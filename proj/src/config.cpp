#include "rosmm/config.hpp"

#include <algorithm>
#include <charconv>
#include <fstream>
#include <sstream>

#include <boost/property_tree/ini_parser.hpp>
#include <boost/property_tree/ptree.hpp>

#include "rosmm/error.hpp"
#include "rosmm/rng.hpp"

namespace rosmm {

namespace {

std::string trim(const std::string& s) {
  const auto b = s.find_first_not_of(" \t\r\n");
  if (b == std::string::npos) return "";
  const auto e = s.find_last_not_of(" \t\r\n");
  return s.substr(b, e - b + 1);
}

double to_double(const std::string& key, const std::string& v) {
  const std::string t = trim(v);
  double out = 0.0;
  const auto [p, ec] = std::from_chars(t.data(), t.data() + t.size(), out);
  if (ec != std::errc() || p != t.data() + t.size() || t.empty())
    throw ConfigError(key + ": expected a number, got '" + v + "'");
  return out;
}

std::uint64_t to_u64(const std::string& key, const std::string& v) {
  const std::string t = trim(v);
  // accept integral values written in exponent form, e.g. 2e6
  if (t.find_first_of("eE.") != std::string::npos) {
    const double d = to_double(key, t);
    if (d < 0.0 || d != static_cast<double>(static_cast<std::uint64_t>(d)))
      throw ConfigError(key + ": expected a non-negative integer, got '" + v + "'");
    return static_cast<std::uint64_t>(d);
  }
  std::uint64_t out = 0;
  const auto [p, ec] = std::from_chars(t.data(), t.data() + t.size(), out);
  if (ec != std::errc() || p != t.data() + t.size() || t.empty())
    throw ConfigError(key + ": expected a non-negative integer, got '" + v + "'");
  return out;
}

int to_int(const std::string& key, const std::string& v) {
  const std::uint64_t u = to_u64(key, v);
  if (u > 1'000'000'000ULL) throw ConfigError(key + ": value out of range");
  return static_cast<int>(u);
}

std::vector<std::string> split_list(const std::string& v) {
  std::vector<std::string> out;
  std::stringstream ss(v);
  std::string item;
  while (std::getline(ss, item, ','))
    if (!trim(item).empty()) out.push_back(trim(item));
  return out;
}

std::vector<int> to_int_list(const std::string& key, const std::string& v) {
  std::vector<int> out;
  for (const auto& s : split_list(v)) out.push_back(to_int(key, s));
  return out;
}

std::vector<double> to_double_list(const std::string& key, const std::string& v) {
  std::vector<double> out;
  for (const auto& s : split_list(v)) out.push_back(to_double(key, s));
  if (out.empty()) throw ConfigError(key + ": empty list");
  return out;
}

void set_spec(GaussianMixtureSpec& spec, const std::string& field, const std::string& key,
              const std::string& v) {
  const double d = to_double(key, v);
  if (field == "c")
    spec.c = d;
  else if (field == "sigma1")
    spec.sigma1 = d;
  else
    spec.sigma2 = d;
}

}  // namespace

void set_config_value(RunConfig& cfg, const std::string& dotted, const std::string& value) {
  const auto dot = dotted.find('.');
  if (dot == std::string::npos) throw ConfigError("config key '" + dotted + "' lacks a section");
  const std::string sec = dotted.substr(0, dot);
  const std::string key = dotted.substr(dot + 1);
  const std::string& v = value;
  auto unknown = [&] { throw ConfigError("unknown config key '" + dotted + "'"); };

  if (sec == "data") {
    auto& d = cfg.data;
    if (key == "kind") {
      const std::string k = trim(v);
      if (k != "nonneg" && k != "signed" && k != "external")
        throw ConfigError("data.kind must be nonneg, signed or external");
      d.kind = k;
      if (k != "external") d.target = target_spec_for(k == "nonneg" ? ExperimentKind::Nonneg
                                                                   : ExperimentKind::Signed);
    } else if (key == "ref_c" || key == "ref_sigma1" || key == "ref_sigma2") {
      set_spec(d.reference, key.substr(4), dotted, v);
    } else if (key == "target_c" || key == "target_sigma1" || key == "target_sigma2") {
      set_spec(d.target, key.substr(7), dotted, v);
    } else if (key == "n_train") {
      d.sizes.n_train = to_u64(dotted, v);
    } else if (key == "n_val") {
      d.sizes.n_val = to_u64(dotted, v);
    } else if (key == "n_test") {
      d.sizes.n_test = to_u64(dotted, v);
    } else if (key == "seed") {
      d.seed = to_u64(dotted, v);
    } else {
      unknown();
    }
  } else if (sec == "train") {
    auto& t = cfg.train;
    if (key == "lr") t.lr = to_double(dotted, v);
    else if (key == "batch_size") t.batch_size = to_u64(dotted, v);
    else if (key == "patience") t.patience = to_int(dotted, v);
    else if (key == "epoch_cap") t.epoch_cap = to_u64(dotted, v);
    else if (key == "max_epochs") t.max_epochs = to_int(dotted, v);
    else if (key == "arch") t.hidden = to_int_list(dotted, v);
    else if (key == "subratio_arch") t.subratio_hidden = to_int_list(dotted, v);
    else if (key == "seed") t.seed = to_u64(dotted, v);
    else unknown();
  } else if (sec == "pare") {
    if (key == "t0") cfg.pare.t0 = to_double(dotted, v);
    else if (key == "t1") cfg.pare.t1 = to_double(dotted, v);
    else unknown();
  } else if (sec == "tune") {
    auto& t = cfg.tune;
    if (key == "lr") t.lr = to_double(dotted, v);
    else if (key == "subratio_lr") t.subratio_lr = to_double(dotted, v);
    else if (key == "batch_size") t.batch_size = to_u64(dotted, v);
    else if (key == "patience") t.patience = to_int(dotted, v);
    else if (key == "epoch_cap") t.epoch_cap = to_u64(dotted, v);
    else if (key == "max_epochs") t.max_epochs = to_int(dotted, v);
    else unknown();
  } else if (sec == "eval") {
    auto& e = cfg.eval;
    if (key == "bins") {
      e.bins = to_u64(dotted, v);
    } else if (key == "range") {
      const auto r = to_double_list(dotted, v);
      if (r.size() != 2) throw ConfigError("eval.range takes two numbers");
      e.r_min = r[0];
      e.r_max = r[1];
    } else if (key == "features") {
      e.features = split_list(v);
    } else {
      unknown();
    }
  } else if (sec == "sweep") {
    auto& s = cfg.sweep;
    if (key == "sigma_w") s.sigma_w = to_double_list(dotted, v);
    else if (key == "eta_count") s.eta_count = to_u64(dotted, v);
    else if (key == "eta_min") s.eta_min = to_double(dotted, v);
    else if (key == "n") s.n = to_u64(dotted, v);
    else if (key == "train_fraction") s.train_fraction = to_double(dotted, v);
    else if (key == "val_fraction") s.val_fraction = to_double(dotted, v);
    else if (key == "seed") s.seed = to_u64(dotted, v);
    else unknown();
  } else {
    throw ConfigError("unknown config section '" + sec + "'");
  }
}

RunConfig parse_config(const std::string& text) {
  boost::property_tree::ptree tree;
  std::istringstream in(text);
  try {
    boost::property_tree::ini_parser::read_ini(in, tree);
  } catch (const boost::property_tree::ini_parser_error& e) {
    throw ConfigError("config parse error: " + std::string(e.what()));
  }
  RunConfig cfg;
  // data.kind resets the target spec, so it goes first
  if (auto data = tree.get_child_optional("data"))
    if (auto kind = data->get_optional<std::string>("kind")) set_config_value(cfg, "data.kind", *kind);
  for (const auto& [section, body] : tree) {
    if (body.empty() && !body.data().empty())
      throw ConfigError("config key '" + section + "' is outside any section");
    for (const auto& [key, node] : body) {
      if (section == "data" && key == "kind") continue;
      set_config_value(cfg, section + "." + key, node.data());
    }
  }
  cfg.validate();
  return cfg;
}

RunConfig load_config(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open config file " + path.string());
  std::stringstream ss;
  ss << in.rdbuf();
  return parse_config(ss.str());
}

void RunConfig::validate() const {
  if (data.kind != "external") {
    data.reference.validate();
    data.target.validate();
  }
  if (data.sizes.n_train == 0 || data.sizes.n_val == 0 || data.sizes.n_test == 0)
    throw ConfigError("data sizes must be positive");
  mlp_train_config().validate();
  tune_config().validate();
  pare.validate();
  for (int h : train.hidden)
    if (h <= 0) throw ConfigError("train.arch widths must be positive");
  for (int h : train.subratio_hidden)
    if (h <= 0) throw ConfigError("train.subratio_arch widths must be positive");
  if (eval.bins == 0 || !(eval.r_max > eval.r_min)) throw ConfigError("eval binning is invalid");
  if (eval.features.empty()) throw ConfigError("eval.features is empty");
  if (sweep.eta_count == 0 || sweep.n < 10) throw ConfigError("sweep grid is empty");
  for (double s : sweep.sigma_w)
    if (!(s > 0.0)) throw ConfigError("sweep.sigma_w values must be positive");
  if (!(sweep.eta_min > 0.0)) throw ConfigError("sweep.eta_min must be positive");
  if (!(sweep.train_fraction > 0.0) || !(sweep.val_fraction > 0.0) ||
      sweep.train_fraction + sweep.val_fraction >= 1.0)
    throw ConfigError("sweep split fractions must be positive and leave room for a test split");
}

TrainConfig RunConfig::mlp_train_config() const {
  TrainConfig c;
  c.learning_rate = train.lr;
  c.batch_size = train.batch_size;
  c.patience = train.patience;
  c.epoch_cap = train.epoch_cap;
  c.max_epochs = train.max_epochs;
  c.seed = train.seed;
  return c;
}

SubratioTraining RunConfig::subratio_training(std::size_t input_dim) const {
  SubratioTraining s;
  s.arch.assign(1, static_cast<int>(input_dim));
  s.arch.insert(s.arch.end(), train.subratio_hidden.begin(), train.subratio_hidden.end());
  s.arch.push_back(1);
  s.train = mlp_train_config();
  return s;
}

TuneConfig RunConfig::tune_config() const {
  TuneConfig c;
  c.learning_rate = tune.lr;
  c.subratio_learning_rate = tune.subratio_lr;
  c.batch_size = tune.batch_size;
  c.patience = tune.patience;
  c.epoch_cap = tune.epoch_cap;
  c.max_epochs = tune.max_epochs;
  c.seed = derive_seed(train.seed, "tune");
  return c;
}

ExperimentKind RunConfig::experiment_kind() const {
  if (data.kind == "nonneg") return ExperimentKind::Nonneg;
  if (data.kind == "signed") return ExperimentKind::Signed;
  throw ConfigError("data.kind '" + data.kind + "' has no generator");
}

nlohmann::json config_to_json(const RunConfig& c) {
  auto spec = [](const GaussianMixtureSpec& s) {
    return nlohmann::json{{"c", s.c}, {"sigma1", s.sigma1}, {"sigma2", s.sigma2}};
  };
  return {
      {"data",
       {{"kind", c.data.kind},
        {"reference", spec(c.data.reference)},
        {"target", spec(c.data.target)},
        {"n_train", c.data.sizes.n_train},
        {"n_val", c.data.sizes.n_val},
        {"n_test", c.data.sizes.n_test},
        {"seed", c.data.seed}}},
      {"train",
       {{"lr", c.train.lr},
        {"batch_size", c.train.batch_size},
        {"patience", c.train.patience},
        {"epoch_cap", c.train.epoch_cap},
        {"max_epochs", c.train.max_epochs},
        {"arch", c.train.hidden},
        {"subratio_arch", c.train.subratio_hidden},
        {"seed", c.train.seed}}},
      {"pare", {{"t0", c.pare.t0}, {"t1", c.pare.t1}}},
      {"tune",
       {{"lr", c.tune.lr},
        {"subratio_lr", c.tune.subratio_lr},
        {"batch_size", c.tune.batch_size},
        {"patience", c.tune.patience},
        {"epoch_cap", c.tune.epoch_cap},
        {"max_epochs", c.tune.max_epochs}}},
      {"eval",
       {{"bins", c.eval.bins},
        {"range", {c.eval.r_min, c.eval.r_max}},
        {"features", c.eval.features}}},
      {"sweep",
       {{"sigma_w", c.sweep.sigma_w},
        {"eta_count", c.sweep.eta_count},
        {"eta_min", c.sweep.eta_min},
        {"n", c.sweep.n},
        {"train_fraction", c.sweep.train_fraction},
        {"val_fraction", c.sweep.val_fraction},
        {"seed", c.sweep.seed}}},
  };
}

std::vector<double> eta_grid(double sigma_w, double eta_min, std::size_t count) {
  const double hi = WeightNoiseSpec::eta_max(sigma_w) * (1.0 - 1e-6);
  if (count == 0) throw ConfigError("eta grid needs at least one point");
  if (!(hi > eta_min))
    throw ConfigError("eta range [" + std::to_string(eta_min) + ", " + std::to_string(hi) +
                      "] is empty for sigma_w = " + std::to_string(sigma_w));
  if (count == 1) return {eta_min};
  std::vector<double> out(count);
  for (std::size_t i = 0; i < count; ++i)
    out[i] = eta_min + (hi - eta_min) * static_cast<double>(i) / static_cast<double>(count - 1);
  return out;
}

}  // namespace rosmm

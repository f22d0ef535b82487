#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <random>
#include <vector>

#include "rosmm/error.hpp"
#include "rosmm/nn.hpp"
#include "rosmm/rng.hpp"
#include "support.hpp"

using namespace rosmm;

namespace {

// Straight-line forward pass: explicit loops, no Eigen expressions.
double reference_forward(const MlpModel& m, const std::vector<double>& x) {
  std::vector<double> a = x;
  for (std::size_t l = 0; l < m.num_layers(); ++l) {
    const auto& W = m.params.weights[l];
    const auto& b = m.params.biases[l];
    std::vector<double> z(static_cast<std::size_t>(W.rows()));
    for (Eigen::Index r = 0; r < W.rows(); ++r) {
      double acc = b(r);
      for (Eigen::Index c = 0; c < W.cols(); ++c) acc += W(r, c) * a[static_cast<std::size_t>(c)];
      z[static_cast<std::size_t>(r)] = acc;
    }
    if (l + 1 < m.num_layers())
      for (auto& v : z) v = std::max(v, 0.0);
    a = z;
  }
  return 1.0 / (1.0 + std::exp(-a[0]));
}

MlpModel randomized(std::vector<int> sizes, std::uint64_t seed) {
  MlpModel m = mlp_init(sizes, seed);
  Rng rng(derive_seed(seed, "bias"));
  for (auto& b : m.params.biases)
    for (Eigen::Index i = 0; i < b.size(); ++i) b(i) = 0.3 * rng.normal();
  return m;
}

double loss_at(MlpModel m, const std::vector<double>& flat, const WeightedDataset& batch,
               const LossSpec& loss) {
  m.params.assign_flat(flat);
  return mean_loss(m, batch, loss);
}

double normal_pdf(double x, double mu) { return std::exp(-0.5 * (x - mu) * (x - mu)) / std::sqrt(2 * M_PI); }

}  // namespace

TEST_CASE("mlp_init parameter counts and determinism") {
  CHECK(mlp_init({2, 64, 64, 1}, 7).parameter_count() == 4417);
  CHECK(mlp_init({2, 32, 32, 1}, 7).parameter_count() == 1185);
  CHECK(mlp_init({2, 64, 64, 1}, 7).params == mlp_init({2, 64, 64, 1}, 7).params);
  CHECK_FALSE(mlp_init({2, 8, 1}, 7).params == mlp_init({2, 8, 1}, 8).params);

  const MlpModel m = mlp_init({3, 5, 1}, 11);
  const double bound = 1.0 / std::sqrt(3.0);
  CHECK(m.params.weights[0].cwiseAbs().maxCoeff() <= bound);
  CHECK(m.params.biases[0].isZero());

  CHECK_THROWS_AS(mlp_init({2}, 1), ConfigError);
  CHECK_THROWS_AS(mlp_init({2, 0, 1}, 1), ConfigError);
  CHECK_THROWS_AS(mlp_init({2, 4, 2}, 1), ConfigError);
}

TEST_CASE("forward trivial cases") {
  MlpModel m = mlp_init({2, 4, 1}, 3);
  m.params.set_zero();
  const std::vector<double> x{1.7, -4.0};
  CHECK(forward(m, x) == doctest::Approx(0.5));

  MlpModel one = mlp_init({1, 1}, 1);
  one.params.weights[0](0, 0) = 1.0;
  one.params.biases[0](0) = 0.0;
  const std::vector<double> zero{0.0};
  CHECK(forward(one, zero) == 0.5);

  const std::vector<double> bad{NAN, 0.0};
  CHECK_THROWS_AS(forward(m, bad), NumericInputError);
  const std::vector<double> short_x{1.0};
  CHECK_THROWS_AS(forward(m, short_x), ConfigError);
}

TEST_CASE("forward matches a straight-line reimplementation") {
  const MlpModel m = randomized({2, 64, 64, 1}, 5);
  std::mt19937_64 gen(9);
  std::normal_distribution<double> nd(0.0, 2.0);
  Eigen::MatrixXd xs(2, 3);
  for (Eigen::Index c = 0; c < 3; ++c) xs(0, c) = nd(gen), xs(1, c) = nd(gen);
  const Eigen::RowVectorXd batch = forward_batch(m, xs);
  for (Eigen::Index c = 0; c < 3; ++c) {
    const double ref = reference_forward(m, {xs(0, c), xs(1, c)});
    CHECK(std::abs(batch(c) - ref) <= 1e-12 * std::abs(ref));
    const std::vector<double> x{xs(0, c), xs(1, c)};
    CHECK(std::abs(forward(m, x) - ref) <= 1e-12 * std::abs(ref));
  }
}

TEST_CASE("grad hand-derived logistic case and zero weights") {
  MlpModel m = mlp_init({1, 1}, 1);
  m.params.weights[0](0, 0) = 0.0;
  WeightedDataset b(1);
  const std::vector<double> x{1.0};
  b.push_back(x, 1.0, 1);
  const ParamSet g = grad(m, b, LossSpec{LossKind::Bce});
  CHECK(g.weights[0](0, 0) == doctest::Approx(-0.5).epsilon(1e-14));

  std::mt19937_64 gen(2);
  WeightedDataset z = testing::random_batch(16, 2, gen);
  for (auto& w : z.weights()) w = 0.0;
  const MlpModel net = randomized({2, 8, 1}, 4);
  for (LossKind k : {LossKind::Bce, LossKind::Mse, LossKind::Pare}) {
    const ParamSet gz = grad(net, z, LossSpec{k});
    for (double v : gz.flatten()) CHECK(v == 0.0);
  }
}

TEST_CASE("grad matches central finite differences for all losses") {
  std::mt19937_64 gen(17);
  const double h = 1e-4;
  std::uint64_t seed = 100;
  for (int trial = 0; trial < 30; ++trial) {
    MlpModel m;
    WeightedDataset batch;
    do {
      m = randomized({2, 6, 5, 1}, seed++);
      batch = testing::random_batch(12, 2, gen);
    } while (testing::relu_margin(m, batch) < 1e-2);
    for (LossKind k : {LossKind::Bce, LossKind::Mse, LossKind::Pare}) {
      const LossSpec loss{k};
      const std::vector<double> analytic = grad(m, batch, loss).flatten();
      const std::vector<double> numeric = testing::central_diff(
          [&](const std::vector<double>& p) { return loss_at(m, p, batch, loss); },
          m.params.flatten(), h);
      double scale = 0.0;
      for (double v : analytic) scale = std::max(scale, std::abs(v));
      CAPTURE(trial);
      CAPTURE(to_string(k));
      CHECK(testing::max_rel_error(analytic, numeric, 1e-6 * scale) < 1e-4);
    }
  }
}

TEST_CASE("grad is linear in the batch") {
  std::mt19937_64 gen(23);
  const MlpModel m = randomized({2, 7, 1}, 8);
  const WeightedDataset batch = testing::random_batch(20, 2, gen);
  std::vector<std::size_t> lo(8), hi(12);
  for (std::size_t i = 0; i < 8; ++i) lo[i] = i;
  for (std::size_t i = 0; i < 12; ++i) hi[i] = 8 + i;
  for (LossKind k : {LossKind::Bce, LossKind::Mse, LossKind::Pare}) {
    const LossSpec loss{k};
    ParamSet a = grad(m, batch.subset(lo), loss);
    ParamSet b = grad(m, batch.subset(hi), loss);
    a *= 8.0 / 20.0;
    b *= 12.0 / 20.0;
    a += b;
    const auto whole = grad(m, batch, loss).flatten();
    const auto split = a.flatten();
    for (std::size_t i = 0; i < whole.size(); ++i)
      CHECK(split[i] == doctest::Approx(whole[i]).epsilon(1e-10).scale(1e-12));
  }
}

TEST_CASE("adam_step") {
  MlpModel m = mlp_init({1, 1}, 1);
  m.params.weights[0](0, 0) = 0.0;
  m.params.biases[0](0) = 0.0;
  AdamState st = adam_init(m.params);
  ParamSet g = ParamSet::zeros_like(m.params);
  const ParamSet before = m.params;
  adam_step(m.params, st, g, 0.1);
  CHECK(m.params == before);

  AdamState fresh = adam_init(m.params);
  g.weights[0](0, 0) = 1.0;
  adam_step(m.params, fresh, g, 0.1);
  CHECK(m.params.weights[0](0, 0) == doctest::Approx(-0.1).epsilon(1e-7));
  CHECK(fresh.step == 1);
  CHECK(fresh.m.same_shape(m.params));

  g.weights[0](0, 0) = NAN;
  CHECK_THROWS_AS(adam_step(m.params, fresh, g, 0.1), NumericFailure);
}

TEST_CASE("early stopping on a strictly increasing validation loss") {
  EarlyStopping es(20);
  int epochs = 0;
  while (!es.should_stop()) es.update(1.0 + epochs++);
  CHECK(es.epoch() == 21);
  CHECK(es.best_epoch() == 1);

  // Training pulls the model toward the opposite of the validation labels, so
  // every epoch makes validation worse.
  WeightedDataset tr(1), va(1);
  const std::vector<double> x{1.0};
  for (int i = 0; i < 64; ++i) tr.push_back(x, 1.0, 1), va.push_back(x, 1.0, 0);
  TrainConfig cfg;
  cfg.learning_rate = 1e-2;
  cfg.batch_size = 16;
  cfg.patience = 20;
  cfg.seed = 3;
  const MlpModel init = mlp_init({1, 4, 1}, 2);
  const TrainResult r = train(init, tr, va, cfg, LossSpec{});
  CHECK(r.curve.stopped_epoch == 21);
  CHECK(r.curve.best_epoch == 1);
  REQUIRE(r.curve.val.size() == 21);
  for (std::size_t e = 1; e < r.curve.val.size(); ++e) CHECK(r.curve.val[e] > r.curve.val[e - 1]);
  CHECK(mean_loss(r.model, va, LossSpec{}) == r.curve.val.front());
  CHECK(r.curve.stopped_epoch - r.curve.best_epoch <= cfg.patience);
}

TEST_CASE("training recovers the optimal classifier of two 1D Gaussians") {
  // p0 = N(-1, 1), p1 = N(1, 1); optimum p1 / (p0 + p1).
  Rng rng(31);
  WeightedDataset tr(1), va(1);
  for (int i = 0; i < 40000; ++i) {
    const int y = i % 2;
    const std::vector<double> x{rng.normal() + (y ? 1.0 : -1.0)};
    (i < 30000 ? tr : va).push_back(x, 1.0, y);
  }
  TrainConfig cfg;
  cfg.learning_rate = 1e-3;
  cfg.batch_size = 128;
  cfg.patience = 10;
  cfg.max_epochs = 200;
  cfg.seed = 4;
  const TrainResult r = train(mlp_init({1, 16, 16, 1}, 5), tr, va, cfg, LossSpec{});
  // Central 90% of the equal mixture lies within about +-2.3.
  for (double xv = -2.3; xv <= 2.3; xv += 0.1) {
    const double want = normal_pdf(xv, 1.0) / (normal_pdf(xv, -1.0) + normal_pdf(xv, 1.0));
    const std::vector<double> x{xv};
    CAPTURE(xv);
    CHECK(std::abs(forward(r.model, x) - want) < 0.05);
  }
}

TEST_CASE("training is deterministic") {
  std::mt19937_64 gen(41);
  WeightedDataset tr = testing::random_batch(300, 2, gen);
  WeightedDataset va = testing::random_batch(100, 2, gen);
  for (auto& w : tr.weights()) w = std::abs(w);
  for (auto& w : va.weights()) w = std::abs(w);
  TrainConfig cfg;
  cfg.learning_rate = 1e-3;
  cfg.batch_size = 32;
  cfg.patience = 3;
  cfg.max_epochs = 15;
  cfg.epoch_cap = 200;
  cfg.seed = 12;
  const TrainResult a = train(mlp_init({2, 8, 1}, 1), tr, va, cfg, LossSpec{});
  const TrainResult b = train(mlp_init({2, 8, 1}, 1), tr, va, cfg, LossSpec{});
  CHECK(a.model.params == b.model.params);
  CHECK(a.curve.val == b.curve.val);
  CHECK(mean_loss(a.model, va, LossSpec{}) == *std::min_element(a.curve.val.begin(), a.curve.val.end()));
}

TEST_CASE("checkpoint round trip") {
  MlpModel m = randomized({2, 5, 3, 1}, 77);
  m.loss = LossKind::Pare;
  const auto dir = testing::scratch_dir("nn_ckpt");
  save_mlp(dir / "m.json", m);
  const MlpModel back = load_mlp(dir / "m.json");
  CHECK(back.params == m.params);
  CHECK(back.layer_sizes == m.layer_sizes);
  CHECK(back.loss == LossKind::Pare);
  CHECK(back.seed == m.seed);

  nlohmann::json j = mlp_to_json(m);
  CHECK(j["kind"] == "mlp");
  CHECK(j["activation"] == "relu");
  j["kind"] = "rosmm";
  CHECK_THROWS_AS(mlp_from_json(j), FormatError);
  j = mlp_to_json(m);
  j["weights"][0].erase(0);
  CHECK_THROWS_AS(mlp_from_json(j), FormatError);
}

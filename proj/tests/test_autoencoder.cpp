#include <filesystem>
#include <fstream>
#include <numeric>
#include <random>

#include "doctest.h"
#include "ecgtda/autoencoder.hpp"
#include "support/gradcheck.hpp"

using namespace ecgtda;
namespace fs = std::filesystem;

namespace {

const std::vector<int> kSmall = {12, 8, 5, 3, 5, 8, 12};

Eigen::MatrixXd random_batch(Eigen::Index rows, Eigen::Index cols, std::uint64_t seed, double sd = 0.5) {
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> n(0, sd);
  Eigen::MatrixXd b(rows, cols);
  for (auto& v : b.reshaped()) v = n(rng);
  return b;
}

bool same_parameters(const ae::AEModel& a, const ae::AEModel& b) { return ae::flatten(a) == ae::flatten(b); }

}  // namespace

TEST_CASE("initialization") {
  const auto a = ae::ae_init(5), b = ae::ae_init(5), c = ae::ae_init(6);
  CHECK(same_parameters(a, b));
  CHECK_FALSE(same_parameters(a, c));
  REQUIRE(a.layers.size() == 6);
  CHECK(a.latent_size() == 20);
  CHECK(a.input_size() == 400);

  const auto& w = a.layers[0].weight;
  CHECK(w.rows() == 200);
  CHECK(w.cols() == 400);
  const double sd = std::sqrt((w.array() - w.mean()).square().mean());
  CHECK(sd >= 0.9 * std::sqrt(2.0 / 400));
  CHECK(sd <= 1.1 * std::sqrt(2.0 / 400));
  for (std::size_t l = 0; l < 5; ++l) CHECK((a.layers[l].slope.array() == 0.25).all());
  CHECK(a.layers[5].linear());
  for (const auto& l : a.layers) CHECK(l.bias.isZero(0.0));

  const auto f = ae::ae_forward(a, Eigen::VectorXd::Zero(400));
  CHECK(f.reconstruction.allFinite());

  CHECK_THROWS_AS(ae::ae_init(1, {4, 3, 5}), InvalidInput);
  CHECK_THROWS_AS(ae::ae_init(1, {4, 4}), InvalidInput);
}

TEST_CASE("forward contract") {
  const auto m = ae::ae_init(1);
  const Eigen::VectorXd x = random_batch(400, 1, 2).col(0);
  const auto f = ae::ae_forward(m, x, 0.5, false);
  CHECK(f.latent.size() == 20);
  CHECK(f.reconstruction.size() == 400);
  CHECK(ae::ae_forward(m, x, 0.3, false).reconstruction == f.reconstruction);

  std::mt19937_64 rng(3);
  CHECK(ae::ae_forward(m, x, 0.0, true, &rng).reconstruction == f.reconstruction);
  CHECK(ae::ae_forward(m, x, 0.5, true, &rng).reconstruction != f.reconstruction);
  CHECK_THROWS_AS(ae::ae_forward(m, Eigen::VectorXd::Zero(399)), InvalidInput);
}

TEST_CASE("dropout schedule") {
  const ae::TrainConfig cfg;
  CHECK(cfg.dropout_rate(0) == 0.5);
  CHECK(cfg.dropout_rate(50) == 0.25);
  CHECK(cfg.dropout_rate(99) == doctest::Approx(0.005));
  for (int e = 100; e < 200; ++e) CHECK(cfg.dropout_rate(e) == 0.0);
  for (int e = 1; e < 100; ++e) CHECK(cfg.dropout_rate(e) < cfg.dropout_rate(e - 1));

  ae::TrainConfig bad;
  bad.epochs = 0;
  CHECK_THROWS_AS(bad.validate(), InvalidInput);
  bad = {};
  bad.batch_size = 0;
  CHECK_THROWS_AS(bad.validate(), InvalidInput);
}

TEST_CASE("gradients match finite differences on a small model") {
  auto m = ae::ae_init(3, kSmall);
  oracle::perturb(m, 4);
  const auto batch = random_batch(12, 10, 5);
  std::vector<std::size_t> all(m.parameter_count());
  std::iota(all.begin(), all.end(), 0);

  const auto plain = oracle::gradient_check(m, batch, all);
  CHECK(plain.checked == m.parameter_count());
  CHECK(plain.max_relative < 1e-4);

  const auto dropped = oracle::gradient_check(m, batch, all, 1e-5, 0.3, 9);
  CHECK(dropped.max_relative < 1e-4);
}

TEST_CASE("long double differences over every parameter") {
  auto m = ae::ae_init(3, kSmall);
  oracle::perturb(m, 4);
  const auto r = oracle::exhaustive_gradient_check(m, random_batch(12, 3, 7));
  CHECK(r.checked == m.parameter_count());
  CHECK(r.max_relative < 1e-6);
}

TEST_CASE("gradients match finite differences on the default model (sampled)") {
  auto m = ae::ae_init(3);
  oracle::perturb(m, 4);
  const auto batch = random_batch(400, 10, 6);
  const auto r = oracle::gradient_check(m, batch, oracle::sampled_indices(m, 997));
  CHECK(r.checked > 1500);
  CHECK(r.max_relative < 1e-4);
}

TEST_CASE("zero gradients leave parameters unchanged") {
  auto m = ae::ae_init(2, kSmall);
  const auto before = ae::flatten(m);
  ae::Gradients g;
  ae::loss_and_gradient(m, random_batch(12, 4, 1), &g);
  for (auto& w : g.weight) w.setZero();
  for (auto& b : g.bias) b.setZero();
  for (auto& a : g.slope) a.setZero();
  for (int i = 0; i < 5; ++i) ae::adadelta_step(m, g);
  CHECK(ae::flatten(m) == before);
}

TEST_CASE("training is deterministic and reduces the loss") {
  const auto data = random_batch(12, 60, 8, 0.3);
  ae::TrainConfig cfg;
  cfg.epochs = 40;
  cfg.batch_size = 16;
  cfg.seed = 11;
  auto a = ae::ae_init(1, kSmall), b = ae::ae_init(1, kSmall);
  const double initial = ae::batch_loss(a, data);
  const auto ra = ae::ae_train(a, data, cfg);
  const auto rb = ae::ae_train(b, data, cfg);
  CHECK(same_parameters(a, b));
  CHECK(ra.epoch_loss == rb.epoch_loss);
  CHECK(ra.dropout[0] == 0.5);
  CHECK(a.epoch == 40);
  CHECK(ae::batch_loss(a, data) < initial);

  cfg.seed = 12;
  auto c = ae::ae_init(1, kSmall);
  ae::ae_train(c, data, cfg);
  CHECK_FALSE(same_parameters(a, c));

  CHECK_THROWS_AS(ae::ae_train(c, random_batch(11, 5, 1), cfg), InvalidInput);
  Eigen::MatrixXd bad = data;
  bad(0, 0) = NAN;
  CHECK_THROWS_AS(ae::ae_train(c, bad, cfg), InvalidInput);
}

TEST_CASE("channels") {
  // Zero weights and an output bias equal to the input reconstruct it exactly.
  auto m = ae::ae_init(1, kSmall);
  const Eigen::VectorXd x = random_batch(12, 1, 3).col(0);
  for (auto& l : m.layers) l.weight.setZero();
  m.layers.back().bias = x;
  const auto perfect = ae::ae_channels(m, x);
  CHECK(perfect.residual.isZero(0.0));
  CHECK(perfect.score == 0.0);
  CHECK(perfect.latent.size() == 3);

  const auto r = ae::ae_init(2, kSmall);
  for (int t = 0; t < 10; ++t) {
    const Eigen::VectorXd y = random_batch(12, 1, 100 + t).col(0);
    const auto c = ae::ae_channels(r, y);
    CHECK(c.residual == y - ae::ae_forward(r, y).reconstruction);
    CHECK(c.score == doctest::Approx(c.residual.array().square().mean()).epsilon(1e-15));
  }
}

TEST_CASE("save and load") {
  const auto dir = fs::temp_directory_path() / "ecgtda_ae_io";
  fs::remove_all(dir);
  fs::create_directories(dir);

  auto m = ae::ae_init(4, kSmall);
  ae::TrainConfig cfg;
  cfg.epochs = 3;
  ae::ae_train(m, random_batch(12, 20, 2), cfg);
  ae::save(m, dir / "model");
  for (const auto& p : {dir / "model", dir / "model.json", dir / "model.bin"}) {
    const auto back = ae::load(p);
    CHECK(same_parameters(back, m));
    CHECK(back.epoch == 3);
    CHECK(back.sizes == m.sizes);
    CHECK(back.optimizer.slots[2].grad_sq_w == m.optimizer.slots[2].grad_sq_w);
    CHECK(back.optimizer.slots[4].update_sq_a == m.optimizer.slots[4].update_sq_a);
  }

  // Continuing training from a loaded model matches continuing in memory.
  auto reloaded = ae::load(dir / "model");
  ae::ae_train(m, random_batch(12, 20, 2), cfg);
  ae::ae_train(reloaded, random_batch(12, 20, 2), cfg);
  CHECK(same_parameters(m, reloaded));

  CHECK_THROWS_AS(ae::load(dir / "missing"), ParseError);
  const auto bin = dir / "model.bin";
  fs::resize_file(bin, fs::file_size(bin) / 2);
  CHECK_THROWS_AS(ae::load(dir / "model"), ParseError);
  std::ofstream(dir / "junk.json") << "{\"format\": \"other\"}";
  CHECK_THROWS_AS(ae::load(dir / "junk.json"), ParseError);
  std::ofstream(dir / "broken.json") << "{";
  CHECK_THROWS_AS(ae::load(dir / "broken.json"), ParseError);
}

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <fstream>

#include "augnet/error.hpp"
#include "augnet/trainer.hpp"
#include "doctest.h"

using namespace augnet;

namespace {

ParameterStore two_param_store() {
  ParameterStore s;
  s.add("trunk.w", {2}, {0.5, -0.5}, ParamGroup::trunk);
  s.add("aug.0.mu", {2}, {0.99, 0.2}, ParamGroup::aug_magnitudes);
  return s;
}

DatasetSplits tiny_sinusoids(std::uint64_t seed = 0) {
  DatasetSpec spec = DatasetSpec::sinusoids();
  spec.n_train = 64;
  spec.n_val = 32;
  spec.n_test = 32;
  spec.length = 128;
  spec.seed = seed;
  return generate(spec);
}

AugNetModel tiny_model(std::uint64_t seed = 0) {
  TrunkConfig tc;
  tc.kind = TrunkKind::mlp;
  tc.mlp_widths = {8};
  tc.input_shape = {1, 128};
  Rng rng(seed);
  AugNetModel m(tc, rng);
  auto fs = TransformSpec::defaults(TransformKind::frequency_shift);
  m.add_layer({fs, TransformSpec::defaults(TransformKind::gaussian_noise)}, 0.1);
  m.copies_train = 2;
  m.copies_eval = 2;
  return m;
}

TrainConfig tiny_config() {
  TrainConfig c;
  c.epochs = 3;
  c.batch_size = 16;
  c.adam.lr = 1e-2;
  c.seed = 5;
  return c;
}

}  // namespace

TEST_CASE("first Adam step moves each coordinate by about lr") {
  auto s = two_param_store();
  Adam adam(s, {.lr = 0.01});
  const std::vector<std::vector<double>> g{{3.0, -0.2}, {-1e-3, 1e-3}};
  adam.step(s, g);
  CHECK(s[0].value[0] == doctest::Approx(0.49).epsilon(1e-6));
  CHECK(s[0].value[1] == doctest::Approx(-0.49).epsilon(1e-6));
  CHECK(s[1].value[0] == doctest::Approx(1.0));
  CHECK(s[1].value[1] == doctest::Approx(0.19).epsilon(1e-5));
  CHECK(adam.steps() == 1);
}

TEST_CASE("zero gradient without decay leaves parameters unchanged") {
  auto s = two_param_store();
  const auto before = flatten_values(s);
  Adam adam(s, {.lr = 0.1});
  const std::vector<std::vector<double>> g{{0.0, 0.0}, {0.0, 0.0}};
  for (int i = 0; i < 5; ++i) adam.step(s, g);
  CHECK(flatten_values(s) == before);
}

TEST_CASE("magnitudes are clamped into the unit interval") {
  auto s = two_param_store();
  Adam adam(s, {.lr = 0.21});
  const std::vector<std::vector<double>> g{{0.0, 0.0}, {-1.0, 1.0}};
  adam.step(s, g);
  CHECK(s[1].value[0] == 1.0);
  CHECK(s[1].value[1] == 0.0);
}

TEST_CASE("weight decay reaches trunk parameters only") {
  auto s = two_param_store();
  Adam adam(s, {.lr = 0.01, .weight_decay = 1.0});
  const std::vector<std::vector<double>> g{{0.0, 0.0}, {0.0, 0.0}};
  adam.step(s, g);
  CHECK(s[0].value[0] < 0.5);
  CHECK(s[0].value[1] > -0.5);
  CHECK(s[1].value[0] == 0.99);
  CHECK(s[1].value[1] == 0.2);
}

TEST_CASE("non-finite gradient is reported by parameter name and changes nothing") {
  auto s = two_param_store();
  const auto before = flatten_values(s);
  Adam adam(s, {.lr = 0.01});
  const std::vector<std::vector<double>> g{{0.0, 0.0}, {std::nan(""), 0.0}};
  try {
    adam.step(s, g);
    FAIL("expected NumericError");
  } catch (const NumericError& e) {
    CHECK(std::string(e.what()).find("aug.0.mu") != std::string::npos);
  }
  CHECK(flatten_values(s) == before);
  CHECK(adam.steps() == 0);
  CHECK_THROWS_AS(Adam(s, {.lr = 0.0}), ConfigError);
}

TEST_CASE("checkpoint round trip restores parameters and running statistics") {
  auto m = tiny_model();
  const auto data = tiny_sinusoids();
  auto cfg = tiny_config();
  cfg.epochs = 1;
  train(m, data, cfg);
  const Checkpoint ck = snapshot(m);
  const auto path = std::filesystem::temp_directory_path() / "augnet_test_model.ckpt";
  save_checkpoint(path, ck);
  const Checkpoint loaded = load_checkpoint(path);
  REQUIRE(loaded.size() == ck.size());
  for (std::size_t i = 0; i < ck.size(); ++i) {
    CHECK(loaded[i].name == ck[i].name);
    CHECK(loaded[i].shape == ck[i].shape);
    CHECK(loaded[i].data == ck[i].data);
  }

  auto fresh = tiny_model(99);
  restore(fresh, loaded);
  CHECK(flatten_values(fresh.params()) == flatten_values(m.params()));
  Rng a(3), b(3);
  const Tensor pf = predict(fresh, data.test.x, 2, a), pm = predict(m, data.test.x, 2, b);
  CHECK(std::equal(pf.data().begin(), pf.data().end(), pm.data().begin()));

  {
    std::ofstream out(path, std::ios::binary | std::ios::app);
    out.put('x');
  }
  CHECK_THROWS_AS(load_checkpoint(path), FormatError);
  std::filesystem::resize_file(path, 20);
  CHECK_THROWS_AS(load_checkpoint(path), FormatError);
  std::filesystem::remove(path);

  Checkpoint wrong = ck;
  wrong[0].name = "trunk.bogus";
  CHECK_THROWS_AS(restore(fresh, wrong), FormatError);
  wrong = ck;
  wrong.pop_back();
  CHECK_THROWS_AS(restore(fresh, wrong), FormatError);
}

TEST_CASE("zero epochs give an empty history and the initial state") {
  auto m = tiny_model();
  const auto before = flatten_values(m.params());
  auto cfg = tiny_config();
  cfg.epochs = 0;
  const auto res = train(m, tiny_sinusoids(), cfg);
  CHECK(res.history.empty());
  CHECK(flatten_values(m.params()) == before);
  REQUIRE(!res.best.empty());
  CHECK(res.best[0].data == m.params()[0].value);
}

TEST_CASE("training is deterministic and keeps the augmentation state feasible") {
  const auto data = tiny_sinusoids();
  auto m1 = tiny_model(), m2 = tiny_model();
  const auto r1 = train(m1, data, tiny_config());
  const auto r2 = train(m2, data, tiny_config());
  REQUIRE(r1.history.size() == 3);
  REQUIRE(r2.history.size() == 3);
  for (std::size_t e = 0; e < 3; ++e) {
    CHECK(r1.history[e].train_loss == r2.history[e].train_loss);
    CHECK(r1.history[e].val_acc == r2.history[e].val_acc);
    CHECK(r1.history[e].magnitudes == r2.history[e].magnitudes);
    double wsum = 0.0;
    for (double w : r1.history[e].weights[0]) wsum += w;
    CHECK(wsum == doctest::Approx(1.0).epsilon(1e-12));
    for (double mu : r1.history[e].magnitudes[0]) {
      CHECK(mu >= 0.0);
      CHECK(mu <= 1.0);
    }
    CHECK(r1.history[e].ranges[0][0] == doctest::Approx(2.0 * r1.history[e].magnitudes[0][0]));
  }
  CHECK(flatten_values(m1.params()) == flatten_values(m2.params()));
  CHECK(r1.best_epoch >= 1);
  CHECK(r1.best_val_acc == r1.history[r1.best_epoch - 1].val_acc);
}

TEST_CASE("training lowers the loss on a learnable task") {
  auto m = tiny_model();
  auto cfg = tiny_config();
  cfg.epochs = 15;
  cfg.lambda = 0.0;
  const auto res = train(m, tiny_sinusoids(), cfg);
  CHECK(res.history.back().train_loss < res.history.front().train_loss);
  CHECK(res.best_val_acc > 0.4);
}

TEST_CASE("early stopping triggers once validation accuracy stalls") {
  auto m = tiny_model();
  auto cfg = tiny_config();
  cfg.epochs = 10;
  cfg.adam.lr = 1e-14;
  cfg.patience = 1;
  const auto res = train(m, tiny_sinusoids(), cfg);
  CHECK(res.stopped_early);
  CHECK(res.history.size() < 10);
  CHECK(res.history.size() == res.best_epoch + cfg.patience);
}

TEST_CASE("divergence keeps the last finite epoch") {
  auto m = tiny_model();
  auto cfg = tiny_config();
  cfg.epochs = 4;
  cfg.on_epoch = [&](const EpochRecord& r) {
    if (r.epoch == 2) m.params()[0].value[0] = std::numeric_limits<double>::infinity();
  };
  const auto res = train(m, tiny_sinusoids(), cfg);
  CHECK(res.diverged);
  CHECK(res.history.size() == 2);
  CHECK(res.divergence.find("epoch 3") != std::string::npos);
  CHECK(!res.stopped_early);
}

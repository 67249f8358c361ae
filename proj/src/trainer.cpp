#include "augnet/trainer.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>

#include "augnet/error.hpp"
#include "augnet/metrics.hpp"
#include "augnet/ops.hpp"

namespace augnet {

Adam::Adam(const ParameterStore& store, AdamConfig config) : config_(config) {
  if (!(config.lr > 0.0)) throw ConfigError("adam: learning rate must be positive");
  if (!(config.beta1 >= 0.0 && config.beta1 < 1.0) || !(config.beta2 >= 0.0 && config.beta2 < 1.0)) {
    throw ConfigError("adam: betas must lie in [0, 1)");
  }
  if (!(config.weight_decay >= 0.0)) throw ConfigError("adam: weight decay must be non-negative");
  for (const auto& p : store) {
    m_.emplace_back(p.value.size(), 0.0);
    v_.emplace_back(p.value.size(), 0.0);
  }
}

void Adam::step(ParameterStore& store, std::span<const std::vector<double>> grads) {
  if (grads.size() != store.size() || m_.size() != store.size()) throw ShapeError("adam: gradient count mismatch");
  for (std::size_t i = 0; i < store.size(); ++i) {
    if (grads[i].size() != store[i].value.size()) throw ShapeError("adam: gradient shape mismatch for " + store[i].name);
    for (double g : grads[i]) {
      if (!std::isfinite(g)) throw NumericError("non-finite gradient for parameter '" + store[i].name + "'");
    }
  }
  ++t_;
  const double c1 = 1.0 - std::pow(config_.beta1, static_cast<double>(t_));
  const double c2 = 1.0 - std::pow(config_.beta2, static_cast<double>(t_));
  for (std::size_t i = 0; i < store.size(); ++i) {
    auto& p = store[i];
    const double decay = p.group == ParamGroup::trunk ? config_.weight_decay : 0.0;
    auto& m = m_[i];
    auto& v = v_[i];
    for (std::size_t k = 0; k < p.value.size(); ++k) {
      const double g = grads[i][k] + decay * p.value[k];
      m[k] = config_.beta1 * m[k] + (1.0 - config_.beta1) * g;
      v[k] = config_.beta2 * v[k] + (1.0 - config_.beta2) * g * g;
      p.value[k] -= config_.lr * (m[k] / c1) / (std::sqrt(v[k] / c2) + config_.eps);
    }
    if (p.group == ParamGroup::aug_magnitudes) {
      for (auto& x : p.value) x = std::clamp(x, 0.0, 1.0);
    }
  }
}

void fill_aug_state(const AugNetModel& model, EpochRecord& rec) {
  rec.weights.clear();
  rec.magnitudes.clear();
  rec.ranges.clear();
  for (std::size_t l = 0; l < model.layers().size(); ++l) {
    rec.weights.push_back(model.weights(l));
    rec.magnitudes.push_back(model.magnitudes(l));
    std::vector<double> r;
    const auto& ts = model.layers()[l].transforms;
    for (std::size_t q = 0; q < ts.size(); ++q) r.push_back(ts[q].physical(rec.magnitudes.back()[q]));
    rec.ranges.push_back(std::move(r));
  }
}

double evaluate_accuracy(AugNetModel& model, const Dataset& data, std::size_t copies, Rng& rng) {
  if (data.size() == 0) return 0.0;
  return accuracy(predict(model, data.x, copies, rng), data.y);
}

TrainResult train(AugNetModel& model, const DatasetSplits& data, const TrainConfig& config) {
  if (config.batch_size < 1) throw ConfigError("batch size must be at least 1");
  if (data.train.size() == 0) throw ConfigError("empty training set");
  Adam adam(model.params(), config.adam);
  const Rng root(config.seed);
  Rng aug_rng = root.split(101);
  Rng input_rng = root.split(102);

  TrainResult result;
  result.best = snapshot(model);
  std::size_t since_best = 0;
  bool have_best = false;
  using clock = std::chrono::steady_clock;

  for (std::size_t epoch = 0; epoch < config.epochs; ++epoch) {
    const auto start = clock::now();
    EpochRecord rec;
    rec.epoch = epoch + 1;
    double loss_sum = 0.0;
    std::size_t hits = 0, seen = 0;
    try {
      for (const auto& idx : batch_indices(data.train.size(), config.batch_size, true, config.seed, epoch)) {
        Batch batch = make_batch(data.train, idx);
        if (config.input_augment) batch.x = config.input_augment(batch.x, input_rng);
        Tape tape;
        const auto params = model.params().bind(&tape);
        const LossTerms terms =
            training_loss(batch.x, batch.y, model, params, config.lambda, config.reg, model.copies_train, aug_rng);
        const double loss = terms.total.item();
        if (!std::isfinite(loss)) throw NumericError("non-finite training loss");
        tape.backward(terms.total);
        std::vector<std::vector<double>> grads;
        grads.reserve(params.size());
        for (const auto& p : params) grads.push_back(tape.grad(p));
        adam.step(model.params(), grads);

        loss_sum += loss * static_cast<double>(idx.size());
        const auto pred = argmax_rows(terms.logits);
        for (std::size_t k = 0; k < pred.size(); ++k) hits += pred[k] == batch.y[k];
        seen += idx.size();
      }
    } catch (const NumericError& e) {
      result.diverged = true;
      result.divergence = "epoch " + std::to_string(epoch + 1) + ": " + e.what();
      break;
    }
    rec.train_loss = loss_sum / static_cast<double>(seen);
    rec.train_acc = static_cast<double>(hits) / static_cast<double>(seen);
    Rng eval_rng = root.split(1000 + epoch);
    rec.val_acc = evaluate_accuracy(model, data.val, model.copies_eval, eval_rng);
    rec.test_acc = evaluate_accuracy(model, data.test, model.copies_eval, eval_rng);
    fill_aug_state(model, rec);
    rec.seconds = std::chrono::duration<double>(clock::now() - start).count();

    const bool improved = !have_best || rec.val_acc > result.best_val_acc || data.val.size() == 0;
    if (improved) {
      have_best = true;
      result.best = snapshot(model);
      result.best_epoch = rec.epoch;
      result.best_val_acc = rec.val_acc;
      result.test_acc_at_best = rec.test_acc;
      since_best = 0;
    } else {
      ++since_best;
    }
    result.history.push_back(rec);
    if (config.on_epoch) config.on_epoch(rec);
    if (config.patience > 0 && since_best >= config.patience) {
      result.stopped_early = true;
      break;
    }
  }
  return result;
}

}  // namespace augnet

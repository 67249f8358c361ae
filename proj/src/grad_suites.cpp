#include "augnet/grad_suites.hpp"

#include <algorithm>
#include <cmath>
#include <functional>

#include "augnet/augnet.hpp"
#include "augnet/error.hpp"
#include "augnet/fft.hpp"
#include "augnet/grad_check.hpp"
#include "augnet/nn.hpp"
#include "augnet/ops.hpp"
#include "augnet/params.hpp"
#include "augnet/transforms.hpp"
#include "augnet/trunks.hpp"

namespace augnet {

GradScope grad_scope_from_string(std::string_view name) {
  if (name == "ops") return GradScope::ops;
  if (name == "augmentations") return GradScope::augmentations;
  if (name == "models") return GradScope::models;
  if (name == "all") return GradScope::all;
  throw ConfigError("unknown grad-check scope '" + std::string(name) + "'");
}

namespace {

constexpr double kStep = 1e-6;

Tensor random(Rng& rng, Shape shape, double lo = -1.0, double hi = 1.0) {
  std::vector<double> v(numel(shape));
  for (auto& x : v) x = rng.uniform(lo, hi);
  return Tensor(std::move(shape), std::move(v));
}

std::vector<double> probe_for(Rng& rng, std::size_t n) {
  std::vector<double> p(n);
  for (auto& x : p) x = rng.uniform(-1.0, 1.0);
  return p;
}

class Suite {
 public:
  Suite(std::string name, double tol, const std::optional<std::string>& perturb, std::vector<GradItem>& out)
      : name_(std::move(name)), tol_(tol), perturb_(perturb), out_(out) {}

  GradientFn override_for(const std::string& item, const ScalarFn& f) const {
    if (!perturb_ || *perturb_ != item) return {};
    return [f](const Tensor& x) {
      auto g = autodiff_gradient(f, x);
      for (auto& v : g) v *= 1.01;
      return g;
    };
  }

  double error(const std::string& item, const ScalarFn& f, const Tensor& point) const {
    return grad_check(f, point, kStep, override_for(item, f)).max_rel_error;
  }

  // Worst error over several (name, function, point) checks reported as one item.
  void add(const std::string& item, const std::vector<std::pair<ScalarFn, Tensor>>& checks) {
    double worst = 0.0;
    for (const auto& [f, x] : checks) worst = std::max(worst, error(item, f, x));
    out_.push_back({name_, item, worst, tol_});
  }

  void add_value(const std::string& item, double err) { out_.push_back({name_, item, err, tol_}); }
  bool perturbed(const std::string& item) const { return perturb_ && *perturb_ == item; }

 private:
  std::string name_;
  double tol_;
  const std::optional<std::string>& perturb_;
  std::vector<GradItem>& out_;
};

// sum(probe * op(x)) as a checkable scalar function.
ScalarFn projected(std::function<Tensor(const Tensor&)> op, std::vector<double> probe) {
  return [op = std::move(op), probe = std::move(probe)](Tape&, const Tensor& x) { return weighted_sum(op(x), probe); };
}

void ops_suite(Suite& s) {
  Rng rng(20240101);
  auto unary = [&](const std::string& name, std::function<Tensor(const Tensor&)> op, Shape shape, Shape out_shape,
                   double lo = -1.0, double hi = 1.0) {
    const Tensor x = random(rng, shape, lo, hi);
    s.add(name, {{projected(std::move(op), probe_for(rng, numel(out_shape))), x}});
  };
  const Shape m{3, 4};
  {
    const Tensor a = random(rng, m), b = random(rng, m);
    const auto p = probe_for(rng, 12);
    s.add("add", {{projected([&](const Tensor& x) { return add(x, b); }, p), a},
                  {projected([&](const Tensor& x) { return add(a, x); }, p), b}});
    s.add("sub", {{projected([&](const Tensor& x) { return sub(x, b); }, p), a},
                  {projected([&](const Tensor& x) { return sub(a, x); }, p), b}});
    s.add("mul", {{projected([&](const Tensor& x) { return mul(x, b); }, p), a},
                  {projected([&](const Tensor& x) { return mul(a, x); }, p), b},
                  {projected([](const Tensor& x) { return mul(x, x); }, p), a}});
  }
  unary("scale", [](const Tensor& x) { return scale(x, -2.5); }, m, m);
  unary("add_constant", [](const Tensor& x) { return add_constant(x, 0.7); }, m, m);
  unary("negate", [](const Tensor& x) { return negate(x); }, m, m);
  unary("relu", [](const Tensor& x) { return relu(x); }, m, m);
  unary("exp", [](const Tensor& x) { return exp(x); }, m, m);
  unary("log", [](const Tensor& x) { return log(x); }, m, m, 0.3, 2.0);
  unary("sqrt", [](const Tensor& x) { return sqrt(x); }, m, m, 0.3, 2.0);
  unary("clamp", [](const Tensor& x) { return clamp(x, -0.5, 0.5); }, m, m);
  unary("square", [](const Tensor& x) { return square(x); }, m, m);
  s.add("sum", {{[](Tape&, const Tensor& x) { return sum(x); }, random(rng, m)}});
  s.add("mean", {{[](Tape&, const Tensor& x) { return mean(x); }, random(rng, m)}});
  unary("reshape", [](const Tensor& x) { return reshape(x, {2, 6}); }, m, {2, 6});
  s.add("pick", {{[](Tape&, const Tensor& x) { return pick(x, 5); }, random(rng, m)}});
  unary("softmax", [](const Tensor& x) { return softmax(x); }, {6}, {6}, -2.0, 2.0);
  {
    const Tensor a = random(rng, {2, 3}), b = random(rng, {3, 3});
    const auto p = probe_for(rng, 15);
    s.add("concat", {{projected([&](const Tensor& x) { return concat(std::vector<Tensor>{x, b}); }, p), a},
                     {projected([&](const Tensor& x) { return concat(std::vector<Tensor>{a, x}); }, p), b}});
  }
  unary("slice_rows", [](const Tensor& x) { return slice_rows(x, 1, 3); }, {4, 3}, {2, 3});
  {
    const std::vector<std::size_t> idx{2, 0, 2, 3};
    unary("gather_rows", [idx](const Tensor& x) { return gather_rows(x, idx); }, {4, 3}, {4, 3});
  }
  unary("tile_rows", [](const Tensor& x) { return tile_rows(x, 3); }, {2, 3}, {6, 3});
  unary("mean_of_groups", [](const Tensor& x) { return mean_of_groups(x, 3); }, {6, 2}, {2, 2});
  {
    const Tensor x = random(rng, {3, 5}), w = random(rng, {4, 5}), b = random(rng, {4});
    const auto p = probe_for(rng, 12);
    s.add("dense", {{projected([&](const Tensor& v) { return dense(v, w, b); }, p), x},
                    {projected([&](const Tensor& v) { return dense(x, v, b); }, p), w},
                    {projected([&](const Tensor& v) { return dense(x, w, v); }, p), b}});
  }
  {
    const Tensor x = random(rng, {2, 2, 9}), w = random(rng, {3, 2, 3}), b = random(rng, {3});
    const auto p = probe_for(rng, 2 * 3 * 5);
    s.add("conv1d", {{projected([&](const Tensor& v) { return conv1d(v, w, b, 2, 1); }, p), x},
                     {projected([&](const Tensor& v) { return conv1d(x, v, b, 2, 1); }, p), w},
                     {projected([&](const Tensor& v) { return conv1d(x, w, v, 2, 1); }, p), b}});
  }
  {
    const Tensor x = random(rng, {2, 2, 5, 5}), w = random(rng, {3, 2, 3, 3}), b = random(rng, {3});
    const auto p = probe_for(rng, 2 * 3 * 25);
    s.add("conv2d", {{projected([&](const Tensor& v) { return conv2d(v, w, b, 1, 1); }, p), x},
                     {projected([&](const Tensor& v) { return conv2d(x, v, b, 1, 1); }, p), w},
                     {projected([&](const Tensor& v) { return conv2d(x, w, v, 1, 1); }, p), b}});
  }
  unary("maxpool1d", [](const Tensor& x) { return maxpool1d(x, 2, 2); }, {2, 2, 8}, {2, 2, 4});
  unary("maxpool2d", [](const Tensor& x) { return maxpool2d(x, 2, 2); }, {2, 2, 4, 4}, {2, 2, 2, 2});
  unary("global_mean_pool", [](const Tensor& x) { return global_mean_pool(x); }, {2, 3, 5}, {2, 3});
  unary("flatten", [](const Tensor& x) { return flatten(x); }, {2, 3, 2}, {2, 6});
  {
    const Tensor x = random(rng, {4, 3, 5}), g = random(rng, {3}, 0.5, 1.5), b = random(rng, {3});
    const auto p = probe_for(rng, x.size());
    auto bn = [](const Tensor& v, const Tensor& gamma, const Tensor& beta, Mode mode) {
      RunningStats stats(3);
      stats.mean = {0.1, -0.2, 0.3};
      stats.var = {0.5, 1.5, 2.0};
      return batch_norm(v, gamma, beta, stats, mode);
    };
    s.add("batch_norm", {{projected([&](const Tensor& v) { return bn(v, g, b, Mode::train); }, p), x},
                         {projected([&](const Tensor& v) { return bn(x, v, b, Mode::train); }, p), g},
                         {projected([&](const Tensor& v) { return bn(x, g, v, Mode::train); }, p), b},
                         {projected([&](const Tensor& v) { return bn(v, g, b, Mode::eval); }, p), x}});
  }
  {
    const std::vector<int> labels{0, 3, 1, 1};
    s.add("softmax_cross_entropy",
          {{[labels](Tape&, const Tensor& x) { return softmax_cross_entropy(x, labels); }, random(rng, {4, 4}, -2, 2)}});
  }
  unary("rfft", [](const Tensor& x) { return fft::rfft(x); }, {2, 16}, {2, 9, 2});
  unary("irfft", [](const Tensor& x) { return fft::irfft(x, 16); }, {2, 9, 2}, {2, 16});
}

Shape shape_for(TransformKind kind) { return accepts(kind, Modality::image) ? Shape{3, 2, 6, 6} : Shape{3, 2, 64}; }

void augmentation_suite(Suite& s) {
  for (auto kind : all_transform_kinds()) {
    const std::string item(to_string(kind));
    auto spec = TransformSpec::defaults(kind);
    if (kind == TransformKind::frequency_shift) spec.sample_rate = 16.0;
    double worst = 0.0;
    for (std::uint64_t trial = 0; trial < 10; ++trial) {
      Rng rng(7000 + 31 * static_cast<std::uint64_t>(kind) + trial);
      const Tensor x = random(rng, shape_for(kind));
      const auto draw = sample_draw(spec, x.shape(), rng);
      const auto probe = probe_for(rng, x.size());
      const Tensor mu = Tensor::vector({rng.uniform(0.05, 0.95)});
      const ScalarFn over_mu = [&](Tape&, const Tensor& m) { return weighted_sum(apply_transform(spec, x, m, draw), probe); };
      const ScalarFn over_x = [&](Tape&, const Tensor& in) {
        return weighted_sum(apply_transform(spec, in, Tensor::scalar(mu[0]), draw), probe);
      };
      worst = std::max(worst, s.error(item, over_x, x));
      if (spec.estimator == Estimator::reparam) {
        worst = std::max(worst, s.error(item, over_mu, mu));
      } else {
        // E_u[hflip(x; mu)] = x + mu (flip(x) - x): its central difference is the straight-through target.
        const Tensor flipped = flip_horizontal(x);
        auto expected = [&](double m) {
          double acc = 0.0;
          for (std::size_t i = 0; i < x.size(); ++i) acc += probe[i] * (x[i] + m * (flipped[i] - x[i]));
          return acc;
        };
        const double numeric = (expected(mu[0] + kStep) - expected(mu[0] - kStep)) / (2.0 * kStep);
        double analytic = autodiff_gradient(over_mu, mu)[0];
        if (s.perturbed(item)) analytic *= 1.01;
        worst = std::max(worst, std::abs(analytic - numeric) / std::max({std::abs(analytic), std::abs(numeric), 1e-8}));
      }
    }
    s.add_value(item, worst);
  }
}

void models_suite(Suite& s) {
  Rng rng(4242);
  auto full = [&](const std::string& name, TrunkConfig config, Shape batch) {
    ParameterStore store;
    Trunk trunk(config, store, rng);
    const Tensor x = random(rng, batch);
    const auto probe = probe_for(rng, batch[0] * config.num_classes);
    const ScalarFn f = [&](Tape&, const Tensor& flat) {
      return weighted_sum(trunk.forward(split_flat(flat, store), x, Mode::train), probe);
    };
    s.add(name, {{f, Tensor::vector(flatten_values(store))}});
  };
  TrunkConfig mlp;
  mlp.kind = TrunkKind::mlp;
  mlp.mlp_widths = {6, 5};
  mlp.input_shape = {1, 32};
  full("mlp_trunk", mlp, {2, 1, 32});
  TrunkConfig sinus;
  sinus.kind = TrunkKind::sinus_cnn;
  sinus.input_shape = {1, 64};
  full("sinus_cnn_trunk", sinus, {2, 1, 64});
  {
    TrunkConfig sprite;
    sprite.kind = TrunkKind::sprite_cnn;
    sprite.input_shape = {3, 32, 32};
    ParameterStore store;
    Trunk trunk(sprite, store, rng);
    const Tensor x = random(rng, {2, 3, 32, 32});
    const auto probe = probe_for(rng, 8);
    std::vector<std::pair<ScalarFn, Tensor>> checks;
    for (const char* name : {"trunk.1.gamma", "trunk.17.weight"}) {
      const std::size_t idx = *store.find(name);
      checks.push_back({[&store, &trunk, &x, probe, idx](Tape&, const Tensor& p) {
                          auto params = store.bind(nullptr);
                          params[idx] = p;
                          return weighted_sum(trunk.forward(params, x, Mode::train), probe);
                        },
                        Tensor(store[idx].shape, store[idx].value)});
    }
    s.add("sprite_cnn_trunk", checks);
  }
  {
    TrunkConfig tc = mlp;
    tc.input_shape = {1, 32};
    Rng init(5);
    AugNetModel model(tc, init);
    auto fs = TransformSpec::defaults(TransformKind::frequency_shift);
    fs.sample_rate = 16.0;
    model.add_layer({fs, TransformSpec::defaults(TransformKind::gaussian_noise), TransformSpec::defaults(TransformKind::ft_surrogate)}, 0.3);
    model.add_layer({TransformSpec::defaults(TransformKind::brightness), TransformSpec::defaults(TransformKind::contrast)}, 0.4);
    for (auto& p : model.params()) {
      if (p.group != ParamGroup::trunk) {
        for (auto& v : p.value) v = p.group == ParamGroup::aug_magnitudes ? rng.uniform(0.1, 0.9) : rng.uniform(-1, 1);
      }
    }
    const Tensor x = random(rng, {4, 1, 32});
    const std::vector<int> labels{0, 1, 2, 3};
    for (RegKind reg : {RegKind::selective, RegKind::augerino}) {
      const ScalarFn f = [&](Tape&, const Tensor& flat) {
        Rng frozen(77);
        return training_loss(x, labels, model, split_flat(flat, model.params()), 0.7, reg, 2, frozen).total;
      };
      s.add("augnet_loss_" + std::string(to_string(reg)), {{f, Tensor::vector(flatten_values(model.params()))}});
    }
  }
}

}  // namespace

std::vector<GradItem> run_grad_suites(GradScope scope, const std::optional<std::string>& perturb) {
  std::vector<GradItem> out;
  if (scope == GradScope::ops || scope == GradScope::all) {
    Suite s("ops", kOpsTolerance, perturb, out);
    ops_suite(s);
  }
  if (scope == GradScope::augmentations || scope == GradScope::all) {
    Suite s("augmentations", kAugmentationTolerance, perturb, out);
    augmentation_suite(s);
  }
  if (scope == GradScope::models || scope == GradScope::all) {
    Suite s("models", kModelTolerance, perturb, out);
    models_suite(s);
  }
  if (perturb) {
    const bool known = std::any_of(out.begin(), out.end(), [&](const GradItem& g) { return g.name == *perturb; });
    if (!known) throw ConfigError("no grad-check item named '" + *perturb + "'");
  }
  return out;
}

}  // namespace augnet

#include "augnet/augnet.hpp"

#include <algorithm>
#include <cmath>

#include "augnet/error.hpp"
#include "augnet/ops.hpp"

namespace augnet {

std::string_view to_string(RegKind kind) {
  switch (kind) {
    case RegKind::selective:
      return "selective";
    case RegKind::augerino:
      return "augerino";
    case RegKind::none:
      return "none";
  }
  return "?";
}

RegKind reg_kind_from_string(std::string_view name) {
  for (auto k : {RegKind::selective, RegKind::augerino, RegKind::none}) {
    if (to_string(k) == name) return k;
  }
  throw ConfigError("unknown reg_kind '" + std::string(name) + "'");
}

AugNetModel::AugNetModel(const TrunkConfig& trunk, Rng& rng) : trunk_(trunk, params_, rng) {}

void AugNetModel::add_layer(std::vector<TransformSpec> transforms, double mu_init) {
  if (transforms.empty()) throw ConfigError("augmentation layer needs at least one transform");
  if (!(mu_init >= 0.0 && mu_init <= 1.0)) throw ConfigError("initial magnitude must lie in [0, 1]");
  for (const auto& t : transforms) t.validate();
  const std::size_t q = transforms.size();
  const std::string prefix = "aug." + std::to_string(layers_.size());
  AugLayer layer;
  layer.transforms = std::move(transforms);
  layer.hidden = params_.add(prefix + ".hidden_weights", {q}, std::vector<double>(q, 0.0), ParamGroup::aug_weights);
  layer.magnitude = params_.add(prefix + ".magnitudes", {q}, std::vector<double>(q, mu_init), ParamGroup::aug_magnitudes);
  layers_.push_back(std::move(layer));
}

std::vector<double> AugNetModel::weights(std::size_t layer) const {
  const auto& h = params_[layers_.at(layer).hidden].value;
  const Tensor w = effective_weights(Tensor::vector(h));
  return {w.data().begin(), w.data().end()};
}

std::vector<double> AugNetModel::magnitudes(std::size_t layer) const { return params_[layers_.at(layer).magnitude].value; }

void AugNetModel::project_magnitudes() {
  for (const auto& l : layers_) {
    for (auto& m : params_[l.magnitude].value) m = std::clamp(m, 0.0, 1.0);
  }
}

Tensor effective_weights(const Tensor& hidden) {
  if (hidden.size() == 0) throw ShapeError("effective_weights: no transforms");
  return softmax(hidden);
}

Tensor aug_layer_forward(const Tensor& x, const AugLayer& layer, std::span<const Tensor> params, Rng& rng) {
  const Modality modality = modality_of(x);
  for (const auto& t : layer.transforms) {
    if (!accepts(t.kind, modality)) {
      throw ConfigError(std::string(to_string(t.kind)) + " cannot augment " +
                        (modality == Modality::image ? "images" : "signals"));
    }
  }
  const Tensor w = effective_weights(params[layer.hidden]);
  const Tensor& mu = params[layer.magnitude];
  Tensor out;
  for (std::size_t q = 0; q < layer.transforms.size(); ++q) {
    const auto draw = sample_draw(layer.transforms[q], x.shape(), rng);
    const Tensor term = mul(apply_transform(layer.transforms[q], x, pick(mu, q), draw), pick(w, q));
    out = q == 0 ? term : add(out, term);
  }
  return out;
}

Tensor augmentation_forward(const Tensor& x, std::span<const AugLayer> layers, std::span<const Tensor> params, Rng& rng) {
  Tensor h = x;
  for (const auto& l : layers) h = aug_layer_forward(h, l, params, rng);
  return h;
}

Tensor augnet_forward(const Tensor& x, AugNetModel& model, std::size_t copies, std::span<const Tensor> params, Rng& rng,
                      Mode mode) {
  if (copies < 1) throw ConfigError("number of copies must be at least 1");
  const Tensor tiled = copies == 1 ? x : tile_rows(x, copies);
  const Tensor augmented = augmentation_forward(tiled, model.layers(), params, rng);
  const Tensor out = model.trunk().forward(params, augmented, mode);
  return copies == 1 ? out : mean_of_groups(out, copies);
}

Tensor predict(AugNetModel& model, const Tensor& x, std::size_t copies, Rng& rng, std::size_t chunk) {
  const auto params = model.params().bind(nullptr);
  const std::size_t n = x.dim(0);
  if (n <= chunk) return augnet_forward(x, model, copies, params, rng, Mode::eval);
  std::vector<Tensor> parts;
  for (std::size_t b = 0; b < n; b += chunk) {
    parts.push_back(augnet_forward(slice_rows(x, b, std::min(n, b + chunk)), model, copies, params, rng, Mode::eval));
  }
  return concat(parts);
}

namespace {

Tensor negative_norm(const Tensor& v) { return negate(sqrt(add_constant(sum(square(v)), kNormSmoothing))); }

}  // namespace

Tensor selective_regularizer(std::span<const AugLayer> layers, std::span<const Tensor> params) {
  Tensor total = Tensor::scalar(0.0);
  for (const auto& l : layers) {
    total = add(total, negative_norm(mul(effective_weights(params[l.hidden]), params[l.magnitude])));
  }
  return total;
}

Tensor augerino_regularizer(std::span<const AugLayer> layers, std::span<const Tensor> params) {
  Tensor total = Tensor::scalar(0.0);
  for (const auto& l : layers) total = add(total, negative_norm(params[l.magnitude]));
  return total;
}

Tensor regularizer(RegKind kind, std::span<const AugLayer> layers, std::span<const Tensor> params) {
  switch (kind) {
    case RegKind::selective:
      return selective_regularizer(layers, params);
    case RegKind::augerino:
      return augerino_regularizer(layers, params);
    case RegKind::none:
      return Tensor::scalar(0.0);
  }
  throw ConfigError("unknown regularizer");
}

std::array<double, 2> reg_grad_analytic(std::array<double, 2> w, std::array<double, 2> mu) {
  const double s = mu[0] * mu[0] + mu[1] * mu[1];
  return {2.0 * mu[0] * mu[0] - 2.0 * (1.0 - w[0]) * s, 2.0 * mu[1] * mu[1] - 2.0 * (1.0 - w[1]) * s};
}

LossTerms training_loss(const Tensor& x, std::span<const int> labels, AugNetModel& model, std::span<const Tensor> params,
                        double lambda, RegKind reg, std::size_t copies, Rng& rng, Mode mode) {
  if (!(lambda >= 0.0)) throw ConfigError("lambda must be non-negative");
  LossTerms terms;
  terms.logits = augnet_forward(x, model, copies, params, rng, mode);
  const Tensor ce = softmax_cross_entropy(terms.logits, labels);
  terms.cross_entropy = ce.item();
  if (reg == RegKind::none || lambda == 0.0) {
    terms.total = ce;
    return terms;
  }
  const Tensor r = regularizer(reg, model.layers(), params);
  terms.penalty = r.item();
  terms.total = add(ce, scale(r, lambda));
  return terms;
}

std::vector<GroupElement> trivial_group() {
  return {[](const Tensor& x) { return x; }};
}

std::vector<GroupElement> flip_group() {
  return {[](const Tensor& x) { return x; }, [](const Tensor& x) { return flip_horizontal(x); }};
}

std::vector<GroupElement> rotation_group() {
  std::vector<GroupElement> g;
  for (int k = 0; k < 4; ++k) g.push_back([k](const Tensor& x) { return rotate90(x, k); });
  return g;
}

void check_group(std::span<const GroupElement> group, const Tensor& probe) {
  if (group.empty()) throw ConfigError("group: empty element set");
  std::vector<Tensor> images;
  for (const auto& g : group) images.push_back(g(probe).detach());
  auto same = [](const Tensor& a, const Tensor& b) {
    return a.shape() == b.shape() && std::equal(a.data().begin(), a.data().end(), b.data().begin());
  };
  auto index_of = [&](const Tensor& t) -> std::ptrdiff_t {
    for (std::size_t k = 0; k < images.size(); ++k) {
      if (same(images[k], t)) return static_cast<std::ptrdiff_t>(k);
    }
    return -1;
  };
  if (index_of(probe) < 0) throw ConfigError("group: identity element missing");
  for (std::size_t i = 0; i < group.size(); ++i) {
    bool has_inverse = false;
    for (std::size_t j = 0; j < group.size(); ++j) {
      const Tensor composed = group[i](images[j]).detach();
      if (index_of(composed) < 0) throw ConfigError("group: element set is not closed under composition");
      has_inverse = has_inverse || same(composed, probe);
    }
    if (!has_inverse) throw ConfigError("group: element without inverse");
  }
}

Tensor group_average_exact(const std::function<Tensor(const Tensor&)>& f, std::span<const GroupElement> group,
                           const Tensor& x) {
  check_group(group, x);
  Tensor total;
  for (std::size_t i = 0; i < group.size(); ++i) {
    const Tensor y = f(group[i](x));
    total = i == 0 ? y : add(total, y);
  }
  return scale(total, 1.0 / static_cast<double>(group.size()));
}

}  // namespace augnet

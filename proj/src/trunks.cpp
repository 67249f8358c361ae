#include "augnet/trunks.hpp"

#include <cmath>

#include "augnet/error.hpp"
#include "augnet/ops.hpp"

namespace augnet {
namespace {

std::vector<double> kaiming_uniform(Rng& rng, std::size_t count, std::size_t fan_in) {
  const double bound = std::sqrt(6.0 / static_cast<double>(fan_in));
  std::vector<double> w(count);
  for (auto& v : w) v = rng.uniform(-bound, bound);
  return w;
}

void check_input(const TrunkConfig& c) {
  if (c.num_classes < 2) throw ConfigError("trunk: need at least two classes");
  switch (c.kind) {
    case TrunkKind::mlp:
      if (c.input_shape.empty() || numel(c.input_shape) == 0) throw ConfigError("mlp: empty input shape");
      for (auto w : c.mlp_widths) {
        if (w == 0) throw ConfigError("mlp: zero width layer");
      }
      break;
    case TrunkKind::sinus_cnn:
      if (c.input_shape.size() != 2 || c.input_shape[1] < 2) {
        throw ConfigError("sinus_cnn: input must be (channels, length >= 2), got " + to_string(c.input_shape));
      }
      break;
    case TrunkKind::sprite_cnn:
      if (c.input_shape.size() != 3 || c.input_shape[1] != 32 || c.input_shape[2] != 32) {
        throw ConfigError("sprite_cnn: input must be (channels, 32, 32), got " + to_string(c.input_shape));
      }
      break;
  }
}

}  // namespace

std::string_view to_string(TrunkKind kind) {
  switch (kind) {
    case TrunkKind::mlp:
      return "mlp";
    case TrunkKind::sinus_cnn:
      return "sinus_cnn";
    case TrunkKind::sprite_cnn:
      return "sprite_cnn";
  }
  return "?";
}

TrunkKind trunk_kind_from_string(std::string_view name) {
  for (auto k : {TrunkKind::mlp, TrunkKind::sinus_cnn, TrunkKind::sprite_cnn}) {
    if (to_string(k) == name) return k;
  }
  throw ConfigError("unknown trunk kind '" + std::string(name) + "'");
}

std::string Trunk::next_name(std::string_view what) {
  return "trunk." + std::to_string(layers_.size()) + "." + std::string(what);
}

void Trunk::add_dense(ParameterStore& store, Rng& rng, std::size_t in, std::size_t out) {
  Layer l{Op::dense};
  l.weight = store.add(next_name("weight"), {out, in}, kaiming_uniform(rng, out * in, in), ParamGroup::trunk);
  l.bias = store.add(next_name("bias"), {out}, std::vector<double>(out, 0.0), ParamGroup::trunk);
  param_count_ += out * in + out;
  layers_.push_back(l);
}

void Trunk::add_conv(ParameterStore& store, Rng& rng, Op op, std::size_t in, std::size_t out, std::size_t k) {
  Layer l{op};
  const Shape shape = op == Op::conv1d ? Shape{out, in, k} : Shape{out, in, k, k};
  const std::size_t fan_in = numel(shape) / out;
  l.weight = store.add(next_name("weight"), shape, kaiming_uniform(rng, numel(shape), fan_in), ParamGroup::trunk);
  l.size = out;
  l.padding = k / 2;
  param_count_ += numel(shape);
  layers_.push_back(l);
}

void Trunk::add_batch_norm(ParameterStore& store, std::size_t channels) {
  Layer l{Op::batch_norm};
  l.weight = store.add(next_name("gamma"), {channels}, std::vector<double>(channels, 1.0), ParamGroup::trunk);
  l.bias = store.add(next_name("beta"), {channels}, std::vector<double>(channels, 0.0), ParamGroup::trunk);
  l.stats = stats_.size();
  stats_.emplace_back(channels);
  param_count_ += 2 * channels;
  layers_.push_back(l);
}

Trunk::Trunk(const TrunkConfig& config, ParameterStore& store, Rng& rng) : config_(config) {
  check_input(config);
  auto simple = [this](Op op, std::size_t size = 0, std::size_t stride = 1) {
    Layer l{op};
    l.size = size;
    l.stride = stride;
    layers_.push_back(l);
  };
  switch (config.kind) {
    case TrunkKind::mlp: {
      simple(Op::flatten);
      std::size_t in = numel(config.input_shape);
      for (auto w : config.mlp_widths) {
        add_dense(store, rng, in, w);
        simple(Op::relu);
        in = w;
      }
      add_dense(store, rng, in, config.num_classes);
      break;
    }
    case TrunkKind::sinus_cnn: {
      std::size_t in = config.input_shape[0];
      for (int block = 0; block < 2; ++block) {
        add_conv(store, rng, Op::conv1d, in, 2, 3);
        add_batch_norm(store, 2);
        simple(Op::relu);
        in = 2;
      }
      simple(Op::maxpool1d, 2, 2);
      simple(Op::global_mean_pool);
      add_dense(store, rng, 2, config.num_classes);
      break;
    }
    case TrunkKind::sprite_cnn: {
      std::size_t in = config.input_shape[0];
      const std::size_t widths[] = {32, 64, 128, 256};
      for (int block = 0; block < 4; ++block) {
        add_conv(store, rng, Op::conv2d, in, widths[block], 3);
        add_batch_norm(store, widths[block]);
        simple(Op::relu);
        if (block > 0) simple(Op::maxpool2d, 2, 2);
        in = widths[block];
      }
      simple(Op::maxpool2d, 4, 1);
      simple(Op::flatten);
      add_dense(store, rng, 256, config.num_classes);
      break;
    }
  }
}

Tensor Trunk::forward(std::span<const Tensor> params, const Tensor& x, Mode mode) {
  Shape expected = config_.input_shape;
  expected.insert(expected.begin(), x.rank() ? x.dim(0) : 0);
  if (x.shape() != expected) {
    throw ShapeError("trunk: input " + to_string(x.shape()) + " does not match " + to_string(expected));
  }
  Tensor h = x;
  for (const auto& l : layers_) {
    switch (l.op) {
      case Op::dense:
        h = dense(h, params[l.weight], params[l.bias]);
        break;
      case Op::conv1d:
        h = conv1d(h, params[l.weight], Tensor(Shape{l.size}), 1, l.padding);
        break;
      case Op::conv2d:
        h = conv2d(h, params[l.weight], Tensor(Shape{l.size}), 1, l.padding);
        break;
      case Op::batch_norm:
        h = batch_norm(h, params[l.weight], params[l.bias], stats_[l.stats], mode);
        break;
      case Op::relu:
        h = relu(h);
        break;
      case Op::maxpool1d:
        h = maxpool1d(h, l.size, l.stride);
        break;
      case Op::maxpool2d:
        h = maxpool2d(h, l.size, l.stride);
        break;
      case Op::global_mean_pool:
        h = global_mean_pool(h);
        break;
      case Op::flatten:
        h = flatten(h);
        break;
    }
  }
  return h;
}

std::size_t trunk_param_count(const TrunkConfig& config) {
  check_input(config);
  switch (config.kind) {
    case TrunkKind::mlp: {
      std::size_t in = numel(config.input_shape), n = 0;
      for (auto w : config.mlp_widths) {
        n += in * w + w;
        in = w;
      }
      return n + in * config.num_classes + config.num_classes;
    }
    case TrunkKind::sinus_cnn: {
      const std::size_t c = config.input_shape[0];
      return (2 * c * 3 + 4) + (2 * 2 * 3 + 4) + 2 * config.num_classes + config.num_classes;
    }
    case TrunkKind::sprite_cnn: {
      std::size_t in = config.input_shape[0], n = 0;
      for (std::size_t w : {32u, 64u, 128u, 256u}) {
        n += w * in * 9 + 2 * w;
        in = w;
      }
      return n + 256 * config.num_classes + config.num_classes;
    }
  }
  return 0;
}

}  // namespace augnet

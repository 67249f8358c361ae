#include "augnet/datasets.hpp"

#include <algorithm>
#include <bit>
#include <cmath>
#include <cstring>
#include <fstream>
#include <numbers>

#include "augnet/error.hpp"
#include "augnet/transforms.hpp"

namespace augnet {

static_assert(std::endian::native == std::endian::little, "dataset container assumes a little-endian host");

std::string_view to_string(DatasetKind kind) { return kind == DatasetKind::sinusoids ? "sinusoids" : "sprites"; }

DatasetKind dataset_kind_from_string(std::string_view name) {
  if (name == "sinusoids") return DatasetKind::sinusoids;
  if (name == "sprites") return DatasetKind::sprites;
  throw ConfigError("unknown dataset kind '" + std::string(name) + "'");
}

DatasetSpec DatasetSpec::sinusoids() { return {}; }

DatasetSpec DatasetSpec::sprites() {
  DatasetSpec s;
  s.kind = DatasetKind::sprites;
  s.n_train = 10000;
  s.n_val = 1000;
  s.n_test = 5000;
  return s;
}

void DatasetSpec::validate() const {
  if (kind == DatasetKind::sinusoids) {
    if (!(sample_rate > 0.0)) throw ConfigError("dataset: sample_rate must be positive");
    if (length < 2) throw ConfigError("dataset: length must be at least 2");
    if (!(noise_std >= 0.0)) throw ConfigError("dataset: noise_std must be non-negative");
    if (!(freq_halfwidth >= 0.0 && freq_halfwidth < 1.0)) throw ConfigError("dataset: freq_halfwidth must lie in [0, 1)");
  } else if (image_size < 8) {
    throw ConfigError("dataset: image_size must be at least 8");
  }
}

Shape DatasetSpec::example_shape() const {
  if (kind == DatasetKind::sinusoids) return {1, length};
  return {3, image_size, image_size};
}

Shape Dataset::example_shape() const { return Shape(x.shape().begin() + 1, x.shape().end()); }

Dataset gen_sinusoids(const DatasetSpec& spec, std::size_t n, Rng& rng) {
  spec.validate();
  const std::size_t L = spec.length;
  std::vector<double> x(n * L);
  Dataset d;
  d.y.resize(n);
  d.meta.resize(n);
  for (std::size_t i = 0; i < n; ++i) {
    const int label = static_cast<int>(i % 4);
    const double omega = kSinusoidFrequencies[label];
    const double f = rng.uniform(omega - spec.freq_halfwidth, omega + spec.freq_halfwidth);
    const double phi = rng.uniform(0.0, 2.0 * std::numbers::pi);
    for (std::size_t k = 0; k < L; ++k) {
      const double t = static_cast<double>(k) / spec.sample_rate;
      x[i * L + k] = std::sin(2.0 * std::numbers::pi * f * t + phi) + spec.noise_std * rng.normal();
    }
    d.y[i] = label;
    d.meta[i] = f;
  }
  d.x = Tensor({n, 1, L}, std::move(x));
  return d;
}

namespace {

struct Rgb {
  double r, g, b;
};

// Glyphs live in u, v in [-1, 1] with v pointing up; everything stays inside
// radius 0.85 so rotations never clip.
bool in_box(double u, double v, double u0, double u1, double v0, double v1) { return u >= u0 && u <= u1 && v >= v0 && v <= v1; }

// Arrow pointing up with a foot on its right.
bool arrow_body(double u, double v) {
  if (in_box(u, v, -0.11, 0.11, -0.65, 0.25)) return true;
  return v >= 0.25 && v <= 0.7 && std::abs(u) <= 0.42 * (0.7 - v) / 0.45;
}
bool arrow_foot(double u, double v) { return in_box(u, v, 0.11, 0.5, -0.65, -0.42); }

// Key: ring at the top, stem down, two teeth on the left.
bool key_body(double u, double v) {
  const double r = std::hypot(u, v - 0.4);
  if (r <= 0.3 && r >= 0.14) return true;
  return in_box(u, v, -0.09, 0.09, -0.7, 0.12);
}
bool key_teeth(double u, double v) {
  return in_box(u, v, -0.42, -0.09, -0.7, -0.56) || in_box(u, v, -0.32, -0.09, -0.42, -0.3);
}

}  // namespace

Tensor sprite_glyph(int which, std::size_t size) {
  if (which != 0 && which != 1) throw ConfigError("sprite_glyph: glyph index must be 0 or 1");
  constexpr int kSuper = 4;
  const Rgb body = which == 0 ? Rgb{1.0, 0.35, 0.1} : Rgb{0.15, 0.35, 1.0};
  const Rgb mark = which == 0 ? Rgb{0.2, 0.9, 0.25} : Rgb{0.95, 0.85, 0.1};
  std::vector<double> px(3 * size * size, 0.0);
  const double s = static_cast<double>(size);
  for (std::size_t i = 0; i < size; ++i) {
    for (std::size_t j = 0; j < size; ++j) {
      Rgb acc{0, 0, 0};
      for (int a = 0; a < kSuper; ++a) {
        for (int b = 0; b < kSuper; ++b) {
          const double u = 2.0 * (static_cast<double>(j) + (b + 0.5) / kSuper) / s - 1.0;
          const double v = 1.0 - 2.0 * (static_cast<double>(i) + (a + 0.5) / kSuper) / s;
          const bool in_body = which == 0 ? arrow_body(u, v) : key_body(u, v);
          const bool in_mark = which == 0 ? arrow_foot(u, v) : key_teeth(u, v);
          const Rgb* c = in_mark ? &mark : in_body ? &body : nullptr;
          if (c) {
            acc.r += c->r;
            acc.g += c->g;
            acc.b += c->b;
          }
        }
      }
      const double norm = 1.0 / (kSuper * kSuper);
      px[(0 * size + i) * size + j] = acc.r * norm;
      px[(1 * size + i) * size + j] = acc.g * norm;
      px[(2 * size + i) * size + j] = acc.b * norm;
    }
  }
  return Tensor({1, 3, size, size}, std::move(px));
}

Tensor rotate_image(const Tensor& images, double angle) {
  const std::vector<double> eps(images.dim(0), angle);
  return affine_warp(images, TransformKind::rotate, Tensor::scalar(1.0), eps, 1.0).detach();
}

Dataset gen_sprites(const DatasetSpec& spec, std::size_t n, Rng& rng) {
  spec.validate();
  const std::size_t S = spec.image_size;
  const Tensor glyphs[2] = {sprite_glyph(0, S), sprite_glyph(1, S)};
  const std::size_t per = 3 * S * S;
  std::vector<double> x(n * per);
  Dataset d;
  d.y.resize(n);
  d.meta.resize(n);
  for (std::size_t i = 0; i < n; ++i) {
    // 0: A up, 1: A down, 2: B up, 3: B down.
    const int label = static_cast<int>(i % 4);
    const bool down = label % 2 == 1;
    const double quarter = std::numbers::pi / 4.0;
    const double angle = rng.uniform(-quarter, quarter) + (down ? std::numbers::pi : 0.0);
    const Tensor img = rotate_image(glyphs[label / 2], angle);
    std::copy(img.data().begin(), img.data().end(), x.begin() + static_cast<std::ptrdiff_t>(i * per));
    d.y[i] = label;
    d.meta[i] = angle;
  }
  d.x = Tensor({n, 3, S, S}, std::move(x));
  return d;
}

DatasetSplits generate(const DatasetSpec& spec) {
  spec.validate();
  const Rng root(spec.seed);
  auto make = [&](std::size_t n, std::uint64_t stream) {
    Rng rng = root.split(stream);
    return spec.kind == DatasetKind::sinusoids ? gen_sinusoids(spec, n, rng) : gen_sprites(spec, n, rng);
  };
  return {make(spec.n_train, 1), make(spec.n_val, 2), make(spec.n_test, 3)};
}

std::vector<double> oracle_shift_draws(std::size_t n, Rng& rng, double max_hz) {
  std::vector<double> d(n);
  for (auto& v : d) v = rng.uniform(-max_hz, max_hz);
  return d;
}

Tensor oracle_augment(const Tensor& signals, Rng& rng, double sample_rate, double max_hz) {
  if (signals.rank() != 3) throw ShapeError("oracle_augment: expects a (B, C, n) signal batch");
  const auto shifts = oracle_shift_draws(signals.dim(0), rng, max_hz);
  // frequency_shift scales its epsilon by max_shift_hz; pass the shift in units of 1 Hz.
  return frequency_shift(signals.detach(), Tensor::scalar(1.0), shifts, sample_rate, 1.0);
}

std::vector<std::vector<std::size_t>> batch_indices(std::size_t n, std::size_t batch_size, bool shuffle,
                                                    std::uint64_t seed, std::uint64_t epoch) {
  if (batch_size < 1) throw ConfigError("batch size must be at least 1");
  std::vector<std::size_t> order(n);
  if (shuffle) {
    Rng rng = Rng(seed).split(0x5eed0000ULL + epoch);
    order = rng.permutation(n);
  } else {
    for (std::size_t i = 0; i < n; ++i) order[i] = i;
  }
  std::vector<std::vector<std::size_t>> batches;
  for (std::size_t b = 0; b < n; b += batch_size) {
    batches.emplace_back(order.begin() + static_cast<std::ptrdiff_t>(b),
                         order.begin() + static_cast<std::ptrdiff_t>(std::min(n, b + batch_size)));
  }
  return batches;
}

Batch make_batch(const Dataset& data, std::span<const std::size_t> indices) {
  Shape shape = data.example_shape();
  const std::size_t per = numel(shape);
  std::vector<double> x(indices.size() * per);
  Batch b;
  b.y.reserve(indices.size());
  const auto src = data.x.data();
  for (std::size_t k = 0; k < indices.size(); ++k) {
    const std::size_t i = indices[k];
    if (i >= data.size()) throw ShapeError("make_batch: index out of range");
    std::copy_n(src.begin() + static_cast<std::ptrdiff_t>(i * per), per, x.begin() + static_cast<std::ptrdiff_t>(k * per));
    b.y.push_back(data.y[i]);
  }
  shape.insert(shape.begin(), indices.size());
  b.x = Tensor(std::move(shape), std::move(x));
  return b;
}

namespace {

constexpr char kMagic[8] = {'A', 'U', 'G', 'D', 'S', 'E', 'T', '\0'};
constexpr std::uint32_t kVersion = 1;

template <class T>
void put(std::ofstream& out, const T& v) {
  out.write(reinterpret_cast<const char*>(&v), sizeof(T));
}

template <class T>
T get(std::ifstream& in) {
  T v{};
  if (!in.read(reinterpret_cast<char*>(&v), sizeof(T))) throw FormatError("dataset container: truncated header");
  return v;
}

}  // namespace

void export_dataset(const std::filesystem::path& path, const Dataset& data, DatasetKind kind) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw ConfigError("cannot write " + path.string());
  out.write(kMagic, sizeof(kMagic));
  put(out, kVersion);
  put(out, static_cast<std::uint32_t>(kind));
  put(out, static_cast<std::uint64_t>(data.size()));
  const Shape shape = data.example_shape();
  put(out, static_cast<std::uint32_t>(shape.size()));
  for (auto d : shape) put(out, static_cast<std::uint64_t>(d));
  out.write(reinterpret_cast<const char*>(data.x.data().data()), static_cast<std::streamsize>(data.x.size() * sizeof(double)));
  for (int y : data.y) put(out, static_cast<std::int32_t>(y));
  for (double m : data.meta) put(out, m);
  if (!out) throw ConfigError("write failed for " + path.string());
}

Dataset import_dataset(const std::filesystem::path& path, DatasetKind* kind) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw ConfigError("cannot open " + path.string());
  char magic[8];
  if (!in.read(magic, sizeof(magic)) || std::memcmp(magic, kMagic, sizeof(kMagic)) != 0) {
    throw FormatError(path.string() + ": not a dataset container");
  }
  if (const auto v = get<std::uint32_t>(in); v != kVersion) {
    throw FormatError(path.string() + ": unsupported container version " + std::to_string(v));
  }
  const auto k = get<std::uint32_t>(in);
  if (k > 1) throw FormatError(path.string() + ": unknown dataset kind");
  if (kind) *kind = static_cast<DatasetKind>(k);
  const auto count = get<std::uint64_t>(in);
  const auto rank = get<std::uint32_t>(in);
  if (rank == 0 || rank > 3) throw FormatError(path.string() + ": bad example rank");
  Shape shape{static_cast<std::size_t>(count)};
  for (std::uint32_t r = 0; r < rank; ++r) shape.push_back(static_cast<std::size_t>(get<std::uint64_t>(in)));
  std::vector<double> x(numel(shape));
  if (!in.read(reinterpret_cast<char*>(x.data()), static_cast<std::streamsize>(x.size() * sizeof(double)))) {
    throw FormatError(path.string() + ": truncated payload");
  }
  Dataset d;
  d.y.resize(count);
  d.meta.resize(count);
  for (auto& y : d.y) y = get<std::int32_t>(in);
  for (auto& m : d.meta) m = get<double>(in);
  if (in.peek() != std::char_traits<char>::eof()) throw FormatError(path.string() + ": trailing bytes");
  d.x = Tensor(std::move(shape), std::move(x));
  return d;
}

}  // namespace augnet

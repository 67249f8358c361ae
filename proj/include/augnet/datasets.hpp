#pragma once

#include <cstdint>
#include <filesystem>
#include <span>
#include <string>
#include <vector>

#include "augnet/rng.hpp"
#include "augnet/tensor.hpp"

namespace augnet {

enum class DatasetKind { sinusoids, sprites };
std::string_view to_string(DatasetKind kind);
DatasetKind dataset_kind_from_string(std::string_view name);

struct DatasetSpec {
  DatasetKind kind = DatasetKind::sinusoids;
  std::size_t n_train = 400;
  std::size_t n_val = 200;
  std::size_t n_test = 200;
  std::uint64_t seed = 0;
  // Sinusoids only.
  double sample_rate = 100.0;
  std::size_t length = 1024;
  double noise_std = 0.5;
  double freq_halfwidth = 0.5;
  // Sprites only.
  std::size_t image_size = 32;

  static DatasetSpec sinusoids();
  static DatasetSpec sprites();
  void validate() const;
  /// Per-example shape: (1, length) or (3, size, size).
  Shape example_shape() const;
};

/// Examples stacked along the first axis. `meta` holds the generating
/// frequency (Hz) or rotation angle (rad) of each example.
struct Dataset {
  Tensor x;
  std::vector<int> y;
  std::vector<double> meta;

  std::size_t size() const { return y.size(); }
  Shape example_shape() const;
};

struct DatasetSplits {
  Dataset train, val, test;
};

/// Class frequencies of the sinusoid task, in Hz.
inline constexpr double kSinusoidFrequencies[4] = {2.0, 4.0, 6.0, 8.0};

/// Pure function of the spec; the three splits use independent streams of spec.seed.
DatasetSplits generate(const DatasetSpec& spec);
Dataset gen_sinusoids(const DatasetSpec& spec, std::size_t n, Rng& rng);
Dataset gen_sprites(const DatasetSpec& spec, std::size_t n, Rng& rng);

/// Base glyph 0 (A) or 1 (B): (1, 3, size, size), values in [0, 1].
Tensor sprite_glyph(int which, std::size_t size = 32);
/// Counter-clockwise rotation by `angle` radians with bilinear resampling and zero fill.
Tensor rotate_image(const Tensor& images, double angle);

/// Fixed (non-learned) frequency shifts, uniform in [-max_hz, max_hz].
std::vector<double> oracle_shift_draws(std::size_t n, Rng& rng, double max_hz = 0.5);
/// Frequency shift of each signal by its own oracle draw.
Tensor oracle_augment(const Tensor& signals, Rng& rng, double sample_rate = 100.0, double max_hz = 0.5);

/// Index batches for one epoch; the order is a function of (seed, epoch) and the last batch may be short.
std::vector<std::vector<std::size_t>> batch_indices(std::size_t n, std::size_t batch_size, bool shuffle,
                                                    std::uint64_t seed, std::uint64_t epoch);

struct Batch {
  Tensor x;
  std::vector<int> y;
};
Batch make_batch(const Dataset& data, std::span<const std::size_t> indices);

/// Binary container, little-endian:
///   char[8] "AUGDSET\0", u32 version (1), u32 kind, u64 count, u32 rank, u64 dims[rank],
///   f64 x[count * prod(dims)], i32 labels[count], f64 meta[count].
void export_dataset(const std::filesystem::path& path, const Dataset& data, DatasetKind kind);
Dataset import_dataset(const std::filesystem::path& path, DatasetKind* kind = nullptr);

}  // namespace augnet

#pragma once

#include <filesystem>
#include <string>
#include <vector>

#include "augnet/augnet.hpp"

namespace augnet {

struct CheckpointEntry {
  std::string name;
  Shape shape;
  std::vector<double> data;
};

/// Ordered parameter values followed by batch-norm running statistics
/// (named "state.bn<k>.mean" / "state.bn<k>.var").
using Checkpoint = std::vector<CheckpointEntry>;

Checkpoint snapshot(const AugNetModel& model);
/// Throws FormatError when names or shapes disagree with the model.
void restore(AugNetModel& model, const Checkpoint& ckpt);

/// Binary layout, little-endian:
///   char[8] "AUGCKPT\0", u32 version (1), u64 entry count, then per entry
///   u32 name length, name bytes, u32 rank, u64 dims[rank], f64 values[prod(dims)].
void save_checkpoint(const std::filesystem::path& path, const Checkpoint& ckpt);
Checkpoint load_checkpoint(const std::filesystem::path& path);

}  // namespace augnet

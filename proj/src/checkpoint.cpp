#include "augnet/checkpoint.hpp"

#include <bit>
#include <cstring>
#include <fstream>

#include "augnet/error.hpp"

namespace augnet {

static_assert(std::endian::native == std::endian::little, "checkpoint format assumes a little-endian host");

namespace {

constexpr char kMagic[8] = {'A', 'U', 'G', 'C', 'K', 'P', 'T', '\0'};
constexpr std::uint32_t kVersion = 1;

std::string stat_name(std::size_t k, const char* what) { return "state.bn" + std::to_string(k) + "." + what; }

template <class T>
void put(std::ofstream& out, const T& v) {
  out.write(reinterpret_cast<const char*>(&v), sizeof(T));
}

template <class T>
T get(std::ifstream& in, const std::filesystem::path& path) {
  T v{};
  if (!in.read(reinterpret_cast<char*>(&v), sizeof(T))) throw FormatError(path.string() + ": truncated checkpoint");
  return v;
}

}  // namespace

Checkpoint snapshot(const AugNetModel& model) {
  Checkpoint c;
  for (const auto& p : model.params()) c.push_back({p.name, p.shape, p.value});
  const auto& stats = model.trunk().running_stats();
  for (std::size_t k = 0; k < stats.size(); ++k) {
    c.push_back({stat_name(k, "mean"), {stats[k].mean.size()}, stats[k].mean});
    c.push_back({stat_name(k, "var"), {stats[k].var.size()}, stats[k].var});
  }
  return c;
}

void restore(AugNetModel& model, const Checkpoint& ckpt) {
  auto& stats = model.trunk().running_stats();
  const std::size_t expected = model.params().size() + 2 * stats.size();
  if (ckpt.size() != expected) {
    throw FormatError("checkpoint has " + std::to_string(ckpt.size()) + " entries, model needs " + std::to_string(expected));
  }
  auto check = [](const CheckpointEntry& e, const std::string& name, const Shape& shape) {
    if (e.name != name) throw FormatError("checkpoint entry '" + e.name + "' where '" + name + "' was expected");
    if (e.shape != shape || e.data.size() != numel(shape)) {
      throw FormatError("checkpoint entry '" + name + "' has shape " + to_string(e.shape) + ", expected " + to_string(shape));
    }
  };
  std::size_t i = 0;
  for (auto& p : model.params()) {
    check(ckpt[i], p.name, p.shape);
    p.value = ckpt[i++].data;
  }
  for (std::size_t k = 0; k < stats.size(); ++k) {
    check(ckpt[i], stat_name(k, "mean"), {stats[k].mean.size()});
    stats[k].mean = ckpt[i++].data;
    check(ckpt[i], stat_name(k, "var"), {stats[k].var.size()});
    stats[k].var = ckpt[i++].data;
  }
}

void save_checkpoint(const std::filesystem::path& path, const Checkpoint& ckpt) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw ConfigError("cannot write " + path.string());
  out.write(kMagic, sizeof(kMagic));
  put(out, kVersion);
  put(out, static_cast<std::uint64_t>(ckpt.size()));
  for (const auto& e : ckpt) {
    put(out, static_cast<std::uint32_t>(e.name.size()));
    out.write(e.name.data(), static_cast<std::streamsize>(e.name.size()));
    put(out, static_cast<std::uint32_t>(e.shape.size()));
    for (auto d : e.shape) put(out, static_cast<std::uint64_t>(d));
    out.write(reinterpret_cast<const char*>(e.data.data()), static_cast<std::streamsize>(e.data.size() * sizeof(double)));
  }
  if (!out) throw ConfigError("write failed for " + path.string());
}

Checkpoint load_checkpoint(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw ConfigError("cannot open " + path.string());
  char magic[8];
  if (!in.read(magic, sizeof(magic)) || std::memcmp(magic, kMagic, sizeof(kMagic)) != 0) {
    throw FormatError(path.string() + ": not a checkpoint");
  }
  if (const auto v = get<std::uint32_t>(in, path); v != kVersion) {
    throw FormatError(path.string() + ": unsupported checkpoint version " + std::to_string(v));
  }
  const auto count = get<std::uint64_t>(in, path);
  if (count > (1u << 20)) throw FormatError(path.string() + ": implausible entry count");
  Checkpoint c(count);
  for (auto& e : c) {
    const auto len = get<std::uint32_t>(in, path);
    if (len > 4096) throw FormatError(path.string() + ": implausible name length");
    e.name.resize(len);
    if (!in.read(e.name.data(), len)) throw FormatError(path.string() + ": truncated checkpoint");
    const auto rank = get<std::uint32_t>(in, path);
    if (rank > 8) throw FormatError(path.string() + ": implausible rank");
    for (std::uint32_t r = 0; r < rank; ++r) e.shape.push_back(static_cast<std::size_t>(get<std::uint64_t>(in, path)));
    e.data.resize(numel(e.shape));
    if (!in.read(reinterpret_cast<char*>(e.data.data()), static_cast<std::streamsize>(e.data.size() * sizeof(double)))) {
      throw FormatError(path.string() + ": truncated checkpoint");
    }
  }
  if (in.peek() != std::char_traits<char>::eof()) throw FormatError(path.string() + ": trailing bytes");
  return c;
}

}  // namespace augnet

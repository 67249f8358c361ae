#include "augnet/config.hpp"

#include <algorithm>
#include <fstream>
#include <numbers>
#include <set>
#include <sstream>

#include "augnet/error.hpp"

namespace augnet {

using nlohmann::json;

namespace {

constexpr std::pair<Preset, std::string_view> kPresetNames[] = {
    {Preset::sinusoids, "sinusoids"},
    {Preset::sinusoids_multilayer, "sinusoids_multilayer"},
    {Preset::capacity_sweep, "capacity_sweep"},
    {Preset::sprites, "sprites"},
    {Preset::sprites_noreg, "sprites_noreg"},
    {Preset::sprites_augerino_reg, "sprites_augerino_reg"},
    {Preset::custom, "custom"},
};

// Reads an object while tracking which keys were consumed.
class Reader {
 public:
  Reader(const json& j, std::string path) : j_(j), path_(std::move(path)) {
    if (!j.is_object()) throw ConfigError(where() + " must be an object");
  }

  template <class T>
  void get(const char* key, T& out) {
    seen_.insert(key);
    if (!j_.contains(key)) return;
    try {
      out = convert<T>(j_.at(key), sub(key));
    } catch (const json::exception& e) {
      throw ConfigError(sub(key) + ": " + e.what());
    }
  }

  Reader object(const char* key) {
    seen_.insert(key);
    static const json empty = json::object();
    return Reader(j_.contains(key) ? j_.at(key) : empty, sub(key));
  }

  bool has(const char* key) const { return j_.contains(key); }

  void finish() const {
    for (const auto& [k, v] : j_.items()) {
      if (!seen_.contains(k)) throw ConfigError("unknown config key '" + sub(k) + "'");
    }
  }

 private:
  std::string where() const { return path_.empty() ? "config" : path_; }
  std::string sub(const std::string& key) const { return path_.empty() ? key : path_ + "." + key; }

  template <class T>
  static T convert(const json& v, const std::string& path) {
    if constexpr (std::is_same_v<T, bool>) {
      if (!v.is_boolean()) throw ConfigError(path + " must be a boolean");
      return v.get<bool>();
    } else if constexpr (std::is_integral_v<T>) {
      if (!v.is_number_integer() || (v.is_number_integer() && !v.is_number_unsigned() && v.get<std::int64_t>() < 0)) {
        throw ConfigError(path + " must be a non-negative integer");
      }
      return v.get<T>();
    } else if constexpr (std::is_floating_point_v<T>) {
      if (!v.is_number()) throw ConfigError(path + " must be a number");
      return v.get<T>();
    } else if constexpr (std::is_same_v<T, std::string>) {
      if (!v.is_string()) throw ConfigError(path + " must be a string");
      return v.get<std::string>();
    } else {
      if (!v.is_array()) throw ConfigError(path + " must be a list");
      T out;
      for (std::size_t i = 0; i < v.size(); ++i) {
        out.push_back(convert<typename T::value_type>(v[i], path + "[" + std::to_string(i) + "]"));
      }
      return out;
    }
  }

  const json& j_;
  std::string path_;
  std::set<std::string> seen_;
};

void set_path(json& root, const std::string& dotted, const json& value) {
  json* node = &root;
  std::size_t start = 0;
  while (true) {
    const auto dot = dotted.find('.', start);
    const std::string key = dotted.substr(start, dot == std::string::npos ? std::string::npos : dot - start);
    if (key.empty()) throw ConfigError("malformed key '" + dotted + "'");
    if (dot == std::string::npos) {
      (*node)[key] = value;
      return;
    }
    if (!node->contains(key)) throw ConfigError("unknown config key '" + dotted.substr(0, dot) + "'");
    node = &(*node)[key];
    if (!node->is_object()) throw ConfigError("'" + dotted.substr(0, dot) + "' is not a section");
    start = dot + 1;
  }
}

std::string trim(std::string_view s) {
  const auto b = s.find_first_not_of(" \t");
  if (b == std::string_view::npos) return {};
  const auto e = s.find_last_not_of(" \t");
  return std::string(s.substr(b, e - b + 1));
}

}  // namespace

std::string_view to_string(Preset p) {
  for (const auto& [k, n] : kPresetNames) {
    if (k == p) return n;
  }
  throw ConfigError("unknown preset");
}

Preset preset_from_string(std::string_view name) {
  for (const auto& [k, n] : kPresetNames) {
    if (n == name) return k;
  }
  throw ConfigError("unknown preset '" + std::string(name) + "'");
}

TrunkConfig ExperimentConfig::trunk_config() const {
  TrunkConfig t;
  t.kind = trunk;
  t.mlp_widths = mlp_widths;
  t.input_shape = dataset.example_shape();
  t.num_classes = 4;
  return t;
}

std::vector<TransformSpec> ExperimentConfig::layer_transforms() const {
  std::vector<TransformSpec> out;
  for (auto kind : augment.transforms) {
    auto spec = TransformSpec::defaults(kind);
    if (const auto it = augment.ranges.find(kind); it != augment.ranges.end()) spec.range = it->second;
    spec.sample_rate = dataset.sample_rate;
    spec.validate();
    out.push_back(spec);
  }
  return out;
}

void ExperimentConfig::validate() const {
  dataset.validate();
  const Modality modality = dataset.kind == DatasetKind::sinusoids ? Modality::signal : Modality::image;
  if (trunk == TrunkKind::sinus_cnn && modality != Modality::signal) throw ConfigError("sinus_cnn needs a signal dataset");
  if (trunk == TrunkKind::sprite_cnn && modality != Modality::image) throw ConfigError("sprite_cnn needs an image dataset");
  if (trunk == TrunkKind::mlp && mlp_widths.empty() && preset != Preset::capacity_sweep) {
    throw ConfigError("mlp trunk needs mlp_widths");
  }
  if (augment.layers > 0 && augment.transforms.empty()) throw ConfigError("augment.transforms is empty");
  for (auto kind : augment.transforms) {
    if (!accepts(kind, modality)) {
      throw ConfigError("transform " + std::string(to_string(kind)) + " does not apply to " +
                        std::string(to_string(dataset.kind)));
    }
  }
  (void)layer_transforms();
  if (!(augment.mu_init >= 0.0 && augment.mu_init <= 1.0)) throw ConfigError("augment.mu_init must lie in [0, 1]");
  if (!(augment.fallback_mu_init > 0.0 && augment.fallback_mu_init <= 1.0)) {
    throw ConfigError("augment.fallback_mu_init must lie in (0, 1]");
  }
  if (augment.copies_train == 0 || augment.copies_eval == 0) throw ConfigError("copies must be at least 1");
  if (train.batch_size == 0) throw ConfigError("train.batch_size must be at least 1");
  if (!(train.lr > 0.0)) throw ConfigError("train.lr must be positive");
  if (!(train.weight_decay >= 0.0)) throw ConfigError("train.weight_decay must be non-negative");
  if (!(train.lambda >= 0.0)) throw ConfigError("train.lambda must be non-negative");
  if (invariance.transform != "identity") {
    const auto kind = transform_kind_from_string(invariance.transform);
    if (!accepts(kind, modality)) throw ConfigError("invariance.transform does not apply to this dataset");
  }
  if (!(invariance.range >= 0.0)) throw ConfigError("invariance.range must be non-negative");
  if (invariance.copies.empty()) throw ConfigError("invariance.copies is empty");
  for (auto c : invariance.copies) {
    if (c == 0) throw ConfigError("invariance.copies entries must be at least 1");
  }
  if (preset == Preset::capacity_sweep) {
    if (sweep.widths.empty() || sweep.depths.empty()) throw ConfigError("sweep grid is empty");
    for (auto w : sweep.widths) {
      if (w == 0) throw ConfigError("sweep widths must be positive");
    }
  }
}

ExperimentConfig preset_config(Preset p) {
  ExperimentConfig c;
  c.preset = p;
  c.output = "runs/" + std::string(to_string(p));
  c.dataset = DatasetSpec::sinusoids();
  c.augment.transforms = {TransformKind::frequency_shift, TransformKind::ft_surrogate, TransformKind::gaussian_noise};
  switch (p) {
    case Preset::sinusoids:
    case Preset::custom:
      break;
    case Preset::sinusoids_multilayer:
      c.augment.layers = 2;
      break;
    case Preset::capacity_sweep:
      c.trunk = TrunkKind::mlp;
      c.augment.copies_eval = 10;
      c.augment.mu_init = 0.05;
      c.train.lambda = 0.8;
      c.invariance.copies = {10};
      break;
    case Preset::sprites:
    case Preset::sprites_noreg:
    case Preset::sprites_augerino_reg:
      c.dataset = DatasetSpec::sprites();
      c.trunk = TrunkKind::sprite_cnn;
      c.augment.transforms = {TransformKind::translate_x, TransformKind::translate_y, TransformKind::rotate,
                              TransformKind::shear_x, TransformKind::shear_y};
      // pi/8 of rotation; the other kinds start at the same magnitude.
      c.augment.mu_init = 0.125;
      c.augment.copies_train = 1;
      c.augment.copies_eval = 4;
      c.train.epochs = 20;
      c.train.batch_size = 128;
      c.train.lr = 5e-4;
      c.train.weight_decay = 1.0;
      c.train.lambda = 0.5;
      c.train.reg = p == Preset::sprites_noreg       ? RegKind::none
                    : p == Preset::sprites_augerino_reg ? RegKind::augerino
                                                        : RegKind::selective;
      c.invariance.transform = "rotate";
      c.invariance.range = std::numbers::pi / 4.0;
      c.invariance.copies = {1, 4};
      break;
  }
  return c;
}

json to_json(const ExperimentConfig& c) {
  json ranges = json::object();
  for (const auto& [k, v] : c.augment.ranges) ranges[std::string(to_string(k))] = v;
  json transforms = json::array();
  for (auto k : c.augment.transforms) transforms.push_back(std::string(to_string(k)));
  const auto& d = c.dataset;
  return {
      {"preset", std::string(to_string(c.preset))},
      {"seed", c.seed},
      {"output", c.output},
      {"dataset",
       {{"kind", std::string(to_string(d.kind))},
        {"n_train", d.n_train},
        {"n_val", d.n_val},
        {"n_test", d.n_test},
        {"sample_rate", d.sample_rate},
        {"length", d.length},
        {"noise_std", d.noise_std},
        {"freq_halfwidth", d.freq_halfwidth},
        {"image_size", d.image_size}}},
      {"trunk", {{"kind", std::string(to_string(c.trunk))}, {"mlp_widths", c.mlp_widths}}},
      {"augment",
       {{"layers", c.augment.layers},
        {"transforms", transforms},
        {"ranges", ranges},
        {"mu_init", c.augment.mu_init},
        {"copies_train", c.augment.copies_train},
        {"copies_eval", c.augment.copies_eval},
        {"stall_fallback", c.augment.stall_fallback},
        {"fallback_mu_init", c.augment.fallback_mu_init}}},
      {"train",
       {{"epochs", c.train.epochs},
        {"batch_size", c.train.batch_size},
        {"lr", c.train.lr},
        {"weight_decay", c.train.weight_decay},
        {"lambda", c.train.lambda},
        {"reg", std::string(to_string(c.train.reg))},
        {"patience", c.train.patience}}},
      {"invariance",
       {{"transform", c.invariance.transform},
        {"range", c.invariance.range},
        {"copies", c.invariance.copies},
        {"examples", c.invariance.examples}}},
      {"sweep", {{"widths", c.sweep.widths}, {"depths", c.sweep.depths}}},
  };
}

ExperimentConfig from_json(const json& j) {
  Reader root(j, "");
  std::string preset = "sinusoids";
  root.get("preset", preset);
  ExperimentConfig c = preset_config(preset_from_string(preset));
  root.get("seed", c.seed);
  root.get("output", c.output);

  {
    Reader r = root.object("dataset");
    std::string kind(to_string(c.dataset.kind));
    r.get("kind", kind);
    c.dataset.kind = dataset_kind_from_string(kind);
    r.get("n_train", c.dataset.n_train);
    r.get("n_val", c.dataset.n_val);
    r.get("n_test", c.dataset.n_test);
    r.get("sample_rate", c.dataset.sample_rate);
    r.get("length", c.dataset.length);
    r.get("noise_std", c.dataset.noise_std);
    r.get("freq_halfwidth", c.dataset.freq_halfwidth);
    r.get("image_size", c.dataset.image_size);
    r.finish();
  }
  {
    Reader r = root.object("trunk");
    std::string kind(to_string(c.trunk));
    r.get("kind", kind);
    c.trunk = trunk_kind_from_string(kind);
    r.get("mlp_widths", c.mlp_widths);
    r.finish();
  }
  {
    Reader r = root.object("augment");
    r.get("layers", c.augment.layers);
    if (r.has("transforms")) {
      std::vector<std::string> names;
      r.get("transforms", names);
      c.augment.transforms.clear();
      for (const auto& n : names) c.augment.transforms.push_back(transform_kind_from_string(n));
    }
    if (r.has("ranges")) {
      Reader rr = r.object("ranges");
      c.augment.ranges.clear();
      for (const auto& [k, v] : j.at("augment").at("ranges").items()) {
        double value = 0.0;
        rr.get(k.c_str(), value);
        c.augment.ranges[transform_kind_from_string(k)] = value;
      }
      rr.finish();
    }
    r.get("mu_init", c.augment.mu_init);
    r.get("copies_train", c.augment.copies_train);
    r.get("copies_eval", c.augment.copies_eval);
    r.get("stall_fallback", c.augment.stall_fallback);
    r.get("fallback_mu_init", c.augment.fallback_mu_init);
    r.finish();
  }
  {
    Reader r = root.object("train");
    r.get("epochs", c.train.epochs);
    r.get("batch_size", c.train.batch_size);
    r.get("lr", c.train.lr);
    r.get("weight_decay", c.train.weight_decay);
    r.get("lambda", c.train.lambda);
    std::string reg(to_string(c.train.reg));
    r.get("reg", reg);
    c.train.reg = reg_kind_from_string(reg);
    r.get("patience", c.train.patience);
    r.finish();
  }
  {
    Reader r = root.object("invariance");
    r.get("transform", c.invariance.transform);
    r.get("range", c.invariance.range);
    r.get("copies", c.invariance.copies);
    r.get("examples", c.invariance.examples);
    r.finish();
  }
  {
    Reader r = root.object("sweep");
    r.get("widths", c.sweep.widths);
    r.get("depths", c.sweep.depths);
    r.finish();
  }
  root.finish();
  c.validate();
  return c;
}

std::pair<std::string, json> parse_assignment(std::string_view text) {
  const auto eq = text.find('=');
  if (eq == std::string_view::npos) throw ConfigError("expected key=value, got '" + std::string(text) + "'");
  std::string key = trim(text.substr(0, eq));
  const std::string raw = trim(text.substr(eq + 1));
  if (key.empty()) throw ConfigError("empty key in '" + std::string(text) + "'");
  json value = json::parse(raw, nullptr, false);
  if (value.is_discarded()) {
    if (raw.size() >= 2 && raw.front() == '[' && raw.back() == ']') {
      value = json::array();
      std::stringstream ss(raw.substr(1, raw.size() - 2));
      for (std::string item; std::getline(ss, item, ',');) {
        if (const auto t = trim(item); !t.empty()) value.push_back(t);
      }
    } else {
      value = raw;
    }
  }
  return {key, value};
}

ExperimentConfig resolve_config(const std::optional<std::filesystem::path>& file, std::span<const std::string> assignments,
                                std::optional<std::uint64_t> seed, std::optional<std::string> output) {
  json file_json = json::object();
  if (file) {
    std::ifstream in(*file);
    if (!in) throw ConfigError("cannot open config " + file->string());
    try {
      file_json = json::parse(in, nullptr, true, true);
    } catch (const json::parse_error& e) {
      throw ConfigError(file->string() + ": " + e.what());
    }
    if (!file_json.is_object()) throw ConfigError(file->string() + ": top level must be an object");
  }
  std::vector<std::pair<std::string, json>> sets;
  for (const auto& a : assignments) sets.push_back(parse_assignment(a));

  std::string preset = "sinusoids";
  if (file_json.contains("preset")) {
    if (!file_json["preset"].is_string()) throw ConfigError("preset must be a string");
    preset = file_json["preset"].get<std::string>();
  }
  for (const auto& [k, v] : sets) {
    if (k == "preset") {
      if (!v.is_string()) throw ConfigError("preset must be a string");
      preset = v.get<std::string>();
    }
  }

  json resolved = to_json(preset_config(preset_from_string(preset)));
  // Section-wise merge so that a file cannot smuggle in keys the schema lacks.
  file_json.erase("preset");
  for (const auto& [k, v] : file_json.items()) {
    if (!resolved.contains(k)) throw ConfigError("unknown config key '" + k + "'");
    if (v.is_object() && resolved[k].is_object()) {
      for (const auto& [k2, v2] : v.items()) {
        if (!resolved[k].contains(k2)) throw ConfigError("unknown config key '" + k + "." + k2 + "'");
        resolved[k][k2] = v2;
      }
    } else {
      resolved[k] = v;
    }
  }
  for (const auto& [k, v] : sets) {
    if (k == "preset") continue;
    set_path(resolved, k, v);
  }
  if (seed) resolved["seed"] = *seed;
  if (output) resolved["output"] = *output;
  return from_json(resolved);
}

}  // namespace augnet

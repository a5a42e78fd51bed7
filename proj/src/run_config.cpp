#include "hsmgnn/run_config.hpp"

#include <algorithm>
#include <charconv>
#include <cstdlib>
#include <fstream>
#include <functional>
#include <sstream>

#include <nlohmann/json.hpp>

#include "hsmgnn/error.hpp"

namespace hsmgnn {

namespace {

using json = nlohmann::ordered_json;

struct Field {
  std::string name;
  std::function<json(const RunConfig&)> get;
  std::function<void(RunConfig&, const json&)> set;
};

std::size_t as_count(const json& j, const std::string& key) {
  if (!j.is_number_unsigned() && !(j.is_number_integer() && j.get<std::int64_t>() >= 0)) {
    throw ConfigError("config key '" + key + "' expects a non-negative integer, got " + j.dump());
  }
  return j.get<std::size_t>();
}

double as_real(const json& j, const std::string& key) {
  if (!j.is_number()) throw ConfigError("config key '" + key + "' expects a number, got " + j.dump());
  return j.get<double>();
}

std::string as_string(const json& j, const std::string& key) {
  if (!j.is_string()) throw ConfigError("config key '" + key + "' expects a string, got " + j.dump());
  return j.get<std::string>();
}

#define HSMGNN_COUNT(key, member)                                                    \
  Field{key, [](const RunConfig& c) { return json(c.member); },                    \
        [](RunConfig& c, const json& j) { c.member = as_count(j, key); }}
#define HSMGNN_REAL(key, member)                                                     \
  Field{key, [](const RunConfig& c) { return json(c.member); },                    \
        [](RunConfig& c, const json& j) { c.member = as_real(j, key); }}
#define HSMGNN_STRING(key, member)                                                   \
  Field{key, [](const RunConfig& c) { return json(c.member); },                    \
        [](RunConfig& c, const json& j) { c.member = as_string(j, key); }}

const std::vector<Field>& fields() {
  static const std::vector<Field> table = {
      Field{"seed", [](const RunConfig& c) { return json(c.train.seed); },
            [](RunConfig& c, const json& j) { c.train.seed = as_count(j, "seed"); }},
      Field{"variant", [](const RunConfig& c) { return json(std::string(variant_name(c.model.variant))); },
            [](RunConfig& c, const json& j) { c.model.variant = parse_variant(as_string(j, "variant")); }},
      HSMGNN_COUNT("patch_length", model.scs.patch_length),
      HSMGNN_REAL("delta", model.scs.delta),
      HSMGNN_COUNT("feature_blocks", model.scs.feature_blocks),
      HSMGNN_COUNT("cnn_hidden", model.scs.cnn_hidden),
      HSMGNN_COUNT("kernel_size", model.scs.kernel_size),
      HSMGNN_REAL("spd_jitter", model.scs.spd_jitter),
      HSMGNN_COUNT("m_q", model.memory_dim),
      HSMGNN_COUNT("m_d", model.ndv_hidden),
      HSMGNN_COUNT("hops_spd", model.fusion.hops_spd),
      HSMGNN_COUNT("hops_euclid", model.fusion.hops_euclid),
      HSMGNN_COUNT("proj_spd", model.fusion.proj_spd),
      HSMGNN_COUNT("proj_euclid", model.fusion.proj_euclid),
      HSMGNN_REAL("weight_spd", model.fusion.weight_spd),
      HSMGNN_REAL("weight_euclid", model.fusion.weight_euclid),
      Field{"mlp_widths", [](const RunConfig& c) { return json(c.model.fusion.mlp_widths); },
            [](RunConfig& c, const json& j) {
              if (!j.is_array()) throw ConfigError("config key 'mlp_widths' expects an array");
              std::vector<std::size_t> widths;
              for (const auto& w : j) widths.push_back(as_count(w, "mlp_widths"));
              c.model.fusion.mlp_widths = std::move(widths);
            }},
      HSMGNN_COUNT("batch_size", train.batch_size),
      HSMGNN_COUNT("epochs", train.epochs),
      HSMGNN_REAL("learning_rate", train.learning_rate),
      HSMGNN_COUNT("patience", train.patience),
      HSMGNN_REAL("valid_fraction", train.valid_fraction),
      HSMGNN_COUNT("max_steps", train.max_steps),
      HSMGNN_COUNT("window_length", window_length),
      HSMGNN_REAL("rul_cap", rul_cap),
      HSMGNN_STRING("label_column", label_column),
      HSMGNN_STRING("group_column", group_column),
      HSMGNN_STRING("data", data),
      HSMGNN_STRING("test_data", test_data),
  };
  return table;
}

#undef HSMGNN_COUNT
#undef HSMGNN_REAL
#undef HSMGNN_STRING

const Field& field(std::string_view key) {
  std::string normalized(key);
  std::replace(normalized.begin(), normalized.end(), '-', '_');
  for (const auto& f : fields()) {
    if (f.name == normalized) return f;
  }
  throw ConfigError("unknown config key '" + std::string(key) + "'");
}

}  // namespace

const std::vector<std::string>& run_config_keys() {
  static const std::vector<std::string> keys = [] {
    std::vector<std::string> out;
    for (const auto& f : fields()) out.push_back(f.name);
    return out;
  }();
  return keys;
}

RunConfig default_run_config() {
  RunConfig cfg;
  if (const char* env = std::getenv("HSMGNN_SEED"); env != nullptr && *env != '\0') {
    const std::string_view text(env);
    std::uint64_t seed = 0;
    const auto [ptr, ec] = std::from_chars(text.data(), text.data() + text.size(), seed);
    if (ec != std::errc() || ptr != text.data() + text.size()) {
      throw ConfigError("HSMGNN_SEED must be a non-negative integer, got '" + std::string(text) + "'");
    }
    cfg.train.seed = seed;
  }
  return cfg;
}

void apply_json(RunConfig& cfg, std::string_view json_text) {
  json j;
  try {
    j = json::parse(json_text);
  } catch (const json::parse_error& e) {
    throw ConfigError(std::string("config is not valid JSON: ") + e.what());
  }
  if (!j.is_object()) throw ConfigError("config must be a JSON object");
  // Resolve every key before applying any, so an unknown key leaves cfg untouched.
  std::vector<std::pair<const Field*, const json*>> updates;
  for (const auto& [key, value] : j.items()) updates.emplace_back(&field(key), &value);
  RunConfig next = cfg;
  for (const auto& [f, value] : updates) f->set(next, *value);
  cfg = std::move(next);
}

void apply_override(RunConfig& cfg, std::string_view key, std::string_view text) {
  const Field& f = field(key);
  json value;
  if (f.name == "mlp_widths" && !text.empty() && text.front() != '[') {
    value = json::parse("[" + std::string(text) + "]", nullptr, false);
  } else {
    value = json::parse(text, nullptr, false);
  }
  // Anything that is not a JSON literal is taken as a plain string.
  if (value.is_discarded() || (value.is_string() && text.front() != '"')) value = std::string(text);
  f.set(cfg, value);
}

void apply_file(RunConfig& cfg, const std::string& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open config '" + path + "'");
  std::ostringstream buf;
  buf << in.rdbuf();
  try {
    apply_json(cfg, buf.str());
  } catch (const ConfigError& e) {
    throw ConfigError(path + ": " + e.what());
  }
}

std::string to_json(const RunConfig& cfg) {
  json j;
  for (const auto& f : fields()) j[f.name] = f.get(cfg);
  return j.dump(2) + "\n";
}

data::CmapssOptions cmapss_options(const RunConfig& cfg) {
  return {.window_length = cfg.window_length, .rul_cap = cfg.rul_cap};
}

data::CsvSchema csv_schema(const RunConfig& cfg) {
  data::CsvSchema schema;
  schema.label_column = cfg.label_column;
  schema.group_column = cfg.group_column;
  schema.window_length = cfg.group_column.empty() ? cfg.window_length : 0;
  return schema;
}

}  // namespace hsmgnn

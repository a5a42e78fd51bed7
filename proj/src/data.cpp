#include "hsmgnn/data.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <map>
#include <set>
#include <sstream>

#include <nlohmann/json.hpp>

#include "binary_io.hpp"
#include "hsmgnn/error.hpp"
#include "hsmgnn/random.hpp"

namespace hsmgnn::data {

namespace {

std::string_view trim(std::string_view s) {
  while (!s.empty() && (s.front() == ' ' || s.front() == '\t' || s.front() == '\r')) s.remove_prefix(1);
  while (!s.empty() && (s.back() == ' ' || s.back() == '\t' || s.back() == '\r')) s.remove_suffix(1);
  if (s.size() >= 2 && s.front() == '"' && s.back() == '"') s = s.substr(1, s.size() - 2);
  return s;
}

bool parse_double(std::string_view s, double& out) {
  s = trim(s);
  if (!s.empty() && s.front() == '+') s.remove_prefix(1);
  if (s.empty()) return false;
  const auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), out);
  return ec == std::errc() && ptr == s.data() + s.size();
}

std::ifstream open_text(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open '" + path + "'");
  return in;
}

std::string at_line(const std::string& path, std::size_t line) {
  return path + ":" + std::to_string(line) + " (line " + std::to_string(line) + ")";
}

std::vector<std::string_view> split_whitespace(std::string_view line) {
  std::vector<std::string_view> out;
  std::size_t i = 0;
  while (i < line.size()) {
    while (i < line.size() && std::isspace(static_cast<unsigned char>(line[i]))) ++i;
    const std::size_t start = i;
    while (i < line.size() && !std::isspace(static_cast<unsigned char>(line[i]))) ++i;
    if (i > start) out.push_back(line.substr(start, i - start));
  }
  return out;
}

std::vector<std::string_view> split_commas(std::string_view line) {
  std::vector<std::string_view> out;
  std::size_t start = 0;
  for (std::size_t i = 0; i <= line.size(); ++i) {
    if (i == line.size() || line[i] == ',') {
      out.push_back(trim(line.substr(start, i - start)));
      start = i + 1;
    }
  }
  return out;
}

std::uint32_t to_u32(std::size_t v, const char* what) {
  if (v > 0xFFFFFFFFull) throw FormatError(std::string("dataset: ") + what + " exceeds u32");
  return static_cast<std::uint32_t>(v);
}

}  // namespace

std::span<const double> SampleSet::window(std::size_t i) const {
  return std::span<const double>(values).subspan(i * window_size(), window_size());
}

std::size_t SampleSet::num_classes() const {
  if (task != Task::kClassification) return 0;
  std::size_t k = class_names.size();
  for (double l : labels) k = std::max(k, static_cast<std::size_t>(std::lround(l)) + 1);
  return k;
}

SampleSet SampleSet::subset(std::span<const std::size_t> indices) const {
  SampleSet out;
  out.task = task;
  out.sensors = sensors;
  out.length = length;
  out.channels = channels;
  out.sensor_names = sensor_names;
  out.class_names = class_names;
  out.normalization = normalization;
  out.values.reserve(indices.size() * window_size());
  out.labels.reserve(indices.size());
  for (std::size_t i : indices) {
    const auto w = window(i);
    out.values.insert(out.values.end(), w.begin(), w.end());
    out.labels.push_back(labels[i]);
    if (!groups.empty()) out.groups.push_back(groups[i]);
  }
  return out;
}

void SampleSet::check() const {
  if (values.size() != labels.size() * window_size()) {
    throw FormatError("sample set: value count does not match windows");
  }
  if (!groups.empty() && groups.size() != labels.size()) {
    throw FormatError("sample set: group id count does not match samples");
  }
  for (double v : values) {
    if (!std::isfinite(v)) throw FormatError("sample set: non-finite window value");
  }
  for (double l : labels) {
    if (!std::isfinite(l)) throw FormatError("sample set: non-finite label");
    if (task == Task::kClassification && (l < 0 || l != std::floor(l))) {
      throw FormatError("sample set: classification label is not a class index");
    }
  }
}

// ---------------------------------------------------------------------------

CmapssTable read_cmapss_table(const std::string& path) {
  auto in = open_text(path);
  CmapssTable table;
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    const auto fields = split_whitespace(line);
    if (fields.empty()) continue;
    if (fields.size() != CmapssTable::kColumns) {
      throw FormatError(at_line(path, line_no) + ": expected 26 columns, got " +
                        std::to_string(fields.size()));
    }
    double v[CmapssTable::kColumns];
    for (std::size_t c = 0; c < CmapssTable::kColumns; ++c) {
      if (!parse_double(fields[c], v[c])) {
        throw FormatError(at_line(path, line_no) + ": cannot parse '" + std::string(fields[c]) +
                          "'");
      }
    }
    table.unit.push_back(static_cast<std::int64_t>(v[0]));
    table.cycle.push_back(static_cast<std::int64_t>(v[1]));
    std::array<double, CmapssTable::kSensors> s{};
    std::copy(v + 5, v + CmapssTable::kColumns, s.begin());
    table.sensors.push_back(s);
  }
  if (table.rows() == 0) throw FormatError(path + ": no data rows");
  return table;
}

std::vector<double> read_rul_file(const std::string& path) {
  auto in = open_text(path);
  std::vector<double> out;
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    const auto fields = split_whitespace(line);
    if (fields.empty()) continue;
    double v = 0.0;
    if (fields.size() != 1 || !parse_double(fields[0], v)) {
      throw FormatError(at_line(path, line_no) + ": expected one RUL value");
    }
    out.push_back(v);
  }
  return out;
}

NormalizationStats fit_normalization(const CmapssTable& train) {
  NormalizationStats stats;
  const double n = static_cast<double>(train.rows());
  for (std::size_t s = 0; s < CmapssTable::kSensors; ++s) {
    double lo = train.sensors.front()[s];
    double hi = lo;
    double total = 0.0;
    for (const auto& row : train.sensors) {
      lo = std::min(lo, row[s]);
      hi = std::max(hi, row[s]);
      total += row[s];
    }
    if (lo == hi) continue;
    const double mean = total / n;
    double sq = 0.0;
    for (const auto& row : train.sensors) sq += (row[s] - mean) * (row[s] - mean);
    stats.channels.push_back("s" + std::to_string(s + 1));
    stats.mean.push_back(mean);
    stats.stddev.push_back(std::sqrt(sq / n));
  }
  if (stats.channels.empty()) throw FormatError("C-MAPSS: every sensor is constant");
  return stats;
}

SampleSet window_cmapss(const CmapssTable& table, const NormalizationStats& stats,
                        const CmapssOptions& options, std::span<const double> final_rul,
                        bool last_only) {
  const std::size_t t_len = options.window_length;
  if (t_len == 0) throw ConfigError("window_length must be positive");

  std::vector<std::size_t> kept;
  for (const auto& name : stats.channels) kept.push_back(std::stoul(name.substr(1)) - 1);
  const std::size_t n = kept.size();

  // Rows of each unit in cycle order, units sorted by id.
  std::map<std::int64_t, std::vector<std::size_t>> units;
  for (std::size_t r = 0; r < table.rows(); ++r) units[table.unit[r]].push_back(r);
  if (!final_rul.empty() && final_rul.size() != units.size()) {
    throw FormatError("C-MAPSS: " + std::to_string(final_rul.size()) + " RUL values for " +
                      std::to_string(units.size()) + " units");
  }

  SampleSet set;
  set.task = Task::kRegression;
  set.sensors = n;
  set.length = t_len;
  set.channels = 1;
  set.sensor_names = stats.channels;
  set.normalization = stats;

  std::size_t unit_index = 0;
  for (auto& [unit_id, rows] : units) {
    std::stable_sort(rows.begin(), rows.end(),
                     [&](std::size_t a, std::size_t b) { return table.cycle[a] < table.cycle[b]; });
    const double tail = final_rul.empty() ? 0.0 : final_rul[unit_index];
    ++unit_index;
    const std::size_t len = rows.size();
    if (len < t_len && !last_only) continue;
    const auto value = [&](std::ptrdiff_t t, std::size_t c) {
      const std::size_t r = rows[static_cast<std::size_t>(std::max<std::ptrdiff_t>(t, 0))];
      return (table.sensors[r][kept[c]] - stats.mean[c]) / stats.stddev[c];
    };
    const std::size_t first_end = last_only ? len - 1 : t_len - 1;
    for (std::size_t end = first_end; end < len; ++end) {
      const std::ptrdiff_t start =
          static_cast<std::ptrdiff_t>(end) - static_cast<std::ptrdiff_t>(t_len) + 1;
      for (std::size_t c = 0; c < n; ++c) {
        for (std::size_t t = 0; t < t_len; ++t) {
          set.values.push_back(value(start + static_cast<std::ptrdiff_t>(t), c));
        }
      }
      const double rul = tail + static_cast<double>(len - 1 - end);
      set.labels.push_back(std::min(options.rul_cap, rul));
      set.groups.push_back(unit_id);
    }
  }
  return set;
}

CmapssData load_cmapss(const std::string& dir, const std::string& subset,
                       const CmapssOptions& options) {
  const std::filesystem::path root(dir);
  const CmapssTable train = read_cmapss_table((root / ("train_" + subset + ".txt")).string());
  const CmapssTable test = read_cmapss_table((root / ("test_" + subset + ".txt")).string());
  const std::vector<double> rul = read_rul_file((root / ("RUL_" + subset + ".txt")).string());
  const NormalizationStats stats = fit_normalization(train);
  CmapssData out;
  out.train = window_cmapss(train, stats, options, {}, false);
  out.test = window_cmapss(test, stats, options, rul, true);
  if (out.train.empty()) throw FormatError("C-MAPSS: no training unit is as long as the window");
  return out;
}

// ---------------------------------------------------------------------------

SampleSet load_csv(const std::string& path, const CsvSchema& schema) {
  auto in = open_text(path);
  std::string line;
  std::size_t line_no = 0;
  std::vector<std::string> header;
  while (header.empty() && std::getline(in, line)) {
    ++line_no;
    if (trim(line).empty()) continue;
    for (auto f : split_commas(line)) header.emplace_back(f);
  }
  if (header.empty()) throw FormatError(path + ": missing header row");

  const auto find = [&](const std::string& name) -> std::ptrdiff_t {
    const auto it = std::find(header.begin(), header.end(), name);
    return it == header.end() ? -1 : it - header.begin();
  };
  const std::ptrdiff_t label_col = find(schema.label_column);
  if (label_col < 0) throw FormatError(path + ": no label column '" + schema.label_column + "'");
  std::ptrdiff_t group_col = -1;
  if (!schema.group_column.empty()) {
    group_col = find(schema.group_column);
    if (group_col < 0) throw FormatError(path + ": no group column '" + schema.group_column + "'");
  } else if (schema.window_length == 0) {
    throw ConfigError("CSV input needs a window length or a group column");
  }
  std::vector<std::size_t> sensor_cols;
  SampleSet set;
  for (std::size_t c = 0; c < header.size(); ++c) {
    if (static_cast<std::ptrdiff_t>(c) == label_col || static_cast<std::ptrdiff_t>(c) == group_col) continue;
    sensor_cols.push_back(c);
    set.sensor_names.push_back(header[c]);
  }
  if (sensor_cols.empty()) throw FormatError(path + ": no sensor columns");

  struct Window {
    std::vector<std::vector<double>> rows;  // per time step, per sensor
    std::string label;
  };
  std::vector<Window> windows;
  std::vector<std::int64_t> group_ids;
  std::map<std::string, std::size_t> group_index;

  while (std::getline(in, line)) {
    ++line_no;
    if (trim(line).empty()) continue;
    const auto fields = split_commas(line);
    if (fields.size() != header.size()) {
      throw FormatError(at_line(path, line_no) + ": expected " + std::to_string(header.size()) +
                        " fields, got " + std::to_string(fields.size()));
    }
    std::vector<double> row(sensor_cols.size());
    for (std::size_t s = 0; s < sensor_cols.size(); ++s) {
      if (!parse_double(fields[sensor_cols[s]], row[s])) {
        throw FormatError(at_line(path, line_no) + ": cannot parse '" +
                          std::string(fields[sensor_cols[s]]) + "' in column '" +
                          header[sensor_cols[s]] + "'");
      }
    }
    Window* target = nullptr;
    if (group_col >= 0) {
      const std::string key(fields[static_cast<std::size_t>(group_col)]);
      auto [it, inserted] = group_index.emplace(key, windows.size());
      if (inserted) {
        windows.emplace_back();
        group_ids.push_back(static_cast<std::int64_t>(it->second));
      }
      target = &windows[it->second];
    } else {
      if (windows.empty() || windows.back().rows.size() == schema.window_length) windows.emplace_back();
      target = &windows.back();
    }
    target->rows.push_back(std::move(row));
    target->label = std::string(fields[static_cast<std::size_t>(label_col)]);
  }
  if (windows.empty()) throw FormatError(path + ": no data rows");

  const std::size_t t_len =
      schema.window_length != 0 ? schema.window_length : windows.front().rows.size();
  for (std::size_t w = 0; w < windows.size(); ++w) {
    if (windows[w].rows.size() != t_len) {
      throw FormatError(path + ": window " + std::to_string(w) + " has " +
                        std::to_string(windows[w].rows.size()) + " rows, expected " +
                        std::to_string(t_len));
    }
  }

  Task task = Task::kRegression;
  if (schema.task) {
    task = *schema.task;
  } else {
    double dummy = 0.0;
    for (const auto& w : windows) {
      if (!parse_double(w.label, dummy)) task = Task::kClassification;
    }
  }
  std::map<std::string, std::size_t> classes;
  if (task == Task::kClassification) {
    for (const auto& w : windows) classes.emplace(w.label, 0);
    std::size_t k = 0;
    for (auto& [name, index] : classes) {
      index = k++;
      set.class_names.push_back(name);
    }
  }

  set.task = task;
  set.sensors = sensor_cols.size();
  set.length = t_len;
  set.channels = 1;
  for (const auto& w : windows) {
    for (std::size_t s = 0; s < set.sensors; ++s) {
      for (std::size_t t = 0; t < t_len; ++t) set.values.push_back(w.rows[t][s]);
    }
    if (task == Task::kClassification) {
      set.labels.push_back(static_cast<double>(classes.at(w.label)));
    } else {
      double v = 0.0;
      if (!parse_double(w.label, v)) throw FormatError(path + ": non-numeric regression label '" + w.label + "'");
      set.labels.push_back(v);
    }
  }
  set.groups = std::move(group_ids);
  set.check();
  return set;
}

// ---------------------------------------------------------------------------

std::vector<std::uint8_t> encode_dataset(const SampleSet& set) {
  set.check();
  binary::Writer w;
  w.bytes("MTSD");
  w.u32(kDatasetVersion);
  w.u32(to_u32(set.size(), "sample count"));
  w.u32(to_u32(set.sensors, "N"));
  w.u32(to_u32(set.length, "T"));
  w.u32(to_u32(set.channels, "C"));
  w.u8(static_cast<std::uint8_t>(set.task));
  for (std::size_t i = 0; i < set.size(); ++i) {
    for (double v : set.window(i)) w.f64(v);
    w.f64(set.labels[i]);
  }
  return std::move(w.buffer());
}

SampleSet decode_dataset(std::span<const std::uint8_t> bytes) {
  binary::Reader r(bytes, "dataset");
  if (r.bytes(4) != "MTSD") throw FormatError("dataset: bad magic");
  const std::uint32_t version = r.u32();
  if (version != kDatasetVersion) throw FormatError("dataset: unsupported version " + std::to_string(version));
  SampleSet set;
  const std::size_t count = r.u32();
  set.sensors = r.u32();
  set.length = r.u32();
  set.channels = r.u32();
  const std::uint8_t task = r.u8();
  if (task > 1) throw FormatError("dataset: unknown task mode " + std::to_string(task));
  set.task = static_cast<Task>(task);
  if (set.sensors == 0 || set.length == 0 || set.channels == 0) {
    throw FormatError("dataset: zero dimension in header");
  }
  const std::size_t record = (set.window_size() + 1) * 8;
  if (r.remaining() != count * record) {
    throw FormatError("dataset: payload is " + std::to_string(r.remaining()) + " bytes, expected " +
                      std::to_string(count * record));
  }
  set.values.reserve(count * set.window_size());
  set.labels.reserve(count);
  for (std::size_t i = 0; i < count; ++i) {
    for (std::size_t k = 0; k < set.window_size(); ++k) set.values.push_back(r.f64());
    set.labels.push_back(r.f64());
  }
  set.check();
  return set;
}

void save_dataset(const std::string& path, const SampleSet& set) {
  binary::write_file(path, encode_dataset(set));
}

SampleSet load_dataset(const std::string& path) { return decode_dataset(binary::read_file(path)); }

std::string groups_sidecar_path(const std::string& dataset_path) {
  return dataset_path + ".groups.json";
}

void save_groups(const std::string& dataset_path, const SampleSet& set) {
  nlohmann::json j;
  j["groups"] = set.groups;
  j["sensor_names"] = set.sensor_names;
  j["class_names"] = set.class_names;
  std::ofstream out(groups_sidecar_path(dataset_path), std::ios::trunc);
  if (!out) throw IoError("cannot write '" + groups_sidecar_path(dataset_path) + "'");
  out << j.dump() << '\n';
}

bool load_groups(const std::string& dataset_path, SampleSet& set) {
  const std::string path = groups_sidecar_path(dataset_path);
  std::ifstream in(path);
  if (!in) return false;
  nlohmann::json j;
  try {
    in >> j;
    set.groups = j.at("groups").get<std::vector<std::int64_t>>();
    set.sensor_names = j.value("sensor_names", std::vector<std::string>{});
    set.class_names = j.value("class_names", std::vector<std::string>{});
  } catch (const nlohmann::json::exception& e) {
    throw FormatError(path + ": " + e.what());
  }
  if (!set.groups.empty() && set.groups.size() != set.size()) {
    throw FormatError(path + ": group count does not match samples");
  }
  return true;
}

// ---------------------------------------------------------------------------

namespace {

// Unit keys in a deterministic order: distinct group ids, or sample indices.
std::vector<std::int64_t> partition_keys(const SampleSet& set) {
  if (set.groups.empty()) {
    std::vector<std::int64_t> keys(set.size());
    for (std::size_t i = 0; i < keys.size(); ++i) keys[i] = static_cast<std::int64_t>(i);
    return keys;
  }
  std::set<std::int64_t> unique(set.groups.begin(), set.groups.end());
  return {unique.begin(), unique.end()};
}

std::int64_t key_of(const SampleSet& set, std::size_t i) {
  return set.groups.empty() ? static_cast<std::int64_t>(i) : set.groups[i];
}

std::vector<SampleSet> assign(const SampleSet& set, std::vector<std::int64_t> keys,
                              const std::vector<std::size_t>& counts, std::uint64_t seed) {
  Rng rng(seed);
  rng.shuffle(keys);
  std::map<std::int64_t, std::size_t> part;
  std::size_t k = 0;
  for (std::size_t p = 0; p < counts.size(); ++p) {
    for (std::size_t c = 0; c < counts[p]; ++c) part[keys[k++]] = p;
  }
  std::vector<std::vector<std::size_t>> indices(counts.size());
  for (std::size_t i = 0; i < set.size(); ++i) indices[part.at(key_of(set, i))].push_back(i);
  std::vector<SampleSet> out;
  for (const auto& idx : indices) out.push_back(set.subset(idx));
  return out;
}

void check_fraction(double f, const char* name) {
  if (!(f > 0.0 && f < 1.0)) throw ConfigError(std::string(name) + " must lie in (0, 1)");
}

}  // namespace

Split split(const SampleSet& set, double train_frac, double valid_frac, std::uint64_t seed) {
  check_fraction(train_frac, "train fraction");
  check_fraction(valid_frac, "validation fraction");
  if (train_frac + valid_frac >= 1.0) throw ConfigError("train + validation fractions must be < 1");
  auto keys = partition_keys(set);
  const double units = static_cast<double>(keys.size());
  const auto n_train = static_cast<std::size_t>(std::llround(train_frac * units));
  const auto n_valid = static_cast<std::size_t>(std::llround(valid_frac * units));
  if (n_train == 0 || n_valid == 0 || n_train + n_valid >= keys.size()) {
    throw ConfigError("split of " + std::to_string(keys.size()) +
                      " units leaves an empty partition");
  }
  auto parts = assign(set, std::move(keys), {n_train, n_valid, static_cast<std::size_t>(units) - n_train - n_valid}, seed);
  return {std::move(parts[0]), std::move(parts[1]), std::move(parts[2])};
}

std::pair<SampleSet, SampleSet> carve_validation(const SampleSet& set, double valid_frac,
                                                 std::uint64_t seed) {
  check_fraction(valid_frac, "validation fraction");
  auto keys = partition_keys(set);
  const auto n_valid = static_cast<std::size_t>(
      std::max<long long>(1, std::llround(valid_frac * static_cast<double>(keys.size()))));
  if (n_valid >= keys.size()) {
    throw ConfigError("validation carve-out of " + std::to_string(keys.size()) +
                      " units leaves no training data");
  }
  const std::size_t n_train = keys.size() - n_valid;
  auto parts = assign(set, std::move(keys), {n_train, n_valid}, seed);
  return {std::move(parts[0]), std::move(parts[1])};
}

SampleSet synthetic_linear_set(std::size_t count, std::size_t sensors, std::size_t length,
                               std::uint64_t seed) {
  Rng rng(seed);
  std::vector<double> weights(sensors);
  for (double& w : weights) w = rng.uniform(-1.0, 1.0);
  SampleSet set;
  set.task = Task::kRegression;
  set.sensors = sensors;
  set.length = length;
  set.channels = 1;
  for (std::size_t s = 0; s < sensors; ++s) set.sensor_names.push_back("x" + std::to_string(s));
  const double norm = 1.0 / std::sqrt(static_cast<double>(sensors * length));
  for (std::size_t i = 0; i < count; ++i) {
    double label = 0.0;
    for (std::size_t s = 0; s < sensors; ++s) {
      for (std::size_t t = 0; t < length; ++t) {
        const double v = rng.normal();
        set.values.push_back(v);
        label += weights[s] * v;
      }
    }
    set.labels.push_back(label * norm);
  }
  return set;
}

}  // namespace hsmgnn::data

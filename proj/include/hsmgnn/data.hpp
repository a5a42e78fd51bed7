#pragma once

#include <array>
#include <cstddef>
#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "hsmgnn/task.hpp"

namespace hsmgnn::data {

struct NormalizationStats {
  std::vector<std::string> channels;
  std::vector<double> mean;
  std::vector<double> stddev;
};

/// Windows of shape N x T x C stored contiguously, one label per window.
struct SampleSet {
  Task task = Task::kRegression;
  std::size_t sensors = 0;   // N
  std::size_t length = 0;    // T
  std::size_t channels = 1;  // C
  std::vector<double> values;
  std::vector<double> labels;  // regression target or class index
  std::vector<std::int64_t> groups;  // trajectory/unit id per sample; may be empty
  std::vector<std::string> sensor_names;
  std::vector<std::string> class_names;
  std::optional<NormalizationStats> normalization;

  std::size_t size() const { return labels.size(); }
  bool empty() const { return labels.empty(); }
  std::size_t window_size() const { return sensors * length * channels; }
  std::span<const double> window(std::size_t i) const;
  /// Number of classes (max label + 1) for classification sets.
  std::size_t num_classes() const;

  /// Copy of the selected samples, in the given order.
  SampleSet subset(std::span<const std::size_t> indices) const;
  /// Throws FormatError if values/labels are inconsistent or contain NaN.
  void check() const;
};

// ---------------------------------------------------------------------------
// C-MAPSS

struct CmapssOptions {
  std::size_t window_length = 30;
  double rul_cap = 125.0;
};

/// One parsed C-MAPSS text file: unit id, cycle, 3 settings, 21 sensors.
struct CmapssTable {
  static constexpr std::size_t kColumns = 26;
  static constexpr std::size_t kSensors = 21;
  std::vector<std::int64_t> unit;
  std::vector<std::int64_t> cycle;
  std::vector<std::array<double, kSensors>> sensors;

  std::size_t rows() const { return unit.size(); }
};

CmapssTable read_cmapss_table(const std::string& path);
/// RUL_FD00x.txt: one integer per test unit.
std::vector<double> read_rul_file(const std::string& path);

/// Drops sensors that are constant over `train` and z-scores the rest with
/// population statistics of `train`.
NormalizationStats fit_normalization(const CmapssTable& train);

struct CmapssData {
  SampleSet train;  // stride-1 windows of every training unit, grouped by unit
  SampleSet test;   // last window of every test unit, labelled from the RUL file
};

/// Reads train_<subset>.txt, test_<subset>.txt and RUL_<subset>.txt from `dir`.
CmapssData load_cmapss(const std::string& dir, const std::string& subset,
                       const CmapssOptions& options = {});

/// Windows one table against fitted statistics. `final_rul` holds the RUL at
/// the last recorded cycle of each unit (0 for training run-to-failure data);
/// when `last_only`, only the final window of each unit is kept and units
/// shorter than the window are front-padded with their first row.
SampleSet window_cmapss(const CmapssTable& table, const NormalizationStats& stats,
                        const CmapssOptions& options, std::span<const double> final_rul,
                        bool last_only);

// ---------------------------------------------------------------------------
// Generic CSV

struct CsvSchema {
  std::string label_column = "label";
  /// Optional column whose value identifies the sample a row belongs to.
  std::string group_column;
  /// Rows per window when no group column is given; with a group column,
  /// 0 means "whatever each group holds" (all groups must agree).
  std::size_t window_length = 0;
  /// Unset: regression if every label parses as a number.
  std::optional<Task> task;
};

/// Long-format CSV: a header row, then one time step per row. Every sensor
/// column becomes one of N channels (C = 1). The label of a window is the
/// label of its final row.
SampleSet load_csv(const std::string& path, const CsvSchema& schema);

// ---------------------------------------------------------------------------
// Canonical container "MTSD":
//   magic | u32 version (1) | u32 S | u32 N | u32 T | u32 C | u8 task |
//   S x (f64 window[N*T*C], f64 label), little-endian.

inline constexpr std::uint32_t kDatasetVersion = 1;
inline constexpr std::size_t kDatasetHeaderBytes = 25;

std::vector<std::uint8_t> encode_dataset(const SampleSet& set);
SampleSet decode_dataset(std::span<const std::uint8_t> bytes);
void save_dataset(const std::string& path, const SampleSet& set);
SampleSet load_dataset(const std::string& path);

/// Group ids live in an optional JSON sidecar "<path>.groups.json" so the
/// canonical container stays exactly as specified.
std::string groups_sidecar_path(const std::string& dataset_path);
void save_groups(const std::string& dataset_path, const SampleSet& set);
/// Loads the sidecar into `set.groups` if it exists; returns whether it did.
bool load_groups(const std::string& dataset_path, SampleSet& set);

// ---------------------------------------------------------------------------
// Splitting

struct Split {
  SampleSet train;
  SampleSet valid;
  SampleSet test;
};

/// Seeded three-way split. Whole groups are assigned to one partition when
/// the set carries group ids; otherwise individual samples are split.
/// Partition sizes are round(frac * units) for train and valid, the
/// remainder for test. Throws ConfigError on an empty partition.
Split split(const SampleSet& set, double train_frac, double valid_frac, std::uint64_t seed);

/// Two-way variant used when an official test set exists.
std::pair<SampleSet, SampleSet> carve_validation(const SampleSet& set, double valid_frac,
                                                 std::uint64_t seed);

/// Synthetic regression set: standard normal windows with
/// label = sum_{n,t} w_n x[n,t] / sqrt(N*T) for fixed per-sensor weights w_n
/// drawn from the same seed.
SampleSet synthetic_linear_set(std::size_t count, std::size_t sensors, std::size_t length,
                               std::uint64_t seed);

}  // namespace hsmgnn::data

#pragma once

#include <cstdint>
#include <string>
#include <string_view>
#include <vector>

#include "hsmgnn/data.hpp"
#include "hsmgnn/model.hpp"
#include "hsmgnn/training.hpp"

namespace hsmgnn {

/// Everything a run needs besides the data itself. Input geometry and task in
/// `model` are filled from the data at run time (training::fit_to_data).
struct RunConfig {
  ModelConfig model;
  training::TrainConfig train;
  std::size_t window_length = 30;  // C-MAPSS window T; CSV rows per window (0: per group)
  double rul_cap = 125.0;
  std::string label_column = "label";
  std::string group_column;
  std::string data;       // dataset path, recorded for provenance
  std::string test_data;  // optional held-out dataset path
};

/// Flat key names accepted in config files and as --<key> flags ('_' and '-'
/// are interchangeable on the command line).
const std::vector<std::string>& run_config_keys();

/// Defaults, with the seed taken from HSMGNN_SEED when it is set.
RunConfig default_run_config();

/// Applies a JSON object; unknown keys and ill-typed values throw ConfigError.
void apply_json(RunConfig& cfg, std::string_view json_text);
/// Applies one key from its command-line text.
void apply_override(RunConfig& cfg, std::string_view key, std::string_view text);

/// Reads a config file; missing file -> IoError, bad content -> ConfigError.
void apply_file(RunConfig& cfg, const std::string& path);

/// Every key with its resolved value.
std::string to_json(const RunConfig& cfg);

data::CmapssOptions cmapss_options(const RunConfig& cfg);
data::CsvSchema csv_schema(const RunConfig& cfg);

}  // namespace hsmgnn

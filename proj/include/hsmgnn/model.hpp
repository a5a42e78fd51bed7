#pragma once

#include <cstddef>
#include <cstdint>
#include <string>
#include <string_view>
#include <vector>

#include "hsmgnn/adb.hpp"
#include "hsmgnn/fusion.hpp"
#include "hsmgnn/parameters.hpp"
#include "hsmgnn/scs.hpp"

namespace hsmgnn {

/// Ablation variants of the full model.
enum class Variant {
  kComplete,
  kNoScs,   // SPD branch replaced by Euclidean per-block graphs
  kNoAdb,   // A^s = A^{s,o}; no memory bank parameters
  kNoFgcn,  // SPD branch only; Euclidean path removed
};

std::string_view variant_name(Variant v);
Variant parse_variant(std::string_view name);

struct ModelConfig {
  // Input geometry; sensors are the raw channel count before C-folding.
  std::size_t num_sensors = 0;
  std::size_t series_length = 30;
  std::size_t channels = 1;

  scs::ScsConfig scs;
  std::size_t memory_dim = 32;  // M_q
  std::size_t ndv_hidden = 16;  // M_d
  fusion::FusionConfig fusion;
  Variant variant = Variant::kComplete;

  std::size_t graph_nodes() const { return num_sensors * channels; }
  void validate() const;
};

/// Returns `base` adjusted for an ablation variant.
ModelConfig ablate(Variant variant, ModelConfig base);

/// Intermediate values of one forward pass, for inspection and tests.
struct ForwardTrace {
  Tensor features;                         // P, [BxNxW_pxD]
  std::vector<Tensor> spd_blocks;          // U_d, [BxNxNxM]
  std::vector<adb::AdjacencyMatrix> spd_adjacency;
  std::vector<Tensor> alpha;               // [BxN], complete / no-fgcn only
  Tensor spd_branch;                       // U^s_c, [BxDxNxF_s] (undefined if absent)
  Tensor euclid_branch;                    // U^e_c, [BxKxNxF_e] (undefined if absent)
  Tensor output;                           // [Bxoutput_width]
};

class HsmgnnModel {
 public:
  /// Builds and initializes all parameters (uniform +-1/sqrt(fan_in)).
  HsmgnnModel(ModelConfig config, std::uint64_t seed);

  const ModelConfig& config() const { return config_; }
  ParameterSet& parameters() { return params_; }
  const ParameterSet& parameters() const { return params_; }

  /// batch [BxNxTxC] -> [Bxoutput_width].
  Tensor forward(const Tensor& batch) const;
  ForwardTrace trace(const Tensor& batch) const;

  scs::TemporalCnnWeights cnn_weights() const;
  adb::DistanceBank distance_bank() const;  // requires has_distance_bank()
  bool has_distance_bank() const;

 private:
  ModelConfig config_;
  ParameterSet params_;
};

}  // namespace hsmgnn

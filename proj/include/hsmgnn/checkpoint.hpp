#pragma once

#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "hsmgnn/parameters.hpp"

// "HSMG" container, little-endian:
//   magic "HSMG" | u32 version (1) | u32 tensor count
//   per tensor: u16 name length | UTF-8 name | u8 rank | u64 dims[rank] |
//               f64 data[prod(dims)]

namespace hsmgnn {

inline constexpr std::uint32_t kCheckpointVersion = 1;

std::vector<std::uint8_t> encode_checkpoint(const std::vector<NamedTensor>& tensors);
std::vector<NamedTensor> decode_checkpoint(std::span<const std::uint8_t> bytes);

void save_checkpoint(const std::string& path, const ParameterSet& params);
std::vector<NamedTensor> load_checkpoint(const std::string& path);

/// Copies checkpoint values into `params`; names and shapes must match
/// exactly (ConfigError otherwise).
void restore_parameters(ParameterSet& params, const std::vector<NamedTensor>& tensors);

}  // namespace hsmgnn

#pragma once

#include <cstdint>
#include <string>
#include <string_view>

namespace hsmgnn {

enum class Task : std::uint8_t { kRegression = 0, kClassification = 1 };

std::string_view task_name(Task task);
/// Parses "regression" / "classification"; throws ConfigError otherwise.
Task parse_task(std::string_view name);

}  // namespace hsmgnn

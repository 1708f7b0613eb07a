#pragma once

// Layer-sharing schedules: which weight-owning block runs at each logical
// depth of the forward pass.

#include <cstddef>
#include <string>
#include <string_view>
#include <vector>

#include "mllm/errors.hpp"

namespace mllm {

enum class SharingStrategy { None, ImmediateBlockwise, RepeatAllOver, Reverse };

inline std::string_view to_string(SharingStrategy s) {
  switch (s) {
    case SharingStrategy::None: return "none";
    case SharingStrategy::ImmediateBlockwise: return "immediate";
    case SharingStrategy::RepeatAllOver: return "repeat_all_over";
    case SharingStrategy::Reverse: return "reverse";
  }
  return "none";
}

inline SharingStrategy parse_sharing(std::string_view name) {
  if (name == "none") return SharingStrategy::None;
  if (name == "immediate") return SharingStrategy::ImmediateBlockwise;
  if (name == "repeat_all_over") return SharingStrategy::RepeatAllOver;
  if (name == "reverse") return SharingStrategy::Reverse;
  throw ConfigError("unknown sharing strategy '" + std::string(name) +
                    "' (expected none | immediate | repeat_all_over | reverse)");
}

// Physical block index for every executed layer. Length is n_layers * repeat_factor.
inline std::vector<std::size_t> execution_schedule(SharingStrategy strategy, std::size_t n_layers,
                                                   std::size_t repeat_factor) {
  if (n_layers == 0) throw ConfigError("n_layers must be >= 1");
  if (repeat_factor == 0) throw ConfigError("repeat_factor must be >= 1");
  if (strategy == SharingStrategy::None && repeat_factor != 1) {
    throw ConfigError("repeat_factor must be 1 when sharing is none");
  }
  if (strategy == SharingStrategy::Reverse && repeat_factor != 2) {
    throw ConfigError("reverse sharing supports repeat_factor 2 only, got " + std::to_string(repeat_factor));
  }

  std::vector<std::size_t> schedule;
  schedule.reserve(n_layers * repeat_factor);
  switch (strategy) {
    case SharingStrategy::None:
      for (std::size_t i = 0; i < n_layers; ++i) schedule.push_back(i);
      break;
    case SharingStrategy::ImmediateBlockwise:
      for (std::size_t i = 0; i < n_layers; ++i)
        for (std::size_t r = 0; r < repeat_factor; ++r) schedule.push_back(i);
      break;
    case SharingStrategy::RepeatAllOver:
      for (std::size_t r = 0; r < repeat_factor; ++r)
        for (std::size_t i = 0; i < n_layers; ++i) schedule.push_back(i);
      break;
    case SharingStrategy::Reverse:
      for (std::size_t i = 0; i < n_layers; ++i) schedule.push_back(i);
      for (std::size_t i = n_layers; i-- > 0;) schedule.push_back(i);
      break;
  }
  return schedule;
}

}  // namespace mllm

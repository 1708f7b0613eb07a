#pragma once

#include <stdexcept>
#include <string>

namespace mllm {

// Shape disagreement between operands.
struct DimensionError : std::invalid_argument {
  using std::invalid_argument::invalid_argument;
};

// Token id, target or axis outside its valid range.
struct IndexError : std::out_of_range {
  using std::out_of_range::out_of_range;
};

// Sequence longer than a context window or cache capacity.
struct LengthError : std::length_error {
  using std::length_error::length_error;
};

// Invalid ModelConfig or unsupported option combination.
struct ConfigError : std::invalid_argument {
  using std::invalid_argument::invalid_argument;
};

// Non-finite or otherwise unusable numeric input.
struct ValueError : std::domain_error {
  using std::domain_error::domain_error;
};

// Malformed file contents (checkpoints, token streams, config files).
struct FormatError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

}  // namespace mllm

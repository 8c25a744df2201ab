#pragma once

#include <cstddef>
#include <stdexcept>
#include <string>

namespace fsmb {

// Error taxonomy shared across the library. The CLI maps these onto exit
// codes: ConfigError -> 2, data errors -> 3, numeric errors -> 4.

struct ConfigError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

struct DimensionError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

struct DomainError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

struct IndexError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

struct ContractError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

struct SamplingError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

// Malformed on-disk data; carries the byte offset where parsing stopped.
struct FormatError : std::runtime_error {
  std::size_t offset;
  FormatError(const std::string& msg, std::size_t byte_offset)
      : std::runtime_error(msg + " (at byte " + std::to_string(byte_offset) + ")"),
        offset(byte_offset) {}
};

}  // namespace fsmb

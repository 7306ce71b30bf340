#pragma once

#include <stdexcept>
#include <string>

namespace lifenet {

/// Tensor or board shapes that do not line up.
struct InvalidShape : std::invalid_argument {
  using std::invalid_argument::invalid_argument;
};

struct InvalidArgument : std::invalid_argument {
  using std::invalid_argument::invalid_argument;
};

/// Operation requested in the wrong order (e.g. gradients before backward).
struct StateError : std::logic_error {
  using std::logic_error::logic_error;
};

/// Malformed checkpoint, board, or config text. The message names the field.
struct ParseError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

struct VersionError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

/// Semantically invalid experiment configuration.
struct ConfigError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

}  // namespace lifenet

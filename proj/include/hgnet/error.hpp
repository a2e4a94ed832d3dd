#pragma once

#include <stdexcept>
#include <string>

namespace hgnet {

/// Bad arguments or malformed structures handed to the library by a caller.
struct InputError : std::invalid_argument {
  explicit InputError(const std::string& msg) : std::invalid_argument(msg) {}
};

/// API misuse that is a programming error rather than bad data, e.g. calling
/// backward on a non-scalar or stepping the optimizer without gradients.
struct UsageError : std::logic_error {
  explicit UsageError(const std::string& msg) : std::logic_error(msg) {}
};

/// A generator could not satisfy its target (rejection cap hit, region too
/// small, split quota impossible).
struct GenerationError : std::runtime_error {
  explicit GenerationError(const std::string& msg) : std::runtime_error(msg) {}
};

/// Malformed external files (edge lists, CSV, JSONL, checkpoints).
struct IngestError : std::runtime_error {
  explicit IngestError(const std::string& msg) : std::runtime_error(msg) {}
};

/// Training diverged (non-finite loss).
struct TrainingError : std::runtime_error {
  explicit TrainingError(const std::string& msg) : std::runtime_error(msg) {}
};

}

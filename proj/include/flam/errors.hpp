#pragma once

#include <stdexcept>
#include <string>

namespace flam {

/// Malformed structure: mismatched dimensions, invalid tables, bad topology.
struct StructuralError : std::runtime_error {
  explicit StructuralError(const std::string& msg) : std::runtime_error(msg) {}
};

/// Well-formed structure carrying unusable values (NaN, out-of-range).
struct InputError : std::runtime_error {
  explicit InputError(const std::string& msg) : std::runtime_error(msg) {}
};

/// API misuse: a precondition the caller controls was violated.
struct ContractError : std::logic_error {
  explicit ContractError(const std::string& msg) : std::logic_error(msg) {}
};

/// Fault raised while training; the trainer logs these and continues or
/// aborts depending on the stage.
struct TrainingFault : std::runtime_error {
  explicit TrainingFault(const std::string& msg) : std::runtime_error(msg) {}
};

/// A persisted artifact (checkpoint, config echo) failed an integrity check.
struct IntegrityError : std::runtime_error {
  explicit IntegrityError(const std::string& msg) : std::runtime_error(msg) {}
};

}  // namespace flam

#pragma once

/**
 * Error taxonomy shared by every treeflow module.
 *
 * Categories:
 * - ConfigError:  invalid configuration values or argument domains (bad dims,
 *                 bad schedule, non-positive scales, unknown keys).
 * - ShapeError:   dimension mismatches between runtime values.
 * - NumericError: NaN/Inf encountered in a computation; message names the op.
 * - IoError:      file read/write/parse failures.
 *
 * The CLI maps categories to stable exit codes via exit_code_for().
 */

#include <exception>
#include <stdexcept>
#include <string>

namespace treeflow {

struct Error : std::runtime_error {
  explicit Error(const std::string& msg) : std::runtime_error(msg) {}
};

struct ConfigError : Error {
  explicit ConfigError(const std::string& msg) : Error(msg) {}
};

struct ShapeError : Error {
  explicit ShapeError(const std::string& msg) : Error(msg) {}
};

struct NumericError : Error {
  explicit NumericError(const std::string& msg) : Error(msg) {}
};

struct IoError : Error {
  explicit IoError(const std::string& msg) : Error(msg) {}
};

// Exit-code contract: 0 success, 2 config, 3 shape, 4 numeric, 5 io, 1 other.
inline int exit_code_for(const std::exception& e) {
  if (dynamic_cast<const ConfigError*>(&e)) return 2;
  if (dynamic_cast<const ShapeError*>(&e)) return 3;
  if (dynamic_cast<const NumericError*>(&e)) return 4;
  if (dynamic_cast<const IoError*>(&e)) return 5;
  return 1;
}

// Short category tag for CLI error lines ("error [config]: ...").
inline const char* category_for(const std::exception& e) {
  if (dynamic_cast<const ConfigError*>(&e)) return "config";
  if (dynamic_cast<const ShapeError*>(&e)) return "shape";
  if (dynamic_cast<const NumericError*>(&e)) return "numeric";
  if (dynamic_cast<const IoError*>(&e)) return "io";
  return "error";
}

}  // namespace treeflow

#pragma once

#include <stdexcept>
#include <string>

namespace casr {

/// Raised when a caller violates an operation's preconditions (bad shapes,
/// out-of-range parameters, inconsistent inputs). Maps to CLI exit code 1.
class ContractError : public std::invalid_argument {
 public:
  explicit ContractError(const std::string& what) : std::invalid_argument(what) {}
};

/// Raised on unreadable/unwritable files or malformed payloads. Maps to CLI
/// exit code 2.
class IoError : public std::runtime_error {
 public:
  explicit IoError(const std::string& what) : std::runtime_error(what) {}
};

inline void require(bool cond, const std::string& what) {
  if (!cond) throw ContractError(what);
}

}  // namespace casr

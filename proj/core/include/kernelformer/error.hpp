#pragma once

#include <stdexcept>
#include <string>

namespace kf {

// Base for all library errors; what() names the violated constraint.
struct Error : std::runtime_error {
  explicit Error(const std::string& msg) : std::runtime_error(msg) {}
};

// Input outside the mathematical domain (off-manifold point, bad range).
struct DomainError : Error {
  explicit DomainError(const std::string& msg) : Error(msg) {}
};

// Malformed parameters or configuration.
struct ParamError : Error {
  explicit ParamError(const std::string& msg) : Error(msg) {}
};

}  // namespace kf

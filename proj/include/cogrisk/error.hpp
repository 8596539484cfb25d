#pragma once

#include <stdexcept>
#include <string>

namespace cogrisk {

// Bad input: malformed files, out-of-range parameters, non-finite state.
class ValidationError : public std::invalid_argument {
 public:
  explicit ValidationError(const std::string& what) : std::invalid_argument(what) {}
};

// API misuse, e.g. stepping an environment whose episode already ended.
class ContractError : public std::logic_error {
 public:
  explicit ContractError(const std::string& what) : std::logic_error(what) {}
};

}  // namespace cogrisk

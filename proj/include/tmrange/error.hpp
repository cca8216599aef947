#pragma once

#include <stdexcept>
#include <string>

namespace tmrange {

/// Raised for every contract violation in the library (bad parameters,
/// mismatched streams, unsupported identifiers).
class Error : public std::runtime_error {
 public:
  explicit Error(const std::string& what) : std::runtime_error(what) {}
};

}  // namespace tmrange

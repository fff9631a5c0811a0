#pragma once

#include <stdexcept>
#include <string>

namespace tracekit {

// Every recoverable failure in the library surfaces as this type; the
// message is the user-facing diagnostic.
class Error : public std::runtime_error {
 public:
  explicit Error(const std::string& what) : std::runtime_error(what) {}
};

}  // namespace tracekit

#pragma once

#include <stdexcept>

namespace expprod {

/// A requested size exceeds a configured cap (truncation order, state count).
class ResourceError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

}  // namespace expprod

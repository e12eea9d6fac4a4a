#pragma once

#include <stdexcept>
#include <string>

namespace intendd {

/// Raised for malformed or inconsistent input data (files, ids, labels).
class DataError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

}  // namespace intendd

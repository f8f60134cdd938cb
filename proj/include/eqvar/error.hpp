#pragma once

#include <stdexcept>
#include <string>

namespace eqvar {

enum class ErrorKind {
  InvalidInput,
  Parse,
  DegenerateCovariance,
  CollinearData,
  InsufficientSample,
  IncompleteTable,
  IncompatibleScore,
  ResourceCap,
  Internal,
};

class Error : public std::runtime_error {
 public:
  Error(ErrorKind kind, const std::string& what)
      : std::runtime_error(what), kind_(kind) {}

  ErrorKind kind() const noexcept { return kind_; }

 private:
  ErrorKind kind_;
};

// CLI exit-code contract: 2 input, 3 numeric/degeneracy, 4 resource cap.
inline int exit_code(ErrorKind kind) {
  switch (kind) {
    case ErrorKind::InvalidInput:
    case ErrorKind::Parse:
    case ErrorKind::IncompleteTable:
    case ErrorKind::IncompatibleScore:
      return 2;
    case ErrorKind::DegenerateCovariance:
    case ErrorKind::CollinearData:
    case ErrorKind::InsufficientSample:
    case ErrorKind::Internal:
      return 3;
    case ErrorKind::ResourceCap:
      return 4;
  }
  return 1;
}

}  // namespace eqvar

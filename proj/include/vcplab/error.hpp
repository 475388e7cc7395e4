#ifndef VCPLAB_ERROR_HPP
#define VCPLAB_ERROR_HPP

#include <stdexcept>
#include <string>

namespace vcplab {

/// Argument outside the mathematical domain of an operation.
struct DomainError : std::domain_error {
  using std::domain_error::domain_error;
};

/// An iterative scheme failed to reach its tolerance within the cap.
struct ConvergenceError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

/// Shell with inner radius >= outer radius where a nonempty shell is required.
struct DegenerateShellError : std::invalid_argument {
  using std::invalid_argument::invalid_argument;
};

/// Malformed or inconsistent experiment configuration.
struct ConfigError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

/// Unreadable, malformed, or contract-violating input data.
struct DataError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

/// Training or estimation produced non-finite values.
struct DivergenceError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

/// Filesystem failure, reported with path context.
struct IoError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

}  // namespace vcplab

#endif

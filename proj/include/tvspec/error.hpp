#ifndef TVSPEC_ERROR_HPP
#define TVSPEC_ERROR_HPP

#include <stdexcept>
#include <string>

namespace tvspec {

// Error taxonomy. The CLI maps these onto exit codes (config 2, data 3,
// numerical 4); everything else in the library throws one of them.

class InvalidArgument : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

// A value that should have been impossible given the preconditions:
// non-finite coefficients, non-positive psi, singular AR polynomial, ...
class InvalidState : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

class InvalidPartition : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

class ConfigError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

class DataError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

}  // namespace tvspec

#endif  // TVSPEC_ERROR_HPP

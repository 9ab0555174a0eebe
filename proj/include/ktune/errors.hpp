#ifndef KTUNE_ERRORS_HPP
#define KTUNE_ERRORS_HPP

#include <stdexcept>

namespace ktune {

/// Malformed input file, schema violation, or inconsistent parameter.
class ConfigError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// A measurement backend could not be reached or broke its protocol.
class BackendError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Every valid configuration of the space has already been measured.
/// Signalled distinctly so the tuner can stop early instead of spinning.
class SpaceExhaustedError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

}  // namespace ktune

#endif  // KTUNE_ERRORS_HPP

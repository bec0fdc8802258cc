#pragma once

#include <stdexcept>
#include <string>

namespace hazardstream {

/// Invalid configuration: bad kernel/bandwidth parameters, inconsistent lattice, etc.
class config_error : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

/// A record or a data file does not match what the mechanism requires.
class data_error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Corrupted, truncated or incompatible snapshot bytes.
class snapshot_error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

}  // namespace hazardstream

#pragma once

#include <stdexcept>

namespace randinf {

// Bad shapes, out-of-range parameters, malformed data. CLI exit code 2.
class InvalidInput : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

// Numerically or combinatorially infeasible requests: singular matrices,
// supports too large to enumerate, exhausted rejection samplers. CLI exit code 3.
class Infeasible : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

}  // namespace randinf

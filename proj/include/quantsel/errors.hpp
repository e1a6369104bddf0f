#ifndef QUANTSEL_ERRORS_HPP
#define QUANTSEL_ERRORS_HPP

#include <stdexcept>

namespace quantsel {

// Bad inputs: missing files, malformed tables, out-of-range parameters.
struct InputError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

// Numerical failure: rank-deficient solves, divergent chains, zero anchors.
struct NumericalError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

}  // namespace quantsel

#endif  // QUANTSEL_ERRORS_HPP

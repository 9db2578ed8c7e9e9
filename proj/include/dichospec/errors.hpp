#pragma once

#include <stdexcept>
#include <string>

namespace dichospec {

// Bad inputs caught at setup time: malformed files, out-of-range options,
// contract violations in user-supplied callables. CLI exit code 2.
struct ConfigError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

// A numeric procedure that cannot continue: singular coefficient where an
// inverse is required, unbounded fit, data poisoned by missing backward
// extensions. CLI exit code 3.
struct NumericError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

}  // namespace dichospec

#pragma once

#include <stdexcept>
#include <string>

namespace superstat {

/// Malformed or insufficient input. The CLI maps this to exit code 2.
class InputError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

/// A numerical procedure failed (singular system, overflow, divergence).
/// The CLI maps this to exit code 3.
class NumericalError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

}  // namespace superstat

#pragma once

#include <stdexcept>
#include <string>

namespace ekdaa {

// Shape contract violations (mismatched map sizes, bad kernel dims, ...).
struct DimensionError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

// NaN/Inf detected in a value that must stay finite.
struct NumericError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

// Malformed on-disk data (IDX magic, checkpoint header, config keys, ...).
struct FormatError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

// A credit rule asked to do something it does not support
// (e.g. backprop through a signum network).
struct UnsupportedRuleError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

}  // namespace ekdaa

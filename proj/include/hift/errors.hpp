#pragma once

#include <stdexcept>
#include <string>

namespace hift {

// Shape/rank mismatches between tensors.
class ShapeError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

// Violated API preconditions (non-scalar loss, out-of-frame box, ...).
class ContractError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

// Bad or unknown configuration keys/values.
class ConfigError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

// NaN/Inf escapes or failed numerical checks.
class NumericError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

// Sample produced no usable labels; the training loop skips it.
class DegenerateLabelError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

} // namespace hift

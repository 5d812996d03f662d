#pragma once

#include <stdexcept>
#include <string>

namespace meeqa {

// Malformed input data: unreadable files, bad ids, invalid annotations.
// CLI maps this to exit code 2.
struct DataError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

// Invalid configuration or flag combination. CLI exit code 2.
struct ConfigError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

// Non-finite values during training or inference. CLI exit code 3.
struct NumericError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

} // namespace meeqa

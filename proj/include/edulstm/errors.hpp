#pragma once

#include <stdexcept>
#include <string>

namespace edulstm {

// Dimension mismatch between operands; the message names both shapes.
struct ShapeError : std::invalid_argument {
    explicit ShapeError(const std::string& what) : std::invalid_argument(what) {}
};

// Invalid configuration: bad ranges, missing keys, inconsistent settings.
struct ConfigError : std::invalid_argument {
    explicit ConfigError(const std::string& what) : std::invalid_argument(what) {}
};

// Malformed or unreadable input data; carries file/line context where known.
struct DataError : std::runtime_error {
    explicit DataError(const std::string& what) : std::runtime_error(what) {}
};

// Training aborted (non-finite loss, method failure inside a fold).
struct TrainError : std::runtime_error {
    explicit TrainError(const std::string& what) : std::runtime_error(what) {}
};

}  // namespace edulstm

#pragma once

#include <stdexcept>
#include <string>

namespace gestura {

// Error taxonomy shared by every module. The CLI maps these onto exit codes.

struct ShapeError : std::invalid_argument {
    using std::invalid_argument::invalid_argument;
};

struct ParameterError : std::invalid_argument {
    using std::invalid_argument::invalid_argument;
};

struct ValidationError : std::invalid_argument {
    using std::invalid_argument::invalid_argument;
};

struct StateError : std::logic_error {
    using std::logic_error::logic_error;
};

struct ConfigError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

struct IoError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

struct NumericError : std::runtime_error {
    NumericError(const std::string& what, int round = -1)
        : std::runtime_error(what), round_index(round) {}
    int round_index;
};

}  // namespace gestura

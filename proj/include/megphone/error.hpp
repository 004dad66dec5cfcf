#pragma once

#include <stdexcept>
#include <string>

namespace megphone {

// Invalid parameters or configuration. The CLI maps this to exit code 2.
class ConfigError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

// Malformed, inconsistent or insufficient input data. Exit code 3.
class DataError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

// Numerical failure such as solver non-convergence or a singular system. Exit code 4.
class NumericError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

void warn(const std::string& message);

}  // namespace megphone

#pragma once

#include <stdexcept>
#include <string>

namespace kwk {

// Bad user input: configs, parameter ranges, mismatched shapes. CLI exit code 1.
class validation_error : public std::runtime_error {
public:
    explicit validation_error(const std::string& msg) : std::runtime_error(msg) {}
};

// A numerical procedure failed to meet its tolerance (eigensolve residual,
// CG stagnation, fixed-point divergence). CLI exit code 2.
class numerical_error : public std::runtime_error {
public:
    explicit numerical_error(const std::string& msg) : std::runtime_error(msg) {}
};

}  // namespace kwk

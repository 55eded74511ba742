#pragma once

#include <stdexcept>
#include <string>

namespace salign {

// Bad input data: malformed files, domain violations, dimension mismatches.
class DataError : public std::runtime_error {
public:
    explicit DataError(const std::string& msg) : std::runtime_error(msg) {}
};

// Bugs and broken internal invariants.
class InternalError : public std::runtime_error {
public:
    explicit InternalError(const std::string& msg) : std::runtime_error(msg) {}
};

}  // namespace salign

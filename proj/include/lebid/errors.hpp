#pragma once

#include <stdexcept>
#include <string>

namespace lebid {

// Input or dataset violates a documented invariant. CLI exit code 1.
class ValidationError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

// Factorization failure, unreachable band, non-monotone EM trace. CLI exit code 2.
class NumericError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

class IoError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

}  // namespace lebid

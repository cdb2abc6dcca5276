#pragma once

#include <stdexcept>
#include <string>

namespace ggps {

// Raised when a factorization or iterative solve cannot reach the requested
// quality (non-positive pivot, residual stall). Distinct from
// std::invalid_argument so callers can map the two onto different exit codes.
class NumericalError : public std::runtime_error {
public:
    explicit NumericalError(const std::string& msg) : std::runtime_error(msg) {}
};

} // namespace ggps

#pragma once

#include <stdexcept>
#include <string>

namespace cubicspin {

// Bad arguments: wrong dimension, out-of-range parameters, parity mismatch.
class ValidationError : public std::invalid_argument {
public:
    explicit ValidationError(const std::string& what) : std::invalid_argument(what) {}
};

// The numerics failed: integrator did not converge, state left the PSD cone, ...
class NumericError : public std::runtime_error {
public:
    explicit NumericError(const std::string& what) : std::runtime_error(what) {}
};

inline void require(bool ok, const std::string& what)
{
    if (!ok) throw ValidationError(what);
}

} // namespace cubicspin

#pragma once

#include <stdexcept>
#include <string>

namespace dqlab {

/// Rejected input: bad parameters, malformed scenarios, contract violations
/// detectable before any computation runs.
class validation_error : public std::runtime_error {
public:
    explicit validation_error(const std::string& what) : std::runtime_error(what) {}
};

/// Computation failed: ill-conditioned inversion, PSD violation where success
/// was required, internal cross-check mismatch.
class numeric_error : public std::runtime_error {
public:
    explicit numeric_error(const std::string& what) : std::runtime_error(what) {}
};

/// File system / serialization failure.
class io_error : public std::runtime_error {
public:
    explicit io_error(const std::string& what) : std::runtime_error(what) {}
};

/// Planck constant used throughout; every bound scales with powers of it.
/// Operations take it as a defaulted argument so the library stays pure.
inline constexpr double default_hbar = 1.0;

} // namespace dqlab

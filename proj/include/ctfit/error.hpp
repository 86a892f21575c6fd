#pragma once

#include <stdexcept>
#include <string>

namespace ctfit {

/// Base for every error raised by the library. The CLI maps the derived
/// kinds onto exit codes (validation -> 3, numeric -> 4).
class error : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

/// Malformed input text (CSV / JSON).
class parse_error : public error {
public:
    using error::error;
};

/// Input that parses but violates a domain invariant.
class validation_error : public error {
public:
    using error::error;
};

/// Parameters outside a distribution's or function's domain.
class domain_error : public validation_error {
public:
    using validation_error::validation_error;
};

/// An iterative method failed to converge or a quadrature missed tolerance.
class numeric_error : public error {
public:
    using error::error;
};

} // namespace ctfit

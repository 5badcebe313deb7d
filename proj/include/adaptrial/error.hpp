#pragma once

#include <stdexcept>
#include <string>

namespace adaptrial {

/*
 * Exception hierarchy. Everything thrown by the library derives from Error so
 * callers (the CLI in particular) can map failures onto exit codes.
 */
struct Error : std::runtime_error {
    using std::runtime_error::runtime_error;
};

// Malformed or missing input (empty samples, unknown names, bad CSV).
struct InputError : Error {
    using Error::Error;
};

// Argument outside the mathematical domain of a function.
struct DomainError : Error {
    using Error::Error;
};

// Linear algebra failure: rank deficiency, zero residual variance.
struct NumericalError : Error {
    using Error::Error;
};

// A configuration object breaks one of its invariants.
struct ValidationError : Error {
    ValidationError(std::string field, const std::string& what)
        : Error(field + ": " + what), field_(std::move(field)) {}
    const std::string& field() const noexcept { return field_; }

   private:
    std::string field_;
};

// Caller broke an API precondition that is not user input.
struct ContractViolation : Error {
    using Error::Error;
};

// Root finding for an estimator failed to bracket.
struct EstimationError : Error {
    using Error::Error;
};

}  // namespace adaptrial

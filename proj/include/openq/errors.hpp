#pragma once
// Exception types shared by every module.

#include <stdexcept>
#include <string>

namespace openq {

struct error : std::runtime_error {
    using std::runtime_error::runtime_error;
};

// Wrong matrix/vector sizes.
struct shape_error : error {
    using error::error;
};
// Argument outside the mathematical domain (negative time, |v| > 1, ...).
struct domain_error : error {
    using error::error;
};
// Object fails a structural invariant (not a state, not a POVM, bad basis).
struct validation_error : error {
    using error::error;
};
// A numerical procedure did not converge or produced non-finite values.
struct numerical_error : error {
    using error::error;
};
// Request outside what an algorithm supports (defective superoperator, non-Hermitian noise, ...).
struct unsupported_error : error {
    using error::error;
};
// Bath rate matrix that is not positive semidefinite.
struct spectrum_error : validation_error {
    using validation_error::validation_error;
};
// Time-local rate is singular because the amplitude it divides by vanished.
struct rate_divergence_error : numerical_error {
    double time;
    rate_divergence_error(const std::string& what, double t) : numerical_error(what), time(t) {}
};

}  // namespace openq

#ifndef HJCON_ERRORS_HPP
#define HJCON_ERRORS_HPP

#include <stdexcept>
#include <string>

namespace hjcon {

// Thrown when R(x, 0) <= 0: the constraint R(x, I) = 0 has no root I > 0,
// i.e. the trait has left the viable region.
struct no_positive_root_error : std::runtime_error {
    using std::runtime_error::runtime_error;
};

// Grid maximum attained on the boundary; the computational box is too small.
struct peak_escaped_error : std::runtime_error {
    using std::runtime_error::runtime_error;
};

// Explicit step violates the CFL-type bound. Carries a usable step size.
struct step_rejected_error : std::runtime_error {
    double suggested_dt;
    step_rejected_error(const std::string& msg, double dt_ok)
        : std::runtime_error(msg), suggested_dt(dt_ok) {}
};

// Picard iterate left the configured ball around the anchor point.
struct ball_escape_error : std::runtime_error {
    using std::runtime_error::runtime_error;
};

// The quadratic-ansatz reduction was requested for data it does not cover.
struct oracle_inapplicable_error : std::runtime_error {
    using std::runtime_error::runtime_error;
};

// Internal numerical invariant broke (lost positive definiteness, negative
// density, ...). Firing is a bug signal, not an expected user error.
struct numerical_error : std::runtime_error {
    using std::runtime_error::runtime_error;
};

} // namespace hjcon

#endif // HJCON_ERRORS_HPP

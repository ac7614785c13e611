#pragma once

#include <stdexcept>
#include <string>

namespace anosov {

// Base class for all errors raised by the library.  Subclasses express the
// failure category; CLI maps invalid_input/config_error to exit code 2 and
// everything else to exit code 3.
struct error : std::runtime_error {
    using std::runtime_error::runtime_error;
};

// Bad arguments, unsupported dimension/signature, malformed config.
struct invalid_input : error {
    using error::error;
};

struct unsupported_dimension : invalid_input {
    using invalid_input::invalid_input;
};

// Operation requires a specific stable/unstable signature (e.g. 1-D stable).
struct unsupported_signature : invalid_input {
    using invalid_input::invalid_input;
};

struct config_error : invalid_input {
    using invalid_input::invalid_input;
};

// Path leg whose endpoints do not lie on a common leaf, or a path whose legs
// do not chain.
struct invalid_leg : invalid_input {
    using invalid_input::invalid_input;
};

// Iterative solver did not reach its tolerance.
struct no_convergence : error {
    using error::error;
};

struct splitting_not_resolved : no_convergence {
    using no_convergence::no_convergence;
};

struct shadowing_failed : no_convergence {
    using no_convergence::no_convergence;
};

struct chart_failed : no_convergence {
    using no_convergence::no_convergence;
};

// Newton continuation of a periodic seed diverged or escaped its basin.
struct continuation_failed : no_convergence {
    using no_convergence::no_convergence;
};

// Shadowing window hit its cap before the solution settled.
struct window_too_small : no_convergence {
    using no_convergence::no_convergence;
};

// Regression or estimate had no signal above the noise floor.
struct inconclusive : error {
    using error::error;
};

// Requested point lies outside the validity region of a leaf chart.
struct out_of_chart : error {
    using error::error;
};

struct decomposition_failed : error {
    using error::error;
};

struct pairing_incomplete : error {
    using error::error;
};

} // namespace anosov

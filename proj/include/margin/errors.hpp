#pragma once

#include <stdexcept>
#include <string>

namespace margin {

// Error hierarchy. Everything derives from std::runtime_error so callers that
// do not care about the distinction can catch a single type.

// Malformed arguments: dimension mismatches, out-of-range class indices,
// non-finite values, empty datasets.
struct InvalidInput : std::runtime_error {
    using std::runtime_error::runtime_error;
};

// Model cannot support the requested operation (e.g. fewer than two classes).
struct InvalidModel : std::runtime_error {
    using std::runtime_error::runtime_error;
};

// A gradient required for a move is exactly zero, so no descent direction
// exists at this point.
struct DegenerateGradient : std::runtime_error {
    using std::runtime_error::runtime_error;
};

// An input-dependent quantity is degenerate (e.g. the zero vector where a
// direction is required).
struct DegenerateInput : std::runtime_error {
    using std::runtime_error::runtime_error;
};

// A binary file does not match its declared layout.
struct FormatError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

// A configuration file or configuration struct is inconsistent.
struct ConfigError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

// The exhaustive 2-D oracle found no decision boundary within its search
// radius.
struct NoBoundaryFound : std::runtime_error {
    using std::runtime_error::runtime_error;
};

} // namespace margin

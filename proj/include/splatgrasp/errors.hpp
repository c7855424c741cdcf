#pragma once

#include <stdexcept>
#include <string>

namespace splatgrasp {

/// Malformed input file or document (PLY, JSON, PNG, raw payloads).
class ParseError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

/// Numerical or feasibility failure: degenerate geometry, non-finite values,
/// dimension mismatches discovered at compute time.
class NumericalError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

} // namespace splatgrasp

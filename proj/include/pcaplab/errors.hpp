#pragma once

#include <stdexcept>
#include <string>
#include <vector>

namespace pcaplab {

/// Input violates an operation's precondition.
class PreconditionError : public std::invalid_argument {
public:
    using std::invalid_argument::invalid_argument;
};

/// An iterative method hit its iteration cap before reaching tolerance.
class NonConvergence : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

/// Extracted or loaded mesh is not a closed oriented 2-manifold.
class MeshError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

/// Non-fatal conditions recorded alongside a result (precision loss, sparse bins, ...).
using Warnings = std::vector<std::string>;

}  // namespace pcaplab

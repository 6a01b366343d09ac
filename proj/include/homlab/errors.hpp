#pragma once

#include <stdexcept>
#include <string>

namespace homlab {

/// Raised when a solver declines to run because the requested discretization
/// cannot represent the expected solution (too-coarse grid, value cap hit).
/// The message states what to change.
struct SolverRefusal : std::runtime_error {
    explicit SolverRefusal(const std::string& what) : std::runtime_error(what) {}
};

}  // namespace homlab

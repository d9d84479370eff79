#pragma once

#include <cstdint>
#include <vector>

#include "graphmem/gradcheck.hpp"

namespace graphmem {

// Runs the finite-difference gradient suite: one line per differentiable op
// plus the end-to-end GMN and MemGNN losses (supervised, clustering and
// mixed paths) on tiny random instances. `inject_fault` adds a deliberately
// corrupted backward rule that must fail, as a negative control.
std::vector<GradCheckLine> run_gradcheck_suite(std::uint64_t seed, double tol = 1e-4,
                                               bool inject_fault = false);

}  // namespace graphmem

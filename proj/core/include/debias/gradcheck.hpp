#pragma once

#include <cstdint>
#include <string>
#include <vector>

namespace debias {

// One row of the finite-difference report.
struct GradCheckResult {
    std::string op;
    double max_rel_err = 0.0; // |analytic-fd| / max(|analytic|, |fd|, 0.01)
    double max_abs_err = 0.0;
    int64_t coords = 0;       // coordinates compared
    bool passed = false;      // max_rel_err < 1e-3
};

// Checks every differentiable op once: the tape's analytic gradients against
// central finite differences (step 1e-3) of an independent double-precision
// reference evaluation. The relative-error denominator is floored at 0.01,
// which makes the pass rule "relative error < 1e-3, or absolute error < 1e-5
// for near-zero gradients".
//
// corrupt_op, when nonempty, adds +0.05 to that op's analytic gradients
// before comparison — a negative control that must make the run fail.
std::vector<GradCheckResult> run_gradcheck(uint64_t seed, const std::string& corrupt_op = "");

bool gradcheck_passed(const std::vector<GradCheckResult>& results);

} // namespace debias

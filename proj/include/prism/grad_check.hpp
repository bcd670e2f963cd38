#pragma once

#include <functional>

#include "prism/tape.hpp"

namespace prism {

using LossBuilder = std::function<Val(Tape&, const ParameterStore&)>;

// Compares the tape's analytic gradients against central finite differences.
// Returns max over all parameter entries of
//   |analytic - central| / max(1, |central|).
// The forward builder must be deterministic; eps must lie in (0, 1e-3].
double grad_check(const LossBuilder& forward, ParameterStore& params, double eps);

}  // namespace prism

#pragma once

#include <string>
#include <string_view>
#include <vector>

#include "martinbench/extension.hpp"

namespace martinbench {

/// Bernoulli(1/4) full 4-shift over F2 with symbol i labelled by generator letter i.
ExtensionSystem srw_fixture();

/// Same labels with unequal step probabilities 0.4, 0.1, 0.3, 0.2.
ExtensionSystem asymmetric_fixture();

/// Full 4-shift over F2 with a depth-3 potential that damps immediate
/// backtracking and favours repeating the step before last, skewed per symbol.
ExtensionSystem memory_fixture();

/// Non-backtracking 4-shift over F2 with unequal depth-2 weights.
ExtensionSystem no_backtracking_fixture();

/// Every symbol labelled by the identity of F2.
ExtensionSystem trivial_fixture();

/// Fair +-1 walk on Z = F1.
ExtensionSystem z_fixture();

/// Walk on Z/2 * Z/3 with steps a, b, b^-1 of probability 1/2, 1/4, 1/4.
ExtensionSystem z2z3_fixture();

ExtensionSystem fixture_by_name(std::string_view name);
std::vector<std::string> fixture_names();

}  // namespace martinbench

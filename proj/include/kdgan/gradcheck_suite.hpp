// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cstdint>
#include <string>

#include "kdgan/numerics.hpp"

namespace kdgan {

/// Finite-difference checks of the analytic gradients.
///
/// module: "agkd", "cgkd", "adv", "models" (toy G/D parameters and the mock
/// teacher) or "all". Inputs are resampled until every L1 and hinge term is
/// at least 1e-3 away from its kink.
GradCheckReport run_gradcheck_suite(const std::string& module, std::uint64_t seed = 0);

}  // namespace kdgan

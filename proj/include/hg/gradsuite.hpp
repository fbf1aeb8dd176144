#pragma once

#include <string>
#include <vector>

#include "hg/gradcheck.hpp"

namespace hg {

struct GradSuiteEntry {
    std::string op;
    GradCheckReport report;
};

/// Finite-difference checks of every primitive plus a one-stack depth-2
/// miniature network, all in double precision on inputs drawn from [-1, 1].
std::vector<GradSuiteEntry> run_gradient_suite(std::uint64_t seed = 7, const GradCheckOptions& options = {});

}  // namespace hg

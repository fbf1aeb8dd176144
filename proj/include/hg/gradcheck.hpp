#pragma once

#include <cstdint>
#include <functional>
#include <string>
#include <vector>

#include "hg/graph.hpp"

namespace hg {

struct GradCheckOptions {
    double step = 1e-5;
    double tolerance = 1e-4;
    /// Denominator floor for the relative error, so gradients that are zero
    /// analytically compare by absolute error instead of blowing up.
    double abs_floor = 1e-6;
    /// Probe at most this many elements per input (0 = all), chosen by seed.
    std::size_t max_probes = 0;
    std::uint64_t seed = 17;
};

struct GradCheckInput {
    std::string name;
    TensorD tensor;  // perturbed in place, restored afterwards
};

struct InputCheckResult {
    std::string name;
    double max_rel_error = 0;
    std::size_t probed = 0;
    std::size_t failed = 0;
    std::size_t skipped_kinks = 0;
    std::size_t non_finite = 0;
    bool passed() const { return failed == 0 && non_finite == 0; }
};

struct GradCheckReport {
    std::vector<InputCheckResult> inputs;
    bool passed() const;
    double max_rel_error() const;
};

/// Builds the function under test inside the given graph and returns its output.
using CheckedFunction = std::function<TensorD(Graph<double>&)>;

/// Compares reverse-mode gradients against central differences
/// (f(x+h) - f(x-h)) / 2h of the scalar <r, f(x)>, where r is a fixed random
/// projection of the output. Probes whose two evaluations land on different
/// sides of a relu or max-pool kink are skipped and counted.
GradCheckReport finite_difference_check(const CheckedFunction& fn, std::vector<GradCheckInput> inputs,
                                        const GradCheckOptions& options = {});

}  // namespace hg

#pragma once

#include <string>
#include <vector>

#include "hg/tensor.hpp"

namespace hg {

struct RmsPropOptions {
    double learning_rate = 2.5e-4;
    double alpha = 0.99;
    double epsilon = 1e-8;
};

/// Per-parameter running average of squared gradients, aligned with the
/// parameter list passed to rmsprop_step.
template <typename T>
struct RmsPropState {
    std::vector<Tensor<T>> square_avg;
};

struct RmsPropStepReport {
    std::vector<std::size_t> skipped;  // indices of tensors with non-finite gradients
};

/// square_avg <- alpha * square_avg + (1 - alpha) * g^2
/// param      <- param - lr * g / (sqrt(square_avg) + epsilon)
///
/// Parameters without a gradient buffer are left untouched. A tensor whose
/// gradient contains NaN/Inf is skipped entirely and reported.
template <typename T>
RmsPropStepReport rmsprop_step(std::vector<Tensor<T>>& params, RmsPropState<T>& state, const RmsPropOptions& options);

}  // namespace hg

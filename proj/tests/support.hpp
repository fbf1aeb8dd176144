#pragma once

#include <random>
#include <vector>

#include "hg/annotation.hpp"
#include "hg/model.hpp"
#include "hg/tensor.hpp"

namespace hg::test {

template <typename T>
Tensor<T> random_tensor(std::mt19937_64& rng, Shape shape, double lo = -1.0, double hi = 1.0) {
    std::uniform_real_distribution<double> u(lo, hi);
    std::vector<T> v(shape_numel(shape));
    for (auto& x : v) x = static_cast<T>(u(rng));
    return Tensor<T>(std::move(shape), std::move(v));
}

template <typename T>
std::vector<T> values(const Tensor<T>& t) {
    return std::vector<T>(t.data().begin(), t.data().end());
}

/// Small model that runs in milliseconds.
inline ModelConfig tiny_config(int stacks = 2, int joints = 3) {
    ModelConfig c;
    c.num_stacks = stacks;
    c.num_features = 8;
    c.num_joints = joints;
    c.hourglass_depth = 2;
    c.input_resolution = 32;
    c.output_resolution = 8;
    return c;
}

/// Mark every batch-norm layer as having recorded (default) statistics so eval mode works.
template <typename T>
void mark_stats_recorded(StackedModelParams<T>& m) {
    m.for_each_batchnorm([](const std::string&, BatchNormParams<T>& bn) { bn.stats.updates = 1; });
}

/// Horizontally mirrored copy of a sample: image, joints, center, and left/right labels.
inline Sample mirror_sample(const Sample& s, const std::vector<int>& perm) {
    Sample m = s;
    const int w = s.image.width;
    for (int y = 0; y < s.image.height; ++y)
        for (int x = 0; x < w; ++x)
            for (int c = 0; c < 3; ++c) m.image.at(x, y)[c] = s.image.at(w - 1 - x, y)[c];
    const auto& a = s.annotation;
    for (std::size_t k = 0; k < a.num_joints(); ++k) {
        const std::size_t src = static_cast<std::size_t>(perm[k]);
        m.annotation.joints[k] = {w - a.joints[src].x, a.joints[src].y};
        m.annotation.present[k] = a.present[src];
        m.annotation.visible[k] = a.visible[src];
    }
    m.annotation.center = {w - a.center.x, a.center.y};
    return m;
}

}  // namespace hg::test

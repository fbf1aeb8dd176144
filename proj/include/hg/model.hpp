#pragma once

#include <cstdint>
#include <functional>
#include <optional>
#include <string>
#include <vector>

#include "hg/graph.hpp"

namespace hg {

/// Architecture hyperparameters of a stacked hourglass network.
struct ModelConfig {
    int num_stacks = 2;
    int num_features = 64;
    int num_joints = 14;
    int hourglass_depth = 2;
    int modules_per_location = 1;
    int input_resolution = 64;
    int output_resolution = 16;

    /// 256 -> 64 with eight 256-feature stacks pooling down to 4x4.
    static ModelConfig paper_scale(int joints = 16);
    /// 64 -> 16, two 64-feature stacks of depth 2.
    static ModelConfig desk_scale(int joints = 14);

    /// Throws std::invalid_argument naming the first violated constraint.
    void validate() const;
    /// Side length of the innermost hourglass feature map.
    int innermost_resolution() const { return output_resolution >> hourglass_depth; }

    bool operator==(const ModelConfig&) const = default;
};

template <typename T>
struct ConvParams {
    Tensor<T> weight;  // [out, in, k, k]
    Tensor<T> bias;    // [out]
    int stride = 1;
    int padding = 0;
};

template <typename T>
struct BatchNormParams {
    Tensor<T> gamma;
    Tensor<T> beta;
    BatchNormStats<T> stats;
};

/// Pre-activation bottleneck: (bn -> relu -> conv) x3 with widths
/// in -> out/2 (1x1), out/2 -> out/2 (3x3), out/2 -> out (1x1), plus an
/// identity skip or a 1x1 projection when in != out.
template <typename T>
struct ResidualParams {
    int in_channels = 0;
    int out_channels = 0;
    BatchNormParams<T> bn1, bn2, bn3;
    ConvParams<T> conv1, conv2, conv3;
    std::optional<ConvParams<T>> skip;
};

template <typename T>
using ResidualChain = std::vector<ResidualParams<T>>;

/// One resolution of the hourglass: `skip` runs at the pre-pooled resolution,
/// `down` after max pooling, `up` on the way back before upsampling.
template <typename T>
struct HourglassLevel {
    ResidualChain<T> skip, down, up;
};

template <typename T>
struct HourglassParams {
    std::vector<HourglassLevel<T>> levels;  // outermost first; size == depth
    ResidualChain<T> bottom;                // at the lowest resolution
};

template <typename T>
struct StemParams {
    ConvParams<T> conv;  // 7x7 stride 2
    BatchNormParams<T> bn;
    ResidualParams<T> res1, res2, res3;
};

template <typename T>
struct StackParams {
    HourglassParams<T> hourglass;
    ResidualChain<T> post;
    ConvParams<T> head_conv;
    BatchNormParams<T> head_bn;
    ConvParams<T> heatmap_conv;
    // Absent on the last stack: nothing consumes its features.
    std::optional<ConvParams<T>> heatmap_remap;
    std::optional<ConvParams<T>> feature_remap;
};

enum class TensorRole { parameter, running_mean, running_var };

template <typename T>
struct StackedModelParams {
    ModelConfig config;
    StemParams<T> stem;
    std::vector<StackParams<T>> stacks;

    using TensorVisitor = std::function<void(const std::string& name, Tensor<T>& tensor, TensorRole role)>;
    using BatchNormVisitor = std::function<void(const std::string& name, BatchNormParams<T>& bn)>;

    /// Visits every tensor in a fixed order with a stable hierarchical name.
    void for_each_tensor(const TensorVisitor& visit);
    void for_each_batchnorm(const BatchNormVisitor& visit);

    /// Learnable tensors in visiting order (shared handles).
    std::vector<Tensor<T>> parameters();
    std::size_t parameter_count();
    void set_requires_grad(bool on);
    void zero_grad();
};

/// Number of learnable scalars of a model built from `config`, without building it.
std::size_t parameter_count(const ModelConfig& config);

template <typename T>
StackedModelParams<T> init_params(const ModelConfig& config, std::uint64_t seed);

template <typename T>
Tensor<T> conv_forward(Graph<T>& g, const Tensor<T>& x, const ConvParams<T>& p);

template <typename T>
Tensor<T> residual_forward(Graph<T>& g, const Tensor<T>& x, ResidualParams<T>& p, Mode mode);

/// Recursive encoder-decoder: out = skip(x) + upsample(up(inner(down(pool(x))))).
template <typename T>
Tensor<T> hourglass_forward(Graph<T>& g, const Tensor<T>& x, HourglassParams<T>& p, Mode mode);

/// conv7x7/2 -> bn -> relu -> residual -> maxpool -> residual -> residual.
template <typename T>
Tensor<T> stem_forward(Graph<T>& g, const Tensor<T>& image, StemParams<T>& p, Mode mode);

/// Returns one [N, K, Rout, Rout] heatmap tensor per stack, first stack first.
template <typename T>
std::vector<Tensor<T>> stacked_forward(Graph<T>& g, const Tensor<T>& image, StackedModelParams<T>& p, Mode mode);

/// Copies every tensor (parameters and running statistics) between precisions.
template <typename To, typename From>
StackedModelParams<To> convert_params(StackedModelParams<From>& src);

}  // namespace hg

#pragma once

#include <cstdint>
#include <functional>
#include <string>
#include <string_view>
#include <vector>

#include "hg/tensor.hpp"

namespace hg {

enum class Mode { train, eval };

inline constexpr double kBatchNormEpsilon = 1e-5;
inline constexpr double kBatchNormMomentum = 0.1;

/// Running per-channel statistics of one batch-norm layer.
template <typename T>
struct BatchNormStats {
    Tensor<T> mean;
    Tensor<T> var;
    std::int64_t updates = 0;  // zero until a train-mode pass has run

    BatchNormStats() = default;
    explicit BatchNormStats(std::size_t channels)
        : mean(Shape{channels}, T(0)), var(Shape{channels}, T(1)) {}
    bool recorded() const { return updates > 0; }
};

/// Shape-only record of an executed op, kept even when no gradient is needed.
struct OpTrace {
    std::string op;
    Shape output_shape;
};

/// Reverse-mode tape plus the differentiable primitives that write to it.
///
/// Every primitive runs eagerly. When any input requires a gradient the op is
/// appended to the tape together with a closure that propagates the output
/// adjoint to its inputs; backward() replays those closures in reverse order.
/// A Graph belongs to one thread.
template <typename T>
class Graph {
public:
    using BackwardFn = std::function<void()>;

    struct Node {
        std::string op;
        std::vector<Tensor<T>> inputs;
        Tensor<T> output;
        BackwardFn backward;
    };

    Graph() = default;
    explicit Graph(bool record) : record_(record) {}
    Graph(const Graph&) = delete;
    Graph& operator=(const Graph&) = delete;
    Graph(Graph&&) noexcept = default;
    Graph& operator=(Graph&&) noexcept = default;

    bool recording() const { return record_; }

    // Primitives.
    Tensor<T> conv2d(const Tensor<T>& input, const Tensor<T>& weight, const Tensor<T>& bias, int stride,
                     int padding);
    Tensor<T> maxpool2x2(const Tensor<T>& input);
    Tensor<T> upsample_nearest2x(const Tensor<T>& input);
    Tensor<T> batchnorm(const Tensor<T>& input, const Tensor<T>& gamma, const Tensor<T>& beta,
                        BatchNormStats<T>& stats, Mode mode);
    Tensor<T> relu(const Tensor<T>& input);
    Tensor<T> add(const Tensor<T>& a, const Tensor<T>& b);
    Tensor<T> mse_loss(const Tensor<T>& pred, const Tensor<T>& target);
    Tensor<T> sum(const Tensor<T>& input);
    /// Scalar sum of input * weights (same shape).
    Tensor<T> weighted_sum(const Tensor<T>& input, const Tensor<T>& weights);

    /// Appends a caller-defined op. The output is marked as requiring a gradient
    /// when any input does, and `backward` runs during the reverse sweep.
    Tensor<T> record(std::string op, std::vector<Tensor<T>> inputs, Tensor<T> output, BackwardFn backward);

    /// Propagates d(loss)/d(.) to every reachable tensor that requires a gradient.
    /// Leaf gradients accumulate across calls; intermediate ones are reset first.
    void backward(const Tensor<T>& loss);

    const std::vector<Node>& nodes() const { return nodes_; }
    const std::vector<OpTrace>& trace() const { return trace_; }
    std::size_t count(std::string_view op) const;
    void clear();

    /// Hash over the activation pattern of non-smooth ops (relu masks, max-pool
    /// winners), maintained only while kink tracking is on. Two evaluations with
    /// the same signature lie on the same smooth piece of the function.
    std::uint64_t kink_signature() const { return signature_; }
    void set_track_kinks(bool on) { track_kinks_ = on; }

private:
    bool needs_grad(std::initializer_list<const Tensor<T>*> inputs) const;
    void push(std::string op, std::vector<Tensor<T>> inputs, Tensor<T>& output, BackwardFn fn);
    void note(std::string_view op, const Tensor<T>& output);
    void mix_signature(std::uint64_t value);

    bool record_ = true;
    bool track_kinks_ = false;
    std::vector<Node> nodes_;
    std::vector<OpTrace> trace_;
    std::uint64_t signature_ = 1469598103934665603ULL;
};

extern template class Graph<float>;
extern template class Graph<double>;

}  // namespace hg

#include "hg/rmsprop.hpp"

#include <cmath>
#include <iostream>
#include <stdexcept>

namespace hg {

template <typename T>
RmsPropStepReport rmsprop_step(std::vector<Tensor<T>>& params, RmsPropState<T>& state,
                               const RmsPropOptions& options) {
    if (!(options.learning_rate > 0)) throw std::invalid_argument("rmsprop: learning rate must be positive");
    if (state.square_avg.empty())
        for (const auto& p : params) state.square_avg.emplace_back(p.shape(), T(0));
    if (state.square_avg.size() != params.size())
        throw std::invalid_argument("rmsprop: optimizer state holds " + std::to_string(state.square_avg.size()) +
                                    " tensors for " + std::to_string(params.size()) + " parameters");

    const T lr = static_cast<T>(options.learning_rate);
    const T alpha = static_cast<T>(options.alpha);
    const T eps = static_cast<T>(options.epsilon);
    RmsPropStepReport report;
    for (std::size_t i = 0; i < params.size(); ++i) {
        auto& p = params[i];
        if (!p.has_grad()) continue;
        auto g = p.grad();
        auto s = state.square_avg[i].data();
        if (s.size() != g.size()) throw std::invalid_argument("rmsprop: state/parameter size mismatch");
        bool finite = true;
        for (T v : g)
            if (!std::isfinite(v)) {
                finite = false;
                break;
            }
        if (!finite) {
            report.skipped.push_back(i);
            std::cerr << "rmsprop: non-finite gradient in parameter " << i << ", update skipped\n";
            continue;
        }
        auto w = p.data();
        for (std::size_t k = 0; k < w.size(); ++k) {
            s[k] = alpha * s[k] + (T(1) - alpha) * g[k] * g[k];
            w[k] -= lr * g[k] / (std::sqrt(s[k]) + eps);
        }
    }
    return report;
}

template RmsPropStepReport rmsprop_step(std::vector<Tensor<float>>&, RmsPropState<float>&, const RmsPropOptions&);
template RmsPropStepReport rmsprop_step(std::vector<Tensor<double>>&, RmsPropState<double>&, const RmsPropOptions&);

}  // namespace hg

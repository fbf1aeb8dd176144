#include "hg/gradcheck.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <random>
#include <stdexcept>

namespace hg {

bool GradCheckReport::passed() const {
    return std::all_of(inputs.begin(), inputs.end(), [](const InputCheckResult& r) { return r.passed(); });
}

double GradCheckReport::max_rel_error() const {
    double worst = 0;
    for (const auto& r : inputs) worst = std::max(worst, r.max_rel_error);
    return worst;
}

namespace {

struct Evaluation {
    double value;
    std::uint64_t signature;
};

}  // namespace

GradCheckReport finite_difference_check(const CheckedFunction& fn, std::vector<GradCheckInput> inputs,
                                        const GradCheckOptions& options) {
    if (!(options.step > 0)) throw std::invalid_argument("finite_difference_check: step must be positive");

    std::mt19937_64 rng(options.seed);
    std::uniform_real_distribution<double> unit(-1.0, 1.0);
    TensorD projection;

    auto evaluate = [&](bool with_grad) -> Evaluation {
        Graph<double> graph(with_grad);
        graph.set_track_kinks(true);
        TensorD out = fn(graph);
        if (!projection.defined()) {
            std::vector<double> r(out.numel());
            for (auto& v : r) v = unit(rng);
            projection = TensorD(out.shape(), std::move(r));
        }
        TensorD scalar = graph.weighted_sum(out, projection);
        if (with_grad) graph.backward(scalar);
        return {scalar.item(), graph.kink_signature()};
    };

    std::vector<bool> had_requires_grad;
    for (auto& in : inputs) {
        had_requires_grad.push_back(in.tensor.requires_grad());
        in.tensor.set_requires_grad(true);
        if (in.tensor.has_grad()) in.tensor.zero_grad();
    }
    const Evaluation base = evaluate(true);

    GradCheckReport report;
    for (auto& in : inputs) {
        InputCheckResult res;
        res.name = in.name;
        const std::size_t n = in.tensor.numel();
        std::vector<double> analytic(n, 0.0);
        if (in.tensor.has_grad()) std::copy(in.tensor.grad().begin(), in.tensor.grad().end(), analytic.begin());

        std::vector<std::size_t> probes(n);
        std::iota(probes.begin(), probes.end(), std::size_t{0});
        if (options.max_probes > 0 && n > options.max_probes) {
            std::shuffle(probes.begin(), probes.end(), rng);
            probes.resize(options.max_probes);
            std::sort(probes.begin(), probes.end());
        }

        auto values = in.tensor.data();
        for (std::size_t idx : probes) {
            const double saved = values[idx];
            values[idx] = saved + options.step;
            const Evaluation plus = evaluate(false);
            values[idx] = saved - options.step;
            const Evaluation minus = evaluate(false);
            values[idx] = saved;

            if (!std::isfinite(plus.value) || !std::isfinite(minus.value)) {
                ++res.non_finite;
                continue;
            }
            if (plus.signature != base.signature || minus.signature != base.signature) {
                ++res.skipped_kinks;
                continue;
            }
            const double numeric = (plus.value - minus.value) / (2.0 * options.step);
            const double denom = std::max({std::abs(numeric), std::abs(analytic[idx]), options.abs_floor});
            const double rel = std::abs(numeric - analytic[idx]) / denom;
            ++res.probed;
            res.max_rel_error = std::max(res.max_rel_error, rel);
            if (!(rel <= options.tolerance)) ++res.failed;
        }
        report.inputs.push_back(std::move(res));
    }
    for (std::size_t i = 0; i < inputs.size(); ++i) {
        inputs[i].tensor.drop_grad();
        inputs[i].tensor.set_requires_grad(had_requires_grad[i]);
    }
    return report;
}

}  // namespace hg

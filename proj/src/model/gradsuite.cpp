#include "hg/gradsuite.hpp"

#include <random>

#include "hg/model.hpp"

namespace hg {

namespace {

TensorD random_tensor(std::mt19937_64& rng, Shape shape) {
    std::uniform_real_distribution<double> u(-1.0, 1.0);
    std::vector<double> v(shape_numel(shape));
    for (auto& x : v) x = u(rng);
    return TensorD(std::move(shape), std::move(v));
}

}  // namespace

std::vector<GradSuiteEntry> run_gradient_suite(std::uint64_t seed, const GradCheckOptions& options) {
    std::mt19937_64 rng(seed);
    std::vector<GradSuiteEntry> out;
    auto check = [&](std::string op, const CheckedFunction& fn, std::vector<GradCheckInput> inputs,
                     const GradCheckOptions& opt) {
        out.push_back({std::move(op), finite_difference_check(fn, std::move(inputs), opt)});
    };

    {
        TensorD x = random_tensor(rng, {2, 3, 6, 6}), w = random_tensor(rng, {4, 3, 3, 3}),
                b = random_tensor(rng, {4});
        check("conv2d 3x3", [&](Graph<double>& g) { return g.conv2d(x, w, b, 1, 1); },
              {{"input", x}, {"weight", w}, {"bias", b}}, options);
    }
    {
        TensorD x = random_tensor(rng, {1, 3, 9, 9}), w = random_tensor(rng, {2, 3, 7, 7}),
                b = random_tensor(rng, {2});
        check("conv2d 7x7 stride 2", [&](Graph<double>& g) { return g.conv2d(x, w, b, 2, 3); },
              {{"input", x}, {"weight", w}, {"bias", b}}, options);
    }
    {
        TensorD x = random_tensor(rng, {2, 3, 4, 4});
        check("maxpool2x2", [&](Graph<double>& g) { return g.maxpool2x2(x); }, {{"input", x}}, options);
    }
    {
        TensorD x = random_tensor(rng, {2, 3, 3, 3});
        check("upsample_nearest2x", [&](Graph<double>& g) { return g.upsample_nearest2x(x); }, {{"input", x}},
              options);
    }
    {
        TensorD x = random_tensor(rng, {4, 3, 3, 3}), gamma = random_tensor(rng, {3}), beta = random_tensor(rng, {3});
        BatchNormStats<double> stats(3);
        check("batchnorm (train)",
              [&](Graph<double>& g) { return g.batchnorm(x, gamma, beta, stats, Mode::train); },
              {{"input", x}, {"gamma", gamma}, {"beta", beta}}, options);
        check("batchnorm (eval)", [&](Graph<double>& g) { return g.batchnorm(x, gamma, beta, stats, Mode::eval); },
              {{"input", x}, {"gamma", gamma}, {"beta", beta}}, options);
    }
    {
        TensorD x = random_tensor(rng, {2, 3, 4, 4});
        check("relu", [&](Graph<double>& g) { return g.relu(x); }, {{"input", x}}, options);
    }
    {
        TensorD a = random_tensor(rng, {2, 3, 4, 4}), b = random_tensor(rng, {2, 3, 4, 4});
        check("add", [&](Graph<double>& g) { return g.add(a, b); }, {{"a", a}, {"b", b}}, options);
    }
    {
        TensorD p = random_tensor(rng, {2, 3, 4, 4}), t = random_tensor(rng, {2, 3, 4, 4});
        check("mse_loss", [&](Graph<double>& g) { return g.mse_loss(p, t); }, {{"pred", p}, {"target", t}},
              options);
    }
    {
        ModelConfig cfg;
        cfg.num_stacks = 1;
        cfg.num_features = 8;
        cfg.num_joints = 2;
        cfg.hourglass_depth = 2;
        cfg.input_resolution = 16;
        cfg.output_resolution = 4;
        auto model = init_params<double>(cfg, seed);
        TensorD image = random_tensor(rng, {2, 3, 16, 16});
        TensorD target = random_tensor(rng, {2, 2, 4, 4});
        std::vector<GradCheckInput> inputs{{"image", image}};
        model.for_each_tensor([&](const std::string& name, TensorD& t, TensorRole role) {
            if (role == TensorRole::parameter) inputs.push_back({name, t});
        });
        GradCheckOptions opt = options;
        if (opt.max_probes == 0) opt.max_probes = 24;
        check("miniature hourglass (1 stack, depth 2)",
              [&](Graph<double>& g) {
                  auto heat = stacked_forward(g, image, model, Mode::train);
                  return g.mse_loss(heat.back(), target);
              },
              std::move(inputs), opt);
    }
    return out;
}

}  // namespace hg

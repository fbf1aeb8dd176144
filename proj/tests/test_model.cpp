#include <gtest/gtest.h>

#include <cmath>
#include <map>

#include "hg/model.hpp"
#include "hg/rmsprop.hpp"
#include "support.hpp"

using namespace hg;
using hg::test::mark_stats_recorded;
using hg::test::random_tensor;
using hg::test::tiny_config;
using hg::test::values;

namespace {

ModelConfig hourglass_config(int features, int depth, int out_res) {
    ModelConfig c;
    c.num_stacks = 1;
    c.num_features = features;
    c.num_joints = 2;
    c.hourglass_depth = depth;
    c.input_resolution = out_res * 4;
    c.output_resolution = out_res;
    return c;
}

// Independent count: conv weights/biases, batch-norm gamma/beta, summed by hand
// from the architecture description.
std::size_t count_by_hand(const ModelConfig& c) {
    const std::size_t f = c.num_features, k = c.num_joints, m = c.modules_per_location;
    auto conv = [](std::size_t in, std::size_t out, std::size_t kk) { return out * in * kk * kk + out; };
    auto bn = [](std::size_t ch) { return 2 * ch; };
    auto residual = [&](std::size_t in, std::size_t out) {
        const std::size_t mid = out / 2;
        std::size_t n = bn(in) + conv(in, mid, 1) + bn(mid) + conv(mid, mid, 3) + bn(mid) + conv(mid, out, 1);
        if (in != out) n += conv(in, out, 1);
        return n;
    };
    std::size_t total = conv(3, f / 4, 7) + bn(f / 4) + residual(f / 4, f / 2) + residual(f / 2, f / 2) +
                        residual(f / 2, f);
    for (int s = 0; s < c.num_stacks; ++s) {
        // Each level: skip, down, up chains; plus the bottom chain and the post-hourglass chain.
        total += (3 * static_cast<std::size_t>(c.hourglass_depth) + 1 + 1) * m * residual(f, f);
        total += conv(f, f, 1) + bn(f) + conv(f, k, 1);
        if (s + 1 < c.num_stacks) total += conv(k, f, 1) + conv(f, f, 1);
    }
    return total;
}

}  // namespace

TEST(ModelConfig, Validation) {
    EXPECT_NO_THROW(ModelConfig::desk_scale().validate());
    EXPECT_NO_THROW(ModelConfig::paper_scale().validate());
    ModelConfig c;
    c.output_resolution = 15;
    EXPECT_THROW(c.validate(), std::invalid_argument);
    c = ModelConfig{};
    c.num_stacks = 0;
    EXPECT_THROW(c.validate(), std::invalid_argument);
    c = ModelConfig{};
    c.hourglass_depth = 5;  // 16 is not divisible by 32
    EXPECT_THROW(c.validate(), std::invalid_argument);
    c = ModelConfig{};
    c.num_joints = 0;
    EXPECT_THROW(c.validate(), std::invalid_argument);
}

TEST(ModelConfig, PaperScaleInnermostResolutionIsFour) {
    const ModelConfig p = ModelConfig::paper_scale();
    EXPECT_EQ(p.input_resolution, 256);
    EXPECT_EQ(p.output_resolution, 64);
    EXPECT_EQ(p.num_stacks, 8);
    EXPECT_EQ(p.num_features, 256);
    EXPECT_EQ(p.innermost_resolution(), 4);
}

TEST(Residual, FullScaleShapeAndSkipProjection) {
    auto model = init_params<float>(hourglass_config(256, 1, 64), 1);
    auto& r = model.stacks[0].post[0];
    EXPECT_FALSE(r.skip.has_value());
    EXPECT_TRUE(model.stem.res1.skip.has_value());
    EXPECT_EQ(r.conv2.weight.shape(), (Shape{128, 128, 3, 3}));
    Graph<float> g(false);
    std::mt19937_64 rng(1);
    const TensorF y = residual_forward(g, random_tensor<float>(rng, {1, 256, 64, 64}), r, Mode::train);
    EXPECT_EQ(y.shape(), (Shape{1, 256, 64, 64}));
}

TEST(Residual, ZeroBranchIsIdentity) {
    auto model = init_params<float>(tiny_config(), 2);
    auto& r = model.stacks[0].post[0];
    for (auto* c : {&r.conv1, &r.conv2, &r.conv3}) {
        for (auto& v : c->weight.data()) v = 0;
    }
    std::mt19937_64 rng(2);
    TensorF x = random_tensor<float>(rng, {2, 8, 4, 4});
    Graph<float> g(false);
    EXPECT_EQ(values(residual_forward(g, x, r, Mode::train)), values(x));
}

TEST(Residual, RejectsChannelMismatch) {
    auto model = init_params<float>(tiny_config(), 2);
    Graph<float> g(false);
    EXPECT_THROW(residual_forward(g, TensorF(Shape{1, 5, 4, 4}), model.stacks[0].post[0], Mode::train),
                 std::invalid_argument);
}

TEST(Hourglass, PreservesShapeAcrossDepthsAndWidths) {
    std::mt19937_64 rng(3);
    for (int features : {8, 64, 256})
        for (int depth = 1; depth <= 4; ++depth) {
            auto model = init_params<float>(hourglass_config(features, depth, 16), 3);
            Graph<float> g(false);
            // Two samples so train-mode batch norm has two values per channel at 1x1.
            TensorF x = random_tensor<float>(rng, {2, std::size_t(features), 16, 16});
            const TensorF y = hourglass_forward(g, x, model.stacks[0].hourglass, Mode::train);
            EXPECT_EQ(y.shape(), x.shape()) << features << " features, depth " << depth;
        }
}

TEST(Hourglass, PaperScaleReachesFourByFour) {
    auto model = init_params<float>(hourglass_config(256, 4, 64), 4);
    Graph<float> g(false);
    std::mt19937_64 rng(4);
    const TensorF y =
        hourglass_forward(g, random_tensor<float>(rng, {1, 256, 64, 64}), model.stacks[0].hourglass, Mode::train);
    EXPECT_EQ(y.shape(), (Shape{1, 256, 64, 64}));
    std::size_t smallest = 64;
    for (const auto& t : g.trace()) smallest = std::min<std::size_t>(smallest, t.output_shape[2]);
    EXPECT_EQ(smallest, 4u);
}

TEST(Hourglass, DepthOneBaseCase) {
    auto model = init_params<float>(hourglass_config(8, 1, 4), 5);
    Graph<float> g(false);
    EXPECT_EQ(hourglass_forward(g, TensorF(Shape{1, 8, 4, 4}, 0.5f), model.stacks[0].hourglass, Mode::train).shape(),
              (Shape{1, 8, 4, 4}));
}

TEST(Hourglass, RejectsIndivisibleResolution) {
    auto model = init_params<float>(hourglass_config(8, 2, 8), 5);
    Graph<float> g(false);
    EXPECT_THROW(hourglass_forward(g, TensorF(Shape{1, 8, 6, 6}), model.stacks[0].hourglass, Mode::train),
                 std::invalid_argument);
}

TEST(Hourglass, ResidualsPerResolutionMatchModulesPerLocation) {
    // Each residual has exactly one 3x3 convolution; count them per resolution.
    for (int m : {1, 2, 3}) {
        ModelConfig c = hourglass_config(8, 3, 16);
        c.modules_per_location = m;
        auto model = init_params<float>(c, 6);
        Graph<float> g(false);
        hourglass_forward(g, TensorF(Shape{1, 8, 16, 16}, 0.1f), model.stacks[0].hourglass, Mode::train);
        std::map<std::size_t, int> per_res;
        const auto& tr = g.trace();
        for (std::size_t i = 0; i < tr.size(); ++i)
            if (tr[i].op == "conv2d" && tr[i].output_shape[1] == 4) ++per_res[tr[i].output_shape[2]];
        // 1x1 (in->mid) and 3x3 (mid->mid) both output mid channels: two per residual.
        EXPECT_EQ(per_res[16], 2 * m);      // skip path at the outer resolution
        EXPECT_EQ(per_res[8], 2 * 3 * m);   // down + up of level 0, skip of level 1
        EXPECT_EQ(per_res[4], 2 * 3 * m);   // down + up of level 1, skip of level 2
        EXPECT_EQ(per_res[2], 2 * 3 * m);   // down, bottom and up of the innermost level
    }
}

TEST(Stem, PaperAndDeskShapes) {
    {
        auto model = init_params<float>(ModelConfig::paper_scale(), 7);
        Graph<float> g(false);
        const TensorF y = stem_forward(g, TensorF(Shape{1, 3, 256, 256}, 0.3f), model.stem, Mode::train);
        EXPECT_EQ(y.shape(), (Shape{1, 256, 64, 64}));
    }
    {
        auto model = init_params<float>(ModelConfig::desk_scale(), 7);
        Graph<float> g(false);
        const TensorF y = stem_forward(g, TensorF(Shape{1, 3, 64, 64}, 0.3f), model.stem, Mode::train);
        EXPECT_EQ(y.shape(), (Shape{1, 64, 16, 16}));
        EXPECT_THROW(stem_forward(g, TensorF(Shape{1, 3, 62, 62}), model.stem, Mode::train), std::invalid_argument);
    }
}

TEST(Stem, BatchOfFourMatchesFourSinglesInEvalMode) {
    auto model = init_params<float>(tiny_config(), 8);
    mark_stats_recorded(model);
    std::mt19937_64 rng(8);
    TensorF batch = random_tensor<float>(rng, {4, 3, 32, 32});
    Graph<float> g(false);
    const auto joint = values(stem_forward(g, batch, model.stem, Mode::eval));
    const std::size_t per = joint.size() / 4;
    for (std::size_t i = 0; i < 4; ++i) {
        std::vector<float> one(batch.data().begin() + i * 3 * 32 * 32, batch.data().begin() + (i + 1) * 3 * 32 * 32);
        const auto single = values(stem_forward(g, TensorF(Shape{1, 3, 32, 32}, one), model.stem, Mode::eval));
        for (std::size_t k = 0; k < per; ++k) EXPECT_NEAR(single[k], joint[i * per + k], 1e-5);
    }
}

TEST(Stacked, ReturnsOneHeatmapSetPerStack) {
    for (int stacks : {1, 2, 3}) {
        auto model = init_params<float>(tiny_config(stacks, 5), 9);
        Graph<float> g(false);
        const auto heat = stacked_forward(g, TensorF(Shape{2, 3, 32, 32}, 0.2f), model, Mode::train);
        ASSERT_EQ(heat.size(), static_cast<std::size_t>(stacks));
        for (const auto& h : heat) EXPECT_EQ(h.shape(), (Shape{2, 5, 8, 8}));
    }
}

TEST(Stacked, PaperScaleHeatmapShapes) {
    // Shape contract only; a 256-input forward of the full network is exercised in the stem test.
    const ModelConfig p = ModelConfig::paper_scale(16);
    auto model = init_params<float>(p, 10);
    EXPECT_EQ(model.stacks.size(), 8u);
    EXPECT_EQ(model.stacks[0].heatmap_conv.weight.shape(), (Shape{16, 256, 1, 1}));
}

TEST(Stacked, RejectsMismatchedInput) {
    auto model = init_params<float>(tiny_config(), 11);
    Graph<float> g(false);
    EXPECT_THROW(stacked_forward(g, TensorF(Shape{1, 3, 16, 16}), model, Mode::train), std::invalid_argument);
    model.stacks.pop_back();
    EXPECT_THROW(stacked_forward(g, TensorF(Shape{1, 3, 32, 32}), model, Mode::train), std::invalid_argument);
}

TEST(Params, CountIsAnalyticAndMatchesHandCount) {
    for (const ModelConfig& c : {ModelConfig::desk_scale(), tiny_config(3, 4), hourglass_config(64, 3, 32)}) {
        auto model = init_params<float>(c, 12);
        EXPECT_EQ(model.parameter_count(), parameter_count(c));
        EXPECT_EQ(parameter_count(c), count_by_hand(c));
    }
    ModelConfig paper = ModelConfig::paper_scale();
    EXPECT_EQ(parameter_count(paper), count_by_hand(paper));
}

TEST(Params, EqualParameterArrangementsAgreeWithinFivePercent) {
    {
        ModelConfig base = ModelConfig::paper_scale();
        std::vector<std::size_t> counts;
        for (auto [s, m] : {std::pair{8, 1}, {4, 2}, {2, 4}}) {
            base.num_stacks = s;
            base.modules_per_location = m;
            counts.push_back(parameter_count(base));
        }
        const auto [lo, hi] = std::minmax_element(counts.begin(), counts.end());
        EXPECT_LE(static_cast<double>(*hi - *lo) / static_cast<double>(*lo), 0.05);
    }
}

TEST(Params, NoTensorSharedBetweenStacks) {
    auto model = init_params<float>(tiny_config(3), 13);
    std::vector<TensorF> all;
    model.for_each_tensor([&](const std::string&, TensorF& t, TensorRole) { all.push_back(t); });
    for (std::size_t i = 0; i < all.size(); ++i)
        for (std::size_t j = i + 1; j < all.size(); ++j) EXPECT_FALSE(all[i].same_storage(all[j]));
}

TEST(Init, DeterministicPerSeedAndFanInScaled) {
    const ModelConfig c = tiny_config();
    auto a = init_params<float>(c, 14), b = init_params<float>(c, 14), d = init_params<float>(c, 15);
    auto pa = a.parameters(), pb = b.parameters(), pd = d.parameters();
    bool any_diff = false;
    for (std::size_t i = 0; i < pa.size(); ++i) {
        EXPECT_EQ(values(pa[i]), values(pb[i]));
        any_diff = any_diff || values(pa[i]) != values(pd[i]);
    }
    EXPECT_TRUE(any_diff);

    // Stem weights: zero mean, std sqrt(1 / fan_in); biases zero; gamma one.
    const auto w = values(init_params<float>(ModelConfig::desk_scale(), 16).stem.conv.weight);
    double s = 0, s2 = 0;
    for (float v : w) {
        s += v;
        s2 += double(v) * v;
    }
    const double mean = s / w.size(), sd = std::sqrt(s2 / w.size() - mean * mean);
    EXPECT_NEAR(mean, 0.0, 0.02);
    EXPECT_NEAR(sd, std::sqrt(1.0 / (3 * 49)), 0.01);
    for (float v : a.stem.conv.bias.data()) EXPECT_EQ(v, 0.0f);
    for (float v : a.stem.bn.gamma.data()) EXPECT_EQ(v, 1.0f);
    for (float v : a.stem.bn.beta.data()) EXPECT_EQ(v, 0.0f);
}

TEST(Init, ForwardIsFiniteAndBounded) {
    auto model = init_params<float>(ModelConfig::desk_scale(), 17);
    std::mt19937_64 rng(17);
    Graph<float> g(false);
    for (const auto& h : stacked_forward(g, random_tensor<float>(rng, {2, 3, 64, 64}, 0, 1), model, Mode::train))
        for (float v : h.data()) {
            ASSERT_TRUE(std::isfinite(v));
            EXPECT_LT(std::abs(v), 10.0f);
        }
}

TEST(Stacked, MutatingStackOnlyAffectsLaterStacks) {
    auto model = init_params<float>(tiny_config(3), 18);
    mark_stats_recorded(model);
    std::mt19937_64 rng(18);
    TensorF x = random_tensor<float>(rng, {1, 3, 32, 32});
    Graph<float> g(false);
    const auto before = stacked_forward(g, x, model, Mode::eval);
    for (auto& v : model.stacks[1].hourglass.levels[0].skip[0].conv2.weight.data()) v += 0.5f;
    const auto after = stacked_forward(g, x, model, Mode::eval);
    EXPECT_EQ(values(before[0]), values(after[0]));
    EXPECT_NE(values(before[1]), values(after[1]));
    EXPECT_NE(values(before[2]), values(after[2]));
}

TEST(Stacked, LossOnAllStacksReachesStemWeights) {
    auto model = init_params<float>(tiny_config(2), 19);
    std::mt19937_64 rng(19);
    TensorF x = random_tensor<float>(rng, {2, 3, 32, 32});
    Graph<float> g;
    const auto heat = stacked_forward(g, x, model, Mode::train);
    TensorF loss = g.add(g.mse_loss(heat[0], TensorF(heat[0].shape())), g.mse_loss(heat[1], TensorF(heat[1].shape())));
    g.backward(loss);
    ASSERT_TRUE(model.stem.conv.weight.has_grad());
    double norm = 0;
    for (float v : model.stem.conv.weight.grad()) norm += std::abs(v);
    EXPECT_GT(norm, 0.0);
}

TEST(Params, ConvertBetweenPrecisions) {
    auto f = init_params<float>(tiny_config(), 20);
    f.stem.bn.stats.updates = 3;
    auto d = convert_params<double>(f);
    auto back = convert_params<float>(d);
    auto pf = f.parameters(), pb = back.parameters();
    for (std::size_t i = 0; i < pf.size(); ++i) EXPECT_EQ(values(pf[i]), values(pb[i]));
    EXPECT_EQ(back.stem.bn.stats.updates, 3);
}

#include "hg/model.hpp"

#include <cmath>
#include <random>
#include <stdexcept>

namespace hg {

ModelConfig ModelConfig::paper_scale(int joints) {
    ModelConfig c;
    c.num_stacks = 8;
    c.num_features = 256;
    c.num_joints = joints;
    c.hourglass_depth = 4;
    c.modules_per_location = 1;
    c.input_resolution = 256;
    c.output_resolution = 64;
    return c;
}

ModelConfig ModelConfig::desk_scale(int joints) {
    ModelConfig c;
    c.num_joints = joints;
    return c;
}

void ModelConfig::validate() const {
    auto fail = [](const std::string& msg) { throw std::invalid_argument("model config: " + msg); };
    if (num_stacks < 1) fail("num_stacks must be >= 1");
    if (num_joints < 1) fail("num_joints must be >= 1");
    if (num_features < 4 || num_features % 4 != 0) fail("num_features must be a positive multiple of 4");
    if (hourglass_depth < 1) fail("hourglass_depth must be >= 1");
    if (modules_per_location < 1) fail("modules_per_location must be >= 1");
    if (input_resolution < 4 || input_resolution % 4 != 0) fail("input_resolution must be a multiple of 4");
    if (output_resolution * 4 != input_resolution) fail("output_resolution must equal input_resolution / 4");
    if (hourglass_depth >= 31 || output_resolution % (1 << hourglass_depth) != 0)
        fail("output_resolution " + std::to_string(output_resolution) + " is not divisible by 2^" +
             std::to_string(hourglass_depth));
}

namespace {

std::size_t conv_count(std::size_t in, std::size_t out, std::size_t k) { return out * in * k * k + out; }

std::size_t residual_count(std::size_t in, std::size_t out) {
    const std::size_t mid = out / 2;
    std::size_t n = 2 * in + 2 * mid + 2 * mid;  // batch-norm gamma/beta
    n += conv_count(in, mid, 1) + conv_count(mid, mid, 3) + conv_count(mid, out, 1);
    if (in != out) n += conv_count(in, out, 1);
    return n;
}

template <typename T>
class Builder {
public:
    explicit Builder(std::uint64_t seed) : rng_(seed) {}

    ConvParams<T> conv(int in, int out, int k, int stride = 1) {
        ConvParams<T> p;
        const double std_dev = std::sqrt(1.0 / (static_cast<double>(in) * k * k));
        std::normal_distribution<double> dist(0.0, std_dev);
        std::vector<T> w(static_cast<std::size_t>(out) * in * k * k);
        for (auto& v : w) v = static_cast<T>(dist(rng_));
        p.weight = Tensor<T>(Shape{std::size_t(out), std::size_t(in), std::size_t(k), std::size_t(k)}, std::move(w));
        p.bias = Tensor<T>(Shape{std::size_t(out)}, T(0));
        p.stride = stride;
        p.padding = k / 2;
        return p;
    }

    BatchNormParams<T> bn(int channels) {
        BatchNormParams<T> p;
        p.gamma = Tensor<T>(Shape{std::size_t(channels)}, T(1));
        p.beta = Tensor<T>(Shape{std::size_t(channels)}, T(0));
        p.stats = BatchNormStats<T>(static_cast<std::size_t>(channels));
        return p;
    }

    ResidualParams<T> residual(int in, int out) {
        ResidualParams<T> r;
        const int mid = out / 2;
        r.in_channels = in;
        r.out_channels = out;
        r.bn1 = bn(in);
        r.conv1 = conv(in, mid, 1);
        r.bn2 = bn(mid);
        r.conv2 = conv(mid, mid, 3);
        r.bn3 = bn(mid);
        r.conv3 = conv(mid, out, 1);
        if (in != out) r.skip = conv(in, out, 1);
        return r;
    }

    ResidualChain<T> chain(int count, int features) {
        ResidualChain<T> c;
        for (int i = 0; i < count; ++i) c.push_back(residual(features, features));
        return c;
    }

private:
    std::mt19937_64 rng_;
};

template <typename T>
using Visitor = typename StackedModelParams<T>::TensorVisitor;

template <typename T>
void visit_conv(const std::string& name, ConvParams<T>& c, const Visitor<T>& v) {
    v(name + ".weight", c.weight, TensorRole::parameter);
    v(name + ".bias", c.bias, TensorRole::parameter);
}

template <typename T>
void visit_bn(const std::string& name, BatchNormParams<T>& b, const Visitor<T>& v) {
    v(name + ".gamma", b.gamma, TensorRole::parameter);
    v(name + ".beta", b.beta, TensorRole::parameter);
    v(name + ".running_mean", b.stats.mean, TensorRole::running_mean);
    v(name + ".running_var", b.stats.var, TensorRole::running_var);
}

template <typename T>
void visit_residual(const std::string& name, ResidualParams<T>& r, const Visitor<T>& v) {
    visit_bn(name + ".bn1", r.bn1, v);
    visit_conv(name + ".conv1", r.conv1, v);
    visit_bn(name + ".bn2", r.bn2, v);
    visit_conv(name + ".conv2", r.conv2, v);
    visit_bn(name + ".bn3", r.bn3, v);
    visit_conv(name + ".conv3", r.conv3, v);
    if (r.skip) visit_conv(name + ".skip", *r.skip, v);
}

template <typename T>
void visit_chain(const std::string& name, ResidualChain<T>& chain, const Visitor<T>& v) {
    for (std::size_t i = 0; i < chain.size(); ++i) visit_residual(name + "." + std::to_string(i), chain[i], v);
}

template <typename T>
using BnVisitor = typename StackedModelParams<T>::BatchNormVisitor;

template <typename T>
void bn_residual(const std::string& name, ResidualParams<T>& r, const BnVisitor<T>& v) {
    v(name + ".bn1", r.bn1);
    v(name + ".bn2", r.bn2);
    v(name + ".bn3", r.bn3);
}

template <typename T>
void bn_chain(const std::string& name, ResidualChain<T>& chain, const BnVisitor<T>& v) {
    for (std::size_t i = 0; i < chain.size(); ++i) bn_residual(name + "." + std::to_string(i), chain[i], v);
}

template <typename T>
Tensor<T> chain_forward(Graph<T>& g, Tensor<T> x, ResidualChain<T>& chain, Mode mode) {
    for (auto& r : chain) x = residual_forward(g, x, r, mode);
    return x;
}

template <typename T>
Tensor<T> hourglass_level(Graph<T>& g, const Tensor<T>& x, HourglassParams<T>& p, std::size_t level, Mode mode) {
    auto& lv = p.levels[level];
    Tensor<T> upper = chain_forward(g, x, lv.skip, mode);
    Tensor<T> lower = chain_forward(g, g.maxpool2x2(x), lv.down, mode);
    if (level + 1 < p.levels.size())
        lower = hourglass_level(g, lower, p, level + 1, mode);
    else
        lower = chain_forward(g, lower, p.bottom, mode);
    lower = chain_forward(g, lower, lv.up, mode);
    return g.add(upper, g.upsample_nearest2x(lower));
}

}  // namespace

std::size_t parameter_count(const ModelConfig& config) {
    config.validate();
    const std::size_t f = config.num_features;
    const std::size_t k = config.num_joints;
    const std::size_t m = config.modules_per_location;
    const std::size_t d = config.hourglass_depth;
    std::size_t n = conv_count(3, f / 4, 7) + 2 * (f / 4);
    n += residual_count(f / 4, f / 2) + residual_count(f / 2, f / 2) + residual_count(f / 2, f);
    const std::size_t per_stack = (m * (3 * d + 1) + m) * residual_count(f, f) + conv_count(f, f, 1) + 2 * f +
                                  conv_count(f, k, 1);
    const std::size_t remaps = conv_count(k, f, 1) + conv_count(f, f, 1);
    n += config.num_stacks * per_stack + (config.num_stacks - 1) * remaps;
    return n;
}

template <typename T>
void StackedModelParams<T>::for_each_tensor(const TensorVisitor& v) {
    visit_conv("stem.conv", stem.conv, v);
    visit_bn("stem.bn", stem.bn, v);
    visit_residual("stem.res1", stem.res1, v);
    visit_residual("stem.res2", stem.res2, v);
    visit_residual("stem.res3", stem.res3, v);
    for (std::size_t s = 0; s < stacks.size(); ++s) {
        auto& st = stacks[s];
        const std::string prefix = "stack" + std::to_string(s);
        for (std::size_t l = 0; l < st.hourglass.levels.size(); ++l) {
            const std::string lp = prefix + ".hg.level" + std::to_string(l);
            visit_chain(lp + ".skip", st.hourglass.levels[l].skip, v);
            visit_chain(lp + ".down", st.hourglass.levels[l].down, v);
            visit_chain(lp + ".up", st.hourglass.levels[l].up, v);
        }
        visit_chain(prefix + ".hg.bottom", st.hourglass.bottom, v);
        visit_chain(prefix + ".post", st.post, v);
        visit_conv(prefix + ".head.conv", st.head_conv, v);
        visit_bn(prefix + ".head.bn", st.head_bn, v);
        visit_conv(prefix + ".heatmap", st.heatmap_conv, v);
        if (st.heatmap_remap) visit_conv(prefix + ".remap_heatmap", *st.heatmap_remap, v);
        if (st.feature_remap) visit_conv(prefix + ".remap_features", *st.feature_remap, v);
    }
}

template <typename T>
void StackedModelParams<T>::for_each_batchnorm(const BatchNormVisitor& v) {
    v("stem.bn", stem.bn);
    bn_residual("stem.res1", stem.res1, v);
    bn_residual("stem.res2", stem.res2, v);
    bn_residual("stem.res3", stem.res3, v);
    for (std::size_t s = 0; s < stacks.size(); ++s) {
        auto& st = stacks[s];
        const std::string prefix = "stack" + std::to_string(s);
        for (std::size_t l = 0; l < st.hourglass.levels.size(); ++l) {
            const std::string lp = prefix + ".hg.level" + std::to_string(l);
            bn_chain(lp + ".skip", st.hourglass.levels[l].skip, v);
            bn_chain(lp + ".down", st.hourglass.levels[l].down, v);
            bn_chain(lp + ".up", st.hourglass.levels[l].up, v);
        }
        bn_chain(prefix + ".hg.bottom", st.hourglass.bottom, v);
        bn_chain(prefix + ".post", st.post, v);
        v(prefix + ".head.bn", st.head_bn);
    }
}

template <typename T>
std::vector<Tensor<T>> StackedModelParams<T>::parameters() {
    std::vector<Tensor<T>> out;
    for_each_tensor([&](const std::string&, Tensor<T>& t, TensorRole role) {
        if (role == TensorRole::parameter) out.push_back(t);
    });
    return out;
}

template <typename T>
std::size_t StackedModelParams<T>::parameter_count() {
    std::size_t n = 0;
    for (const auto& t : parameters()) n += t.numel();
    return n;
}

template <typename T>
void StackedModelParams<T>::set_requires_grad(bool on) {
    for (auto& t : parameters()) t.set_requires_grad(on);
}

template <typename T>
void StackedModelParams<T>::zero_grad() {
    for (auto& t : parameters()) t.drop_grad();
}

template <typename T>
StackedModelParams<T> init_params(const ModelConfig& config, std::uint64_t seed) {
    config.validate();
    Builder<T> b(seed);
    const int f = config.num_features;
    const int m = config.modules_per_location;
    StackedModelParams<T> p;
    p.config = config;
    p.stem.conv = b.conv(3, f / 4, 7, 2);
    p.stem.bn = b.bn(f / 4);
    p.stem.res1 = b.residual(f / 4, f / 2);
    p.stem.res2 = b.residual(f / 2, f / 2);
    p.stem.res3 = b.residual(f / 2, f);
    for (int s = 0; s < config.num_stacks; ++s) {
        StackParams<T> st;
        for (int l = 0; l < config.hourglass_depth; ++l) {
            HourglassLevel<T> lv;
            lv.skip = b.chain(m, f);
            lv.down = b.chain(m, f);
            lv.up = b.chain(m, f);
            st.hourglass.levels.push_back(std::move(lv));
        }
        st.hourglass.bottom = b.chain(m, f);
        st.post = b.chain(m, f);
        st.head_conv = b.conv(f, f, 1);
        st.head_bn = b.bn(f);
        st.heatmap_conv = b.conv(f, config.num_joints, 1);
        if (s + 1 < config.num_stacks) {
            st.heatmap_remap = b.conv(config.num_joints, f, 1);
            st.feature_remap = b.conv(f, f, 1);
        }
        p.stacks.push_back(std::move(st));
    }
    for (auto& t : p.parameters()) t.set_requires_grad(true);
    return p;
}

template <typename T>
Tensor<T> conv_forward(Graph<T>& g, const Tensor<T>& x, const ConvParams<T>& p) {
    return g.conv2d(x, p.weight, p.bias, p.stride, p.padding);
}

template <typename T>
Tensor<T> residual_forward(Graph<T>& g, const Tensor<T>& x, ResidualParams<T>& p, Mode mode) {
    if (x.rank() != 4 || static_cast<int>(x.dim(1)) != p.in_channels)
        throw std::invalid_argument("residual: expected " + std::to_string(p.in_channels) +
                                    " input channels, got shape " + shape_string(x.shape()));
    Tensor<T> h = g.relu(g.batchnorm(x, p.bn1.gamma, p.bn1.beta, p.bn1.stats, mode));
    h = conv_forward(g, h, p.conv1);
    h = g.relu(g.batchnorm(h, p.bn2.gamma, p.bn2.beta, p.bn2.stats, mode));
    h = conv_forward(g, h, p.conv2);
    h = g.relu(g.batchnorm(h, p.bn3.gamma, p.bn3.beta, p.bn3.stats, mode));
    h = conv_forward(g, h, p.conv3);
    const Tensor<T> shortcut = p.skip ? conv_forward(g, x, *p.skip) : x;
    return g.add(shortcut, h);
}

template <typename T>
Tensor<T> hourglass_forward(Graph<T>& g, const Tensor<T>& x, HourglassParams<T>& p, Mode mode) {
    if (p.levels.empty()) throw std::invalid_argument("hourglass: depth must be >= 1");
    const std::size_t factor = std::size_t{1} << p.levels.size();
    if (x.rank() != 4 || x.dim(2) % factor != 0 || x.dim(3) % factor != 0)
        throw std::invalid_argument("hourglass: spatial size of " + shape_string(x.shape()) +
                                    " is not divisible by 2^" + std::to_string(p.levels.size()));
    return hourglass_level(g, x, p, 0, mode);
}

template <typename T>
Tensor<T> stem_forward(Graph<T>& g, const Tensor<T>& image, StemParams<T>& p, Mode mode) {
    if (image.rank() != 4 || image.dim(1) != 3)
        throw std::invalid_argument("stem: expected an N x 3 x R x R image, got " + shape_string(image.shape()));
    if (image.dim(2) % 4 != 0 || image.dim(3) % 4 != 0)
        throw std::invalid_argument("stem: input resolution " + shape_string(image.shape()) +
                                    " is not divisible by 4");
    Tensor<T> h = conv_forward(g, image, p.conv);
    h = g.relu(g.batchnorm(h, p.bn.gamma, p.bn.beta, p.bn.stats, mode));
    h = residual_forward(g, h, p.res1, mode);
    h = g.maxpool2x2(h);
    h = residual_forward(g, h, p.res2, mode);
    return residual_forward(g, h, p.res3, mode);
}

template <typename T>
std::vector<Tensor<T>> stacked_forward(Graph<T>& g, const Tensor<T>& image, StackedModelParams<T>& p, Mode mode) {
    const auto& c = p.config;
    if (static_cast<int>(p.stacks.size()) != c.num_stacks)
        throw std::invalid_argument("stacked_forward: config names " + std::to_string(c.num_stacks) +
                                    " stacks but parameters hold " + std::to_string(p.stacks.size()));
    if (image.rank() != 4 || static_cast<int>(image.dim(2)) != c.input_resolution ||
        static_cast<int>(image.dim(3)) != c.input_resolution)
        throw std::invalid_argument("stacked_forward: image " + shape_string(image.shape()) +
                                    " does not match input resolution " + std::to_string(c.input_resolution));
    std::vector<Tensor<T>> heatmaps;
    Tensor<T> x = stem_forward(g, image, p.stem, mode);
    for (std::size_t s = 0; s < p.stacks.size(); ++s) {
        auto& st = p.stacks[s];
        Tensor<T> feat = hourglass_forward(g, x, st.hourglass, mode);
        feat = chain_forward(g, feat, st.post, mode);
        Tensor<T> head = conv_forward(g, feat, st.head_conv);
        head = g.relu(g.batchnorm(head, st.head_bn.gamma, st.head_bn.beta, st.head_bn.stats, mode));
        Tensor<T> heat = conv_forward(g, head, st.heatmap_conv);
        heatmaps.push_back(heat);
        if (s + 1 < p.stacks.size()) {
            if (!st.feature_remap || !st.heatmap_remap)
                throw std::invalid_argument("stacked_forward: stack " + std::to_string(s) + " lacks remap convolutions");
            Tensor<T> remapped = g.add(conv_forward(g, feat, *st.feature_remap), conv_forward(g, heat, *st.heatmap_remap));
            x = g.add(x, remapped);
        }
    }
    return heatmaps;
}

template <typename To, typename From>
StackedModelParams<To> convert_params(StackedModelParams<From>& src) {
    StackedModelParams<To> dst = init_params<To>(src.config, 0);
    std::vector<Tensor<From>> from;
    src.for_each_tensor([&](const std::string&, Tensor<From>& t, TensorRole) { from.push_back(t); });
    std::size_t i = 0;
    dst.for_each_tensor([&](const std::string&, Tensor<To>& t, TensorRole) {
        auto in = from[i++].data();
        auto out = t.data();
        for (std::size_t k = 0; k < out.size(); ++k) out[k] = static_cast<To>(in[k]);
    });
    std::vector<std::int64_t> updates;
    src.for_each_batchnorm([&](const std::string&, BatchNormParams<From>& b) { updates.push_back(b.stats.updates); });
    i = 0;
    dst.for_each_batchnorm([&](const std::string&, BatchNormParams<To>& b) { b.stats.updates = updates[i++]; });
    return dst;
}

#define HG_INSTANTIATE(T)                                                                                   \
    template struct StackedModelParams<T>;                                                                  \
    template StackedModelParams<T> init_params<T>(const ModelConfig&, std::uint64_t);                       \
    template Tensor<T> conv_forward(Graph<T>&, const Tensor<T>&, const ConvParams<T>&);                     \
    template Tensor<T> residual_forward(Graph<T>&, const Tensor<T>&, ResidualParams<T>&, Mode);             \
    template Tensor<T> hourglass_forward(Graph<T>&, const Tensor<T>&, HourglassParams<T>&, Mode);           \
    template Tensor<T> stem_forward(Graph<T>&, const Tensor<T>&, StemParams<T>&, Mode);                     \
    template std::vector<Tensor<T>> stacked_forward(Graph<T>&, const Tensor<T>&, StackedModelParams<T>&, Mode);

HG_INSTANTIATE(float)
HG_INSTANTIATE(double)
#undef HG_INSTANTIATE

template StackedModelParams<double> convert_params(StackedModelParams<float>&);
template StackedModelParams<float> convert_params(StackedModelParams<double>&);
template StackedModelParams<float> convert_params(StackedModelParams<float>&);

}  // namespace hg

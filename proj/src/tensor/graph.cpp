#include "hg/graph.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

#include "blas.hpp"

namespace hg {

namespace {

void require_rank4(const Shape& s, const char* op) {
    if (s.size() != 4)
        throw std::invalid_argument(std::string(op) + ": expected a 4-D N,C,H,W tensor, got " + shape_string(s));
}

/// Output columns [lo, hi) whose input column ox * stride - pad + j lies in [0, width).
inline void valid_range(int out_w, int width, int stride, int offset, int& lo, int& hi) {
    lo = offset >= 0 ? 0 : (-offset + stride - 1) / stride;
    hi = width - 1 - offset < 0 ? 0 : (width - 1 - offset) / stride + 1;
    if (hi > out_w) hi = out_w;
    if (lo > hi) lo = hi;
}

template <typename T>
void im2col(const T* src, int channels, int height, int width, int kh, int kw, int stride, int pad, int out_h,
            int out_w, T* col) {
    const int plane = out_h * out_w;
    for (int c = 0; c < channels; ++c) {
        const T* chan = src + static_cast<std::ptrdiff_t>(c) * height * width;
        for (int i = 0; i < kh; ++i) {
            for (int j = 0; j < kw; ++j) {
                T* row = col + static_cast<std::ptrdiff_t>((c * kh + i) * kw + j) * plane;
                int lo, hi;
                valid_range(out_w, width, stride, j - pad, lo, hi);
                for (int oy = 0; oy < out_h; ++oy) {
                    const int y = oy * stride - pad + i;
                    T* dst = row + oy * out_w;
                    if (y < 0 || y >= height) {
                        std::fill(dst, dst + out_w, T(0));
                        continue;
                    }
                    const T* line = chan + static_cast<std::ptrdiff_t>(y) * width;
                    const int off = j - pad;
                    std::fill(dst, dst + lo, T(0));
                    if (stride == 1) {
                        std::copy(line + lo + off, line + hi + off, dst + lo);
                    } else {
                        for (int ox = lo; ox < hi; ++ox) dst[ox] = line[ox * stride + off];
                    }
                    std::fill(dst + hi, dst + out_w, T(0));
                }
            }
        }
    }
}

template <typename T>
void col2im_add(const T* col, int channels, int height, int width, int kh, int kw, int stride, int pad, int out_h,
                int out_w, T* dst) {
    const int plane = out_h * out_w;
    for (int c = 0; c < channels; ++c) {
        T* chan = dst + static_cast<std::ptrdiff_t>(c) * height * width;
        for (int i = 0; i < kh; ++i) {
            for (int j = 0; j < kw; ++j) {
                const T* row = col + static_cast<std::ptrdiff_t>((c * kh + i) * kw + j) * plane;
                int lo, hi;
                valid_range(out_w, width, stride, j - pad, lo, hi);
                for (int oy = 0; oy < out_h; ++oy) {
                    const int y = oy * stride - pad + i;
                    if (y < 0 || y >= height) continue;
                    T* line = chan + static_cast<std::ptrdiff_t>(y) * width;
                    const int off = j - pad;
                    const T* srow = row + oy * out_w;
                    for (int ox = lo; ox < hi; ++ox) line[ox * stride + off] += srow[ox];
                }
            }
        }
    }
}

/// Gradient buffer of `t` if it takes part in differentiation, else empty.
template <typename T>
std::span<T> grad_sink(Tensor<T>& t) {
    return t.requires_grad() ? t.ensure_grad() : std::span<T>{};
}

}  // namespace

template <typename T>
bool Graph<T>::needs_grad(std::initializer_list<const Tensor<T>*> inputs) const {
    if (!record_) return false;
    return std::any_of(inputs.begin(), inputs.end(), [](const Tensor<T>* t) { return t->requires_grad(); });
}

template <typename T>
void Graph<T>::push(std::string op, std::vector<Tensor<T>> inputs, Tensor<T>& output, BackwardFn fn) {
    output.set_requires_grad(true);
    output.mark_non_leaf();
    nodes_.push_back(Node{std::move(op), std::move(inputs), output, std::move(fn)});
}

template <typename T>
void Graph<T>::note(std::string_view op, const Tensor<T>& output) {
    trace_.push_back(OpTrace{std::string(op), output.shape()});
}

template <typename T>
void Graph<T>::mix_signature(std::uint64_t value) {
    signature_ ^= value;
    signature_ *= 1099511628211ULL;
}

template <typename T>
Tensor<T> Graph<T>::conv2d(const Tensor<T>& input, const Tensor<T>& weight, const Tensor<T>& bias, int stride,
                           int padding) {
    require_rank4(input.shape(), "conv2d input");
    require_rank4(weight.shape(), "conv2d weight");
    const int n = static_cast<int>(input.dim(0));
    const int cin = static_cast<int>(input.dim(1));
    const int h = static_cast<int>(input.dim(2));
    const int w = static_cast<int>(input.dim(3));
    const int cout = static_cast<int>(weight.dim(0));
    const int kh = static_cast<int>(weight.dim(2));
    const int kw = static_cast<int>(weight.dim(3));
    if (static_cast<int>(weight.dim(1)) != cin)
        throw std::invalid_argument("conv2d: input has " + std::to_string(cin) + " channels but weight " +
                                    shape_string(weight.shape()) + " expects " + std::to_string(weight.dim(1)));
    if (bias.numel() != static_cast<std::size_t>(cout))
        throw std::invalid_argument("conv2d: bias " + shape_string(bias.shape()) + " does not match " +
                                    std::to_string(cout) + " output channels");
    if (stride < 1) throw std::invalid_argument("conv2d: stride must be >= 1");
    if (padding < 0) throw std::invalid_argument("conv2d: padding must be >= 0");
    if (h + 2 * padding < kh || w + 2 * padding < kw)
        throw std::invalid_argument("conv2d: kernel " + shape_string(weight.shape()) + " larger than padded input " +
                                    shape_string(input.shape()));

    const int oh = (h + 2 * padding - kh) / stride + 1;
    const int ow = (w + 2 * padding - kw) / stride + 1;
    const int ck = cin * kh * kw;
    const int plane = oh * ow;
    const bool pointwise = kh == 1 && kw == 1 && stride == 1 && padding == 0;

    Tensor<T> out(Shape{static_cast<std::size_t>(n), static_cast<std::size_t>(cout), static_cast<std::size_t>(oh),
                        static_cast<std::size_t>(ow)});
    std::vector<T> col(pointwise ? 0 : static_cast<std::size_t>(ck) * plane);
    const T* x = input.data().data();
    const T* wt = weight.data().data();
    const T* b = bias.data().data();
    T* y = out.data().data();
    for (int s = 0; s < n; ++s) {
        const T* src = x + static_cast<std::ptrdiff_t>(s) * cin * h * w;
        const T* cols = src;
        if (!pointwise) {
            im2col(src, cin, h, w, kh, kw, stride, padding, oh, ow, col.data());
            cols = col.data();
        }
        T* dst = y + static_cast<std::ptrdiff_t>(s) * cout * plane;
        detail::gemm(false, false, cout, plane, ck, T(1), wt, ck, cols, plane, T(0), dst, plane);
        for (int c = 0; c < cout; ++c) {
            T* row = dst + static_cast<std::ptrdiff_t>(c) * plane;
            const T bc = b[c];
            for (int p = 0; p < plane; ++p) row[p] += bc;
        }
    }
    note("conv2d", out);

    if (needs_grad({&input, &weight, &bias})) {
        Tensor<T> in = input, wgt = weight, bs = bias, o = out;
        push("conv2d", {input, weight, bias}, out, [=]() mutable {
            const T* dy = o.grad().data();
            auto dx = grad_sink(in);
            auto dw = grad_sink(wgt);
            auto db = grad_sink(bs);
            const T* xv = in.data().data();
            const T* wv = wgt.data().data();
            std::vector<T> buf(pointwise ? 0 : static_cast<std::size_t>(ck) * plane);
            // This op's contribution is summed locally and added to the gradient
            // buffers once, so repeated backward passes accumulate exactly.
            std::vector<T> wsum(dw.empty() ? 0 : dw.size(), T(0));
            std::vector<T> bsum(db.empty() ? 0 : db.size(), T(0));
            std::vector<T> xsum(dx.empty() ? 0 : static_cast<std::size_t>(cin) * h * w);
            for (int s = 0; s < n; ++s) {
                const T* dys = dy + static_cast<std::ptrdiff_t>(s) * cout * plane;
                if (!db.empty()) {
                    for (int c = 0; c < cout; ++c) {
                        const T* row = dys + static_cast<std::ptrdiff_t>(c) * plane;
                        T acc = 0;
                        for (int p = 0; p < plane; ++p) acc += row[p];
                        bsum[c] += acc;
                    }
                }
                if (!dw.empty()) {
                    const T* src = xv + static_cast<std::ptrdiff_t>(s) * cin * h * w;
                    const T* cols = src;
                    if (!pointwise) {
                        im2col(src, cin, h, w, kh, kw, stride, padding, oh, ow, buf.data());
                        cols = buf.data();
                    }
                    detail::gemm(false, true, cout, ck, plane, T(1), dys, plane, cols, plane, T(s > 0 ? 1 : 0),
                                 wsum.data(), ck);
                }
                if (!dx.empty()) {
                    if (pointwise) {
                        detail::gemm(true, false, ck, plane, cout, T(1), wv, ck, dys, plane, T(0), xsum.data(), plane);
                    } else {
                        std::fill(xsum.begin(), xsum.end(), T(0));
                        detail::gemm(true, false, ck, plane, cout, T(1), wv, ck, dys, plane, T(0), buf.data(), plane);
                        col2im_add(buf.data(), cin, h, w, kh, kw, stride, padding, oh, ow, xsum.data());
                    }
                    T* dxs = dx.data() + static_cast<std::ptrdiff_t>(s) * cin * h * w;
                    for (std::size_t i = 0; i < xsum.size(); ++i) dxs[i] += xsum[i];
                }
            }
            for (std::size_t i = 0; i < wsum.size(); ++i) dw[i] += wsum[i];
            for (std::size_t i = 0; i < bsum.size(); ++i) db[i] += bsum[i];
        });
    }
    return out;
}

template <typename T>
Tensor<T> Graph<T>::maxpool2x2(const Tensor<T>& input) {
    require_rank4(input.shape(), "maxpool2x2");
    const std::size_t n = input.dim(0), c = input.dim(1), h = input.dim(2), w = input.dim(3);
    if (h % 2 || w % 2)
        throw std::invalid_argument("maxpool2x2: spatial dimensions must be even, got " + shape_string(input.shape()));
    const std::size_t oh = h / 2, ow = w / 2;
    Tensor<T> out(Shape{n, c, oh, ow});
    std::vector<std::uint8_t> winner(out.numel());
    const T* x = input.data().data();
    T* y = out.data().data();
    std::size_t o = 0;
    std::uint64_t sig = 0;
    for (std::size_t plane = 0; plane < n * c; ++plane) {
        const T* src = x + plane * h * w;
        for (std::size_t oy = 0; oy < oh; ++oy) {
            for (std::size_t ox = 0; ox < ow; ++ox, ++o) {
                const T* base = src + 2 * oy * w + 2 * ox;
                const T cand[4] = {base[0], base[1], base[w], base[w + 1]};
                std::uint8_t best = 0;
                for (std::uint8_t k = 1; k < 4; ++k)
                    if (cand[k] > cand[best]) best = k;
                winner[o] = best;
                y[o] = cand[best];
                sig = sig * 31 + best;
            }
        }
    }
    if (track_kinks_) mix_signature(sig);
    note("maxpool2x2", out);

    if (needs_grad({&input})) {
        Tensor<T> in = input, res = out;
        push("maxpool2x2", {input}, out, [in, res, winner = std::move(winner), n, c, h, w, oh, ow]() mutable {
            auto dx = in.ensure_grad();
            const T* dy = res.grad().data();
            std::size_t o = 0;
            for (std::size_t plane = 0; plane < n * c; ++plane) {
                T* dst = dx.data() + plane * h * w;
                for (std::size_t oy = 0; oy < oh; ++oy) {
                    for (std::size_t ox = 0; ox < ow; ++ox, ++o) {
                        const std::uint8_t k = winner[o];
                        dst[(2 * oy + (k >> 1)) * w + 2 * ox + (k & 1)] += dy[o];
                    }
                }
            }
        });
    }
    return out;
}

template <typename T>
Tensor<T> Graph<T>::upsample_nearest2x(const Tensor<T>& input) {
    require_rank4(input.shape(), "upsample_nearest2x");
    const std::size_t n = input.dim(0), c = input.dim(1), h = input.dim(2), w = input.dim(3);
    const std::size_t oh = 2 * h, ow = 2 * w;
    Tensor<T> out(Shape{n, c, oh, ow});
    const T* x = input.data().data();
    T* y = out.data().data();
    for (std::size_t plane = 0; plane < n * c; ++plane) {
        const T* src = x + plane * h * w;
        T* dst = y + plane * oh * ow;
        for (std::size_t oy = 0; oy < oh; ++oy)
            for (std::size_t ox = 0; ox < ow; ++ox) dst[oy * ow + ox] = src[(oy / 2) * w + ox / 2];
    }
    note("upsample_nearest2x", out);

    if (needs_grad({&input})) {
        Tensor<T> in = input, res = out;
        push("upsample_nearest2x", {input}, out, [in, res, n, c, h, w, oh, ow]() mutable {
            auto dx = in.ensure_grad();
            const T* dy = res.grad().data();
            for (std::size_t plane = 0; plane < n * c; ++plane) {
                const T* src = dy + plane * oh * ow;
                T* dst = dx.data() + plane * h * w;
                for (std::size_t y = 0; y < h; ++y)
                    for (std::size_t x = 0; x < w; ++x) {
                        const T* top = src + 2 * y * ow + 2 * x;
                        dst[y * w + x] += (top[0] + top[1]) + (top[ow] + top[ow + 1]);
                    }
            }
        });
    }
    return out;
}

template <typename T>
Tensor<T> Graph<T>::batchnorm(const Tensor<T>& input, const Tensor<T>& gamma, const Tensor<T>& beta,
                              BatchNormStats<T>& stats, Mode mode) {
    require_rank4(input.shape(), "batchnorm");
    const std::size_t n = input.dim(0), c = input.dim(1), hw = input.dim(2) * input.dim(3);
    const std::size_t m = n * hw;
    if (gamma.numel() != c || beta.numel() != c)
        throw std::invalid_argument("batchnorm: gamma/beta must have " + std::to_string(c) + " entries");
    if (stats.mean.numel() != c || stats.var.numel() != c)
        throw std::invalid_argument("batchnorm: running statistics must have " + std::to_string(c) + " entries");

    // Per-channel affine normalization xhat = (x - mean) * invstd.
    std::vector<T> mean(c), invstd(c);
    const T* x = input.data().data();

    if (mode == Mode::train) {
        if (m < 2) throw std::invalid_argument("batchnorm: train mode needs at least 2 values per channel");
        const T mom = static_cast<T>(kBatchNormMomentum);
        auto rm = stats.mean.data();
        auto rv = stats.var.data();
        for (std::size_t ch = 0; ch < c; ++ch) {
            double s = 0;
            for (std::size_t b = 0; b < n; ++b) {
                const T* p = x + (b * c + ch) * hw;
                T part = 0;
                for (std::size_t i = 0; i < hw; ++i) part += p[i];
                s += part;
            }
            const double mu = s / static_cast<double>(m);
            const T mu_t = static_cast<T>(mu);
            double sq = 0;
            for (std::size_t b = 0; b < n; ++b) {
                const T* p = x + (b * c + ch) * hw;
                T part = 0;
                for (std::size_t i = 0; i < hw; ++i) {
                    const T d = p[i] - mu_t;
                    part += d * d;
                }
                sq += part;
            }
            const double var = sq / static_cast<double>(m);
            mean[ch] = mu_t;
            invstd[ch] = static_cast<T>(1.0 / std::sqrt(var + kBatchNormEpsilon));
            rm[ch] = (T(1) - mom) * rm[ch] + mom * mu_t;
            rv[ch] = (T(1) - mom) * rv[ch] + mom * static_cast<T>(var * m / (m - 1));
        }
        ++stats.updates;
    } else {
        if (!stats.recorded())
            throw std::logic_error("batchnorm: eval mode requested before any running statistics were recorded");
        auto rm = stats.mean.data();
        auto rv = stats.var.data();
        for (std::size_t ch = 0; ch < c; ++ch) {
            mean[ch] = rm[ch];
            invstd[ch] = static_cast<T>(1.0 / std::sqrt(static_cast<double>(rv[ch]) + kBatchNormEpsilon));
        }
    }

    Tensor<T> out(input.shape());
    T* y = out.data().data();
    const T* g = gamma.data().data();
    const T* bt = beta.data().data();
    for (std::size_t b = 0; b < n; ++b)
        for (std::size_t ch = 0; ch < c; ++ch) {
            const std::size_t off = (b * c + ch) * hw;
            const T mu = mean[ch], is = invstd[ch], gm = g[ch], sh = bt[ch];
            for (std::size_t i = 0; i < hw; ++i) y[off + i] = gm * ((x[off + i] - mu) * is) + sh;
        }
    note("batchnorm", out);

    if (needs_grad({&input, &gamma, &beta})) {
        Tensor<T> in = input, gm = gamma, bt_t = beta, res = out;
        const bool train = mode == Mode::train;
        push("batchnorm", {input, gamma, beta}, out,
             [in, gm, bt_t, res, mean = std::move(mean), invstd = std::move(invstd), n, c, hw, m, train]() mutable {
                 const T* dy = res.grad().data();
                 const T* x = in.data().data();
                 auto dx = grad_sink(in);
                 auto dg = grad_sink(gm);
                 auto db = grad_sink(bt_t);
                 const T* g = gm.data().data();
                 for (std::size_t ch = 0; ch < c; ++ch) {
                     const T mu = mean[ch], is = invstd[ch];
                     double sdy = 0, sdyx = 0;
                     for (std::size_t b = 0; b < n; ++b) {
                         const std::size_t off = (b * c + ch) * hw;
                         T a = 0, ax = 0;
                         for (std::size_t i = 0; i < hw; ++i) {
                             a += dy[off + i];
                             ax += dy[off + i] * ((x[off + i] - mu) * is);
                         }
                         sdy += a;
                         sdyx += ax;
                     }
                     if (!dg.empty()) dg[ch] += static_cast<T>(sdyx);
                     if (!db.empty()) db[ch] += static_cast<T>(sdy);
                     if (dx.empty()) continue;
                     const T scale = g[ch] * is;
                     if (train) {
                         const T mdy = static_cast<T>(sdy / static_cast<double>(m));
                         const T mdyx = static_cast<T>(sdyx / static_cast<double>(m));
                         for (std::size_t b = 0; b < n; ++b) {
                             const std::size_t off = (b * c + ch) * hw;
                             for (std::size_t i = 0; i < hw; ++i)
                                 dx[off + i] += scale * (dy[off + i] - mdy - ((x[off + i] - mu) * is) * mdyx);
                         }
                     } else {
                         for (std::size_t b = 0; b < n; ++b) {
                             const std::size_t off = (b * c + ch) * hw;
                             for (std::size_t i = 0; i < hw; ++i) dx[off + i] += scale * dy[off + i];
                         }
                     }
                 }
             });
    }
    return out;
}

template <typename T>
Tensor<T> Graph<T>::relu(const Tensor<T>& input) {
    Tensor<T> out(input.shape());
    auto x = input.data();
    auto y = out.data();
    for (std::size_t i = 0; i < x.size(); ++i) y[i] = x[i] > T(0) ? x[i] : T(0);
    if (track_kinks_) {
        std::uint64_t sig = 0;
        for (std::size_t i = 0; i < x.size(); ++i) sig = sig * 3 + (x[i] > T(0) ? 1 : 2);
        mix_signature(sig);
    }
    note("relu", out);
    if (needs_grad({&input})) {
        Tensor<T> in = input, res = out;
        push("relu", {input}, out, [in, res]() mutable {
            auto dx = in.ensure_grad();
            auto dy = res.grad();
            auto x = in.data();
            for (std::size_t i = 0; i < dx.size(); ++i)
                if (x[i] > T(0)) dx[i] += dy[i];
        });
    }
    return out;
}

template <typename T>
Tensor<T> Graph<T>::add(const Tensor<T>& a, const Tensor<T>& b) {
    if (a.shape() != b.shape())
        throw std::invalid_argument("add: shape mismatch " + shape_string(a.shape()) + " vs " +
                                    shape_string(b.shape()));
    Tensor<T> out(a.shape());
    auto x = a.data();
    auto z = b.data();
    auto y = out.data();
    for (std::size_t i = 0; i < y.size(); ++i) y[i] = x[i] + z[i];
    note("add", out);
    if (needs_grad({&a, &b})) {
        Tensor<T> lhs = a, rhs = b, res = out;
        push("add", {a, b}, out, [lhs, rhs, res]() mutable {
            auto dy = res.grad();
            for (Tensor<T>* t : {&lhs, &rhs}) {
                auto d = grad_sink(*t);
                for (std::size_t i = 0; i < d.size(); ++i) d[i] += dy[i];
            }
        });
    }
    return out;
}

template <typename T>
Tensor<T> Graph<T>::mse_loss(const Tensor<T>& pred, const Tensor<T>& target) {
    if (pred.shape() != target.shape())
        throw std::invalid_argument("mse_loss: shape mismatch " + shape_string(pred.shape()) + " vs " +
                                    shape_string(target.shape()));
    auto p = pred.data();
    auto t = target.data();
    double acc = 0;
    for (std::size_t i = 0; i < p.size(); ++i) {
        const double d = static_cast<double>(p[i]) - t[i];
        acc += d * d;
    }
    const double count = static_cast<double>(p.size());
    Tensor<T> out(Shape{1}, static_cast<T>(acc / count));
    note("mse_loss", out);
    if (needs_grad({&pred, &target})) {
        Tensor<T> pr = pred, tg = target, res = out;
        push("mse_loss", {pred, target}, out, [pr, tg, res, count]() mutable {
            const T g = res.grad()[0];
            const T k = static_cast<T>(2.0 / count) * g;
            auto p = pr.data();
            auto t = tg.data();
            auto dp = grad_sink(pr);
            auto dt = grad_sink(tg);
            for (std::size_t i = 0; i < p.size(); ++i) {
                const T d = k * (p[i] - t[i]);
                if (!dp.empty()) dp[i] += d;
                if (!dt.empty()) dt[i] -= d;
            }
        });
    }
    return out;
}

template <typename T>
Tensor<T> Graph<T>::sum(const Tensor<T>& input) {
    double acc = 0;
    for (T v : input.data()) acc += v;
    Tensor<T> out(Shape{1}, static_cast<T>(acc));
    note("sum", out);
    if (needs_grad({&input})) {
        Tensor<T> in = input, res = out;
        push("sum", {input}, out, [in, res]() mutable {
            const T g = res.grad()[0];
            for (auto& d : in.ensure_grad()) d += g;
        });
    }
    return out;
}

template <typename T>
Tensor<T> Graph<T>::weighted_sum(const Tensor<T>& input, const Tensor<T>& weights) {
    if (input.shape() != weights.shape())
        throw std::invalid_argument("weighted_sum: shape mismatch " + shape_string(input.shape()) + " vs " +
                                    shape_string(weights.shape()));
    auto x = input.data();
    auto w = weights.data();
    double acc = 0;
    for (std::size_t i = 0; i < x.size(); ++i) acc += static_cast<double>(x[i]) * w[i];
    Tensor<T> out(Shape{1}, static_cast<T>(acc));
    note("weighted_sum", out);
    if (needs_grad({&input, &weights})) {
        Tensor<T> in = input, wt = weights, res = out;
        push("weighted_sum", {input, weights}, out, [in, wt, res]() mutable {
            const T g = res.grad()[0];
            auto x = in.data();
            auto w = wt.data();
            auto dx = grad_sink(in);
            auto dw = grad_sink(wt);
            for (std::size_t i = 0; i < dx.size(); ++i) dx[i] += g * w[i];
            for (std::size_t i = 0; i < dw.size(); ++i) dw[i] += g * x[i];
        });
    }
    return out;
}

template <typename T>
Tensor<T> Graph<T>::record(std::string op, std::vector<Tensor<T>> inputs, Tensor<T> output, BackwardFn backward) {
    note(op, output);
    const bool any = record_ && std::any_of(inputs.begin(), inputs.end(),
                                            [](const Tensor<T>& t) { return t.requires_grad(); });
    if (any) push(std::move(op), std::move(inputs), output, std::move(backward));
    return output;
}

template <typename T>
void Graph<T>::backward(const Tensor<T>& loss) {
    if (!loss.defined() || loss.numel() != 1)
        throw std::invalid_argument("backward: loss must be a scalar, got shape " +
                                    (loss.defined() ? shape_string(loss.shape()) : std::string("<undefined>")));
    if (!loss.requires_grad())
        throw std::logic_error("backward: loss does not depend on any tensor that requires a gradient");
    for (auto& node : nodes_) node.output.drop_grad();
    Tensor<T> root = loss;
    root.ensure_grad()[0] += T(1);
    for (auto it = nodes_.rbegin(); it != nodes_.rend(); ++it)
        if (it->output.has_grad()) it->backward();
}

template <typename T>
std::size_t Graph<T>::count(std::string_view op) const {
    return static_cast<std::size_t>(
        std::count_if(trace_.begin(), trace_.end(), [&](const OpTrace& t) { return t.op == op; }));
}

template <typename T>
void Graph<T>::clear() {
    nodes_.clear();
    trace_.clear();
    signature_ = 1469598103934665603ULL;
}

template class Graph<float>;
template class Graph<double>;

}  // namespace hg

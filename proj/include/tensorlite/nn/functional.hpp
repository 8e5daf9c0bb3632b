#pragma once

#include <cmath>
#include <cstdint>
#include <numbers>
#include <optional>
#include <random>
#include <span>
#include <string>
#include <vector>

#include "tensorlite/ops.hpp"

namespace tensorlite::nn {

enum class Mode { train, eval };

/// GELU is the exact Gaussian-CDF form x·Φ(x) via std::erf. No tanh
/// approximation is compiled in.
inline constexpr bool kGeluExact = true;

// Activations. Each is a single recorded primitive with its own pullback.

inline Tensor relu(const Tensor& x) {
    auto out = kernels::map_unary(x, [](float v) { return v > 0.0f ? v : 0.0f; });
    return autograd::record("relu", {x}, out, [x = x.detach()](const Tensor& g) {
        return std::vector<Tensor>{kernels::map_binary(g, x, [](float gv, float xv) { return xv > 0.0f ? gv : 0.0f; })};
    });
}

inline Tensor sigmoid(const Tensor& x) {
    auto out = kernels::map_unary(x, [](float v) { return 1.0f / (1.0f + std::exp(-v)); });
    return autograd::record(
        "sigmoid", {x}, out,
        [s = out.detach()](const Tensor& g) {
            return std::vector<Tensor>{
                kernels::map_binary(g, s, [](float gv, float sv) { return gv * sv * (1.0f - sv); })};
        },
        {out});
}

inline Tensor tanh(const Tensor& x) {
    auto out = kernels::map_unary(x, [](float v) { return std::tanh(v); });
    return autograd::record(
        "tanh", {x}, out,
        [t = out.detach()](const Tensor& g) {
            return std::vector<Tensor>{kernels::map_binary(g, t, [](float gv, float tv) { return gv * (1.0f - tv * tv); })};
        },
        {out});
}

inline Tensor gelu(const Tensor& x) {
    constexpr float inv_sqrt2 = static_cast<float>(1.0 / std::numbers::sqrt2);
    constexpr float inv_sqrt2pi = static_cast<float>(std::numbers::inv_sqrtpi / std::numbers::sqrt2);
    auto out = kernels::map_unary(x, [](float v) { return 0.5f * v * (1.0f + std::erf(v * inv_sqrt2)); });
    return autograd::record("gelu", {x}, out, [x = x.detach()](const Tensor& g) {
        return std::vector<Tensor>{kernels::map_binary(g, x, [](float gv, float v) {
            const float cdf = 0.5f * (1.0f + std::erf(v * inv_sqrt2));
            const float pdf = std::exp(-0.5f * v * v) * inv_sqrt2pi;
            return gv * (cdf + v * pdf);
        })};
    });
}

enum class Activation { relu, sigmoid, tanh, gelu };

inline Tensor activation(Activation kind, const Tensor& x) {
    switch (kind) {
        case Activation::relu: return relu(x);
        case Activation::sigmoid: return sigmoid(x);
        case Activation::tanh: return tanh(x);
        case Activation::gelu: return gelu(x);
    }
    return x;
}

/// x Wᵀ + 1 bᵀ for x (b×d_in), W (d_out×d_in), b (d_out).
inline Tensor dense(const Tensor& x, const Tensor& weight, const Tensor& bias) {
    if (bias.defined() && (bias.rank() != 1 || weight.rank() != 2 || bias.shape()[0] != weight.shape()[0]))
        throw ShapeError("dense bias " + bias.shape().str() + " does not match weight " + weight.shape().str());
    auto y = matmul(x, weight);
    return bias.defined() ? add(y, bias) : y;
}

/// 2-D convolution geometry. Zero padding on both sides of each spatial axis.
struct ConvSpec {
    std::int64_t in_channels = 1;
    std::int64_t out_channels = 1;
    std::int64_t kernel_h = 1;
    std::int64_t kernel_w = 1;
    std::int64_t stride = 1;
    std::int64_t padding = 0;

    std::int64_t out_h(std::int64_t h) const { return (h + 2 * padding - kernel_h) / stride + 1; }
    std::int64_t out_w(std::int64_t w) const { return (w + 2 * padding - kernel_w) / stride + 1; }
};

namespace detail {

struct ConvDims {
    std::int64_t b, cin, h, w, cout, kh, kw, oh, ow, s, p;
};

inline ConvDims conv_dims(const Tensor& x, const ConvSpec& spec, const Tensor& weight, const Tensor& bias) {
    if (spec.stride < 1) throw ValueError("conv2d stride must be positive");
    if (spec.padding < 0) throw ValueError("conv2d padding must be nonnegative");
    if (x.rank() != 4) throw ShapeError("conv2d expects input (b, c, h, w), got " + x.shape().str());
    const Shape wshape{spec.out_channels, spec.in_channels, spec.kernel_h, spec.kernel_w};
    if (weight.shape() != wshape)
        throw ShapeError("conv2d weight " + weight.shape().str() + " does not match expected " + wshape.str());
    if (x.shape()[1] != spec.in_channels)
        throw ShapeError("conv2d input has " + std::to_string(x.shape()[1]) + " channels, expected " +
                         std::to_string(spec.in_channels));
    if (bias.defined() && bias.shape() != Shape{spec.out_channels})
        throw ShapeError("conv2d bias " + bias.shape().str() + " does not match " + std::to_string(spec.out_channels) +
                         " output channels");
    const auto h = x.shape()[2];
    const auto w = x.shape()[3];
    if (h + 2 * spec.padding < spec.kernel_h || w + 2 * spec.padding < spec.kernel_w)
        throw ShapeError("conv2d kernel larger than padded input " + x.shape().str());
    return {x.shape()[0], spec.in_channels, h, w, spec.out_channels, spec.kernel_h, spec.kernel_w,
            spec.out_h(h), spec.out_w(w), spec.stride, spec.padding};
}

}  // namespace detail

/// y[n,c,i,j] = bias[c] + Σ_{c',u,v} w[c,c',u,v] · x[n, c', i·s+u−p, j·s+v−p],
/// with out-of-range input positions read as zero. Recorded as one
/// primitive; the pullback returns x̄ (transposed correlation of ȳ with w),
/// w̄ (correlation of x with ȳ) and the bias gradient.
inline Tensor conv2d(const Tensor& x, const ConvSpec& spec, const Tensor& weight, const Tensor& bias = {}) {
    const auto d = detail::conv_dims(x, spec, weight, bias);
    const Tensor xc = x.contiguous();
    const Tensor wc = weight.contiguous();
    const Tensor bc = bias.defined() ? bias.contiguous() : Tensor{};
    Tensor out = Tensor::zeros(Shape{d.b, d.cout, d.oh, d.ow});
    {
        const float* px = xc.data();
        const float* pw = wc.data();
        const float* pb = bc.defined() ? bc.data() : nullptr;
        float* py = out.storage()->data.data();
        parallel_for(
            d.b * d.cout,
            [&](std::int64_t s0, std::int64_t s1) {
                for (std::int64_t nc = s0; nc < s1; ++nc) {
                    const auto n = nc / d.cout;
                    const auto c = nc % d.cout;
                    float* yo = py + nc * d.oh * d.ow;
                    for (std::int64_t i = 0; i < d.oh; ++i)
                        for (std::int64_t j = 0; j < d.ow; ++j) {
                            float acc = 0.0f;
                            for (std::int64_t ci = 0; ci < d.cin; ++ci) {
                                const float* xi = px + (n * d.cin + ci) * d.h * d.w;
                                const float* wi = pw + (c * d.cin + ci) * d.kh * d.kw;
                                for (std::int64_t u = 0; u < d.kh; ++u) {
                                    const auto r = i * d.s + u - d.p;
                                    if (r < 0 || r >= d.h) continue;
                                    for (std::int64_t v = 0; v < d.kw; ++v) {
                                        const auto q = j * d.s + v - d.p;
                                        if (q < 0 || q >= d.w) continue;
                                        acc += wi[u * d.kw + v] * xi[r * d.w + q];
                                    }
                                }
                            }
                            yo[i * d.ow + j] = pb ? acc + pb[c] : acc;
                        }
                }
            },
            1);
    }

    auto pullback = [d, xc = xc.detach(), wc = wc.detach(), has_bias = bias.defined()](const Tensor& g) {
        const Tensor gc = g.contiguous();
        const float* pg = gc.data();
        const float* px = xc.data();
        const float* pw = wc.data();
        Tensor gx = Tensor::zeros(xc.shape());
        Tensor gw = Tensor::zeros(wc.shape());
        float* pgx = gx.storage()->data.data();
        float* pgw = gw.storage()->data.data();
        parallel_for(
            d.b,
            [&](std::int64_t n0, std::int64_t n1) {
                for (std::int64_t n = n0; n < n1; ++n)
                    for (std::int64_t c = 0; c < d.cout; ++c) {
                        const float* go = pg + (n * d.cout + c) * d.oh * d.ow;
                        for (std::int64_t ci = 0; ci < d.cin; ++ci) {
                            float* gxi = pgx + (n * d.cin + ci) * d.h * d.w;
                            const float* wi = pw + (c * d.cin + ci) * d.kh * d.kw;
                            for (std::int64_t i = 0; i < d.oh; ++i)
                                for (std::int64_t j = 0; j < d.ow; ++j) {
                                    const float gv = go[i * d.ow + j];
                                    for (std::int64_t u = 0; u < d.kh; ++u) {
                                        const auto r = i * d.s + u - d.p;
                                        if (r < 0 || r >= d.h) continue;
                                        for (std::int64_t v = 0; v < d.kw; ++v) {
                                            const auto q = j * d.s + v - d.p;
                                            if (q < 0 || q >= d.w) continue;
                                            gxi[r * d.w + q] += gv * wi[u * d.kw + v];
                                        }
                                    }
                                }
                        }
                    }
            },
            1);
        parallel_for(
            d.cout,
            [&](std::int64_t c0, std::int64_t c1) {
                for (std::int64_t c = c0; c < c1; ++c)
                    for (std::int64_t ci = 0; ci < d.cin; ++ci) {
                        float* gwi = pgw + (c * d.cin + ci) * d.kh * d.kw;
                        for (std::int64_t u = 0; u < d.kh; ++u)
                            for (std::int64_t v = 0; v < d.kw; ++v) {
                                float acc = 0.0f;
                                for (std::int64_t n = 0; n < d.b; ++n) {
                                    const float* go = pg + (n * d.cout + c) * d.oh * d.ow;
                                    const float* xi = px + (n * d.cin + ci) * d.h * d.w;
                                    for (std::int64_t i = 0; i < d.oh; ++i) {
                                        const auto r = i * d.s + u - d.p;
                                        if (r < 0 || r >= d.h) continue;
                                        for (std::int64_t j = 0; j < d.ow; ++j) {
                                            const auto q = j * d.s + v - d.p;
                                            if (q < 0 || q >= d.w) continue;
                                            acc += go[i * d.ow + j] * xi[r * d.w + q];
                                        }
                                    }
                                }
                                gwi[u * d.kw + v] = acc;
                            }
                    }
            },
            1);
        std::vector<Tensor> grads{gx, gw};
        if (has_bias) grads.push_back(sum(g, std::vector<std::int64_t>{0, 2, 3}));
        return grads;
    };

    if (bias.defined()) return autograd::record("conv2d", {x, weight, bias}, out, std::move(pullback));
    return autograd::record("conv2d", {x, weight}, out, std::move(pullback));
}

/// Batch normalization over the batch axis of x (b×d).
///
/// Train mode normalizes with the batch mean and biased batch variance
/// (divide by b), is differentiable through both, and updates the running
/// buffers in place as running ← (1−momentum)·running + momentum·batch.
/// Eval mode normalizes with the running buffers, which are constants.
inline Tensor batch_norm(const Tensor& x, const Tensor& gamma, const Tensor& beta, Tensor running_mean,
                         Tensor running_var, Mode mode, float eps = 1e-5f, float momentum = 0.1f) {
    if (x.rank() != 2) throw ShapeError("batch_norm expects (b, d) activations, got " + x.shape().str());
    const Shape feat{x.shape()[1]};
    for (const Tensor* t : std::initializer_list<const Tensor*>{&gamma, &beta, &running_mean, &running_var})
        if (t->shape() != feat)
            throw ShapeError("batch_norm parameter " + t->shape().str() + " does not match " +
                             std::to_string(feat[0]) + " features");
    if (mode == Mode::eval) {
        const auto scale = autograd::no_grad([&] { return div(Tensor::ones(feat), sqrt(add(running_var, eps))); });
        return add(mul(mul(sub(x, running_mean.detach()), scale), gamma), beta);
    }
    if (x.shape()[0] < 1) throw ShapeError("batch_norm in train mode needs at least one row");
    const std::vector<std::int64_t> batch_axis{0};
    const auto mu = mean(x, batch_axis);
    const auto centered = sub(x, mu);
    const auto var = mean(mul(centered, centered), batch_axis);
    const auto normalized = div(centered, sqrt(add(var, eps)));
    autograd::no_grad([&] {
        const auto m = mu.to_vector();
        const auto v = var.to_vector();
        auto rm = running_mean.mutable_span();
        auto rv = running_var.mutable_span();
        for (std::size_t i = 0; i < rm.size(); ++i) {
            rm[i] = (1.0f - momentum) * rm[i] + momentum * m[i];
            rv[i] = (1.0f - momentum) * rv[i] + momentum * v[i];
        }
    });
    return add(mul(normalized, gamma), beta);
}

/// Inverted dropout: in train mode each element is zeroed with probability
/// p and survivors are scaled by 1/(1−p). The mask depends only on `seed`.
/// Eval mode and p = 0 return `x` itself.
inline Tensor dropout(const Tensor& x, float p, Mode mode, std::uint64_t seed) {
    if (!(p >= 0.0f && p < 1.0f)) throw ValueError("dropout probability must be in [0, 1), got " + std::to_string(p));
    if (mode == Mode::eval || p == 0.0f) return x;
    std::mt19937_64 rng(seed);
    std::bernoulli_distribution keep(1.0 - static_cast<double>(p));
    const float scale = 1.0f / (1.0f - p);
    std::vector<float> mask(static_cast<std::size_t>(x.numel()));
    for (auto& m : mask) m = keep(rng) ? scale : 0.0f;
    return mul(x, Tensor::from_values(x.shape(), std::move(mask)));
}

/// Mean cross-entropy of logits (b×C) against 0-based class labels, using
/// a max-shifted log-sum-exp. Pullback: (softmax − onehot)/b.
inline Tensor cross_entropy(const Tensor& logits, std::span<const std::int64_t> labels) {
    if (logits.rank() != 2) throw ShapeError("cross_entropy expects (b, C) logits, got " + logits.shape().str());
    const auto b = logits.shape()[0];
    const auto classes = logits.shape()[1];
    if (static_cast<std::int64_t>(labels.size()) != b)
        throw ShapeError("cross_entropy got " + std::to_string(labels.size()) + " labels for " + std::to_string(b) +
                         " rows");
    for (auto y : labels)
        if (y < 0 || y >= classes)
            throw ValueError("label " + std::to_string(y) + " out of range [0, " + std::to_string(classes) + ")");
    const Tensor z = logits.contiguous();
    const float* pz = z.data();
    std::vector<float> softmax(static_cast<std::size_t>(b * classes));
    float total = 0.0f;
    for (std::int64_t i = 0; i < b; ++i) {
        const float* row = pz + i * classes;
        float m = row[0];
        for (std::int64_t c = 1; c < classes; ++c) m = std::max(m, row[c]);
        float denom = 0.0f;
        for (std::int64_t c = 0; c < classes; ++c) denom += std::exp(row[c] - m);
        for (std::int64_t c = 0; c < classes; ++c) softmax[i * classes + c] = std::exp(row[c] - m) / denom;
        total += (m + std::log(denom)) - row[labels[i]];
    }
    auto out = Tensor::scalar(total / static_cast<float>(b));
    return autograd::record(
        "cross_entropy", {logits}, out,
        [softmax = std::move(softmax), targets = std::vector<std::int64_t>(labels.begin(), labels.end()), b,
         classes](const Tensor& g) {
            const float scale = g.item() / static_cast<float>(b);
            std::vector<float> grad(softmax.size());
            for (std::int64_t i = 0; i < b; ++i)
                for (std::int64_t c = 0; c < classes; ++c) {
                    const float onehot = c == targets[i] ? 1.0f : 0.0f;
                    grad[i * classes + c] = (softmax[i * classes + c] - onehot) * scale;
                }
            return std::vector<Tensor>{Tensor::from_values(Shape{b, classes}, std::move(grad))};
        });
}

inline Tensor cross_entropy(const Tensor& logits, const std::vector<std::int64_t>& labels) {
    return cross_entropy(logits, std::span<const std::int64_t>(labels));
}

/// Mean over all elements of (x − target)².
inline Tensor mse(const Tensor& x, const Tensor& target) {
    if (x.shape() != target.shape())
        throw ShapeError("mse operands differ in shape: " + x.shape().str() + " vs " + target.shape().str());
    const auto diff = sub(x, target);
    return mean(mul(diff, diff));
}

}  // namespace tensorlite::nn

#pragma once

#include <cmath>
#include <cstdint>
#include <optional>
#include <vector>

#include "tensorlite/autograd.hpp"
#include "tensorlite/kernels.hpp"
#include "tensorlite/tensor.hpp"

namespace tensorlite {

using kernels::ReduceOp;
using Axes = std::optional<std::vector<std::int64_t>>;

inline Tensor zeros_like(const Tensor& t) { return Tensor::zeros(t.shape()); }
inline Tensor ones_like(const Tensor& t) { return Tensor::ones(t.shape()); }

inline Tensor reduce_to_shape(const Tensor& g, const Shape& target);
inline Tensor expand(const Tensor& a, const Shape& shape);

// Elementwise binary ops broadcast their operands; pullbacks fold the
// cotangent back onto each operand's own shape.

inline Tensor add(const Tensor& a, const Tensor& b) {
    auto out = kernels::map_binary(a, b, [](float x, float y) { return x + y; });
    return autograd::record("add", {a, b}, out, [sa = a.shape(), sb = b.shape()](const Tensor& g) {
        return std::vector<Tensor>{reduce_to_shape(g, sa), reduce_to_shape(g, sb)};
    });
}

inline Tensor neg(const Tensor& a);

inline Tensor sub(const Tensor& a, const Tensor& b) {
    auto out = kernels::map_binary(a, b, [](float x, float y) { return x - y; });
    return autograd::record("sub", {a, b}, out, [sa = a.shape(), sb = b.shape()](const Tensor& g) {
        return std::vector<Tensor>{reduce_to_shape(g, sa), reduce_to_shape(neg(g), sb)};
    });
}

inline Tensor mul(const Tensor& a, const Tensor& b) {
    auto out = kernels::map_binary(a, b, [](float x, float y) { return x * y; });
    return autograd::record("mul", {a, b}, out, [a = a.detach(), b = b.detach()](const Tensor& g) {
        return std::vector<Tensor>{reduce_to_shape(mul(g, b), a.shape()), reduce_to_shape(mul(g, a), b.shape())};
    });
}

/// IEEE division: x/0 gives ±inf or NaN, never an error.
inline Tensor div(const Tensor& a, const Tensor& b) {
    auto out = kernels::map_binary(a, b, [](float x, float y) { return x / y; });
    return autograd::record("div", {a, b}, out, [a = a.detach(), b = b.detach()](const Tensor& g) {
        auto ga = kernels::map_binary(g, b, [](float gv, float y) { return gv / y; });
        auto gb = kernels::map_binary(mul(g, a), b, [](float ga_, float y) { return -ga_ / (y * y); });
        return std::vector<Tensor>{reduce_to_shape(ga, a.shape()), reduce_to_shape(gb, b.shape())};
    });
}

inline Tensor add(const Tensor& a, float s) { return add(a, Tensor::scalar(s)); }
inline Tensor sub(const Tensor& a, float s) { return sub(a, Tensor::scalar(s)); }
inline Tensor mul(const Tensor& a, float s) { return mul(a, Tensor::scalar(s)); }
inline Tensor div(const Tensor& a, float s) { return div(a, Tensor::scalar(s)); }

inline Tensor operator+(const Tensor& a, const Tensor& b) { return add(a, b); }
inline Tensor operator-(const Tensor& a, const Tensor& b) { return sub(a, b); }
inline Tensor operator*(const Tensor& a, const Tensor& b) { return mul(a, b); }
inline Tensor operator/(const Tensor& a, const Tensor& b) { return div(a, b); }
inline Tensor operator+(const Tensor& a, float s) { return add(a, s); }
inline Tensor operator-(const Tensor& a, float s) { return sub(a, s); }
inline Tensor operator*(const Tensor& a, float s) { return mul(a, s); }
inline Tensor operator*(float s, const Tensor& a) { return mul(a, s); }
inline Tensor operator/(const Tensor& a, float s) { return div(a, s); }

// Unary ops.

inline Tensor neg(const Tensor& a) {
    auto out = kernels::map_unary(a, [](float x) { return -x; });
    return autograd::record("neg", {a}, out, [](const Tensor& g) { return std::vector<Tensor>{neg(g)}; });
}

inline Tensor operator-(const Tensor& a) { return neg(a); }

inline Tensor exp(const Tensor& a) {
    auto out = kernels::map_unary(a, [](float x) { return std::exp(x); });
    return autograd::record(
        "exp", {a}, out, [y = out.detach()](const Tensor& g) { return std::vector<Tensor>{mul(g, y)}; }, {out});
}

inline Tensor log(const Tensor& a) {
    auto out = kernels::map_unary(a, [](float x) { return std::log(x); });
    return autograd::record("log", {a}, out,
                            [a = a.detach()](const Tensor& g) { return std::vector<Tensor>{div(g, a)}; });
}

inline Tensor sqrt(const Tensor& a) {
    auto out = kernels::map_unary(a, [](float x) { return std::sqrt(x); });
    return autograd::record(
        "sqrt", {a}, out,
        [y = out.detach()](const Tensor& g) {
            return std::vector<Tensor>{kernels::map_binary(g, y, [](float gv, float yv) { return gv / (2.0f * yv); })};
        },
        {out});
}

/// d|x|/dx is taken as 0 at x = 0.
inline Tensor abs(const Tensor& a) {
    auto out = kernels::map_unary(a, [](float x) { return std::fabs(x); });
    return autograd::record("abs", {a}, out, [a = a.detach()](const Tensor& g) {
        return std::vector<Tensor>{kernels::map_binary(g, a, [](float gv, float x) {
            return x > 0.0f ? gv : (x < 0.0f ? -gv : 0.0f);
        })};
    });
}

// Shape manipulation.

/// Shares storage with `a` when `a` is contiguous, otherwise copies first.
inline Tensor reshape(const Tensor& a, const Shape& shape) {
    if (shape.numel() != a.numel())
        throw ShapeError("cannot reshape " + a.shape().str() + " (" + std::to_string(a.numel()) + " elements) to " +
                         shape.str());
    const Tensor src = a.is_contiguous() ? a : kernels::copy(a);
    auto out = Tensor::from_storage(src.storage(), shape, contiguous_strides(shape), src.offset());
    return autograd::record("reshape", {a}, out, [sa = a.shape()](const Tensor& g) {
        return std::vector<Tensor>{reshape(g, sa)};
    });
}

/// Zero-copy transposed view of a 2-D tensor.
inline Tensor transpose2d(const Tensor& a) {
    if (a.rank() != 2) throw ShapeError("transpose2d expects a 2-D tensor, got " + a.shape().str());
    auto out = Tensor::from_storage(a.storage(), Shape{a.shape()[1], a.shape()[0]},
                                    Strides{a.strides()[1], a.strides()[0]}, a.offset());
    return autograd::record("transpose2d", {a}, out,
                            [](const Tensor& g) { return std::vector<Tensor>{transpose2d(g)}; });
}

/// Broadcast view of `a` with extents `shape`; expanded axes have stride 0.
inline Tensor expand(const Tensor& a, const Shape& shape) {
    auto out = Tensor::from_storage(a.storage(), shape, broadcast_strides(a.shape(), a.strides(), shape), a.offset());
    return autograd::record("expand", {a}, out, [sa = a.shape()](const Tensor& g) {
        return std::vector<Tensor>{reduce_to_shape(g, sa)};
    });
}

/// Sum of `g` over the axes along which `target` broadcasts to g's shape.
inline Tensor reduce_to_shape(const Tensor& g, const Shape& target) {
    auto out = kernels::reduce_to_shape(g, target);
    if (out.same(g)) return g;
    return autograd::record("reduce_to_shape", {g}, out, [sg = g.shape()](const Tensor& gbar) {
        return std::vector<Tensor>{kernels::copy(expand(gbar, sg))};
    });
}

// Reductions.

namespace detail {

/// Shape of a reduction result with reduced axes kept as 1.
inline Shape keepdims_shape(const Shape& in, const Axes& axes) {
    std::vector<std::int64_t> dims(in.begin(), in.end());
    if (!axes) {
        for (auto& d : dims) d = 1;
    } else {
        for (auto ax : normalize_axes(*axes, in.rank())) dims[ax] = 1;
    }
    return Shape(std::move(dims));
}

inline Tensor spread(const Tensor& g, const Shape& in, const Axes& axes) {
    const Shape kept = keepdims_shape(in, axes);
    return kernels::copy(expand(reshape(g, kept), in));
}

}  // namespace detail

inline Tensor reduce(ReduceOp op, const Tensor& a, const Axes& axes = std::nullopt, bool keepdims = false) {
    auto out = kernels::reduce(op, a, axes, keepdims);
    switch (op) {
        case ReduceOp::sum:
            return autograd::record("sum", {a}, out, [sa = a.shape(), axes](const Tensor& g) {
                return std::vector<Tensor>{detail::spread(g, sa, axes)};
            });
        case ReduceOp::mean: {
            const auto n = a.numel() / std::max<std::int64_t>(out.numel(), 1);
            return autograd::record("mean", {a}, out, [sa = a.shape(), axes, n](const Tensor& g) {
                return std::vector<Tensor>{div(detail::spread(g, sa, axes), static_cast<float>(n))};
            });
        }
        case ReduceOp::max:
            // ties: the whole cotangent goes to the first maximal element
            return autograd::record("max", {a}, out, [a = a.detach(), axes](const Tensor& g) {
                const auto idx = kernels::argmax_indices(a, axes);
                const auto gv = g.to_vector();
                auto grad = Tensor::zeros(a.shape());
                auto dst = grad.mutable_span();
                for (std::size_t o = 0; o < idx.size(); ++o) dst[idx[o]] += gv[o];
                return std::vector<Tensor>{grad};
            });
    }
    return out;
}

inline Tensor sum(const Tensor& a, const Axes& axes = std::nullopt, bool keepdims = false) {
    return ::tensorlite::reduce(ReduceOp::sum, a, axes, keepdims);
}
inline Tensor mean(const Tensor& a, const Axes& axes = std::nullopt, bool keepdims = false) {
    return ::tensorlite::reduce(ReduceOp::mean, a, axes, keepdims);
}
inline Tensor max(const Tensor& a, const Axes& axes = std::nullopt, bool keepdims = false) {
    return ::tensorlite::reduce(ReduceOp::max, a, axes, keepdims);
}

// Matrix multiplication.

/// Y = X Wᵀ with X (m×k), W (d×k). Pullbacks: X̄ = Ȳ W, W̄ = Ȳᵀ X.
inline Tensor matmul(const Tensor& x, const Tensor& w) {
    auto out = kernels::matmul(x, w);
    return autograd::record("matmul", {x, w}, out, [x = x.detach(), w = w.detach()](const Tensor& g) {
        // matmul(A, B) = A Bᵀ, so Ȳ W = matmul(Ȳ, Wᵀ) and Ȳᵀ X = matmul(Ȳᵀ, Xᵀ)
        return std::vector<Tensor>{matmul(g, transpose2d(w)), matmul(transpose2d(g), transpose2d(x))};
    });
}

}  // namespace tensorlite

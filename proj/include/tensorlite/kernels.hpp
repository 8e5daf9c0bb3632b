#pragma once

#include <algorithm>
#include <cstdint>
#include <limits>
#include <optional>
#include <span>
#include <vector>

#include "tensorlite/parallel.hpp"
#include "tensorlite/shape.hpp"
#include "tensorlite/strided.hpp"
#include "tensorlite/tensor.hpp"

// Raw compute kernels. Nothing here touches the tape; the differentiable
// wrappers live in ops.hpp. Every kernel returns a fresh contiguous tensor.
namespace tensorlite::kernels {

template <class Fn>
Tensor map_unary(const Tensor& a, Fn fn) {
    Tensor out = Tensor::zeros(a.shape());
    float* dst = out.storage()->data.data();
    const float* src = a.storage()->data.data();
    const auto n = a.numel();
    if (a.is_contiguous()) {
        const float* base = a.data();
        parallel_for(n, [&](std::int64_t b, std::int64_t e) {
            for (std::int64_t i = b; i < e; ++i) dst[i] = fn(base[i]);
        });
        return out;
    }
    parallel_for(n, [&](std::int64_t b, std::int64_t e) {
        detail::strided_walk<1>(a.shape(), {std::span<const std::int64_t>(a.strides())}, {a.offset()}, b, e,
                                [&](std::int64_t pos, std::int64_t len, const auto& offs, const auto& steps) {
                                    for (std::int64_t j = 0; j < len; ++j) dst[pos + j] = fn(src[offs[0] + j * steps[0]]);
                                });
    });
    return out;
}

/// z = fn(a, b) under NumPy broadcasting. Operands are read in place
/// through zero strides; neither is expanded in memory.
template <class Fn>
Tensor map_binary(const Tensor& a, const Tensor& b, Fn fn) {
    const Shape result = broadcast_result_shape(a.shape(), b.shape());
    Tensor out = Tensor::zeros(result);
    float* dst = out.storage()->data.data();
    const auto n = result.numel();
    if (a.shape() == b.shape() && a.is_contiguous() && b.is_contiguous()) {
        const float* pa = a.data();
        const float* pb = b.data();
        parallel_for(n, [&](std::int64_t s, std::int64_t e) {
            for (std::int64_t i = s; i < e; ++i) dst[i] = fn(pa[i], pb[i]);
        });
        return out;
    }
    const Strides sa = broadcast_strides(a.shape(), a.strides(), result);
    const Strides sb = broadcast_strides(b.shape(), b.strides(), result);
    const float* pa = a.storage()->data.data();
    const float* pb = b.storage()->data.data();
    parallel_for(n, [&](std::int64_t s, std::int64_t e) {
        detail::strided_walk<2>(result, {std::span<const std::int64_t>(sa), std::span<const std::int64_t>(sb)},
                                {a.offset(), b.offset()}, s, e,
                                [&](std::int64_t pos, std::int64_t len, const auto& offs, const auto& steps) {
                                    for (std::int64_t j = 0; j < len; ++j)
                                        dst[pos + j] = fn(pa[offs[0] + j * steps[0]], pb[offs[1] + j * steps[1]]);
                                });
    });
    return out;
}

/// Contiguous copy of any view (including broadcast views).
inline Tensor copy(const Tensor& a) {
    return map_unary(a, [](float v) { return v; });
}

enum class ReduceOp { sum, mean, max };

namespace detail {

/// Layout of a reduction: kept axes form the output, reduced axes are
/// walked in canonical order for each output element.
struct ReduceLayout {
    Shape out_shape;       // with or without kept singleton axes
    Shape kept_shape;      // kept axes only
    Strides kept_strides;  // input strides of kept axes
    Shape red_shape;       // reduced axes only
    Strides red_strides;   // input strides of reduced axes
};

inline ReduceLayout reduce_layout(const Tensor& a, const std::optional<std::vector<std::int64_t>>& axes,
                                  bool keepdims) {
    const std::size_t rank = a.rank();
    std::vector<bool> reduced(rank, !axes.has_value());
    if (axes)
        for (auto ax : normalize_axes(*axes, rank)) reduced[ax] = true;
    std::vector<std::int64_t> out, kept, red;
    ReduceLayout l;
    for (std::size_t d = 0; d < rank; ++d) {
        if (reduced[d]) {
            red.push_back(a.shape()[d]);
            l.red_strides.push_back(a.strides()[d]);
            if (keepdims) out.push_back(1);
        } else {
            kept.push_back(a.shape()[d]);
            l.kept_strides.push_back(a.strides()[d]);
            out.push_back(a.shape()[d]);
        }
    }
    l.out_shape = Shape(std::move(out));
    l.kept_shape = Shape(std::move(kept));
    l.red_shape = Shape(std::move(red));
    return l;
}

inline std::int64_t kept_offset(const ReduceLayout& l, std::int64_t base, std::int64_t o) {
    std::int64_t off = base;
    for (std::size_t d = l.kept_shape.rank(); d-- > 0;) {
        off += (o % l.kept_shape[d]) * l.kept_strides[d];
        o /= l.kept_shape[d];
    }
    return off;
}

inline float sum_range(const float* src, const ReduceLayout& l, std::int64_t base, std::int64_t b, std::int64_t e) {
    float acc = 0.0f;
    ::tensorlite::detail::strided_walk<1>(l.red_shape, {std::span<const std::int64_t>(l.red_strides)}, {base}, b, e,
                                          [&](std::int64_t, std::int64_t len, const auto& offs, const auto& steps) {
                                              for (std::int64_t j = 0; j < len; ++j) acc += src[offs[0] + j * steps[0]];
                                          });
    return acc;
}

}  // namespace detail

/// Sum, mean or max over `axes` (all axes when absent).
///
/// Summation is sequential in canonical index order of the reduced axes.
/// A reduction to a single element over more than kReduceChunk inputs sums
/// fixed kReduceChunk-sized blocks sequentially and then adds the block
/// partials in block order, so the bits never depend on the thread count.
/// Empty reductions give 0 for sum and NaN for mean; max throws.
inline Tensor reduce(ReduceOp op, const Tensor& a, const std::optional<std::vector<std::int64_t>>& axes = std::nullopt,
                     bool keepdims = false) {
    const auto l = detail::reduce_layout(a, axes, keepdims);
    const std::int64_t outer = l.kept_shape.numel();
    const std::int64_t inner = l.red_shape.numel();
    if (op == ReduceOp::max && inner == 0 && outer > 0) throw ShapeError("max over an empty axis");
    Tensor out = Tensor::zeros(l.out_shape);
    float* dst = out.storage()->data.data();
    const float* src = a.storage()->data.data();

    if (op == ReduceOp::max) {
        parallel_for(outer, [&](std::int64_t b, std::int64_t e) {
            for (std::int64_t o = b; o < e; ++o) {
                const auto base = detail::kept_offset(l, a.offset(), o);
                float best = -std::numeric_limits<float>::infinity();
                bool first = true;
                ::tensorlite::detail::strided_walk<1>(
                    l.red_shape, {std::span<const std::int64_t>(l.red_strides)}, {base}, 0, inner,
                    [&](std::int64_t, std::int64_t len, const auto& offs, const auto& steps) {
                        for (std::int64_t j = 0; j < len; ++j) {
                            const float v = src[offs[0] + j * steps[0]];
                            if (first || v > best) best = v;
                            first = false;
                        }
                    });
                dst[o] = best;
            }
        });
        return out;
    }

    if (outer == 1 && inner > kReduceChunk) {
        const std::int64_t chunks = (inner + kReduceChunk - 1) / kReduceChunk;
        std::vector<float> partial(static_cast<std::size_t>(chunks));
        parallel_chunks(chunks, [&](std::int64_t c) {
            const auto b = c * kReduceChunk;
            partial[c] = detail::sum_range(src, l, a.offset(), b, std::min(inner, b + kReduceChunk));
        });
        float acc = 0.0f;
        for (float p : partial) acc += p;
        dst[0] = acc;
    } else {
        parallel_for(
            outer,
            [&](std::int64_t b, std::int64_t e) {
                for (std::int64_t o = b; o < e; ++o)
                    dst[o] = detail::sum_range(src, l, detail::kept_offset(l, a.offset(), o), 0, inner);
            },
            std::max<std::int64_t>(1, kParallelGrain / std::max<std::int64_t>(inner, 1)));
    }
    if (op == ReduceOp::mean) {
        const float n = static_cast<float>(inner);
        for (std::int64_t o = 0; o < outer; ++o) dst[o] /= n;
    }
    return out;
}

/// For each output position of a max reduction, the canonical flat index
/// (into `a`) of the first maximal element.
inline std::vector<std::int64_t> argmax_indices(const Tensor& a,
                                                const std::optional<std::vector<std::int64_t>>& axes) {
    const auto flat = Tensor::from_values(a.shape(), a.to_vector());
    const auto l = detail::reduce_layout(flat, axes, false);
    const std::int64_t outer = l.kept_shape.numel();
    const std::int64_t inner = l.red_shape.numel();
    const float* src = flat.storage()->data.data();
    std::vector<std::int64_t> idx(static_cast<std::size_t>(outer));
    for (std::int64_t o = 0; o < outer; ++o) {
        const auto base = detail::kept_offset(l, 0, o);
        float best = 0.0f;
        std::int64_t best_at = -1;
        ::tensorlite::detail::strided_walk<1>(l.red_shape, {std::span<const std::int64_t>(l.red_strides)}, {base}, 0,
                                              inner,
                                              [&](std::int64_t, std::int64_t len, const auto& offs, const auto& steps) {
                                                  for (std::int64_t j = 0; j < len; ++j) {
                                                      const auto at = offs[0] + j * steps[0];
                                                      if (best_at < 0 || src[at] > best) {
                                                          best = src[at];
                                                          best_at = at;
                                                      }
                                                  }
                                              });
        idx[o] = best_at;
    }
    return idx;
}

/// Y = X Wᵀ for X (m×k) and W (d×k). Each output is a sequential dot
/// product over k.
inline Tensor matmul(const Tensor& x, const Tensor& w) {
    if (x.rank() != 2 || w.rank() != 2)
        throw ShapeError("matmul expects 2-D operands, got " + x.shape().str() + " and " + w.shape().str());
    if (x.shape()[1] != w.shape()[1])
        throw ShapeError("matmul inner dimension mismatch: " + x.shape().str() + " vs " + w.shape().str() +
                         " (Y = X W^T needs equal column counts)");
    const auto m = x.shape()[0];
    const auto k = x.shape()[1];
    const auto d = w.shape()[0];
    const Tensor xc = x.contiguous();
    const Tensor wc = w.contiguous();
    const float* px = xc.data();
    const float* pw = wc.data();
    Tensor out = Tensor::zeros(Shape{m, d});
    float* py = out.storage()->data.data();
    parallel_for(
        m,
        [&](std::int64_t b, std::int64_t e) {
            for (std::int64_t i = b; i < e; ++i) {
                const float* xi = px + i * k;
                for (std::int64_t j = 0; j < d; ++j) {
                    const float* wj = pw + j * k;
                    float acc = 0.0f;
                    for (std::int64_t l = 0; l < k; ++l) acc += xi[l] * wj[l];
                    py[i * d + j] = acc;
                }
            }
        },
        std::max<std::int64_t>(1, kParallelGrain / std::max<std::int64_t>(k * d, 1)));
    return out;
}

/// Sums `g` over every axis along which `target` was broadcast to reach
/// g's shape (left-padded axes included), then reshapes to `target`.
inline Tensor reduce_to_shape(const Tensor& g, const Shape& target) {
    if (g.shape() == target) return g;
    // validates that target broadcasts to g
    (void)broadcast_strides(target, contiguous_strides(target), g.shape());
    const std::size_t pad = g.rank() - target.rank();
    std::vector<std::int64_t> axes;
    for (std::size_t d = 0; d < g.rank(); ++d)
        if (d < pad || (target[d - pad] == 1 && g.shape()[d] != 1)) axes.push_back(static_cast<std::int64_t>(d));
    Tensor summed = reduce(ReduceOp::sum, g, axes, false);
    return Tensor::from_storage(summed.storage(), target, contiguous_strides(target), 0);
}

}  // namespace tensorlite::kernels

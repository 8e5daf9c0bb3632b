#pragma once

#include <array>
#include <cstddef>
#include <cstdint>
#include <span>
#include <vector>

#include "tensorlite/shape.hpp"

namespace tensorlite::detail {

/// Walks the flat row-major positions [begin, end) of `shape` for N strided
/// operands at once. `fn(pos, len, offsets, steps)` receives runs along the
/// innermost axis: element j of the run sits at offsets[k] + j * steps[k]
/// in operand k and at pos + j in canonical order.
template <std::size_t N, class Fn>
void strided_walk(const Shape& shape, const std::array<std::span<const std::int64_t>, N>& strides,
                  const std::array<std::int64_t, N>& base, std::int64_t begin, std::int64_t end, Fn&& fn) {
    if (begin >= end) return;
    const std::size_t rank = shape.rank();
    std::array<std::int64_t, N> offs = base;
    std::array<std::int64_t, N> steps{};
    if (rank == 0) {
        fn(begin, std::int64_t{1}, offs, steps);
        return;
    }
    std::vector<std::int64_t> idx(rank);
    std::int64_t rem = begin;
    for (std::size_t d = rank; d-- > 0;) {
        idx[d] = rem % shape[d];
        rem /= shape[d];
    }
    for (std::size_t k = 0; k < N; ++k) {
        for (std::size_t d = 0; d < rank; ++d) offs[k] += idx[d] * strides[k][d];
        steps[k] = strides[k][rank - 1];
    }
    const std::int64_t inner = shape[rank - 1];
    std::int64_t pos = begin;
    while (pos < end) {
        const std::int64_t len = std::min(end - pos, inner - idx[rank - 1]);
        fn(pos, len, offs, steps);
        pos += len;
        idx[rank - 1] += len;
        for (std::size_t k = 0; k < N; ++k) offs[k] += len * steps[k];
        if (idx[rank - 1] < inner) continue;
        idx[rank - 1] = 0;
        for (std::size_t k = 0; k < N; ++k) offs[k] -= inner * steps[k];
        for (std::size_t d = rank - 1; d-- > 0;) {
            ++idx[d];
            for (std::size_t k = 0; k < N; ++k) offs[k] += strides[k][d];
            if (idx[d] < shape[d]) break;
            idx[d] = 0;
            for (std::size_t k = 0; k < N; ++k) offs[k] -= shape[d] * strides[k][d];
        }
    }
}

}  // namespace tensorlite::detail

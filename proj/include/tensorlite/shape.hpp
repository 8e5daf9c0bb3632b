#pragma once

#include <algorithm>
#include <cstddef>
#include <cstdint>
#include <initializer_list>
#include <ostream>
#include <span>
#include <string>
#include <vector>

#include "tensorlite/error.hpp"

namespace tensorlite {

/// Extents of a tensor, outermost first. An empty list is a scalar.
class Shape {
public:
    Shape() = default;
    Shape(std::initializer_list<std::int64_t> dims) : dims_(dims) { validate(); }
    explicit Shape(std::vector<std::int64_t> dims) : dims_(std::move(dims)) { validate(); }

    std::size_t rank() const noexcept { return dims_.size(); }
    bool is_scalar() const noexcept { return dims_.empty(); }

    std::int64_t operator[](std::size_t i) const { return dims_[i]; }
    std::int64_t& operator[](std::size_t i) { return dims_[i]; }

    std::int64_t numel() const noexcept {
        std::int64_t n = 1;
        for (auto d : dims_) n *= d;
        return n;
    }

    const std::vector<std::int64_t>& dims() const noexcept { return dims_; }
    auto begin() const noexcept { return dims_.begin(); }
    auto end() const noexcept { return dims_.end(); }

    friend bool operator==(const Shape&, const Shape&) = default;

    std::string str() const {
        std::string s = "(";
        for (std::size_t i = 0; i < dims_.size(); ++i) {
            if (i) s += ", ";
            s += std::to_string(dims_[i]);
        }
        if (dims_.size() == 1) s += ",";
        return s + ")";
    }

    friend std::ostream& operator<<(std::ostream& os, const Shape& s) { return os << s.str(); }

private:
    void validate() const {
        for (auto d : dims_)
            if (d < 0) throw ShapeError("negative extent in shape " + str());
    }

    std::vector<std::int64_t> dims_;
};

/// Per-axis element steps. A step of 0 marks a broadcast axis.
using Strides = std::vector<std::int64_t>;

inline Strides contiguous_strides(const Shape& shape) {
    Strides st(shape.rank());
    std::int64_t step = 1;
    for (std::size_t i = shape.rank(); i-- > 0;) {
        st[i] = step;
        step *= std::max<std::int64_t>(shape[i], 1);
    }
    return st;
}

struct BroadcastPlan {
    Shape result_shape;
    Strides left_strides;
    Strides right_strides;
};

/// NumPy broadcasting of two shapes. The plan's strides are those of
/// contiguous operands, zeroed on expanded (and left-padded) axes.
inline Shape broadcast_result_shape(const Shape& a, const Shape& b) {
    const std::size_t rank = std::max(a.rank(), b.rank());
    std::vector<std::int64_t> out(rank);
    for (std::size_t k = 0; k < rank; ++k) {
        // k counts from the right
        const std::int64_t da = k < a.rank() ? a[a.rank() - 1 - k] : 1;
        const std::int64_t db = k < b.rank() ? b[b.rank() - 1 - k] : 1;
        if (da != db && da != 1 && db != 1) {
            const auto axis = -static_cast<std::int64_t>(k) - 1;
            throw BroadcastError("cannot broadcast " + a.str() + " with " + b.str() + " at axis " +
                                     std::to_string(axis) + " (" + std::to_string(da) + " vs " +
                                     std::to_string(db) + ")",
                                 axis);
        }
        out[rank - 1 - k] = da == 1 ? db : da;
    }
    return Shape(std::move(out));
}

/// Strides that read an operand of `shape`/`strides` as if it had
/// `target` extents. `target` must be a broadcast of `shape`.
inline Strides broadcast_strides(const Shape& shape, std::span<const std::int64_t> strides,
                                 const Shape& target) {
    if (shape.rank() > target.rank())
        throw BroadcastError("cannot broadcast " + shape.str() + " to " + target.str(),
                             -static_cast<std::int64_t>(shape.rank()));
    Strides out(target.rank(), 0);
    const std::size_t pad = target.rank() - shape.rank();
    for (std::size_t i = 0; i < shape.rank(); ++i) {
        const auto d = shape[i];
        const auto t = target[pad + i];
        if (d == t) {
            out[pad + i] = d == 1 ? 0 : strides[i];
        } else if (d == 1) {
            out[pad + i] = 0;
        } else {
            const auto axis = static_cast<std::int64_t>(i) - static_cast<std::int64_t>(shape.rank());
            throw BroadcastError("cannot broadcast " + shape.str() + " to " + target.str() +
                                     " at axis " + std::to_string(axis),
                                 axis);
        }
    }
    return out;
}

inline BroadcastPlan broadcast_shapes(const Shape& a, const Shape& b) {
    BroadcastPlan plan;
    plan.result_shape = broadcast_result_shape(a, b);
    plan.left_strides = broadcast_strides(a, contiguous_strides(a), plan.result_shape);
    plan.right_strides = broadcast_strides(b, contiguous_strides(b), plan.result_shape);
    return plan;
}

/// Normalizes possibly-negative axes and rejects duplicates.
inline std::vector<std::size_t> normalize_axes(std::span<const std::int64_t> axes, std::size_t rank) {
    std::vector<std::size_t> out;
    out.reserve(axes.size());
    for (auto a : axes) {
        const auto r = static_cast<std::int64_t>(rank);
        if (a < -r || a >= r)
            throw AxisError("axis " + std::to_string(a) + " out of range for rank " + std::to_string(rank));
        const auto n = static_cast<std::size_t>(a < 0 ? a + r : a);
        if (std::find(out.begin(), out.end(), n) != out.end())
            throw AxisError("duplicate axis " + std::to_string(a));
        out.push_back(n);
    }
    std::sort(out.begin(), out.end());
    return out;
}

}  // namespace tensorlite

#pragma once

#include <bit>
#include <cmath>
#include <cstdint>
#include <initializer_list>
#include <memory>
#include <ostream>
#include <random>
#include <span>
#include <sstream>
#include <string>
#include <type_traits>
#include <variant>
#include <vector>

#include "tensorlite/error.hpp"
#include "tensorlite/shape.hpp"
#include "tensorlite/strided.hpp"

namespace tensorlite {

namespace autograd {
struct Node;
}

/// Element type tag. Only 32-bit floats exist; the tag marks where a second
/// type would plug in.
enum class DType { f32 };

/// Flat element buffer shared by a tensor and all of its views. `version`
/// is bumped by every in-place write so the tape can detect stale saves.
struct Storage {
    std::vector<float> data;
    std::uint64_t version = 0;
};

namespace detail {

struct TensorImpl {
    std::shared_ptr<Storage> storage;
    Shape shape;
    Strides strides;
    std::int64_t offset = 0;
    bool requires_grad = false;
    std::shared_ptr<autograd::Node> node;
};

}  // namespace detail

/// Fill rules accepted by Tensor::create.
namespace init {
struct Zeros {};
struct Ones {};
struct Constant {
    float value;
};
/// Uniform on [lo, hi) from a seeded mt19937.
struct Uniform {
    float lo;
    float hi;
    std::uint64_t seed;
};
struct FromValues {
    std::vector<float> values;
};
}  // namespace init

using Init = std::variant<init::Zeros, init::Ones, init::Constant, init::Uniform, init::FromValues>;

/// Handle to a dense strided tensor. Copies of a Tensor refer to the same
/// tensor (same storage, same autograd linkage); use clone() for a deep copy.
/// A default-constructed Tensor is undefined.
class Tensor {
public:
    Tensor() = default;

    static Tensor create(const Shape& shape, const Init& fill) {
        const auto n = shape.numel();
        auto storage = std::make_shared<Storage>();
        std::visit(
            [&](const auto& rule) {
                using R = std::decay_t<decltype(rule)>;
                if constexpr (std::is_same_v<R, init::Zeros>) {
                    storage->data.assign(n, 0.0f);
                } else if constexpr (std::is_same_v<R, init::Ones>) {
                    storage->data.assign(n, 1.0f);
                } else if constexpr (std::is_same_v<R, init::Constant>) {
                    storage->data.assign(n, rule.value);
                } else if constexpr (std::is_same_v<R, init::Uniform>) {
                    std::mt19937 rng(static_cast<std::mt19937::result_type>(rule.seed));
                    std::uniform_real_distribution<float> dist(rule.lo, rule.hi);
                    storage->data.resize(n);
                    for (auto& v : storage->data) v = dist(rng);
                } else {
                    if (static_cast<std::int64_t>(rule.values.size()) != n)
                        throw ShapeError("got " + std::to_string(rule.values.size()) + " values for shape " +
                                         shape.str() + " with " + std::to_string(n) + " elements");
                    storage->data = rule.values;
                }
            },
            fill);
        return from_storage(std::move(storage), shape, contiguous_strides(shape), 0);
    }

    static Tensor zeros(const Shape& shape) { return create(shape, init::Zeros{}); }
    static Tensor ones(const Shape& shape) { return create(shape, init::Ones{}); }
    static Tensor full(const Shape& shape, float value) { return create(shape, init::Constant{value}); }
    static Tensor uniform(const Shape& shape, float lo, float hi, std::uint64_t seed) {
        return create(shape, init::Uniform{lo, hi, seed});
    }
    static Tensor from_values(const Shape& shape, std::vector<float> values) {
        return create(shape, init::FromValues{std::move(values)});
    }
    static Tensor from_values(std::vector<float> values) {
        const auto n = static_cast<std::int64_t>(values.size());
        return from_values(Shape{n}, std::move(values));
    }
    static Tensor scalar(float value) { return full(Shape{}, value); }

    /// A view over existing storage. Throws if the view would address
    /// elements outside the buffer.
    static Tensor from_storage(std::shared_ptr<Storage> storage, Shape shape, Strides strides, std::int64_t offset) {
        if (strides.size() != shape.rank()) throw ShapeError("stride count does not match rank of " + shape.str());
        if (shape.numel() > 0) {
            std::int64_t lo = offset;
            std::int64_t hi = offset;
            for (std::size_t d = 0; d < shape.rank(); ++d) {
                const auto reach = (shape[d] - 1) * strides[d];
                (reach < 0 ? lo : hi) += reach;
            }
            if (lo < 0 || hi >= static_cast<std::int64_t>(storage->data.size()))
                throw ShapeError("view " + shape.str() + " exceeds its storage");
        }
        Tensor t;
        t.impl_ = std::make_shared<detail::TensorImpl>();
        t.impl_->storage = std::move(storage);
        t.impl_->shape = std::move(shape);
        t.impl_->strides = std::move(strides);
        t.impl_->offset = offset;
        return t;
    }

    bool defined() const noexcept { return impl_ != nullptr; }
    explicit operator bool() const noexcept { return defined(); }

    const Shape& shape() const { return impl().shape; }
    const Strides& strides() const { return impl().strides; }
    std::int64_t offset() const { return impl().offset; }
    std::size_t rank() const { return impl().shape.rank(); }
    std::int64_t numel() const { return impl().shape.numel(); }
    DType dtype() const noexcept { return DType::f32; }

    /// Row-major dense layout. Strides on extent-1 axes are ignored.
    bool is_contiguous() const {
        const auto& s = impl().shape;
        const auto canonical = contiguous_strides(s);
        for (std::size_t d = 0; d < s.rank(); ++d)
            if (s[d] != 1 && impl().strides[d] != canonical[d]) return false;
        return true;
    }

    const std::shared_ptr<Storage>& storage() const { return impl().storage; }
    bool shares_storage(const Tensor& other) const { return storage() == other.storage(); }
    /// True when both handles name the same tensor object.
    bool same(const Tensor& other) const noexcept { return impl_ == other.impl_; }
    const void* identity() const noexcept { return impl_.get(); }

    /// Address of the first element; for aliasing checks and raw reads.
    const float* data() const { return impl().storage->data.data() + impl().offset; }

    std::span<const float> span() const {
        require_contiguous("span");
        return {data(), static_cast<std::size_t>(numel())};
    }

    /// Writable view of a contiguous tensor. Counts as an in-place write.
    std::span<float> mutable_span() {
        require_contiguous("mutable_span");
        bump_version();
        return {impl().storage->data.data() + impl().offset, static_cast<std::size_t>(numel())};
    }

    float at(std::span<const std::int64_t> index) const { return impl().storage->data[flat_offset(index)]; }
    float at(std::initializer_list<std::int64_t> index) const { return at(std::span(index.begin(), index.size())); }

    void set(std::span<const std::int64_t> index, float value) {
        impl().storage->data[flat_offset(index)] = value;
        bump_version();
    }
    void set(std::initializer_list<std::int64_t> index, float value) { set(std::span(index.begin(), index.size()), value); }

    /// Value of a one-element tensor.
    float item() const {
        if (numel() != 1) throw ShapeError("item() on tensor of shape " + shape().str());
        return *data();
    }

    /// Elements in canonical row-major order.
    std::vector<float> to_vector() const {
        std::vector<float> out(static_cast<std::size_t>(numel()));
        const float* src = impl().storage->data.data();
        detail::strided_walk<1>(shape(), {std::span<const std::int64_t>(strides())}, {offset()}, 0, numel(),
                                [&](std::int64_t pos, std::int64_t len, const auto& offs, const auto& steps) {
                                    for (std::int64_t j = 0; j < len; ++j) out[pos + j] = src[offs[0] + j * steps[0]];
                                });
        return out;
    }

    /// Same tensor if already contiguous, else a compacted copy. The copy is
    /// not recorded on the tape; use ops::reshape for a differentiable path.
    Tensor contiguous() const {
        if (is_contiguous()) return *this;
        return from_values(shape(), to_vector());
    }

    /// Deep copy with no autograd linkage.
    Tensor clone() const { return from_values(shape(), to_vector()); }

    /// Shares storage, drops autograd linkage.
    Tensor detach() const { return from_storage(storage(), shape(), strides(), offset()); }

    void bump_version() { ++impl().storage->version; }
    std::uint64_t version() const { return impl().storage->version; }

    bool requires_grad() const { return impl().requires_grad; }
    Tensor& set_requires_grad(bool on = true) {
        impl().requires_grad = on;
        if (!on) impl().node.reset();
        return *this;
    }

    const std::shared_ptr<autograd::Node>& node() const { return impl().node; }
    void set_node(std::shared_ptr<autograd::Node> node) { impl().node = std::move(node); }
    bool has_node() const { return impl().node != nullptr; }

    friend std::ostream& operator<<(std::ostream& os, const Tensor& t) {
        if (!t.defined()) return os << "tensor(undefined)";
        const auto values = t.to_vector();
        os << "tensor(shape=" << t.shape() << ", ";
        std::size_t pos = 0;
        print_nested(os, t.shape(), 0, values, pos);
        return os << ")";
    }

    std::string str() const {
        std::ostringstream os;
        os << *this;
        return os.str();
    }

private:
    detail::TensorImpl& impl() const {
        if (!impl_) throw Error("use of undefined tensor");
        return *impl_;
    }

    void require_contiguous(const char* what) const {
        if (!is_contiguous()) throw ShapeError(std::string(what) + "() requires a contiguous tensor");
    }

    std::int64_t flat_offset(std::span<const std::int64_t> index) const {
        const auto& s = shape();
        if (index.size() != s.rank())
            throw ShapeError("index of rank " + std::to_string(index.size()) + " for shape " + s.str());
        std::int64_t off = offset();
        for (std::size_t d = 0; d < index.size(); ++d) {
            if (index[d] < 0 || index[d] >= s[d])
                throw ShapeError("index " + std::to_string(index[d]) + " out of range on axis " + std::to_string(d));
            off += index[d] * strides()[d];
        }
        return off;
    }

    static void print_nested(std::ostream& os, const Shape& s, std::size_t depth, const std::vector<float>& v,
                             std::size_t& pos) {
        if (depth == s.rank()) {
            os << v[pos++];
            return;
        }
        os << '[';
        for (std::int64_t i = 0; i < s[depth]; ++i) {
            if (i) os << ", ";
            print_nested(os, s, depth + 1, v, pos);
        }
        os << ']';
    }

    std::shared_ptr<detail::TensorImpl> impl_;
};

/// Bitwise equality of shapes and values (NaNs with equal bits compare equal).
inline bool bit_equal(const Tensor& a, const Tensor& b) {
    if (a.shape() != b.shape()) return false;
    const auto va = a.to_vector();
    const auto vb = b.to_vector();
    for (std::size_t i = 0; i < va.size(); ++i)
        if (std::bit_cast<std::uint32_t>(va[i]) != std::bit_cast<std::uint32_t>(vb[i])) return false;
    return true;
}

}  // namespace tensorlite

#include <gtest/gtest.h>

#include <cmath>
#include <limits>
#include <random>

#include "oracles.hpp"
#include "tensorlite/ops.hpp"

using namespace tensorlite;

namespace {

std::vector<float> vals(const Tensor& t) { return t.to_vector(); }

Tensor tensor_of(const std::vector<std::int64_t>& shape, std::vector<float> v) {
    return Tensor::from_values(Shape(shape), std::move(v));
}

class ThreadCount {
public:
    explicit ThreadCount(int n) : prev_(num_threads()) { set_num_threads(n); }
    ~ThreadCount() { set_num_threads(prev_); }

private:
    int prev_;
};

}  // namespace

TEST(Create, FillRules) {
    EXPECT_EQ(vals(Tensor::zeros(Shape{2, 2})), (std::vector<float>{0, 0, 0, 0}));
    EXPECT_EQ(vals(Tensor::ones(Shape{3})), (std::vector<float>{1, 1, 1}));
    EXPECT_EQ(vals(Tensor::full(Shape{2}, 2.5f)), (std::vector<float>{2.5f, 2.5f}));
    EXPECT_EQ(vals(Tensor::from_values(Shape{3}, {1, 2, 3})), (std::vector<float>{1, 2, 3}));
    EXPECT_THROW(Tensor::from_values(Shape{2}, {1, 2, 3}), ShapeError);
    const auto t = Tensor::create(Shape{2, 2}, init::Zeros{});
    EXPECT_TRUE(t.is_contiguous());
    EXPECT_FALSE(t.requires_grad());
}

TEST(Create, UniformIsSeededAndInRange) {
    const auto a = Tensor::uniform(Shape{100}, -0.5f, 0.5f, 7);
    const auto b = Tensor::uniform(Shape{100}, -0.5f, 0.5f, 7);
    const auto c = Tensor::uniform(Shape{100}, -0.5f, 0.5f, 8);
    EXPECT_TRUE(bit_equal(a, b));
    EXPECT_FALSE(bit_equal(a, c));
    for (float v : vals(a)) {
        EXPECT_GE(v, -0.5f);
        EXPECT_LE(v, 0.5f);
    }
}

TEST(Elementwise, RowBroadcastAdd) {
    const auto out = tensor_of({2, 2}, {1, 2, 3, 4}) + Tensor::from_values({10, 20});
    EXPECT_EQ(out.shape(), (Shape{2, 2}));
    EXPECT_EQ(vals(out), (std::vector<float>{11, 22, 13, 24}));
}

TEST(Elementwise, MulByOnesIsBitExact) {
    const auto x = Tensor::uniform(Shape{3, 5}, -10.0f, 10.0f, 1);
    EXPECT_TRUE(bit_equal(mul(x, ones_like(x)), x));
}

TEST(Elementwise, DivisionFollowsIeee) {
    const auto q = div(Tensor::from_values({1.0f, -1.0f, 0.0f}), Tensor::from_values({0.0f, 0.0f, 0.0f}));
    const auto v = vals(q);
    EXPECT_EQ(v[0], std::numeric_limits<float>::infinity());
    EXPECT_EQ(v[1], -std::numeric_limits<float>::infinity());
    EXPECT_TRUE(std::isnan(v[2]));
}

TEST(Elementwise, IncompatibleShapesThrow) {
    EXPECT_THROW(add(Tensor::zeros(Shape{2, 3}), Tensor::zeros(Shape{4})), BroadcastError);
}

TEST(Elementwise, UnaryPoints) {
    EXPECT_EQ(exp(Tensor::from_values({0.0f})).item(), 1.0f);
    EXPECT_EQ(log(Tensor::from_values({1.0f})).item(), 0.0f);
    EXPECT_EQ(sqrt(Tensor::from_values({9.0f})).item(), 3.0f);
    EXPECT_EQ(abs(Tensor::from_values({-2.5f})).item(), 2.5f);
    EXPECT_EQ(log(Tensor::from_values({0.0f})).item(), -std::numeric_limits<float>::infinity());
    EXPECT_TRUE(std::isnan(log(Tensor::from_values({-1.0f})).item()));
    const auto x = Tensor::uniform(Shape{4, 3}, -3.0f, 3.0f, 2);
    EXPECT_TRUE(bit_equal(neg(neg(x)), x));
}

TEST(Elementwise, StridedOperandsUseGeneralPath) {
    const auto a = tensor_of({2, 3}, {1, 2, 3, 4, 5, 6});
    const auto at = transpose2d(a);  // (3, 2), non-contiguous
    ASSERT_FALSE(at.is_contiguous());
    const auto sum_ = at + tensor_of({3, 2}, {10, 20, 30, 40, 50, 60});
    EXPECT_EQ(vals(sum_), (std::vector<float>{11, 24, 32, 45, 53, 66}));
    EXPECT_EQ(vals(exp(at * 0.0f)), (std::vector<float>(6, 1.0f)));
}

TEST(Elementwise, BroadcastEquivalenceOracle) {
    std::mt19937 rng(1234);
    for (int trial = 0; trial < 50; ++trial) {
        const auto [sa, sb] = oracle::broadcastable_pair(rng);
        const auto va = oracle::small_ints(rng, oracle::count(sa));
        const auto vb = oracle::small_ints(rng, oracle::count(sb), 1, 8);
        const auto a = Tensor::from_values(Shape(sa), va);
        const auto b = Tensor::from_values(Shape(sb), vb);
        const auto target = broadcast_shapes(a.shape(), b.shape()).result_shape.dims();
        const auto ea = oracle::expand(va, sa, target);
        const auto eb = oracle::expand(vb, sb, target);
        const auto check = [&](const Tensor& got, auto f) {
            const auto g = vals(got);
            ASSERT_EQ(g.size(), ea.size());
            for (std::size_t i = 0; i < g.size(); ++i)
                ASSERT_EQ(std::bit_cast<std::uint32_t>(g[i]), std::bit_cast<std::uint32_t>(f(ea[i], eb[i])));
        };
        check(a + b, [](float x, float y) { return x + y; });
        check(a - b, [](float x, float y) { return x - y; });
        check(a * b, [](float x, float y) { return x * y; });
        check(a / b, [](float x, float y) { return x / y; });
    }
}

TEST(Reduce, Examples) {
    EXPECT_EQ(sum(Tensor::from_values({1, 2, 3})).item(), 6.0f);
    EXPECT_EQ(mean(Tensor::from_values({2, 4})).item(), 3.0f);
    const auto s0 = sum(tensor_of({2, 2}, {1, 2, 3, 4}), std::vector<std::int64_t>{0});
    EXPECT_EQ(s0.shape(), (Shape{2}));
    EXPECT_EQ(vals(s0), (std::vector<float>{4, 6}));
    const auto k = sum(tensor_of({2, 2}, {1, 2, 3, 4}), std::vector<std::int64_t>{1}, true);
    EXPECT_EQ(k.shape(), (Shape{2, 1}));
    EXPECT_EQ(vals(k), (std::vector<float>{3, 7}));
    EXPECT_EQ(max(tensor_of({2, 3}, {1, 9, 3, 4, 5, 6}), std::vector<std::int64_t>{-1}).to_vector(),
              (std::vector<float>{9, 6}));
    EXPECT_TRUE(sum(Tensor::zeros(Shape{2})).shape().is_scalar());
}

TEST(Reduce, AxisOutOfRange) {
    EXPECT_THROW(sum(Tensor::zeros(Shape{2, 2}), std::vector<std::int64_t>{2}), AxisError);
}

TEST(Reduce, EmptyAxes) {
    const auto e = Tensor::zeros(Shape{0, 3});
    EXPECT_EQ(sum(e).item(), 0.0f);
    EXPECT_TRUE(std::isnan(mean(e).item()));
    EXPECT_THROW(max(e), ShapeError);
    EXPECT_EQ(vals(sum(e, std::vector<std::int64_t>{0})), (std::vector<float>{0, 0, 0}));
}

TEST(Reduce, StridedInput) {
    const auto t = transpose2d(tensor_of({2, 3}, {1, 2, 3, 4, 5, 6}));
    EXPECT_EQ(vals(sum(t, std::vector<std::int64_t>{1})), (std::vector<float>{5, 7, 9}));
    EXPECT_EQ(vals(max(t, std::vector<std::int64_t>{0})), (std::vector<float>{3, 6}));
}

TEST(Reduce, DeterministicAcrossRunsAndThreadCounts) {
    const auto x = Tensor::uniform(Shape{1'000'003}, -1.0f, 1.0f, 99);
    const auto m = Tensor::uniform(Shape{700, 300}, -1.0f, 1.0f, 98);
    Tensor s1, s1b, r1, s4, r4;
    {
        ThreadCount tc(1);
        s1 = sum(x);
        s1b = sum(x);
        r1 = sum(m, std::vector<std::int64_t>{0});
    }
    {
        ThreadCount tc(4);
        s4 = sum(x);
        r4 = sum(m, std::vector<std::int64_t>{0});
    }
    EXPECT_TRUE(bit_equal(s1, s1b));
    EXPECT_TRUE(bit_equal(s1, s4));
    EXPECT_TRUE(bit_equal(r1, r4));
}

TEST(Matmul, Examples) {
    const auto eye = tensor_of({2, 2}, {1, 0, 0, 1});
    EXPECT_TRUE(bit_equal(matmul(eye, eye), eye));
    EXPECT_EQ(vals(matmul(tensor_of({1, 2}, {1, 2}), tensor_of({2, 2}, {3, 4, 5, 6}))),
              (std::vector<float>{11, 17}));
    const auto z = matmul(Tensor::zeros(Shape{3, 4}), Tensor::uniform(Shape{5, 4}, -1, 1, 3));
    EXPECT_EQ(z.shape(), (Shape{3, 5}));
    EXPECT_EQ(vals(z), std::vector<float>(15, 0.0f));
    EXPECT_THROW(matmul(Tensor::zeros(Shape{2, 3}), Tensor::zeros(Shape{2, 4})), ShapeError);
    EXPECT_THROW(matmul(Tensor::zeros(Shape{3}), Tensor::zeros(Shape{2, 3})), ShapeError);
}

TEST(Matmul, NaiveOracleBitExact) {
    std::mt19937 rng(77);
    std::uniform_int_distribution<int> ext(1, 9);
    for (int trial = 0; trial < 20; ++trial) {
        const int m = ext(rng), k = ext(rng), d = ext(rng);
        const auto xv = oracle::small_ints(rng, m * k);
        const auto wv = oracle::small_ints(rng, d * k);
        const auto y = matmul(Tensor::from_values(Shape{m, k}, xv), Tensor::from_values(Shape{d, k}, wv));
        EXPECT_EQ(vals(y), oracle::matmul_xwt(xv, wv, m, k, d));
    }
}

TEST(Matmul, TransposedOperands) {
    // xt = [[1,3,5],[2,4,6]] as a strided view of a (3,2) buffer
    const auto xt = transpose2d(tensor_of({3, 2}, {1, 2, 3, 4, 5, 6}));
    const auto wt = transpose2d(tensor_of({3, 2}, {0, 1, 2, 3, 4, 5}));
    ASSERT_FALSE(xt.is_contiguous());
    EXPECT_EQ(vals(matmul(xt, wt)), oracle::matmul_xwt({1, 3, 5, 2, 4, 6}, {0, 2, 4, 1, 3, 5}, 2, 3, 2));
}

TEST(Reshape, ViewWhenContiguous) {
    const auto a = Tensor::from_values({1, 2, 3, 4});
    const auto r = reshape(a, Shape{2, 2});
    EXPECT_EQ(r.shape(), (Shape{2, 2}));
    EXPECT_EQ(vals(r), (std::vector<float>{1, 2, 3, 4}));
    EXPECT_TRUE(r.shares_storage(a));
    EXPECT_TRUE(reshape(a, a.shape()).shares_storage(a));
    EXPECT_THROW(reshape(Tensor::zeros(Shape{2, 3}), Shape{4}), ShapeError);
}

TEST(Reshape, CopiesWhenStrided) {
    const auto a = tensor_of({2, 3}, {1, 2, 3, 4, 5, 6});
    const auto r = reshape(transpose2d(a), Shape{6});
    EXPECT_FALSE(r.shares_storage(a));
    EXPECT_EQ(vals(r), (std::vector<float>{1, 4, 2, 5, 3, 6}));
}

TEST(Transpose, StridedView) {
    const auto a = tensor_of({2, 2}, {1, 2, 3, 4});
    const auto t = transpose2d(a);
    EXPECT_EQ(vals(t), (std::vector<float>{1, 3, 2, 4}));
    EXPECT_TRUE(t.shares_storage(a));
    const auto tt = transpose2d(t);
    EXPECT_EQ(tt.strides(), a.strides());
    EXPECT_TRUE(bit_equal(tt, a));
    const auto eye = tensor_of({3, 3}, {1, 0, 0, 0, 1, 0, 0, 0, 1});
    EXPECT_TRUE(bit_equal(transpose2d(eye), eye));
    const auto row = tensor_of({1, 3}, {1, 2, 3});
    const auto col = transpose2d(row);
    EXPECT_EQ(col.shape(), (Shape{3, 1}));
    EXPECT_TRUE(col.shares_storage(row));
    EXPECT_THROW(transpose2d(Tensor::zeros(Shape{2})), ShapeError);
}

TEST(ReduceToShape, Examples) {
    EXPECT_EQ(vals(reduce_to_shape(Tensor::ones(Shape{2, 3}), Shape{3})), (std::vector<float>{2, 2, 2}));
    const auto g = Tensor::uniform(Shape{2, 3}, -1, 1, 5);
    EXPECT_TRUE(bit_equal(reduce_to_shape(g, g.shape()), g));
    const auto r = reduce_to_shape(Tensor::ones(Shape{4, 3, 5}), Shape{3, 1});
    EXPECT_EQ(r.shape(), (Shape{3, 1}));
    EXPECT_EQ(vals(r), (std::vector<float>{20, 20, 20}));
    EXPECT_THROW(reduce_to_shape(Tensor::ones(Shape{2, 3}), Shape{4}), BroadcastError);
}

TEST(ReduceToShape, CountsBroadcastCopies) {
    std::mt19937 rng(5);
    for (int trial = 0; trial < 30; ++trial) {
        const auto [sa, sb] = oracle::broadcastable_pair(rng);
        const Shape target = broadcast_shapes(Shape(sa), Shape(sb)).result_shape;
        const Shape small(sa);
        const auto r = reduce_to_shape(Tensor::ones(target), small);
        const float copies = static_cast<float>(target.numel() / std::max<std::int64_t>(small.numel(), 1));
        ASSERT_EQ(r.shape(), small);
        for (float v : vals(r)) ASSERT_EQ(v, copies);
    }
}

TEST(Views, AliasingIsObservable) {
    auto a = tensor_of({2, 2}, {1, 2, 3, 4});
    const auto t = transpose2d(a);
    const auto r = reshape(a, Shape{4});
    a.set({0, 1}, 42.0f);
    EXPECT_EQ(t.at({1, 0}), 42.0f);
    EXPECT_EQ(r.at({1}), 42.0f);
    auto span = a.mutable_span();
    span[3] = -1.0f;
    EXPECT_EQ(t.at({1, 1}), -1.0f);
}

TEST(Views, ExpandHasZeroStrides) {
    const auto b = Tensor::from_values({1, 2, 3});
    const auto e = expand(b, Shape{2, 3});
    EXPECT_EQ(e.strides(), (Strides{0, 1}));
    EXPECT_TRUE(e.shares_storage(b));
    EXPECT_EQ(vals(e), (std::vector<float>{1, 2, 3, 1, 2, 3}));
}

TEST(Views, OutOfBoundsViewRejected) {
    const auto a = Tensor::zeros(Shape{4});
    EXPECT_THROW(Tensor::from_storage(a.storage(), Shape{5}, Strides{1}, 0), ShapeError);
    EXPECT_THROW(Tensor::from_storage(a.storage(), Shape{2}, Strides{2}, 2), ShapeError);
}

TEST(Display, ShapePrefixedNestedList) {
    EXPECT_EQ(tensor_of({2, 2}, {1, 2, 3, 4}).str(), "tensor(shape=(2, 2), [[1, 2], [3, 4]])");
    EXPECT_EQ(Tensor::scalar(5).str(), "tensor(shape=(), 5)");
}

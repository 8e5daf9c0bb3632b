#include <gtest/gtest.h>

#include <thread>

#include "tensorlite/ops.hpp"

using namespace tensorlite;
using autograd::backward;
using autograd::GradStore;

namespace {

class AutogradTest : public ::testing::Test {
protected:
    void SetUp() override { autograd::reset_tape(); }
    void TearDown() override { autograd::reset_tape(); }
};

Tensor leaf(const std::vector<std::int64_t>& shape, std::vector<float> v) {
    auto t = Tensor::from_values(Shape(shape), std::move(v));
    t.set_requires_grad();
    return t;
}

std::vector<float> grad_of(const GradStore& store, const Tensor& t) {
    auto g = store.grad(t);
    return g.defined() ? g.to_vector() : std::vector<float>{};
}

}  // namespace

TEST_F(AutogradTest, NoGradInputsPassThrough) {
    const auto a = Tensor::from_values({1, 2});
    const auto out = a + Tensor::from_values({3, 4});
    EXPECT_FALSE(out.has_node());
    EXPECT_FALSE(out.requires_grad());
    EXPECT_EQ(autograd::tape().size(), 0u);
}

TEST_F(AutogradTest, OneGradLeafAddsLeafAndOpNodes) {
    const auto x = leaf({2}, {1, 2});
    const auto before = autograd::tape().size();
    const auto out = x + Tensor::from_values({3, 4});
    EXPECT_LE(autograd::tape().size() - before, 2u);
    EXPECT_TRUE(out.has_node());
    EXPECT_TRUE(out.requires_grad());
    EXPECT_EQ(out.node()->op, "add");
    EXPECT_TRUE(out.node()->parents[0] != nullptr);
    EXPECT_TRUE(out.node()->parents[1] == nullptr);
}

TEST_F(AutogradTest, NestedRecordParentOrder) {
    const auto x = leaf({2}, {1, 2});
    const auto y = leaf({2}, {3, 4});
    const auto s = x + y;
    const auto z = s * x;
    const auto l = sum(z);
    std::vector<std::string> ops;
    for (const auto& n : autograd::tape().nodes())
        if (!n->is_leaf()) ops.push_back(n->op);
    EXPECT_EQ(ops, (std::vector<std::string>{"add", "mul", "sum"}));
    EXPECT_EQ(s.node()->parents[0], x.node());
    EXPECT_EQ(s.node()->parents[1], y.node());
    EXPECT_EQ(z.node()->parents[0], s.node());
    EXPECT_EQ(z.node()->parents[1], x.node());
    EXPECT_EQ(l.node()->parents[0], z.node());
    for (const auto& n : autograd::tape().nodes())
        for (const auto& p : n->parents)
            if (p) EXPECT_LT(p->id, n->id);
}

TEST_F(AutogradTest, SumGivesOnes) {
    const auto x = leaf({3}, {1, 2, 3});
    const auto g = backward(sum(x));
    EXPECT_EQ(grad_of(g, x), (std::vector<float>{1, 1, 1}));
}

TEST_F(AutogradTest, HadamardSwapsOperands) {
    const auto x = leaf({3}, {1, 2, 3});
    const auto y = leaf({3}, {4, 5, 6});
    const auto g = backward(sum(x * y));
    EXPECT_EQ(grad_of(g, x), y.to_vector());
    EXPECT_EQ(grad_of(g, y), x.to_vector());
}

TEST_F(AutogradTest, MatmulOnesClosedForm) {
    auto x = Tensor::ones(Shape{2, 3});
    auto w = Tensor::ones(Shape{4, 3});
    x.set_requires_grad();
    w.set_requires_grad();
    const auto g = backward(sum(matmul(x, w)));
    EXPECT_EQ(g.grad(x).shape(), (Shape{2, 3}));
    EXPECT_EQ(g.grad(w).shape(), (Shape{4, 3}));
    EXPECT_EQ(grad_of(g, x), std::vector<float>(6, 4.0f));
    EXPECT_EQ(grad_of(g, w), std::vector<float>(12, 2.0f));
}

TEST_F(AutogradTest, MatmulPullbackShapes) {
    auto x = Tensor::uniform(Shape{5, 3}, -1, 1, 1).set_requires_grad();
    auto w = Tensor::uniform(Shape{2, 3}, -1, 1, 2).set_requires_grad();
    const auto y = matmul(x, w);
    const auto g = backward(y, Tensor::ones(Shape{5, 2}));
    EXPECT_EQ(g.grad(x).shape(), (Shape{5, 3}));
    EXPECT_EQ(g.grad(w).shape(), (Shape{2, 3}));
}

TEST_F(AutogradTest, BroadcastAddFoldsBias) {
    auto x = Tensor::uniform(Shape{2, 3}, -1, 1, 3).set_requires_grad();
    const auto b = leaf({3}, {0, 0, 0});
    const auto g = backward(sum(x + b));
    EXPECT_EQ(grad_of(g, b), (std::vector<float>{2, 2, 2}));
    EXPECT_EQ(grad_of(g, x), std::vector<float>(6, 1.0f));
}

TEST_F(AutogradTest, MeanScalesByCount) {
    const auto x = leaf({4}, {1, 2, 3, 4});
    const auto g = backward(mean(x));
    EXPECT_EQ(grad_of(g, x), std::vector<float>(4, 0.25f));
}

TEST_F(AutogradTest, MaxTiesGoToFirst) {
    const auto x = leaf({2, 3}, {1, 3, 3, 5, 2, 5});
    const auto g = backward(sum(max(x, std::vector<std::int64_t>{1})));
    EXPECT_EQ(grad_of(g, x), (std::vector<float>{0, 1, 0, 1, 0, 0}));
    const auto g2 = backward(max(x));
    EXPECT_EQ(grad_of(g2, x), (std::vector<float>{0, 0, 0, 1, 0, 0}));
}

TEST_F(AutogradTest, ViewsPropagate) {
    const auto x = leaf({2, 3}, {1, 2, 3, 4, 5, 6});
    const auto w = Tensor::from_values(Shape{3, 2}, {1, 2, 3, 4, 5, 6});
    const auto g = backward(sum(transpose2d(x) * w));
    // x̄ = wᵀ
    EXPECT_EQ(grad_of(g, x), (std::vector<float>{1, 3, 5, 2, 4, 6}));
    const auto r = leaf({4}, {1, 2, 3, 4});
    const auto g2 = backward(sum(reshape(r, Shape{2, 2}) * Tensor::from_values(Shape{2, 2}, {1, 2, 3, 4})));
    EXPECT_EQ(grad_of(g2, r), (std::vector<float>{1, 2, 3, 4}));
    const auto e = leaf({3}, {1, 2, 3});
    const auto g3 = backward(sum(expand(e, Shape{4, 3})));
    EXPECT_EQ(grad_of(g3, e), (std::vector<float>{4, 4, 4}));
}

TEST_F(AutogradTest, UnaryPullbacks) {
    const auto x = leaf({3}, {0.5f, 1.0f, 4.0f});
    EXPECT_EQ(grad_of(backward(sum(neg(x))), x), (std::vector<float>{-1, -1, -1}));
    EXPECT_EQ(grad_of(backward(sum(sqrt(x))), x), (std::vector<float>{1.0f / (2 * std::sqrt(0.5f)), 0.5f, 0.25f}));
    EXPECT_EQ(grad_of(backward(sum(log(x))), x), (std::vector<float>{2.0f, 1.0f, 0.25f}));
    const auto e = leaf({2}, {0.0f, 1.0f});
    EXPECT_EQ(grad_of(backward(sum(exp(e))), e), (std::vector<float>{1.0f, std::exp(1.0f)}));
    const auto a = leaf({3}, {-2.0f, 0.0f, 3.0f});
    EXPECT_EQ(grad_of(backward(sum(abs(a))), a), (std::vector<float>{-1, 0, 1}));
    const auto d = leaf({1}, {2.0f});
    const auto n = leaf({1}, {3.0f});
    const auto g = backward(sum(n / d));
    EXPECT_EQ(grad_of(g, n), (std::vector<float>{0.5f}));
    EXPECT_EQ(grad_of(g, d), (std::vector<float>{-0.75f}));
}

TEST_F(AutogradTest, FanOutAccumulates) {
    const auto x = leaf({3}, {1, -2, 3});
    const auto seed = Tensor::from_values({0.5f, 1.5f, -2.0f});
    const auto g = backward(x + x, seed);
    EXPECT_EQ(grad_of(g, x), (std::vector<float>{1.0f, 3.0f, -4.0f}));
}

TEST_F(AutogradTest, SeedLinearity) {
    const auto x = leaf({2, 3}, {0.3f, -1.2f, 2.0f, 0.7f, 1.1f, -0.4f});
    const auto w = leaf({4, 3}, {0.1f, 0.2f, -0.3f, 0.4f, -0.5f, 0.6f, 0.7f, 0.8f, -0.9f, 1.0f, 1.1f, 1.2f});
    const auto h = exp(matmul(x, w)) / (abs(matmul(x, w)) + 1.0f);
    const auto y = mean(h * h, std::vector<std::int64_t>{0});
    const auto v = Tensor::from_values({1.5f, -0.25f, 3.0f, 0.125f});
    const auto g1 = backward(y, v);
    const auto g2 = backward(y, v * 2.0f);
    for (const auto* t : {&x, &w}) {
        const auto a = grad_of(g1, *t);
        const auto b = grad_of(g2, *t);
        ASSERT_EQ(a.size(), b.size());
        for (std::size_t i = 0; i < a.size(); ++i) EXPECT_EQ(b[i], 2.0f * a[i]);
    }
}

TEST_F(AutogradTest, UnreachedTensorsGetNoEntry) {
    const auto x = leaf({2}, {1, 2});
    const auto y = leaf({2}, {3, 4});
    const auto side = y * 3.0f;
    const auto g = backward(sum(x * 2.0f));
    EXPECT_TRUE(g.has(x));
    EXPECT_FALSE(g.has(y));
    EXPECT_FALSE(g.has(side));
}

TEST_F(AutogradTest, OnePullbackPerReachableOpNode) {
    const auto x = leaf({3}, {1, 2, 3});
    const auto y = leaf({3}, {4, 5, 6});
    const auto unused = exp(y);
    const auto l = sum((x * y + x) / (y - 1.0f));
    const auto g = backward(l);
    // mul, add, sub, div, sum: every op node reachable from l
    EXPECT_EQ(g.pullback_calls(), 5u);
    std::size_t op_nodes = 0;
    for (const auto& n : autograd::tape().nodes()) op_nodes += n->is_leaf() ? 0 : 1;
    EXPECT_EQ(op_nodes, 6u);
}

TEST_F(AutogradTest, IntermediateGradientsAreExposed) {
    const auto x = leaf({2}, {1, 2});
    const auto h = x * 3.0f;
    const auto g = backward(sum(h * h));
    EXPECT_EQ(grad_of(g, h), (std::vector<float>{6, 12}));
    EXPECT_EQ(grad_of(g, x), (std::vector<float>{18, 36}));
}

TEST_F(AutogradTest, Errors) {
    const auto x = leaf({3}, {1, 2, 3});
    EXPECT_THROW(backward(x * 2.0f), SeedRequiredError);
    EXPECT_THROW(backward(Tensor::scalar(1.0f)), NoGraphError);
    EXPECT_THROW(backward(x * 2.0f, Tensor::ones(Shape{2})), ShapeError);
    const auto l = sum(x);
    autograd::reset_tape();
    EXPECT_THROW(backward(l), NoGraphError);
}

TEST_F(AutogradTest, InPlaceMutationDetected) {
    auto x = leaf({2}, {1, 2});
    const auto l = sum(x * x);
    x.set({0}, 5.0f);
    EXPECT_THROW(backward(l), InPlaceModifiedError);
}

TEST_F(AutogradTest, ZeroGradClearsAndReaccumulates) {
    const auto x = leaf({3}, {1, 2, 3});
    const auto l = sum(x * x);
    GradStore store;
    autograd::backward_into(store, l);
    const auto first = grad_of(store, x);
    autograd::zero_grad(store);
    EXPECT_FALSE(store.has(x));
    EXPECT_TRUE(store.empty());
    autograd::zero_grad(store);
    EXPECT_TRUE(store.empty());
    autograd::backward_into(store, l);
    EXPECT_EQ(grad_of(store, x), first);
    autograd::backward_into(store, l);
    EXPECT_EQ(grad_of(store, x), (std::vector<float>{4, 8, 12}));
}

TEST_F(AutogradTest, NoGradScope) {
    const auto x = leaf({2}, {1, 2});
    const auto before = autograd::tape().size();
    const auto y = autograd::no_grad([&] { return x * 2.0f; });
    EXPECT_FALSE(y.has_node());
    EXPECT_EQ(autograd::tape().size(), before);
    {
        autograd::NoGradGuard outer;
        {
            autograd::NoGradGuard inner;
            EXPECT_FALSE(autograd::is_recording());
        }
        EXPECT_FALSE(autograd::is_recording());
    }
    EXPECT_TRUE(autograd::is_recording());
    EXPECT_THROW(autograd::no_grad([]() -> int { throw ValueError("boom"); }), ValueError);
    EXPECT_TRUE(autograd::is_recording());
}

TEST_F(AutogradTest, LeavesRelinkAfterReset) {
    const auto x = leaf({2}, {1, 2});
    (void)backward(sum(x));
    autograd::reset_tape();
    EXPECT_FALSE(autograd::is_recorded(x));
    const auto g = backward(sum(x * x));
    EXPECT_EQ(grad_of(g, x), (std::vector<float>{2, 4}));
    EXPECT_EQ(autograd::tape().size(), 3u);
}

TEST_F(AutogradTest, BackwardDoesNotRecord) {
    const auto x = leaf({2}, {1, 2});
    const auto l = sum(exp(x) * x);
    const auto before = autograd::tape().size();
    const auto g = backward(l);
    EXPECT_EQ(autograd::tape().size(), before);
    EXPECT_FALSE(g.grad(x).has_node());
}

TEST_F(AutogradTest, TapesAreThreadLocal) {
    const auto x = leaf({2}, {1, 2});
    (void)(x * 2.0f);
    const auto main_size = autograd::tape().size();
    std::size_t worker_size = 0;
    std::vector<float> worker_grad;
    std::thread([&] {
        auto y = Tensor::from_values({3, 4}).set_requires_grad();
        auto g = backward(sum(y * y));
        worker_size = autograd::tape().size();
        worker_grad = g.grad(y).to_vector();
    }).join();
    EXPECT_EQ(autograd::tape().size(), main_size);
    EXPECT_EQ(worker_size, 3u);
    EXPECT_EQ(worker_grad, (std::vector<float>{6, 8}));
}

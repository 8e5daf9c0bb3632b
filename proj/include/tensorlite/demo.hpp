#pragma once

#include <cmath>
#include <cstdint>
#include <cstdio>
#include <optional>
#include <ostream>
#include <random>
#include <string>
#include <vector>

#include "tensorlite/nn.hpp"
#include "tensorlite/optim.hpp"

namespace tensorlite::demo {

/// Unset fields take the task defaults: xor trains 5000 epochs of SGD at
/// η=0.5, blobs trains 200 steps of Adam at η=0.01.
struct Config {
    std::string task = "xor";
    std::uint64_t seed = 0;
    std::optional<std::int64_t> epochs;
    std::optional<float> lr;
    std::optional<std::string> optimizer;
};

struct Result {
    std::string log;
    float final_loss = 0.0f;
    std::optional<float> accuracy;
    std::int64_t epochs = 0;
    bool diverged = false;
    bool threshold_met = true;
    std::string diagnostic;

    /// 0 iff training stayed finite and, when any step ran, the task
    /// threshold was met.
    int exit_code() const { return diverged || !threshold_met ? 1 : 0; }
};

inline constexpr float kXorMseTarget = 0.05f;
inline constexpr float kBlobsAccuracyTarget = 0.95f;

namespace detail {

inline std::string fmt(float v) {
    char buf[32];
    std::snprintf(buf, sizeof buf, "%.9g", static_cast<double>(v));
    return buf;
}

/// Fraction of rows whose argmax equals the label.
inline float accuracy(const Tensor& logits, const std::vector<std::int64_t>& labels) {
    const auto z = logits.to_vector();
    const auto classes = logits.shape()[1];
    std::int64_t hits = 0;
    for (std::size_t i = 0; i < labels.size(); ++i) {
        std::int64_t best = 0;
        for (std::int64_t c = 1; c < classes; ++c)
            if (z[i * classes + c] > z[i * classes + best]) best = c;
        hits += best == labels[i];
    }
    return static_cast<float>(hits) / static_cast<float>(labels.size());
}

/// Shared loop: log line for epochs 0..E, one optimizer step between lines.
template <class Forward>
Result train(nn::Sequential& net, optim::Optimizer& opt, std::int64_t epochs, Forward forward, std::ostream* out) {
    Result r;
    r.epochs = epochs;
    const auto params = net.parameters();
    for (std::int64_t e = 0; e <= epochs; ++e) {
        autograd::reset_tape();
        auto [loss, acc] = forward();
        const float value = loss.item();
        std::string line = std::to_string(e) + "," + fmt(value);
        if (acc) line += "," + fmt(*acc);
        line += "\n";
        r.log += line;
        if (out) *out << line;
        r.final_loss = value;
        r.accuracy = acc;
        if (!std::isfinite(value)) {
            r.diverged = true;
            r.diagnostic = "loss became " + fmt(value) + " at epoch " + std::to_string(e);
            break;
        }
        if (e == epochs) break;
        opt.step(params, autograd::backward(loss));
    }
    autograd::reset_tape();
    return r;
}

inline void summarize(Result& r, std::ostream* out) {
    std::string line = "final," + fmt(r.final_loss);
    if (r.accuracy) line += "," + fmt(*r.accuracy);
    line += r.diverged ? ",DIVERGED\n" : (r.threshold_met ? ",PASS\n" : ",FAIL\n");
    r.log += line;
    if (out) *out << line;
}

}  // namespace detail

/// 2–8–1 network (dense, tanh, dense, sigmoid) fit to the four XOR points
/// by full-batch MSE.
inline Result run_xor(const Config& c, std::ostream* out = nullptr) {
    nn::Sequential net;
    net.emplace<nn::Dense>(2, 8, nn::detail::sub_seed(c.seed, 0));
    net.emplace<nn::ActivationLayer>(nn::Activation::tanh);
    net.emplace<nn::Dense>(8, 1, nn::detail::sub_seed(c.seed, 1));
    net.emplace<nn::ActivationLayer>(nn::Activation::sigmoid);
    auto opt = optim::make_optimizer(c.optimizer.value_or("sgd"), c.lr.value_or(0.5f));
    const auto x = Tensor::from_values(Shape{4, 2}, {0, 0, 0, 1, 1, 0, 1, 1});
    const auto y = Tensor::from_values(Shape{4, 1}, {0, 1, 1, 0});
    const auto epochs = c.epochs.value_or(5000);
    auto r = detail::train(
        net, *opt, epochs, [&] { return std::pair{nn::mse(net(x), y), std::optional<float>{}}; }, out);
    r.threshold_met = !r.diverged && (epochs == 0 || r.final_loss < kXorMseTarget);
    detail::summarize(r, out);
    return r;
}

/// Two isotropic Gaussian clouds in 2-D, 100 points each, at (−2,−2) and
/// (2,2) with unit variance. Labels are 0 and 1.
inline std::pair<Tensor, std::vector<std::int64_t>> make_blobs(std::uint64_t seed, std::int64_t per_class = 100) {
    std::mt19937_64 rng(seed);
    std::normal_distribution<float> noise(0.0f, 1.0f);
    std::vector<float> xs;
    std::vector<std::int64_t> labels;
    for (std::int64_t i = 0; i < 2 * per_class; ++i) {
        const std::int64_t label = i % 2;
        const float centre = label == 0 ? -2.0f : 2.0f;
        xs.push_back(centre + noise(rng));
        xs.push_back(centre + noise(rng));
        labels.push_back(label);
    }
    return {Tensor::from_values(Shape{2 * per_class, 2}, std::move(xs)), std::move(labels)};
}

/// dense(2→16), relu, dense(16→2) trained with cross-entropy.
inline Result run_blobs(const Config& c, std::ostream* out = nullptr) {
    auto [x, labels] = make_blobs(nn::detail::sub_seed(c.seed, 100));
    nn::Sequential net;
    net.emplace<nn::Dense>(2, 16, nn::detail::sub_seed(c.seed, 0));
    net.emplace<nn::ActivationLayer>(nn::Activation::relu);
    net.emplace<nn::Dense>(16, 2, nn::detail::sub_seed(c.seed, 1));
    auto opt = optim::make_optimizer(c.optimizer.value_or("adam"), c.lr.value_or(0.01f));
    const auto epochs = c.epochs.value_or(200);
    auto r = detail::train(
        net, *opt, epochs,
        [&] {
            auto logits = net(x);
            const float acc = detail::accuracy(logits, labels);
            return std::pair{nn::cross_entropy(logits, labels), std::optional<float>{acc}};
        },
        out);
    r.threshold_met = !r.diverged && (epochs == 0 || (r.accuracy && *r.accuracy >= kBlobsAccuracyTarget));
    detail::summarize(r, out);
    return r;
}

inline Result run(const Config& c, std::ostream* out = nullptr) {
    if (c.epochs && *c.epochs < 0) throw ValueError("epochs must be nonnegative");
    if (c.task == "xor") return run_xor(c, out);
    if (c.task == "blobs") return run_blobs(c, out);
    throw ValueError("unknown demo task '" + c.task + "' (expected xor or blobs)");
}

}  // namespace tensorlite::demo

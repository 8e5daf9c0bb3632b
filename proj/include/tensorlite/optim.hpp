#pragma once

#include <cmath>
#include <cstdint>
#include <map>
#include <memory>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "tensorlite/autograd.hpp"
#include "tensorlite/nn/layers.hpp"

namespace tensorlite::optim {

// Per-parameter update rules on flat spans. Slots are sized and zeroed on
// first use; afterwards their size must match the parameter.

/// v ← μv + g + λθ; θ ← θ − ηv. Weight decay is coupled through the velocity.
struct SgdOptions {
    float lr = 0.01f;
    float momentum = 0.0f;
    float weight_decay = 0.0f;
};

struct SgdSlots {
    std::vector<float> velocity;
};

/// Bias-corrected moments; ε is added after the square root.
struct AdamOptions {
    float lr = 0.001f;
    float beta1 = 0.9f;
    float beta2 = 0.999f;
    float eps = 1e-8f;
};

struct AdamSlots {
    std::vector<float> m;
    std::vector<float> v;
    std::int64_t t = 0;
};

/// v ← ρv + (1−ρ)g²; θ ← θ − η·g/√(v+ε). Here ε sits inside the root.
struct RmspropOptions {
    float lr = 0.01f;
    float rho = 0.99f;
    float eps = 1e-8f;
};

struct RmspropSlots {
    std::vector<float> v;
};

namespace detail {

inline void check_sizes(std::span<const float> theta, std::span<const float> g) {
    if (theta.size() != g.size())
        throw ShapeError("gradient has " + std::to_string(g.size()) + " elements, parameter has " +
                         std::to_string(theta.size()));
}

inline void ready_slot(std::vector<float>& slot, std::size_t n) {
    if (slot.empty()) slot.assign(n, 0.0f);
    if (slot.size() != n)
        throw ShapeError("optimizer slot has " + std::to_string(slot.size()) + " elements, parameter has " +
                         std::to_string(n));
}

}  // namespace detail

inline void sgd_step(std::span<float> theta, std::span<const float> g, SgdSlots& s, const SgdOptions& o) {
    detail::check_sizes(theta, g);
    detail::ready_slot(s.velocity, theta.size());
    for (std::size_t i = 0; i < theta.size(); ++i) {
        s.velocity[i] = o.momentum * s.velocity[i] + g[i] + o.weight_decay * theta[i];
        theta[i] -= o.lr * s.velocity[i];
    }
}

inline void adam_step(std::span<float> theta, std::span<const float> g, AdamSlots& s, const AdamOptions& o) {
    detail::check_sizes(theta, g);
    detail::ready_slot(s.m, theta.size());
    detail::ready_slot(s.v, theta.size());
    ++s.t;
    const auto t = static_cast<double>(s.t);
    const float c1 = static_cast<float>(1.0 - std::pow(static_cast<double>(o.beta1), t));
    const float c2 = static_cast<float>(1.0 - std::pow(static_cast<double>(o.beta2), t));
    for (std::size_t i = 0; i < theta.size(); ++i) {
        s.m[i] = o.beta1 * s.m[i] + (1.0f - o.beta1) * g[i];
        s.v[i] = o.beta2 * s.v[i] + (1.0f - o.beta2) * g[i] * g[i];
        const float m_hat = s.m[i] / c1;
        const float v_hat = s.v[i] / c2;
        theta[i] -= o.lr * m_hat / (std::sqrt(v_hat) + o.eps);
    }
}

inline void rmsprop_step(std::span<float> theta, std::span<const float> g, RmspropSlots& s, const RmspropOptions& o) {
    detail::check_sizes(theta, g);
    detail::ready_slot(s.v, theta.size());
    for (std::size_t i = 0; i < theta.size(); ++i) {
        s.v[i] = o.rho * s.v[i] + (1.0f - o.rho) * g[i] * g[i];
        theta[i] -= o.lr * g[i] / std::sqrt(s.v[i] + o.eps);
    }
}

/// Applies one rule to a named parameter list, keeping slots by name.
/// Parameters without a gradient entry are skipped and their slots are
/// left untouched.
class Optimizer {
public:
    virtual ~Optimizer() = default;

    void step(const std::vector<nn::NamedTensor>& params, const autograd::GradStore& grads) {
        for (const auto& p : params) {
            if (!grads.has(p.tensor)) continue;
            const Tensor g = grads.grad(p.tensor);
            if (g.shape() != p.tensor.shape())
                throw ShapeError("gradient for " + p.name + " has shape " + g.shape().str() + ", parameter has " +
                                 p.tensor.shape().str());
            if (!p.tensor.is_contiguous())
                throw ValueError("parameter " + p.name + " must be contiguous");
            Tensor target = p.tensor;
            update(p.name, target.mutable_span(), g.contiguous().span());
        }
        ++steps_;
    }

    std::int64_t steps() const noexcept { return steps_; }
    virtual std::string name() const = 0;
    virtual float lr() const = 0;

protected:
    virtual void update(const std::string& name, std::span<float> theta, std::span<const float> g) = 0;

private:
    std::int64_t steps_ = 0;
};

class Sgd final : public Optimizer {
public:
    explicit Sgd(SgdOptions opts = {}) : opts_(opts) {}
    std::string name() const override { return "sgd"; }
    float lr() const override { return opts_.lr; }
    const SgdOptions& options() const noexcept { return opts_; }
    const SgdSlots* slots(const std::string& param) const {
        auto it = slots_.find(param);
        return it == slots_.end() ? nullptr : &it->second;
    }

protected:
    void update(const std::string& n, std::span<float> theta, std::span<const float> g) override {
        sgd_step(theta, g, slots_[n], opts_);
    }

private:
    SgdOptions opts_;
    std::map<std::string, SgdSlots> slots_;
};

class Adam final : public Optimizer {
public:
    explicit Adam(AdamOptions opts = {}) : opts_(opts) {}
    std::string name() const override { return "adam"; }
    float lr() const override { return opts_.lr; }
    const AdamOptions& options() const noexcept { return opts_; }
    const AdamSlots* slots(const std::string& param) const {
        auto it = slots_.find(param);
        return it == slots_.end() ? nullptr : &it->second;
    }

protected:
    void update(const std::string& n, std::span<float> theta, std::span<const float> g) override {
        adam_step(theta, g, slots_[n], opts_);
    }

private:
    AdamOptions opts_;
    std::map<std::string, AdamSlots> slots_;
};

class Rmsprop final : public Optimizer {
public:
    explicit Rmsprop(RmspropOptions opts = {}) : opts_(opts) {}
    std::string name() const override { return "rmsprop"; }
    float lr() const override { return opts_.lr; }
    const RmspropOptions& options() const noexcept { return opts_; }
    const RmspropSlots* slots(const std::string& param) const {
        auto it = slots_.find(param);
        return it == slots_.end() ? nullptr : &it->second;
    }

protected:
    void update(const std::string& n, std::span<float> theta, std::span<const float> g) override {
        rmsprop_step(theta, g, slots_[n], opts_);
    }

private:
    RmspropOptions opts_;
    std::map<std::string, RmspropSlots> slots_;
};

/// "sgd", "adam" or "rmsprop" with default hyperparameters, optionally
/// overriding the learning rate.
inline std::unique_ptr<Optimizer> make_optimizer(std::string_view kind, std::optional<float> lr = std::nullopt) {
    if (kind == "sgd") {
        SgdOptions o;
        if (lr) o.lr = *lr;
        return std::make_unique<Sgd>(o);
    }
    if (kind == "adam") {
        AdamOptions o;
        if (lr) o.lr = *lr;
        return std::make_unique<Adam>(o);
    }
    if (kind == "rmsprop") {
        RmspropOptions o;
        if (lr) o.lr = *lr;
        return std::make_unique<Rmsprop>(o);
    }
    throw ValueError("unknown optimizer '" + std::string(kind) + "'");
}

}  // namespace tensorlite::optim

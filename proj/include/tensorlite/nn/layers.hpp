#pragma once

#include <cmath>
#include <cstdint>
#include <memory>
#include <random>
#include <string>
#include <utility>
#include <vector>

#include "tensorlite/nn/functional.hpp"

namespace tensorlite::nn {

struct NamedTensor {
    std::string name;
    Tensor tensor;
};

/// A layer: a forward function plus named parameters and buffers.
class Module {
public:
    virtual ~Module() = default;

    virtual Tensor forward(const Tensor& x) = 0;
    virtual std::string name() const = 0;
    virtual std::vector<NamedTensor> parameters() const { return {}; }
    virtual std::vector<NamedTensor> buffers() const { return {}; }

    virtual void set_mode(Mode m) { mode_ = m; }
    Mode mode() const noexcept { return mode_; }
    void train() { set_mode(Mode::train); }
    void eval() { set_mode(Mode::eval); }

    Tensor operator()(const Tensor& x) { return forward(x); }

protected:
    Mode mode_ = Mode::train;
};

namespace detail {

/// Independent sub-seeds for the tensors of one layer.
inline std::uint64_t sub_seed(std::uint64_t seed, std::uint64_t index) {
    std::seed_seq seq{static_cast<std::uint32_t>(seed), static_cast<std::uint32_t>(seed >> 32),
                      static_cast<std::uint32_t>(index)};
    std::uint32_t out[2];
    seq.generate(out, out + 2);
    return (static_cast<std::uint64_t>(out[0]) << 32) | out[1];
}

inline Tensor fan_in_uniform(const Shape& shape, std::int64_t fan_in, std::uint64_t seed) {
    const float bound = 1.0f / std::sqrt(static_cast<float>(std::max<std::int64_t>(fan_in, 1)));
    Tensor t = Tensor::uniform(shape, -bound, bound, seed);
    t.set_requires_grad(true);
    return t;
}

}  // namespace detail

/// y = x Wᵀ + b with W (out×in), b (out), both uniform in ±1/√in.
class Dense final : public Module {
public:
    Dense(std::int64_t in_features, std::int64_t out_features, std::uint64_t seed, bool bias = true)
        : weight_(detail::fan_in_uniform(Shape{out_features, in_features}, in_features, detail::sub_seed(seed, 0))) {
        if (bias) bias_ = detail::fan_in_uniform(Shape{out_features}, in_features, detail::sub_seed(seed, 1));
    }

    Tensor forward(const Tensor& x) override {
        if (x.rank() != 2 || x.shape()[1] != weight_.shape()[1])
            throw ShapeError("dense expects (b, " + std::to_string(weight_.shape()[1]) + ") input, got " +
                             x.shape().str());
        return dense(x, weight_, bias_);
    }
    std::string name() const override { return "Dense"; }
    std::vector<NamedTensor> parameters() const override {
        std::vector<NamedTensor> p{{"weight", weight_}};
        if (bias_.defined()) p.push_back({"bias", bias_});
        return p;
    }

    const Tensor& weight() const noexcept { return weight_; }
    const Tensor& bias() const noexcept { return bias_; }

private:
    Tensor weight_;
    Tensor bias_;
};

class Conv2d final : public Module {
public:
    Conv2d(const ConvSpec& spec, std::uint64_t seed, bool bias = true)
        : spec_(spec),
          weight_(detail::fan_in_uniform(Shape{spec.out_channels, spec.in_channels, spec.kernel_h, spec.kernel_w},
                                         spec.in_channels * spec.kernel_h * spec.kernel_w, detail::sub_seed(seed, 0))) {
        if (bias)
            bias_ = detail::fan_in_uniform(Shape{spec.out_channels}, spec.in_channels * spec.kernel_h * spec.kernel_w,
                                           detail::sub_seed(seed, 1));
    }

    Tensor forward(const Tensor& x) override { return conv2d(x, spec_, weight_, bias_); }
    std::string name() const override { return "Conv2d"; }
    std::vector<NamedTensor> parameters() const override {
        std::vector<NamedTensor> p{{"weight", weight_}};
        if (bias_.defined()) p.push_back({"bias", bias_});
        return p;
    }

    const ConvSpec& spec() const noexcept { return spec_; }
    const Tensor& weight() const noexcept { return weight_; }
    const Tensor& bias() const noexcept { return bias_; }

private:
    ConvSpec spec_;
    Tensor weight_;
    Tensor bias_;
};

class ActivationLayer final : public Module {
public:
    explicit ActivationLayer(Activation kind) : kind_(kind) {}

    Tensor forward(const Tensor& x) override { return activation(kind_, x); }
    std::string name() const override {
        switch (kind_) {
            case Activation::relu: return "ReLU";
            case Activation::sigmoid: return "Sigmoid";
            case Activation::tanh: return "Tanh";
            case Activation::gelu: return "GELU";
        }
        return "Activation";
    }

private:
    Activation kind_;
};

/// Batch normalization over (b×d) input. γ starts at 1, β at 0, running
/// mean at 0 and running variance at 1.
class BatchNorm1d final : public Module {
public:
    explicit BatchNorm1d(std::int64_t features, float eps = 1e-5f, float momentum = 0.1f)
        : gamma_(Tensor::ones(Shape{features})),
          beta_(Tensor::zeros(Shape{features})),
          running_mean_(Tensor::zeros(Shape{features})),
          running_var_(Tensor::ones(Shape{features})),
          eps_(eps),
          momentum_(momentum) {
        gamma_.set_requires_grad(true);
        beta_.set_requires_grad(true);
    }

    Tensor forward(const Tensor& x) override {
        return batch_norm(x, gamma_, beta_, running_mean_, running_var_, mode_, eps_, momentum_);
    }
    std::string name() const override { return "BatchNorm1d"; }
    std::vector<NamedTensor> parameters() const override { return {{"gamma", gamma_}, {"beta", beta_}}; }
    std::vector<NamedTensor> buffers() const override {
        return {{"running_mean", running_mean_}, {"running_var", running_var_}};
    }

    const Tensor& gamma() const noexcept { return gamma_; }
    const Tensor& beta() const noexcept { return beta_; }
    const Tensor& running_mean() const noexcept { return running_mean_; }
    const Tensor& running_var() const noexcept { return running_var_; }

private:
    Tensor gamma_;
    Tensor beta_;
    Tensor running_mean_;
    Tensor running_var_;
    float eps_;
    float momentum_;
};

/// Each train-mode forward draws a fresh mask from (seed, call count).
class Dropout final : public Module {
public:
    Dropout(float p, std::uint64_t seed) : p_(p), seed_(seed) {
        if (!(p >= 0.0f && p < 1.0f)) throw ValueError("dropout probability must be in [0, 1)");
    }

    Tensor forward(const Tensor& x) override {
        if (mode_ == Mode::eval) return x;
        return dropout(x, p_, mode_, detail::sub_seed(seed_, calls_++));
    }
    std::string name() const override { return "Dropout"; }

    float p() const noexcept { return p_; }

private:
    float p_;
    std::uint64_t seed_;
    std::uint64_t calls_ = 0;
};

/// Ordered composition. Parameters are named "layer{i}.{name}" and a
/// tensor reachable through several layers is listed once, under its
/// first name.
class Sequential final : public Module {
public:
    Sequential() = default;
    Sequential(std::initializer_list<std::shared_ptr<Module>> layers) : layers_(layers) {}

    Sequential& add(std::shared_ptr<Module> layer) {
        layer->set_mode(mode_);
        layers_.push_back(std::move(layer));
        return *this;
    }

    template <class M, class... Args>
    M& emplace(Args&&... args) {
        auto layer = std::make_shared<M>(std::forward<Args>(args)...);
        M& ref = *layer;
        add(std::move(layer));
        return ref;
    }

    Tensor forward(const Tensor& x) override {
        Tensor h = x;
        for (std::size_t i = 0; i < layers_.size(); ++i) {
            try {
                h = layers_[i]->forward(h);
            } catch (const BroadcastError& e) {
                throw BroadcastError(where(i) + e.what(), e.axis());
            } catch (const ShapeError& e) {
                throw ShapeError(where(i) + e.what());
            }
        }
        return h;
    }

    std::string name() const override { return "Sequential"; }

    std::vector<NamedTensor> parameters() const override { return collect(&Module::parameters); }
    std::vector<NamedTensor> buffers() const override { return collect(&Module::buffers); }

    void set_mode(Mode m) override {
        mode_ = m;
        for (auto& l : layers_) l->set_mode(m);
    }

    std::size_t size() const noexcept { return layers_.size(); }
    Module& operator[](std::size_t i) const { return *layers_.at(i); }

private:
    std::string where(std::size_t i) const {
        return "layer " + std::to_string(i) + " (" + layers_[i]->name() + "): ";
    }

    std::vector<NamedTensor> collect(std::vector<NamedTensor> (Module::*get)() const) const {
        std::vector<NamedTensor> out;
        for (std::size_t i = 0; i < layers_.size(); ++i)
            for (auto& nt : ((*layers_[i]).*get)()) {
                bool seen = false;
                for (const auto& o : out) seen = seen || o.tensor.same(nt.tensor);
                if (!seen) out.push_back({"layer" + std::to_string(i) + "." + nt.name, nt.tensor});
            }
        return out;
    }

    std::vector<std::shared_ptr<Module>> layers_;
};

/// Total element count over a parameter list.
inline std::int64_t parameter_count(const std::vector<NamedTensor>& params) {
    std::int64_t n = 0;
    for (const auto& p : params) n += p.tensor.numel();
    return n;
}

}  // namespace tensorlite::nn

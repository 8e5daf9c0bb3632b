#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <functional>
#include <numeric>
#include <random>
#include <string>
#include <string_view>
#include <vector>

#include "tensorlite/gradcheck.hpp"
#include "tensorlite/nn.hpp"

namespace tensorlite::gradcheck {

/// One named check. `build` returns the parameters for a seed and the
/// objective over them; the objective is sum(out ⊙ R) for a fixed random R.
struct Case {
    std::string name;
    std::function<std::pair<std::vector<NamedTensor>, Objective>(std::uint64_t seed)> build;
};

namespace suite {

/// Deterministic per-case random source.
class Sampler {
public:
    explicit Sampler(std::uint64_t seed) : rng_(seed) {}

    Tensor uniform(const Shape& s, float lo = -1.0f, float hi = 1.0f) {
        std::uniform_real_distribution<float> d(lo, hi);
        std::vector<float> v(static_cast<std::size_t>(s.numel()));
        for (auto& x : v) x = d(rng_);
        return Tensor::from_values(s, std::move(v));
    }

    /// Magnitudes in [lo, hi] with random sign: keeps every element at
    /// least `lo` away from a kink at zero.
    Tensor away_from_zero(const Shape& s, float lo = 0.1f, float hi = 1.0f) {
        std::uniform_real_distribution<float> d(lo, hi);
        std::bernoulli_distribution sign(0.5);
        std::vector<float> v(static_cast<std::size_t>(s.numel()));
        for (auto& x : v) x = sign(rng_) ? d(rng_) : -d(rng_);
        return Tensor::from_values(s, std::move(v));
    }

    /// Distinct values with pairwise gaps of at least `gap`, shuffled, so
    /// no max reduction has a tie within a probe step.
    Tensor well_separated(const Shape& s, float gap = 0.1f) {
        std::vector<float> v(static_cast<std::size_t>(s.numel()));
        std::iota(v.begin(), v.end(), 0.0f);
        for (auto& x : v) x = (x - static_cast<float>(v.size()) / 2) * gap;
        std::shuffle(v.begin(), v.end(), rng_);
        return Tensor::from_values(s, std::move(v));
    }

    std::uint64_t next_seed() { return rng_(); }
    std::mt19937_64& engine() { return rng_; }

private:
    std::mt19937_64 rng_;
};

inline NamedTensor param(std::string name, Tensor t) {
    t.set_requires_grad(true);
    return {std::move(name), std::move(t)};
}

inline Tensor weighted(const Tensor& out, const Tensor& r) { return sum(mul(out, r)); }

/// Objective sum(fn(params) ⊙ R) with R drawn after the parameters.
template <class Fn>
std::pair<std::vector<NamedTensor>, Objective> weighted_case(Sampler& s, std::vector<NamedTensor> params,
                                                             const Shape& out_shape, Fn fn) {
    Tensor r = s.uniform(out_shape);
    Objective f = [fn, r](const std::vector<NamedTensor>& p) { return weighted(fn(p), r); };
    return {std::move(params), std::move(f)};
}

}  // namespace suite

/// Every primitive pullback and every layer or loss, each with its own
/// input sampler. Elementwise inputs near kinks are resampled away.
inline std::vector<Case> default_cases() {
    using suite::param;
    using suite::Sampler;
    using suite::weighted_case;
    using P = const std::vector<NamedTensor>&;
    std::vector<Case> cases;

    cases.push_back({"add", [](std::uint64_t seed) {
                         Sampler s(seed);
                         auto a = param("a", s.uniform(Shape{3, 4}));
                         auto b = param("b", s.uniform(Shape{4}));
                         return weighted_case(s, {a, b}, Shape{3, 4}, [](P p) { return add(p[0].tensor, p[1].tensor); });
                     }});
    cases.push_back({"sub", [](std::uint64_t seed) {
                         Sampler s(seed);
                         auto a = param("a", s.uniform(Shape{2, 3}));
                         auto b = param("b", s.uniform(Shape{2, 1}));
                         return weighted_case(s, {a, b}, Shape{2, 3}, [](P p) { return sub(p[0].tensor, p[1].tensor); });
                     }});
    cases.push_back({"mul", [](std::uint64_t seed) {
                         Sampler s(seed);
                         auto a = param("a", s.uniform(Shape{3, 4}));
                         auto b = param("b", s.uniform(Shape{1, 4}));
                         return weighted_case(s, {a, b}, Shape{3, 4}, [](P p) { return mul(p[0].tensor, p[1].tensor); });
                     }});
    cases.push_back({"div", [](std::uint64_t seed) {
                         Sampler s(seed);
                         auto a = param("a", s.uniform(Shape{3, 4}));
                         auto b = param("b", s.away_from_zero(Shape{3, 4}, 0.5f, 2.0f));
                         return weighted_case(s, {a, b}, Shape{3, 4}, [](P p) { return div(p[0].tensor, p[1].tensor); });
                     }});
    cases.push_back({"neg", [](std::uint64_t seed) {
                         Sampler s(seed);
                         auto a = param("a", s.uniform(Shape{5}));
                         return weighted_case(s, {a}, Shape{5}, [](P p) { return neg(p[0].tensor); });
                     }});
    cases.push_back({"exp", [](std::uint64_t seed) {
                         Sampler s(seed);
                         auto a = param("a", s.uniform(Shape{2, 3}));
                         return weighted_case(s, {a}, Shape{2, 3}, [](P p) { return exp(p[0].tensor); });
                     }});
    cases.push_back({"log", [](std::uint64_t seed) {
                         Sampler s(seed);
                         auto a = param("a", s.uniform(Shape{2, 3}, 0.5f, 2.0f));
                         return weighted_case(s, {a}, Shape{2, 3}, [](P p) { return log(p[0].tensor); });
                     }});
    cases.push_back({"sqrt", [](std::uint64_t seed) {
                         Sampler s(seed);
                         auto a = param("a", s.uniform(Shape{2, 3}, 0.5f, 2.0f));
                         return weighted_case(s, {a}, Shape{2, 3}, [](P p) { return sqrt(p[0].tensor); });
                     }});
    cases.push_back({"abs", [](std::uint64_t seed) {
                         Sampler s(seed);
                         auto a = param("a", s.away_from_zero(Shape{2, 3}));
                         return weighted_case(s, {a}, Shape{2, 3}, [](P p) { return abs(p[0].tensor); });
                     }});
    cases.push_back({"sum", [](std::uint64_t seed) {
                         Sampler s(seed);
                         auto a = param("a", s.uniform(Shape{3, 4}));
                         return weighted_case(s, {a}, Shape{3}, [](P p) {
                             return sum(p[0].tensor, std::vector<std::int64_t>{1});
                         });
                     }});
    cases.push_back({"mean", [](std::uint64_t seed) {
                         Sampler s(seed);
                         auto a = param("a", s.uniform(Shape{3, 4}));
                         return weighted_case(s, {a}, Shape{1, 4}, [](P p) {
                             return mean(p[0].tensor, std::vector<std::int64_t>{0}, true);
                         });
                     }});
    cases.push_back({"max", [](std::uint64_t seed) {
                         Sampler s(seed);
                         auto a = param("a", s.well_separated(Shape{3, 4}));
                         return weighted_case(s, {a}, Shape{3}, [](P p) {
                             return max(p[0].tensor, std::vector<std::int64_t>{-1});
                         });
                     }});
    cases.push_back({"matmul", [](std::uint64_t seed) {
                         Sampler s(seed);
                         auto x = param("x", s.uniform(Shape{3, 4}));
                         auto w = param("w", s.uniform(Shape{5, 4}));
                         return weighted_case(s, {x, w}, Shape{3, 5},
                                              [](P p) { return matmul(p[0].tensor, p[1].tensor); });
                     }});
    cases.push_back({"reshape", [](std::uint64_t seed) {
                         Sampler s(seed);
                         auto a = param("a", s.uniform(Shape{3, 4}));
                         return weighted_case(s, {a}, Shape{2, 6}, [](P p) { return reshape(p[0].tensor, Shape{2, 6}); });
                     }});
    cases.push_back({"transpose", [](std::uint64_t seed) {
                         Sampler s(seed);
                         auto a = param("a", s.uniform(Shape{3, 4}));
                         return weighted_case(s, {a}, Shape{4, 3}, [](P p) { return transpose2d(p[0].tensor); });
                     }});
    cases.push_back({"broadcast", [](std::uint64_t seed) {
                         Sampler s(seed);
                         auto a = param("a", s.uniform(Shape{3, 1}));
                         return weighted_case(s, {a}, Shape{2, 3, 4},
                                              [](P p) { return expand(p[0].tensor, Shape{2, 3, 4}); });
                     }});

    cases.push_back({"dense", [](std::uint64_t seed) {
                         Sampler s(seed);
                         auto x = param("x", s.uniform(Shape{3, 4}));
                         auto w = param("weight", s.uniform(Shape{2, 4}));
                         auto b = param("bias", s.uniform(Shape{2}));
                         return weighted_case(s, {x, w, b}, Shape{3, 2},
                                              [](P p) { return nn::dense(p[0].tensor, p[1].tensor, p[2].tensor); });
                     }});
    cases.push_back({"conv2d", [](std::uint64_t seed) {
                         Sampler s(seed);
                         const nn::ConvSpec spec{2, 2, 3, 3, 2, 1};
                         auto x = param("x", s.uniform(Shape{2, 2, 5, 5}));
                         auto w = param("weight", s.uniform(Shape{2, 2, 3, 3}));
                         auto b = param("bias", s.uniform(Shape{2}));
                         return weighted_case(s, {x, w, b}, Shape{2, 2, 3, 3}, [spec](P p) {
                             return nn::conv2d(p[0].tensor, spec, p[1].tensor, p[2].tensor);
                         });
                     }});
    for (auto [kind, label] : {std::pair{nn::Activation::relu, "relu"}, std::pair{nn::Activation::sigmoid, "sigmoid"},
                               std::pair{nn::Activation::tanh, "tanh"}, std::pair{nn::Activation::gelu, "gelu"}}) {
        cases.push_back({label, [kind](std::uint64_t seed) {
                             Sampler s(seed);
                             auto x = param("x", kind == nn::Activation::relu ? s.away_from_zero(Shape{4, 5})
                                                                               : s.uniform(Shape{4, 5}, -2.0f, 2.0f));
                             return weighted_case(s, {x}, Shape{4, 5},
                                                  [kind](P p) { return nn::activation(kind, p[0].tensor); });
                         }});
    }
    cases.push_back({"batchnorm", [](std::uint64_t seed) {
                         Sampler s(seed);
                         auto x = param("x", s.uniform(Shape{4, 3}, -2.0f, 2.0f));
                         auto gamma = param("gamma", s.uniform(Shape{3}, 0.5f, 1.5f));
                         auto beta = param("beta", s.uniform(Shape{3}));
                         return weighted_case(s, {x, gamma, beta}, Shape{4, 3}, [](P p) {
                             return nn::batch_norm(p[0].tensor, p[1].tensor, p[2].tensor, Tensor::zeros(Shape{3}),
                                                   Tensor::ones(Shape{3}), nn::Mode::train);
                         });
                     }});
    cases.push_back({"dropout", [](std::uint64_t seed) {
                         Sampler s(seed);
                         auto x = param("x", s.uniform(Shape{4, 5}));
                         const auto mask_seed = s.next_seed();
                         return weighted_case(s, {x}, Shape{4, 5}, [mask_seed](P p) {
                             return nn::dropout(p[0].tensor, 0.5f, nn::Mode::train, mask_seed);
                         });
                     }});
    cases.push_back({"cross_entropy", [](std::uint64_t seed) {
                         Sampler s(seed);
                         auto z = param("logits", s.uniform(Shape{4, 3}, -2.0f, 2.0f));
                         std::uniform_int_distribution<std::int64_t> cls(0, 2);
                         std::vector<std::int64_t> labels(4);
                         for (auto& y : labels) y = cls(s.engine());
                         return weighted_case(s, {z}, Shape{},
                                              [labels](P p) { return nn::cross_entropy(p[0].tensor, labels); });
                     }});
    cases.push_back({"mse", [](std::uint64_t seed) {
                         Sampler s(seed);
                         auto x = param("x", s.uniform(Shape{5}));
                         auto t = param("target", s.uniform(Shape{5}));
                         return weighted_case(s, {x, t}, Shape{}, [](P p) { return nn::mse(p[0].tensor, p[1].tensor); });
                     }});
    return cases;
}

inline const std::vector<std::uint64_t>& default_seeds() {
    static const std::vector<std::uint64_t> seeds{0, 1, 2};
    return seeds;
}

/// Runs every case whose name equals `only` (all when empty) for each
/// seed. Entries are named "{case}/seed{k}/{param}". Throws ValueError if
/// `only` matches no case.
inline GradReport run_suite(const Options& o = {}, std::string_view only = {},
                            const std::vector<std::uint64_t>& seeds = default_seeds(),
                            const std::vector<Case>& cases = default_cases()) {
    GradReport total;
    total.options = o;
    bool matched = false;
    for (const auto& c : cases) {
        if (!only.empty() && c.name != only) continue;
        matched = true;
        for (auto seed : seeds) {
            autograd::reset_tape();
            auto [params, f] = c.build(seed);
            auto r = check_gradients(f, params, o);
            for (auto& e : r.entries) e.name = c.name + "/seed" + std::to_string(seed) + "/" + e.name;
            total.merge(r);
        }
    }
    autograd::reset_tape();
    if (!matched) throw ValueError("no gradcheck case named '" + std::string(only) + "'");
    return total;
}

inline std::vector<std::string> case_names(const std::vector<Case>& cases = default_cases()) {
    std::vector<std::string> names;
    for (const auto& c : cases) names.push_back(c.name);
    return names;
}

}  // namespace tensorlite::gradcheck

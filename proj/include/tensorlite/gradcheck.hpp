#pragma once

#include <algorithm>
#include <bit>
#include <cmath>
#include <cstdint>
#include <cstdio>
#include <functional>
#include <limits>
#include <string>
#include <vector>

#include "tensorlite/autograd.hpp"
#include "tensorlite/nn/layers.hpp"

namespace tensorlite::gradcheck {

using nn::NamedTensor;

/// Element i passes iff |a − n| ≤ atol + rtol·max(|a|, |n|). Central
/// differences use step eps·max(1, |θᵢ|).
struct Options {
    double rtol = 1e-2;
    double atol = 1e-3;
    double eps = 1e-3;
};

/// Scalar objective over the parameters it is given. Parameters are
/// perturbed in place between calls, so f must read them afresh.
using Objective = std::function<Tensor(const std::vector<NamedTensor>&)>;

struct ParamReport {
    std::string name;
    double max_abs = 0.0;
    double max_rel = 0.0;
    std::int64_t worst_index = -1;
    bool pass = true;
};

struct GradReport {
    std::vector<ParamReport> entries;
    bool pass = true;
    Options options;

    void merge(const GradReport& other) {
        entries.insert(entries.end(), other.entries.begin(), other.entries.end());
        pass = pass && other.pass;
    }

    /// `name max_abs max_rel worst_index PASS|FAIL` per parameter, then
    /// `OVERALL PASS|FAIL`.
    std::string str() const {
        std::string out;
        char buf[64];
        for (const auto& e : entries) {
            out += e.name;
            std::snprintf(buf, sizeof buf, " %.3e %.3e %lld ", e.max_abs, e.max_rel,
                          static_cast<long long>(e.worst_index));
            out += buf;
            out += e.pass ? "PASS\n" : "FAIL\n";
        }
        out += pass ? "OVERALL PASS\n" : "OVERALL FAIL\n";
        return out;
    }
};

namespace detail {

inline float evaluate(const Objective& f, const std::vector<NamedTensor>& params) {
    const Tensor out = f(params);
    if (out.numel() != 1) throw ShapeError("gradcheck objective must be scalar, got shape " + out.shape().str());
    return out.item();
}

inline void require_contiguous(const std::vector<NamedTensor>& params) {
    for (const auto& p : params)
        if (!p.tensor.is_contiguous()) throw ValueError("gradcheck parameter " + p.name + " must be contiguous");
}

}  // namespace detail

/// Central differences (f(θ+hᵢeᵢ) − f(θ−hᵢeᵢ)) / (2hᵢ) for every element
/// of every parameter. Uses forward evaluation only, under no_grad; each
/// probed element is restored bit-exactly. A NaN probe yields NaN.
inline std::vector<NamedTensor> finite_difference_gradient(const Objective& f, const std::vector<NamedTensor>& params,
                                                           double eps = Options{}.eps) {
    detail::require_contiguous(params);
    autograd::NoGradGuard guard;
    std::vector<NamedTensor> grads;
    grads.reserve(params.size());
    for (const auto& p : params) {
        float* data = p.tensor.storage()->data.data() + p.tensor.offset();
        std::vector<float> g(static_cast<std::size_t>(p.tensor.numel()));
        for (std::size_t i = 0; i < g.size(); ++i) {
            const float orig = data[i];
            const double h = eps * std::max(1.0, std::abs(static_cast<double>(orig)));
            const float up = static_cast<float>(orig + h);
            const float down = static_cast<float>(orig - h);
            data[i] = up;
            const double f_up = detail::evaluate(f, params);
            data[i] = down;
            const double f_down = detail::evaluate(f, params);
            data[i] = orig;
            g[i] = static_cast<float>((f_up - f_down) / (static_cast<double>(up) - static_cast<double>(down)));
        }
        grads.push_back({p.name, Tensor::from_values(p.tensor.shape(), std::move(g))});
    }
    return grads;
}

/// Elementwise comparison of analytic against numeric gradients.
inline ParamReport compare(const std::string& name, const Tensor& analytic, const Tensor& numeric, const Options& o) {
    ParamReport r{name};
    const auto a = analytic.to_vector();
    const auto n = numeric.to_vector();
    double worst = -1.0;
    bool saw_nan = false;
    for (std::size_t i = 0; i < a.size(); ++i) {
        const double ai = a[i], ni = n[i];
        const double err = std::abs(ai - ni);
        const double scale = std::max(std::abs(ai), std::abs(ni));
        const double tol = o.atol + o.rtol * scale;
        const bool ok = err <= tol;
        if (std::isnan(err)) {
            saw_nan = true;
        } else {
            r.max_abs = std::max(r.max_abs, err);
            if (scale > 0.0) r.max_rel = std::max(r.max_rel, err / scale);
        }
        const double badness = std::isnan(err) ? std::numeric_limits<double>::infinity() : err / tol;
        if (badness > worst) {
            worst = badness;
            r.worst_index = static_cast<std::int64_t>(i);
        }
        r.pass = r.pass && ok;
    }
    if (saw_nan) r.max_abs = r.max_rel = std::numeric_limits<double>::quiet_NaN();
    return r;
}

/// Runs f once with recording and backpropagates, checks that f is
/// deterministic, then compares against finite differences. Parameters
/// are marked as requiring grad. An empty parameter list passes vacuously.
inline GradReport check_gradients(const Objective& f, const std::vector<NamedTensor>& params, const Options& o = {}) {
    GradReport report;
    report.options = o;
    if (params.empty()) return report;
    detail::require_contiguous(params);
    for (const auto& p : params) {
        Tensor t = p.tensor;
        t.set_requires_grad(true);
    }

    std::vector<Tensor> analytic;
    float recorded = 0.0f;
    {
        const Tensor loss = f(params);
        if (loss.numel() != 1) throw ShapeError("gradcheck objective must be scalar, got shape " + loss.shape().str());
        recorded = loss.item();
        autograd::GradStore store;
        if (autograd::is_recorded(loss)) autograd::backward_into(store, loss);
        for (const auto& p : params) {
            const Tensor g = store.grad(p.tensor);
            analytic.push_back(g.defined() ? g : Tensor::zeros(p.tensor.shape()));
        }
    }

    const float again = autograd::no_grad([&] { return detail::evaluate(f, params); });
    if (std::bit_cast<std::uint32_t>(again) != std::bit_cast<std::uint32_t>(recorded) &&
        !(std::isnan(again) && std::isnan(recorded)))
        throw DeterminismError("gradcheck objective is not deterministic: " + std::to_string(recorded) + " then " +
                               std::to_string(again));

    const auto numeric = finite_difference_gradient(f, params, o.eps);
    for (std::size_t i = 0; i < params.size(); ++i) {
        report.entries.push_back(compare(params[i].name, analytic[i], numeric[i].tensor, o));
        report.pass = report.pass && report.entries.back().pass;
    }
    return report;
}

}  // namespace tensorlite::gradcheck

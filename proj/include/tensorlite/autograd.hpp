#pragma once

#include <cstdint>
#include <functional>
#include <initializer_list>
#include <memory>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <unordered_map>
#include <utility>
#include <vector>

#include "tensorlite/error.hpp"
#include "tensorlite/kernels.hpp"
#include "tensorlite/tensor.hpp"

namespace tensorlite::autograd {

/// Maps the cotangent of a node's output to one cotangent per input. An
/// undefined Tensor in the result means "no gradient for that input".
using Pullback = std::function<std::vector<Tensor>(const Tensor& grad_output)>;

/// One recorded operation. Leaves have no pullback and no parents.
struct Node {
    std::uint64_t id = 0;
    std::string op;
    /// One entry per op input; null for inputs that do not require grad.
    std::vector<std::shared_ptr<Node>> parents;
    Pullback pullback;
    /// Shape of the tensor this node produced.
    Shape shape;
    /// Storage versions captured at record time, checked before the pullback runs.
    std::vector<std::pair<std::shared_ptr<Storage>, std::uint64_t>> saved;

    bool is_leaf() const noexcept { return !pullback; }

private:
    friend class Tape;
    const void* tape_ = nullptr;
    std::uint64_t epoch_ = 0;
};

/// Append-only record of the forward pass for one thread. Node ids grow
/// monotonically for the lifetime of the tape, across resets.
class Tape {
public:
    bool recording() const noexcept { return recording_; }
    void set_recording(bool on) noexcept { recording_ = on; }

    std::size_t size() const noexcept { return nodes_.size(); }
    const std::vector<std::shared_ptr<Node>>& nodes() const noexcept { return nodes_; }

    /// Drops every node. Tensors still linked to dropped nodes are treated
    /// as leaves when they are next used.
    void reset() {
        nodes_.clear();
        base_id_ = next_id_;
        ++epoch_;
    }

    bool contains(const Node& n) const noexcept { return n.tape_ == this && n.epoch_ == epoch_; }

    std::size_t position(const Node& n) const { return static_cast<std::size_t>(n.id - base_id_); }

    std::shared_ptr<Node> append(std::string op, std::vector<std::shared_ptr<Node>> parents, Pullback pullback,
                                 Shape shape) {
        auto n = std::make_shared<Node>();
        n->id = next_id_++;
        n->op = std::move(op);
        n->parents = std::move(parents);
        n->pullback = std::move(pullback);
        n->shape = std::move(shape);
        n->tape_ = this;
        n->epoch_ = epoch_;
        nodes_.push_back(n);
        return n;
    }

private:
    std::vector<std::shared_ptr<Node>> nodes_;
    bool recording_ = true;
    std::uint64_t next_id_ = 0;
    std::uint64_t base_id_ = 0;
    std::uint64_t epoch_ = 0;
};

/// The calling thread's tape.
inline Tape& tape() {
    thread_local Tape t;
    return t;
}

inline void reset_tape() { tape().reset(); }
inline bool is_recording() { return tape().recording(); }

/// Disables recording for its lifetime and restores the previous state.
class NoGradGuard {
public:
    NoGradGuard() : prev_(tape().recording()) { tape().set_recording(false); }
    ~NoGradGuard() { tape().set_recording(prev_); }
    NoGradGuard(const NoGradGuard&) = delete;
    NoGradGuard& operator=(const NoGradGuard&) = delete;

private:
    bool prev_;
};

template <class Fn>
decltype(auto) no_grad(Fn&& body) {
    NoGradGuard guard;
    return std::forward<Fn>(body)();
}

/// True if `t` is linked to a node on the calling thread's live tape.
inline bool is_recorded(const Tensor& t) { return t.defined() && t.has_node() && tape().contains(*t.node()); }

namespace detail {

inline std::shared_ptr<Node> node_for_input(const Tensor& input) {
    if (!input.defined() || !input.requires_grad()) return nullptr;
    if (is_recorded(input)) return input.node();
    auto leaf = tape().append("leaf", {}, {}, input.shape());
    Tensor handle = input;
    handle.set_node(leaf);
    return leaf;
}

}  // namespace detail

/// Links `output` to a new node when recording is on and some input
/// requires grad; otherwise returns `output` untouched. Storage versions
/// of `inputs` and `extra_saved` are captured for the in-place check.
inline Tensor record(std::string_view op, std::span<const Tensor> inputs, Tensor output, Pullback pullback,
                     std::span<const Tensor> extra_saved = {}) {
    Tape& t = tape();
    if (!t.recording()) return output;
    bool any = false;
    for (const auto& in : inputs) any = any || (in.defined() && in.requires_grad());
    if (!any) return output;

    std::vector<std::shared_ptr<Node>> parents;
    parents.reserve(inputs.size());
    for (const auto& in : inputs) parents.push_back(detail::node_for_input(in));
    auto node = t.append(std::string(op), std::move(parents), std::move(pullback), output.shape());
    for (const auto& in : inputs)
        if (in.defined()) node->saved.emplace_back(in.storage(), in.version());
    for (const auto& s : extra_saved)
        if (s.defined()) node->saved.emplace_back(s.storage(), s.version());
    output.set_requires_grad(true);
    output.set_node(std::move(node));
    return output;
}

inline Tensor record(std::string_view op, std::initializer_list<Tensor> inputs, Tensor output, Pullback pullback,
                     std::initializer_list<Tensor> extra_saved = {}) {
    return record(op, std::span<const Tensor>(inputs.begin(), inputs.size()), std::move(output), std::move(pullback),
                  std::span<const Tensor>(extra_saved.begin(), extra_saved.size()));
}

/// Gradients keyed by node id, allocated at the first contribution.
class GradStore {
public:
    bool empty() const noexcept { return grads_.empty(); }
    std::size_t size() const noexcept { return grads_.size(); }

    bool has(const Tensor& t) const { return t.defined() && t.has_node() && grads_.contains(t.node()->id); }

    /// Gradient of `t`, or an undefined tensor if none was accumulated.
    Tensor grad(const Tensor& t) const {
        if (!has(t)) return {};
        return grads_.at(t.node()->id);
    }

    Tensor grad_by_id(std::uint64_t id) const {
        auto it = grads_.find(id);
        return it == grads_.end() ? Tensor{} : it->second;
    }

    /// Adds `g` into the slot for `id`. Stored gradients are contiguous and
    /// never mutated in place, so callers may keep aliases of them.
    void accumulate(std::uint64_t id, const Tensor& g) {
        auto [it, inserted] = grads_.try_emplace(id, g.contiguous());
        if (!inserted) it->second = kernels::map_binary(it->second, g, [](float a, float b) { return a + b; });
    }

    void clear() {
        grads_.clear();
        pullback_calls_ = 0;
    }

    /// Pullbacks invoked by backward passes into this store.
    std::size_t pullback_calls() const noexcept { return pullback_calls_; }

    const std::unordered_map<std::uint64_t, Tensor>& entries() const noexcept { return grads_; }

private:
    friend void backward_into(GradStore&, const Tensor&, const std::optional<Tensor>&);
    std::unordered_map<std::uint64_t, Tensor> grads_;
    std::size_t pullback_calls_ = 0;
};

/// Reverse pass from `loss`, adding into `store`. Nodes are visited in
/// decreasing id order, which is a topological order because every parent
/// was recorded before its consumers.
inline void backward_into(GradStore& store, const Tensor& loss, const std::optional<Tensor>& seed = std::nullopt) {
    Tape& t = tape();
    if (!is_recorded(loss)) throw NoGraphError("backward() on a tensor with no recorded graph");
    Tensor start;
    if (seed) {
        if (seed->shape() != loss.shape())
            throw ShapeError("seed shape " + seed->shape().str() + " does not match output " + loss.shape().str());
        start = *seed;
    } else {
        if (loss.numel() != 1)
            throw SeedRequiredError("backward() on non-scalar output " + loss.shape().str() + " needs a seed");
        start = Tensor::ones(loss.shape());
    }

    NoGradGuard guard;
    const std::size_t top = t.position(*loss.node());
    std::vector<Tensor> cot(top + 1);
    cot[top] = start.detach();
    const auto& nodes = t.nodes();
    for (std::size_t i = top + 1; i-- > 0;) {
        if (!cot[i].defined()) continue;
        const Node& n = *nodes[i];
        Tensor g = std::move(cot[i]);
        store.accumulate(n.id, g);
        if (n.is_leaf()) continue;
        for (const auto& [storage, version] : n.saved)
            if (storage->version != version)
                throw InPlaceModifiedError("a tensor saved by '" + n.op + "' was modified in place after recording");
        auto grads = n.pullback(g);
        ++store.pullback_calls_;
        if (grads.size() != n.parents.size())
            throw AutogradError("pullback of '" + n.op + "' returned " + std::to_string(grads.size()) +
                                " cotangents for " + std::to_string(n.parents.size()) + " inputs");
        for (std::size_t p = 0; p < grads.size(); ++p) {
            const auto& parent = n.parents[p];
            if (!parent || !grads[p].defined()) continue;
            if (grads[p].shape() != parent->shape)
                throw AutogradError("pullback of '" + n.op + "' produced shape " + grads[p].shape().str() +
                                    " for an input of shape " + parent->shape.str());
            auto& slot = cot[t.position(*parent)];
            if (!slot.defined())
                slot = grads[p];
            else
                slot = kernels::map_binary(slot, grads[p], [](float a, float b) { return a + b; });
        }
    }
}

inline GradStore backward(const Tensor& loss, const std::optional<Tensor>& seed = std::nullopt) {
    GradStore store;
    backward_into(store, loss, seed);
    return store;
}

inline void zero_grad(GradStore& store) { store.clear(); }

}  // namespace tensorlite::autograd

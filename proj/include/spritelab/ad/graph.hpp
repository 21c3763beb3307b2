#pragma once

#include <cstdint>
#include <functional>
#include <map>
#include <memory>
#include <string>
#include <vector>

#include "spritelab/core/rng.hpp"
#include "spritelab/core/tensor.hpp"

namespace spritelab::ad {

class Graph;

struct Node {
    Tensor value;
    Tensor grad;  // allocated on first use; same shape as value
    std::function<void(Graph&)> backward;
    bool requires_grad = false;

    Tensor& ensure_grad() {
        if (grad.empty()) grad = Tensor::zeros(value.shape());
        return grad;
    }
};

// A trainable (or frozen) persistent parameter. Gradients accumulate across
// samples until the optimizer consumes them.
struct Param {
    std::string name;
    Tensor value;
    Tensor grad;
    Tensor adam_m, adam_v;
    bool trainable = true;
    float lr_mult = 1.0f;
    bool decay = true;  // weight decay applies

    void zero_grad() {
        if (grad.empty()) grad = Tensor::zeros(value.shape());
        grad.fill(0.0f);
    }
};

class ParamStore {
public:
    Param& add(const std::string& name, Tensor init) {
        params_.push_back(std::make_unique<Param>());
        Param& p = *params_.back();
        p.name = name;
        p.value = std::move(init);
        p.grad = Tensor::zeros(p.value.shape());
        index_[name] = params_.size() - 1;
        return p;
    }

    Param& get(const std::string& name) {
        auto it = index_.find(name);
        if (it == index_.end()) throw std::runtime_error("unknown param: " + name);
        return *params_[it->second];
    }

    const Param& get(const std::string& name) const {
        auto it = index_.find(name);
        if (it == index_.end()) throw std::runtime_error("unknown param: " + name);
        return *params_[it->second];
    }

    bool has(const std::string& name) const { return index_.count(name) > 0; }

    std::vector<Param*> all() {
        std::vector<Param*> out;
        out.reserve(params_.size());
        for (auto& p : params_) out.push_back(p.get());
        return out;
    }

    std::vector<const Param*> all() const {
        std::vector<const Param*> out;
        out.reserve(params_.size());
        for (auto& p : params_) out.push_back(p.get());
        return out;
    }

    void zero_grads() {
        for (auto& p : params_) p->zero_grad();
    }

    int64_t total_numel() const {
        int64_t n = 0;
        for (auto& p : params_) n += p->value.numel();
        return n;
    }

private:
    std::vector<std::unique_ptr<Param>> params_;
    std::map<std::string, size_t> index_;
};

// Dynamic tape. One Graph per forward/backward pass; creation order is the
// topological order. With grad disabled the graph is a plain value arena:
// no closures, no saved contexts.
class Graph {
public:
    explicit Graph(bool grad_enabled = true) : grad_enabled_(grad_enabled) {}

    bool grad_enabled() const { return grad_enabled_; }

    Node* leaf(Tensor value, bool requires_grad = false) {
        Node* n = alloc(std::move(value));
        n->requires_grad = grad_enabled_ && requires_grad;
        return n;
    }

    // Parameter leaf; after backward(), flush_param_grads() moves node grads
    // into the persistent Param.grad buffers. With params_frozen set, params
    // enter as constants: gradients still flow through activations but stop
    // at the parameters (the frozen-reward-model path).
    Node* param(Param& p) {
        Node* n = alloc(p.value);  // copy: cheap relative to compute
        n->requires_grad = grad_enabled_ && !params_frozen_;
        if (n->requires_grad) param_leaves_.emplace_back(n, &p);
        return n;
    }

    void set_params_frozen(bool v) { params_frozen_ = v; }

    Node* make(Tensor value, bool requires_grad, std::function<void(Graph&)> backward) {
        Node* n = alloc(std::move(value));
        n->requires_grad = grad_enabled_ && requires_grad;
        if (n->requires_grad) n->backward = std::move(backward);
        return n;
    }

    void backward(Node* root) {
        if (!grad_enabled_) throw std::logic_error("backward on a no-grad graph");
        if (root->value.numel() != 1) throw std::logic_error("backward root must be scalar");
        root->ensure_grad()[0] = 1.0f;
        for (size_t i = nodes_.size(); i-- > 0;) {
            Node& n = *nodes_[i];
            if (n.requires_grad && n.backward && !n.grad.empty()) n.backward(*this);
        }
        flush_param_grads();
    }

    void flush_param_grads() {
        for (auto& [node, p] : param_leaves_) {
            if (!node->grad.empty()) p->grad.add_(node->grad);
        }
        param_leaves_.clear();
    }

    // Activation accounting (values + saved contexts + grads), used by the
    // reward-feedback memory contract test.
    void account_bytes(size_t b) { bytes_ += b; }
    size_t bytes() const { return bytes_; }

    size_t num_nodes() const { return nodes_.size(); }

private:
    Node* alloc(Tensor value) {
        nodes_.push_back(std::make_unique<Node>());
        Node* n = nodes_.back().get();
        bytes_ += static_cast<size_t>(value.numel()) * sizeof(float);
        n->value = std::move(value);
        return n;
    }

    bool grad_enabled_;
    bool params_frozen_ = false;
    std::vector<std::unique_ptr<Node>> nodes_;
    std::vector<std::pair<Node*, Param*>> param_leaves_;
    size_t bytes_ = 0;
};

}  // namespace spritelab::ad

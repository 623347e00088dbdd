#pragma once

#include <cmath>
#include <cstddef>
#include <functional>
#include <memory>
#include <numeric>
#include <stdexcept>
#include <string>
#include <unordered_set>
#include <vector>

namespace ddnet {

using Shape = std::vector<int>;

inline std::size_t shape_numel(const Shape& s) {
    std::size_t n = 1;
    for (int d : s) n *= static_cast<std::size_t>(d);
    return n;
}

inline std::string shape_str(const Shape& s) {
    std::string out = "[";
    for (std::size_t i = 0; i < s.size(); ++i) {
        if (i) out += ",";
        out += std::to_string(s[i]);
    }
    return out + "]";
}

/// Dense row-major tensor with reverse-mode autodiff.
///
/// A Tensor is a shared handle to a node in a dynamically built
/// computation graph. Ops that consume tensors with requires_grad set
/// record a backward closure; Tensor::backward() runs the closures in
/// reverse topological order.
template <class S>
class Tensor {
public:
    struct Node {
        Shape shape;
        std::vector<S> data;
        std::vector<S> grad;  // allocated iff requires_grad
        bool requires_grad = false;
        std::function<void(Node&)> backward_fn;
        std::vector<std::shared_ptr<Node>> parents;
    };

    Tensor() = default;

    explicit Tensor(Shape shape, bool requires_grad = false)
        : n_(std::make_shared<Node>()) {
        n_->shape = std::move(shape);
        n_->data.assign(shape_numel(n_->shape), S(0));
        set_requires_grad(requires_grad);
    }

    Tensor(Shape shape, std::vector<S> values, bool requires_grad = false)
        : n_(std::make_shared<Node>()) {
        if (shape_numel(shape) != values.size())
            throw std::invalid_argument("tensor: shape " + shape_str(shape) +
                                        " does not match " + std::to_string(values.size()) + " values");
        n_->shape = std::move(shape);
        n_->data = std::move(values);
        set_requires_grad(requires_grad);
    }

    Tensor(Shape shape, std::initializer_list<S> values)
        : Tensor(std::move(shape), std::vector<S>(values)) {}

    static Tensor scalar(S value, bool requires_grad = false) {
        return Tensor({1}, {value}, requires_grad);
    }

    bool valid() const { return n_ != nullptr; }
    const Shape& shape() const { return n_->shape; }
    std::size_t numel() const { return n_->data.size(); }
    int dim(int i) const { return n_->shape[static_cast<std::size_t>(i)]; }

    std::vector<S>& data() { return n_->data; }
    const std::vector<S>& data() const { return n_->data; }
    std::vector<S>& grad() { return n_->grad; }
    const std::vector<S>& grad() const { return n_->grad; }

    S item() const {
        if (n_->data.size() != 1) throw std::logic_error("item() on non-scalar tensor");
        return n_->data[0];
    }

    bool requires_grad() const { return n_->requires_grad; }
    void set_requires_grad(bool rg) {
        n_->requires_grad = rg;
        if (rg)
            n_->grad.assign(n_->data.size(), S(0));
        else
            n_->grad.clear();
    }

    void zero_grad() {
        if (n_->requires_grad) std::fill(n_->grad.begin(), n_->grad.end(), S(0));
    }

    bool same_node(const Tensor& other) const { return n_ == other.n_; }

    bool all_finite() const {
        for (S v : n_->data)
            if (!std::isfinite(static_cast<double>(v))) return false;
        return true;
    }

    void check_finite(const char* what) const {
        if (!all_finite())
            throw std::runtime_error(std::string("non-finite values in ") + what);
    }

    /// Deep copy of values; detached from the graph.
    Tensor clone_detached() const {
        Tensor t;
        t.n_ = std::make_shared<Node>();
        t.n_->shape = n_->shape;
        t.n_->data = n_->data;
        return t;
    }

    /// Reverse-mode pass from a scalar root. Seeds d(root)/d(root) = 1.
    void backward() {
        if (n_->data.size() != 1)
            throw std::logic_error("backward() requires a scalar root");
        if (!n_->requires_grad)
            throw std::logic_error("backward() on a tensor without requires_grad");
        std::vector<Node*> order;
        std::unordered_set<Node*> seen;
        topo(n_.get(), seen, order);
        n_->grad[0] = S(1);
        for (auto it = order.rbegin(); it != order.rend(); ++it) {
            Node* node = *it;
            if (node->backward_fn) node->backward_fn(*node);
        }
    }

    /// Drop recorded closures and parent links, keeping values.
    void detach_graph() {
        n_->backward_fn = nullptr;
        n_->parents.clear();
    }

    std::shared_ptr<Node>& node() { return n_; }
    const std::shared_ptr<Node>& node() const { return n_; }

    /// Builds a result node wired to its parents. Used by op implementations.
    static Tensor make_result(Shape shape, std::vector<S> values,
                              std::vector<Tensor> parents,
                              std::function<void(Node&)> backward_fn) {
        bool rg = false;
        for (const auto& p : parents) rg = rg || p.requires_grad();
        Tensor t(std::move(shape), std::move(values), rg);
        if (rg) {
            t.n_->backward_fn = std::move(backward_fn);
            for (auto& p : parents) t.n_->parents.push_back(p.n_);
        }
        return t;
    }

private:
    static void topo(Node* node, std::unordered_set<Node*>& seen, std::vector<Node*>& order) {
        // Iterative DFS; graphs from long rollouts overflow the stack otherwise.
        struct Frame { Node* n; std::size_t next; };
        std::vector<Frame> stack;
        if (seen.count(node)) return;
        seen.insert(node);
        stack.push_back({node, 0});
        while (!stack.empty()) {
            Frame& f = stack.back();
            if (f.next < f.n->parents.size()) {
                Node* p = f.n->parents[f.next++].get();
                if (p->requires_grad && !seen.count(p)) {
                    seen.insert(p);
                    stack.push_back({p, 0});
                }
            } else {
                order.push_back(f.n);
                stack.pop_back();
            }
        }
    }

    std::shared_ptr<Node> n_;
};

using TensorF = Tensor<float>;
using TensorD = Tensor<double>;

}  // namespace ddnet

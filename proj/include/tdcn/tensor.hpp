#pragma once

#include <cstdint>
#include <functional>
#include <initializer_list>
#include <memory>
#include <string>
#include <vector>

#include "tdcn/errors.hpp"
#include "tdcn/kernels.hpp"

namespace tdcn {

struct Shape {
    std::vector<int> d;

    Shape() = default;
    Shape(std::initializer_list<int> dims) : d(dims) {}
    explicit Shape(std::vector<int> dims) : d(std::move(dims)) {}

    int rank() const { return static_cast<int>(d.size()); }
    int operator[](int i) const { return d[i]; }
    int64_t numel() const {
        int64_t n = 1;
        for (int x : d) n *= x;
        return n;
    }
    bool operator==(const Shape& o) const { return d == o.d; }
    bool operator!=(const Shape& o) const { return !(*this == o); }
    std::string str() const;
};

namespace detail {
struct TensorImpl {
    Shape shape;
    std::shared_ptr<std::vector<real>> data;
    std::shared_ptr<std::vector<real>> grad; // allocated iff requires_grad
    bool requires_grad = false;
    int tape_id = -1; // producing tape node, -1 for leaves
};
} // namespace detail

// Dense n-d float tensor. Value-semantic handle over shared storage; the
// buffer is immutable after the producing forward op except for grad.
class Tensor {
public:
    Tensor() = default;

    explicit Tensor(Shape shape, bool requires_grad = false)
        : impl_(std::make_shared<detail::TensorImpl>()) {
        impl_->shape = std::move(shape);
        impl_->data = std::make_shared<std::vector<real>>(impl_->shape.numel(), real(0));
        set_requires_grad(requires_grad);
    }

    static Tensor zeros(Shape shape) { return Tensor(std::move(shape)); }

    static Tensor full(Shape shape, real value) {
        Tensor t(std::move(shape));
        std::fill(t.data(), t.data() + t.numel(), value);
        return t;
    }

    static Tensor from(Shape shape, std::vector<real> values) {
        if (static_cast<int64_t>(values.size()) != shape.numel())
            throw ShapeError("tensor init: " + std::to_string(values.size()) +
                             " values for shape " + shape.str());
        Tensor t(std::move(shape));
        std::copy(values.begin(), values.end(), t.data());
        return t;
    }

    bool defined() const { return impl_ != nullptr; }
    const Shape& shape() const { return impl_->shape; }
    int dim(int i) const { return impl_->shape[i]; }
    int64_t numel() const { return impl_->shape.numel(); }

    real* data() { return impl_->data->data(); }
    const real* data() const { return impl_->data->data(); }

    bool requires_grad() const { return impl_ && impl_->requires_grad; }
    void set_requires_grad(bool rg) {
        impl_->requires_grad = rg;
        if (rg && !impl_->grad)
            impl_->grad = std::make_shared<std::vector<real>>(numel(), real(0));
    }

    // Grad buffer; reading an untouched one yields zeros.
    real* grad() {
        if (!impl_->grad)
            impl_->grad = std::make_shared<std::vector<real>>(numel(), real(0));
        return impl_->grad->data();
    }
    const real* grad() const { return const_cast<Tensor*>(this)->grad(); }
    bool has_grad() const { return impl_ && impl_->grad != nullptr; }
    void zero_grad() {
        if (impl_->grad) std::fill(impl_->grad->begin(), impl_->grad->end(), real(0));
    }

    real item() const {
        if (numel() != 1)
            throw ShapeError("item() on non-scalar tensor of shape " + shape().str());
        return (*impl_->data)[0];
    }

    // Row-major view with a new shape; shares data and grad.
    Tensor reshape(Shape shape) const {
        if (shape.numel() != numel())
            throw ShapeError("reshape " + this->shape().str() + " -> " + shape.str() +
                             ": element count mismatch");
        Tensor t;
        t.impl_ = std::make_shared<detail::TensorImpl>(*impl_);
        t.impl_->shape = std::move(shape);
        return t;
    }

    int tape_id() const { return impl_->tape_id; }

private:
    std::shared_ptr<detail::TensorImpl> impl_;
    friend class Tape;
};

// Records one backward rule per forward op, in execution order. Replaying
// the list in reverse is a valid reverse topological order. Confined to one
// logical thread.
class Tape {
public:
    // inputs: tensors read by the op (to track topological order); output is
    // stamped with the new node id.
    void record(std::function<void()> backward,
                std::initializer_list<const Tensor*> inputs, Tensor& output) {
        std::vector<int> in_ids;
        for (const Tensor* t : inputs)
            if (t->defined() && t->impl_->tape_id >= 0) in_ids.push_back(t->impl_->tape_id);
        nodes_.push_back({std::move(backward), std::move(in_ids)});
        output.impl_->tape_id = static_cast<int>(nodes_.size()) - 1;
    }

    // Seeds d(loss)/d(loss) = 1 and replays every node's backward rule once,
    // newest first. Serial; bit-identical across runs.
    void backward(Tensor& loss) {
        if (loss.numel() != 1)
            throw ShapeError("backward: loss must be scalar, got shape " +
                             loss.shape().str());
        loss.grad()[0] += real(1);
        for (auto it = nodes_.rbegin(); it != nodes_.rend(); ++it) it->fn();
    }

    size_t size() const { return nodes_.size(); }
    const std::vector<int>& node_inputs(size_t i) const { return nodes_[i].inputs; }

private:
    struct Node {
        std::function<void()> fn;
        std::vector<int> inputs;
    };
    std::vector<Node> nodes_;
};

} // namespace tdcn

#pragma once

#include <cstdint>
#include <functional>
#include <memory>
#include <span>
#include <string>
#include <vector>

#include "ynetr/errors.hpp"

namespace ynetr {

using Shape = std::vector<std::int64_t>;

std::int64_t shape_numel(const Shape& s);
std::string shape_str(const Shape& s);

namespace detail {
struct TensorImpl {
    Shape shape;
    std::vector<float> data;
    std::vector<float> grad;  // empty until first accumulated into
    bool requires_grad = false;
    int node = -1;
    std::uint64_t tape = 0;
};
}  // namespace detail

// Dense row-major float32 tensor with handle semantics: copies share storage.
// Use clone() for a deep copy.
class Tensor {
public:
    Tensor() = default;
    explicit Tensor(Shape shape, float fill = 0.0f);
    Tensor(Shape shape, std::vector<float> data);

    static Tensor scalar(float v) { return Tensor(Shape{}, std::vector<float>{v}); }

    bool defined() const { return impl_ != nullptr; }
    const Shape& shape() const { return impl_->shape; }
    int rank() const { return static_cast<int>(impl_->shape.size()); }
    std::int64_t dim(int axis) const;
    std::int64_t numel() const { return static_cast<std::int64_t>(impl_->data.size()); }

    std::span<float> data() { return impl_->data; }
    std::span<const float> data() const { return impl_->data; }
    float item() const;

    bool requires_grad() const { return impl_ && impl_->requires_grad; }
    Tensor& set_requires_grad(bool on);

    bool has_grad() const { return !impl_->grad.empty(); }
    // Gradient buffer; allocated (zero-filled) on first access.
    std::span<float> grad();
    std::span<const float> grad() const;
    void zero_grad();

    Tensor clone() const;
    // Same values, no graph linkage, no gradient.
    Tensor detach() const { return clone(); }

    bool is_same(const Tensor& other) const { return impl_ == other.impl_; }
    int node() const { return impl_->node; }
    std::uint64_t tape_id() const { return impl_->tape; }

private:
    friend class Tape;
    std::shared_ptr<detail::TensorImpl> impl_;
};

// Records differentiable operations in execution order. Single owner; not
// shared across threads.
class Tape {
public:
    // Receives the gradient of the recorded output and accumulates into the
    // gradients of the inputs it captured.
    using BackwardFn = std::function<void(std::span<const float> grad_out)>;

    Tape();
    Tape(const Tape&) = delete;
    Tape& operator=(const Tape&) = delete;
    Tape(Tape&&) = default;
    Tape& operator=(Tape&&) = default;

    void record(Tensor& output, std::vector<Tensor> inputs, BackwardFn fn);
    std::size_t size() const { return nodes_.size(); }
    std::uint64_t id() const { return id_; }
    // Node ids of the recorded inputs of node i (-1 for leaves).
    std::vector<int> input_nodes(std::size_t i) const;
    void clear();

private:
    friend void backward(Tape& tape, const Tensor& loss);
    struct Node {
        std::vector<Tensor> inputs;
        Tensor output;
        BackwardFn fn;
    };
    std::vector<Node> nodes_;
    std::uint64_t id_;
};

// Makes `tape` the recording target of the current thread for its lifetime.
class TapeScope {
public:
    explicit TapeScope(Tape& tape);
    ~TapeScope();
    TapeScope(const TapeScope&) = delete;
    TapeScope& operator=(const TapeScope&) = delete;

private:
    Tape* previous_;
};

Tape* active_tape();

// Reverse pass from a scalar loss recorded on `tape`. Gradients are added to
// whatever the leaves already hold; zero them first for a fresh step.
void backward(Tape& tape, const Tensor& loss);

namespace detail {
// True when an op over these inputs must be recorded.
bool should_record(std::initializer_list<const Tensor*> inputs);
void record(Tensor& out, std::vector<Tensor> inputs, Tape::BackwardFn fn);
// Writable gradient buffer through any handle to t; copies share storage.
std::span<float> grad_buffer(const Tensor& t);
}  // namespace detail

}  // namespace ynetr

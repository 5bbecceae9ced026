#include "ynetr/tensor.hpp"

#include <atomic>
#include <numeric>

namespace ynetr {
namespace {

thread_local Tape* g_active = nullptr;
std::atomic<std::uint64_t> g_next_tape_id{1};

}  // namespace

std::int64_t shape_numel(const Shape& s) {
    std::int64_t n = 1;
    for (auto d : s) {
        if (d < 0) throw ShapeError("negative dimension in shape " + shape_str(s));
        n *= d;
    }
    return n;
}

std::string shape_str(const Shape& s) {
    std::string out = "(";
    for (std::size_t i = 0; i < s.size(); ++i) {
        if (i) out += ", ";
        out += std::to_string(s[i]);
    }
    return out + ")";
}

Tensor::Tensor(Shape shape, float fill) : impl_(std::make_shared<detail::TensorImpl>()) {
    const auto n = shape_numel(shape);
    impl_->shape = std::move(shape);
    impl_->data.assign(static_cast<std::size_t>(n), fill);
}

Tensor::Tensor(Shape shape, std::vector<float> data) : impl_(std::make_shared<detail::TensorImpl>()) {
    if (shape_numel(shape) != static_cast<std::int64_t>(data.size()))
        throw ShapeError("data length " + std::to_string(data.size()) + " does not match shape " + shape_str(shape));
    impl_->shape = std::move(shape);
    impl_->data = std::move(data);
}

std::int64_t Tensor::dim(int axis) const {
    const int r = rank();
    if (axis < 0) axis += r;
    if (axis < 0 || axis >= r) throw ShapeError("axis out of range for shape " + shape_str(shape()));
    return impl_->shape[static_cast<std::size_t>(axis)];
}

float Tensor::item() const {
    if (numel() != 1) throw ShapeError("item() on tensor of shape " + shape_str(shape()));
    return impl_->data[0];
}

Tensor& Tensor::set_requires_grad(bool on) {
    impl_->requires_grad = on;
    return *this;
}

std::span<float> Tensor::grad() {
    if (impl_->grad.empty()) impl_->grad.assign(impl_->data.size(), 0.0f);
    return impl_->grad;
}

std::span<const float> Tensor::grad() const {
    if (impl_->grad.empty()) impl_->grad.assign(impl_->data.size(), 0.0f);
    return impl_->grad;
}

void Tensor::zero_grad() {
    impl_->grad.assign(impl_->data.size(), 0.0f);
}

Tensor Tensor::clone() const {
    return Tensor(impl_->shape, impl_->data);
}

Tape::Tape() : id_(g_next_tape_id.fetch_add(1)) {}

void Tape::record(Tensor& output, std::vector<Tensor> inputs, BackwardFn fn) {
    output.impl_->requires_grad = true;
    output.impl_->node = static_cast<int>(nodes_.size());
    output.impl_->tape = id_;
    nodes_.push_back(Node{std::move(inputs), output, std::move(fn)});
}

std::vector<int> Tape::input_nodes(std::size_t i) const {
    std::vector<int> out;
    for (const auto& t : nodes_.at(i).inputs) out.push_back(t.tape_id() == id_ ? t.node() : -1);
    return out;
}

void Tape::clear() {
    for (auto& n : nodes_) {
        n.output.impl_->node = -1;
        n.output.impl_->tape = 0;
    }
    nodes_.clear();
}

TapeScope::TapeScope(Tape& tape) : previous_(g_active) { g_active = &tape; }
TapeScope::~TapeScope() { g_active = previous_; }

Tape* active_tape() { return g_active; }

void backward(Tape& tape, const Tensor& loss) {
    if (!loss.defined() || loss.numel() != 1) throw GraphError("backward() needs a scalar loss");
    if (loss.tape_id() != tape.id() || loss.node() < 0 || loss.node() >= static_cast<int>(tape.nodes_.size()))
        throw GraphError("loss is not recorded on this tape (detached graph)");
    auto& root = tape.nodes_[static_cast<std::size_t>(loss.node())].output;
    root.grad()[0] += 1.0f;
    for (int i = loss.node(); i >= 0; --i) {
        auto& node = tape.nodes_[static_cast<std::size_t>(i)];
        if (!node.output.has_grad()) continue;
        node.fn(node.output.grad());
    }
}

namespace detail {

bool should_record(std::initializer_list<const Tensor*> inputs) {
    if (!g_active) return false;
    for (const Tensor* t : inputs)
        if (t && t->defined() && t->requires_grad()) return true;
    return false;
}

void record(Tensor& out, std::vector<Tensor> inputs, Tape::BackwardFn fn) {
    g_active->record(out, std::move(inputs), std::move(fn));
}

}  // namespace detail

std::span<float> detail::grad_buffer(const Tensor& t) { return const_cast<Tensor&>(t).grad(); }

}  // namespace ynetr

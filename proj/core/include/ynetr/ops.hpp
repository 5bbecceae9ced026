#pragma once

#include <span>
#include <vector>

#include "ynetr/tensor.hpp"

// Differentiable tensor primitives. Every op records onto the active tape
// when any input requires gradients; otherwise it is a plain computation.
namespace ynetr {

// Elementwise with numpy-style broadcasting.
Tensor add(const Tensor& a, const Tensor& b);
Tensor sub(const Tensor& a, const Tensor& b);
Tensor mul(const Tensor& a, const Tensor& b);
Tensor div(const Tensor& a, const Tensor& b);

Tensor add_scalar(const Tensor& a, float s);
Tensor mul_scalar(const Tensor& a, float s);
Tensor exp(const Tensor& a);
Tensor log(const Tensor& a);

// (m, k) x (k, n) -> (m, n)
Tensor matmul(const Tensor& a, const Tensor& b);

// One dimension may be -1 and is inferred.
Tensor reshape(const Tensor& a, Shape shape);
Tensor permute(const Tensor& a, std::vector<int> axes);
Tensor slice(const Tensor& a, int axis, std::int64_t start, std::int64_t length);
Tensor concat(std::span<const Tensor> parts, int axis);

Tensor sum(const Tensor& a);
Tensor sum(const Tensor& a, int axis);
Tensor mean(const Tensor& a);
Tensor mean(const Tensor& a, int axis);

Tensor softmax(const Tensor& a, int axis);
Tensor log_softmax(const Tensor& a, int axis);

// Normalizes over a single axis. gamma/beta (length = dim(axis)) are optional.
Tensor layer_norm(const Tensor& x, int axis, const Tensor& gamma = {}, const Tensor& beta = {}, float eps = 1e-5f);

Tensor relu(const Tensor& a);
Tensor leaky_relu(const Tensor& a, float slope = 0.01f);
// Exact (erf) form.
Tensor gelu(const Tensor& a);

// x: (cin, X, Y, Z), weight: (cout, cin, kx, ky, kz), bias: (cout) or undefined.
Tensor conv3d(const Tensor& x, const Tensor& weight, const Tensor& bias, int stride = 1, int padding = 0);
// x: (cin, X, Y, Z), weight: (cin, cout, kx, ky, kz). Adjoint of conv3d with
// the same weight tensor; output extent (X - 1) * stride - 2 * padding + k.
Tensor conv_transpose3d(const Tensor& x, const Tensor& weight, const Tensor& bias, int stride = 1,
                        int padding = 0);

}  // namespace ynetr

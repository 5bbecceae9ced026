#include "ynetr/ops.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>

#include "gemm.hpp"

namespace ynetr {
namespace {

using detail::record;
using detail::should_record;
using detail::grad_buffer;

int normalize_axis(int axis, int rank) {
    if (axis < 0) axis += rank;
    if (axis < 0 || axis >= rank) throw ShapeError("axis out of range");
    return axis;
}

// A tensor viewed as (outer, n, inner) around one axis.
struct AxisView {
    std::int64_t outer = 1, n = 1, inner = 1;
};

AxisView axis_view(const Shape& s, int axis) {
    AxisView v;
    for (int i = 0; i < axis; ++i) v.outer *= s[static_cast<std::size_t>(i)];
    v.n = s[static_cast<std::size_t>(axis)];
    for (std::size_t i = static_cast<std::size_t>(axis) + 1; i < s.size(); ++i) v.inner *= s[i];
    return v;
}

// Gradient buffer of t, or an empty span when t does not take gradients.
std::span<float> grad_of(const Tensor& t) {
    if (!t.defined() || !t.requires_grad()) return {};
    return grad_buffer(t);
}

// ---------------------------------------------------------------- broadcast

struct Broadcast {
    Shape out;
    std::vector<std::int64_t> stride_a, stride_b;
    bool same = false;
};

Broadcast make_broadcast(const Shape& a, const Shape& b) {
    Broadcast bc;
    if (a == b) {
        bc.out = a;
        bc.same = true;
        return bc;
    }
    const std::size_t r = std::max(a.size(), b.size());
    bc.out.assign(r, 1);
    bc.stride_a.assign(r, 0);
    bc.stride_b.assign(r, 0);
    std::int64_t sa = 1, sb = 1;
    for (std::size_t k = 0; k < r; ++k) {
        const std::size_t d = r - 1 - k;
        const std::int64_t da = k < a.size() ? a[a.size() - 1 - k] : 1;
        const std::int64_t db = k < b.size() ? b[b.size() - 1 - k] : 1;
        if (da != db && da != 1 && db != 1)
            throw ShapeError("cannot broadcast " + shape_str(a) + " with " + shape_str(b));
        bc.out[d] = std::max(da, db);
        bc.stride_a[d] = da == 1 ? 0 : sa;
        bc.stride_b[d] = db == 1 ? 0 : sb;
        sa *= da;
        sb *= db;
    }
    return bc;
}

template <typename F>
void for_each_broadcast(const Broadcast& bc, F&& f) {
    const std::int64_t n = shape_numel(bc.out);
    if (bc.same) {
        for (std::int64_t o = 0; o < n; ++o) f(o, o, o);
        return;
    }
    const int r = static_cast<int>(bc.out.size());
    std::vector<std::int64_t> idx(static_cast<std::size_t>(r), 0);
    std::int64_t ia = 0, ib = 0;
    for (std::int64_t o = 0; o < n; ++o) {
        f(o, ia, ib);
        for (int d = r - 1; d >= 0; --d) {
            const auto ud = static_cast<std::size_t>(d);
            ++idx[ud];
            ia += bc.stride_a[ud];
            ib += bc.stride_b[ud];
            if (idx[ud] < bc.out[ud]) break;
            ia -= bc.stride_a[ud] * bc.out[ud];
            ib -= bc.stride_b[ud] * bc.out[ud];
            idx[ud] = 0;
        }
    }
}

// Fwd(a, b) -> out; DA(a, b) -> d out / d a; DB likewise.
template <typename Fwd, typename DA, typename DB>
Tensor binary_op(const Tensor& a, const Tensor& b, Fwd fwd, DA da, DB db) {
    Broadcast bc = make_broadcast(a.shape(), b.shape());
    Tensor out(bc.out);
    auto o = out.data();
    auto x = a.data();
    auto y = b.data();
    for_each_broadcast(bc, [&](std::int64_t io, std::int64_t ia, std::int64_t ib) { o[io] = fwd(x[ia], y[ib]); });
    if (should_record({&a, &b})) {
        record(out, {a, b}, [a, b, bc, da, db](std::span<const float> g) mutable {
            auto ga = grad_of(a);
            auto gb = grad_of(b);
            auto x = a.data();
            auto y = b.data();
            for_each_broadcast(bc, [&](std::int64_t io, std::int64_t ia, std::int64_t ib) {
                if (!ga.empty()) ga[ia] += g[io] * da(x[ia], y[ib]);
                if (!gb.empty()) gb[ib] += g[io] * db(x[ia], y[ib]);
            });
        });
    }
    return out;
}

// Fwd(x) -> y; Deriv(x, y) -> dy/dx.
template <typename Fwd, typename Deriv>
Tensor unary_op(const Tensor& a, Fwd fwd, Deriv deriv) {
    Tensor out(a.shape());
    auto x = a.data();
    auto y = out.data();
    for (std::size_t i = 0; i < x.size(); ++i) y[i] = fwd(x[i]);
    if (should_record({&a})) {
        Tensor res = out;
        record(out, {a}, [a, res, deriv](std::span<const float> g) mutable {
            auto ga = grad_of(a);
            auto x = a.data();
            auto y = res.data();
            for (std::size_t i = 0; i < ga.size(); ++i) ga[i] += g[i] * deriv(x[i], y[i]);
        });
    }
    return out;
}

}  // namespace

// ------------------------------------------------------------- elementwise

Tensor add(const Tensor& a, const Tensor& b) {
    return binary_op(
        a, b, [](float x, float y) { return x + y; }, [](float, float) { return 1.0f; },
        [](float, float) { return 1.0f; });
}

Tensor sub(const Tensor& a, const Tensor& b) {
    return binary_op(
        a, b, [](float x, float y) { return x - y; }, [](float, float) { return 1.0f; },
        [](float, float) { return -1.0f; });
}

Tensor mul(const Tensor& a, const Tensor& b) {
    return binary_op(
        a, b, [](float x, float y) { return x * y; }, [](float, float y) { return y; },
        [](float x, float) { return x; });
}

Tensor div(const Tensor& a, const Tensor& b) {
    return binary_op(
        a, b, [](float x, float y) { return x / y; }, [](float, float y) { return 1.0f / y; },
        [](float x, float y) { return -x / (y * y); });
}

Tensor add_scalar(const Tensor& a, float s) {
    return unary_op(a, [s](float x) { return x + s; }, [](float, float) { return 1.0f; });
}

Tensor mul_scalar(const Tensor& a, float s) {
    return unary_op(a, [s](float x) { return x * s; }, [s](float, float) { return s; });
}

Tensor exp(const Tensor& a) {
    return unary_op(a, [](float x) { return std::exp(x); }, [](float, float y) { return y; });
}

Tensor log(const Tensor& a) {
    return unary_op(a, [](float x) { return std::log(x); }, [](float x, float) { return 1.0f / x; });
}

Tensor relu(const Tensor& a) {
    return unary_op(a, [](float x) { return x > 0.0f ? x : 0.0f; }, [](float x, float) { return x > 0.0f ? 1.0f : 0.0f; });
}

Tensor leaky_relu(const Tensor& a, float slope) {
    return unary_op(
        a, [slope](float x) { return x > 0.0f ? x : slope * x; },
        [slope](float x, float) { return x > 0.0f ? 1.0f : slope; });
}

Tensor gelu(const Tensor& a) {
    constexpr float inv_sqrt2 = 0.70710678118654752f;
    constexpr float inv_sqrt_2pi = 0.39894228040143268f;
    return unary_op(
        a, [](float x) { return 0.5f * x * (1.0f + std::erf(x * inv_sqrt2)); },
        [](float x, float) { return 0.5f * (1.0f + std::erf(x * inv_sqrt2)) + x * inv_sqrt_2pi * std::exp(-0.5f * x * x); });
}

// ------------------------------------------------------------------ matmul

Tensor matmul(const Tensor& a, const Tensor& b) {
    if (a.rank() != 2 || b.rank() != 2 || a.dim(1) != b.dim(0))
        throw ShapeError("matmul shape mismatch: " + shape_str(a.shape()) + " x " + shape_str(b.shape()));
    const std::int64_t m = a.dim(0), k = a.dim(1), n = b.dim(1);
    Tensor out({m, n});
    detail::gemm(false, false, m, n, k, 1.0f, a.data().data(), k, b.data().data(), n, 0.0f, out.data().data(), n);
    if (should_record({&a, &b})) {
        record(out, {a, b}, [a, b, m, k, n](std::span<const float> g) mutable {
            auto ga = grad_of(a);
            auto gb = grad_of(b);
            if (!ga.empty()) detail::gemm(false, true, m, k, n, 1.0f, g.data(), n, b.data().data(), n, 1.0f, ga.data(), k);
            if (!gb.empty()) detail::gemm(true, false, k, n, m, 1.0f, a.data().data(), k, g.data(), n, 1.0f, gb.data(), n);
        });
    }
    return out;
}

// ------------------------------------------------------------ layout ops

Tensor reshape(const Tensor& a, Shape shape) {
    int infer = -1;
    std::int64_t known = 1;
    for (std::size_t i = 0; i < shape.size(); ++i) {
        if (shape[i] == -1) {
            if (infer >= 0) throw ShapeError("reshape allows a single -1");
            infer = static_cast<int>(i);
        } else {
            if (shape[i] < 0) throw ShapeError("negative dimension in reshape");
            known *= shape[i];
        }
    }
    if (infer >= 0) {
        if (known == 0 || a.numel() % known != 0) throw ShapeError("cannot infer reshape dimension");
        shape[static_cast<std::size_t>(infer)] = a.numel() / known;
    }
    if (shape_numel(shape) != a.numel())
        throw ShapeError("reshape " + shape_str(a.shape()) + " -> " + shape_str(shape) + " changes element count");
    Tensor out(shape, std::vector<float>(a.data().begin(), a.data().end()));
    if (should_record({&a})) {
        record(out, {a}, [a](std::span<const float> g) mutable {
            auto ga = grad_of(a);
            for (std::size_t i = 0; i < ga.size(); ++i) ga[i] += g[i];
        });
    }
    return out;
}

Tensor permute(const Tensor& a, std::vector<int> axes) {
    const int r = a.rank();
    if (static_cast<int>(axes.size()) != r) throw ShapeError("permute needs one entry per axis");
    std::vector<bool> seen(static_cast<std::size_t>(r), false);
    for (auto& ax : axes) {
        ax = normalize_axis(ax, r);
        if (seen[static_cast<std::size_t>(ax)]) throw ShapeError("permute axes must be distinct");
        seen[static_cast<std::size_t>(ax)] = true;
    }
    std::vector<std::int64_t> in_stride(static_cast<std::size_t>(r), 1);
    for (int d = r - 2; d >= 0; --d)
        in_stride[static_cast<std::size_t>(d)] = in_stride[static_cast<std::size_t>(d) + 1] * a.shape()[static_cast<std::size_t>(d) + 1];
    Shape out_shape(static_cast<std::size_t>(r));
    std::vector<std::int64_t> stride(static_cast<std::size_t>(r));
    for (int d = 0; d < r; ++d) {
        out_shape[static_cast<std::size_t>(d)] = a.shape()[static_cast<std::size_t>(axes[static_cast<std::size_t>(d)])];
        stride[static_cast<std::size_t>(d)] = in_stride[static_cast<std::size_t>(axes[static_cast<std::size_t>(d)])];
    }
    // Source index of every output element, walked with an odometer.
    auto walk = [out_shape, stride, r](auto&& f) {
        const std::int64_t n = shape_numel(out_shape);
        std::vector<std::int64_t> idx(static_cast<std::size_t>(r), 0);
        std::int64_t src = 0;
        for (std::int64_t o = 0; o < n; ++o) {
            f(o, src);
            for (int d = r - 1; d >= 0; --d) {
                const auto ud = static_cast<std::size_t>(d);
                ++idx[ud];
                src += stride[ud];
                if (idx[ud] < out_shape[ud]) break;
                src -= stride[ud] * out_shape[ud];
                idx[ud] = 0;
            }
        }
    };
    Tensor out(out_shape);
    auto o = out.data();
    auto x = a.data();
    walk([&](std::int64_t io, std::int64_t is) { o[io] = x[is]; });
    if (should_record({&a})) {
        record(out, {a}, [a, walk](std::span<const float> g) mutable {
            auto ga = grad_of(a);
            walk([&](std::int64_t io, std::int64_t is) { ga[is] += g[io]; });
        });
    }
    return out;
}

Tensor slice(const Tensor& a, int axis, std::int64_t start, std::int64_t length) {
    axis = normalize_axis(axis, a.rank());
    const AxisView v = axis_view(a.shape(), axis);
    if (start < 0 || length < 0 || start + length > v.n) throw ShapeError("slice out of range");
    Shape s = a.shape();
    s[static_cast<std::size_t>(axis)] = length;
    Tensor out(s);
    auto o = out.data();
    auto x = a.data();
    for (std::int64_t p = 0; p < v.outer; ++p)
        std::copy_n(x.begin() + (p * v.n + start) * v.inner, length * v.inner, o.begin() + p * length * v.inner);
    if (should_record({&a})) {
        record(out, {a}, [a, v, start, length](std::span<const float> g) mutable {
            auto ga = grad_of(a);
            for (std::int64_t p = 0; p < v.outer; ++p) {
                float* dst = ga.data() + (p * v.n + start) * v.inner;
                const float* src = g.data() + p * length * v.inner;
                for (std::int64_t i = 0; i < length * v.inner; ++i) dst[i] += src[i];
            }
        });
    }
    return out;
}

Tensor concat(std::span<const Tensor> parts, int axis) {
    if (parts.empty()) throw ShapeError("concat of zero tensors");
    axis = normalize_axis(axis, parts[0].rank());
    Shape s = parts[0].shape();
    std::int64_t total = 0;
    for (const auto& p : parts) {
        if (p.rank() != parts[0].rank()) throw ShapeError("concat rank mismatch");
        for (int d = 0; d < p.rank(); ++d)
            if (d != axis && p.shape()[static_cast<std::size_t>(d)] != s[static_cast<std::size_t>(d)])
                throw ShapeError("concat shape mismatch off the concat axis");
        total += p.dim(axis);
    }
    s[static_cast<std::size_t>(axis)] = total;
    Tensor out(s);
    const AxisView ov = axis_view(s, axis);
    std::vector<std::int64_t> offsets;
    std::int64_t off = 0;
    for (const auto& p : parts) {
        offsets.push_back(off);
        const std::int64_t len = p.dim(axis);
        for (std::int64_t q = 0; q < ov.outer; ++q)
            std::copy_n(p.data().begin() + q * len * ov.inner, len * ov.inner,
                        out.data().begin() + (q * ov.n + off) * ov.inner);
        off += len;
    }
    std::vector<const Tensor*> ptrs;
    for (const auto& p : parts) ptrs.push_back(&p);
    bool rec = false;
    for (const auto* p : ptrs) rec = rec || should_record({p});
    if (rec) {
        std::vector<Tensor> inputs(parts.begin(), parts.end());
        record(out, inputs, [inputs, offsets, ov](std::span<const float> g) mutable {
            for (std::size_t k = 0; k < inputs.size(); ++k) {
                auto gp = grad_of(inputs[k]);
                if (gp.empty()) continue;
                const std::int64_t len = static_cast<std::int64_t>(gp.size()) / (ov.outer * ov.inner);
                for (std::int64_t q = 0; q < ov.outer; ++q) {
                    const float* src = g.data() + (q * ov.n + offsets[k]) * ov.inner;
                    float* dst = gp.data() + q * len * ov.inner;
                    for (std::int64_t i = 0; i < len * ov.inner; ++i) dst[i] += src[i];
                }
            }
        });
    }
    return out;
}

// ------------------------------------------------------------- reductions

Tensor sum(const Tensor& a) {
    double acc = 0.0;
    for (float v : a.data()) acc += v;
    Tensor out = Tensor::scalar(static_cast<float>(acc));
    if (should_record({&a})) {
        record(out, {a}, [a](std::span<const float> g) mutable {
            auto ga = grad_of(a);
            for (auto& v : ga) v += g[0];
        });
    }
    return out;
}

Tensor mean(const Tensor& a) {
    if (a.numel() == 0) throw ShapeError("mean of empty tensor");
    return mul_scalar(sum(a), 1.0f / static_cast<float>(a.numel()));
}

Tensor sum(const Tensor& a, int axis) {
    axis = normalize_axis(axis, a.rank());
    const AxisView v = axis_view(a.shape(), axis);
    Shape s = a.shape();
    s.erase(s.begin() + axis);
    Tensor out(s);
    auto x = a.data();
    auto o = out.data();
    for (std::int64_t p = 0; p < v.outer; ++p)
        for (std::int64_t k = 0; k < v.n; ++k) {
            const float* src = x.data() + (p * v.n + k) * v.inner;
            float* dst = o.data() + p * v.inner;
            for (std::int64_t i = 0; i < v.inner; ++i) dst[i] += src[i];
        }
    if (should_record({&a})) {
        record(out, {a}, [a, v](std::span<const float> g) mutable {
            auto ga = grad_of(a);
            for (std::int64_t p = 0; p < v.outer; ++p)
                for (std::int64_t k = 0; k < v.n; ++k) {
                    float* dst = ga.data() + (p * v.n + k) * v.inner;
                    const float* src = g.data() + p * v.inner;
                    for (std::int64_t i = 0; i < v.inner; ++i) dst[i] += src[i];
                }
        });
    }
    return out;
}

Tensor mean(const Tensor& a, int axis) {
    const std::int64_t n = a.dim(axis);
    if (n == 0) throw ShapeError("mean over empty axis");
    return mul_scalar(sum(a, axis), 1.0f / static_cast<float>(n));
}

// ------------------------------------------------------------ normalizers

Tensor softmax(const Tensor& a, int axis) {
    axis = normalize_axis(axis, a.rank());
    const AxisView v = axis_view(a.shape(), axis);
    Tensor out(a.shape());
    auto x = a.data();
    auto y = out.data();
    for (std::int64_t p = 0; p < v.outer; ++p)
        for (std::int64_t i = 0; i < v.inner; ++i) {
            const std::int64_t base = p * v.n * v.inner + i;
            float mx = x[base];
            for (std::int64_t k = 1; k < v.n; ++k) mx = std::max(mx, x[base + k * v.inner]);
            float s = 0.0f;
            for (std::int64_t k = 0; k < v.n; ++k) {
                const float e = std::exp(x[base + k * v.inner] - mx);
                y[base + k * v.inner] = e;
                s += e;
            }
            const float inv = 1.0f / s;
            for (std::int64_t k = 0; k < v.n; ++k) y[base + k * v.inner] *= inv;
        }
    if (should_record({&a})) {
        Tensor res = out;
        record(out, {a}, [a, res, v](std::span<const float> g) mutable {
            auto ga = grad_of(a);
            auto y = res.data();
            for (std::int64_t p = 0; p < v.outer; ++p)
                for (std::int64_t i = 0; i < v.inner; ++i) {
                    const std::int64_t base = p * v.n * v.inner + i;
                    float dot = 0.0f;
                    for (std::int64_t k = 0; k < v.n; ++k) dot += g[base + k * v.inner] * y[base + k * v.inner];
                    for (std::int64_t k = 0; k < v.n; ++k) {
                        const std::int64_t j = base + k * v.inner;
                        ga[j] += y[j] * (g[j] - dot);
                    }
                }
        });
    }
    return out;
}

Tensor log_softmax(const Tensor& a, int axis) {
    axis = normalize_axis(axis, a.rank());
    const AxisView v = axis_view(a.shape(), axis);
    Tensor out(a.shape());
    auto x = a.data();
    auto y = out.data();
    for (std::int64_t p = 0; p < v.outer; ++p)
        for (std::int64_t i = 0; i < v.inner; ++i) {
            const std::int64_t base = p * v.n * v.inner + i;
            float mx = x[base];
            for (std::int64_t k = 1; k < v.n; ++k) mx = std::max(mx, x[base + k * v.inner]);
            float s = 0.0f;
            for (std::int64_t k = 0; k < v.n; ++k) s += std::exp(x[base + k * v.inner] - mx);
            const float lse = mx + std::log(s);
            for (std::int64_t k = 0; k < v.n; ++k) y[base + k * v.inner] = x[base + k * v.inner] - lse;
        }
    if (should_record({&a})) {
        Tensor res = out;
        record(out, {a}, [a, res, v](std::span<const float> g) mutable {
            auto ga = grad_of(a);
            auto y = res.data();
            for (std::int64_t p = 0; p < v.outer; ++p)
                for (std::int64_t i = 0; i < v.inner; ++i) {
                    const std::int64_t base = p * v.n * v.inner + i;
                    float gs = 0.0f;
                    for (std::int64_t k = 0; k < v.n; ++k) gs += g[base + k * v.inner];
                    for (std::int64_t k = 0; k < v.n; ++k) {
                        const std::int64_t j = base + k * v.inner;
                        ga[j] += g[j] - std::exp(y[j]) * gs;
                    }
                }
        });
    }
    return out;
}

Tensor layer_norm(const Tensor& x, int axis, const Tensor& gamma, const Tensor& beta, float eps) {
    axis = normalize_axis(axis, x.rank());
    const AxisView v = axis_view(x.shape(), axis);
    if (gamma.defined() && gamma.numel() != v.n) throw ShapeError("layer_norm gamma length mismatch");
    if (beta.defined() && beta.numel() != v.n) throw ShapeError("layer_norm beta length mismatch");
    Tensor out(x.shape());
    Tensor xhat(x.shape());
    std::vector<float> rstd(static_cast<std::size_t>(v.outer * v.inner));
    auto in = x.data();
    auto xh = xhat.data();
    auto y = out.data();
    const float inv_n = 1.0f / static_cast<float>(v.n);
    for (std::int64_t p = 0; p < v.outer; ++p)
        for (std::int64_t i = 0; i < v.inner; ++i) {
            const std::int64_t base = p * v.n * v.inner + i;
            double mu = 0.0;
            for (std::int64_t k = 0; k < v.n; ++k) mu += in[base + k * v.inner];
            mu *= inv_n;
            double var = 0.0;
            for (std::int64_t k = 0; k < v.n; ++k) {
                const double d = in[base + k * v.inner] - mu;
                var += d * d;
            }
            var *= inv_n;
            const float r = static_cast<float>(1.0 / std::sqrt(var + eps));
            rstd[static_cast<std::size_t>(p * v.inner + i)] = r;
            for (std::int64_t k = 0; k < v.n; ++k) {
                const std::int64_t j = base + k * v.inner;
                xh[j] = static_cast<float>(in[j] - mu) * r;
                float val = xh[j];
                if (gamma.defined()) val *= gamma.data()[static_cast<std::size_t>(k)];
                if (beta.defined()) val += beta.data()[static_cast<std::size_t>(k)];
                y[j] = val;
            }
        }
    if (should_record({&x, &gamma, &beta})) {
        std::vector<Tensor> inputs{x};
        if (gamma.defined()) inputs.push_back(gamma);
        if (beta.defined()) inputs.push_back(beta);
        record(out, inputs,
               [x, gamma, beta, xhat, rstd = std::move(rstd), v, inv_n](std::span<const float> g) mutable {
                   auto gx = grad_of(x);
                   auto gg = grad_of(gamma);
                   auto gb = grad_of(beta);
                   auto xh = xhat.data();
                   std::vector<float> gy(static_cast<std::size_t>(v.n));
                   for (std::int64_t p = 0; p < v.outer; ++p)
                       for (std::int64_t i = 0; i < v.inner; ++i) {
                           const std::int64_t base = p * v.n * v.inner + i;
                           float m1 = 0.0f, m2 = 0.0f;
                           for (std::int64_t k = 0; k < v.n; ++k) {
                               const std::int64_t j = base + k * v.inner;
                               const float gk = g[j];
                               if (!gg.empty()) gg[k] += gk * xh[j];
                               if (!gb.empty()) gb[k] += gk;
                               const float gyk = gamma.defined() ? gk * gamma.data()[static_cast<std::size_t>(k)] : gk;
                               gy[static_cast<std::size_t>(k)] = gyk;
                               m1 += gyk;
                               m2 += gyk * xh[j];
                           }
                           if (gx.empty()) continue;
                           m1 *= inv_n;
                           m2 *= inv_n;
                           const float r = rstd[static_cast<std::size_t>(p * v.inner + i)];
                           for (std::int64_t k = 0; k < v.n; ++k) {
                               const std::int64_t j = base + k * v.inner;
                               gx[j] += r * (gy[static_cast<std::size_t>(k)] - m1 - xh[j] * m2);
                           }
                       }
               });
    }
    return out;
}

}  // namespace ynetr

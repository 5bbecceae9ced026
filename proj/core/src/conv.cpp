#include <algorithm>
#include <string>
#include <vector>

#include "gemm.hpp"

#include "ynetr/ops.hpp"

namespace ynetr {
namespace {

using detail::record;
using detail::should_record;
using detail::grad_buffer;

// Geometry of a direct convolution "in" (ci, N...) -> "out" (co, O...).
struct ConvGeom {
    std::int64_t ci = 0, co = 0;
    std::int64_t n[3] = {0, 0, 0};
    std::int64_t k[3] = {0, 0, 0};
    std::int64_t o[3] = {0, 0, 0};
    int stride = 1;
    int pad = 0;

    std::int64_t in_volume() const { return n[0] * n[1] * n[2]; }
    std::int64_t out_volume() const { return o[0] * o[1] * o[2]; }
};

// Output positions o along one axis where o * s - p + kk falls inside [0, n).
struct Range {
    std::int64_t lo, hi;
};

Range valid_range(std::int64_t kk, std::int64_t n, std::int64_t o, int s, int p) {
    const std::int64_t num_lo = p - kk;
    std::int64_t lo = num_lo <= 0 ? 0 : (num_lo + s - 1) / s;
    const std::int64_t num_hi = n - 1 + p - kk;
    std::int64_t hi = num_hi < 0 ? 0 : num_hi / s + 1;
    lo = std::max<std::int64_t>(lo, 0);
    hi = std::min<std::int64_t>(hi, o);
    return {lo, std::max(lo, hi)};
}

std::int64_t taps(const ConvGeom& g) { return g.k[0] * g.k[1] * g.k[2]; }

bool is_pointwise(const ConvGeom& g) {
    return g.k[0] == 1 && g.k[1] == 1 && g.k[2] == 1 && g.stride == 1 && g.pad == 0;
}

// Output x-slabs are processed in chunks so the column buffer stays near
// kColumnBudget floats.
constexpr std::int64_t kColumnBudget = std::int64_t{1} << 22;

std::int64_t slab_chunk(const ConvGeom& g) {
    const std::int64_t per_slab = g.ci * taps(g) * g.o[1] * g.o[2];
    return std::clamp<std::int64_t>(kColumnBudget / std::max<std::int64_t>(per_slab, 1), 1, g.o[0]);
}

// Visits the valid input run of every (ci, tap, ox, oy) with ox in [ox0, ox1):
// fn(column_row, column_offset, input_offset, valid_oz_range).
template <typename Fn>
void for_each_run(const ConvGeom& g, std::int64_t ox0, std::int64_t ox1, Fn&& fn) {
    std::int64_t r = 0;
    for (std::int64_t ci = 0; ci < g.ci; ++ci)
        for (std::int64_t a = 0; a < g.k[0]; ++a) {
            const Range rx = valid_range(a, g.n[0], g.o[0], g.stride, g.pad);
            for (std::int64_t b = 0; b < g.k[1]; ++b) {
                const Range ry = valid_range(b, g.n[1], g.o[1], g.stride, g.pad);
                for (std::int64_t c = 0; c < g.k[2]; ++c, ++r) {
                    const Range rz = valid_range(c, g.n[2], g.o[2], g.stride, g.pad);
                    if (rz.lo >= rz.hi) continue;
                    for (std::int64_t ox = std::max(ox0, rx.lo); ox < std::min(ox1, rx.hi); ++ox) {
                        const std::int64_t ix = ox * g.stride - g.pad + a;
                        for (std::int64_t oy = ry.lo; oy < ry.hi; ++oy) {
                            const std::int64_t iy = oy * g.stride - g.pad + b;
                            const std::int64_t col = ((ox - ox0) * g.o[1] + oy) * g.o[2];
                            const std::int64_t in = ((ci * g.n[0] + ix) * g.n[1] + iy) * g.n[2] + c - g.pad;
                            fn(r, col, in, rz);
                        }
                    }
                }
            }
        }
}

// col[(ci, tap), (ox - ox0, oy, oz)] = in[ci, o * s - p + tap], zero outside.
void im2col(const float* in, const ConvGeom& g, std::int64_t ox0, std::int64_t ox1, std::vector<float>& col) {
    const std::int64_t width = (ox1 - ox0) * g.o[1] * g.o[2];
    col.assign(static_cast<std::size_t>(g.ci * taps(g) * width), 0.0f);
    const int s = g.stride;
    for_each_run(g, ox0, ox1, [&](std::int64_t r, std::int64_t c, std::int64_t i, Range rz) {
        float* dst = col.data() + r * width + c;
        const float* src = in + i;
        for (std::int64_t oz = rz.lo; oz < rz.hi; ++oz) dst[oz] = src[oz * s];
    });
}

// Scatter-adds a column buffer back onto the input grid.
void col2im(const std::vector<float>& col, const ConvGeom& g, std::int64_t ox0, std::int64_t ox1, float* in) {
    const std::int64_t width = (ox1 - ox0) * g.o[1] * g.o[2];
    const int s = g.stride;
    for_each_run(g, ox0, ox1, [&](std::int64_t r, std::int64_t c, std::int64_t i, Range rz) {
        const float* src = col.data() + r * width + c;
        float* dst = in + i;
        for (std::int64_t oz = rz.lo; oz < rz.hi; ++oz) dst[oz * s] += src[oz];
    });
}

// out[co, o] += sum w[co, ci, k] * in[ci, o * s - p + k]
void conv_forward(const float* in, const float* w, float* out, const ConvGeom& g) {
    const std::int64_t rows = g.ci * taps(g), ov = g.out_volume();
    if (is_pointwise(g)) {
        detail::gemm(false, false, g.co, ov, rows, 1.0f, w, rows, in, ov, 1.0f, out, ov);
        return;
    }
    const std::int64_t slab = g.o[1] * g.o[2], chunk = slab_chunk(g);
    std::vector<float> col;
    for (std::int64_t ox0 = 0; ox0 < g.o[0]; ox0 += chunk) {
        const std::int64_t ox1 = std::min(g.o[0], ox0 + chunk), width = (ox1 - ox0) * slab;
        im2col(in, g, ox0, ox1, col);
        detail::gemm(false, false, g.co, width, rows, 1.0f, w, rows, col.data(), width, 1.0f, out + ox0 * slab, ov);
    }
}

// gin[ci, o * s - p + k] += w[co, ci, k] * gout[co, o]
void conv_backward_data(const float* gout, const float* w, float* gin, const ConvGeom& g) {
    const std::int64_t rows = g.ci * taps(g), ov = g.out_volume();
    if (is_pointwise(g)) {
        detail::gemm(true, false, rows, ov, g.co, 1.0f, w, rows, gout, ov, 1.0f, gin, ov);
        return;
    }
    const std::int64_t slab = g.o[1] * g.o[2], chunk = slab_chunk(g);
    std::vector<float> col;
    for (std::int64_t ox0 = 0; ox0 < g.o[0]; ox0 += chunk) {
        const std::int64_t ox1 = std::min(g.o[0], ox0 + chunk), width = (ox1 - ox0) * slab;
        col.assign(static_cast<std::size_t>(rows * width), 0.0f);
        detail::gemm(true, false, rows, width, g.co, 1.0f, w, rows, gout + ox0 * slab, ov, 0.0f, col.data(), width);
        col2im(col, g, ox0, ox1, gin);
    }
}

// gw[co, ci, k] += sum_o gout[co, o] * in[ci, o * s - p + k]
void conv_backward_weight(const float* in, const float* gout, float* gw, const ConvGeom& g) {
    const std::int64_t rows = g.ci * taps(g), ov = g.out_volume();
    if (is_pointwise(g)) {
        detail::gemm(false, true, g.co, rows, ov, 1.0f, gout, ov, in, ov, 1.0f, gw, rows);
        return;
    }
    const std::int64_t slab = g.o[1] * g.o[2], chunk = slab_chunk(g);
    std::vector<float> col;
    for (std::int64_t ox0 = 0; ox0 < g.o[0]; ox0 += chunk) {
        const std::int64_t ox1 = std::min(g.o[0], ox0 + chunk), width = (ox1 - ox0) * slab;
        im2col(in, g, ox0, ox1, col);
        detail::gemm(false, true, g.co, rows, width, 1.0f, gout + ox0 * slab, ov, col.data(), width, 1.0f, gw, rows);
    }
}

void add_bias(float* out, const float* bias, std::int64_t channels, std::int64_t volume) {
    for (std::int64_t c = 0; c < channels; ++c) {
        float* dst = out + c * volume;
        const float b = bias[c];
        for (std::int64_t i = 0; i < volume; ++i) dst[i] += b;
    }
}

void bias_grad(const float* g, float* gb, std::int64_t channels, std::int64_t volume) {
    for (std::int64_t c = 0; c < channels; ++c) {
        const float* src = g + c * volume;
        float acc = 0.0f;
#pragma omp simd reduction(+ : acc)
        for (std::int64_t i = 0; i < volume; ++i) acc += src[i];
        gb[c] += acc;
    }
}

void check_common(const Tensor& x, const Tensor& w, const Tensor& bias, int stride, int padding, const char* op) {
    if (x.rank() != 4) throw ShapeError(std::string(op) + " input must be (channels, x, y, z), got " + shape_str(x.shape()));
    if (w.rank() != 5) throw ShapeError(std::string(op) + " weight must be rank 5, got " + shape_str(w.shape()));
    if (stride <= 0) throw ShapeError(std::string(op) + " stride must be positive");
    if (padding < 0) throw ShapeError(std::string(op) + " padding must be non-negative");
    (void)bias;
}

}  // namespace

Tensor conv3d(const Tensor& x, const Tensor& weight, const Tensor& bias, int stride, int padding) {
    check_common(x, weight, bias, stride, padding, "conv3d");
    ConvGeom g;
    g.ci = x.dim(0);
    g.co = weight.dim(0);
    if (weight.dim(1) != g.ci)
        throw ShapeError("conv3d weight " + shape_str(weight.shape()) + " does not match input " + shape_str(x.shape()));
    if (bias.defined() && bias.numel() != g.co) throw ShapeError("conv3d bias length mismatch");
    g.stride = stride;
    g.pad = padding;
    for (int d = 0; d < 3; ++d) {
        g.n[d] = x.dim(d + 1);
        g.k[d] = weight.dim(d + 2);
        if (g.k[d] > g.n[d] + 2 * padding) throw ShapeError("conv3d kernel larger than padded input");
        g.o[d] = (g.n[d] + 2 * padding - g.k[d]) / stride + 1;
    }
    Tensor out({g.co, g.o[0], g.o[1], g.o[2]});
    conv_forward(x.data().data(), weight.data().data(), out.data().data(), g);
    if (bias.defined()) add_bias(out.data().data(), bias.data().data(), g.co, g.out_volume());

    if (should_record({&x, &weight, &bias})) {
        std::vector<Tensor> inputs{x, weight};
        if (bias.defined()) inputs.push_back(bias);
        record(out, inputs, [x, weight, bias, g](std::span<const float> go) mutable {
            if (x.requires_grad()) conv_backward_data(go.data(), weight.data().data(), grad_buffer(x).data(), g);
            if (weight.requires_grad()) conv_backward_weight(x.data().data(), go.data(), grad_buffer(weight).data(), g);
            if (bias.defined() && bias.requires_grad()) bias_grad(go.data(), grad_buffer(bias).data(), g.co, g.out_volume());
        });
    }
    return out;
}

Tensor conv_transpose3d(const Tensor& x, const Tensor& weight, const Tensor& bias, int stride, int padding) {
    check_common(x, weight, bias, stride, padding, "conv_transpose3d");
    // Expressed as the adjoint of a convolution from the (cout) output back to
    // the (cin) input, whose weight is the same tensor read as (cin, cout, k).
    ConvGeom g;
    g.co = x.dim(0);
    g.ci = weight.dim(1);
    if (weight.dim(0) != g.co)
        throw ShapeError("conv_transpose3d weight " + shape_str(weight.shape()) + " does not match input " +
                         shape_str(x.shape()));
    if (bias.defined() && bias.numel() != g.ci) throw ShapeError("conv_transpose3d bias length mismatch");
    g.stride = stride;
    g.pad = padding;
    for (int d = 0; d < 3; ++d) {
        g.o[d] = x.dim(d + 1);
        g.k[d] = weight.dim(d + 2);
        g.n[d] = (g.o[d] - 1) * stride - 2 * padding + g.k[d];
        if (g.n[d] < 1) throw ShapeError("conv_transpose3d produces an empty output");
    }
    Tensor out({g.ci, g.n[0], g.n[1], g.n[2]});
    conv_backward_data(x.data().data(), weight.data().data(), out.data().data(), g);
    if (bias.defined()) add_bias(out.data().data(), bias.data().data(), g.ci, g.in_volume());

    if (should_record({&x, &weight, &bias})) {
        std::vector<Tensor> inputs{x, weight};
        if (bias.defined()) inputs.push_back(bias);
        record(out, inputs, [x, weight, bias, g](std::span<const float> go) mutable {
            if (x.requires_grad()) conv_forward(go.data(), weight.data().data(), grad_buffer(x).data(), g);
            if (weight.requires_grad()) conv_backward_weight(go.data(), x.data().data(), grad_buffer(weight).data(), g);
            if (bias.defined() && bias.requires_grad()) bias_grad(go.data(), grad_buffer(bias).data(), g.ci, g.in_volume());
        });
    }
    return out;
}

}  // namespace ynetr

#include <gtest/gtest.h>

#include <cmath>
#include <random>

#include "gradcheck.hpp"
#include "reference.hpp"
#include "ynetr/ops.hpp"

namespace ynetr {
namespace {

using testing::dot;
using testing::naive_conv3d;
using testing::naive_conv_transpose3d;
using testing::random_tensor;

void expect_close(const Tensor& a, const Tensor& b, float tol) {
    ASSERT_EQ(a.shape(), b.shape());
    for (std::int64_t i = 0; i < a.numel(); ++i) ASSERT_NEAR(a.data()[i], b.data()[i], tol) << i;
}

struct ConvCase {
    int cin, cout, n, k, stride, pad;
};

const ConvCase kCases[] = {
    {1, 1, 4, 3, 1, 1}, {2, 3, 5, 3, 1, 1}, {3, 2, 6, 3, 2, 1}, {2, 4, 4, 2, 2, 0}, {4, 2, 5, 1, 1, 0}, {1, 2, 7, 3, 2, 0},
};

TEST(Conv, DeltaKernelIsIdentity) {
    std::mt19937_64 rng(1);
    const Tensor x = random_tensor({1, 4, 4, 4}, rng);
    Tensor w(Shape{1, 1, 3, 3, 3}, 0.0f);
    w.data()[13] = 1.0f;
    const Tensor y = conv3d(x, w, {}, 1, 1);
    ASSERT_EQ(y.shape(), x.shape());
    for (std::int64_t i = 0; i < x.numel(); ++i) EXPECT_EQ(y.data()[i], x.data()[i]);
}

TEST(Conv, ForwardMatchesNaiveOracle) {
    std::mt19937_64 rng(2);
    for (const auto& c : kCases) {
        const Tensor x = random_tensor({c.cin, c.n, c.n + 1, c.n}, rng);
        const Tensor w = random_tensor({c.cout, c.cin, c.k, c.k, c.k}, rng);
        const Tensor b = random_tensor({c.cout}, rng);
        expect_close(conv3d(x, w, b, c.stride, c.pad), naive_conv3d(x, w, b, c.stride, c.pad), 1e-5f);
    }
}

TEST(Conv, TransposeMatchesNaiveOracle) {
    std::mt19937_64 rng(3);
    for (const auto& c : kCases) {
        const Tensor x = random_tensor({c.cin, c.n, c.n, c.n - 1}, rng);
        const Tensor w = random_tensor({c.cin, c.cout, c.k, c.k, c.k}, rng);
        const Tensor b = random_tensor({c.cout}, rng);
        expect_close(conv_transpose3d(x, w, b, c.stride, c.pad), naive_conv_transpose3d(x, w, b, c.stride, c.pad),
                     1e-5f);
    }
}

TEST(Conv, TransposeIsAdjoint) {
    std::mt19937_64 rng(4);
    for (auto c : kCases) {
        // Without output padding the transpose only inverts geometries whose
        // strided windows tile the padded input exactly.
        while ((c.n + 2 * c.pad - c.k) % c.stride != 0) ++c.n;
        const Tensor x = random_tensor({c.cin, c.n, c.n, c.n}, rng);
        const Tensor w = random_tensor({c.cout, c.cin, c.k, c.k, c.k}, rng);
        const Tensor cx = conv3d(x, w, {}, c.stride, c.pad);
        const Tensor y = random_tensor(cx.shape(), rng);
        const Tensor ty = conv_transpose3d(y, w, {}, c.stride, c.pad);
        ASSERT_EQ(ty.shape(), x.shape());
        const double lhs = dot(cx, y), rhs = dot(x, ty);
        EXPECT_NEAR(lhs, rhs, 1e-4 * std::max(std::abs(lhs), 1.0));
    }
}

TEST(Conv, UpsamplingShape) {
    const Tensor y = conv_transpose3d(Tensor(Shape{4, 3, 3, 3}, 1.0f), Tensor(Shape{4, 2, 2, 2, 2}, 1.0f), {}, 2, 0);
    EXPECT_EQ(y.shape(), (Shape{2, 6, 6, 6}));
    for (float v : y.data()) EXPECT_EQ(v, 4.0f);
}

TEST(Conv, Errors) {
    const Tensor x(Shape{2, 4, 4, 4}, 0.0f);
    EXPECT_THROW(conv3d(x, Tensor(Shape{1, 3, 3, 3, 3}), {}), ShapeError);
    EXPECT_THROW(conv3d(x, Tensor(Shape{1, 2, 3, 3, 3}), {}, 0), ShapeError);
    EXPECT_THROW(conv3d(x, Tensor(Shape{1, 2, 7, 7, 7}), {}, 1, 1), ShapeError);
    EXPECT_THROW(conv3d(x, Tensor(Shape{1, 2, 3, 3, 3}), Tensor(Shape{2})), ShapeError);
    EXPECT_THROW(conv3d(Tensor(Shape{4, 4, 4}), Tensor(Shape{1, 4, 1, 1, 1}), {}), ShapeError);
}

}  // namespace
}  // namespace ynetr

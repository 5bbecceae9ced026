#include <gtest/gtest.h>

#include <cmath>
#include <random>

#include "ynetr/optim.hpp"

namespace ynetr {
namespace {

Tensor param(std::vector<float> v) {
    const auto n = static_cast<std::int64_t>(v.size());
    return Tensor(Shape{n}, std::move(v)).set_requires_grad(true);
}

void set_grad(Tensor& p, std::vector<float> g) {
    for (std::size_t i = 0; i < g.size(); ++i) p.grad()[i] = g[i];
}

TEST(AdamW, FirstStepUnitGradient) {
    std::vector<Tensor> ps{param({1.0f})};
    set_grad(ps[0], {1.0f});
    AdamWState st;
    adamw_step(ps, st, AdamWConfig{1e-4f, 0.0f});
    EXPECT_EQ(st.step, 1);
    EXPECT_NEAR(ps[0].data()[0], 1.0 - 1e-4 / (1.0 + 1e-8), 1e-7);
    EXPECT_NEAR(ps[0].data()[0], 0.9999, 1e-7);
}

TEST(AdamW, ZeroGradientNoDecayLeavesParameters) {
    std::vector<Tensor> ps{param({1.0f, -2.5f, 0.125f})};
    ps[0].grad();
    AdamWState st;
    for (int i = 0; i < 3; ++i) adamw_step(ps, st, AdamWConfig{1e-3f, 0.0f});
    EXPECT_EQ(ps[0].data()[0], 1.0f);
    EXPECT_EQ(ps[0].data()[1], -2.5f);
    EXPECT_EQ(ps[0].data()[2], 0.125f);
}

TEST(AdamW, PureDecoupledDecay) {
    std::vector<Tensor> ps{param({1.0f})};
    ps[0].grad();
    AdamWState st;
    adamw_step(ps, st, AdamWConfig{1e-4f, 0.01f});
    // float32 spacing just below 1 is 6e-8.
    EXPECT_NEAR(ps[0].data()[0], 1.0 - 1e-6, 6e-8);
}

TEST(AdamW, ZeroLearningRateIsBitwiseNoOp) {
    std::mt19937_64 rng(1);
    std::normal_distribution<float> n;
    std::vector<Tensor> ps{param({n(rng), n(rng), n(rng)}), param({n(rng)})};
    const std::vector<float> a(ps[0].data().begin(), ps[0].data().end());
    AdamWState st;
    for (int i = 0; i < 5; ++i) {
        set_grad(ps[0], {n(rng), n(rng), n(rng)});
        set_grad(ps[1], {n(rng)});
        adamw_step(ps, st, AdamWConfig{0.0f, 0.0f});
    }
    EXPECT_EQ(std::vector<float>(ps[0].data().begin(), ps[0].data().end()), a);
}

TEST(AdamW, MatchesDoublePrecisionOracle) {
    const AdamWConfig cfg{3e-3f, 0.05f};
    std::mt19937_64 rng(2);
    std::normal_distribution<float> n;
    std::vector<Tensor> ps{param({n(rng), n(rng), n(rng), n(rng)})};
    std::vector<double> p(ps[0].data().begin(), ps[0].data().end()), m(4, 0.0), v(4, 0.0);
    AdamWState st;
    for (int t = 1; t <= 20; ++t) {
        std::vector<float> g{n(rng), n(rng), n(rng), n(rng)};
        set_grad(ps[0], g);
        adamw_step(ps, st, cfg);
        const double b1 = 0.9, b2 = 0.999, lr = cfg.learning_rate, wd = cfg.weight_decay;
        for (int j = 0; j < 4; ++j) {
            p[j] -= lr * wd * p[j];
            m[j] = b1 * m[j] + (1 - b1) * g[j];
            v[j] = b2 * v[j] + (1 - b2) * double(g[j]) * g[j];
            const double mh = m[j] / (1 - std::pow(b1, t)), vh = v[j] / (1 - std::pow(b2, t));
            p[j] -= lr * mh / (std::sqrt(vh) + 1e-8);
        }
    }
    for (int j = 0; j < 4; ++j) EXPECT_NEAR(ps[0].data()[j], p[j], 1e-5);
    for (int j = 0; j < 4; ++j) EXPECT_GE(st.v[0][j], 0.0f);
}

TEST(AdamW, StateShapeMismatch) {
    std::vector<Tensor> ps{param({1.0f, 2.0f})};
    ps[0].grad();
    AdamWState st;
    st.m = {{0.0f}};
    st.v = {{0.0f}};
    EXPECT_THROW(adamw_step(ps, st, AdamWConfig{}), ShapeError);
    AdamWState st2;
    st2.m = {{0.0f, 0.0f}, {0.0f}};
    st2.v = {{0.0f, 0.0f}, {0.0f}};
    EXPECT_THROW(adamw_step(ps, st2, AdamWConfig{}), ShapeError);
}

TEST(AdamW, ClassWrapperZeroesAndSteps) {
    Tensor p = param({0.5f});
    AdamW opt({p}, AdamWConfig{1e-2f, 0.0f});
    p.grad()[0] = 3.0f;
    opt.step();
    EXPECT_LT(p.data()[0], 0.5f);
    opt.zero_grad();
    EXPECT_EQ(p.grad()[0], 0.0f);
    EXPECT_EQ(opt.state().step, 1);
}

}  // namespace
}  // namespace ynetr

#include <gtest/gtest.h>

#include <cstdlib>
#include <random>

#include "ynetr/phantom.hpp"
#include "ynetr/sampler.hpp"
#include "ynetr/wavelet.hpp"

namespace ynetr {
namespace {

std::size_t tumor_voxels(const LabelVolume& l) {
    std::size_t n = 0;
    for (auto v : l.data()) n += v;
    return n;
}

bool crop_matches(const Volume3D& src, const Volume3D& win, Index3 o) {
    for (int z = 0; z < win.nz(); ++z)
        for (int y = 0; y < win.ny(); ++y)
            for (int x = 0; x < win.nx(); ++x)
                if (win.at(x, y, z) != src.at(o.x + x, o.y + y, o.z + z)) return false;
    return true;
}

PhantomSpec one_tumor_spec() {
    PhantomSpec s;  // 128 x 128 x 96 at 2 x 2 x 2.5 mm
    s.tumors.count_min = s.tumors.count_max = 1;
    s.tumors.volume_min_cm3 = s.tumors.volume_max_cm3 = 8.0;
    s.seed = 11;
    return s;
}

TEST(Sampler, AlternatingDrawsOnOneTumorPhantom) {
    const Phantom ph = generate_phantom(one_tumor_spec());
    const FrequencyPair f = split_frequency(normalize_intensity(ph.image));
    const LabelIndex index(ph.label);
    SamplerConfig cfg;
    cfg.window = {64, 64, 64};
    cfg.jitter_max = 48;
    int positives = 0, negatives = 0;
    for (std::uint64_t d = 0; d < 200; ++d) {
        auto rng = draw_rng(cfg.seed, d);
        const bool want = d % 2 == 0;
        const WindowSample w = sample_window(f.lf, f.hf, ph.label, index, want, rng, cfg);
        ASSERT_EQ(w.label.shape(), cfg.window);
        EXPECT_EQ(w.positive, want);
        const std::size_t n = tumor_voxels(w.label);
        if (want) {
            EXPECT_GE(n, 1u) << d;
            positives += n >= 1;
        } else {
            EXPECT_EQ(n, 0u) << d;
            negatives += n == 0;
        }
        EXPECT_LE(std::abs(w.jitter.x), 48);
        EXPECT_LE(std::abs(w.jitter.y), 48);
        EXPECT_LE(std::abs(w.jitter.z), 48);
        EXPECT_EQ(crop(ph.label, w.origin, cfg.window), w.label);
        EXPECT_TRUE(crop_matches(f.lf, w.lf, w.origin));
        EXPECT_TRUE(crop_matches(f.hf, w.hf, w.origin));
    }
    EXPECT_EQ(positives, 100);
    EXPECT_EQ(negatives, 100);
}

TEST(Sampler, EmptyLabelHasNoPositiveWindow) {
    const Volume3D v(Extent3{16, 16, 16}, Spacing{});
    const LabelVolume l(v.shape(), v.spacing());
    SamplerConfig cfg;
    cfg.window = {8, 8, 8};
    std::mt19937_64 rng(1);
    EXPECT_THROW(sample_window(v, v, l, true, rng, cfg), NoForeground);
    EXPECT_EQ(tumor_voxels(sample_window(v, v, l, false, rng, cfg).label), 0u);
}

TEST(Sampler, AllTumorLabel) {
    const Volume3D v(Extent3{12, 10, 9}, Spacing{});
    const LabelVolume l(v.shape(), v.spacing(), std::uint8_t{1});
    SamplerConfig cfg;
    cfg.window = {8, 8, 8};
    std::mt19937_64 rng(2);
    for (int i = 0; i < 20; ++i) {
        const WindowSample w = sample_window(v, v, l, true, rng, cfg);
        EXPECT_TRUE(w.positive);
        EXPECT_EQ(tumor_voxels(w.label), 512u);
    }
    EXPECT_THROW(sample_window(v, v, l, false, rng, cfg), NoBackground);
}

TEST(Sampler, NoTumorFreeWindowRaises) {
    const Volume3D v(Extent3{10, 10, 10}, Spacing{});
    LabelVolume l(v.shape(), v.spacing());
    l.at(5, 5, 5) = 1;
    SamplerConfig cfg;
    cfg.window = {8, 8, 8};
    std::mt19937_64 rng(3);
    // Every 8-window origin in [0, 2]^3 covers (5, 5, 5).
    EXPECT_THROW(sample_window(v, v, l, false, rng, cfg), NoBackground);
    EXPECT_EQ(tumor_voxels(sample_window(v, v, l, true, rng, cfg).label), 1u);
}

TEST(Sampler, NegativeFoundByEnumerationWhenRare) {
    const Volume3D v(Extent3{12, 12, 12}, Spacing{});
    LabelVolume l(v.shape(), v.spacing(), std::uint8_t{1});
    // Only the corner block is tumor-free.
    for (int z = 0; z < 8; ++z)
        for (int y = 0; y < 8; ++y)
            for (int x = 0; x < 8; ++x) l.at(x, y, z) = 0;
    SamplerConfig cfg;
    cfg.window = {8, 8, 8};
    cfg.jitter_max = 0;
    for (std::uint64_t s = 0; s < 10; ++s) {
        auto rng = draw_rng(5, s);
        const WindowSample w = sample_window(v, v, l, false, rng, cfg);
        EXPECT_EQ(w.origin, (Index3{0, 0, 0}));
    }
}

TEST(Sampler, InputValidation) {
    const Volume3D v(Extent3{8, 8, 8}, Spacing{});
    const LabelVolume l(v.shape(), v.spacing());
    SamplerConfig cfg;
    cfg.window = {16, 8, 8};
    std::mt19937_64 rng(4);
    EXPECT_THROW(sample_window(v, v, l, false, rng, cfg), ShapeError);
    cfg.window = {8, 8, 8};
    cfg.jitter_max = -1;
    EXPECT_THROW(sample_window(v, v, l, false, rng, cfg), ConfigError);
    cfg.jitter_max = 0;
    EXPECT_THROW(sample_window(v, Volume3D(Extent3{8, 8, 9}, Spacing{}), l, false, rng, cfg), ShapeError);
}

TEST(LabelIndex, CountsMatchBruteForce) {
    std::mt19937_64 rng(6);
    LabelVolume l(Extent3{9, 7, 6}, Spacing{});
    for (auto& v : l.buffer()) v = (rng() % 5 == 0) ? 1 : 0;
    const LabelIndex idx(l);
    std::size_t total = 0;
    for (auto v : l.data()) total += v;
    EXPECT_EQ(idx.foreground().size(), total);
    for (int t = 0; t < 200; ++t) {
        const Extent3 s{1 + int(rng() % 9), 1 + int(rng() % 7), 1 + int(rng() % 6)};
        const Index3 o{int(rng() % (10 - s.nx)), int(rng() % (8 - s.ny)), int(rng() % (7 - s.nz))};
        EXPECT_EQ(idx.count_in(o, s), tumor_voxels(crop(l, o, s)));
    }
}

TEST(DrawRng, ReproducibleAndDistinct) {
    auto a = draw_rng(3, 17), b = draw_rng(3, 17), c = draw_rng(3, 18), d = draw_rng(4, 17);
    const auto va = a();
    EXPECT_EQ(va, b());
    EXPECT_NE(va, c());
    EXPECT_NE(va, d());
}

}  // namespace
}  // namespace ynetr

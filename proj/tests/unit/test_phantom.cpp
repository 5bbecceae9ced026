#include <gtest/gtest.h>

#include <algorithm>
#include <cmath>
#include <cstring>
#include <numbers>
#include <queue>

#include "ynetr/phantom.hpp"

namespace ynetr {
namespace {

PhantomSpec small_spec(std::uint64_t seed) {
    PhantomSpec s;
    s.shape = {64, 64, 48};
    s.spacing_mm = {1.5, 1.5, 2.0};
    s.liver.semi_axes_mm = {40.0, 38.0, 36.0};
    s.tumors.count_min = 1;
    s.tumors.count_max = 3;
    s.tumors.volume_min_cm3 = 1.0;
    s.tumors.volume_max_cm3 = 4.0;
    s.seed = seed;
    return s;
}

// Independent flood fill (6-connectivity) returning component sizes in scan order.
std::vector<std::size_t> flood_fill_sizes(const LabelVolume& l) {
    std::vector<char> seen(l.size(), 0);
    std::vector<std::size_t> sizes;
    const int d[6][3] = {{1, 0, 0}, {-1, 0, 0}, {0, 1, 0}, {0, -1, 0}, {0, 0, 1}, {0, 0, -1}};
    for (int z = 0; z < l.nz(); ++z)
        for (int y = 0; y < l.ny(); ++y)
            for (int x = 0; x < l.nx(); ++x) {
                if (!l.at(x, y, z) || seen[l.index(x, y, z)]) continue;
                std::size_t n = 0;
                std::queue<Index3> q;
                q.push({x, y, z});
                seen[l.index(x, y, z)] = 1;
                while (!q.empty()) {
                    const Index3 p = q.front();
                    q.pop();
                    ++n;
                    for (auto& o : d) {
                        const int a = p.x + o[0], b = p.y + o[1], c = p.z + o[2];
                        if (a < 0 || b < 0 || c < 0 || a >= l.nx() || b >= l.ny() || c >= l.nz()) continue;
                        if (!l.at(a, b, c) || seen[l.index(a, b, c)]) continue;
                        seen[l.index(a, b, c)] = 1;
                        q.push({a, b, c});
                    }
                }
                sizes.push_back(n);
            }
    return sizes;
}

TEST(Phantom, ZeroTumorsGivesEmptyLabel) {
    PhantomSpec s = small_spec(3);
    s.tumors.count_min = s.tumors.count_max = 0;
    const Phantom p = generate_phantom(s);
    for (auto v : p.label.data()) ASSERT_EQ(v, 0);
    EXPECT_TRUE(p.tumors.empty());
}

TEST(Phantom, SameSeedIsBitwiseIdentical) {
    for (std::uint64_t seed : {42u, 43u}) {
        const Phantom a = generate_phantom(small_spec(seed));
        const Phantom b = generate_phantom(small_spec(seed));
        EXPECT_EQ(a.label, b.label);
        ASSERT_EQ(a.image.size(), b.image.size());
        EXPECT_EQ(std::memcmp(a.image.data().data(), b.image.data().data(), a.image.size() * sizeof(float)), 0);
    }
    EXPECT_NE(generate_phantom(small_spec(42)).label, generate_phantom(small_spec(43)).label);
}

TEST(Phantom, EightCubicCentimetreSphereAtOneMillimetre) {
    PhantomSpec s;
    s.shape = {64, 64, 64};
    s.spacing_mm = {1.0, 1.0, 1.0};
    s.liver.semi_axes_mm = {28.0, 28.0, 28.0};
    s.tumors = {};
    s.tumors.count_min = s.tumors.count_max = 1;
    s.tumors.volume_min_cm3 = s.tumors.volume_max_cm3 = 8.0;
    s.tumors.exponent_min = s.tumors.exponent_max = 2.0;
    s.tumors.elongation_max = 1.0;
    s.tumors.boundary_noise = 0.0;
    s.seed = 5;
    const Phantom p = generate_phantom(s);
    ASSERT_EQ(p.tumors.size(), 1u);

    std::size_t labeled = 0;
    for (auto v : p.label.data()) labeled += v;
    EXPECT_GE(labeled, 7200u);
    EXPECT_LE(labeled, 8800u);

    // Analytic oracle: with no elongation or noise the tumor is a ball of
    // radius r = cbrt(3V / 4pi) about the recorded center.
    const double r = std::cbrt(3.0 * 8000.0 / (4.0 * std::numbers::pi));
    const auto& c = p.tumors[0].center_vox;
    std::size_t inner_missing = 0, outer_extra = 0;
    for (int z = 0; z < 64; ++z)
        for (int y = 0; y < 64; ++y)
            for (int x = 0; x < 64; ++x) {
                const double d = std::sqrt((x - c[0]) * (x - c[0]) + (y - c[1]) * (y - c[1]) + (z - c[2]) * (z - c[2]));
                const bool lab = p.label.at(x, y, z) != 0;
                if (d < 0.95 * r && !lab) ++inner_missing;
                if (d > 1.05 * r && lab) ++outer_extra;
            }
    EXPECT_EQ(inner_missing, 0u);
    EXPECT_EQ(outer_extra, 0u);
}

TEST(Phantom, TumorsLieInsideLiverEllipsoid) {
    for (std::uint64_t seed = 0; seed < 4; ++seed) {
        const PhantomSpec s = small_spec(seed);
        const Phantom p = generate_phantom(s);
        const double cx = 0.5 * s.shape.nx * s.spacing_mm.sx, cy = 0.5 * s.shape.ny * s.spacing_mm.sy,
                     cz = 0.5 * s.shape.nz * s.spacing_mm.sz;
        for (int z = 0; z < s.shape.nz; ++z)
            for (int y = 0; y < s.shape.ny; ++y)
                for (int x = 0; x < s.shape.nx; ++x) {
                    if (!p.label.at(x, y, z)) continue;
                    const double dx = ((x + 0.5) * s.spacing_mm.sx - cx) / s.liver.semi_axes_mm[0];
                    const double dy = ((y + 0.5) * s.spacing_mm.sy - cy) / s.liver.semi_axes_mm[1];
                    const double dz = ((z + 0.5) * s.spacing_mm.sz - cz) / s.liver.semi_axes_mm[2];
                    ASSERT_LE(dx * dx + dy * dy + dz * dz, 1.0) << seed;
                }
    }
}

TEST(Phantom, ComponentVolumesMatchTargets) {
    for (std::uint64_t seed = 0; seed < 4; ++seed) {
        const Phantom p = generate_phantom(small_spec(seed));
        const auto comps = component_volumes_cm3(p.label);
        ASSERT_EQ(comps.size(), p.tumors.size()) << seed;
        std::vector<double> targets, labeled;
        for (const auto& t : p.tumors) targets.push_back(t.target_cm3);
        for (const auto& c : comps) labeled.push_back(c.volume_cm3);
        std::sort(targets.begin(), targets.end());
        std::sort(labeled.begin(), labeled.end());
        for (std::size_t i = 0; i < targets.size(); ++i)
            EXPECT_NEAR(labeled[i], targets[i], 0.1 * targets[i]) << seed;
    }
}

TEST(Phantom, TumorsAreDarkerThanLiverOnAverage) {
    PhantomSpec s = small_spec(9);
    const Phantom p = generate_phantom(s);
    double tumor = 0, liver = 0;
    std::size_t nt = 0, nl = 0;
    for (int z = 0; z < s.shape.nz; ++z)
        for (int y = 0; y < s.shape.ny; ++y)
            for (int x = 0; x < s.shape.nx; ++x) {
                if (p.label.at(x, y, z)) {
                    tumor += p.image.at(x, y, z);
                    ++nt;
                } else if (inside_liver(s, x, y, z)) {
                    liver += p.image.at(x, y, z);
                    ++nl;
                }
            }
    ASSERT_GT(nt, 0u);
    EXPECT_NEAR(liver / nl - tumor / nt, -s.tumors.intensity_offset_hu, 3.0);
}

TEST(Phantom, UnplaceableTumorRaises) {
    PhantomSpec s = small_spec(1);
    s.tumors.volume_min_cm3 = s.tumors.volume_max_cm3 = 500.0;
    EXPECT_THROW(generate_phantom(s), PhantomError);
}

TEST(Phantom, InvalidSpecRejected) {
    PhantomSpec s = small_spec(1);
    s.tumors.count_min = 3;
    s.tumors.count_max = 1;
    EXPECT_THROW(generate_phantom(s), ConfigError);
    s = small_spec(1);
    s.tumors.volume_min_cm3 = 0.0;
    EXPECT_THROW(generate_phantom(s), ConfigError);
}

TEST(Components, EmptyLabel) {
    EXPECT_TRUE(component_volumes_cm3(LabelVolume(Extent3{4, 4, 4}, Spacing{})).empty());
}

TEST(Components, TenVoxelLine) {
    LabelVolume l(Extent3{12, 3, 3}, Spacing{});
    for (int x = 1; x <= 10; ++x) l.at(x, 1, 1) = 1;
    const auto c = component_volumes_cm3(l);
    ASSERT_EQ(c.size(), 1u);
    EXPECT_EQ(c[0].voxel_count, 10u);
    EXPECT_DOUBLE_EQ(c[0].volume_cm3, 0.01);
}

TEST(Components, TwoCubesAndDiagonalContact) {
    LabelVolume l(Extent3{10, 10, 10}, Spacing{});
    for (int z = 0; z < 3; ++z)
        for (int y = 0; y < 3; ++y)
            for (int x = 0; x < 3; ++x) {
                l.at(x, y, z) = 1;
                l.at(x + 6, y + 5, z + 4) = 1;
            }
    // A voxel touching the first cube only along an edge is its own component.
    l.at(3, 3, 1) = 1;
    const auto c = component_volumes_cm3(l);
    const auto oracle = flood_fill_sizes(l);
    ASSERT_EQ(c.size(), oracle.size());
    ASSERT_EQ(c.size(), 3u);
    for (std::size_t i = 0; i < c.size(); ++i) {
        EXPECT_EQ(c[i].id, static_cast<int>(i + 1));
        EXPECT_EQ(c[i].voxel_count, oracle[i]);
    }
    EXPECT_NEAR(c[0].volume_cm3, 0.027, 1e-12);
    EXPECT_NEAR(c[2].volume_cm3, 0.027, 1e-12);
}

TEST(Components, SpacingScalesVolume) {
    LabelVolume l(Extent3{4, 4, 4}, Spacing{2.0, 2.0, 2.5});
    l.at(1, 1, 1) = 1;
    const auto c = component_volumes_cm3(l);
    ASSERT_EQ(c.size(), 1u);
    EXPECT_DOUBLE_EQ(c[0].volume_cm3, 0.01);
}

}  // namespace
}  // namespace ynetr

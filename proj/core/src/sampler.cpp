#include "ynetr/sampler.hpp"

#include <algorithm>
#include <string>

namespace ynetr {
namespace {

constexpr int kRejectionAttempts = 64;

std::uint64_t splitmix64(std::uint64_t x) {
    x += 0x9e3779b97f4a7c15ULL;
    x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
    x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
    return x ^ (x >> 31);
}

int axis(const Index3& i, int a) { return a == 0 ? i.x : (a == 1 ? i.y : i.z); }
int axis(const Extent3& e, int a) { return a == 0 ? e.nx : (a == 1 ? e.ny : e.nz); }
void set_axis(Index3& i, int a, int v) { (a == 0 ? i.x : (a == 1 ? i.y : i.z)) = v; }

WindowSample make_crop(const Volume3D& lf, const Volume3D& hf, const LabelVolume& label, Index3 origin, Index3 jitter,
                       bool positive, Extent3 window) {
    return WindowSample{crop(lf, origin, window), crop(hf, origin, window), crop(label, origin, window), origin, jitter,
                        positive};
}

}  // namespace

void SamplerConfig::validate() const {
    if (window.nx < 1 || window.ny < 1 || window.nz < 1) throw ConfigError("sampler window must be >= 1 per axis");
    if (jitter_max < 0) throw ConfigError("jitter_max must be >= 0");
}

std::mt19937_64 draw_rng(std::uint64_t seed, std::uint64_t draw) {
    return std::mt19937_64(splitmix64(splitmix64(seed) ^ draw));
}

LabelIndex::LabelIndex(const LabelVolume& label) : shape_(label.shape()) {
    const std::size_t sx = static_cast<std::size_t>(shape_.nx) + 1, sy = static_cast<std::size_t>(shape_.ny) + 1;
    table_.assign(sx * sy * (static_cast<std::size_t>(shape_.nz) + 1), 0);
    auto at = [&](int x, int y, int z) -> std::uint32_t& {
        return table_[static_cast<std::size_t>(x) + sx * (static_cast<std::size_t>(y) + sy * static_cast<std::size_t>(z))];
    };
    for (int z = 0; z < shape_.nz; ++z)
        for (int y = 0; y < shape_.ny; ++y)
            for (int x = 0; x < shape_.nx; ++x) {
                const std::uint32_t v = label.at(x, y, z) ? 1u : 0u;
                if (v) fg_.push_back({x, y, z});
                at(x + 1, y + 1, z + 1) = v + at(x, y + 1, z + 1) + at(x + 1, y, z + 1) + at(x + 1, y + 1, z) -
                                          at(x, y, z + 1) - at(x, y + 1, z) - at(x + 1, y, z) + at(x, y, z);
            }
}

std::uint64_t LabelIndex::count_in(Index3 o, Extent3 s) const {
    const std::size_t sx = static_cast<std::size_t>(shape_.nx) + 1, sy = static_cast<std::size_t>(shape_.ny) + 1;
    auto at = [&](int x, int y, int z) -> std::int64_t {
        return table_[static_cast<std::size_t>(x) + sx * (static_cast<std::size_t>(y) + sy * static_cast<std::size_t>(z))];
    };
    const int x0 = o.x, y0 = o.y, z0 = o.z, x1 = o.x + s.nx, y1 = o.y + s.ny, z1 = o.z + s.nz;
    const std::int64_t v = at(x1, y1, z1) - at(x0, y1, z1) - at(x1, y0, z1) - at(x1, y1, z0) + at(x0, y0, z1) +
                           at(x0, y1, z0) + at(x1, y0, z0) - at(x0, y0, z0);
    return static_cast<std::uint64_t>(v);
}

WindowSample sample_window(const Volume3D& lf, const Volume3D& hf, const LabelVolume& label, const LabelIndex& index,
                           bool want_positive, std::mt19937_64& rng, const SamplerConfig& cfg) {
    cfg.validate();
    const Extent3 dims = label.shape();
    if (lf.shape() != dims || hf.shape() != dims) throw ShapeError("lf, hf and label must share a shape");
    if (index.shape() != dims) throw ShapeError("label index does not match label volume");
    const Extent3 w = cfg.window;
    if (w.nx > dims.nx || w.ny > dims.ny || w.nz > dims.nz)
        throw ShapeError("volume smaller than sampling window; pad it first");

    std::uniform_int_distribution<int> jitter_dist(-cfg.jitter_max, cfg.jitter_max);
    auto draw_jitter = [&] {
        Index3 j;
        j.x = jitter_dist(rng);
        j.y = jitter_dist(rng);
        j.z = jitter_dist(rng);
        return j;
    };

    if (want_positive) {
        const auto& fg = index.foreground();
        if (fg.empty()) throw NoForeground("positive window requested but the label has no tumor voxels");
        const Index3 v = fg[std::uniform_int_distribution<std::size_t>(0, fg.size() - 1)(rng)];
        const Index3 j = draw_jitter();
        Index3 o;
        for (int a = 0; a < 3; ++a) {
            const int n = axis(dims, a), ww = axis(w, a), c = axis(v, a);
            int start = c - ww / 2 + axis(j, a);
            start = std::clamp(start, 0, n - ww);
            // Keep the chosen tumor voxel inside the window.
            start = std::clamp(start, std::max(0, c - ww + 1), std::min(c, n - ww));
            set_axis(o, a, start);
        }
        return make_crop(lf, hf, label, o, j, true, w);
    }

    const std::uint64_t total = index.count_in({0, 0, 0}, dims);
    if (total == dims.count()) throw NoBackground("negative window requested but the volume is entirely tumor");

    for (int attempt = 0; attempt < kRejectionAttempts; ++attempt) {
        Index3 o;
        for (int a = 0; a < 3; ++a)
            set_axis(o, a, std::uniform_int_distribution<int>(0, axis(dims, a) - axis(w, a))(rng));
        const Index3 j = draw_jitter();
        for (int a = 0; a < 3; ++a)
            set_axis(o, a, std::clamp(axis(o, a) + axis(j, a), 0, axis(dims, a) - axis(w, a)));
        if (index.count_in(o, w) == 0) return make_crop(lf, hf, label, o, j, false, w);
    }

    // Rejection failed: enumerate all tumor-free origins.
    std::vector<Index3> free;
    for (int z = 0; z <= dims.nz - w.nz; ++z)
        for (int y = 0; y <= dims.ny - w.ny; ++y)
            for (int x = 0; x <= dims.nx - w.nx; ++x)
                if (index.count_in({x, y, z}, w) == 0) free.push_back({x, y, z});
    if (free.empty()) throw NoBackground("no tumor-free window of the requested size exists");
    const Index3 o = free[std::uniform_int_distribution<std::size_t>(0, free.size() - 1)(rng)];
    return make_crop(lf, hf, label, o, Index3{}, false, w);
}

WindowSample sample_window(const Volume3D& lf, const Volume3D& hf, const LabelVolume& label, bool want_positive,
                           std::mt19937_64& rng, const SamplerConfig& cfg) {
    return sample_window(lf, hf, label, LabelIndex(label), want_positive, rng, cfg);
}

}  // namespace ynetr

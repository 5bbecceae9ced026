#pragma once

#include <cstdint>
#include <random>
#include <vector>

#include "ynetr/volume.hpp"

namespace ynetr {

struct SamplerConfig {
    Extent3 window{128, 128, 128};
    int jitter_max = 48;  // per-axis origin translation bound, voxels
    std::uint64_t seed = 0;

    void validate() const;
    bool operator==(const SamplerConfig&) const = default;
};

// Tumor voxel list plus a summed-volume table for O(1) window counts.
class LabelIndex {
public:
    explicit LabelIndex(const LabelVolume& label);

    std::uint64_t count_in(Index3 origin, Extent3 size) const;
    const std::vector<Index3>& foreground() const { return fg_; }
    const Extent3& shape() const { return shape_; }

private:
    Extent3 shape_;
    std::vector<std::uint32_t> table_;  // (nx+1)(ny+1)(nz+1) prefix sums
    std::vector<Index3> fg_;
};

struct WindowSample {
    Volume3D lf;
    Volume3D hf;
    LabelVolume label;
    Index3 origin;
    Index3 jitter;  // offset drawn before clamping, within +-jitter_max
    bool positive = false;
};

// Positive windows are centered on a random tumor voxel, jittered, clamped to
// the volume and then clamped again so that voxel stays inside. Negative
// windows are rejection-sampled (then enumerated) among tumor-free origins.
// Volumes must already be at least window-sized (see pad_reflect).
// Throws NoForeground / NoBackground when the request is impossible.
WindowSample sample_window(const Volume3D& lf, const Volume3D& hf, const LabelVolume& label, const LabelIndex& index,
                           bool want_positive, std::mt19937_64& rng, const SamplerConfig& cfg);
WindowSample sample_window(const Volume3D& lf, const Volume3D& hf, const LabelVolume& label, bool want_positive,
                           std::mt19937_64& rng, const SamplerConfig& cfg);

// Independent, reproducible stream for draw number `draw` of a run.
std::mt19937_64 draw_rng(std::uint64_t seed, std::uint64_t draw);

}  // namespace ynetr

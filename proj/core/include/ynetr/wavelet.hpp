#pragma once

#include <vector>

#include "ynetr/volume.hpp"

namespace ynetr {

// 2-D scalar plane, x fastest.
struct Plane {
    int nx = 0;
    int ny = 0;
    std::vector<float> values;

    Plane() = default;
    Plane(int nx_, int ny_, float fill = 0.0f) : nx(nx_), ny(ny_), values(static_cast<std::size_t>(nx_) * ny_, fill) {}

    float& at(int x, int y) { return values[static_cast<std::size_t>(x) + static_cast<std::size_t>(nx) * y]; }
    float at(int x, int y) const { return values[static_cast<std::size_t>(x) + static_cast<std::size_t>(nx) * y]; }
};

// Single-level orthonormal Haar subbands of one plane. Each band is
// ceil(nx/2) x ceil(ny/2). Odd source dims were reflect-padded by one sample
// before analysis; source_nx/source_ny record the original size.
//   ll: low-pass in x and y (approximation)
//   lh: low-pass in x, high-pass in y
//   hl: high-pass in x, low-pass in y
//   hh: high-pass in both
struct SubbandSet2D {
    Plane ll, lh, hl, hh;
    int source_nx = 0;
    int source_ny = 0;
};

SubbandSet2D dwt2_haar(const Plane& plane);
Plane idwt2_haar(const SubbandSet2D& bands);

// Band-limited reconstructions at source resolution: lf from the
// approximation band alone, hf from the three detail bands. lf + hf == v.
struct FrequencyPair {
    Volume3D lf;
    Volume3D hf;
};

// Per axial slice (z fixed) transform of the whole volume.
FrequencyPair split_frequency(const Volume3D& v);

}  // namespace ynetr

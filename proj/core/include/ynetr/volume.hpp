#pragma once

#include <algorithm>
#include <cstddef>
#include <cstdint>
#include <span>
#include <vector>

#include "ynetr/errors.hpp"

namespace ynetr {

struct Extent3 {
    int nx = 1;
    int ny = 1;
    int nz = 1;

    std::size_t count() const {
        return static_cast<std::size_t>(nx) * static_cast<std::size_t>(ny) * static_cast<std::size_t>(nz);
    }
    bool operator==(const Extent3&) const = default;
};

struct Index3 {
    int x = 0;
    int y = 0;
    int z = 0;

    bool operator==(const Index3&) const = default;
};

struct Spacing {
    double sx = 1.0;
    double sy = 1.0;
    double sz = 1.0;

    double voxel_mm3() const { return sx * sy * sz; }
    bool operator==(const Spacing&) const = default;
};

// Dense voxel grid, x-fastest storage: index = x + nx * (y + ny * z).
template <typename T>
class VoxelGrid {
public:
    using value_type = T;

    VoxelGrid() = default;
    VoxelGrid(Extent3 shape, Spacing spacing, T fill = T{})
        : shape_(shape), spacing_(spacing) {
        check_geometry(shape, spacing);
        data_.assign(shape.count(), fill);
    }
    VoxelGrid(Extent3 shape, Spacing spacing, std::vector<T> data)
        : shape_(shape), spacing_(spacing), data_(std::move(data)) {
        check_geometry(shape, spacing);
        if (data_.size() != shape.count())
            throw ShapeError("voxel buffer length does not match shape");
    }

    const Extent3& shape() const { return shape_; }
    const Spacing& spacing() const { return spacing_; }
    int nx() const { return shape_.nx; }
    int ny() const { return shape_.ny; }
    int nz() const { return shape_.nz; }
    std::size_t size() const { return data_.size(); }

    std::size_t index(int x, int y, int z) const {
        return static_cast<std::size_t>(x) +
               static_cast<std::size_t>(shape_.nx) *
                   (static_cast<std::size_t>(y) + static_cast<std::size_t>(shape_.ny) * static_cast<std::size_t>(z));
    }
    T& at(int x, int y, int z) { return data_[index(x, y, z)]; }
    const T& at(int x, int y, int z) const { return data_[index(x, y, z)]; }

    std::span<T> data() { return data_; }
    std::span<const T> data() const { return data_; }
    std::vector<T>& buffer() { return data_; }
    const std::vector<T>& buffer() const { return data_; }

    bool operator==(const VoxelGrid&) const = default;

private:
    static void check_geometry(const Extent3& s, const Spacing& sp) {
        if (s.nx < 1 || s.ny < 1 || s.nz < 1)
            throw ShapeError("volume dimensions must be >= 1");
        if (!(sp.sx > 0.0) || !(sp.sy > 0.0) || !(sp.sz > 0.0))
            throw ShapeError("voxel spacing must be positive");
    }

    Extent3 shape_{};
    Spacing spacing_{};
    std::vector<T> data_;
};

using Volume3D = VoxelGrid<float>;
// Binary segmentation labels: 0 background, 1 tumor.
using LabelVolume = VoxelGrid<std::uint8_t>;

// Throws ShapeError if any label is outside {0, 1}.
void validate_labels(const LabelVolume& labels);

// Intensity window [lo, hi] clipped and mapped affinely onto [0, 1].
Volume3D normalize_intensity(const Volume3D& v, float lo = -175.0f, float hi = 250.0f);

// Mirror index into [0, n) without repeating the edge sample (numpy "reflect").
int reflect_index(int i, int n);

// Grow a grid to at least `target` per axis by reflecting at the high end.
// Axes already large enough are left untouched.
template <typename T>
VoxelGrid<T> pad_reflect(const VoxelGrid<T>& g, Extent3 target) {
    Extent3 out{std::max(g.nx(), target.nx), std::max(g.ny(), target.ny), std::max(g.nz(), target.nz)};
    if (out == g.shape()) return g;
    VoxelGrid<T> r(out, g.spacing());
    for (int z = 0; z < out.nz; ++z)
        for (int y = 0; y < out.ny; ++y)
            for (int x = 0; x < out.nx; ++x)
                r.at(x, y, z) = g.at(reflect_index(x, g.nx()), reflect_index(y, g.ny()), reflect_index(z, g.nz()));
    return r;
}

template <typename T>
VoxelGrid<T> crop(const VoxelGrid<T>& g, Index3 origin, Extent3 size) {
    if (origin.x < 0 || origin.y < 0 || origin.z < 0 || origin.x + size.nx > g.nx() ||
        origin.y + size.ny > g.ny() || origin.z + size.nz > g.nz())
        throw ShapeError("crop region exceeds volume bounds");
    VoxelGrid<T> r(size, g.spacing());
    for (int z = 0; z < size.nz; ++z)
        for (int y = 0; y < size.ny; ++y)
            for (int x = 0; x < size.nx; ++x)
                r.at(x, y, z) = g.at(origin.x + x, origin.y + y, origin.z + z);
    return r;
}

}  // namespace ynetr

#pragma once

#include <array>
#include <cstdint>
#include <vector>

#include "ynetr/volume.hpp"

namespace ynetr {

struct LiverRegion {
    // Ellipsoid center as a fraction of the physical extent along each axis.
    std::array<double, 3> center_frac{0.5, 0.5, 0.5};
    std::array<double, 3> semi_axes_mm{110.0, 85.0, 75.0};
    double mean_hu = 58.0;
    double noise_sigma_hu = 10.0;
};

struct TumorSpec {
    int count_min = 1;
    int count_max = 3;
    // Targets are drawn log-uniformly, so small lesions are the common case.
    double volume_min_cm3 = 3.0;
    double volume_max_cm3 = 25.0;
    double intensity_offset_hu = -25.0;
    double exponent_min = 2.0;   // superellipsoid exponent range
    double exponent_max = 3.0;
    double elongation_max = 1.4;  // largest semi-axis ratio
    double boundary_noise = 0.08; // relative radial perturbation amplitude
};

struct PhantomSpec {
    Extent3 shape{128, 128, 96};
    Spacing spacing_mm{2.0, 2.0, 2.5};
    double background_hu = -80.0;
    double background_noise_hu = 15.0;
    LiverRegion liver;
    TumorSpec tumors;
    std::uint64_t seed = 0;

    void validate() const;
};

struct TumorRecord {
    std::array<double, 3> center_vox{};
    double target_cm3 = 0.0;
    double labeled_cm3 = 0.0;
    std::size_t voxel_count = 0;
};

struct Phantom {
    Volume3D image;   // HU
    LabelVolume label;
    std::vector<TumorRecord> tumors;
};

Phantom generate_phantom(const PhantomSpec& spec);

// True if the voxel center lies inside the liver ellipsoid of `spec`.
bool inside_liver(const PhantomSpec& spec, int x, int y, int z);

struct ComponentVolume {
    int id = 0;                // 1-based, in order of first voxel (x-fastest scan)
    std::size_t voxel_count = 0;
    double volume_cm3 = 0.0;
};

// Connected components of label==1 under 6-connectivity.
std::vector<ComponentVolume> component_volumes_cm3(const LabelVolume& label);

}  // namespace ynetr

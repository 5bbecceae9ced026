#include "ynetr/phantom.hpp"

#include <cmath>
#include <numbers>
#include <random>
#include <string>

namespace ynetr {
namespace {

constexpr int kPlacementAttempts = 200;
constexpr int kScaleIterations = 12;
constexpr double kScaleTolerance = 0.02;
constexpr double kAcceptTolerance = 0.10;

struct Vec3 {
    double x = 0, y = 0, z = 0;
};

// Star-shaped superellipsoid with a smooth angular perturbation of its radius.
struct TumorShape {
    Vec3 center_mm;
    Vec3 axes;  // unit-product axis ratios
    double scale = 1.0;
    double exponent = 2.0;
    double noise_amp = 0.0;
    std::array<Vec3, 3> freq{};
    std::array<double, 3> phase{};
    std::array<double, 3> weight{};

    double radial_bound() const {
        // Circumradius of the unit superellipsoid: 1 for exponents up to 2, 3^(1/2 - 1/p) above.
        const double unit = exponent <= 2.0 ? 1.0 : std::pow(3.0, 0.5 - 1.0 / exponent);
        return scale * std::max({axes.x, axes.y, axes.z}) * (1.0 + noise_amp) * unit;
    }

    bool contains(double px, double py, double pz) const {
        const double qx = (px - center_mm.x) / (scale * axes.x);
        const double qy = (py - center_mm.y) / (scale * axes.y);
        const double qz = (pz - center_mm.z) / (scale * axes.z);
        const double r = std::sqrt(qx * qx + qy * qy + qz * qz);
        if (r == 0.0) return true;
        const double f = std::pow(std::pow(std::abs(qx), exponent) + std::pow(std::abs(qy), exponent) +
                                      std::pow(std::abs(qz), exponent),
                                  1.0 / exponent);
        double delta = 0.0;
        if (noise_amp > 0.0) {
            const double ux = qx / r, uy = qy / r, uz = qz / r;
            for (int k = 0; k < 3; ++k)
                delta += weight[k] * std::sin(freq[k].x * ux + freq[k].y * uy + freq[k].z * uz + phase[k]);
            delta *= noise_amp;
        }
        return f <= 1.0 + delta;
    }
};

double superellipsoid_unit_volume(double e) {
    const double g = std::tgamma(1.0 + 1.0 / e);
    return 8.0 * g * g * g / std::tgamma(1.0 + 3.0 / e);
}

Vec3 voxel_center_mm(const Spacing& sp, int x, int y, int z) {
    return {(x + 0.5) * sp.sx, (y + 0.5) * sp.sy, (z + 0.5) * sp.sz};
}

struct Box {
    int x0, x1, y0, y1, z0, z1;  // inclusive-exclusive
};

Box bounding_box(const TumorShape& t, const PhantomSpec& spec) {
    const double r = t.radial_bound();
    const auto& sp = spec.spacing_mm;
    auto lo = [](double c, double s) { return static_cast<int>(std::floor(c / s - 0.5)); };
    auto hi = [](double c, double s) { return static_cast<int>(std::ceil(c / s - 0.5)) + 1; };
    Box b{lo(t.center_mm.x - r, sp.sx), hi(t.center_mm.x + r, sp.sx), lo(t.center_mm.y - r, sp.sy),
          hi(t.center_mm.y + r, sp.sy),  lo(t.center_mm.z - r, sp.sz), hi(t.center_mm.z + r, sp.sz)};
    b.x0 = std::max(b.x0, 0);
    b.y0 = std::max(b.y0, 0);
    b.z0 = std::max(b.z0, 0);
    b.x1 = std::min(b.x1, spec.shape.nx);
    b.y1 = std::min(b.y1, spec.shape.ny);
    b.z1 = std::min(b.z1, spec.shape.nz);
    return b;
}

bool box_touches_border(const TumorShape& t, const PhantomSpec& spec) {
    const double r = t.radial_bound();
    const auto& sp = spec.spacing_mm;
    return t.center_mm.x - r < 0.0 || t.center_mm.y - r < 0.0 || t.center_mm.z - r < 0.0 ||
           t.center_mm.x + r > spec.shape.nx * sp.sx || t.center_mm.y + r > spec.shape.ny * sp.sy ||
           t.center_mm.z + r > spec.shape.nz * sp.sz;
}

std::size_t count_voxels(const TumorShape& t, const PhantomSpec& spec) {
    const Box b = bounding_box(t, spec);
    std::size_t n = 0;
    for (int z = b.z0; z < b.z1; ++z)
        for (int y = b.y0; y < b.y1; ++y)
            for (int x = b.x0; x < b.x1; ++x) {
                auto p = voxel_center_mm(spec.spacing_mm, x, y, z);
                if (t.contains(p.x, p.y, p.z)) ++n;
            }
    return n;
}

Vec3 liver_center_mm(const PhantomSpec& spec) {
    const auto& sp = spec.spacing_mm;
    const auto& c = spec.liver.center_frac;
    return {c[0] * spec.shape.nx * sp.sx, c[1] * spec.shape.ny * sp.sy, c[2] * spec.shape.nz * sp.sz};
}

}  // namespace

void PhantomSpec::validate() const {
    if (shape.nx < 1 || shape.ny < 1 || shape.nz < 1) throw ConfigError("phantom shape must be >= 1 per axis");
    if (!(spacing_mm.sx > 0) || !(spacing_mm.sy > 0) || !(spacing_mm.sz > 0))
        throw ConfigError("phantom spacing must be positive");
    for (double a : liver.semi_axes_mm)
        if (!(a > 0)) throw ConfigError("liver semi-axes must be positive");
    if (liver.noise_sigma_hu < 0 || background_noise_hu < 0) throw ConfigError("noise sigma must be >= 0");
    if (tumors.count_min < 0 || tumors.count_max < tumors.count_min)
        throw ConfigError("tumor count range must satisfy 0 <= min <= max");
    if (!(tumors.volume_min_cm3 > 0) || tumors.volume_max_cm3 < tumors.volume_min_cm3)
        throw ConfigError("tumor volume range must satisfy 0 < min <= max");
    if (!(tumors.exponent_min >= 1.0) || tumors.exponent_max < tumors.exponent_min)
        throw ConfigError("superellipsoid exponent range must satisfy 1 <= min <= max");
    if (!(tumors.elongation_max >= 1.0)) throw ConfigError("elongation_max must be >= 1");
    if (tumors.boundary_noise < 0.0 || tumors.boundary_noise >= 0.5)
        throw ConfigError("boundary_noise must lie in [0, 0.5)");
}

bool inside_liver(const PhantomSpec& spec, int x, int y, int z) {
    const Vec3 c = liver_center_mm(spec);
    const Vec3 p = voxel_center_mm(spec.spacing_mm, x, y, z);
    const auto& a = spec.liver.semi_axes_mm;
    const double dx = (p.x - c.x) / a[0], dy = (p.y - c.y) / a[1], dz = (p.z - c.z) / a[2];
    return dx * dx + dy * dy + dz * dz <= 1.0;
}

Phantom generate_phantom(const PhantomSpec& spec) {
    spec.validate();
    std::mt19937_64 rng(spec.seed);
    std::uniform_real_distribution<double> unit(0.0, 1.0);

    Phantom ph{Volume3D(spec.shape, spec.spacing_mm), LabelVolume(spec.shape, spec.spacing_mm), {}};
    // Tumor index per voxel (0 = none) while placing, to keep lesions apart.
    std::vector<int> owner(spec.shape.count(), 0);

    const int count = std::uniform_int_distribution<int>(spec.tumors.count_min, spec.tumors.count_max)(rng);
    const double voxel_mm3 = spec.spacing_mm.voxel_mm3();
    const Vec3 lc = liver_center_mm(spec);
    const auto& la = spec.liver.semi_axes_mm;

    for (int t = 0; t < count; ++t) {
        const double target_cm3 = std::exp(std::log(spec.tumors.volume_min_cm3) +
                                           unit(rng) * std::log(spec.tumors.volume_max_cm3 / spec.tumors.volume_min_cm3));
        const double target_mm3 = target_cm3 * 1000.0;

        TumorShape shape;
        shape.exponent = spec.tumors.exponent_min + unit(rng) * (spec.tumors.exponent_max - spec.tumors.exponent_min);
        Vec3 r{1.0 + unit(rng) * (spec.tumors.elongation_max - 1.0), 1.0 + unit(rng) * (spec.tumors.elongation_max - 1.0),
               1.0 + unit(rng) * (spec.tumors.elongation_max - 1.0)};
        const double norm = std::cbrt(r.x * r.y * r.z);
        shape.axes = {r.x / norm, r.y / norm, r.z / norm};
        shape.noise_amp = spec.tumors.boundary_noise;
        double wsum = 0.0;
        for (int k = 0; k < 3; ++k) {
            shape.freq[k] = {(unit(rng) * 2 - 1) * 4.0, (unit(rng) * 2 - 1) * 4.0, (unit(rng) * 2 - 1) * 4.0};
            shape.phase[k] = unit(rng) * 2.0 * std::numbers::pi;
            shape.weight[k] = 0.5 + unit(rng);
            wsum += shape.weight[k];
        }
        for (auto& w : shape.weight) w /= wsum;
        const double initial_scale = std::cbrt(target_mm3 / superellipsoid_unit_volume(shape.exponent));

        bool placed = false;
        for (int attempt = 0; attempt < kPlacementAttempts && !placed; ++attempt) {
            // Candidate center uniformly inside the liver ellipsoid.
            Vec3 c;
            do {
                c = {(unit(rng) * 2 - 1), (unit(rng) * 2 - 1), (unit(rng) * 2 - 1)};
            } while (c.x * c.x + c.y * c.y + c.z * c.z > 1.0);
            shape.center_mm = {lc.x + c.x * la[0], lc.y + c.y * la[1], lc.z + c.z * la[2]};
            shape.scale = initial_scale;
            if (box_touches_border(shape, spec)) continue;

            std::size_t n = count_voxels(shape, spec);
            for (int it = 0; it < kScaleIterations; ++it) {
                const double rel = n * voxel_mm3 / target_mm3 - 1.0;
                if (std::abs(rel) <= kScaleTolerance) break;
                const double ratio = n == 0 ? 2.0 : std::cbrt(target_mm3 / (n * voxel_mm3));
                shape.scale *= std::clamp(ratio, 0.5, 2.0);
                n = count_voxels(shape, spec);
            }
            if (std::abs(n * voxel_mm3 / target_mm3 - 1.0) > kAcceptTolerance) continue;
            if (box_touches_border(shape, spec)) continue;

            const Box b = bounding_box(shape, spec);
            bool ok = true;
            std::vector<std::size_t> voxels;
            for (int z = b.z0; z < b.z1 && ok; ++z)
                for (int y = b.y0; y < b.y1 && ok; ++y)
                    for (int x = b.x0; x < b.x1 && ok; ++x) {
                        auto p = voxel_center_mm(spec.spacing_mm, x, y, z);
                        if (!shape.contains(p.x, p.y, p.z)) continue;
                        if (!inside_liver(spec, x, y, z)) {
                            ok = false;
                            break;
                        }
                        // Reject overlap or face contact with an earlier tumor.
                        const int nb[7][3] = {{0, 0, 0}, {1, 0, 0}, {-1, 0, 0}, {0, 1, 0}, {0, -1, 0}, {0, 0, 1}, {0, 0, -1}};
                        for (auto& d : nb) {
                            const int xx = x + d[0], yy = y + d[1], zz = z + d[2];
                            if (xx < 0 || yy < 0 || zz < 0 || xx >= spec.shape.nx || yy >= spec.shape.ny ||
                                zz >= spec.shape.nz)
                                continue;
                            if (owner[ph.label.index(xx, yy, zz)] != 0) {
                                ok = false;
                                break;
                            }
                        }
                        voxels.push_back(ph.label.index(x, y, z));
                    }
            if (!ok || voxels.empty()) continue;

            for (auto i : voxels) {
                owner[i] = t + 1;
                ph.label.buffer()[i] = 1;
            }
            TumorRecord rec;
            rec.center_vox = {shape.center_mm.x / spec.spacing_mm.sx - 0.5, shape.center_mm.y / spec.spacing_mm.sy - 0.5,
                              shape.center_mm.z / spec.spacing_mm.sz - 0.5};
            rec.target_cm3 = target_cm3;
            rec.voxel_count = voxels.size();
            rec.labeled_cm3 = voxels.size() * voxel_mm3 / 1000.0;
            ph.tumors.push_back(rec);
            placed = true;
        }
        if (!placed)
            throw PhantomError("tumor " + std::to_string(t) + " with target " + std::to_string(target_cm3) +
                               " cm3 cannot be placed inside the liver region");
    }

    // Intensities: one Gaussian draw per voxel in storage order.
    std::normal_distribution<double> gauss(0.0, 1.0);
    auto img = ph.image.buffer().data();
    for (int z = 0; z < spec.shape.nz; ++z)
        for (int y = 0; y < spec.shape.ny; ++y)
            for (int x = 0; x < spec.shape.nx; ++x) {
                const std::size_t i = ph.image.index(x, y, z);
                const double g = gauss(rng);
                double v;
                if (ph.label.buffer()[i]) {
                    v = spec.liver.mean_hu + spec.tumors.intensity_offset_hu + g * spec.liver.noise_sigma_hu;
                } else if (inside_liver(spec, x, y, z)) {
                    v = spec.liver.mean_hu + g * spec.liver.noise_sigma_hu;
                } else {
                    v = spec.background_hu + g * spec.background_noise_hu;
                }
                img[i] = static_cast<float>(v);
            }
    return ph;
}

}  // namespace ynetr

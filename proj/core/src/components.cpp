#include <vector>

#include "ynetr/phantom.hpp"

namespace ynetr {

std::vector<ComponentVolume> component_volumes_cm3(const LabelVolume& label) {
    validate_labels(label);
    const auto& s = label.shape();
    std::vector<int> comp(label.size(), 0);
    std::vector<ComponentVolume> out;
    std::vector<std::size_t> stack;
    const double cm3_per_voxel = label.spacing().voxel_mm3() / 1000.0;

    for (int z = 0; z < s.nz; ++z)
        for (int y = 0; y < s.ny; ++y)
            for (int x = 0; x < s.nx; ++x) {
                const std::size_t seed = label.index(x, y, z);
                if (!label.buffer()[seed] || comp[seed]) continue;
                const int id = static_cast<int>(out.size()) + 1;
                std::size_t n = 0;
                comp[seed] = id;
                stack.push_back(seed);
                while (!stack.empty()) {
                    const std::size_t i = stack.back();
                    stack.pop_back();
                    ++n;
                    const int cx = static_cast<int>(i % s.nx);
                    const int cy = static_cast<int>((i / s.nx) % s.ny);
                    const int cz = static_cast<int>(i / (static_cast<std::size_t>(s.nx) * s.ny));
                    auto visit = [&](int xx, int yy, int zz) {
                        if (xx < 0 || yy < 0 || zz < 0 || xx >= s.nx || yy >= s.ny || zz >= s.nz) return;
                        const std::size_t j = label.index(xx, yy, zz);
                        if (label.buffer()[j] && !comp[j]) {
                            comp[j] = id;
                            stack.push_back(j);
                        }
                    };
                    visit(cx - 1, cy, cz);
                    visit(cx + 1, cy, cz);
                    visit(cx, cy - 1, cz);
                    visit(cx, cy + 1, cz);
                    visit(cx, cy, cz - 1);
                    visit(cx, cy, cz + 1);
                }
                out.push_back({id, n, n * cm3_per_voxel});
            }
    return out;
}

}  // namespace ynetr

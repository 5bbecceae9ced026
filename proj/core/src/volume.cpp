#include "ynetr/volume.hpp"

#include <string>

namespace ynetr {

void validate_labels(const LabelVolume& labels) {
    for (auto v : labels.data())
        if (v > 1) throw ShapeError("label value " + std::to_string(v) + " outside {0, 1}");
}

Volume3D normalize_intensity(const Volume3D& v, float lo, float hi) {
    if (!(lo < hi)) throw ConfigError("intensity window requires lo < hi");
    Volume3D out(v.shape(), v.spacing());
    const float range = hi - lo;
    auto src = v.data();
    auto dst = out.data();
    for (std::size_t i = 0; i < src.size(); ++i) {
        const float c = std::clamp(src[i], lo, hi);
        dst[i] = std::clamp((c - lo) / range, 0.0f, 1.0f);
    }
    return out;
}

int reflect_index(int i, int n) {
    if (n == 1) return 0;
    const int period = 2 * (n - 1);
    i %= period;
    if (i < 0) i += period;
    return i < n ? i : period - i;
}

}  // namespace ynetr

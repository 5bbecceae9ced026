#include "ynetr/wavelet.hpp"

#include <algorithm>

namespace ynetr {

SubbandSet2D dwt2_haar(const Plane& plane) {
    if (plane.nx < 2 || plane.ny < 2) throw ShapeError("Haar analysis needs plane dims >= 2");
    if (plane.values.size() != static_cast<std::size_t>(plane.nx) * plane.ny)
        throw ShapeError("plane buffer length does not match its dims");
    const int hx = (plane.nx + 1) / 2;
    const int hy = (plane.ny + 1) / 2;
    SubbandSet2D s{Plane(hx, hy), Plane(hx, hy), Plane(hx, hy), Plane(hx, hy), plane.nx, plane.ny};
    auto sample = [&](int x, int y) {
        return plane.at(reflect_index(x, plane.nx), reflect_index(y, plane.ny));
    };
    for (int j = 0; j < hy; ++j)
        for (int i = 0; i < hx; ++i) {
            const float a = sample(2 * i, 2 * j);
            const float b = sample(2 * i + 1, 2 * j);
            const float c = sample(2 * i, 2 * j + 1);
            const float d = sample(2 * i + 1, 2 * j + 1);
            s.ll.at(i, j) = 0.5f * (a + b + c + d);
            s.hl.at(i, j) = 0.5f * (a - b + c - d);
            s.lh.at(i, j) = 0.5f * (a + b - c - d);
            s.hh.at(i, j) = 0.5f * (a - b - c + d);
        }
    return s;
}

Plane idwt2_haar(const SubbandSet2D& s) {
    const int hx = s.ll.nx, hy = s.ll.ny;
    for (const Plane* p : {&s.lh, &s.hl, &s.hh})
        if (p->nx != hx || p->ny != hy) throw ShapeError("inconsistent subband shapes");
    if (s.ll.values.size() != static_cast<std::size_t>(hx) * hy) throw ShapeError("inconsistent subband shapes");
    if (s.source_nx < 2 || s.source_ny < 2 || (s.source_nx + 1) / 2 != hx || (s.source_ny + 1) / 2 != hy)
        throw ShapeError("subband shape does not match recorded source dims");
    Plane out(s.source_nx, s.source_ny);
    for (int j = 0; j < hy; ++j)
        for (int i = 0; i < hx; ++i) {
            const float ll = s.ll.at(i, j), lh = s.lh.at(i, j), hl = s.hl.at(i, j), hh = s.hh.at(i, j);
            const float a = 0.5f * (ll + hl + lh + hh);
            const float b = 0.5f * (ll - hl + lh - hh);
            const float c = 0.5f * (ll + hl - lh - hh);
            const float d = 0.5f * (ll - hl - lh + hh);
            const int x0 = 2 * i, y0 = 2 * j;
            const bool has_x1 = x0 + 1 < s.source_nx, has_y1 = y0 + 1 < s.source_ny;
            out.at(x0, y0) = a;
            if (has_x1) out.at(x0 + 1, y0) = b;
            if (has_y1) out.at(x0, y0 + 1) = c;
            if (has_x1 && has_y1) out.at(x0 + 1, y0 + 1) = d;
        }
    return out;
}

FrequencyPair split_frequency(const Volume3D& v) {
    if (v.nx() < 2 || v.ny() < 2) throw ShapeError("frequency split needs in-plane dims >= 2");
    FrequencyPair fp{Volume3D(v.shape(), v.spacing()), Volume3D(v.shape(), v.spacing())};
    const std::size_t plane_size = static_cast<std::size_t>(v.nx()) * v.ny();
    Plane slice(v.nx(), v.ny());
    for (int z = 0; z < v.nz(); ++z) {
        const std::size_t off = plane_size * z;
        std::copy_n(v.buffer().begin() + off, plane_size, slice.values.begin());
        SubbandSet2D bands = dwt2_haar(slice);

        SubbandSet2D low = bands;
        std::fill(low.lh.values.begin(), low.lh.values.end(), 0.0f);
        std::fill(low.hl.values.begin(), low.hl.values.end(), 0.0f);
        std::fill(low.hh.values.begin(), low.hh.values.end(), 0.0f);
        SubbandSet2D high = std::move(bands);
        std::fill(high.ll.values.begin(), high.ll.values.end(), 0.0f);

        const Plane lf = idwt2_haar(low);
        const Plane hf = idwt2_haar(high);
        std::copy(lf.values.begin(), lf.values.end(), fp.lf.buffer().begin() + off);
        std::copy(hf.values.begin(), hf.values.end(), fp.hf.buffer().begin() + off);
    }
    return fp;
}

}  // namespace ynetr

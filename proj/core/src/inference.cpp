#include "ynetr/inference.hpp"

#include <cmath>

#include "ynetr/errors.hpp"
#include "ynetr/ops.hpp"

namespace ynetr {

const char* to_string(BlendMode m) { return m == BlendMode::uniform ? "uniform" : "gaussian"; }

BlendMode blend_mode_from_string(const std::string& s) {
    if (s == "uniform") return BlendMode::uniform;
    if (s == "gaussian") return BlendMode::gaussian;
    throw ConfigError("unknown blend mode '" + s + "'");
}

std::vector<int> tile_positions(int dim, int window, double overlap) {
    if (window < 1) throw ConfigError("window must be >= 1");
    if (!(overlap >= 0.0 && overlap < 1.0)) throw ConfigError("overlap must be in [0, 1)");
    if (window > dim) throw ShapeError("window larger than volume; pad it first");
    const int stride = std::max(1, static_cast<int>(std::lround(window * (1.0 - overlap))));
    const int last = dim - window;
    std::vector<int> starts;
    for (int s = 0;; s += stride) {
        if (s >= last) {
            if (starts.empty() || starts.back() != last) starts.push_back(last);
            break;
        }
        starts.push_back(s);
    }
    return starts;
}

TilingPlan make_tiling_plan(Extent3 dims, Extent3 window, double overlap) {
    TilingPlan plan;
    plan.window = window;
    plan.overlap = overlap;
    const std::array<int, 3> d{dims.nx, dims.ny, dims.nz}, w{window.nx, window.ny, window.nz};
    for (int a = 0; a < 3; ++a) {
        plan.starts[a] = tile_positions(d[a], w[a], overlap);
        plan.stride[a] = std::max(1, static_cast<int>(std::lround(w[a] * (1.0 - overlap))));
    }
    return plan;
}

Tensor to_tensor(const Volume3D& v) {
    const Extent3 e = v.shape();
    std::vector<float> data(e.count());
    std::size_t i = 0;
    for (int x = 0; x < e.nx; ++x)
        for (int y = 0; y < e.ny; ++y)
            for (int z = 0; z < e.nz; ++z) data[i++] = v.at(x, y, z);
    return Tensor(Shape{1, e.nx, e.ny, e.nz}, std::move(data));
}

Tensor labels_to_tensor(const LabelVolume& v) {
    const Extent3 e = v.shape();
    std::vector<float> data(e.count());
    std::size_t i = 0;
    for (int x = 0; x < e.nx; ++x)
        for (int y = 0; y < e.ny; ++y)
            for (int z = 0; z < e.nz; ++z) data[i++] = v.at(x, y, z) ? 1.0f : 0.0f;
    return Tensor(Shape{e.nx, e.ny, e.nz}, std::move(data));
}

namespace {

std::vector<double> gaussian_profile(int n) {
    std::vector<double> w(n);
    const double sigma = n / 8.0, c = (n - 1) / 2.0;
    for (int i = 0; i < n; ++i) w[i] = std::max(std::exp(-0.5 * (i - c) * (i - c) / (sigma * sigma)), 1e-6);
    return w;
}

}  // namespace

InferenceResult infer_frequency(const WindowPredictor& predict, const FrequencyPair& freq, Extent3 window,
                                double overlap, BlendMode blend) {
    const Extent3 dims = freq.lf.shape();
    if (freq.hf.shape() != dims) throw ShapeError("lf and hf shapes differ");
    const TilingPlan plan = make_tiling_plan(dims, window, overlap);
    const std::size_t wn = window.count();

    std::vector<double> wx(window.nx, 1.0), wy(window.ny, 1.0), wz(window.nz, 1.0);
    if (blend == BlendMode::gaussian) {
        wx = gaussian_profile(window.nx);
        wy = gaussian_profile(window.ny);
        wz = gaussian_profile(window.nz);
    }

    std::vector<double> acc(dims.count(), 0.0), weight(dims.count(), 0.0);
    for (int sx : plan.starts[0])
        for (int sy : plan.starts[1])
            for (int sz : plan.starts[2]) {
                const Index3 o{sx, sy, sz};
                const Tensor logits = predict(to_tensor(crop(freq.lf, o, window)), to_tensor(crop(freq.hf, o, window)));
                if (logits.shape() != Shape{2, window.nx, window.ny, window.nz})
                    throw ShapeError("predictor returned " + shape_str(logits.shape()) + ", expected (2, window)");
                const Tensor prob = softmax(logits, 0);
                const auto fg = prob.data().subspan(wn, wn);
                std::size_t i = 0;
                for (int x = 0; x < window.nx; ++x)
                    for (int y = 0; y < window.ny; ++y)
                        for (int z = 0; z < window.nz; ++z, ++i) {
                            const std::size_t g = static_cast<std::size_t>(sx + x) +
                                                  static_cast<std::size_t>(dims.nx) *
                                                      (static_cast<std::size_t>(sy + y) +
                                                       static_cast<std::size_t>(dims.ny) * static_cast<std::size_t>(sz + z));
                            const double w = wx[x] * wy[y] * wz[z];
                            acc[g] += w * fg[i];
                            weight[g] += w;
                        }
            }

    InferenceResult r{Volume3D(dims, freq.lf.spacing()), LabelVolume(dims, freq.lf.spacing())};
    for (std::size_t g = 0; g < acc.size(); ++g) {
        const float p = static_cast<float>(acc[g] / weight[g]);
        r.prob.data()[g] = p;
        r.mask.data()[g] = p > 0.5f ? 1 : 0;
    }
    return r;
}

InferenceResult infer_volume(const WindowPredictor& predict, Extent3 window, const Volume3D& normalized,
                             double overlap, BlendMode blend) {
    const Extent3 dims = normalized.shape();
    FrequencyPair freq = split_frequency(normalized);
    freq.lf = pad_reflect(freq.lf, window);
    freq.hf = pad_reflect(freq.hf, window);
    InferenceResult full = infer_frequency(predict, freq, window, overlap, blend);
    if (full.prob.shape() == dims) return full;
    return InferenceResult{crop(full.prob, Index3{}, dims), crop(full.mask, Index3{}, dims)};
}

InferenceResult infer_volume(const YNetr& model, const Volume3D& normalized, double overlap, BlendMode blend) {
    const ModelConfig& cfg = model.config();
    if (cfg.in_channels != 1 || cfg.num_classes != 2)
        throw ConfigError("inference needs a single-channel, two-class model");
    const Extent3 window{cfg.input_dims[0], cfg.input_dims[1], cfg.input_dims[2]};
    return infer_volume([&](const Tensor& lf, const Tensor& hf) { return model.forward(lf, hf); }, window, normalized,
                        overlap, blend);
}

}  // namespace ynetr

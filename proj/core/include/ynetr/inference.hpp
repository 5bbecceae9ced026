#pragma once

#include <array>
#include <functional>
#include <vector>

#include "ynetr/model.hpp"
#include "ynetr/volume.hpp"
#include "ynetr/wavelet.hpp"

namespace ynetr {

enum class BlendMode { uniform, gaussian };

const char* to_string(BlendMode m);
BlendMode blend_mode_from_string(const std::string& s);

// Window starts along one axis: 0, s, 2s, ... with s = round(window * (1 - overlap));
// a start past dim - window is replaced by dim - window.
std::vector<int> tile_positions(int dim, int window, double overlap);

struct TilingPlan {
    Extent3 window;
    std::array<int, 3> stride{};
    std::array<std::vector<int>, 3> starts;
    double overlap = 0.5;

    std::size_t window_count() const { return starts[0].size() * starts[1].size() * starts[2].size(); }
};

TilingPlan make_tiling_plan(Extent3 dims, Extent3 window, double overlap);

// Maps an (lf, hf) window pair, each (1, wx, wy, wz), to logits (2, wx, wy, wz).
using WindowPredictor = std::function<Tensor(const Tensor& lf, const Tensor& hf)>;

struct InferenceResult {
    Volume3D prob;      // foreground probability
    LabelVolume mask;   // prob > 0.5
};

// Tiles an already split, window-sized-or-larger frequency pair.
InferenceResult infer_frequency(const WindowPredictor& predict, const FrequencyPair& freq, Extent3 window,
                                double overlap = 0.5, BlendMode blend = BlendMode::uniform);

// Splits the normalized volume once, pads it to the window, tiles, and crops
// the padding back off.
InferenceResult infer_volume(const YNetr& model, const Volume3D& normalized, double overlap = 0.5,
                             BlendMode blend = BlendMode::uniform);
InferenceResult infer_volume(const WindowPredictor& predict, Extent3 window, const Volume3D& normalized,
                             double overlap = 0.5, BlendMode blend = BlendMode::uniform);

// Volume3D (x-fastest) <-> (1, X, Y, Z) tensor.
Tensor to_tensor(const Volume3D& v);
// Labels as an (X, Y, Z) tensor of 0/1 values.
Tensor labels_to_tensor(const LabelVolume& v);

}  // namespace ynetr

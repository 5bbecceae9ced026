#pragma once

#include <string>

#include "ynetr/tensor.hpp"

namespace ynetr {

enum class LossKind { dice, ce, dice_ce };

const char* to_string(LossKind k);
LossKind loss_kind_from_string(const std::string& s);

struct LossConfig {
    LossKind kind = LossKind::dice_ce;
    float alpha = 0.5f;       // weight of the Dice term in dice_ce
    float dice_eps = 1e-5f;   // added to the Dice denominator only

    void validate() const;
    bool operator==(const LossConfig&) const = default;
};

// 1 - 2 sum(G Y) / (sum G + sum Y + eps). `truth` and `fg_prob` share a shape.
Tensor dice_loss(const Tensor& truth, const Tensor& fg_prob, float eps = 1e-5f);

// Mean over voxels of -sum_c G_c log Y_c; class axis 0.
Tensor ce_loss_logits(const Tensor& onehot, const Tensor& logits);
// Same quantity from class probabilities; G must be one-hot.
Tensor ce_loss(const Tensor& onehot, const Tensor& probs);

// alpha * a + (1 - alpha) * b, computed so the endpoints return a or b exactly.
Tensor blend(const Tensor& dice, const Tensor& ce, float alpha);

struct LossTerms {
    Tensor total;
    float dice = 0.0f;
    float ce = 0.0f;
};

// labels: (H, W, D) in {0, 1}; logits: (2, H, W, D).
LossTerms segmentation_loss(const Tensor& labels, const Tensor& logits, const LossConfig& cfg);

// (2, H, W, D) one-hot of a {0, 1} label tensor.
Tensor one_hot2(const Tensor& labels);

}  // namespace ynetr

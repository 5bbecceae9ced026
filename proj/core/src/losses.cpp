#include "ynetr/losses.hpp"

#include <cmath>

#include "ynetr/ops.hpp"

namespace ynetr {

const char* to_string(LossKind k) {
    switch (k) {
        case LossKind::dice: return "dice";
        case LossKind::ce: return "ce";
        case LossKind::dice_ce: return "dice_ce";
    }
    return "?";
}

LossKind loss_kind_from_string(const std::string& s) {
    if (s == "dice") return LossKind::dice;
    if (s == "ce") return LossKind::ce;
    if (s == "dice_ce") return LossKind::dice_ce;
    throw ConfigError("unknown loss kind: " + s);
}

void LossConfig::validate() const {
    if (!(alpha >= 0.0f && alpha <= 1.0f)) throw ConfigError("loss alpha must lie in [0, 1]");
    if (!(dice_eps > 0.0f)) throw ConfigError("dice_eps must be positive");
}

Tensor dice_loss(const Tensor& truth, const Tensor& fg_prob, float eps) {
    if (truth.shape() != fg_prob.shape())
        throw ShapeError("dice_loss shape mismatch: " + shape_str(truth.shape()) + " vs " + shape_str(fg_prob.shape()));
    Tensor inter = sum(mul(truth, fg_prob));
    Tensor denom = add_scalar(add(sum(truth), sum(fg_prob)), eps);
    return add_scalar(mul_scalar(div(inter, denom), -2.0f), 1.0f);
}

Tensor ce_loss_logits(const Tensor& onehot, const Tensor& logits) {
    if (onehot.shape() != logits.shape())
        throw ShapeError("ce_loss shape mismatch: " + shape_str(onehot.shape()) + " vs " + shape_str(logits.shape()));
    const std::int64_t voxels = logits.numel() / logits.dim(0);
    Tensor nll = sum(mul(onehot, log_softmax(logits, 0)));
    return mul_scalar(nll, -1.0f / static_cast<float>(voxels));
}

Tensor ce_loss(const Tensor& onehot, const Tensor& probs) {
    if (onehot.shape() != probs.shape())
        throw ShapeError("ce_loss shape mismatch: " + shape_str(onehot.shape()) + " vs " + shape_str(probs.shape()));
    // For one-hot G, sum_c G_c log Y_c = log sum_c G_c Y_c, which stays finite
    // when an untargeted class has probability zero.
    const std::int64_t voxels = probs.numel() / probs.dim(0);
    Tensor nll = sum(log(sum(mul(onehot, probs), 0)));
    return mul_scalar(nll, -1.0f / static_cast<float>(voxels));
}

Tensor blend(const Tensor& dice, const Tensor& ce, float alpha) {
    if (!(alpha >= 0.0f && alpha <= 1.0f)) throw ConfigError("loss alpha must lie in [0, 1]");
    if (alpha == 1.0f) return dice;
    if (alpha == 0.0f) return ce;
    return add(mul_scalar(dice, alpha), mul_scalar(ce, 1.0f - alpha));
}

Tensor one_hot2(const Tensor& labels) {
    Shape s = labels.shape();
    s.insert(s.begin(), 2);
    Tensor out(s);
    const auto n = static_cast<std::size_t>(labels.numel());
    auto src = labels.data();
    auto dst = out.data();
    for (std::size_t i = 0; i < n; ++i) {
        const bool fg = src[i] > 0.5f;
        dst[i] = fg ? 0.0f : 1.0f;
        dst[n + i] = fg ? 1.0f : 0.0f;
    }
    return out;
}

LossTerms segmentation_loss(const Tensor& labels, const Tensor& logits, const LossConfig& cfg) {
    cfg.validate();
    if (logits.rank() < 2 || logits.dim(0) != 2) throw ShapeError("segmentation_loss expects two-class logits");
    Shape spatial(logits.shape().begin() + 1, logits.shape().end());
    if (labels.shape() != spatial)
        throw ShapeError("labels " + shape_str(labels.shape()) + " do not match logits " + shape_str(logits.shape()));

    Tensor probs = softmax(logits, 0);
    Tensor fg = reshape(slice(probs, 0, 1, 1), spatial);
    Tensor d = dice_loss(labels, fg, cfg.dice_eps);
    Tensor c = ce_loss_logits(one_hot2(labels), logits);

    LossTerms terms;
    terms.dice = d.item();
    terms.ce = c.item();
    switch (cfg.kind) {
        case LossKind::dice: terms.total = d; break;
        case LossKind::ce: terms.total = c; break;
        case LossKind::dice_ce: terms.total = blend(d, c, cfg.alpha); break;
    }
    return terms;
}

}  // namespace ynetr

#include "ynetr/metrics.hpp"

#include <string>

namespace ynetr {

ConfusionCounts confusion(const LabelVolume& pred, const LabelVolume& truth) {
    if (pred.shape() != truth.shape()) throw ShapeError("confusion: prediction and ground truth shapes differ");
    ConfusionCounts c;
    auto p = pred.data();
    auto g = truth.data();
    for (std::size_t i = 0; i < p.size(); ++i) {
        const bool pp = p[i] != 0, gg = g[i] != 0;
        if (pp && gg)
            ++c.tp;
        else if (pp)
            ++c.fp;
        else if (gg)
            ++c.fn;
        else
            ++c.tn;
    }
    return c;
}

double dice_coefficient(const ConfusionCounts& c) {
    const double denom = 2.0 * static_cast<double>(c.tp) + static_cast<double>(c.fp) + static_cast<double>(c.fn);
    if (denom == 0.0) return 1.0;
    return 2.0 * static_cast<double>(c.tp) / denom;
}

EvaluationReport evaluate(const std::vector<LabelVolume>& preds, const std::vector<LabelVolume>& truths) {
    if (preds.size() != truths.size())
        throw ShapeError("evaluate: " + std::to_string(preds.size()) + " predictions for " +
                         std::to_string(truths.size()) + " ground truths");
    EvaluationReport r;
    double acc = 0.0;
    for (std::size_t i = 0; i < preds.size(); ++i) {
        const ConfusionCounts c = confusion(preds[i], truths[i]);
        const double d = dice_coefficient(c);
        r.counts.push_back(c);
        r.per_volume.push_back(d);
        r.totals += c;
        acc += d;
    }
    r.mean_dice = preds.empty() ? 0.0 : acc / static_cast<double>(preds.size());
    return r;
}

}  // namespace ynetr

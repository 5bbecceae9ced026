#pragma once

#include <cstdint>
#include <vector>

#include "ynetr/volume.hpp"

namespace ynetr {

struct ConfusionCounts {
    std::uint64_t tp = 0;
    std::uint64_t fp = 0;
    std::uint64_t fn = 0;
    std::uint64_t tn = 0;

    std::uint64_t total() const { return tp + fp + fn + tn; }
    ConfusionCounts& operator+=(const ConfusionCounts& o) {
        tp += o.tp;
        fp += o.fp;
        fn += o.fn;
        tn += o.tn;
        return *this;
    }
    bool operator==(const ConfusionCounts&) const = default;
};

ConfusionCounts confusion(const LabelVolume& pred, const LabelVolume& truth);

// 2TP / (2TP + FP + FN); two empty masks score 1.
double dice_coefficient(const ConfusionCounts& c);

struct EvaluationReport {
    std::vector<double> per_volume;
    std::vector<ConfusionCounts> counts;
    ConfusionCounts totals;
    double mean_dice = 0.0;
};

// Mean of per-volume Dice scores.
EvaluationReport evaluate(const std::vector<LabelVolume>& preds, const std::vector<LabelVolume>& truths);

}  // namespace ynetr

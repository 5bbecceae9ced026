#pragma once

#include <cstdint>
#include <vector>

#include "ynetr/tensor.hpp"

namespace ynetr {

struct AdamWConfig {
    float learning_rate = 1e-4f;
    float weight_decay = 0.01f;
    float beta1 = 0.9f;
    float beta2 = 0.999f;
    float eps = 1e-8f;
};

struct AdamWState {
    std::vector<std::vector<float>> m;
    std::vector<std::vector<float>> v;
    std::int64_t step = 0;
};

// One AdamW update. Decoupled decay is applied to the parameter directly:
//   p <- p - lr * wd * p
//   p <- p - lr * mhat / (sqrt(vhat) + eps)
// `state` is sized lazily on the first call.
void adamw_step(std::vector<Tensor>& params, AdamWState& state, const AdamWConfig& cfg);

class AdamW {
public:
    AdamW(std::vector<Tensor> params, AdamWConfig cfg);

    void zero_grad();
    void step();

    const AdamWConfig& config() const { return cfg_; }
    AdamWState& state() { return state_; }
    const AdamWState& state() const { return state_; }
    const std::vector<Tensor>& params() const { return params_; }

private:
    std::vector<Tensor> params_;
    AdamWConfig cfg_;
    AdamWState state_;
};

}  // namespace ynetr

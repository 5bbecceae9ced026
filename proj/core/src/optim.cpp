#include "ynetr/optim.hpp"

#include <cmath>

namespace ynetr {

void adamw_step(std::vector<Tensor>& params, AdamWState& state, const AdamWConfig& cfg) {
    if (state.m.empty() && state.v.empty()) {
        for (const auto& p : params) {
            state.m.emplace_back(static_cast<std::size_t>(p.numel()), 0.0f);
            state.v.emplace_back(static_cast<std::size_t>(p.numel()), 0.0f);
        }
    }
    if (state.m.size() != params.size() || state.v.size() != params.size())
        throw ShapeError("optimizer state does not match parameter list");
    for (std::size_t i = 0; i < params.size(); ++i)
        if (state.m[i].size() != static_cast<std::size_t>(params[i].numel()) || state.v[i].size() != state.m[i].size())
            throw ShapeError("optimizer moment shape mismatch for parameter " + std::to_string(i));

    ++state.step;
    const double bc1 = 1.0 - std::pow(static_cast<double>(cfg.beta1), static_cast<double>(state.step));
    const double bc2 = 1.0 - std::pow(static_cast<double>(cfg.beta2), static_cast<double>(state.step));
    const float decay = 1.0f - cfg.learning_rate * cfg.weight_decay;
    const float b1 = cfg.beta1, b2 = cfg.beta2;

    for (std::size_t i = 0; i < params.size(); ++i) {
        auto p = params[i].data();
        auto g = params[i].grad();
        auto& m = state.m[i];
        auto& v = state.v[i];
        for (std::size_t j = 0; j < p.size(); ++j) {
            m[j] = b1 * m[j] + (1.0f - b1) * g[j];
            v[j] = b2 * v[j] + (1.0f - b2) * g[j] * g[j];
            const double mhat = m[j] / bc1;
            const double vhat = v[j] / bc2;
            p[j] *= decay;
            p[j] -= static_cast<float>(cfg.learning_rate * mhat / (std::sqrt(vhat) + cfg.eps));
        }
    }
}

AdamW::AdamW(std::vector<Tensor> params, AdamWConfig cfg) : params_(std::move(params)), cfg_(cfg) {}

void AdamW::zero_grad() {
    for (auto& p : params_) p.zero_grad();
}

void AdamW::step() { adamw_step(params_, state_, cfg_); }

}  // namespace ynetr

#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include "ynetr/inference.hpp"
#include "ynetr/model.hpp"
#include "ynetr/phantom.hpp"
#include "ynetr/sampler.hpp"
#include "ynetr/train.hpp"

namespace ynetr {

struct InferenceConfig {
    double overlap = 0.5;
    BlendMode blend = BlendMode::uniform;

    void validate() const;
    bool operator==(const InferenceConfig&) const = default;
};

struct IntensityWindow {
    float lo = -175.0f;
    float hi = 250.0f;

    bool operator==(const IntensityWindow&) const = default;
};

struct PhantomSetConfig {
    int count = 4;
    PhantomSpec spec;
};

// Every section with every default spelled out. The top-level seed is copied
// into each section's seed by finalize(); phantom i uses seed + i.
struct RunConfig {
    std::string variant = "ynetr";
    std::uint64_t seed = 0;
    bool deterministic = true;
    IntensityWindow intensity;
    ModelConfig model;
    SamplerConfig sampler;
    TrainConfig train;
    InferenceConfig inference;
    PhantomSetConfig phantom;

    void finalize();
    // Throws ConfigError on any invariant violation, including cross-section ones.
    void validate() const;
};

// Parses a JSON document. Unknown keys are rejected; missing keys keep
// defaults. Each override has the form "section.key=value" where value is
// JSON (bare words are taken as strings). The result is finalized and validated.
RunConfig parse_run_config(const std::string& text, const std::vector<std::string>& overrides = {});
RunConfig load_run_config(const std::filesystem::path& path, const std::vector<std::string>& overrides = {});

// Canonical form: every field, sorted keys, two-space indent, trailing newline.
std::string to_canonical_json(const RunConfig& cfg);

// Single-line model section, used as the checkpoint config echo.
std::string model_config_to_json(const ModelConfig& cfg);
ModelConfig model_config_from_json(const std::string& text);

}  // namespace ynetr

#pragma once

#include <filesystem>
#include <memory>

#include "ynetr/model.hpp"
#include "ynetr/optim.hpp"

namespace ynetr {

// Checkpoint file: a text manifest (magic line, one-line config echo, step
// count, one "tensor <name> <shape> <offset> <count>" line per buffer,
// "end_manifest") followed by the raw little-endian float32 payload.
void save_checkpoint(const YNetr& model, const AdamWState& state, const std::filesystem::path& path);

struct LoadedCheckpoint {
    std::unique_ptr<YNetr> model;
    AdamWState state;
};

LoadedCheckpoint load_checkpoint(const std::filesystem::path& path);
// Loads into an existing model; throws ConfigMismatch when configs differ.
void load_checkpoint_into(YNetr& model, AdamWState& state, const std::filesystem::path& path);
ModelConfig read_checkpoint_config(const std::filesystem::path& path);

}  // namespace ynetr

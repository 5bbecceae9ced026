#pragma once

#include <cstdint>
#include <filesystem>
#include <functional>
#include <optional>
#include <set>
#include <string>
#include <vector>

#include "ynetr/losses.hpp"
#include "ynetr/model.hpp"
#include "ynetr/optim.hpp"
#include "ynetr/sampler.hpp"
#include "ynetr/wavelet.hpp"

namespace ynetr {

struct TrainConfig {
    float learning_rate = 1e-4f;
    int epochs = 300;
    // 0 means two draws (one positive, one negative) per training volume.
    int steps_per_epoch = 0;
    int batch_size = 1;
    float weight_decay = 0.01f;
    LossConfig loss;
    bool deterministic = true;
    std::uint64_t seed = 0;
    // Write a checkpoint every N optimizer steps (0: only at the end).
    int checkpoint_every = 0;

    void validate() const;
    bool operator==(const TrainConfig&) const = default;
};

// One training volume, normalized, split once, and padded to the window.
struct TrainingSample {
    std::string name;
    FrequencyPair freq;
    LabelVolume label;
    LabelIndex index;
};

TrainingSample prepare_sample(std::string name, const Volume3D& normalized, const LabelVolume& label, Extent3 window);

struct LossRecord {
    std::int64_t step = 0;
    double loss = 0.0;
    double dice = 0.0;
    double ce = 0.0;
};

// CSV with header "step,loss,dice_component,ce_component"; values in
// shortest round-trip form.
void write_loss_table(const std::vector<LossRecord>& rows, const std::filesystem::path& path);
std::vector<LossRecord> read_loss_table(const std::filesystem::path& path);

struct DrawEvent {
    std::int64_t draw = 0;
    bool requested_positive = false;
    bool positive = false;
    bool fallback = false;
    std::size_t volume = 0;
};

class Trainer {
public:
    Trainer(YNetr& model, TrainConfig train_cfg, SamplerConfig sampler_cfg);

    // One optimizer step over batch_size windows. Throws NumericError on a
    // non-finite loss.
    LossRecord step(const std::vector<TrainingSample>& data);
    // Runs until `total_steps` optimizer steps have been taken overall.
    void run(const std::vector<TrainingSample>& data, std::int64_t total_steps,
             const std::function<void(const LossRecord&)>& on_step = {});

    std::int64_t steps_done() const { return optimizer_.state().step; }
    std::int64_t total_steps(const std::vector<TrainingSample>& data) const;
    AdamW& optimizer() { return optimizer_; }
    const AdamW& optimizer() const { return optimizer_; }
    const std::vector<LossRecord>& history() const { return history_; }
    const std::vector<DrawEvent>& draws() const { return draws_; }
    void set_logger(std::function<void(const std::string&)> log) { log_ = std::move(log); }

private:
    YNetr& model_;
    TrainConfig train_cfg_;
    SamplerConfig sampler_cfg_;
    AdamW optimizer_;
    std::vector<LossRecord> history_;
    std::vector<DrawEvent> draws_;
    std::function<void(const std::string&)> log_;
    std::set<std::pair<std::size_t, bool>> warned_;  // (volume, requested_positive) already logged
};

struct TrainResult {
    std::vector<LossRecord> history;
    std::optional<std::filesystem::path> checkpoint;
};

// Full run from the model's current state. When `checkpoint_path` is set a
// checkpoint is written at the configured cadence and at the end.
TrainResult train(YNetr& model, const std::vector<TrainingSample>& data, const TrainConfig& train_cfg,
                  const SamplerConfig& sampler_cfg, const std::optional<std::filesystem::path>& checkpoint_path = {});

}  // namespace ynetr

#include "ynetr/train.hpp"

#include <charconv>
#include <cmath>
#include <fstream>
#include <sstream>

#include "ynetr/checkpoint.hpp"
#include "ynetr/errors.hpp"
#include "ynetr/inference.hpp"
#include "ynetr/ops.hpp"

namespace ynetr {
namespace {

std::string fmt(double v) {
    char buf[40];
    auto res = std::to_chars(buf, buf + sizeof(buf), v);
    return std::string(buf, res.ptr);
}

template <typename T>
T parse_field(const std::string& tok, const std::filesystem::path& path) {
    T v{};
    auto res = std::from_chars(tok.data(), tok.data() + tok.size(), v);
    if (res.ec != std::errc() || res.ptr != tok.data() + tok.size())
        throw FormatError("bad field '" + tok + "' in " + path.string());
    return v;
}

void check_train_config(const TrainConfig& c, bool allow_zero_lr) {
    if (!(c.learning_rate > 0.0f) && !(allow_zero_lr && c.learning_rate == 0.0f))
        throw ConfigError("learning_rate must be > 0");
    if (c.epochs < 1) throw ConfigError("epochs must be >= 1");
    if (c.steps_per_epoch < 0) throw ConfigError("steps_per_epoch must be >= 0");
    if (c.batch_size < 1) throw ConfigError("batch_size must be >= 1");
    if (!(c.weight_decay >= 0.0f)) throw ConfigError("weight_decay must be >= 0");
    if (c.checkpoint_every < 0) throw ConfigError("checkpoint_every must be >= 0");
    c.loss.validate();
}

}  // namespace

void TrainConfig::validate() const { check_train_config(*this, false); }

TrainingSample prepare_sample(std::string name, const Volume3D& normalized, const LabelVolume& label, Extent3 window) {
    if (normalized.shape() != label.shape()) throw ShapeError("image and label shapes differ for '" + name + "'");
    validate_labels(label);
    FrequencyPair freq = split_frequency(normalized);
    freq.lf = pad_reflect(freq.lf, window);
    freq.hf = pad_reflect(freq.hf, window);
    LabelVolume padded = pad_reflect(label, window);
    LabelIndex index(padded);
    return TrainingSample{std::move(name), std::move(freq), std::move(padded), std::move(index)};
}

void write_loss_table(const std::vector<LossRecord>& rows, const std::filesystem::path& path) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw IoError("cannot write loss table '" + path.string() + "'");
    out << "step,loss,dice_component,ce_component\n";
    for (const auto& r : rows) out << r.step << ',' << fmt(r.loss) << ',' << fmt(r.dice) << ',' << fmt(r.ce) << '\n';
    if (!out) throw IoError("failed writing loss table '" + path.string() + "'");
}

std::vector<LossRecord> read_loss_table(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw IoError("cannot open loss table '" + path.string() + "'");
    std::string line;
    if (!std::getline(in, line) || line != "step,loss,dice_component,ce_component")
        throw FormatError("missing loss table header in " + path.string());
    std::vector<LossRecord> rows;
    while (std::getline(in, line)) {
        if (line.empty()) continue;
        std::vector<std::string> f;
        std::stringstream ss(line);
        std::string tok;
        while (std::getline(ss, tok, ',')) f.push_back(tok);
        if (f.size() != 4) throw FormatError("loss table row needs 4 fields in " + path.string());
        rows.push_back({parse_field<std::int64_t>(f[0], path), parse_field<double>(f[1], path),
                        parse_field<double>(f[2], path), parse_field<double>(f[3], path)});
    }
    return rows;
}

Trainer::Trainer(YNetr& model, TrainConfig train_cfg, SamplerConfig sampler_cfg)
    : model_(model),
      train_cfg_(std::move(train_cfg)),
      sampler_cfg_(std::move(sampler_cfg)),
      optimizer_(model.parameters(), AdamWConfig{train_cfg_.learning_rate, train_cfg_.weight_decay}) {
    check_train_config(train_cfg_, true);
    sampler_cfg_.validate();
    const auto& d = model.config().input_dims;
    if (sampler_cfg_.window != Extent3{d[0], d[1], d[2]})
        throw ConfigError("sampler window must equal the model input dims");
}

std::int64_t Trainer::total_steps(const std::vector<TrainingSample>& data) const {
    const std::int64_t per_epoch =
        train_cfg_.steps_per_epoch > 0 ? train_cfg_.steps_per_epoch : 2 * static_cast<std::int64_t>(data.size());
    return per_epoch * train_cfg_.epochs;
}

LossRecord Trainer::step(const std::vector<TrainingSample>& data) {
    if (data.empty()) throw ConfigError("training set is empty");
    const std::int64_t step_index = steps_done();
    const int batch = train_cfg_.batch_size;

    optimizer_.zero_grad();
    Tape tape;
    TapeScope scope(tape);
    Tensor total;
    double dice_sum = 0.0, ce_sum = 0.0;
    for (int b = 0; b < batch; ++b) {
        // Draw numbers follow the step count, so a resumed run continues the same stream.
        const std::int64_t d = step_index * batch + b;
        const bool want_positive = d % 2 == 0;
        const std::size_t vol = static_cast<std::size_t>((d / 2) % static_cast<std::int64_t>(data.size()));
        const TrainingSample& s = data[vol];
        auto rng = draw_rng(sampler_cfg_.seed, static_cast<std::uint64_t>(d));
        DrawEvent ev{d, want_positive, want_positive, false, vol};
        std::optional<WindowSample> w;
        try {
            w = sample_window(s.freq.lf, s.freq.hf, s.label, s.index, want_positive, rng, sampler_cfg_);
        } catch (const NoForeground&) {
            if (log_ && warned_.insert({vol, true}).second)
                log_("warning: no tumor in '" + s.name + "'; positive draws fall back to negative windows");
            w = sample_window(s.freq.lf, s.freq.hf, s.label, s.index, false, rng, sampler_cfg_);
            ev.positive = false;
            ev.fallback = true;
        } catch (const NoBackground&) {
            if (log_ && warned_.insert({vol, false}).second)
                log_("warning: no tumor-free window in '" + s.name + "'; negative draws fall back to positive windows");
            w = sample_window(s.freq.lf, s.freq.hf, s.label, s.index, true, rng, sampler_cfg_);
            ev.positive = true;
            ev.fallback = true;
        }
        draws_.push_back(ev);

        const Tensor logits = model_.forward(to_tensor(w->lf), to_tensor(w->hf));
        LossTerms terms = segmentation_loss(labels_to_tensor(w->label), logits, train_cfg_.loss);
        dice_sum += terms.dice;
        ce_sum += terms.ce;
        total = total.defined() ? add(total, terms.total) : terms.total;
    }
    if (batch > 1) total = mul_scalar(total, 1.0f / static_cast<float>(batch));

    const float loss = total.item();
    if (!std::isfinite(loss)) {
        std::ostringstream msg;
        msg << "non-finite loss " << loss << " at step " << step_index + 1;
        throw NumericError(msg.str());
    }
    backward(tape, total);
    optimizer_.step();

    LossRecord rec{step_index + 1, loss, dice_sum / batch, ce_sum / batch};
    history_.push_back(rec);
    return rec;
}

void Trainer::run(const std::vector<TrainingSample>& data, std::int64_t total_steps,
                  const std::function<void(const LossRecord&)>& on_step) {
    while (steps_done() < total_steps) {
        const LossRecord rec = step(data);
        if (on_step) on_step(rec);
    }
}

TrainResult train(YNetr& model, const std::vector<TrainingSample>& data, const TrainConfig& train_cfg,
                  const SamplerConfig& sampler_cfg, const std::optional<std::filesystem::path>& checkpoint_path) {
    train_cfg.validate();
    Trainer trainer(model, train_cfg, sampler_cfg);
    trainer.run(data, trainer.total_steps(data), [&](const LossRecord& rec) {
        if (checkpoint_path && train_cfg.checkpoint_every > 0 && rec.step % train_cfg.checkpoint_every == 0)
            save_checkpoint(model, trainer.optimizer().state(), *checkpoint_path);
    });
    if (checkpoint_path) save_checkpoint(model, trainer.optimizer().state(), *checkpoint_path);
    return TrainResult{trainer.history(), checkpoint_path};
}

}  // namespace ynetr

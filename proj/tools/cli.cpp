#include "cli.hpp"

#include <algorithm>
#include <charconv>
#include <fstream>
#include <iomanip>
#include <iostream>
#include <optional>
#include <sstream>

#include <CLI11.hpp>

#include "ynetr/checkpoint.hpp"
#include "ynetr/config.hpp"
#include "ynetr/errors.hpp"
#include "ynetr/inference.hpp"
#include "ynetr/metrics.hpp"
#include "ynetr/phantom.hpp"
#include "ynetr/train.hpp"
#include "ynetr/vvol_io.hpp"
#include "ynetr/wavelet.hpp"

namespace fs = std::filesystem;

namespace ynetr::cli {
namespace {

constexpr const char* kConfigFile = "config.json";
constexpr const char* kCheckpointFile = "checkpoint.ckpt";
constexpr const char* kLossFile = "loss.csv";
constexpr const char* kEvalFile = "eval.csv";

class UsageError : public ConfigError {
public:
    using ConfigError::ConfigError;
    const char* error_class() const noexcept override { return "UsageError"; }
};

std::string fmt(double v) {
    char buf[40];
    auto res = std::to_chars(buf, buf + sizeof(buf), v);
    return std::string(buf, res.ptr);
}

std::string one_line(std::string s) {
    std::replace(s.begin(), s.end(), '\n', ' ');
    return s;
}

bool ends_with(const std::string& s, const std::string& suffix) {
    return s.size() >= suffix.size() && s.compare(s.size() - suffix.size(), suffix.size(), suffix) == 0;
}

std::string strip_suffix(std::string s, const std::string& suffix) {
    if (ends_with(s, suffix)) s.resize(s.size() - suffix.size());
    return s;
}

void ensure_dir(const fs::path& dir) {
    std::error_code ec;
    fs::create_directories(dir, ec);
    if (ec || !fs::is_directory(dir)) throw IoError("cannot create directory '" + dir.string() + "'");
}

void write_text(const fs::path& path, const std::string& text) {
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out) throw IoError("cannot write '" + path.string() + "'");
    out << text;
    if (!out) throw IoError("failed writing '" + path.string() + "'");
}

RunConfig load_config(const std::string& path, const std::vector<std::string>& overrides) {
    if (path.empty()) return parse_run_config("{}", overrides);
    return load_run_config(path, overrides);
}

void echo_config(const RunConfig& cfg, const fs::path& dir) { write_text(dir / kConfigFile, to_canonical_json(cfg)); }

std::vector<TrainingSample> load_training_set(const fs::path& dir, const RunConfig& cfg) {
    const auto entries = list_dataset(dir, true);
    if (entries.empty()) throw IoError("no '*.image.vvol' volumes in '" + dir.string() + "'");
    const auto& d = cfg.model.input_dims;
    std::vector<TrainingSample> data;
    for (const auto& e : entries) {
        const Volume3D image = normalize_intensity(read_volume(e.image), cfg.intensity.lo, cfg.intensity.hi);
        data.push_back(prepare_sample(e.name, image, read_labels(e.label), Extent3{d[0], d[1], d[2]}));
    }
    return data;
}

// ------------------------------------------------------------- subcommands

struct Common {
    std::string config;
    std::vector<std::string> overrides;
};

void add_common(CLI::App* sub, Common& c) {
    sub->add_option("-c,--config", c.config, "JSON run configuration");
    sub->add_option("--set", c.overrides, "override, e.g. train.learning_rate=1e-3")->allow_extra_args(false);
}

struct PhantomArgs {
    Common common;
    std::string out;
    std::optional<int> count;
    std::optional<std::uint64_t> seed;
};

int cmd_phantom(const PhantomArgs& a, std::ostream& out) {
    auto overrides = a.common.overrides;
    if (a.count) overrides.push_back("phantom.count=" + std::to_string(*a.count));
    if (a.seed) overrides.push_back("seed=" + std::to_string(*a.seed));
    const RunConfig cfg = load_config(a.common.config, overrides);
    const fs::path dir(a.out);
    ensure_dir(dir);
    echo_config(cfg, dir);
    std::ostringstream tumors;
    tumors << "volume,tumor,center_x,center_y,center_z,target_cm3,labeled_cm3,voxels\n";
    for (int i = 0; i < cfg.phantom.count; ++i) {
        PhantomSpec spec = cfg.phantom.spec;
        spec.seed = cfg.seed + static_cast<std::uint64_t>(i);
        const Phantom ph = generate_phantom(spec);
        std::ostringstream name;
        name << "phantom_" << std::setw(3) << std::setfill('0') << i;
        write_vvol(ph.image, dir / (name.str() + ".image.vvol"));
        write_vvol(ph.label, dir / (name.str() + ".label.vvol"));
        for (std::size_t t = 0; t < ph.tumors.size(); ++t) {
            const auto& r = ph.tumors[t];
            tumors << name.str() << ',' << t << ',' << fmt(r.center_vox[0]) << ',' << fmt(r.center_vox[1]) << ','
                   << fmt(r.center_vox[2]) << ',' << fmt(r.target_cm3) << ',' << fmt(r.labeled_cm3) << ','
                   << r.voxel_count << '\n';
        }
        out << name.str() << ": " << ph.tumors.size() << " tumor(s)\n";
    }
    write_text(dir / "tumors.csv", tumors.str());
    return kOk;
}

struct WaveletArgs {
    Common common;
    std::string input;
    std::string out;
    bool raw = false;
};

int cmd_wavelet(const WaveletArgs& a, std::ostream& out) {
    const RunConfig cfg = load_config(a.common.config, a.common.overrides);
    Volume3D v = read_volume(a.input);
    if (!a.raw) v = normalize_intensity(v, cfg.intensity.lo, cfg.intensity.hi);
    const FrequencyPair f = split_frequency(v);
    const fs::path dir(a.out);
    ensure_dir(dir);
    const std::string name = strip_suffix(strip_suffix(fs::path(a.input).filename().string(), ".vvol"), ".image");
    write_vvol(f.lf, dir / (name + ".lf.vvol"));
    write_vvol(f.hf, dir / (name + ".hf.vvol"));
    out << "wrote " << (dir / (name + ".lf.vvol")).string() << " and " << (dir / (name + ".hf.vvol")).string() << '\n';
    return kOk;
}

struct TrainArgs {
    Common common;
    std::string data;
    std::string run;
    bool resume = false;
    std::optional<std::int64_t> stop_after;
    int log_every = 10;
};

int cmd_train(const TrainArgs& a, std::ostream& out) {
    const fs::path run(a.run);
    const fs::path ckpt = run / kCheckpointFile, losses = run / kLossFile;
    RunConfig cfg;
    if (a.resume) {
        if (!a.common.config.empty() || !a.common.overrides.empty())
            throw UsageError("--resume reuses the run's config.json; do not pass --config or --set");
        cfg = load_run_config(run / kConfigFile);
    } else {
        cfg = load_config(a.common.config, a.common.overrides);
        ensure_dir(run);
        echo_config(cfg, run);
    }
    const auto data = load_training_set(a.data, cfg);

    YNetr model(cfg.model);
    Trainer trainer(model, cfg.train, cfg.sampler);
    trainer.set_logger([&](const std::string& msg) { out << msg << '\n'; });
    std::vector<LossRecord> history;
    if (a.resume) {
        load_checkpoint_into(model, trainer.optimizer().state(), ckpt);
        history = read_loss_table(losses);
        const std::int64_t done = trainer.steps_done();
        history.erase(std::remove_if(history.begin(), history.end(), [&](const LossRecord& r) { return r.step > done; }),
                      history.end());
        if (static_cast<std::int64_t>(history.size()) != done)
            throw FormatError("loss table does not cover the checkpoint's " + std::to_string(done) + " steps");
        out << "resuming at step " << done << '\n';
    }

    const std::int64_t total = trainer.total_steps(data);
    const std::int64_t target = a.stop_after ? std::min(total, *a.stop_after) : total;
    auto persist = [&] {
        save_checkpoint(model, trainer.optimizer().state(), ckpt);
        write_loss_table(history, losses);
    };
    trainer.run(data, target, [&](const LossRecord& r) {
        history.push_back(r);
        if (a.log_every > 0 && (r.step % a.log_every == 0 || r.step == target))
            out << "step " << r.step << "/" << total << " loss " << fmt(r.loss) << " dice " << fmt(r.dice) << " ce "
                << fmt(r.ce) << '\n';
        if (cfg.train.checkpoint_every > 0 && r.step % cfg.train.checkpoint_every == 0) persist();
    });
    persist();
    out << "checkpoint " << ckpt.string() << " at step " << trainer.steps_done() << '\n';
    return kOk;
}

struct InferArgs {
    Common common;
    std::string run;
    std::string checkpoint;
    std::string data;
    std::string input;
    std::string out;
};

int cmd_infer(const InferArgs& a, std::ostream& out) {
    RunConfig cfg;
    fs::path ckpt;
    if (!a.run.empty()) {
        cfg = load_run_config(fs::path(a.run) / kConfigFile, a.common.overrides);
        ckpt = fs::path(a.run) / kCheckpointFile;
    } else {
        if (a.checkpoint.empty()) throw UsageError("infer needs --run or --checkpoint");
        cfg = load_config(a.common.config, a.common.overrides);
        ckpt = a.checkpoint;
    }
    if (a.data.empty() == a.input.empty()) throw UsageError("infer needs exactly one of --data or --input");
    LoadedCheckpoint loaded = load_checkpoint(ckpt);
    if (!(loaded.model->config() == cfg.model))
        throw ConfigMismatch("checkpoint model config differs from the run configuration");

    std::vector<std::pair<std::string, fs::path>> inputs;
    if (!a.data.empty()) {
        for (const auto& e : list_dataset(a.data, false)) inputs.emplace_back(e.name, e.image);
        if (inputs.empty()) throw IoError("no '*.image.vvol' volumes in '" + a.data + "'");
    } else {
        inputs.emplace_back(strip_suffix(strip_suffix(fs::path(a.input).filename().string(), ".vvol"), ".image"),
                            a.input);
    }
    const fs::path dir(a.out);
    ensure_dir(dir);
    echo_config(cfg, dir);
    for (const auto& [name, path] : inputs) {
        const Volume3D image = normalize_intensity(read_volume(path), cfg.intensity.lo, cfg.intensity.hi);
        const InferenceResult r = infer_volume(*loaded.model, image, cfg.inference.overlap, cfg.inference.blend);
        write_vvol(r.prob, dir / (name + ".prob.vvol"));
        write_vvol(r.mask, dir / (name + ".pred.vvol"));
        std::size_t fg = 0;
        for (auto v : r.mask.data()) fg += v;
        out << name << ": " << fg << " foreground voxels\n";
    }
    return kOk;
}

struct EvalArgs {
    std::string pred;
    std::string gt;
    std::string out;
};

int cmd_eval(const EvalArgs& a, std::ostream& out) {
    std::vector<std::string> names;
    std::error_code ec;
    for (const auto& e : fs::directory_iterator(a.pred, ec)) {
        const std::string f = e.path().filename().string();
        if (ends_with(f, ".pred.vvol")) names.push_back(strip_suffix(f, ".pred.vvol"));
    }
    if (ec) throw IoError("cannot list '" + a.pred + "'");
    std::sort(names.begin(), names.end());
    if (names.empty()) throw IoError("no '*.pred.vvol' volumes in '" + a.pred + "'");
    std::vector<LabelVolume> preds, truths;
    for (const auto& n : names) {
        preds.push_back(read_labels(fs::path(a.pred) / (n + ".pred.vvol")));
        truths.push_back(read_labels(fs::path(a.gt) / (n + ".label.vvol")));
    }
    const EvaluationReport rep = evaluate(preds, truths);
    std::ostringstream csv;
    csv << "volume,dice,tp,fp,fn,tn\n";
    for (std::size_t i = 0; i < names.size(); ++i) {
        const auto& c = rep.counts[i];
        csv << names[i] << ',' << fmt(rep.per_volume[i]) << ',' << c.tp << ',' << c.fp << ',' << c.fn << ',' << c.tn
            << '\n';
    }
    const auto& t = rep.totals;
    csv << "mean," << fmt(rep.mean_dice) << ',' << t.tp << ',' << t.fp << ',' << t.fn << ',' << t.tn << '\n';
    if (!a.out.empty()) {
        ensure_dir(fs::path(a.out).parent_path().empty() ? fs::path(".") : fs::path(a.out).parent_path());
        write_text(a.out, csv.str());
    }
    out << csv.str();
    return kOk;
}

struct SummaryArgs {
    std::vector<std::string> runs;
    std::string out;
};

int cmd_summary(const SummaryArgs& a, std::ostream& out) {
    std::vector<fs::path> runs(a.runs.begin(), a.runs.end());
    const auto rows = collect_summary(runs);
    std::ostringstream csv;
    csv << "rank,variant,loss,dice,run\n";
    for (std::size_t i = 0; i < rows.size(); ++i)
        csv << i + 1 << ',' << rows[i].variant << ',' << rows[i].loss << ',' << fmt(rows[i].dice) << ','
            << rows[i].run.string() << '\n';
    if (!a.out.empty()) write_text(a.out, csv.str());
    out << csv.str();
    return kOk;
}

double read_mean_dice(const fs::path& report) {
    std::ifstream in(report);
    if (!in) throw IoError("cannot open eval report '" + report.string() + "'");
    std::string line;
    while (std::getline(in, line)) {
        if (line.rfind("mean,", 0) != 0) continue;
        const std::string tok = line.substr(5, line.find(',', 5) - 5);
        double v = 0.0;
        auto res = std::from_chars(tok.data(), tok.data() + tok.size(), v);
        if (res.ec != std::errc()) break;
        return v;
    }
    throw FormatError("eval report '" + report.string() + "' has no mean row");
}

}  // namespace

int exit_code_for(const std::exception& e) {
    if (dynamic_cast<const ConfigError*>(&e) || dynamic_cast<const CLI::Error*>(&e)) return kConfigError;
    if (dynamic_cast<const IoError*>(&e) || dynamic_cast<const fs::filesystem_error*>(&e)) return kIoError;
    if (dynamic_cast<const NumericError*>(&e)) return kNumericError;
    return kFailure;
}

std::vector<DatasetEntry> list_dataset(const fs::path& dir, bool require_labels) {
    if (!fs::is_directory(dir)) throw IoError("'" + dir.string() + "' is not a directory");
    std::vector<DatasetEntry> entries;
    for (const auto& e : fs::directory_iterator(dir)) {
        const std::string f = e.path().filename().string();
        if (!ends_with(f, ".image.vvol")) continue;
        DatasetEntry d{strip_suffix(f, ".image.vvol"), e.path(), {}};
        const fs::path label = dir / (d.name + ".label.vvol");
        if (fs::exists(label))
            d.label = label;
        else if (require_labels)
            throw IoError("missing label volume '" + label.string() + "'");
        entries.push_back(std::move(d));
    }
    std::sort(entries.begin(), entries.end(), [](const auto& a, const auto& b) { return a.name < b.name; });
    return entries;
}

std::vector<SummaryRow> collect_summary(const std::vector<fs::path>& runs) {
    if (runs.empty()) throw UsageError("summary needs at least one run directory");
    std::vector<SummaryRow> rows;
    for (const auto& run : runs) {
        const RunConfig cfg = load_run_config(run / kConfigFile);
        rows.push_back({cfg.variant, to_string(cfg.train.loss.kind), read_mean_dice(run / kEvalFile), run});
    }
    std::stable_sort(rows.begin(), rows.end(), [](const SummaryRow& a, const SummaryRow& b) {
        if (a.dice != b.dice) return a.dice > b.dice;
        return a.variant < b.variant;
    });
    return rows;
}

int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
    CLI::App app{"ynetr: dual-branch wavelet-frequency 3-D segmentation", "ynetr"};
    app.require_subcommand(1);

    PhantomArgs pa;
    auto* phantom = app.add_subcommand("phantom", "generate a synthetic dataset");
    add_common(phantom, pa.common);
    phantom->add_option("-o,--out", pa.out, "output directory")->required();
    phantom->add_option("--count", pa.count, "number of volumes");
    phantom->add_option("--seed", pa.seed, "base seed");

    WaveletArgs wa;
    auto* wavelet = app.add_subcommand("wavelet", "split a volume into LF and HF images");
    add_common(wavelet, wa.common);
    wavelet->add_option("-i,--input", wa.input, "input .vvol")->required();
    wavelet->add_option("-o,--out", wa.out, "output directory")->required();
    wavelet->add_flag("--raw", wa.raw, "skip intensity normalization");

    TrainArgs ta;
    auto* train_cmd = app.add_subcommand("train", "train a model");
    add_common(train_cmd, ta.common);
    train_cmd->add_option("-d,--data", ta.data, "dataset directory")->required();
    train_cmd->add_option("-r,--run", ta.run, "run directory")->required();
    train_cmd->add_flag("--resume", ta.resume, "continue from the run's checkpoint");
    train_cmd->add_option("--stop-after", ta.stop_after, "stop once this many steps are done");
    train_cmd->add_option("--log-every", ta.log_every, "progress line cadence in steps (0: off)");

    InferArgs ia;
    auto* infer = app.add_subcommand("infer", "sliding-window prediction");
    add_common(infer, ia.common);
    infer->add_option("-r,--run", ia.run, "run directory (config.json + checkpoint)");
    infer->add_option("--checkpoint", ia.checkpoint, "checkpoint file (with --config)");
    infer->add_option("-d,--data", ia.data, "dataset directory");
    infer->add_option("-i,--input", ia.input, "single input .vvol");
    infer->add_option("-o,--out", ia.out, "output directory")->required();

    EvalArgs ea;
    auto* eval = app.add_subcommand("eval", "per-volume Dice report");
    eval->add_option("-p,--pred", ea.pred, "directory of <name>.pred.vvol")->required();
    eval->add_option("-g,--gt", ea.gt, "directory of <name>.label.vvol")->required();
    eval->add_option("-o,--out", ea.out, "report path (CSV)");

    SummaryArgs sa;
    auto* summary = app.add_subcommand("summary", "variant vs Dice table across runs");
    summary->add_option("runs", sa.runs, "run directories")->required();
    summary->add_option("-o,--out", sa.out, "table path (CSV)");

    try {
        std::vector<std::string> rev(args.rbegin(), args.rend());
        try {
            app.parse(rev);
        } catch (const CLI::CallForHelp&) {
            out << app.help();
            return kOk;
        } catch (const CLI::CallForAllHelp&) {
            out << app.help("", CLI::AppFormatMode::All);
            return kOk;
        }
        if (phantom->parsed()) return cmd_phantom(pa, out);
        if (wavelet->parsed()) return cmd_wavelet(wa, out);
        if (train_cmd->parsed()) return cmd_train(ta, out);
        if (infer->parsed()) return cmd_infer(ia, out);
        if (eval->parsed()) return cmd_eval(ea, out);
        if (summary->parsed()) return cmd_summary(sa, out);
        throw UsageError("no subcommand given");
    } catch (const CLI::ParseError& e) {
        err << "error: UsageError: " << one_line(e.what()) << '\n';
        return kConfigError;
    } catch (const Error& e) {
        err << "error: " << e.error_class() << ": " << one_line(e.what()) << '\n';
        return exit_code_for(e);
    } catch (const fs::filesystem_error& e) {
        err << "error: IoError: " << one_line(e.what()) << '\n';
        return kIoError;
    } catch (const std::exception& e) {
        err << "error: InternalError: " << one_line(e.what()) << '\n';
        return exit_code_for(e);
    }
}

}  // namespace ynetr::cli

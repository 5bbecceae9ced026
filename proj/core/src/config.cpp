#include "ynetr/config.hpp"

#include <charconv>
#include <fstream>
#include <set>
#include <sstream>

#include <json.hpp>

#include "ynetr/errors.hpp"

namespace ynetr {
namespace {

using nlohmann::json;

// Floats are echoed through their shortest decimal form so 1e-4f prints as 0.0001.
double float_to_json(float f) {
    char buf[32];
    auto res = std::to_chars(buf, buf + sizeof(buf), f);
    double d = 0.0;
    std::from_chars(buf, res.ptr, d);
    return d;
}

class Section {
public:
    Section(const json& j, std::string path) : j_(j), path_(std::move(path)) {
        if (!j_.is_object()) throw ConfigError(where() + " must be an object");
    }
    ~Section() noexcept(false) {
        if (std::uncaught_exceptions()) return;
        for (auto it = j_.begin(); it != j_.end(); ++it)
            if (!seen_.count(it.key())) throw ConfigError("unknown key '" + key_path(it.key()) + "'");
    }

    template <typename T>
    void get(const char* key, T& out) {
        const json* v = find(key);
        if (!v) return;
        try {
            if constexpr (std::is_same_v<T, float>)
                out = static_cast<float>(v->get<double>());
            else if constexpr (std::is_same_v<T, std::uint64_t>) {
                if (!v->is_number_unsigned()) throw ConfigError(key_path(key) + " must be a non-negative integer");
                out = v->get<std::uint64_t>();
            } else if constexpr (std::is_integral_v<T> && !std::is_same_v<T, bool>) {
                if (!v->is_number_integer()) throw ConfigError(key_path(key) + " must be an integer");
                out = v->get<T>();
            } else
                out = v->get<T>();
        } catch (const json::exception& e) {
            throw ConfigError(key_path(key) + ": " + e.what());
        }
    }

    template <typename F>
    void child(const char* key, F&& f) {
        const json* v = find(key);
        if (!v) return;
        Section s(*v, key_path(key));
        f(s);
    }

    std::string key_path(const std::string& key) const { return path_.empty() ? key : path_ + "." + key; }

private:
    const json* find(const char* key) {
        seen_.insert(key);
        auto it = j_.find(key);
        return it == j_.end() ? nullptr : &*it;
    }
    std::string where() const { return path_.empty() ? "config" : path_; }

    const json& j_;
    std::string path_;
    std::set<std::string> seen_;
};

void get_extent(Section& s, const char* key, Extent3& e) {
    std::array<int, 3> a{e.nx, e.ny, e.nz};
    s.get(key, a);
    e = Extent3{a[0], a[1], a[2]};
}

json model_json(const ModelConfig& m, bool with_seed) {
    json j;
    j["input_dims"] = m.input_dims;
    j["in_channels"] = m.in_channels;
    j["num_classes"] = m.num_classes;
    j["patch"] = m.patch;
    j["embed_dim"] = m.embed_dim;
    j["depth"] = m.depth;
    j["num_heads"] = m.num_heads;
    j["mlp_ratio"] = m.mlp_ratio;
    j["tap_layers"] = m.tap_layers;
    j["decoder_channels"] = m.decoder_channels;
    j["lf_branch"] = to_string(m.lf_branch);
    j["hf_branch"] = to_string(m.hf_branch);
    j["zero_init_classifier"] = m.zero_init_classifier;
    if (with_seed) j["seed"] = m.seed;
    return j;
}

void read_model(Section& s, ModelConfig& m, bool with_seed) {
    s.get("input_dims", m.input_dims);
    s.get("in_channels", m.in_channels);
    s.get("num_classes", m.num_classes);
    s.get("patch", m.patch);
    s.get("embed_dim", m.embed_dim);
    s.get("depth", m.depth);
    s.get("num_heads", m.num_heads);
    s.get("mlp_ratio", m.mlp_ratio);
    s.get("tap_layers", m.tap_layers);
    s.get("decoder_channels", m.decoder_channels);
    std::string lf = to_string(m.lf_branch), hf = to_string(m.hf_branch);
    s.get("lf_branch", lf);
    s.get("hf_branch", hf);
    m.lf_branch = branch_kind_from_string(lf);
    m.hf_branch = branch_kind_from_string(hf);
    s.get("zero_init_classifier", m.zero_init_classifier);
    if (with_seed) s.get("seed", m.seed);
}

json to_json_doc(const RunConfig& c) {
    json j;
    j["variant"] = c.variant;
    j["seed"] = c.seed;
    j["deterministic"] = c.deterministic;
    j["intensity"] = {{"lo", float_to_json(c.intensity.lo)}, {"hi", float_to_json(c.intensity.hi)}};
    j["model"] = model_json(c.model, false);
    j["sampler"] = {{"window", {c.sampler.window.nx, c.sampler.window.ny, c.sampler.window.nz}},
                    {"jitter_max", c.sampler.jitter_max}};
    const TrainConfig& t = c.train;
    j["train"] = {{"learning_rate", float_to_json(t.learning_rate)},
                  {"epochs", t.epochs},
                  {"steps_per_epoch", t.steps_per_epoch},
                  {"batch_size", t.batch_size},
                  {"weight_decay", float_to_json(t.weight_decay)},
                  {"checkpoint_every", t.checkpoint_every},
                  {"loss",
                   {{"kind", to_string(t.loss.kind)},
                    {"alpha", float_to_json(t.loss.alpha)},
                    {"dice_eps", float_to_json(t.loss.dice_eps)}}}};
    j["inference"] = {{"overlap", c.inference.overlap}, {"blend", to_string(c.inference.blend)}};
    const PhantomSpec& p = c.phantom.spec;
    const TumorSpec& tu = p.tumors;
    j["phantom"] = {
        {"count", c.phantom.count},
        {"shape", {p.shape.nx, p.shape.ny, p.shape.nz}},
        {"spacing_mm", {p.spacing_mm.sx, p.spacing_mm.sy, p.spacing_mm.sz}},
        {"background_hu", p.background_hu},
        {"background_noise_hu", p.background_noise_hu},
        {"liver",
         {{"center_frac", p.liver.center_frac},
          {"semi_axes_mm", p.liver.semi_axes_mm},
          {"mean_hu", p.liver.mean_hu},
          {"noise_sigma_hu", p.liver.noise_sigma_hu}}},
        {"tumors",
         {{"count_min", tu.count_min},
          {"count_max", tu.count_max},
          {"volume_min_cm3", tu.volume_min_cm3},
          {"volume_max_cm3", tu.volume_max_cm3},
          {"intensity_offset_hu", tu.intensity_offset_hu},
          {"exponent_min", tu.exponent_min},
          {"exponent_max", tu.exponent_max},
          {"elongation_max", tu.elongation_max},
          {"boundary_noise", tu.boundary_noise}}}};
    return j;
}

void read_doc(const json& doc, RunConfig& c) {
    Section root(doc, "");
    root.get("variant", c.variant);
    root.get("seed", c.seed);
    root.get("deterministic", c.deterministic);
    root.child("intensity", [&](Section& s) {
        s.get("lo", c.intensity.lo);
        s.get("hi", c.intensity.hi);
    });
    root.child("model", [&](Section& s) { read_model(s, c.model, false); });
    root.child("sampler", [&](Section& s) {
        get_extent(s, "window", c.sampler.window);
        s.get("jitter_max", c.sampler.jitter_max);
    });
    root.child("train", [&](Section& s) {
        TrainConfig& t = c.train;
        s.get("learning_rate", t.learning_rate);
        s.get("epochs", t.epochs);
        s.get("steps_per_epoch", t.steps_per_epoch);
        s.get("batch_size", t.batch_size);
        s.get("weight_decay", t.weight_decay);
        s.get("checkpoint_every", t.checkpoint_every);
        s.child("loss", [&](Section& l) {
            std::string kind = to_string(t.loss.kind);
            l.get("kind", kind);
            t.loss.kind = loss_kind_from_string(kind);
            l.get("alpha", t.loss.alpha);
            l.get("dice_eps", t.loss.dice_eps);
        });
    });
    root.child("inference", [&](Section& s) {
        s.get("overlap", c.inference.overlap);
        std::string blend = to_string(c.inference.blend);
        s.get("blend", blend);
        c.inference.blend = blend_mode_from_string(blend);
    });
    root.child("phantom", [&](Section& s) {
        PhantomSpec& p = c.phantom.spec;
        s.get("count", c.phantom.count);
        get_extent(s, "shape", p.shape);
        std::array<double, 3> sp{p.spacing_mm.sx, p.spacing_mm.sy, p.spacing_mm.sz};
        s.get("spacing_mm", sp);
        p.spacing_mm = Spacing{sp[0], sp[1], sp[2]};
        s.get("background_hu", p.background_hu);
        s.get("background_noise_hu", p.background_noise_hu);
        s.child("liver", [&](Section& l) {
            l.get("center_frac", p.liver.center_frac);
            l.get("semi_axes_mm", p.liver.semi_axes_mm);
            l.get("mean_hu", p.liver.mean_hu);
            l.get("noise_sigma_hu", p.liver.noise_sigma_hu);
        });
        s.child("tumors", [&](Section& t) {
            TumorSpec& tu = p.tumors;
            t.get("count_min", tu.count_min);
            t.get("count_max", tu.count_max);
            t.get("volume_min_cm3", tu.volume_min_cm3);
            t.get("volume_max_cm3", tu.volume_max_cm3);
            t.get("intensity_offset_hu", tu.intensity_offset_hu);
            t.get("exponent_min", tu.exponent_min);
            t.get("exponent_max", tu.exponent_max);
            t.get("elongation_max", tu.elongation_max);
            t.get("boundary_noise", tu.boundary_noise);
        });
    });
}

void apply_override(json& doc, const std::string& ov) {
    const auto eq = ov.find('=');
    if (eq == std::string::npos || eq == 0) throw ConfigError("override '" + ov + "' is not of the form key=value");
    const std::string key = ov.substr(0, eq), text = ov.substr(eq + 1);
    json value = json::parse(text, nullptr, false);
    if (value.is_discarded()) value = text;
    json* node = &doc;
    std::stringstream ks(key);
    std::string part;
    std::vector<std::string> parts;
    while (std::getline(ks, part, '.')) parts.push_back(part);
    for (std::size_t i = 0; i + 1 < parts.size(); ++i) {
        json& next = (*node)[parts[i]];
        if (next.is_null()) next = json::object();
        if (!next.is_object()) throw ConfigError("override '" + key + "' descends into a non-object");
        node = &next;
    }
    (*node)[parts.back()] = std::move(value);
}

}  // namespace

void InferenceConfig::validate() const {
    if (!(overlap >= 0.0 && overlap < 1.0)) throw ConfigError("inference.overlap must be in [0, 1)");
}

void RunConfig::finalize() {
    model.seed = seed;
    sampler.seed = seed;
    train.seed = seed;
    train.deterministic = deterministic;
    phantom.spec.seed = seed;
    if (model.tap_layers.empty() && model.depth > 0 && model.depth % 4 == 0) model.tap_layers = model.taps();
}

void RunConfig::validate() const {
    if (variant.empty()) throw ConfigError("variant must be non-empty");
    if (!(intensity.lo < intensity.hi)) throw ConfigError("intensity.lo must be below intensity.hi");
    model.validate();
    sampler.validate();
    train.validate();
    inference.validate();
    if (phantom.count < 1) throw ConfigError("phantom.count must be >= 1");
    phantom.spec.validate();
    const auto& d = model.input_dims;
    if (sampler.window != Extent3{d[0], d[1], d[2]})
        throw ConfigError("sampler.window must equal model.input_dims");
}

RunConfig parse_run_config(const std::string& text, const std::vector<std::string>& overrides) {
    json doc = json::parse(text, nullptr, false, true);
    if (doc.is_discarded()) throw ConfigError("config is not valid JSON");
    for (const auto& ov : overrides) apply_override(doc, ov);
    RunConfig cfg;
    read_doc(doc, cfg);
    cfg.finalize();
    cfg.validate();
    return cfg;
}

RunConfig load_run_config(const std::filesystem::path& path, const std::vector<std::string>& overrides) {
    std::ifstream in(path);
    if (!in) throw IoError("cannot open config '" + path.string() + "'");
    std::ostringstream ss;
    ss << in.rdbuf();
    return parse_run_config(ss.str(), overrides);
}

std::string to_canonical_json(const RunConfig& cfg) { return to_json_doc(cfg).dump(2) + "\n"; }

std::string model_config_to_json(const ModelConfig& cfg) { return model_json(cfg, true).dump(); }

ModelConfig model_config_from_json(const std::string& text) {
    json doc = json::parse(text, nullptr, false);
    if (doc.is_discarded()) throw FormatError("model config echo is not valid JSON");
    ModelConfig m;
    m.tap_layers.clear();
    {
        Section s(doc, "model");
        read_model(s, m, true);
    }
    return m;
}

}  // namespace ynetr

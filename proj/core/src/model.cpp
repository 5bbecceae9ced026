#include "ynetr/model.hpp"

#include <cmath>
#include <string>

#include "ynetr/ops.hpp"

namespace ynetr {
namespace {

constexpr float kInitStd = 0.02f;

bool is_pow2(int v) { return v > 0 && (v & (v - 1)) == 0; }

int log2i(int v) {
    int r = 0;
    while (v > 1) {
        v >>= 1;
        ++r;
    }
    return r;
}

Tensor param(Shape shape) { return Tensor(std::move(shape)).set_requires_grad(true); }

// Normal(0, std) truncated to two standard deviations.
Tensor trunc_normal(Shape shape, std::mt19937_64& rng, float std = kInitStd) {
    Tensor t = param(std::move(shape));
    std::normal_distribution<float> nd(0.0f, 1.0f);
    for (auto& v : t.data()) {
        float z;
        do {
            z = nd(rng);
        } while (std::abs(z) > 2.0f);
        v = z * std;
    }
    return t;
}

Tensor fan_in_uniform(Shape shape, std::int64_t fan_in, std::mt19937_64& rng) {
    Tensor t = param(std::move(shape));
    const float bound = 1.0f / std::sqrt(static_cast<float>(fan_in));
    std::uniform_real_distribution<float> ud(-bound, bound);
    for (auto& v : t.data()) v = ud(rng);
    return t;
}

Linear make_linear(int in, int out, std::mt19937_64& rng) {
    return Linear{trunc_normal({in, out}, rng), param({out})};
}

LayerNorm make_layer_norm(int n) {
    LayerNorm ln{param({n}), param({n})};
    for (auto& v : ln.gamma.data()) v = 1.0f;
    return ln;
}

ConvBlock make_conv_block(int cin, int cout, int stride, std::mt19937_64& rng, bool shortcut = true) {
    return ConvBlock{fan_in_uniform({cout, cin, 3, 3, 3}, static_cast<std::int64_t>(cin) * 27, rng), stride, shortcut};
}

UpBlock make_up_block(int cin, int cout, std::mt19937_64& rng) {
    // A transposed conv's fan-in is the number of input taps reaching one output.
    Tensor up = fan_in_uniform({cin, cout, 2, 2, 2}, cin, rng);
    return UpBlock{up, make_conv_block(cout, cout, 1, rng)};
}

void push(NamedParams& out, const std::string& name, const Tensor& t) { out.emplace_back(name, t); }

}  // namespace

const char* to_string(BranchKind k) { return k == BranchKind::transformer ? "transformer" : "cnn"; }

BranchKind branch_kind_from_string(const std::string& s) {
    if (s == "transformer") return BranchKind::transformer;
    if (s == "cnn") return BranchKind::cnn;
    throw ConfigError("unknown branch kind: " + s);
}

// ----------------------------------------------------------------- config

std::vector<int> ModelConfig::taps() const {
    if (!tap_layers.empty()) return tap_layers;
    return {depth / 4, depth / 2, 3 * depth / 4, depth};
}

std::array<int, 3> ModelConfig::token_grid() const {
    return {input_dims[0] / patch, input_dims[1] / patch, input_dims[2] / patch};
}

std::int64_t ModelConfig::num_tokens() const {
    const auto g = token_grid();
    return static_cast<std::int64_t>(g[0]) * g[1] * g[2];
}

void ModelConfig::validate() const {
    if (in_channels < 1) throw ConfigError("in_channels must be >= 1");
    if (num_classes < 2) throw ConfigError("num_classes must be >= 2");
    if (patch < 16 || !is_pow2(patch)) throw ConfigError("patch must be a power of two >= 16");
    for (int d : input_dims)
        if (d < patch || d % patch != 0)
            throw ConfigError("input dims must be positive multiples of the patch size " + std::to_string(patch));
    if (depth < 4 || depth % 4 != 0) throw ConfigError("depth must be a positive multiple of 4");
    if (num_heads < 1 || embed_dim < 1 || embed_dim % num_heads != 0)
        throw ConfigError("embed_dim must be divisible by num_heads");
    if (mlp_ratio < 1) throw ConfigError("mlp_ratio must be >= 1");
    for (int c : decoder_channels)
        if (c < 1) throw ConfigError("decoder channels must be >= 1");
    const auto t = taps();
    if (t.size() != 4) throw ConfigError("exactly four tap layers are required");
    for (std::size_t i = 0; i < t.size(); ++i) {
        if (t[i] < 1 || t[i] > depth) throw ConfigError("tap layer out of range");
        if (i > 0 && t[i] <= t[i - 1]) throw ConfigError("tap layers must be strictly increasing");
    }
    if (t.back() != depth) throw ConfigError("last tap layer must equal depth");
}

// ----------------------------------------------------------------- tokens

PatchSequence patchify(const Tensor& volume, int patch) {
    if (volume.rank() != 4) throw ShapeError("patchify expects (C, H, W, D), got " + shape_str(volume.shape()));
    if (patch < 1) throw ShapeError("patch size must be positive");
    const std::int64_t c = volume.dim(0);
    std::array<int, 3> grid{};
    for (int d = 0; d < 3; ++d) {
        if (volume.dim(d + 1) % patch != 0)
            throw ShapeError("volume dims " + shape_str(volume.shape()) + " not divisible by patch " + std::to_string(patch));
        grid[d] = static_cast<int>(volume.dim(d + 1) / patch);
    }
    const std::int64_t p = patch;
    Tensor t = reshape(volume, {c, grid[0], p, grid[1], p, grid[2], p});
    t = permute(t, {1, 3, 5, 2, 4, 6, 0});
    t = reshape(t, {static_cast<std::int64_t>(grid[0]) * grid[1] * grid[2], p * p * p * c});
    return PatchSequence{t, grid, patch, static_cast<int>(c)};
}

Tensor unpatchify(const PatchSequence& seq) {
    const std::int64_t p = seq.patch, c = seq.channels;
    const auto& g = seq.grid;
    if (seq.tokens.rank() != 2 || seq.tokens.dim(0) != static_cast<std::int64_t>(g[0]) * g[1] * g[2] ||
        seq.tokens.dim(1) != p * p * p * c)
        throw ShapeError("token matrix " + shape_str(seq.tokens.shape()) + " inconsistent with patch grid");
    Tensor t = reshape(seq.tokens, {g[0], g[1], g[2], p, p, p, c});
    t = permute(t, {6, 0, 3, 1, 4, 2, 5});
    return reshape(t, {c, g[0] * p, g[1] * p, g[2] * p});
}

// ----------------------------------------------------------------- layers

Tensor Linear::forward(const Tensor& x) const { return add(matmul(x, weight), bias); }

void Linear::collect(const std::string& prefix, NamedParams& out) const {
    push(out, prefix + ".weight", weight);
    push(out, prefix + ".bias", bias);
}

Tensor LayerNorm::forward(const Tensor& x) const { return layer_norm(x, -1, gamma, beta); }

void LayerNorm::collect(const std::string& prefix, NamedParams& out) const {
    push(out, prefix + ".gamma", gamma);
    push(out, prefix + ".beta", beta);
}

Tensor instance_norm(const Tensor& x, float eps) {
    if (x.rank() != 4) throw ShapeError("instance_norm expects (C, X, Y, Z)");
    Tensor flat = reshape(x, {x.dim(0), -1});
    return reshape(layer_norm(flat, 1, {}, {}, eps), x.shape());
}

Tensor ConvBlock::forward(const Tensor& x) const {
    Tensor y = leaky_relu(instance_norm(conv3d(x, weight, {}, stride, 1)));
    return residual() ? add(y, x) : y;
}

void ConvBlock::collect(const std::string& prefix, NamedParams& out) const { push(out, prefix + ".weight", weight); }

Tensor UpBlock::forward(const Tensor& x) const { return conv.forward(conv_transpose3d(x, up_weight, {}, 2, 0)); }

void UpBlock::collect(const std::string& prefix, NamedParams& out) const {
    push(out, prefix + ".up.weight", up_weight);
    conv.collect(prefix + ".conv", out);
}

Tensor TransformerBlock::forward(const Tensor& x, std::vector<Tensor>* attention) const {
    const std::int64_t e = x.dim(1);
    const std::int64_t dh = e / num_heads;
    const float scale = 1.0f / std::sqrt(static_cast<float>(dh));

    Tensor h = norm1.forward(x);
    Tensor qkv_all = qkv.forward(h);  // (N, 3E)
    std::vector<Tensor> heads;
    heads.reserve(static_cast<std::size_t>(num_heads));
    for (int i = 0; i < num_heads; ++i) {
        Tensor q = slice(qkv_all, 1, i * dh, dh);
        Tensor k = slice(qkv_all, 1, e + i * dh, dh);
        Tensor v = slice(qkv_all, 1, 2 * e + i * dh, dh);
        Tensor scores = mul_scalar(matmul(q, permute(k, {1, 0})), scale);
        Tensor attn = softmax(scores, 1);
        if (attention) attention->push_back(attn);
        heads.push_back(matmul(attn, v));
    }
    Tensor merged = num_heads == 1 ? heads[0] : concat(heads, 1);
    Tensor y = add(x, proj.forward(merged));
    Tensor m = fc2.forward(gelu(fc1.forward(norm2.forward(y))));
    return add(y, m);
}

void TransformerBlock::collect(const std::string& prefix, NamedParams& out) const {
    norm1.collect(prefix + ".norm1", out);
    qkv.collect(prefix + ".qkv", out);
    proj.collect(prefix + ".proj", out);
    norm2.collect(prefix + ".norm2", out);
    fc1.collect(prefix + ".fc1", out);
    fc2.collect(prefix + ".fc2", out);
}

// ---------------------------------------------------------------- pyramid

SkipPyramid fuse_add(const SkipPyramid& a, const SkipPyramid& b) {
    SkipPyramid out;
    for (std::size_t i = 0; i < a.levels.size(); ++i) {
        if (a.levels[i].shape() != b.levels[i].shape())
            throw ShapeError("pyramid level " + std::to_string(i) + " shape mismatch: " + shape_str(a.levels[i].shape()) +
                             " vs " + shape_str(b.levels[i].shape()));
        out.levels[i] = add(a.levels[i], b.levels[i]);
    }
    return out;
}

// ------------------------------------------------------ transformer branch

TransformerBranch::TransformerBranch(const ModelConfig& cfg, std::mt19937_64& rng) : cfg_(cfg) {
    const int e = cfg.embed_dim;
    const int token_len = cfg.patch * cfg.patch * cfg.patch * cfg.in_channels;
    embed_ = make_linear(token_len, e, rng);
    pos_ = trunc_normal({cfg.num_tokens(), e}, rng);
    for (int l = 0; l < cfg.depth; ++l) {
        TransformerBlock b;
        b.norm1 = make_layer_norm(e);
        b.qkv = make_linear(e, 3 * e, rng);
        b.proj = make_linear(e, e, rng);
        b.norm2 = make_layer_norm(e);
        b.fc1 = make_linear(e, e * cfg.mlp_ratio, rng);
        b.fc2 = make_linear(e * cfg.mlp_ratio, e, rng);
        b.num_heads = cfg.num_heads;
        blocks_.push_back(std::move(b));
    }
    // Level i consumes tap (3 - i) and must reach scale kPyramidScales[i]
    // from the token grid at scale P.
    for (int i = 0; i < 4; ++i) {
        const int c = cfg.decoder_channels[static_cast<std::size_t>(i)];
        const int ups = log2i(cfg.patch / kPyramidScales[static_cast<std::size_t>(i)]);
        if (ups == 0) {
            level_proj_[static_cast<std::size_t>(i)] = make_conv_block(e, c, 1, rng, false);
            level_uses_conv_[static_cast<std::size_t>(i)] = true;
        } else {
            for (int u = 0; u < ups; ++u) up_stacks_[static_cast<std::size_t>(i)].push_back(make_up_block(u == 0 ? e : c, c, rng));
        }
    }
    const int c4 = cfg.decoder_channels[4];
    stem_[0] = make_conv_block(cfg.in_channels, c4, 1, rng);
    stem_[1] = make_conv_block(c4, c4, 1, rng);
}

std::vector<Tensor> TransformerBranch::encode(const PatchSequence& seq, EncodeTrace* trace) const {
    if (seq.tokens.dim(0) != pos_.dim(0) || seq.tokens.dim(1) != embed_.weight.dim(0))
        throw ShapeError("patch sequence " + shape_str(seq.tokens.shape()) + " does not match branch configuration");
    Tensor x = add(embed_.forward(seq.tokens), pos_);
    const auto taps = cfg_.taps();
    std::vector<Tensor> out;
    std::size_t next = 0;
    for (int l = 0; l < cfg_.depth; ++l) {
        std::vector<Tensor>* attn = nullptr;
        if (trace) {
            trace->attention.emplace_back();
            attn = &trace->attention.back();
        }
        x = blocks_[static_cast<std::size_t>(l)].forward(x, attn);
        if (next < taps.size() && taps[next] == l + 1) {
            out.push_back(reshape(x, {seq.grid[0], seq.grid[1], seq.grid[2], cfg_.embed_dim}));
            ++next;
        }
    }
    return out;
}

SkipPyramid TransformerBranch::project_skips(const std::vector<Tensor>& taps, const Tensor& volume) const {
    if (taps.size() != 4) throw ShapeError("project_skips needs four taps");
    SkipPyramid p;
    for (std::size_t i = 0; i < 4; ++i) {
        Tensor z = permute(taps[3 - i], {3, 0, 1, 2});  // (E, gx, gy, gz)
        if (level_uses_conv_[i]) {
            z = level_proj_[i].forward(z);
        } else {
            for (const auto& ub : up_stacks_[i]) z = ub.forward(z);
        }
        p.levels[i] = z;
    }
    p.levels[4] = stem_[1].forward(stem_[0].forward(volume));
    return p;
}

SkipPyramid TransformerBranch::pyramid(const Tensor& volume) const {
    return project_skips(encode(patchify(volume, cfg_.patch)), volume);
}

void TransformerBranch::collect(const std::string& prefix, NamedParams& out) const {
    embed_.collect(prefix + ".embed", out);
    push(out, prefix + ".pos", pos_);
    for (std::size_t l = 0; l < blocks_.size(); ++l) blocks_[l].collect(prefix + ".block" + std::to_string(l), out);
    collect_projection(prefix, out);
}

void TransformerBranch::collect_projection(const std::string& prefix, NamedParams& out) const {
    for (std::size_t i = 0; i < 4; ++i) {
        const std::string name = prefix + ".proj" + std::to_string(i);
        if (level_uses_conv_[i]) {
            level_proj_[i].collect(name, out);
        } else {
            for (std::size_t u = 0; u < up_stacks_[i].size(); ++u) up_stacks_[i][u].collect(name + ".up" + std::to_string(u), out);
        }
    }
    stem_[0].collect(prefix + ".stem0", out);
    stem_[1].collect(prefix + ".stem1", out);
}

// -------------------------------------------------------------- cnn branch

CnnBranch::CnnBranch(const ModelConfig& cfg, std::mt19937_64& rng) {
    const auto& c = cfg.decoder_channels;
    stem_[0] = make_conv_block(cfg.in_channels, c[4], 1, rng);
    stem_[1] = make_conv_block(c[4], c[4], 1, rng);
    // down_[0] produces level 3 (/2) ... down_[3] produces level 0 (/16)
    int prev = c[4];
    for (std::size_t d = 0; d < 4; ++d) {
        const int ch = c[3 - d];
        down_[d][0] = make_conv_block(prev, ch, 2, rng);
        down_[d][1] = make_conv_block(ch, ch, 1, rng);
        prev = ch;
    }
}

SkipPyramid CnnBranch::pyramid(const Tensor& volume) const {
    SkipPyramid p;
    Tensor x = stem_[1].forward(stem_[0].forward(volume));
    p.levels[4] = x;
    for (std::size_t d = 0; d < 4; ++d) {
        x = down_[d][1].forward(down_[d][0].forward(x));
        p.levels[3 - d] = x;
    }
    return p;
}

void CnnBranch::collect(const std::string& prefix, NamedParams& out) const { collect_projection(prefix, out); }

void CnnBranch::collect_projection(const std::string& prefix, NamedParams& out) const {
    stem_[0].collect(prefix + ".stem0", out);
    stem_[1].collect(prefix + ".stem1", out);
    for (std::size_t d = 0; d < 4; ++d) {
        down_[d][0].collect(prefix + ".down" + std::to_string(d) + ".0", out);
        down_[d][1].collect(prefix + ".down" + std::to_string(d) + ".1", out);
    }
}

std::unique_ptr<Branch> build_branch(BranchKind kind, const ModelConfig& cfg, std::mt19937_64& rng) {
    if (kind == BranchKind::cnn) return build_cnn_branch(cfg, rng);
    return std::make_unique<TransformerBranch>(cfg, rng);
}

std::unique_ptr<Branch> build_cnn_branch(const ModelConfig& cfg, std::mt19937_64& rng) {
    return std::make_unique<CnnBranch>(cfg, rng);
}

// ----------------------------------------------------------------- decoder

Decoder::Decoder(const ModelConfig& cfg, std::mt19937_64& rng) {
    const auto& c = cfg.decoder_channels;
    for (std::size_t i = 0; i < 4; ++i) {
        up_weight_[i] = fan_in_uniform({c[i], c[i + 1], 2, 2, 2}, c[i], rng);
        blocks_[i] = make_conv_block(c[i + 1], c[i + 1], 1, rng);
    }
    if (cfg.zero_init_classifier) {
        cls_weight_ = param({cfg.num_classes, c[4], 1, 1, 1});
    } else {
        cls_weight_ = fan_in_uniform({cfg.num_classes, c[4], 1, 1, 1}, c[4], rng);
    }
    cls_bias_ = param({cfg.num_classes});
}

Tensor Decoder::decode(const SkipPyramid& fused) const {
    Tensor d = fused.levels[0];
    for (std::size_t i = 0; i < 4; ++i) {
        d = conv_transpose3d(d, up_weight_[i], {}, 2, 0);
        if (d.shape() != fused.levels[i + 1].shape())
            throw ShapeError("decoder level " + std::to_string(i + 1) + " expects " + shape_str(d.shape()) + ", got " +
                             shape_str(fused.levels[i + 1].shape()));
        d = blocks_[i].forward(add(d, fused.levels[i + 1]));
    }
    return conv3d(d, cls_weight_, cls_bias_, 1, 0);
}

void Decoder::collect(const std::string& prefix, NamedParams& out) const {
    for (std::size_t i = 0; i < 4; ++i) {
        push(out, prefix + ".up" + std::to_string(i) + ".weight", up_weight_[i]);
        blocks_[i].collect(prefix + ".block" + std::to_string(i), out);
    }
    push(out, prefix + ".classifier.weight", cls_weight_);
    push(out, prefix + ".classifier.bias", cls_bias_);
}

// ------------------------------------------------------------------- model

namespace {
const ModelConfig& validated(const ModelConfig& cfg) {
    cfg.validate();
    return cfg;
}
}  // namespace

YNetr::YNetr(ModelConfig cfg)
    : cfg_(validated(cfg)),
      init_rng_(cfg_.seed),
      lf_(build_branch(cfg_.lf_branch, cfg_, init_rng_)),
      hf_(build_branch(cfg_.hf_branch, cfg_, init_rng_)),
      decoder_(cfg_, init_rng_) {}

Tensor YNetr::forward(const Tensor& lf, const Tensor& hf) const {
    if (lf.shape() != hf.shape())
        throw ShapeError("lf/hf shape mismatch: " + shape_str(lf.shape()) + " vs " + shape_str(hf.shape()));
    const Shape expect{cfg_.in_channels, cfg_.input_dims[0], cfg_.input_dims[1], cfg_.input_dims[2]};
    if (lf.shape() != expect)
        throw ShapeError("model expects input " + shape_str(expect) + ", got " + shape_str(lf.shape()));
    return decoder_.decode(fuse_add(lf_->pyramid(lf), hf_->pyramid(hf)));
}

NamedParams YNetr::named_parameters() const {
    NamedParams out;
    lf_->collect("lf", out);
    hf_->collect("hf", out);
    decoder_.collect("dec", out);
    return out;
}

std::vector<Tensor> YNetr::parameters() const {
    std::vector<Tensor> out;
    for (auto& [name, t] : named_parameters()) out.push_back(t);
    return out;
}

std::int64_t YNetr::parameter_count() const {
    std::int64_t n = 0;
    for (auto& [name, t] : named_parameters()) n += t.numel();
    return n;
}

}  // namespace ynetr

#pragma once

#include <array>
#include <cstdint>
#include <memory>
#include <random>
#include <string>
#include <utility>
#include <vector>

#include "ynetr/tensor.hpp"

namespace ynetr {

enum class BranchKind { transformer, cnn };

const char* to_string(BranchKind k);
BranchKind branch_kind_from_string(const std::string& s);

// Pyramid level order used throughout: scale /16, /8, /4, /2, /1.
inline constexpr std::array<int, 5> kPyramidScales{16, 8, 4, 2, 1};

struct ModelConfig {
    std::array<int, 3> input_dims{128, 128, 128};
    int in_channels = 1;
    int num_classes = 2;
    int patch = 16;
    int embed_dim = 768;
    int depth = 12;
    int num_heads = 12;
    int mlp_ratio = 4;
    // Empty means {L/4, L/2, 3L/4, L}.
    std::vector<int> tap_layers;
    std::array<int, 5> decoder_channels{512, 512, 256, 128, 64};
    BranchKind lf_branch = BranchKind::transformer;
    BranchKind hf_branch = BranchKind::transformer;
    bool zero_init_classifier = true;
    std::uint64_t seed = 0;

    // Throws ConfigError on any invariant violation.
    void validate() const;
    std::vector<int> taps() const;
    std::array<int, 3> token_grid() const;
    std::int64_t num_tokens() const;

    bool operator==(const ModelConfig&) const = default;
};

using NamedParams = std::vector<std::pair<std::string, Tensor>>;

// ------------------------------------------------------------ patch tokens

struct PatchSequence {
    Tensor tokens;  // (N, P^3 * C), patches in row-major grid order
    std::array<int, 3> grid{};
    int patch = 0;
    int channels = 0;
};

// volume: (C, H, W, D). Token layout within a patch is (p1, p2, p3, c).
PatchSequence patchify(const Tensor& volume, int patch);
Tensor unpatchify(const PatchSequence& seq);

// ------------------------------------------------------------------ layers

struct Linear {
    Tensor weight;  // (in, out)
    Tensor bias;    // (out)
    Tensor forward(const Tensor& x) const;
    void collect(const std::string& prefix, NamedParams& out) const;
};

struct LayerNorm {
    Tensor gamma, beta;
    Tensor forward(const Tensor& x) const;  // over the last axis
    void collect(const std::string& prefix, NamedParams& out) const;
};

// 3x3x3 (or strided) convolution, instance normalization, leaky ReLU, plus an
// identity shortcut when input and output shapes agree. Blocks that read
// encoder tokens disable the shortcut so zeroed weights silence them.
struct ConvBlock {
    Tensor weight;  // (cout, cin, 3, 3, 3), no bias: the norm removes it
    int stride = 1;
    bool shortcut = true;
    bool residual() const { return shortcut && stride == 1 && weight.dim(0) == weight.dim(1); }
    Tensor forward(const Tensor& x) const;
    void collect(const std::string& prefix, NamedParams& out) const;
};

// Transposed 2x2x2 stride-2 upsampling followed by a ConvBlock.
struct UpBlock {
    Tensor up_weight;  // (cin, cout, 2, 2, 2)
    ConvBlock conv;
    Tensor forward(const Tensor& x) const;
    void collect(const std::string& prefix, NamedParams& out) const;
};

struct TransformerBlock {
    LayerNorm norm1;
    Linear qkv;
    Linear proj;
    LayerNorm norm2;
    Linear fc1;
    Linear fc2;
    int num_heads = 1;

    // x: (N, E). When `attention` is non-null the per-head (N, N) weights are appended.
    Tensor forward(const Tensor& x, std::vector<Tensor>* attention = nullptr) const;
    void collect(const std::string& prefix, NamedParams& out) const;
};

// Channels-first instance normalization (no affine) of a (C, X, Y, Z) tensor.
Tensor instance_norm(const Tensor& x, float eps = 1e-5f);

// --------------------------------------------------------------- pyramids

struct SkipPyramid {
    std::array<Tensor, 5> levels;  // (channels, X/s, Y/s, Z/s) per kPyramidScales
};

SkipPyramid fuse_add(const SkipPyramid& a, const SkipPyramid& b);

struct EncodeTrace {
    std::vector<std::vector<Tensor>> attention;  // [layer][head] -> (N, N)
};

class Branch {
public:
    virtual ~Branch() = default;
    virtual BranchKind kind() const = 0;
    // volume: (C, H, W, D)
    virtual SkipPyramid pyramid(const Tensor& volume) const = 0;
    virtual void collect(const std::string& prefix, NamedParams& out) const = 0;
    // Parameters on every path from the branch input into its pyramid outputs
    // downstream of the encoder (projection stacks and stem). Zeroing these
    // silences the branch under additive fusion.
    virtual void collect_projection(const std::string& prefix, NamedParams& out) const = 0;
};

class TransformerBranch final : public Branch {
public:
    TransformerBranch(const ModelConfig& cfg, std::mt19937_64& rng);

    BranchKind kind() const override { return BranchKind::transformer; }
    SkipPyramid pyramid(const Tensor& volume) const override;
    void collect(const std::string& prefix, NamedParams& out) const override;
    void collect_projection(const std::string& prefix, NamedParams& out) const override;

    // Tapped block outputs, each unfolded to (H/P, W/P, D/P, E).
    std::vector<Tensor> encode(const PatchSequence& seq, EncodeTrace* trace = nullptr) const;
    SkipPyramid project_skips(const std::vector<Tensor>& taps, const Tensor& volume) const;

    const Linear& embedding() const { return embed_; }
    const Tensor& positions() const { return pos_; }
    const std::vector<TransformerBlock>& blocks() const { return blocks_; }

private:
    ModelConfig cfg_;
    Linear embed_;
    Tensor pos_;  // (N, E)
    std::vector<TransformerBlock> blocks_;
    std::array<std::vector<UpBlock>, 4> up_stacks_;  // levels 0..3, may be empty
    std::array<ConvBlock, 4> level_proj_;            // used where the stack is empty
    std::array<bool, 4> level_uses_conv_{};
    std::array<ConvBlock, 2> stem_;
};

// Strided convolutional encoder producing the same pyramid geometry.
class CnnBranch final : public Branch {
public:
    CnnBranch(const ModelConfig& cfg, std::mt19937_64& rng);

    BranchKind kind() const override { return BranchKind::cnn; }
    SkipPyramid pyramid(const Tensor& volume) const override;
    void collect(const std::string& prefix, NamedParams& out) const override;
    void collect_projection(const std::string& prefix, NamedParams& out) const override;

private:
    std::array<ConvBlock, 2> stem_;
    std::array<std::array<ConvBlock, 2>, 4> down_;  // produce /2, /4, /8, /16
};

std::unique_ptr<Branch> build_branch(BranchKind kind, const ModelConfig& cfg, std::mt19937_64& rng);
std::unique_ptr<Branch> build_cnn_branch(const ModelConfig& cfg, std::mt19937_64& rng);

class Decoder {
public:
    Decoder(const ModelConfig& cfg, std::mt19937_64& rng);
    // fused pyramid -> logits (num_classes, H, W, D)
    Tensor decode(const SkipPyramid& fused) const;
    void collect(const std::string& prefix, NamedParams& out) const;
    const Tensor& classifier_weight() const { return cls_weight_; }
    const Tensor& classifier_bias() const { return cls_bias_; }

private:
    std::array<Tensor, 4> up_weight_;  // (c[i-1], c[i], 2, 2, 2)
    std::array<ConvBlock, 4> blocks_;
    Tensor cls_weight_;  // (K, c4, 1, 1, 1)
    Tensor cls_bias_;
};

class YNetr {
public:
    explicit YNetr(ModelConfig cfg);

    const ModelConfig& config() const { return cfg_; }
    // lf, hf: (C, H, W, D) -> logits (num_classes, H, W, D)
    Tensor forward(const Tensor& lf, const Tensor& hf) const;

    const Branch& lf_branch() const { return *lf_; }
    const Branch& hf_branch() const { return *hf_; }
    const Decoder& decoder() const { return decoder_; }

    // Stable order: lf.*, hf.*, dec.*
    NamedParams named_parameters() const;
    std::vector<Tensor> parameters() const;
    std::int64_t parameter_count() const;

private:
    ModelConfig cfg_;
    std::mt19937_64 init_rng_;
    std::unique_ptr<Branch> lf_;
    std::unique_ptr<Branch> hf_;
    Decoder decoder_;
};

}  // namespace ynetr

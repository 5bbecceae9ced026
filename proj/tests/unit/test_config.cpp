#include <gtest/gtest.h>

#include <filesystem>

#include "ynetr/config.hpp"

namespace ynetr {
namespace {

namespace fs = std::filesystem;

TEST(RunConfig, DefaultsAreExplicitInCanonicalForm) {
    const RunConfig c = parse_run_config("{}");
    const std::string text = to_canonical_json(c);
    for (const char* key : {"\"variant\"", "\"seed\"", "\"deterministic\"", "\"intensity\"", "\"model\"", "\"sampler\"",
                            "\"train\"", "\"inference\"", "\"phantom\"", "\"decoder_channels\"", "\"jitter_max\"",
                            "\"weight_decay\"", "\"overlap\"", "\"boundary_noise\"", "\"dice_eps\""})
        EXPECT_NE(text.find(key), std::string::npos) << key;
    EXPECT_EQ(text.back(), '\n');
    EXPECT_EQ(c.model.decoder_channels, (std::array<int, 5>{512, 512, 256, 128, 64}));
    EXPECT_EQ(c.model.tap_layers, (std::vector<int>{3, 6, 9, 12}));
    EXPECT_EQ(c.sampler.jitter_max, 48);
    EXPECT_EQ(c.inference.overlap, 0.5);
    EXPECT_EQ(c.train.loss.alpha, 0.5f);
    EXPECT_EQ(c.intensity.lo, -175.0f);
    EXPECT_EQ(c.intensity.hi, 250.0f);
}

TEST(RunConfig, CanonicalFormIsAFixedPoint) {
    const RunConfig a = load_run_config(fs::path(YNETR_SOURCE_DIR) / "configs" / "tiny.json");
    const std::string once = to_canonical_json(a);
    const RunConfig b = parse_run_config(once);
    EXPECT_EQ(to_canonical_json(b), once);
    EXPECT_EQ(b.model, a.model);
    EXPECT_EQ(b.train, a.train);
    EXPECT_EQ(b.sampler, a.sampler);
}

TEST(RunConfig, EveryShippedConfigLoads) {
    for (const auto& e : fs::recursive_directory_iterator(fs::path(YNETR_SOURCE_DIR) / "configs")) {
        if (e.path().extension() != ".json") continue;
        EXPECT_NO_THROW(load_run_config(e.path())) << e.path();
    }
}

TEST(RunConfig, UnknownKeysRejectedAtEveryLevel) {
    for (const char* doc : {R"({"bogus": 1})", R"({"model": {"embed": 64}})", R"({"train": {"loss": {"beta": 1}}})",
                            R"({"phantom": {"tumors": {"count": 2}}})", R"({"phantom": {"liver": {"radius": 3}}})",
                            R"({"sampler": {"windows": [1, 1, 1]}})", R"({"inference": {"overlap_rate": 0.5}})"})
        EXPECT_THROW(parse_run_config(doc), ConfigError) << doc;
}

TEST(RunConfig, TypeAndRangeErrors) {
    EXPECT_THROW(parse_run_config(R"({"seed": "x"})"), ConfigError);
    EXPECT_THROW(parse_run_config(R"({"model": {"input_dims": [32, 32]}})"), ConfigError);
    EXPECT_THROW(parse_run_config(R"({"train": {"learning_rate": 0}})"), ConfigError);
    EXPECT_THROW(parse_run_config(R"({"train": {"loss": {"alpha": 1.5}}})"), ConfigError);
    EXPECT_THROW(parse_run_config(R"({"train": {"loss": {"kind": "boundary"}}})"), ConfigError);
    EXPECT_THROW(parse_run_config(R"({"inference": {"overlap": 1.0}})"), ConfigError);
    EXPECT_THROW(parse_run_config(R"({"model": {"num_heads": 5}})"), ConfigError);
    EXPECT_THROW(parse_run_config("{ not json"), ConfigError);
    EXPECT_THROW(parse_run_config("[]"), ConfigError);
}

TEST(RunConfig, WindowMustMatchModelInput) {
    EXPECT_THROW(parse_run_config(R"({"model": {"input_dims": [64, 64, 64]}})"), ConfigError);
    EXPECT_NO_THROW(parse_run_config(R"({"model": {"input_dims": [64, 64, 64]}, "sampler": {"window": [64, 64, 64]}})"));
}

TEST(RunConfig, SeedPropagates) {
    const RunConfig c = parse_run_config(R"({"seed": 42})");
    EXPECT_EQ(c.model.seed, 42u);
    EXPECT_EQ(c.sampler.seed, 42u);
    EXPECT_EQ(c.train.seed, 42u);
    EXPECT_EQ(c.phantom.spec.seed, 42u);
}

TEST(RunConfig, Overrides) {
    const RunConfig c = parse_run_config(
        "{}", {"train.learning_rate=0.01", "model.lf_branch=cnn", "model.input_dims=[64,64,64]",
               "sampler.window=[64,64,64]", "train.loss.kind=dice", "variant=abl", "seed=3"});
    EXPECT_EQ(c.train.learning_rate, 0.01f);
    EXPECT_EQ(c.model.lf_branch, BranchKind::cnn);
    EXPECT_EQ(c.model.input_dims, (std::array<int, 3>{64, 64, 64}));
    EXPECT_EQ(c.train.loss.kind, LossKind::dice);
    EXPECT_EQ(c.variant, "abl");
    EXPECT_EQ(c.model.seed, 3u);
    EXPECT_THROW(parse_run_config("{}", {"train.nothing=1"}), ConfigError);
    EXPECT_THROW(parse_run_config("{}", {"no_equals_sign"}), ConfigError);
    EXPECT_THROW(parse_run_config("{}", {"train=1"}), ConfigError);
}

TEST(RunConfig, CommentsAllowed) {
    const RunConfig c = parse_run_config("{\n  // smaller run\n  \"seed\": 5 /* inline */\n}");
    EXPECT_EQ(c.seed, 5u);
}

TEST(RunConfig, FloatsEchoInShortestForm) {
    const RunConfig c = parse_run_config(R"({"train": {"learning_rate": 0.001}})");
    EXPECT_NE(to_canonical_json(c).find("\"learning_rate\": 0.001"), std::string::npos);
}

TEST(RunConfig, MissingFileIsIoError) {
    EXPECT_THROW(load_run_config("/nonexistent/config.json"), IoError);
}

TEST(ModelConfigJson, RoundTrip) {
    ModelConfig m;
    m.input_dims = {64, 32, 32};
    m.patch = 32;
    m.embed_dim = 48;
    m.num_heads = 3;
    m.depth = 8;
    m.hf_branch = BranchKind::cnn;
    m.zero_init_classifier = false;
    m.seed = 99;
    const std::string line = model_config_to_json(m);
    EXPECT_EQ(line.find('\n'), std::string::npos);
    EXPECT_EQ(model_config_from_json(line), m);
}

}  // namespace
}  // namespace ynetr

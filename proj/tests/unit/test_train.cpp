#include <gtest/gtest.h>

#include <cmath>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <limits>

#include "ynetr/checkpoint.hpp"
#include "ynetr/phantom.hpp"
#include "ynetr/train.hpp"

namespace ynetr {
namespace {

namespace fs = std::filesystem;

ModelConfig small_model() {
    ModelConfig c;
    c.input_dims = {32, 32, 32};
    c.embed_dim = 32;
    c.depth = 4;
    c.num_heads = 2;
    c.mlp_ratio = 2;
    c.decoder_channels = {16, 16, 8, 8, 4};
    c.seed = 5;
    return c;
}

PhantomSpec small_phantom(std::uint64_t seed) {
    PhantomSpec s;
    s.shape = {32, 32, 28};
    s.spacing_mm = {2.0, 2.0, 2.0};
    s.liver.semi_axes_mm = {26.0, 26.0, 24.0};
    s.tumors.count_min = s.tumors.count_max = 1;
    s.tumors.volume_min_cm3 = 2.0;
    s.tumors.volume_max_cm3 = 4.0;
    s.seed = seed;
    return s;
}

std::vector<TrainingSample> dataset(int n) {
    std::vector<TrainingSample> d;
    for (int i = 0; i < n; ++i) {
        const Phantom p = generate_phantom(small_phantom(100 + i));
        d.push_back(prepare_sample("p" + std::to_string(i), normalize_intensity(p.image), p.label, {32, 32, 32}));
    }
    return d;
}

TrainConfig train_cfg() {
    TrainConfig t;
    t.learning_rate = 1e-3f;
    t.epochs = 1;
    t.steps_per_epoch = 4;
    t.seed = 9;
    return t;
}

SamplerConfig sampler_cfg() {
    SamplerConfig s;
    s.window = {32, 32, 32};
    s.seed = 9;
    return s;
}

std::vector<float> flat_params(const YNetr& m) {
    std::vector<float> out;
    for (const auto& t : m.parameters()) out.insert(out.end(), t.data().begin(), t.data().end());
    return out;
}

bool same_bits(const std::vector<float>& a, const std::vector<float>& b) {
    return a.size() == b.size() && std::memcmp(a.data(), b.data(), a.size() * sizeof(float)) == 0;
}

bool same_history(const std::vector<LossRecord>& a, const std::vector<LossRecord>& b) {
    if (a.size() != b.size()) return false;
    for (std::size_t i = 0; i < a.size(); ++i)
        if (a[i].step != b[i].step || std::memcmp(&a[i].loss, &b[i].loss, sizeof(double)) != 0 ||
            std::memcmp(&a[i].dice, &b[i].dice, sizeof(double)) != 0 || std::memcmp(&a[i].ce, &b[i].ce, sizeof(double)) != 0)
            return false;
    return true;
}

class TrainTest : public ::testing::Test {
protected:
    static void SetUpTestSuite() { data_ = new std::vector<TrainingSample>(dataset(2)); }
    static void TearDownTestSuite() { delete data_; }
    void SetUp() override {
        dir_ = fs::temp_directory_path() /
               ("ynetr_train_" + std::to_string(::getpid()) + "_" +
                ::testing::UnitTest::GetInstance()->current_test_info()->name());
        fs::create_directories(dir_);
    }
    void TearDown() override { fs::remove_all(dir_); }

    static std::vector<TrainingSample>* data_;
    fs::path dir_;
};

std::vector<TrainingSample>* TrainTest::data_ = nullptr;

TEST_F(TrainTest, SameSeedGivesBitwiseIdenticalHistories) {
    auto run = [&] {
        YNetr m(small_model());
        Trainer t(m, train_cfg(), sampler_cfg());
        t.run(*data_, 10);
        return std::pair{t.history(), flat_params(m)};
    };
    const auto a = run(), b = run();
    ASSERT_EQ(a.first.size(), 10u);
    EXPECT_EQ(a.first.front().step, 1);
    EXPECT_EQ(a.first.back().step, 10);
    EXPECT_TRUE(same_history(a.first, b.first));
    EXPECT_TRUE(same_bits(a.second, b.second));
    for (const auto& r : a.first) EXPECT_TRUE(std::isfinite(r.loss));
}

TEST_F(TrainTest, ZeroLearningRateLeavesParametersUnchanged) {
    YNetr m(small_model());
    const auto before = flat_params(m);
    TrainConfig tc = train_cfg();
    tc.learning_rate = 0.0f;
    tc.weight_decay = 0.0f;
    Trainer t(m, tc, sampler_cfg());
    t.run(*data_, 3);
    EXPECT_TRUE(same_bits(before, flat_params(m)));
    EXPECT_THROW(tc.validate(), ConfigError);
}

TEST_F(TrainTest, ResumeMatchesUninterruptedRun) {
    YNetr full(small_model());
    Trainer tf(full, train_cfg(), sampler_cfg());
    tf.run(*data_, 5);

    YNetr part(small_model());
    {
        Trainer tp(part, train_cfg(), sampler_cfg());
        tp.run(*data_, 3);
        save_checkpoint(part, tp.optimizer().state(), dir_ / "mid.ckpt");
    }
    LoadedCheckpoint ck = load_checkpoint(dir_ / "mid.ckpt");
    EXPECT_EQ(ck.state.step, 3);
    Trainer tr(*ck.model, train_cfg(), sampler_cfg());
    tr.optimizer().state() = ck.state;
    tr.run(*data_, 5);
    EXPECT_EQ(tr.steps_done(), 5);
    ASSERT_EQ(tr.history().size(), 2u);
    EXPECT_TRUE(same_history(tr.history(), {tf.history()[3], tf.history()[4]}));
    EXPECT_TRUE(same_bits(flat_params(*ck.model), flat_params(full)));
}

TEST_F(TrainTest, CheckpointRoundTrip) {
    YNetr m(small_model());
    Trainer t(m, train_cfg(), sampler_cfg());
    t.run(*data_, 2);
    save_checkpoint(m, t.optimizer().state(), dir_ / "a.ckpt");

    LoadedCheckpoint ck = load_checkpoint(dir_ / "a.ckpt");
    EXPECT_EQ(ck.model->config(), m.config());
    EXPECT_TRUE(same_bits(flat_params(*ck.model), flat_params(m)));
    ASSERT_EQ(ck.state.m.size(), t.optimizer().state().m.size());
    for (std::size_t i = 0; i < ck.state.m.size(); ++i) {
        EXPECT_TRUE(same_bits(ck.state.m[i], t.optimizer().state().m[i]));
        EXPECT_TRUE(same_bits(ck.state.v[i], t.optimizer().state().v[i]));
    }
    EXPECT_EQ(read_checkpoint_config(dir_ / "a.ckpt"), m.config());

    YNetr other(small_model());
    AdamWState st;
    load_checkpoint_into(other, st, dir_ / "a.ckpt");
    EXPECT_TRUE(same_bits(flat_params(other), flat_params(m)));
    EXPECT_EQ(st.step, 2);
}

TEST_F(TrainTest, FreshModelCheckpointHasNoMoments) {
    YNetr m(small_model());
    save_checkpoint(m, AdamWState{}, dir_ / "fresh.ckpt");
    LoadedCheckpoint ck = load_checkpoint(dir_ / "fresh.ckpt");
    EXPECT_TRUE(ck.state.m.empty());
    EXPECT_EQ(ck.state.step, 0);
    EXPECT_TRUE(same_bits(flat_params(*ck.model), flat_params(m)));
}

TEST_F(TrainTest, ConfigMismatchOnLoadInto) {
    YNetr m(small_model());
    save_checkpoint(m, AdamWState{}, dir_ / "a.ckpt");
    ModelConfig c = small_model();
    c.decoder_channels = {16, 16, 8, 8, 8};
    YNetr other(c);
    AdamWState st;
    EXPECT_THROW(load_checkpoint_into(other, st, dir_ / "a.ckpt"), ConfigMismatch);
}

TEST_F(TrainTest, CorruptPayloadRejected) {
    YNetr m(small_model());
    save_checkpoint(m, AdamWState{}, dir_ / "a.ckpt");
    const auto size = fs::file_size(dir_ / "a.ckpt");
    {
        std::fstream f(dir_ / "a.ckpt", std::ios::in | std::ios::out | std::ios::binary);
        f.seekp(static_cast<std::streamoff>(size - 100));
        char c;
        f.seekg(static_cast<std::streamoff>(size - 100));
        f.get(c);
        f.seekp(static_cast<std::streamoff>(size - 100));
        f.put(static_cast<char>(c ^ 0x5a));
    }
    EXPECT_THROW(load_checkpoint(dir_ / "a.ckpt"), FormatError);
    fs::resize_file(dir_ / "a.ckpt", size - 8);
    EXPECT_THROW(load_checkpoint(dir_ / "a.ckpt"), FormatError);
    EXPECT_THROW(load_checkpoint(dir_ / "absent.ckpt"), IoError);
}

TEST_F(TrainTest, NonFiniteLossAborts) {
    ModelConfig c = small_model();
    c.zero_init_classifier = false;
    YNetr m(c);
    Tensor bias = m.decoder().classifier_bias();
    bias.data()[1] = std::numeric_limits<float>::quiet_NaN();
    Trainer t(m, train_cfg(), sampler_cfg());
    try {
        t.step(*data_);
        FAIL() << "expected NumericError";
    } catch (const NumericError& e) {
        const std::string msg = e.what();
        EXPECT_NE(msg.find("step 1"), std::string::npos) << msg;
        EXPECT_NE(msg.find("nan"), std::string::npos) << msg;
    }
}

TEST_F(TrainTest, EmptyLabelFallsBackToNegative) {
    const Phantom p = generate_phantom(small_phantom(1));
    std::vector<TrainingSample> data;
    data.push_back(prepare_sample("empty", normalize_intensity(p.image), LabelVolume(p.label.shape(), p.label.spacing()),
                                  {32, 32, 32}));
    YNetr m(small_model());
    Trainer t(m, train_cfg(), sampler_cfg());
    std::vector<std::string> logs;
    t.set_logger([&](const std::string& s) { logs.push_back(s); });
    t.run(data, 3);
    ASSERT_EQ(t.draws().size(), 3u);
    EXPECT_TRUE(t.draws()[0].requested_positive);
    EXPECT_TRUE(t.draws()[0].fallback);
    EXPECT_FALSE(t.draws()[0].positive);
    EXPECT_FALSE(t.draws()[1].fallback);
    EXPECT_TRUE(t.draws()[2].fallback);
    EXPECT_EQ(logs.size(), 1u);
}

TEST_F(TrainTest, DrawScheduleAlternatesAndCyclesVolumes) {
    YNetr m(small_model());
    TrainConfig tc = train_cfg();
    tc.batch_size = 2;
    Trainer t(m, tc, sampler_cfg());
    t.run(*data_, 2);
    ASSERT_EQ(t.draws().size(), 4u);
    for (std::size_t d = 0; d < 4; ++d) {
        EXPECT_EQ(t.draws()[d].draw, static_cast<std::int64_t>(d));
        EXPECT_EQ(t.draws()[d].requested_positive, d % 2 == 0);
        EXPECT_EQ(t.draws()[d].volume, (d / 2) % 2);
    }
}

TEST_F(TrainTest, TotalStepsDefault) {
    YNetr m(small_model());
    TrainConfig tc = train_cfg();
    tc.steps_per_epoch = 0;
    tc.epochs = 3;
    Trainer t(m, tc, sampler_cfg());
    EXPECT_EQ(t.total_steps(*data_), 3 * 2 * 2);
}

TEST_F(TrainTest, WindowMustMatchModel) {
    YNetr m(small_model());
    SamplerConfig s = sampler_cfg();
    s.window = {16, 16, 16};
    EXPECT_THROW(Trainer(m, train_cfg(), s), ConfigError);
}

TEST_F(TrainTest, TrainWritesCheckpointAndHistory) {
    YNetr m(small_model());
    TrainConfig tc = train_cfg();
    tc.steps_per_epoch = 2;
    tc.epochs = 2;
    const TrainResult r = train(m, *data_, tc, sampler_cfg(), dir_ / "run.ckpt");
    EXPECT_EQ(r.history.size(), 4u);
    ASSERT_TRUE(fs::exists(dir_ / "run.ckpt"));
    EXPECT_EQ(load_checkpoint(dir_ / "run.ckpt").state.step, 4);
}

TEST_F(TrainTest, LossTableRoundTrip) {
    std::vector<LossRecord> rows{{1, 0.7633, 0.9, 0.62}, {2, 1.0 / 3.0, 1e-9, 123.456}, {3, 0.1f, 0.2f, 0.3f}};
    write_loss_table(rows, dir_ / "loss.csv");
    EXPECT_TRUE(same_history(read_loss_table(dir_ / "loss.csv"), rows));
    std::ifstream in(dir_ / "loss.csv");
    std::string header;
    std::getline(in, header);
    EXPECT_EQ(header, "step,loss,dice_component,ce_component");

    std::ofstream bad(dir_ / "bad.csv");
    bad << "step,loss,dice_component,ce_component\n1,0.5,x,0.2\n";
    bad.close();
    EXPECT_THROW(read_loss_table(dir_ / "bad.csv"), FormatError);
}

TEST_F(TrainTest, PrepareSamplePadsSmallVolumes) {
    const Phantom p = generate_phantom(small_phantom(2));
    const TrainingSample s = prepare_sample("x", normalize_intensity(p.image), p.label, {32, 32, 32});
    EXPECT_EQ(s.label.shape(), (Extent3{32, 32, 32}));
    EXPECT_EQ(s.freq.lf.shape(), (Extent3{32, 32, 32}));
    EXPECT_EQ(crop(s.label, Index3{}, p.label.shape()), p.label);
    EXPECT_THROW(prepare_sample("y", normalize_intensity(p.image), LabelVolume(Extent3{4, 4, 4}, Spacing{}), {32, 32, 32}),
                 ShapeError);
}

}  // namespace
}  // namespace ynetr

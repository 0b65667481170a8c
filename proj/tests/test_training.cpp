#include "lfr/error.hpp"
#include "lfr/synth.hpp"
#include "lfr/training.hpp"

#include "oracles.hpp"
#include "test_util.hpp"

#include <gtest/gtest.h>

#include <fstream>

namespace lfr {
namespace {

NetworkConfig tiny_config() {
    NetworkConfig cfg;
    cfg.blocks_per_section = 1;
    cfg.filters = {4, 8};
    cfg.kernels = {3, 3};
    return cfg;
}

std::vector<TrainingPair> small_dataset(int fields, int ns, std::uint64_t seed) {
    std::vector<LightField> dense;
    for (int i = 0; i < fields; ++i) dense.push_back(test::random_lightfield({36, 1, ns, 2}, seed + std::uint64_t(i)));
    return build_training_set(dense, SamplingPattern::from_name("A"), {ns, ns});
}

TEST(LrSchedule, Staircase) {
    const TrainConfig cfg;
    EXPECT_EQ(lr_at(0, cfg), 1e-4);
    EXPECT_EQ(lr_at(2255, cfg), 1e-4);
    EXPECT_DOUBLE_EQ(lr_at(2256, cfg), 9.6e-5);
    EXPECT_DOUBLE_EQ(lr_at(2 * 2256 + 5, cfg), 1e-4 * 0.96 * 0.96);
    EXPECT_THROW(lr_at(-1, cfg), InvalidArgument);
}

TEST(TrainConfig, Validation) {
    TrainConfig cfg;
    EXPECT_NO_THROW(cfg.validate());
    cfg.batch = 0;
    EXPECT_THROW(cfg.validate(), InvalidArgument);
    cfg = TrainConfig{};
    cfg.lr0 = 0;
    EXPECT_THROW(cfg.validate(), InvalidArgument);
    cfg = TrainConfig{};
    cfg.noise_min = 0.1;
    EXPECT_THROW(cfg.validate(), InvalidArgument);
    cfg = TrainConfig{};
    cfg.beta2 = 1.0;
    EXPECT_THROW(cfg.validate(), InvalidArgument);
}

TEST(Augment, NeutralRangesAreIdentity) {
    const auto data = small_dataset(1, 12, 1);
    TrainConfig cfg;
    cfg.brightness_min = cfg.brightness_max = 1.0;
    cfg.noise_min = cfg.noise_max = 0.0;
    std::mt19937_64 rng(2);
    const TrainingPair out = augment(data[0], rng, cfg);
    EXPECT_TRUE(out.incomplete.epi == data[0].incomplete.epi);
    EXPECT_TRUE(out.intact.epi == data[0].intact.epi);
}

TEST(Augment, BrightnessScalesBothWindows) {
    TrainingPair pair;
    pair.incomplete.epi = Epi(36, 4);
    pair.intact.epi = Epi(36, 4);
    for (auto* e : {&pair.incomplete.epi, &pair.intact.epi})
        for (auto& c : e->pixels.channel) c.setOnes();
    TrainConfig cfg;
    cfg.brightness_min = cfg.brightness_max = 0.5;
    cfg.noise_min = cfg.noise_max = 0.0;
    std::mt19937_64 rng(3);
    const TrainingPair out = augment(pair, rng, cfg);
    for (const auto* e : {&out.incomplete.epi, &out.intact.epi})
        for (const auto& c : e->pixels.channel) EXPECT_TRUE((c.array() == 0.5f).all());
}

TEST(Augment, BlankBandStaysZeroAndValuesStayInRange) {
    const auto data = small_dataset(2, 16, 4);
    TrainConfig cfg;
    cfg.noise_min = 0.05;
    cfg.noise_max = 0.3;
    std::mt19937_64 rng(5);
    for (const auto& pair : data) {
        const TrainingPair out = augment(pair, rng, cfg);
        const Epi& e = out.incomplete.epi;
        for (int r = 0; r < e.rows(); ++r)
            for (const auto& c : e.pixels.channel) {
                if (!e.valid(r)) EXPECT_TRUE((c.row(r).array() == 0.f).all());
                EXPECT_GE(c.row(r).minCoeff(), 0.f);
                EXPECT_LE(c.row(r).maxCoeff(), 1.f);
            }
        // Noise goes on the input only: the target is a clipped rescale.
        const auto& before = pair.intact.epi.pixels.channel[0];
        const auto& after = out.intact.epi.pixels.channel[0];
        Eigen::Index r0 = 0, c0 = 0;
        (before.array() - 0.4f).abs().minCoeff(&r0, &c0);
        const float scale = after(r0, c0) / before(r0, c0);
        EXPECT_GE(scale, 0.8f - 1e-6f);
        EXPECT_LE(scale, 1.2f + 1e-6f);
        EXPECT_LT(((before.array() * scale).min(1.f) - after.array()).abs().maxCoeff(), 1e-6f);
        EXPECT_FALSE(out.incomplete.epi.pixels.channel[0].topRows(9) == out.intact.epi.pixels.channel[0].topRows(9));
    }
}

TEST(Train, EmptyDatasetRejected) {
    EXPECT_THROW(train({}, tiny_config(), TrainConfig{}), InvalidArgument);
}

TEST(Train, DeterministicForSeed) {
    const auto data = small_dataset(2, 12, 6);
    TrainConfig cfg;
    cfg.batch = 3;
    cfg.epochs = 2;
    const TrainResult a = train(data, tiny_config(), cfg);
    const TrainResult b = train(data, tiny_config(), cfg);
    EXPECT_TRUE(a.params == b.params);
    EXPECT_EQ(a.loss, b.loss);
    cfg.seed = 2;
    EXPECT_FALSE(train(data, tiny_config(), cfg).params == a.params);
}

TEST(Train, IterationCountsAndSchedule) {
    const auto data = small_dataset(2, 12, 7);   // 2 pairs per field
    ASSERT_EQ(data.size(), 4u);
    TrainConfig cfg;
    cfg.batch = 3;
    cfg.epochs = 3;
    cfg.decay_every = 2;
    cfg.decay = 0.5;
    const TrainResult r = train(data, tiny_config(), cfg);
    EXPECT_EQ(r.iterations_per_epoch, 2);   // 3 + partial 1
    ASSERT_EQ(r.loss.size(), 6u);
    for (std::size_t i = 0; i < r.lr.size(); ++i) EXPECT_EQ(r.lr[i], lr_at(long(i), cfg));
    EXPECT_EQ(epoch_smoothed_loss(r, 100).size(), 3u);
}

// A rendered plane, not noise: the tiny network cannot memorise iid pixels.
TEST(Train, OverfitsSingleWindow) {
    const auto scene = test::single_plane(2.0, procedural_texture(1, 48, 8, 6), 17.5);
    std::vector<LightField> dense{render_dense_lightfield(scene, {1, 1}, {36, 1, 16, 1}, 1.0)};
    const auto data = build_training_set(dense, SamplingPattern::from_name("A"), {16, 16});
    ASSERT_EQ(data.size(), 1u);
    TrainConfig cfg;
    cfg.batch = 1;
    cfg.epochs = 200;
    cfg.augment = false;
    cfg.lr0 = 1e-3;
    const TrainResult r = train(data, tiny_config(), cfg);
    EXPECT_LT(r.loss.back(), 0.1 * r.loss.front());
}

TEST(EpochSmoothedLoss, MeansOfTrailingWindow) {
    TrainResult r;
    r.iterations_per_epoch = 4;
    r.loss = {8, 8, 4, 4, 2, 2, 2, 2};
    EXPECT_EQ(epoch_smoothed_loss(r, 2), (std::vector<double>{4, 2}));
    EXPECT_EQ(epoch_smoothed_loss(r, 100), (std::vector<double>{6, 4}));
}

TEST(LossCsv, HeaderAndRows) {
    test::TempDir dir("losscsv");
    TrainResult r;
    r.iterations_per_epoch = 2;
    r.loss = {0.5, 0.25, 0.125};
    r.lr = {1e-4, 1e-4, 1e-4};
    write_loss_csv(r, dir / "loss.csv");
    std::ifstream in(dir / "loss.csv");
    std::string line;
    std::getline(in, line);
    EXPECT_EQ(line, "iteration,epoch,lr,loss");
    int rows = 0;
    std::string last;
    while (std::getline(in, line)) {
        ++rows;
        last = line;
    }
    EXPECT_EQ(rows, 3);
    EXPECT_EQ(last, "2,1,0.0001,0.125");
}

TEST(ConfigFile, OverridesOnlyGivenKeys) {
    test::TempDir dir("cfg");
    std::ofstream(dir / "c.json") << R"({"network": {"filters": [8, 8], "kernels": [5, 3]}, "train": {"lr0": 0.001, "seed": 9}})";
    NetworkConfig net;
    TrainConfig tc;
    read_config_file(dir / "c.json", net, tc);
    EXPECT_EQ(net.filters, (std::vector<int>{8, 8}));
    EXPECT_EQ(net.blocks_per_section, 3);
    EXPECT_EQ(tc.lr0, 0.001);
    EXPECT_EQ(tc.seed, 9u);
    EXPECT_EQ(tc.batch, 30);

    std::ofstream(dir / "bad.json") << R"({"network": {"kernels": [4]}})";
    NetworkConfig net2;
    TrainConfig tc2;
    EXPECT_THROW(read_config_file(dir / "bad.json", net2, tc2), InvalidArgument);
    std::ofstream(dir / "broken.json") << "{";
    EXPECT_THROW(read_config_file(dir / "broken.json", net2, tc2), FormatError);
    EXPECT_THROW(read_config_file(dir / "none.json", net2, tc2), IoError);
}

} // namespace
} // namespace lfr

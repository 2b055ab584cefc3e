#include <gtest/gtest.h>

#include <filesystem>

#include "support.hpp"
#include "xleak/error.hpp"
#include "xleak/zoo.hpp"

using namespace xleak;
using namespace xleak::testing;

namespace {

TrainConfig quick(std::size_t epochs, double wd = 1e-4, std::uint64_t seed = 1) {
    TrainConfig c;
    c.epochs = epochs;
    c.learning_rate = 0.05;
    c.weight_decay = wd;
    c.batch_size = 16;
    c.seed = seed;
    return c;
}

}  // namespace

TEST(Train, LinearSeparableReachesPerfectAccuracy) {
    const Dataset d = make_synthetic(2, 2, 100, 10.0, 7);
    const auto tm = train("linear", d, d, quick(30));
    EXPECT_GE(tm.train_accuracy, 0.99);
}

TEST(Train, ZeroEpochsRejected) {
    const Dataset d = make_synthetic(2, 2, 20, 1.0, 7);
    EXPECT_THROW(train("linear", d, d, quick(0)), Error);
}

TEST(Train, OverfitRegimeOpensGeneralizationGap) {
    const Dataset all = make_synthetic(2, 16, 600, 1.0, 3);
    std::vector<std::size_t> a(100), b(500);
    for (std::size_t i = 0; i < 100; ++i) a[i] = i;
    for (std::size_t i = 0; i < 500; ++i) b[i] = 100 + i;
    TrainConfig c = quick(300, 0.0);
    c.schedule = LrSchedule::constant;
    const auto tm = train("mlp_a", all.subset(a), all.subset(b), c);
    EXPECT_GE(tm.train_accuracy, 0.99);
    EXPECT_GE(tm.train_accuracy - tm.test_accuracy, 0.1);
}

TEST(Train, SameSeedBitIdentical) {
    const Dataset d = make_synthetic(3, 4, 60, 2.0, 2);
    EXPECT_EQ(train("mlp_b", d, d, quick(5)).model, train("mlp_b", d, d, quick(5)).model);
}

TEST(Train, StopsAtTargetTestAccuracy) {
    const Dataset d = make_synthetic(2, 2, 200, 6.0, 2);
    TrainConfig c = quick(200);
    c.target_test_accuracy = 0.9;
    const auto tm = train("linear", d, d, c);
    EXPECT_LT(tm.epochs_run, 200u);
    EXPECT_GE(tm.test_accuracy, 0.9);
}

TEST(Train, CosineScheduleEndpoints) {
    TrainConfig c = quick(50);
    EXPECT_DOUBLE_EQ(learning_rate_at(c, 0), c.learning_rate);
    EXPECT_LE(learning_rate_at(c, 49), 0.01 * c.learning_rate);
}

TEST(Train, WeightDecayShrinksParameters) {
    const Dataset d = make_synthetic(2, 4, 80, 1.0, 5);
    double prev = INFINITY;
    for (double wd : {0.0, 1e-3, 1e-2}) {
        const double norm = train("mlp_a", d, d, quick(20, wd)).model.parameter_l2_norm();
        EXPECT_LE(norm, prev) << "weight decay " << wd;
        prev = norm;
    }
}

TEST(Train, TinyCnnOnSquareFeatureCount) {
    const Dataset d = make_synthetic(2, 16, 40, 3.0, 5);
    EXPECT_EQ(architecture_input_shape("tiny_cnn", d.sample_shape), (Shape{1, 4, 4}));
    const auto tm = train("tiny_cnn", d, d, quick(3));
    EXPECT_EQ(tm.model.input_shape(), (Shape{1, 4, 4}));
    EXPECT_THROW(architecture_input_shape("tiny_cnn", Shape{15}), Error);
}

TEST(Accuracy, PerfectAndConstantPredictors) {
    std::vector<Tensor> xs;
    std::vector<int> ys;
    for (int i = 0; i < 10; ++i) {
        const int y = i % 2;
        xs.push_back(Tensor::vector({y == 0 ? 1.0 : 0.0, y == 1 ? 1.0 : 0.0}));
        ys.push_back(y);
    }
    const Dataset d = make_dataset("onehot", {2}, 2, xs, ys);
    EXPECT_DOUBLE_EQ(accuracy(linear_model({{1, 0}, {0, 1}}), d), 1.0);
    Model constant = linear_model({{0, 0}, {0, 0}});
    constant.layer(0).bias = {1.0, 0.0};
    EXPECT_DOUBLE_EQ(accuracy(constant, d), 0.5);
}

TEST(Accuracy, MatchesHandCount) {
    const Dataset d = make_synthetic(2, 2, 10, 0.5, 11);
    const Model m = linear_model({{1.0, 0.2}, {-0.3, 1.0}});
    std::size_t ok = 0;
    for (std::size_t i = 0; i < 10; ++i) {
        const auto r = d.row(i);
        const double s0 = r[0] + 0.2 * r[1], s1 = -0.3 * r[0] + r[1];
        ok += (s1 > s0 ? 1 : 0) == d.y[i];
    }
    EXPECT_DOUBLE_EQ(accuracy(m, d), double(ok) / 10.0);
}

TEST(Persistence, TrainedModelRoundTrip) {
    const Dataset d = make_synthetic(2, 4, 40, 2.0, 5);
    const auto tm = train("mlp_a", d, d, quick(3));
    const auto stem = std::filesystem::temp_directory_path() / "xleak_tests" / "model";
    std::filesystem::create_directories(stem.parent_path());
    save_trained_model(stem, tm);
    const auto back = load_trained_model(stem);
    EXPECT_EQ(back.model, tm.model);
    EXPECT_EQ(back.architecture, "mlp_a");
    EXPECT_EQ(train_config_to_json(back.config), train_config_to_json(tm.config));
}

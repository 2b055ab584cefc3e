#include <gtest/gtest.h>

#include <algorithm>
#include <filesystem>
#include <fstream>
#include <limits>
#include <set>
#include <sstream>

#include "support.hpp"
#include "xleak/attack.hpp"
#include "xleak/attribution_io.hpp"
#include "xleak/error.hpp"
#include "xleak/report.hpp"
#include "xleak/roc.hpp"

using namespace xleak;
using namespace xleak::testing;
namespace fs = std::filesystem;

namespace {

struct Scored {
    std::vector<double> scores;
    std::vector<int> labels;
};

// Integer-valued scores on a small range so that ties are common.
Scored random_scored(std::uint64_t seed, std::size_t n) {
    Rng rng = make_rng(seed, 7);
    std::uniform_int_distribution<int> score(0, 12), label(0, 1);
    Scored s;
    for (std::size_t i = 0; i < n; ++i) {
        s.scores.push_back(double(score(rng)));
        s.labels.push_back(label(rng));
    }
    s.labels[0] = 1;
    s.labels[1] = 0;
    return s;
}

FeatureRows gaussian_rows(std::size_t n, std::size_t d, double mean, std::uint64_t seed) {
    Rng rng = make_rng(seed, 3);
    std::normal_distribution<double> g(mean, 1.0);
    FeatureRows rows(n, std::vector<double>(d));
    for (auto& r : rows)
        for (auto& v : r) v = g(rng);
    return rows;
}

}  // namespace

TEST(Roc, CurveAucAndMlsMatchEnumerationOracles) {
    for (std::uint64_t seed = 0; seed < 50; ++seed) {
        const auto s = random_scored(seed, 2 + seed * 4);
        const auto roc = roc_curve(s.scores, s.labels);
        std::uint64_t P = 0, N = 0;
        for (int l : s.labels) (l ? P : N) += 1;
        std::set<double, std::greater<>> thresholds(s.scores.begin(), s.scores.end());

        // Curve: origin, then one point per distinct score, counting score >= t.
        ASSERT_EQ(roc.points.size(), thresholds.size() + 1);
        EXPECT_EQ(roc.points[0].tp, 0u);
        EXPECT_EQ(roc.points[0].fp, 0u);
        std::size_t k = 1;
        for (double t : thresholds) {
            std::uint64_t tp = 0, fp = 0;
            for (std::size_t i = 0; i < s.scores.size(); ++i)
                if (s.scores[i] >= t) (s.labels[i] ? tp : fp) += 1;
            EXPECT_EQ(roc.points[k].threshold, t);
            EXPECT_EQ(roc.points[k].tp, tp);
            EXPECT_EQ(roc.points[k].fp, fp);
            ++k;
        }
        EXPECT_EQ(roc.points.back().tpr, 1.0);
        EXPECT_EQ(roc.points.back().fpr, 1.0);

        // AUC: pairwise comparisons.
        std::uint64_t twice = 0;
        for (std::size_t i = 0; i < s.scores.size(); ++i)
            for (std::size_t j = 0; j < s.scores.size(); ++j)
                if (s.labels[i] == 1 && s.labels[j] == 0)
                    twice += s.scores[i] > s.scores[j] ? 2 : s.scores[i] == s.scores[j] ? 1 : 0;
        EXPECT_EQ(auc(roc), double(twice) / (2.0 * double(P) * double(N))) << seed;

        // MLS: best TPR over thresholds (including +inf) with FPR <= epsilon.
        double prev = -1.0;
        for (double eps : {0.0, 0.001, 0.01, 0.05, 0.1, 0.3, 0.5, 0.99}) {
            double best = 0.0;
            for (std::size_t i = 0; i <= thresholds.size(); ++i) {
                const double t = i == 0 ? std::numeric_limits<double>::infinity() : *std::next(thresholds.begin(), i - 1);
                std::uint64_t tp = 0, fp = 0;
                for (std::size_t j = 0; j < s.scores.size(); ++j)
                    if (s.scores[j] >= t) (s.labels[j] ? tp : fp) += 1;
                if (double(fp) / double(N) <= eps) best = std::max(best, double(tp) / double(P));
            }
            const double got = mls(roc, eps);
            EXPECT_EQ(got, best) << seed << " eps " << eps;
            EXPECT_GE(got, prev);
            prev = got;
        }
    }
}

TEST(Roc, PerfectAndInvertedScores) {
    const std::vector<double> s{4, 3, 2, 1};
    EXPECT_EQ(auc(roc_curve(s, std::vector<int>{1, 1, 0, 0})), 1.0);
    EXPECT_EQ(auc(roc_curve(s, std::vector<int>{0, 0, 1, 1})), 0.0);
    EXPECT_EQ(mls(roc_curve(s, std::vector<int>{1, 1, 0, 0}), 0.0), 1.0);
    EXPECT_EQ(auc(roc_curve(std::vector<double>{1, 1}, std::vector<int>{1, 0})), 0.5);
}

TEST(Roc, RejectsSingleClassAndBadEpsilon) {
    EXPECT_THROW(roc_curve(std::vector<double>{1, 2}, std::vector<int>{1, 1}), Error);
    const auto roc = roc_curve(std::vector<double>{1, 2}, std::vector<int>{0, 1});
    EXPECT_THROW(mls(roc, 1.0), Error);
    EXPECT_THROW(mls(roc, -0.1), Error);
}

TEST(Roc, BalancedAccuracyByHand) {
    const std::vector<double> s{0.9, 0.2, 0.7, 0.6};
    const std::vector<int> l{1, 1, 0, 0};
    // Threshold 0.5: TPR 1/2, TNR 0.
    EXPECT_DOUBLE_EQ(balanced_accuracy(s, l, 0.5), 0.25);
    EXPECT_DOUBLE_EQ(balanced_accuracy(s, l, 0.8), 0.75);
}

TEST(Roc, CsvHasHeaderAndOneRowPerPoint) {
    const auto roc = roc_curve(std::vector<double>{1, 2, 2, 3}, std::vector<int>{0, 1, 0, 1});
    const auto p = fs::temp_directory_path() / "xleak_tests" / "roc.csv";
    fs::create_directories(p.parent_path());
    write_roc_csv(p, roc);
    const auto t = read_csv_table(p);
    EXPECT_EQ(t.header, (std::vector<std::string>{"threshold", "fpr", "tpr"}));
    EXPECT_EQ(t.rows.size(), roc.points.size());
    EXPECT_EQ(t.rows[0][0], "inf");
}

TEST(Attack, UntrainedAttackIsCalibratedToChance) {
    for (std::uint64_t r = 0; r < 20; ++r) {
        const auto members = gaussian_rows(1000, 8, 0.0, 2 * r);
        const auto nonmembers = gaussian_rows(1000, 8, 0.0, 2 * r + 1);
        const auto ev = evaluate_attack(untrained_attack(8, AttackArch::logistic, r), members, nonmembers, 0.01);
        EXPECT_LE(ev.mls, 0.05) << "resample " << r;
    }
}

TEST(Attack, LearnsSeparableAttributions) {
    const auto ds = make_attack_dataset(gaussian_rows(200, 4, 1.5, 1), gaussian_rows(200, 4, -1.5, 2));
    EXPECT_EQ(ds.size(), 400u);
    EXPECT_EQ(ds.labels.front(), 1);
    EXPECT_EQ(ds.labels.back(), 0);
    AttackSpec spec;
    const auto ta = train_attack(ds, spec, 3, 0.01);
    EXPECT_GE(ta.validation_accuracy, 0.95);
    const auto ev = evaluate_attack(ta.model, gaussian_rows(300, 4, 1.5, 5), gaussian_rows(300, 4, -1.5, 6), 0.01);
    EXPECT_GE(ev.auc, 0.97);
    EXPECT_GT(ev.mls, 0.5);
}

TEST(Attack, ScoresAreStandardisedLogOdds) {
    AttackModel a = untrained_attack(2, AttackArch::logistic, 1);
    a.mean = {1.0, -1.0};
    a.scale = {2.0, 0.5};
    const std::vector<double> x{3.0, 0.0};
    const auto logits = predict(a.net, Tensor::vector({(3.0 - 1.0) / 2.0, (0.0 + 1.0) / 0.5}));
    EXPECT_NEAR(a.score(x), logits[1] - logits[0], 1e-12);
}

namespace {

AttackChannel separable_channel(double shift, std::uint64_t seed) {
    AttackChannel ch;
    ch.shadow_members = gaussian_rows(150, 4, shift, seed);
    ch.shadow_nonmembers = gaussian_rows(150, 4, -shift, seed + 1);
    ch.eval_members = gaussian_rows(100, 4, shift, seed + 2);
    ch.eval_nonmembers = gaussian_rows(100, 4, -shift, seed + 3);
    return ch;
}

}  // namespace

TEST(AttackProtocol, BestSeedChosenOnValidationOnly) {
    AttackProtocol p;
    p.seeds = 6;
    p.epsilon = 0.05;
    p.seed = 4;
    p.spec.train.epochs = 10;
    const auto rep = run_attack_protocol(separable_channel(0.4, 10), p);
    ASSERT_EQ(rep.seeds.size(), 6u);
    std::size_t best = 0;
    for (std::size_t i = 1; i < rep.seeds.size(); ++i) {
        const auto& a = rep.seeds[i];
        const auto& b = rep.seeds[best];
        if (a.validation_tpr > b.validation_tpr ||
            (a.validation_tpr == b.validation_tpr && a.validation_accuracy > b.validation_accuracy))
            best = i;
    }
    EXPECT_EQ(rep.best_seed, best);
    EXPECT_EQ(rep.mls, rep.seeds[best].mls);
    EXPECT_EQ(rep.auc, rep.seeds[best].auc);
    for (std::size_t i = 0; i < rep.seeds.size(); ++i) {
        const bool listed = std::count(rep.better_unselected.begin(), rep.better_unselected.end(), i) > 0;
        EXPECT_EQ(listed, rep.seeds[i].mls > rep.mls) << i;
    }
    EXPECT_EQ(rep.attack_input_dim, 4u);
}

TEST(AttackProtocol, Deterministic) {
    AttackProtocol p;
    p.seeds = 3;
    p.epsilon = 0.05;
    p.spec.train.epochs = 5;
    const auto ch = separable_channel(0.5, 3);
    EXPECT_EQ(run_attack_protocol(ch, p).to_json(), run_attack_protocol(ch, p).to_json());
}

TEST(AttackProtocol, JsonRoundTrip) {
    AttackProtocol p;
    p.seeds = 7;
    p.epsilon = 0.02;
    p.spec.arch = AttackArch::mlp;
    p.spec.hidden = 12;
    p.seed = 99;
    EXPECT_EQ(attack_protocol_to_json(attack_protocol_from_json(attack_protocol_to_json(p))),
              attack_protocol_to_json(p));
}

TEST(AttackChannelTest, EvaluationSetsAreCappedPrefixes) {
    const Dataset data = make_synthetic(2, 4, 400, 2.0, 1);
    SplitSpec s;
    s.target_train = 60;
    s.target_test = 90;
    s.shadow_train = 50;
    s.shadow_test = 50;
    s.seed = 2;
    const auto bundle = split(data, s);
    const Model m = random_mlp(1, 4, 8, 2);
    ExplainContext ctx;
    const auto ch = collect_channel(m, m, bundle, ExplainerKind::saliency, {}, ctx, 40);
    EXPECT_EQ(ch.eval_members.size(), 40u);
    EXPECT_EQ(ch.eval_nonmembers.size(), 40u);
    EXPECT_EQ(ch.shadow_members.size(), 50u);
    const auto first = explain(m, bundle.target_train.data.sample(0), ExplainerKind::saliency, {}, ctx);
    EXPECT_EQ(ch.eval_members[0], first.values.data);
    const auto uncapped = collect_channel(m, m, bundle, ExplainerKind::saliency, {}, ctx, 1000);
    EXPECT_EQ(uncapped.eval_members.size(), 60u);
    EXPECT_EQ(uncapped.eval_nonmembers.size(), 60u);
}

TEST(AttributionIo, BinaryRoundTripIsExact) {
    AttributionSet set;
    set.meta = {{"model", "target"}, {"split", "D_train_target"}};
    const Model m = random_mlp(2, 4, 8, 3);
    ExplainerParams ig;
    ig.set("n_steps", std::int64_t{8});
    for (std::uint64_t i = 0; i < 3; ++i) {
        auto a = explain(m, random_tensor({4}, i), i == 1 ? ExplainerKind::integrated_gradients : ExplainerKind::saliency,
                         i == 1 ? ig : ExplainerParams{});
        a.label = std::int8_t(i % 2);
        set.maps.push_back(a);
    }
    std::stringstream ss;
    write_attributions(ss, set);
    const auto back = read_attributions(ss);
    EXPECT_EQ(back.meta, set.meta);
    ASSERT_EQ(back.maps.size(), 3u);
    for (std::size_t i = 0; i < 3; ++i) {
        EXPECT_EQ(back.maps[i].values, set.maps[i].values);
        EXPECT_EQ(back.maps[i].method, set.maps[i].method);
        EXPECT_EQ(back.maps[i].params, set.maps[i].params);
        EXPECT_EQ(back.maps[i].class_index, set.maps[i].class_index);
        EXPECT_EQ(back.maps[i].label, set.maps[i].label);
        EXPECT_EQ(back.maps[i].wall_time_seconds, set.maps[i].wall_time_seconds);
    }
}

TEST(AttributionIo, RejectsForeignBytes) {
    std::stringstream ss("definitely not an attribution file");
    EXPECT_THROW(read_attributions(ss), Error);
}

TEST(AttributionIo, CsvExportOmitsTimings) {
    AttributionSet set;
    AttributionMap a;
    a.values = Tensor::vector({1.5, -2.0});
    a.class_index = 1;
    a.label = 0;
    a.wall_time_seconds = 123.0;
    set.maps.push_back(a);
    const auto p = fs::temp_directory_path() / "xleak_tests" / "attr.csv";
    fs::create_directories(p.parent_path());
    export_attributions_csv(p, set);
    const auto t = read_csv_table(p);
    EXPECT_EQ(t.header, (std::vector<std::string>{"index", "method", "class_index", "label", "v0", "v1"}));
    ASSERT_EQ(t.rows.size(), 1u);
    EXPECT_EQ(t.rows[0], (std::vector<std::string>{"0", "saliency", "1", "0", "1.5", "-2"}));
}

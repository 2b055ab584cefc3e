#include <gtest/gtest.h>

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <set>

#include "support.hpp"
#include "xleak/error.hpp"
#include "xleak/hardening.hpp"
#include "xleak/report.hpp"
#include "xleak/utility.hpp"
#include "xleak/zoo.hpp"

using namespace xleak;
using namespace xleak::testing;
namespace fs = std::filesystem;

// ---- utility ----

TEST(Sensitivity, ConstantExplanationHasZeroSensitivity) {
    const Model m = ref_linear();
    const auto fn = explainer_fn(m, ExplainerKind::saliency, {}, {});
    for (auto est : {SensitivityEstimator::monte_carlo, SensitivityEstimator::ascent}) {
        SensitivityConfig cfg;
        cfg.estimator = est;
        cfg.samples = 5;
        EXPECT_EQ(sensitivity(fn, ref_x(), cfg).value, 0.0) << estimator_name(est);
    }
}

TEST(Sensitivity, LinearInputTimesGradientIsBoundedByTheBall) {
    // E(x) = w*x, so ||E(x+d) - E(x)||_2 = ||w*d||_2 <= r ||w||_2.
    const Model m = linear_model({{1.0, -2.0}});
    const Tensor x = Tensor::vector({2.0, 1.0});
    const auto fn = explainer_fn(m, ExplainerKind::input_x_gradient, {}, {});
    const double bound = 0.1 * std::sqrt(1.0 + 4.0);
    for (auto est : {SensitivityEstimator::monte_carlo, SensitivityEstimator::grid, SensitivityEstimator::ascent}) {
        SensitivityConfig cfg;
        cfg.estimator = est;
        cfg.samples = 16;
        cfg.seed = 5;
        const auto s = sensitivity(fn, x, cfg);
        EXPECT_GT(s.value, 0.0) << estimator_name(est);
        EXPECT_LE(s.value, bound + 1e-12) << estimator_name(est);
        // Grid includes the ball's corners, which attain the bound.
        if (est == SensitivityEstimator::grid) EXPECT_NEAR(s.value, bound, 1e-12);
    }
}

TEST(Sensitivity, CurveIsNonDecreasingInRadius) {
    const Model m = random_mlp(3, 5, 12, 3);
    const auto fn = explainer_fn(m, ExplainerKind::saliency, {}, {});
    const std::vector<double> radii{0.01, 0.05, 0.1, 0.5, 1.0};
    const auto curve = sensitivity_curve(fn, random_tensor({5}, 2), radii, 32, 7);
    ASSERT_EQ(curve.size(), radii.size());
    for (std::size_t i = 1; i < curve.size(); ++i) EXPECT_GE(curve[i], curve[i - 1]);
}

TEST(Sensitivity, DatasetMeanIgnoresSampleOrder) {
    const Model m = random_mlp(3, 5, 12, 3);
    const auto fn = explainer_fn(m, ExplainerKind::saliency, {}, {});
    std::vector<Tensor> xs;
    for (std::uint64_t i = 0; i < 6; ++i) xs.push_back(random_tensor({5}, 40 + i));
    SensitivityConfig cfg;
    cfg.samples = 8;
    const auto a = dataset_sensitivity(fn, xs, cfg);
    std::reverse(xs.begin(), xs.end());
    const auto b = dataset_sensitivity(fn, xs, cfg);
    EXPECT_EQ(a.mean.value, b.mean.value);
    std::vector<double> va = a.values, vb = b.values;
    std::reverse(vb.begin(), vb.end());
    EXPECT_EQ(va, vb);
}

TEST(Sensitivity, SharedNoiseAddsNoSensitivity) {
    const Model m = ref_linear();
    const auto base = explainer_fn(m, ExplainerKind::input_x_gradient, {}, {});
    TransformParams theta;
    theta.sigma = 3.0;
    theta.seed = 8;
    const ExplanationFn noisy = [&](const Tensor& x, std::uint64_t id) {
        return apply_transforms(base(x, id), theta, id);
    };
    SensitivityConfig cfg;
    cfg.samples = 10;
    EXPECT_NEAR(sensitivity(noisy, ref_x(), cfg, 4).value, sensitivity(base, ref_x(), cfg, 4).value, 1e-12);
}

TEST(DeltaSTest, PercentAndDirection) {
    const auto gain = delta_s(2.0, 1.0);
    EXPECT_DOUBLE_EQ(gain.percent, 50.0);
    EXPECT_EQ(gain.direction, UtilityDirection::utility_gain);
    const auto loss = delta_s(2.0, 3.0);
    EXPECT_DOUBLE_EQ(loss.percent, 50.0);
    EXPECT_EQ(loss.direction, UtilityDirection::utility_loss);
    EXPECT_EQ(delta_s(1.0, 1.0).direction, UtilityDirection::unchanged);
    try {
        delta_s(0.0, 1.0);
        FAIL();
    } catch (const Error& e) {
        EXPECT_EQ(e.kind(), ErrorKind::undefined_baseline);
    }
}

// ---- transforms ----

TEST(Transforms, DegenerateParametersAreIdentity) {
    const std::vector<double> phi{-3.0, -0.0, 0.25, 7.5, -1e-300};
    for (const auto& order : all_orders())
        for (auto mode : {MaskMode::signed_threshold, MaskMode::magnitude}) {
            TransformParams t;
            t.order = order;
            t.mask_mode = mode;
            EXPECT_EQ(apply_transforms(phi, t, 3), phi) << order_string(order);
        }
}

TEST(Sensitivity, GridNeedsAtMostTwoCoordinates) {
    const Model m = ref_linear();
    SensitivityConfig cfg;
    cfg.estimator = SensitivityEstimator::grid;
    EXPECT_THROW(sensitivity(explainer_fn(m, ExplainerKind::saliency, {}, {}), ref_x(), cfg), Error);
}

TEST(Transforms, ClipMaskOrderWitness) {
    TransformParams t;
    t.c_max = 1.0;
    t.tau = 1.5;
    const std::vector<double> phi{2.0};
    t.order = parse_order("CM");
    EXPECT_EQ(apply_transforms(phi, t), (std::vector<double>{0.0}));
    t.order = parse_order("MC");
    EXPECT_EQ(apply_transforms(phi, t), (std::vector<double>{1.0}));
}

TEST(Transforms, MaskModes) {
    TransformParams t;
    t.order = parse_order("M");
    t.tau = 1.0;
    const std::vector<double> phi{-2.0, 0.5, 1.5};
    EXPECT_EQ(apply_transforms(phi, t), (std::vector<double>{0.0, 0.0, 1.5}));
    t.mask_mode = MaskMode::magnitude;
    EXPECT_EQ(apply_transforms(phi, t), (std::vector<double>{-2.0, 0.0, 1.5}));
}

TEST(Transforms, NoiseDependsOnSeedAndSampleOnly) {
    TransformParams t;
    t.order = parse_order("N");
    t.sigma = 1.0;
    t.seed = 5;
    const std::vector<double> phi(6, 0.0);
    EXPECT_EQ(apply_transforms(phi, t, 1), apply_transforms(phi, t, 1));
    EXPECT_NE(apply_transforms(phi, t, 1), apply_transforms(phi, t, 2));
    const std::vector<double> other{1, 2, 3, 4, 5, 6};
    const auto a = apply_transforms(phi, t, 9), b = apply_transforms(other, t, 9);
    for (std::size_t i = 0; i < 6; ++i) EXPECT_NEAR(b[i] - a[i], other[i], 1e-12);
}

TEST(Transforms, ValidationRejectsBadParameters) {
    TransformParams t;
    t.sigma = -1.0;
    EXPECT_THROW(t.validate(), Error);
    t.sigma = 0.0;
    t.c_min = 2.0;
    t.c_max = 1.0;
    EXPECT_THROW(t.validate(), Error);
}

TEST(Transforms, JsonRoundTripKeepsInfinities) {
    TransformParams t;
    t.sigma = 0.3;
    t.c_max = 4.0;
    t.order = parse_order("NC");
    t.mask_mode = MaskMode::magnitude;
    t.seed = 77;
    const auto j = t.to_json();
    EXPECT_EQ(j.at("c_min"), "-inf");
    EXPECT_EQ(j.at("tau"), "-inf");
    const auto back = TransformParams::from_json(j);
    EXPECT_EQ(back.to_json(), j);
    EXPECT_EQ(back.c_min, -kInf);
}

TEST(Orders, FifteenDistinctSequencesShortestFirst) {
    const auto orders = all_orders();
    ASSERT_EQ(orders.size(), 15u);
    std::set<std::string> seen;
    for (std::size_t i = 0; i < orders.size(); ++i) {
        seen.insert(order_string(orders[i]));
        if (i) EXPECT_LE(orders[i - 1].size(), orders[i].size());
        EXPECT_EQ(parse_order(order_string(orders[i])), orders[i]);
    }
    EXPECT_EQ(seen.size(), 15u);
    EXPECT_THROW(parse_order("CC"), Error);
    EXPECT_THROW(parse_order("X"), Error);
    EXPECT_THROW(parse_order(""), Error);
}

// ---- search ----

namespace {

TrialRecord rec(std::size_t i, double mls, double util, double pre_util = 1.0) {
    TrialRecord r;
    r.trial = i;
    r.mls = mls;
    r.utility = util;
    const auto d = delta_s(pre_util, util);
    r.delta_s_percent = d.percent;
    r.direction = d.direction;
    return r;
}

}  // namespace

TEST(Pareto, FrontMatchesDominanceOracle) {
    for (std::uint64_t seed = 0; seed < 20; ++seed) {
        Rng rng = make_rng(seed);
        std::vector<TrialRecord> trials;
        for (std::size_t i = 0; i < 15; ++i)
            trials.push_back(rec(i, std::round(uniform(rng, 0, 5)) / 10.0, std::round(uniform(rng, 0.5, 4)) / 2.0));
        std::vector<std::size_t> oracle;
        for (std::size_t i = 0; i < trials.size(); ++i) {
            bool keep = true;
            for (std::size_t j = 0; j < trials.size() && keep; ++j) {
                const auto &a = trials[j], &b = trials[i];
                const bool dominates = a.mls <= b.mls && a.utility <= b.utility && (a.mls < b.mls || a.utility < b.utility);
                const bool earlier_twin = j < i && a.mls == b.mls && a.utility == b.utility;
                keep = !dominates && !earlier_twin;
            }
            if (keep) oracle.push_back(i);
        }
        EXPECT_EQ(pareto_front(trials).members, oracle) << seed;
        const auto best = select_best(trials);
        EXPECT_TRUE(std::count(oracle.begin(), oracle.end(), best)) << seed;
    }
}

TEST(Pareto, SelectBestUsesSlackThenSensitivity) {
    std::vector<TrialRecord> t{rec(0, 0.0205, 3.0), rec(1, 0.0200, 2.0), rec(2, 0.0208, 1.0), rec(3, 0.5, 0.5)};
    // Trials 0 and 2 lie within the 0.001 slack of the minimum; 2 has the lowest sensitivity.
    EXPECT_EQ(select_best(t), 2u);
    t[2].mls = 0.0211;
    EXPECT_EQ(select_best(t), 1u);
}

TEST(SearchSpaceTest, SampledAndMutatedPointsStayInside) {
    SearchSpace s;
    s.dims.push_back({"a", ParamType::real, -1.0, 2.0, {}});
    s.dims.push_back({"b", ParamType::integer, 1, 4, {}});
    s.dims.push_back({"c", ParamType::categorical, 0, 0, {std::string("x"), std::string("y")}});
    s.fixed.set("f", std::int64_t{3});
    Rng rng = make_rng(1);
    for (int i = 0; i < 500; ++i) {
        const auto p = sample_point(s, rng);
        EXPECT_TRUE(s.contains(p));
        EXPECT_EQ(p.get_int("f"), 3);
        const auto q = mutate_point(s, p, rng);
        EXPECT_TRUE(s.contains(q));
    }
    EXPECT_EQ(SearchSpace::from_json(s.to_json()).to_json(), s.to_json());
}

TEST(SearchSpaceTest, DefaultTransformRanges) {
    const FeatureRows rows{{-2.0, 1.0, 0.5}, {3.0, -1.0, 0.0}};
    const auto s = default_transform_space(rows);
    auto dim = [&](const std::string& n) {
        return *std::find_if(s.dims.begin(), s.dims.end(), [&](const Dimension& d) { return d.name == n; });
    };
    EXPECT_EQ(dim("c_min").lo, -2.0);
    EXPECT_EQ(dim("c_min").hi, 0.0);
    EXPECT_EQ(dim("c_max").lo, 0.0);
    EXPECT_EQ(dim("c_max").hi, 3.0);
    EXPECT_EQ(dim("sigma").lo, 0.0);
    EXPECT_GT(dim("sigma").hi, 0.0);
    EXPECT_EQ(dim("tau").lo, 0.0);
}

TEST(Optimize, LogHasOneRowPerTrialAndBestIsOnFront) {
    SearchSpace s;
    s.dims.push_back({"u", ParamType::real, 0.0, 1.0, {}});
    const Baseline base{0.5, 0.7, 0.6, 1.0};
    // Leakage falls and sensitivity rises with u: a genuine trade-off.
    const TrialObjective obj = [](const ExplainerParams& p, std::uint64_t) {
        const double u = p.get_real("u");
        return TrialOutcome{0.5 * (1 - u), 0.5, 0.5, 1.0 + u};
    };
    SearchConfig cfg;
    cfg.trials = 12;
    cfg.n_explore = 4;
    cfg.seed = 3;
    const auto r = optimize(s, cfg, base, obj);
    ASSERT_EQ(r.trials.size(), 12u);
    for (std::size_t i = 0; i < 12; ++i) EXPECT_EQ(r.trials[i].explore, i < 4);
    EXPECT_TRUE(std::count(r.front.members.begin(), r.front.members.end(), r.best));
    EXPECT_EQ(r.best_point, ExplainerParams::from_json(r.trials[r.best].theta));
    const auto again = optimize(s, cfg, base, obj);
    EXPECT_EQ(front_to_json(again), front_to_json(r));

    const auto dir = fs::temp_directory_path() / "xleak_tests";
    fs::create_directories(dir);
    write_trial_log(dir / "trials.csv", r);
    const auto t = read_csv_table(dir / "trials.csv");
    EXPECT_EQ(t.rows.size(), 12u);
    EXPECT_EQ(t.header.front(), "trial");
    EXPECT_EQ(t.header.back(), "on_front");
}

TEST(Optimize, RejectsExploreBeyondTrials) {
    SearchSpace s;
    s.dims.push_back({"u", ParamType::real, 0.0, 1.0, {}});
    SearchConfig cfg;
    cfg.trials = 2;
    cfg.n_explore = 3;
    EXPECT_THROW(optimize(s, cfg, {}, [](const ExplainerParams&, std::uint64_t) { return TrialOutcome{}; }), Error);
}

namespace {

struct SmallScenario {
    SplitBundle bundle;
    Model target, shadow;
    HardeningSetup setup;

    SmallScenario() {
        const Dataset data = make_synthetic(2, 4, 400, 1.0, 4);
        SplitSpec s;
        s.target_train = 40;
        s.target_test = 60;
        s.shadow_train = 40;
        s.shadow_test = 60;
        s.mode = SplitMode::disjoint;
        s.seed = 1;
        bundle = split(data, s);
        TrainConfig tc;
        tc.epochs = 30;
        tc.weight_decay = 0.0;
        tc.seed = 2;
        target = train("mlp_a", bundle.target_train.data, bundle.target_test.data, tc).model;
        tc.seed = 3;
        shadow = train("mlp_a", bundle.shadow_train.data, bundle.shadow_test.data, tc).model;
        setup.target = &target;
        setup.shadow = &shadow;
        setup.bundle = &bundle;
        setup.protocol.seeds = 2;
        setup.protocol.epsilon = 0.05;
        setup.protocol.spec.train.epochs = 10;
        for (std::size_t i = 0; i < 3; ++i) setup.utility_samples.push_back(bundle.target_test.data.sample(i));
        setup.sensitivity.samples = 4;
    }
};

}  // namespace

TEST(Hardening, NonparameterizedSearchMechanics) {
    SmallScenario sc;
    SearchConfig cfg;
    cfg.trials = 4;
    cfg.n_explore = 2;
    const auto r = optimize_nonparameterized(sc.setup, cfg);
    EXPECT_EQ(r.search.trials.size(), 4u);
    EXPECT_TRUE(std::count(r.search.front.members.begin(), r.search.front.members.end(), r.search.best));
    EXPECT_GT(r.search.baseline.utility, 0.0);
    const auto theta = TransformParams::from_json(r.search.trials[r.search.best].theta);
    EXPECT_EQ(order_string(theta.order), "CMN");
}

TEST(Hardening, IdentityTransformReproducesBaseline) {
    SmallScenario sc;
    const auto channel = collect_channel(*sc.setup.shadow, *sc.setup.target, sc.bundle, sc.setup.kind,
                                         sc.setup.params, sc.setup.ctx, sc.setup.eval_cap);
    const auto base = measure_baseline(sc.setup, channel);
    const auto out = transform_objective(sc.setup, channel, TransformParams{});
    EXPECT_EQ(out.mls, base.mls);
    EXPECT_EQ(out.auc, base.auc);
    EXPECT_NEAR(out.utility, base.utility, 1e-12);
}

TEST(Hardening, OrderingAblationCoversAllOrders) {
    SmallScenario sc;
    const auto channel = collect_channel(*sc.setup.shadow, *sc.setup.target, sc.bundle, sc.setup.kind,
                                         sc.setup.params, sc.setup.ctx, sc.setup.eval_cap);
    std::vector<TransformParams> grid(1);
    grid[0].sigma = 0.1;
    const auto rows = ordering_ablation(sc.setup, channel, grid);
    ASSERT_EQ(rows.size(), 15u);
    std::set<std::string> names;
    for (const auto& r : rows) {
        names.insert(r.order);
        EXPECT_EQ(r.recommended, r.order == "CMN");
    }
    EXPECT_EQ(names.size(), 15u);
}

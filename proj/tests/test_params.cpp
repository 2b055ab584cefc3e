#include <gtest/gtest.h>

#include <map>

#include "xleak/error.hpp"
#include "xleak/explain_params.hpp"

using namespace xleak;

namespace {

// Tunable parameters of the method table with their fixed defaults. Parameters
// whose default is left open map to std::monostate.
using Expected = std::variant<std::monostate, bool, std::int64_t, double, std::string>;

const std::map<ExplainerKind, std::map<std::string, Expected>>& method_table() {
    static const std::map<ExplainerKind, std::map<std::string, Expected>> t{
        {ExplainerKind::integrated_gradients, {{"multiply_by_inputs", true}, {"method", std::string("gausslegendre")}}},
        {ExplainerKind::smoothgrad, {{"stdevs", 1.0}, {"draw_baseline_from_distrib", false}}},
        {ExplainerKind::vargrad, {{"stdevs", 1.0}, {"draw_baseline_from_distrib", false}}},
        {ExplainerKind::gradcam_pp, {{"interpolation_mode", std::string("nearest")}, {"attr_to_layer_input", false}}},
        {ExplainerKind::gradcam, {{"interpolation_mode", std::string("nearest")}, {"attr_to_layer_input", false}}},
        {ExplainerKind::occlusion, {{"sliding_window_shapes", {}}, {"strides", {}}}},
        {ExplainerKind::kernel_shap, {{"n_segments", std::int64_t{50}}, {"compactness", {}}}},
        {ExplainerKind::anchors,
         {{"threshold", 0.95},
          {"tau", 0.15},
          {"delta", 0.1},
          {"batch_size", std::int64_t{100}},
          {"coverage_samples", std::int64_t{10000}},
          {"beam_size", std::int64_t{1}},
          {"segmentation_fn", std::string("slic")},
          {"n_segments", std::int64_t{15}},
          {"compactness", std::int64_t{20}},
          {"sigma", 0.5},
          {"p_sample", 0.5}}},
        {ExplainerKind::lime, {{"n_segments", std::int64_t{50}}, {"compactness", {}}}},
        {ExplainerKind::protodash, {{"sigma", 2.0}, {"kernel", std::string("other")}}},
    };
    return t;
}

bool matches(const Expected& want, const ParamValue& got) {
    return std::visit(
        [&](const auto& w) {
            using W = std::decay_t<decltype(w)>;
            if constexpr (std::is_same_v<W, std::monostate>)
                return true;
            else
                return std::holds_alternative<W>(got) && std::get<W>(got) == w;
        },
        want);
}

}  // namespace

TEST(ParamSchemaTest, EveryTableParameterAppearsOnceWithItsDefault) {
    for (const auto& [kind, params] : method_table()) {
        const auto& schema = param_schema(kind);
        for (const auto& [name, def] : params) {
            std::size_t hits = 0;
            for (const auto& s : schema)
                if (s.name == name) {
                    ++hits;
                    EXPECT_TRUE(s.from_method_table) << explainer_name(kind) << "." << name;
                    EXPECT_TRUE(matches(def, s.default_value)) << explainer_name(kind) << "." << name;
                }
            EXPECT_EQ(hits, 1u) << explainer_name(kind) << "." << name;
        }
        for (const auto& s : schema)
            if (s.from_method_table) EXPECT_TRUE(params.count(s.name)) << explainer_name(kind) << "." << s.name;
    }
}

TEST(ParamSchemaTest, MethodsOutsideTheTableHaveNoTableParameters) {
    for (auto kind : all_explainers()) {
        if (method_table().count(kind)) continue;
        for (const auto& s : param_schema(kind)) EXPECT_FALSE(s.from_method_table) << explainer_name(kind);
        EXPECT_FALSE(is_parameterized(kind)) << explainer_name(kind);
    }
    EXPECT_EQ(all_explainers().size(), 15u);
}

TEST(ParamSchemaTest, NamesRoundTrip) {
    for (auto kind : all_explainers()) EXPECT_EQ(explainer_from_name(explainer_name(kind)), kind);
    EXPECT_THROW(explainer_from_name("nope"), Error);
}

TEST(ResolveParams, FillsDefaultsAndCoercesNumbers) {
    ExplainerParams given;
    given.set("stdevs", std::int64_t{2});
    const auto r = resolve_params(ExplainerKind::smoothgrad, given);
    EXPECT_EQ(r.get_real("stdevs"), 2.0);
    EXPECT_TRUE(std::holds_alternative<double>(r.at("stdevs")));
    EXPECT_EQ(r.get_bool("draw_baseline_from_distrib"), false);
    EXPECT_EQ(r, resolve_params(ExplainerKind::smoothgrad, r));
}

TEST(ResolveParams, RejectsUnknownNamesWrongTypesAndOutOfDomain) {
    auto expect_config = [](ExplainerKind k, const std::string& n, ParamValue v) {
        ExplainerParams p;
        p.set(n, std::move(v));
        try {
            resolve_params(k, p);
            ADD_FAILURE() << n;
        } catch (const Error& e) {
            EXPECT_EQ(e.kind(), ErrorKind::config) << n;
        }
    };
    expect_config(ExplainerKind::saliency, "stdevs", 1.0);
    expect_config(ExplainerKind::anchors, "threshold", 1.5);
    expect_config(ExplainerKind::anchors, "batch_size", 2.5);
    expect_config(ExplainerKind::integrated_gradients, "method", std::string("simpson"));
    expect_config(ExplainerKind::gradcam, "attr_to_layer_input", std::int64_t{1});
}

TEST(ExplainerParamsTest, JsonRoundTrip) {
    for (auto kind : all_explainers()) {
        const auto d = default_params(kind);
        EXPECT_EQ(ExplainerParams::from_json(d.to_json()), d) << explainer_name(kind);
    }
    ExplainerParams p;
    p.set("sliding_window_shapes", std::vector<std::int64_t>{1, 2, 2});
    EXPECT_EQ(ExplainerParams::from_json(p.to_json()), p);
}

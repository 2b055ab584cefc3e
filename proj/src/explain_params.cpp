#include "xleak/explain_params.hpp"

#include <array>
#include <cmath>

#include "xleak/error.hpp"

namespace xleak {

using nlohmann::json;

namespace {

constexpr std::array kAllExplainers{
    ExplainerKind::saliency,        ExplainerKind::deconvolution, ExplainerKind::guided_backprop,
    ExplainerKind::input_x_gradient, ExplainerKind::smoothgrad,   ExplainerKind::vargrad,
    ExplainerKind::integrated_gradients, ExplainerKind::deeplift, ExplainerKind::occlusion,
    ExplainerKind::kernel_shap,     ExplainerKind::lime,          ExplainerKind::gradcam,
    ExplainerKind::gradcam_pp,      ExplainerKind::anchors,       ExplainerKind::protodash,
};

ParamSchema boolean(std::string name, bool def, bool table = true) {
    return {std::move(name), {ParamType::boolean, 0, 1, {}}, def, table};
}
ParamSchema integer(std::string name, std::int64_t lo, std::int64_t hi, std::int64_t def, bool table = true) {
    return {std::move(name), {ParamType::integer, double(lo), double(hi), {}}, def, table};
}
ParamSchema real(std::string name, double lo, double hi, double def, bool table = true) {
    return {std::move(name), {ParamType::real, lo, hi, {}}, def, table};
}
ParamSchema categorical(std::string name, std::vector<std::string> choices, std::string def, bool table = true) {
    return {std::move(name), {ParamType::categorical, 0, 0, std::move(choices)}, std::move(def), table};
}
ParamSchema tuple(std::string name, bool table = true) {
    return {std::move(name), {ParamType::int_tuple, 1, 0, {}}, std::vector<std::int64_t>{}, table};
}

std::vector<ParamSchema> noise_tunnel_schema() {
    return {real("stdevs", 0.0, 4.0, 1.0), boolean("draw_baseline_from_distrib", false),
            integer("nt_samples", 1, 256, 5, false)};
}

std::vector<ParamSchema> cam_schema() {
    return {categorical("interpolation_mode", {"nearest", "bilinear"}, "nearest"),
            boolean("attr_to_layer_input", false), integer("layer_index", -1, 256, -1, false)};
}

std::vector<ParamSchema> build_schema(ExplainerKind kind) {
    switch (kind) {
        case ExplainerKind::saliency:
        case ExplainerKind::deconvolution:
        case ExplainerKind::guided_backprop:
        case ExplainerKind::input_x_gradient:
        case ExplainerKind::deeplift:
            return {};
        case ExplainerKind::smoothgrad:
        case ExplainerKind::vargrad:
            return noise_tunnel_schema();
        case ExplainerKind::integrated_gradients:
            return {boolean("multiply_by_inputs", true),
                    categorical("method",
                                {"gausslegendre", "riemann_right", "riemann_left", "riemann_middle",
                                 "riemann_trapezoid"},
                                "gausslegendre"),
                    integer("n_steps", 1, 512, 50, false)};
        case ExplainerKind::gradcam:
        case ExplainerKind::gradcam_pp:
            return cam_schema();
        case ExplainerKind::occlusion:
            return {tuple("sliding_window_shapes"), tuple("strides"), real("baseline_value", -1e6, 1e6, 0.0, false)};
        case ExplainerKind::kernel_shap:
            return {integer("n_segments", 1, 4096, 50), integer("compactness", 1, 100, 10),
                    integer("n_samples", 0, 1000000, 0, false), real("baseline_value", -1e6, 1e6, 0.0, false)};
        case ExplainerKind::lime:
            return {integer("n_segments", 1, 4096, 50),
                    integer("compactness", 1, 100, 10),
                    integer("n_samples", 1, 1000000, 1000, false),
                    real("kernel_width", 1e-6, 100.0, 0.25, false),
                    real("ridge_lambda", 0.0, 1e6, 1.0, false),
                    real("baseline_value", -1e6, 1e6, 0.0, false)};
        case ExplainerKind::anchors:
            return {real("threshold", 0.0, 1.0, 0.95),
                    real("tau", 0.0, 1.0, 0.15),
                    real("delta", 1e-9, 1.0, 0.1),
                    integer("batch_size", 1, 100000, 100),
                    integer("coverage_samples", 1, 10000000, 10000),
                    integer("beam_size", 1, 64, 1),
                    categorical("segmentation_fn", {"slic", "felzenszwalb", "quickshift"}, "slic"),
                    integer("n_segments", 1, 4096, 15),
                    integer("compactness", 1, 100, 20),
                    real("sigma", 0.0, 100.0, 0.5),
                    real("p_sample", 0.0, 1.0, 0.5),
                    integer("max_batches", 1, 10000, 10, false),
                    real("baseline_value", -1e6, 1e6, 0.0, false)};
        case ExplainerKind::protodash:
            return {real("sigma", 1e-9, 1e6, 2.0),
                    categorical("kernel", {"other", "gaussian"}, "other"),
                    integer("m", 1, 1024, 5, false),
                    integer("candidates", 1, 100000, 32, false),
                    integer("target_pool", 0, 100000, 8, false)};
    }
    return {};
}

[[noreturn]] void type_error(const std::string& name, const char* expected) {
    fail(ErrorKind::config, "parameter '" + name + "' must be " + expected);
}

ParamValue coerce(const ParamSchema& s, const ParamValue& v) {
    const std::string& n = s.name;
    switch (s.domain.type) {
        case ParamType::boolean:
            if (const auto* b = std::get_if<bool>(&v)) return *b;
            type_error(n, "a boolean");
        case ParamType::integer:
            if (const auto* i = std::get_if<std::int64_t>(&v)) return *i;
            if (const auto* d = std::get_if<double>(&v); d && *d == std::floor(*d)) return static_cast<std::int64_t>(*d);
            type_error(n, "an integer");
        case ParamType::real:
            if (const auto* d = std::get_if<double>(&v)) return *d;
            if (const auto* i = std::get_if<std::int64_t>(&v)) return static_cast<double>(*i);
            type_error(n, "a number");
        case ParamType::categorical:
            if (const auto* s2 = std::get_if<std::string>(&v)) return *s2;
            type_error(n, "a string");
        case ParamType::int_tuple:
            if (const auto* t = std::get_if<std::vector<std::int64_t>>(&v)) return *t;
            if (const auto* i = std::get_if<std::int64_t>(&v)) return std::vector<std::int64_t>{*i};
            type_error(n, "an integer tuple");
    }
    type_error(n, "well-typed");
}

void check_domain(const ParamSchema& s, const ParamValue& v) {
    const auto& d = s.domain;
    auto out_of_range = [&](const std::string& what) {
        fail(ErrorKind::config, "parameter '" + s.name + "' value " + what + " outside its domain");
    };
    switch (d.type) {
        case ParamType::boolean:
            return;
        case ParamType::integer: {
            const auto i = std::get<std::int64_t>(v);
            if (double(i) < d.lo || double(i) > d.hi) out_of_range(std::to_string(i));
            return;
        }
        case ParamType::real: {
            const double x = std::get<double>(v);
            if (!std::isfinite(x) || x < d.lo || x > d.hi) out_of_range(std::to_string(x));
            return;
        }
        case ParamType::categorical: {
            const auto& c = std::get<std::string>(v);
            for (const auto& choice : d.choices)
                if (choice == c) return;
            out_of_range("'" + c + "'");
            return;
        }
        case ParamType::int_tuple:
            for (auto e : std::get<std::vector<std::int64_t>>(v))
                if (double(e) < d.lo) out_of_range(std::to_string(e));
            return;
    }
}

ParamValue from_json_value(const json& j) {
    if (j.is_boolean()) return j.get<bool>();
    if (j.is_number_integer()) return j.get<std::int64_t>();
    if (j.is_number()) return j.get<double>();
    if (j.is_string()) return j.get<std::string>();
    if (j.is_array()) return j.get<std::vector<std::int64_t>>();
    fail(ErrorKind::config, "unsupported parameter value " + j.dump());
}

}  // namespace

std::span<const ExplainerKind> all_explainers() { return kAllExplainers; }

const char* explainer_name(ExplainerKind kind) {
    switch (kind) {
        case ExplainerKind::saliency: return "saliency";
        case ExplainerKind::deconvolution: return "deconvolution";
        case ExplainerKind::guided_backprop: return "guided_backprop";
        case ExplainerKind::input_x_gradient: return "input_x_gradient";
        case ExplainerKind::smoothgrad: return "smoothgrad";
        case ExplainerKind::vargrad: return "vargrad";
        case ExplainerKind::integrated_gradients: return "integrated_gradients";
        case ExplainerKind::deeplift: return "deeplift";
        case ExplainerKind::occlusion: return "occlusion";
        case ExplainerKind::kernel_shap: return "kernel_shap";
        case ExplainerKind::lime: return "lime";
        case ExplainerKind::gradcam: return "gradcam";
        case ExplainerKind::gradcam_pp: return "gradcam_pp";
        case ExplainerKind::anchors: return "anchors";
        case ExplainerKind::protodash: return "protodash";
    }
    return "?";
}

ExplainerKind explainer_from_name(const std::string& name) {
    for (auto k : kAllExplainers)
        if (name == explainer_name(k)) return k;
    fail(ErrorKind::config, "unknown explainer '" + name + "'");
}

bool is_parameterized(ExplainerKind kind) { return !param_schema(kind).empty(); }

const std::vector<ParamSchema>& param_schema(ExplainerKind kind) {
    static const auto table = [] {
        std::map<ExplainerKind, std::vector<ParamSchema>> m;
        for (auto k : kAllExplainers) m[k] = build_schema(k);
        return m;
    }();
    return table.at(kind);
}

ExplainerParams default_params(ExplainerKind kind) {
    ExplainerParams p;
    for (const auto& s : param_schema(kind)) p.set(s.name, s.default_value);
    return p;
}

ExplainerParams resolve_params(ExplainerKind kind, const ExplainerParams& given) {
    const auto& schema = param_schema(kind);
    for (const auto& [name, _] : given.values()) {
        bool known = false;
        for (const auto& s : schema) known = known || s.name == name;
        require(known, ErrorKind::config,
                std::string("unknown parameter '") + name + "' for explainer " + explainer_name(kind));
    }
    ExplainerParams out;
    for (const auto& s : schema) {
        ParamValue v = given.has(s.name) ? coerce(s, given.at(s.name)) : s.default_value;
        check_domain(s, v);
        out.set(s.name, std::move(v));
    }
    return out;
}

const ParamValue& ExplainerParams::at(const std::string& name) const {
    const auto it = values_.find(name);
    require(it != values_.end(), ErrorKind::config, "missing parameter '" + name + "'");
    return it->second;
}

bool ExplainerParams::get_bool(const std::string& name) const {
    const auto* b = std::get_if<bool>(&at(name));
    if (!b) type_error(name, "a boolean");
    return *b;
}

std::int64_t ExplainerParams::get_int(const std::string& name) const {
    const auto* i = std::get_if<std::int64_t>(&at(name));
    if (!i) type_error(name, "an integer");
    return *i;
}

double ExplainerParams::get_real(const std::string& name) const {
    const ParamValue& v = at(name);
    if (const auto* d = std::get_if<double>(&v)) return *d;
    if (const auto* i = std::get_if<std::int64_t>(&v)) return static_cast<double>(*i);
    type_error(name, "a number");
}

const std::string& ExplainerParams::get_string(const std::string& name) const {
    const auto* s = std::get_if<std::string>(&at(name));
    if (!s) type_error(name, "a string");
    return *s;
}

std::vector<std::int64_t> ExplainerParams::get_tuple(const std::string& name) const {
    const auto* t = std::get_if<std::vector<std::int64_t>>(&at(name));
    if (!t) type_error(name, "an integer tuple");
    return *t;
}

json param_value_to_json(const ParamValue& v) {
    return std::visit([](const auto& x) { return json(x); }, v);
}

json ExplainerParams::to_json() const {
    json j = json::object();
    for (const auto& [k, v] : values_) j[k] = param_value_to_json(v);
    return j;
}

ExplainerParams ExplainerParams::from_json(const json& j) {
    require(j.is_object(), ErrorKind::config, "explainer params must be a JSON object");
    ExplainerParams p;
    for (const auto& [k, v] : j.items()) p.set(k, from_json_value(v));
    return p;
}

}  // namespace xleak

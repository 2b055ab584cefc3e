#pragma once

#include <cstdint>
#include <map>
#include <span>
#include <string>
#include <variant>
#include <vector>

#include "json.hpp"
#include "xleak/tensor.hpp"

namespace xleak {

enum class ExplainerKind : std::uint8_t {
    saliency = 0,
    deconvolution,
    guided_backprop,
    input_x_gradient,
    smoothgrad,
    vargrad,
    integrated_gradients,
    deeplift,
    occlusion,
    kernel_shap,
    lime,
    gradcam,
    gradcam_pp,
    anchors,
    protodash,
};

std::span<const ExplainerKind> all_explainers();
const char* explainer_name(ExplainerKind kind);
ExplainerKind explainer_from_name(const std::string& name);

// Methods without tunable parameters; hardened through attribution transforms.
bool is_parameterized(ExplainerKind kind);

using ParamValue = std::variant<bool, std::int64_t, double, std::string, std::vector<std::int64_t>>;

enum class ParamType { boolean, integer, real, categorical, int_tuple };

struct ParamDomain {
    ParamType type = ParamType::real;
    double lo = 0.0;  // integer / real / int_tuple elements
    double hi = 0.0;  // for int_tuple, hi <= 0 means "up to the input extent"
    std::vector<std::string> choices;
};

struct ParamSchema {
    std::string name;
    ParamDomain domain;
    ParamValue default_value;
    bool from_method_table = true;  // listed among the method's constructor/attribution parameters
};

class ExplainerParams {
public:
    ExplainerParams() = default;

    bool has(const std::string& name) const { return values_.count(name) > 0; }
    const ParamValue& at(const std::string& name) const;
    void set(const std::string& name, ParamValue v) { values_[name] = std::move(v); }

    bool get_bool(const std::string& name) const;
    std::int64_t get_int(const std::string& name) const;
    double get_real(const std::string& name) const;  // accepts integers too
    const std::string& get_string(const std::string& name) const;
    std::vector<std::int64_t> get_tuple(const std::string& name) const;

    const std::map<std::string, ParamValue>& values() const { return values_; }

    nlohmann::json to_json() const;
    static ExplainerParams from_json(const nlohmann::json& j);

    bool operator==(const ExplainerParams&) const = default;

private:
    std::map<std::string, ParamValue> values_;
};

const std::vector<ParamSchema>& param_schema(ExplainerKind kind);
ExplainerParams default_params(ExplainerKind kind);

// Fills missing entries with defaults, coerces JSON numeric types to the
// schema type and rejects unknown names or values outside the domain.
ExplainerParams resolve_params(ExplainerKind kind, const ExplainerParams& given);

nlohmann::json param_value_to_json(const ParamValue& v);

}  // namespace xleak

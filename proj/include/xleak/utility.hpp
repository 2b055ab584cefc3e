#pragma once

#include <cstdint>
#include <filesystem>
#include <functional>
#include <span>
#include <string>
#include <vector>

#include "json.hpp"
#include "xleak/explain.hpp"

namespace xleak {

// An explanation channel as a function of the input. sample_id identifies the
// unperturbed sample so that any seeded post-processing (hardening noise) is
// shared between x and its perturbations.
using ExplanationFn = std::function<std::vector<double>(const Tensor& x, std::uint64_t sample_id)>;

// Explainer with the context seed held fixed across calls, so sensitivity
// measures input sensitivity rather than sampler variance. Holds references:
// model and ctx.reference must outlive the returned function.
ExplanationFn explainer_fn(const Model& model, ExplainerKind kind, const ExplainerParams& params,
                           const ExplainContext& ctx);

enum class SensitivityEstimator { monte_carlo, grid, ascent };

const char* estimator_name(SensitivityEstimator e);
SensitivityEstimator estimator_from_name(const std::string& name);

struct SensitivityConfig {
    double radius = 0.1;  // ||delta||_inf <= radius
    SensitivityEstimator estimator = SensitivityEstimator::monte_carlo;
    // monte_carlo: draws; grid: points per axis; ascent: hill-climb steps.
    std::size_t samples = 64;
    std::uint64_t seed = 0;
};

// Lower bound on max ||E(x + delta) - E(x)||_2 over the perturbation ball.
struct SensitivityEstimate {
    double value = 0.0;
    double radius = 0.0;
    SensitivityEstimator estimator = SensitivityEstimator::monte_carlo;
    std::size_t samples = 0;
    std::uint64_t seed = 0;

    nlohmann::json to_json() const;
};

SensitivityEstimate sensitivity(const ExplanationFn& fn, const Tensor& x, const SensitivityConfig& cfg,
                                std::uint64_t sample_id = 0);

// Monte-Carlo estimates for increasing radii from one set of unit directions.
// Entry i maximises over the directions scaled by every radius <= radii[i],
// all of which lie inside ball i, so the curve is non-decreasing.
std::vector<double> sensitivity_curve(const ExplanationFn& fn, const Tensor& x, std::span<const double> radii,
                                      std::size_t samples, std::uint64_t seed, std::uint64_t sample_id = 0);

struct DatasetSensitivity {
    SensitivityEstimate mean;
    std::vector<double> values;  // per sample, input order
    std::vector<std::uint64_t> sample_ids;
};

// Stable identifier derived from the sample's contents.
std::uint64_t content_id(const Tensor& x);

// Mean over samples. Perturbation directions depend only on cfg.seed and the
// mean is summed in sorted order, so the result ignores sample order.
DatasetSensitivity dataset_sensitivity(const ExplanationFn& fn, std::span<const Tensor> samples,
                                       const SensitivityConfig& cfg);

// undefined: the pre-hardening sensitivity is zero, so no relative change exists.
enum class UtilityDirection { utility_gain, utility_loss, unchanged, undefined };

const char* direction_name(UtilityDirection d);

struct DeltaS {
    double percent = 0.0;
    UtilityDirection direction = UtilityDirection::unchanged;
};

// percent = |pre - post| / pre * 100; lower sensitivity is a utility gain.
DeltaS delta_s(double pre, double post);

// Columns: sample_id,value.
void write_sensitivity_csv(const std::filesystem::path& path, const DatasetSensitivity& ds);

}  // namespace xleak

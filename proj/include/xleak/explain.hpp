#pragma once

#include <cstdint>
#include <functional>
#include <optional>
#include <vector>

#include "xleak/data.hpp"
#include "xleak/explain_params.hpp"
#include "xleak/nn.hpp"
#include "xleak/segmentation.hpp"

namespace xleak {

struct AttributionMap {
    Tensor values;
    ExplainerKind method = ExplainerKind::saliency;
    ExplainerParams params;
    std::int32_t class_index = 0;
    std::int8_t label = -1;  // membership label when part of an attack dataset
    double wall_time_seconds = 0.0;
};

struct ExplainContext {
    OutputMode mode = OutputMode::logit;
    const Dataset* reference = nullptr;  // sample pool for distribution baselines and ProtoDash
    std::uint64_t seed = 0;
    std::optional<std::size_t> class_index;  // default: the model's predicted class
};

// Scalar class score of a (possibly perturbed) input.
using ScoreFn = std::function<double(const Tensor&)>;
// Predicted class of a (possibly perturbed) input.
using ClassifyFn = std::function<std::size_t(const Tensor&)>;

ScoreFn model_score(const Model& model, std::size_t class_index, OutputMode mode = OutputMode::logit);
ClassifyFn model_classifier(const Model& model);

// ---- gradient family ----

// saliency = (standard, abs), deconvolution = (deconv), guided_backprop =
// (guided), input_x_gradient = (standard, multiply_by_input).
Tensor grad_explain(const Model& model, const Tensor& x, std::size_t class_index, ReluRule rule,
                    bool multiply_by_input, bool absolute, OutputMode mode = OutputMode::logit);

enum class NoiseAggregator { mean_abs_grad, variance_grad };

struct NoiseConfig {
    std::size_t n = 5;
    double stdevs = 1.0;  // absolute, in feature units
    NoiseAggregator aggregator = NoiseAggregator::mean_abs_grad;
    bool draw_baseline_from_distrib = false;
    const Dataset* reference = nullptr;  // required when draw_baseline_from_distrib
    std::uint64_t seed = 0;
};

Tensor noise_aggregate(const Model& model, const Tensor& x, std::size_t class_index, const NoiseConfig& cfg,
                       OutputMode mode = OutputMode::logit);

enum class IgMethod { riemann_left, riemann_right, riemann_middle, riemann_trapezoid, gausslegendre };

IgMethod ig_method_from_name(const std::string& name);
const char* ig_method_name(IgMethod m);

struct Quadrature {
    std::vector<double> alphas;   // in [0,1]
    std::vector<double> weights;  // sum to 1
};

// riemann_trapezoid uses n intervals (n+1 nodes); the others use n nodes.
Quadrature path_quadrature(IgMethod method, std::size_t n_steps);

Tensor integrated_gradients(const Model& model, const Tensor& x, std::size_t class_index, const Tensor& baseline,
                            std::size_t n_steps, IgMethod method, bool multiply_by_inputs,
                            OutputMode mode = OutputMode::logit);

// Rescale rule. Contributions sum to score(x) - score(baseline).
Tensor deeplift(const Model& model, const Tensor& x, const Tensor& baseline, std::size_t class_index,
                OutputMode mode = OutputMode::logit);

// ---- perturbation family ----

// Every coordinate receives the mean of score(x) - score(x_occluded) over the
// windows covering it; coordinates no window reaches stay 0.
Tensor occlusion(const ScoreFn& score, const Tensor& x, const Shape& window, const Shape& strides,
                 double baseline_value);

// Default window: one coordinate (all channels of one pixel for rank-3).
Shape default_occlusion_window(const Shape& input_shape);

struct SegmentAttribution {
    std::vector<double> segment_values;
    Tensor map;
};

constexpr std::size_t kExactShapMaxSegments = 12;

// n_samples == 0 selects 2k + 2048 sampled coalitions; at most
// kExactShapMaxSegments segments are always solved exactly.
SegmentAttribution kernel_shap(const ScoreFn& score, const Tensor& x, const Segmentation& seg,
                               std::size_t n_samples, double baseline_value, std::uint64_t seed);

struct LimeConfig {
    std::size_t n_samples = 1000;
    double kernel_width = 0.25;
    double ridge_lambda = 1.0;
    double baseline_value = 0.0;
    std::uint64_t seed = 0;
};

SegmentAttribution lime(const ScoreFn& score, const Tensor& x, const Segmentation& seg, const LimeConfig& cfg);

// ---- representation-guided family ----

enum class CamVariant { gradcam, gradcam_pp };
enum class Interpolation { nearest, bilinear };

Interpolation interpolation_from_name(const std::string& name);

// layer_index < 0 selects the last conv layer. Returns a map shaped like x.
Tensor gradcam(const Model& model, const Tensor& x, std::size_t class_index, std::int64_t layer_index,
               CamVariant variant, Interpolation interpolation, bool attr_to_layer_input,
               OutputMode mode = OutputMode::logit);

// (h,w) -> (H,W) resize of a single map.
Tensor upsample(const Tensor& map, std::size_t out_h, std::size_t out_w, Interpolation interpolation);

// ---- approximation family ----

struct AnchorConfig {
    double threshold = 0.95;
    double tau = 0.15;
    double delta = 0.1;
    std::size_t beam_size = 1;
    double p_sample = 0.5;
    std::size_t coverage_samples = 10000;
    std::size_t batch_size = 100;
    std::size_t max_batches = 10;
    double baseline_value = 0.0;
    std::uint64_t seed = 0;
};

struct AnchorResult {
    std::vector<std::size_t> anchor;  // sorted segment ids
    double precision = 0.0;
    double coverage = 0.0;
    bool found = true;  // false: no anchor met the threshold, the full segment set is returned
    Tensor mask;        // 1 on anchor segments
};

AnchorResult anchors(const ClassifyFn& classify, const Tensor& x, const Segmentation& seg, const AnchorConfig& cfg);

enum class ProtoKernel { linear, gaussian };

struct ProtoDashResult {
    std::vector<std::size_t> prototypes;  // indices into the candidate set, in pick order
    std::vector<double> weights;          // aligned with prototypes, all >= 0
    std::vector<double> objective;        // value after each pick
    std::vector<double> candidate_weights;  // weight per candidate (0 when not picked)
};

ProtoDashResult protodash(const std::vector<std::vector<double>>& targets,
                          const std::vector<std::vector<double>>& candidates, std::size_t m, double sigma,
                          ProtoKernel kernel);

// Activation feeding the model's final layer, flattened.
std::vector<double> penultimate_embedding(const Model& model, const Tensor& x);

// ---- dispatch ----

// Why an explainer cannot run on a model, or nullopt when it can.
std::optional<std::string> incompatibility(const Model& model, ExplainerKind kind, const ExplainContext& ctx = {});

// Resolves params against the schema, runs the explainer and times it. The
// returned values have x's shape, except ProtoDash which returns one weight
// per candidate.
AttributionMap explain(const Model& model, const Tensor& x, ExplainerKind kind, const ExplainerParams& params,
                       const ExplainContext& ctx = {});

}  // namespace xleak

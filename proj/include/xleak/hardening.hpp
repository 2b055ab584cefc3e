#pragma once

#include <cstdint>
#include <filesystem>
#include <functional>
#include <limits>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "json.hpp"
#include "xleak/attack.hpp"
#include "xleak/explain_params.hpp"
#include "xleak/utility.hpp"

namespace xleak {

enum class Transform : char { clip = 'C', mask = 'M', noise = 'N' };
enum class MaskMode { signed_threshold, magnitude };

using TransformOrder = std::vector<Transform>;

std::string order_string(const TransformOrder& order);
TransformOrder parse_order(const std::string& s);
// The 15 nonempty repeat-free sequences over {C, M, N}, shortest first.
std::vector<TransformOrder> all_orders();

constexpr double kInf = std::numeric_limits<double>::infinity();

struct TransformParams {
    double sigma = 0.0;
    double c_min = -kInf;
    double c_max = kInf;
    double tau = -kInf;
    TransformOrder order{Transform::clip, Transform::mask, Transform::noise};
    MaskMode mask_mode = MaskMode::signed_threshold;
    std::uint64_t seed = 0;

    void validate() const;
    nlohmann::json to_json() const;  // infinities encoded as "inf" / "-inf"
    static TransformParams from_json(const nlohmann::json& j);
};

// Applies the transforms in params.order. Noise for one sample is drawn from
// derive_seed(params.seed, sample_id).
std::vector<double> apply_transforms(std::span<const double> phi, const TransformParams& params,
                                     std::uint64_t sample_id = 0);
AttributionMap apply_transforms(const AttributionMap& phi, const TransformParams& params, std::uint64_t sample_id = 0);

// ---- search space ----

struct Dimension {
    std::string name;
    ParamType type = ParamType::real;  // real, integer or categorical
    double lo = 0.0;
    double hi = 0.0;
    std::vector<ParamValue> choices;  // categorical

    bool contains(const ParamValue& v) const;
};

struct SearchSpace {
    std::vector<Dimension> dims;
    ExplainerParams fixed;  // values held constant, merged into every point

    bool contains(const ExplainerParams& point) const;
    nlohmann::json to_json() const;
    static SearchSpace from_json(const nlohmann::json& j);
};

// Search ranges for an explainer's own parameters at desk scale.
SearchSpace default_explainer_space(ExplainerKind kind, const Shape& input_shape);

// Transform ranges from baseline attributions: sigma in [0, 2 std],
// c_min in [min, 0], c_max in [0, max], tau in [0, q90(|phi|)].
SearchSpace default_transform_space(const FeatureRows& baseline);
// Degenerate space whose single point is the identity transform.
SearchSpace identity_transform_space();

TransformParams transform_from_point(const ExplainerParams& point, const TransformOrder& order, MaskMode mode,
                                     std::uint64_t seed);

ExplainerParams sample_point(const SearchSpace& space, Rng& rng);
// Gaussian step of 10% of the range for reals, +-1 for integers, 20% resample
// for categoricals; always stays inside the space.
ExplainerParams mutate_point(const SearchSpace& space, const ExplainerParams& point, Rng& rng);

// ---- trials and fronts ----

struct TrialOutcome {
    double mls = 0.0;
    double auc = 0.5;
    double balanced_accuracy = 0.5;
    double utility = 0.0;  // dataset sensitivity, lower is better
};

struct TrialRecord {
    std::size_t trial = 0;
    nlohmann::json theta;
    double mls = 0.0;
    double auc = 0.5;
    double balanced_accuracy = 0.5;
    double utility = 0.0;
    double delta_s_percent = 0.0;
    UtilityDirection direction = UtilityDirection::unchanged;
    double wall_time_seconds = 0.0;
    std::uint64_t seed = 0;
    bool explore = true;

    // Signed sensitivity change in percent; positive means utility lost. 0 when
    // the change is undefined (zero pre-hardening sensitivity).
    double delta_s_loss() const;
};

struct ParetoFront {
    std::vector<std::size_t> members;  // trial indices, ascending
    double ideal_mls = 0.0;
    double ideal_delta_s = 0.0;
};

// Non-dominated trials under (minimise MLS, minimise sensitivity). Of several
// trials at an identical point only the first index is kept.
ParetoFront pareto_front(std::span<const TrialRecord> trials);

constexpr double kMlsSlack = 0.001;

// Lowest MLS, with trials within kMlsSlack of it ranked by lowest
// sensitivity, then lowest MLS, then lowest index. The result is always a
// front member.
std::size_t select_best(std::span<const TrialRecord> trials);

struct SearchConfig {
    std::size_t trials = 20;
    std::size_t n_explore = 5;
    std::uint64_t seed = 0;
};

struct Baseline {
    double mls = 0.0;
    double auc = 0.5;
    double balanced_accuracy = 0.5;
    double utility = 0.0;
};

struct SearchResult {
    Baseline baseline;
    std::vector<TrialRecord> trials;
    ParetoFront front;
    std::size_t best = 0;
    ExplainerParams best_point;
};

using TrialObjective = std::function<TrialOutcome(const ExplainerParams& point, std::uint64_t trial_seed)>;
// Serialises a point for the trial log; defaults to the point's own JSON.
using PointDescriber = std::function<nlohmann::json(const ExplainerParams& point, std::uint64_t trial_seed)>;

// Explore-then-exploit search: n_explore uniform draws, then mutations of a
// uniformly chosen member of the current front.
SearchResult optimize(const SearchSpace& space, const SearchConfig& cfg, const Baseline& baseline,
                      const TrialObjective& objective, const PointDescriber& describe = {});

// Everything the hardening objectives need, shared across trials.
struct HardeningSetup {
    const Model* target = nullptr;
    const Model* shadow = nullptr;
    const SplitBundle* bundle = nullptr;
    ExplainerKind kind = ExplainerKind::saliency;
    ExplainerParams params;  // explainer params for the transform path
    ExplainContext ctx;
    AttackProtocol protocol;
    std::size_t eval_cap = 1000;
    std::vector<Tensor> utility_samples;  // target-model inputs for sensitivity
    SensitivityConfig sensitivity;
    bool retrain_attack = true;  // false: keep the baseline attack models fixed
};

Baseline measure_baseline(const HardeningSetup& setup, const AttackChannel& channel);

// Objective for a transform point over precomputed baseline attributions.
TrialOutcome transform_objective(const HardeningSetup& setup, const AttackChannel& channel,
                                 const TransformParams& theta);

struct HardeningResult {
    SearchResult search;
    AttackChannel baseline_channel;
};

// Searches the explainer's own parameters.
HardeningResult optimize_parameterized(const HardeningSetup& setup, const SearchSpace& space,
                                       const SearchConfig& cfg);

// Searches transform parameters applied to the explainer's output.
HardeningResult optimize_nonparameterized(const HardeningSetup& setup, const SearchConfig& cfg,
                                          std::optional<SearchSpace> space = std::nullopt,
                                          const TransformOrder& order = {Transform::clip, Transform::mask,
                                                                         Transform::noise},
                                          MaskMode mask_mode = MaskMode::signed_threshold);

struct OrderingRow {
    std::string order;
    double pre_mls = 0.0;
    double post_mls = 0.0;
    double delta_s_percent = 0.0;
    UtilityDirection direction = UtilityDirection::unchanged;
    nlohmann::json theta;
    bool recommended = false;  // C->M->N
};

// For each of the 15 orders, evaluates every grid point and reports the
// select_best trial.
std::vector<OrderingRow> ordering_ablation(const HardeningSetup& setup, const AttackChannel& channel,
                                           const std::vector<TransformParams>& grid,
                                           std::optional<Baseline> baseline = std::nullopt);

// Small grid spanning the default transform space.
std::vector<TransformParams> default_transform_grid(const FeatureRows& baseline, MaskMode mode);

// Trial log CSV (trial,phase,seed,theta,mls,auc,balanced_accuracy,utility,
// delta_s,direction,on_front) and a separate timing CSV (trial,wall_time_seconds).
void write_trial_log(const std::filesystem::path& path, const SearchResult& result);
void write_trial_timings(const std::filesystem::path& path, const SearchResult& result);
nlohmann::json front_to_json(const SearchResult& result);
void write_ordering_csv(const std::filesystem::path& path, const std::vector<OrderingRow>& rows);

}  // namespace xleak

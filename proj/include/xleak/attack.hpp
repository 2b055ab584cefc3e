#pragma once

#include <cstdint>
#include <functional>
#include <span>
#include <string>
#include <vector>

#include "json.hpp"
#include "xleak/data.hpp"
#include "xleak/explain.hpp"
#include "xleak/roc.hpp"
#include "xleak/zoo.hpp"

namespace xleak {

using FeatureRows = std::vector<std::vector<double>>;

// Flattened attributions of every sample in `data`. Sample i is explained
// with seed derive_seed(ctx.seed, i) so results do not depend on batch order.
struct AttributionBatch {
    FeatureRows rows;
    std::vector<std::int32_t> classes;
    double wall_time_seconds = 0.0;
};

AttributionBatch compute_attributions(const Model& model, const Dataset& data, ExplainerKind kind,
                                      const ExplainerParams& params, const ExplainContext& ctx);

struct AttackDataset {
    FeatureRows features;     // attribution vectors only
    std::vector<int> labels;  // 1 = member, 0 = non-member
    nlohmann::json provenance = nlohmann::json::object();

    std::size_t size() const noexcept { return labels.size(); }
    std::size_t dim() const { return features.empty() ? 0 : features.front().size(); }
};

// Members first, then non-members.
AttackDataset make_attack_dataset(const FeatureRows& members, const FeatureRows& nonmembers,
                                  nlohmann::json provenance = nlohmann::json::object());

// Shadow attributions: members from D_train_shadow, non-members from D_test_shadow.
AttackDataset build_attack_dataset(const Model& shadow, ExplainerKind kind, const ExplainerParams& params,
                                   const SplitBundle& bundle, const ExplainContext& ctx,
                                   const std::string& shadow_id = "shadow");

enum class AttackArch { logistic, mlp };

struct AttackSpec {
    AttackArch arch = AttackArch::logistic;
    std::size_t hidden = 32;  // mlp only
    double validation_fraction = 0.3;
    TrainConfig train{.epochs = 60, .learning_rate = 0.1, .weight_decay = 1e-4,
                      .schedule = LrSchedule::cosine_annealing, .batch_size = 32, .seed = 0,
                      .target_test_accuracy = std::nullopt};
};

// Standardises the attribution vector and returns the member log-odds. Log-odds
// rank like P(member) but do not saturate into ties at 1.0.
struct AttackModel {
    Model net;
    std::vector<double> mean;
    std::vector<double> scale;

    double score(std::span<const double> attribution) const;
    std::vector<double> scores(const FeatureRows& rows) const;
};

// Randomly initialised attack with identity standardisation; the null model.
AttackModel untrained_attack(std::size_t dim, AttackArch arch, std::uint64_t seed, std::size_t hidden = 32);

struct TrainedAttack {
    AttackModel model;
    double validation_accuracy = 0.0;
    double validation_tpr = 0.0;  // TPR at the protocol epsilon
    double validation_auc = 0.5;
};

TrainedAttack train_attack(const AttackDataset& ds, const AttackSpec& spec, std::uint64_t seed, double epsilon);

struct AttackEvaluation {
    std::vector<double> scores;
    std::vector<int> labels;
    RocCurve roc;
    double mls = 0.0;
    double auc = 0.5;
    double balanced_accuracy = 0.5;
};

AttackEvaluation evaluate_attack(const AttackModel& attack, const FeatureRows& members, const FeatureRows& nonmembers,
                                 double epsilon);

struct AttackProtocol {
    std::size_t seeds = 20;
    double epsilon = 0.001;
    AttackSpec spec;
    std::uint64_t seed = 0;
};

struct SeedResult {
    std::size_t seed_index = 0;
    double validation_tpr = 0.0;
    double validation_accuracy = 0.0;
    double validation_auc = 0.5;
    double mls = 0.0;
    double auc = 0.5;
    double balanced_accuracy = 0.5;
};

struct AttackReport {
    std::vector<SeedResult> seeds;
    std::size_t best_seed = 0;
    double epsilon = 0.0;
    double mls = 0.0;
    double auc = 0.5;
    double balanced_accuracy = 0.5;
    RocCurve roc;
    std::size_t attack_input_dim = 0;
    // Seeds whose target-eval MLS beat the validation-selected one.
    std::vector<std::size_t> better_unselected;
    nlohmann::json provenance = nlohmann::json::object();

    nlohmann::json to_json() const;
};

// The four attribution sets an audit needs, all explanation vectors.
struct AttackChannel {
    FeatureRows shadow_members;
    FeatureRows shadow_nonmembers;
    FeatureRows eval_members;     // target model on D_train_target
    FeatureRows eval_nonmembers;  // target model on D_test_target
    nlohmann::json provenance = nlohmann::json::object();
    double wall_time_seconds = 0.0;
};

// Evaluation sets take the first min(|D_train_target|, |D_test_target|, eval_cap)
// samples of each target split.
AttackChannel collect_channel(const Model& shadow, const Model& target, const SplitBundle& bundle, ExplainerKind kind,
                              const ExplainerParams& params, const ExplainContext& ctx, std::size_t eval_cap = 1000);

// Rewrites every attribution vector; used by hardening transforms.
using FeatureTransform = std::function<std::vector<double>(const std::vector<double>&, std::uint64_t sample_id)>;
AttackChannel transform_channel(const AttackChannel& channel, const FeatureTransform& fn);

// K attack models differing in validation split and initialisation. The best
// seed is chosen on validation data only: validation TPR at epsilon, then
// validation accuracy, then the lowest index.
AttackReport run_attack_protocol(const AttackChannel& channel, const AttackProtocol& protocol);

nlohmann::json attack_protocol_to_json(const AttackProtocol& p);
AttackProtocol attack_protocol_from_json(const nlohmann::json& j);

}  // namespace xleak

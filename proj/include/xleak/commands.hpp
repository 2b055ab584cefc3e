#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include "json.hpp"
#include "xleak/attack.hpp"
#include "xleak/data.hpp"
#include "xleak/hardening.hpp"
#include "xleak/utility.hpp"
#include "xleak/zoo.hpp"

namespace xleak {

inline constexpr const char* kVersion = "0.1.0";
inline constexpr const char* kOutputRootEnv = "XLEAK_OUTPUT_ROOT";

struct DatasetConfig {
    std::string kind = "synthetic";  // synthetic | csv
    SyntheticSpec synthetic;
    std::filesystem::path csv_path;
    CsvSchema csv;
};

struct ModelConfig {
    std::string architecture = "mlp_a";
    TrainConfig train;
};

struct ExplainerEntry {
    ExplainerKind kind = ExplainerKind::saliency;
    ExplainerParams params;
};

struct HardeningConfig {
    std::size_t trials = 20;
    std::size_t n_explore = 5;
    TransformOrder order{Transform::clip, Transform::mask, Transform::noise};
    MaskMode mask_mode = MaskMode::signed_threshold;
    bool retrain_attack = true;
    std::uint64_t seed = 0;
    std::optional<nlohmann::json> space;  // overrides the default search space
    std::optional<std::filesystem::path> attributions_dir;  // standalone path over XATT dumps
};

struct UtilityConfig {
    SensitivityConfig sensitivity;
    std::size_t n_samples = 20;  // evaluation inputs drawn from D_test_target
};

struct AblationConfig {
    std::vector<std::string> architectures;  // cross_architecture; empty means every zoo entry
    std::vector<double> gap_targets{0.75, 0.95};
};

struct RunConfig {
    std::string name = "run";
    std::uint64_t seed = 0;
    DatasetConfig dataset;
    SplitSpec split;
    ModelConfig target;
    ModelConfig shadow;
    std::vector<ExplainerEntry> explainers;
    OutputMode output_mode = OutputMode::logit;
    std::uint64_t explain_seed = 0;
    AttackProtocol attack;
    std::size_t eval_cap = 1000;
    HardeningConfig hardening;
    UtilityConfig utility;
    AblationConfig ablation;
    bool dump_attributions = false;  // audit writes XATT dumps usable by the standalone hardening path
    std::optional<std::filesystem::path> output_dir;  // not serialised; replays choose their own directory

    // Stage seeds missing from the JSON are derived from the master seed, so
    // the serialised form always pins every seed.
    static RunConfig from_json(const nlohmann::json& j);
    nlohmann::json to_json() const;
    void validate() const;
};

RunConfig load_run_config(const std::filesystem::path& path);

// Default output directory: $XLEAK_OUTPUT_ROOT/<name>, else ./xleak-runs/<name>.
std::filesystem::path default_output_dir(const RunConfig& cfg);

struct Prepared {
    Dataset data;
    SplitBundle bundle;
    TrainedModel target;
    TrainedModel shadow;
};

Dataset load_dataset(const DatasetConfig& cfg);
Prepared prepare(const RunConfig& cfg);

struct AuditRow {
    std::string method;
    std::string status;  // ok | unsupported
    std::string reason;
    AttackReport report;
    double explain_seconds = 0.0;
};

struct HardenRow {
    std::string method;
    std::string mode;    // parameters | transforms
    std::string status;  // ok | unsupported
    std::string reason;
    SearchResult search;
};

std::vector<AuditRow> cmd_audit(const RunConfig& cfg, const std::filesystem::path& out);
std::vector<HardenRow> cmd_harden(const RunConfig& cfg, const std::filesystem::path& out);
// which: ordering | disjoint | cross_architecture | generalization_gap
void cmd_ablate(const RunConfig& cfg, const std::string& which, const std::filesystem::path& out);
nlohmann::json cmd_report(const std::filesystem::path& run_dir);
Prepared cmd_train(const RunConfig& cfg, const std::filesystem::path& out);
// Explains one sample of D_test_target with every configured explainer.
void cmd_explain(const RunConfig& cfg, std::size_t sample_index, const std::filesystem::path& out,
                 const std::optional<std::filesystem::path>& model_stem = std::nullopt);

// Writes <command>.manifest.json: command, arguments, resolved config, stage seeds and
// the checksummed file inventory of `out`.
void write_manifest(const std::filesystem::path& out, const std::string& command, const nlohmann::json& args,
                    const RunConfig& cfg);

struct ManifestReplay {
    std::string command;
    nlohmann::json args;
    RunConfig config;
};

ManifestReplay read_manifest(const std::filesystem::path& path);

}  // namespace xleak

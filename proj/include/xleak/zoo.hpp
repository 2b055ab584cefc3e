#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include "json.hpp"
#include "xleak/data.hpp"
#include "xleak/nn.hpp"

namespace xleak {

enum class LrSchedule { constant, cosine_annealing };

struct TrainConfig {
    std::size_t epochs = 100;
    double learning_rate = 0.1;
    double weight_decay = 1e-4;
    LrSchedule schedule = LrSchedule::cosine_annealing;
    std::size_t batch_size = 64;
    std::uint64_t seed = 0;
    std::optional<double> target_test_accuracy;  // stop once reached

    void validate() const;
};

// Cosine annealing reaches zero on the final epoch.
double learning_rate_at(const TrainConfig& cfg, std::size_t epoch);

struct EpochLog {
    std::size_t epoch = 0;
    double learning_rate = 0.0;
    double loss = 0.0;
    double train_accuracy = 0.0;
    double test_accuracy = 0.0;
};

struct TrainedModel {
    Model model;
    std::string architecture;
    TrainConfig config;
    double train_accuracy = 0.0;
    double test_accuracy = 0.0;
    std::size_t epochs_run = 0;
    std::vector<EpochLog> log;
};

// Known architectures: "linear", "mlp_a", "mlp_b", "tiny_cnn".
std::vector<std::string> architecture_names();
// Input shape the architecture consumes for samples of `sample_shape`.
// tiny_cnn views a flat input of d = s*s features as a (1,s,s) image.
Shape architecture_input_shape(const std::string& name, const Shape& sample_shape);
std::vector<LayerSpec> architecture(const std::string& name, const Shape& sample_shape, std::size_t num_classes);

TrainedModel train(const std::vector<LayerSpec>& arch, const Dataset& data, const Dataset& test,
                   const TrainConfig& cfg, const std::string& arch_name = "custom");
TrainedModel train(const std::string& arch_name, const Dataset& data, const Dataset& test, const TrainConfig& cfg);

double accuracy(const Model& model, const Dataset& data);

nlohmann::json train_config_to_json(const TrainConfig& cfg);
TrainConfig train_config_from_json(const nlohmann::json& j);

void write_training_log(const std::filesystem::path& path, const std::vector<EpochLog>& log);
// Writes <stem>.xlk (binary parameters) and <stem>.json (training metadata).
void save_trained_model(const std::filesystem::path& stem, const TrainedModel& tm);
TrainedModel load_trained_model(const std::filesystem::path& stem);

}  // namespace xleak

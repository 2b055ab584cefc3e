#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "json.hpp"

#include "xleak/tensor.hpp"

namespace xleak {

struct Dataset {
    std::string name;
    std::string distribution = "in_distribution";
    Shape sample_shape;
    std::size_t num_classes = 0;
    Tensor X;  // (N, sample_shape...)
    std::vector<int> y;

    std::size_t size() const noexcept { return y.size(); }
    std::size_t feature_count() const { return shape_size(sample_shape); }
    Tensor sample(std::size_t i) const;
    std::span<const double> row(std::size_t i) const;
    std::vector<Tensor> samples() const;
    Dataset subset(std::span<const std::size_t> indices) const;
    // Same data viewed with a different per-sample shape of equal size.
    Dataset reshaped(Shape sample_shape) const;
    void validate() const;
};

Dataset make_dataset(std::string name, Shape sample_shape, std::size_t num_classes,
                     const std::vector<Tensor>& samples, std::vector<int> labels);

struct SyntheticSpec {
    std::size_t num_classes = 2;
    std::size_t features = 2;
    std::size_t samples = 100;
    double class_separation = 1.0;
    std::uint64_t seed = 0;
    double noise_std = 1.0;
    std::optional<Shape> sample_shape;  // e.g. (1,8,8) when features == 64
};

// Isotropic Gaussian blobs; every pair of class means is class_separation
// apart when num_classes <= features.
Dataset make_synthetic(const SyntheticSpec& spec);
Dataset make_synthetic(std::size_t num_classes, std::size_t features, std::size_t samples,
                       double class_separation, std::uint64_t seed);

struct CsvSchema {
    bool header = false;
    bool scale_to_unit = false;
    std::size_t num_classes = 0;  // 0: infer as max label + 1
    std::optional<Shape> sample_shape;
};

// Rows are `label,f1,...,fd`.
Dataset load_csv(const std::filesystem::path& path, const CsvSchema& schema = {});
void write_csv(const std::filesystem::path& path, const Dataset& data, bool header = false);

std::vector<double> feature_std(const Dataset& data);

enum class SplitMode { subset, disjoint };
enum class NonmemberSource { holdout_in_distribution, shifted_distribution };

const char* split_mode_name(SplitMode m);
const char* nonmember_source_name(NonmemberSource s);

// Shift in units of per-feature standard deviation.
struct DistributionShift {
    double offset = 0.5;
    double noise = 0.25;
};

struct SplitSpec {
    std::size_t target_train = 0;
    std::size_t target_test = 0;
    std::size_t shadow_train = 0;
    std::size_t shadow_test = 0;
    SplitMode mode = SplitMode::subset;
    NonmemberSource nonmember_source = NonmemberSource::shifted_distribution;
    DistributionShift shift;
    bool shift_target_nonmembers = false;
    std::size_t reference_size = 0;
    std::uint64_t seed = 0;
};

struct Subset {
    Dataset data;
    std::vector<std::size_t> indices;          // into the source dataset
    std::vector<std::uint8_t> target_member;   // per element
    std::vector<std::uint8_t> shadow_member;
};

struct SplitBundle {
    Subset target_train;
    Subset target_test;
    Subset shadow_train;
    Subset shadow_test;
    Subset reference;  // auxiliary in-distribution pool for explainers that need one
};

SplitBundle split(const Dataset& data, const SplitSpec& spec);

nlohmann::json split_spec_to_json(const SplitSpec& spec);
SplitSpec split_spec_from_json(const nlohmann::json& j);
nlohmann::json bundle_manifest(const SplitBundle& bundle, const SplitSpec& spec);

}  // namespace xleak

#include "xleak/data.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <fstream>
#include <numeric>
#include <sstream>
#include <unordered_set>

#include "xleak/error.hpp"
#include "xleak/rng.hpp"

namespace xleak {

using nlohmann::json;

Tensor Dataset::sample(std::size_t i) const {
    const std::size_t d = feature_count();
    return Tensor(sample_shape, std::vector<double>(X.data.begin() + static_cast<std::ptrdiff_t>(i * d),
                                                    X.data.begin() + static_cast<std::ptrdiff_t>((i + 1) * d)));
}

std::span<const double> Dataset::row(std::size_t i) const {
    const std::size_t d = feature_count();
    return std::span<const double>(X.data).subspan(i * d, d);
}

std::vector<Tensor> Dataset::samples() const {
    std::vector<Tensor> out;
    out.reserve(size());
    for (std::size_t i = 0; i < size(); ++i) out.push_back(sample(i));
    return out;
}

Dataset Dataset::subset(std::span<const std::size_t> indices) const {
    Dataset out;
    out.name = name;
    out.distribution = distribution;
    out.sample_shape = sample_shape;
    out.num_classes = num_classes;
    const std::size_t d = feature_count();
    Shape xs{indices.size()};
    xs.insert(xs.end(), sample_shape.begin(), sample_shape.end());
    out.X = Tensor(xs);
    out.y.reserve(indices.size());
    for (std::size_t k = 0; k < indices.size(); ++k) {
        require(indices[k] < size(), ErrorKind::invalid_argument, "subset index out of range");
        std::copy_n(X.data.begin() + static_cast<std::ptrdiff_t>(indices[k] * d), d,
                    out.X.data.begin() + static_cast<std::ptrdiff_t>(k * d));
        out.y.push_back(y[indices[k]]);
    }
    return out;
}

Dataset Dataset::reshaped(Shape s) const {
    require(shape_size(s) == feature_count(), ErrorKind::input_shape,
            "cannot view samples of " + shape_str(sample_shape) + " as " + shape_str(s));
    Dataset out = *this;
    out.sample_shape = s;
    Shape xs{size()};
    xs.insert(xs.end(), s.begin(), s.end());
    out.X.shape = xs;
    return out;
}

void Dataset::validate() const {
    require(X.size() == size() * feature_count(), ErrorKind::input_shape, "dataset X/y size mismatch");
    for (std::size_t i = 0; i < y.size(); ++i)
        require(y[i] >= 0 && static_cast<std::size_t>(y[i]) < num_classes, ErrorKind::class_out_of_range,
                "label " + std::to_string(y[i]) + " at row " + std::to_string(i) + " outside [0," +
                    std::to_string(num_classes) + ")");
}

Dataset make_dataset(std::string name, Shape sample_shape, std::size_t num_classes, const std::vector<Tensor>& samples,
                     std::vector<int> labels) {
    require(samples.size() == labels.size(), ErrorKind::invalid_argument, "one label per sample required");
    Dataset out;
    out.name = std::move(name);
    out.sample_shape = std::move(sample_shape);
    out.num_classes = num_classes;
    Shape xs{samples.size()};
    xs.insert(xs.end(), out.sample_shape.begin(), out.sample_shape.end());
    out.X = Tensor(xs);
    const std::size_t d = out.feature_count();
    for (std::size_t i = 0; i < samples.size(); ++i) {
        require(samples[i].size() == d, ErrorKind::input_shape, "sample " + std::to_string(i) + " has wrong size");
        std::copy(samples[i].data.begin(), samples[i].data.end(), out.X.data.begin() + static_cast<std::ptrdiff_t>(i * d));
    }
    out.y = std::move(labels);
    out.validate();
    return out;
}

Dataset make_synthetic(const SyntheticSpec& spec) {
    require(spec.features >= 2, ErrorKind::invalid_argument, "synthetic data needs at least 2 features");
    require(spec.num_classes >= 1 && spec.samples >= spec.num_classes, ErrorKind::invalid_argument,
            "synthetic data needs samples >= num_classes >= 1");
    require(spec.noise_std >= 0.0 && spec.class_separation >= 0.0, ErrorKind::invalid_argument,
            "synthetic noise and separation must be nonnegative");
    Rng mean_rng = make_rng(spec.seed, 1);
    Rng sample_rng = make_rng(spec.seed, 2);

    // Means on scaled basis vectors: |e_i - e_j| * s / sqrt(2) == s.
    const double scale = spec.class_separation / std::sqrt(2.0);
    std::vector<std::vector<double>> means(spec.num_classes, std::vector<double>(spec.features, 0.0));
    for (std::size_t k = 0; k < spec.num_classes; ++k) {
        if (k < spec.features) {
            means[k][k] = scale;
        } else {
            std::vector<double> dir(spec.features);
            for (double& v : dir) v = normal(mean_rng);
            const double n = l2_norm(dir);
            for (std::size_t j = 0; j < spec.features; ++j) means[k][j] = scale * dir[j] / n;
        }
    }

    Dataset out;
    out.name = "synthetic";
    out.num_classes = spec.num_classes;
    out.sample_shape = spec.sample_shape.value_or(Shape{spec.features});
    require(shape_size(out.sample_shape) == spec.features, ErrorKind::input_shape,
            "synthetic sample_shape " + shape_str(out.sample_shape) + " does not hold " +
                std::to_string(spec.features) + " features");
    Shape xs{spec.samples};
    xs.insert(xs.end(), out.sample_shape.begin(), out.sample_shape.end());
    out.X = Tensor(xs);
    out.y.resize(spec.samples);
    for (std::size_t i = 0; i < spec.samples; ++i) {
        const auto k = i % spec.num_classes;
        out.y[i] = static_cast<int>(k);
        for (std::size_t j = 0; j < spec.features; ++j)
            out.X.data[i * spec.features + j] = means[k][j] + spec.noise_std * normal(sample_rng);
    }
    return out;
}

Dataset make_synthetic(std::size_t num_classes, std::size_t features, std::size_t samples, double class_separation,
                       std::uint64_t seed) {
    SyntheticSpec spec;
    spec.num_classes = num_classes;
    spec.features = features;
    spec.samples = samples;
    spec.class_separation = class_separation;
    spec.seed = seed;
    return make_synthetic(spec);
}

namespace {

std::vector<std::string> split_fields(const std::string& line) {
    std::vector<std::string> out;
    std::string field;
    std::istringstream ss(line);
    while (std::getline(ss, field, ',')) out.push_back(field);
    if (!line.empty() && line.back() == ',') out.emplace_back();
    return out;
}

std::string trim(std::string s) {
    const auto b = s.find_first_not_of(" \t\r");
    const auto e = s.find_last_not_of(" \t\r");
    return b == std::string::npos ? std::string() : s.substr(b, e - b + 1);
}

double parse_number(const std::string& raw, std::size_t row, std::size_t col) {
    const std::string s = trim(raw);
    double v = 0.0;
    const auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
    if (s.empty() || ec != std::errc() || ptr != s.data() + s.size() || !std::isfinite(v))
        fail(ErrorKind::parse, "non-numeric cell '" + s + "' at row " + std::to_string(row) + ", column " +
                                   std::to_string(col));
    return v;
}

}  // namespace

Dataset load_csv(const std::filesystem::path& path, const CsvSchema& schema) {
    std::ifstream in(path);
    require(static_cast<bool>(in), ErrorKind::io, "cannot open dataset " + path.string());
    std::vector<double> values;
    std::vector<int> labels;
    std::size_t width = 0;
    std::string line;
    std::size_t row = 0;
    bool skipped_header = !schema.header;
    while (std::getline(in, line)) {
        ++row;
        if (trim(line).empty()) continue;
        if (!skipped_header) {
            skipped_header = true;
            continue;
        }
        const auto fields = split_fields(line);
        require(fields.size() >= 2, ErrorKind::parse, "row " + std::to_string(row) + " needs a label and features");
        if (width == 0) width = fields.size();
        require(fields.size() == width, ErrorKind::parse,
                "ragged row " + std::to_string(row) + ": " + std::to_string(fields.size()) + " columns, expected " +
                    std::to_string(width));
        const double label = parse_number(fields[0], row, 1);
        require(label >= 0 && label == std::floor(label), ErrorKind::parse,
                "label at row " + std::to_string(row) + " is not a nonnegative integer");
        labels.push_back(static_cast<int>(label));
        for (std::size_t c = 1; c < fields.size(); ++c) values.push_back(parse_number(fields[c], row, c + 1));
    }
    require(!labels.empty(), ErrorKind::parse, "dataset " + path.string() + " has no rows");

    const std::size_t d = width - 1;
    if (schema.scale_to_unit) {
        for (std::size_t j = 0; j < d; ++j) {
            double lo = values[j], hi = values[j];
            for (std::size_t i = 0; i < labels.size(); ++i) {
                lo = std::min(lo, values[i * d + j]);
                hi = std::max(hi, values[i * d + j]);
            }
            const double span = hi - lo;
            for (std::size_t i = 0; i < labels.size(); ++i)
                values[i * d + j] = span > 0.0 ? (values[i * d + j] - lo) / span : 0.0;
        }
    }

    Dataset out;
    out.name = path.stem().string();
    const int max_label = *std::max_element(labels.begin(), labels.end());
    out.num_classes = schema.num_classes ? schema.num_classes : static_cast<std::size_t>(max_label) + 1;
    out.sample_shape = schema.sample_shape.value_or(Shape{d});
    require(shape_size(out.sample_shape) == d, ErrorKind::parse,
            "schema sample_shape " + shape_str(out.sample_shape) + " does not match " + std::to_string(d) + " features");
    Shape xs{labels.size()};
    xs.insert(xs.end(), out.sample_shape.begin(), out.sample_shape.end());
    out.X = Tensor(xs, std::move(values));
    out.y = std::move(labels);
    for (std::size_t i = 0; i < out.y.size(); ++i)
        require(static_cast<std::size_t>(out.y[i]) < out.num_classes, ErrorKind::parse,
                "label " + std::to_string(out.y[i]) + " out of range at data row " + std::to_string(i + 1));
    return out;
}

void write_csv(const std::filesystem::path& path, const Dataset& data, bool header) {
    std::ofstream os(path);
    require(static_cast<bool>(os), ErrorKind::io, "cannot write " + path.string());
    const std::size_t d = data.feature_count();
    if (header) {
        os << "label";
        for (std::size_t j = 0; j < d; ++j) os << ",f" << j;
        os << '\n';
    }
    char buf[64];
    for (std::size_t i = 0; i < data.size(); ++i) {
        os << data.y[i];
        for (double v : data.row(i)) {
            const auto [ptr, ec] = std::to_chars(buf, buf + sizeof buf, v);
            os << ',' << std::string_view(buf, static_cast<std::size_t>(ptr - buf));
        }
        os << '\n';
    }
}

std::vector<double> feature_std(const Dataset& data) {
    const std::size_t d = data.feature_count();
    const std::size_t n = data.size();
    std::vector<double> mean(d, 0.0), var(d, 0.0);
    if (n == 0) return var;
    for (std::size_t i = 0; i < n; ++i)
        for (std::size_t j = 0; j < d; ++j) mean[j] += data.X.data[i * d + j];
    for (double& m : mean) m /= static_cast<double>(n);
    for (std::size_t i = 0; i < n; ++i)
        for (std::size_t j = 0; j < d; ++j) {
            const double r = data.X.data[i * d + j] - mean[j];
            var[j] += r * r;
        }
    for (double& v : var) v = std::sqrt(v / static_cast<double>(n));
    return var;
}

const char* split_mode_name(SplitMode m) { return m == SplitMode::subset ? "subset" : "disjoint"; }

const char* nonmember_source_name(NonmemberSource s) {
    return s == NonmemberSource::holdout_in_distribution ? "holdout_in_distribution" : "shifted_distribution";
}

namespace {

Subset make_subset(const Dataset& data, std::vector<std::size_t> indices,
                   const std::unordered_set<std::size_t>& target_members,
                   const std::unordered_set<std::size_t>& shadow_members) {
    Subset s;
    s.data = data.subset(indices);
    for (auto i : indices) {
        s.target_member.push_back(target_members.count(i) ? 1 : 0);
        s.shadow_member.push_back(shadow_members.count(i) ? 1 : 0);
    }
    s.indices = std::move(indices);
    return s;
}

void apply_shift(Subset& s, const std::vector<double>& stdev, const DistributionShift& shift, Rng& rng) {
    if (shift.offset == 0.0 && shift.noise == 0.0) return;
    const std::size_t d = s.data.feature_count();
    for (std::size_t i = 0; i < s.data.size(); ++i)
        for (std::size_t j = 0; j < d; ++j)
            s.data.X.data[i * d + j] += shift.offset * stdev[j] + shift.noise * stdev[j] * normal(rng);
    s.data.distribution = "shifted";
}

}  // namespace

SplitBundle split(const Dataset& data, const SplitSpec& spec) {
    const std::size_t n = data.size();
    const std::size_t a = spec.target_train, b = spec.target_test, c = spec.shadow_train, d = spec.shadow_test;
    require(a > 0 && b > 0 && c > 0 && d > 0, ErrorKind::invalid_argument, "all four split sizes must be positive");
    require(a + b <= n, ErrorKind::invalid_argument,
            "infeasible split: target train+test " + std::to_string(a + b) + " exceeds " + std::to_string(n) +
                " samples");

    std::vector<std::size_t> perm(n);
    std::iota(perm.begin(), perm.end(), std::size_t{0});
    Rng rng = make_rng(spec.seed, 11);
    std::shuffle(perm.begin(), perm.end(), rng);
    auto take = [&](std::size_t from, std::size_t count) {
        return std::vector<std::size_t>(perm.begin() + static_cast<std::ptrdiff_t>(from),
                                        perm.begin() + static_cast<std::ptrdiff_t>(from + count));
    };

    std::vector<std::size_t> tt = take(0, a), te = take(a, b), st, sx, ref;
    std::vector<std::size_t> leftover;
    if (spec.mode == SplitMode::subset) {
        require(c <= a, ErrorKind::invalid_argument, "infeasible split: shadow train larger than target train");
        require(d <= (n - a - b) + (a - c), ErrorKind::invalid_argument,
                "infeasible split: not enough non-members of the shadow model for shadow test");
        st.assign(tt.begin(), tt.begin() + static_cast<std::ptrdiff_t>(c));
        // Shadow non-members: unused data first, then target members outside shadow train.
        std::vector<std::size_t> pool = take(a + b, n - a - b);
        pool.insert(pool.end(), tt.begin() + static_cast<std::ptrdiff_t>(c), tt.end());
        sx.assign(pool.begin(), pool.begin() + static_cast<std::ptrdiff_t>(d));
        const std::size_t unused = n - a - b;
        if (d < unused) leftover = take(a + b + d, unused - d);
    } else {
        require(a + b + c <= n, ErrorKind::invalid_argument,
                "infeasible split: disjoint mode would require overlapping target and shadow training data");
        require(a + b + c + d <= n, ErrorKind::invalid_argument,
                "infeasible split: disjoint mode would require overlapping shadow test data");
        st = take(a + b, c);
        sx = take(a + b + c, d);
        leftover = take(a + b + c + d, n - a - b - c - d);
    }
    for (std::size_t i = 0; i < spec.reference_size && i < leftover.size(); ++i) ref.push_back(leftover[i]);
    for (std::size_t i = 0; ref.size() < spec.reference_size && i < st.size(); ++i) ref.push_back(st[i]);

    const std::unordered_set<std::size_t> target_members(tt.begin(), tt.end());
    const std::unordered_set<std::size_t> shadow_members(st.begin(), st.end());
    SplitBundle bundle;
    bundle.target_train = make_subset(data, tt, target_members, shadow_members);
    bundle.target_test = make_subset(data, te, target_members, shadow_members);
    bundle.shadow_train = make_subset(data, st, target_members, shadow_members);
    bundle.shadow_test = make_subset(data, sx, target_members, shadow_members);
    bundle.reference = make_subset(data, ref, target_members, shadow_members);

    if (spec.nonmember_source == NonmemberSource::shifted_distribution) {
        const auto stdev = feature_std(data);
        Rng shift_rng = make_rng(spec.seed, 12);
        apply_shift(bundle.shadow_test, stdev, spec.shift, shift_rng);
        if (spec.shift_target_nonmembers) apply_shift(bundle.target_test, stdev, spec.shift, shift_rng);
    }
    return bundle;
}

json split_spec_to_json(const SplitSpec& spec) {
    return json{{"target_train", spec.target_train},
                {"target_test", spec.target_test},
                {"shadow_train", spec.shadow_train},
                {"shadow_test", spec.shadow_test},
                {"mode", split_mode_name(spec.mode)},
                {"nonmember_source", nonmember_source_name(spec.nonmember_source)},
                {"shift_offset", spec.shift.offset},
                {"shift_noise", spec.shift.noise},
                {"shift_target_nonmembers", spec.shift_target_nonmembers},
                {"reference_size", spec.reference_size},
                {"seed", spec.seed}};
}

SplitSpec split_spec_from_json(const json& j) {
    SplitSpec s;
    s.target_train = j.at("target_train").get<std::size_t>();
    s.target_test = j.at("target_test").get<std::size_t>();
    s.shadow_train = j.at("shadow_train").get<std::size_t>();
    s.shadow_test = j.at("shadow_test").get<std::size_t>();
    const std::string mode = j.value("mode", "subset");
    require(mode == "subset" || mode == "disjoint", ErrorKind::config, "split mode must be subset or disjoint");
    s.mode = mode == "subset" ? SplitMode::subset : SplitMode::disjoint;
    const std::string src = j.value("nonmember_source", "shifted_distribution");
    require(src == "holdout_in_distribution" || src == "shifted_distribution", ErrorKind::config,
            "unknown nonmember_source " + src);
    s.nonmember_source =
        src == "holdout_in_distribution" ? NonmemberSource::holdout_in_distribution : NonmemberSource::shifted_distribution;
    s.shift.offset = j.value("shift_offset", s.shift.offset);
    s.shift.noise = j.value("shift_noise", s.shift.noise);
    s.shift_target_nonmembers = j.value("shift_target_nonmembers", false);
    s.reference_size = j.value("reference_size", std::size_t{0});
    s.seed = j.value("seed", std::uint64_t{0});
    return s;
}

json bundle_manifest(const SplitBundle& bundle, const SplitSpec& spec) {
    return json{{"spec", split_spec_to_json(spec)},
                {"target_train", bundle.target_train.indices},
                {"target_test", bundle.target_test.indices},
                {"shadow_train", bundle.shadow_train.indices},
                {"shadow_test", bundle.shadow_test.indices},
                {"reference", bundle.reference.indices}};
}

}  // namespace xleak

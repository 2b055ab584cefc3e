#include "xleak/utility.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <cstring>
#include <fstream>

#include "xleak/error.hpp"

namespace xleak {

using nlohmann::json;

ExplanationFn explainer_fn(const Model& model, ExplainerKind kind, const ExplainerParams& params,
                           const ExplainContext& ctx) {
    const ExplainerParams resolved = resolve_params(kind, params);
    return [&model, kind, resolved, ctx](const Tensor& x, std::uint64_t) {
        return explain(model, x, kind, resolved, ctx).values.data;
    };
}

const char* estimator_name(SensitivityEstimator e) {
    switch (e) {
        case SensitivityEstimator::monte_carlo: return "monte_carlo";
        case SensitivityEstimator::grid: return "grid";
        case SensitivityEstimator::ascent: return "ascent";
    }
    return "?";
}

SensitivityEstimator estimator_from_name(const std::string& name) {
    for (auto e : {SensitivityEstimator::monte_carlo, SensitivityEstimator::grid, SensitivityEstimator::ascent})
        if (name == estimator_name(e)) return e;
    fail(ErrorKind::config, "unknown sensitivity estimator '" + name + "'");
}

json SensitivityEstimate::to_json() const {
    return json{{"value", value},
                {"radius", radius},
                {"norm", "linf_ball_l2_output"},
                {"estimator", estimator_name(estimator)},
                {"samples", samples},
                {"seed", seed}};
}

namespace {

double change(const std::vector<double>& a, const std::vector<double>& b) {
    require(a.size() == b.size(), ErrorKind::input_shape, "explanation size changed under perturbation");
    return l2_distance(a, b);
}

std::vector<std::vector<double>> unit_directions(std::size_t d, std::size_t k, std::uint64_t seed) {
    Rng rng = make_rng(seed, 0xd1);
    std::uniform_real_distribution<double> u(-1.0, 1.0);
    std::vector<std::vector<double>> dirs(k, std::vector<double>(d));
    for (auto& v : dirs)
        for (double& e : v) e = u(rng);
    return dirs;
}

Tensor shifted(const Tensor& x, const std::vector<double>& dir, double scale) {
    Tensor p = x;
    for (std::size_t i = 0; i < p.size(); ++i) p[i] += scale * dir[i];
    return p;
}

}  // namespace

SensitivityEstimate sensitivity(const ExplanationFn& fn, const Tensor& x, const SensitivityConfig& cfg,
                                std::uint64_t sample_id) {
    require(cfg.radius >= 0.0 && std::isfinite(cfg.radius), ErrorKind::invalid_argument, "radius must be >= 0");
    SensitivityEstimate est{0.0, cfg.radius, cfg.estimator, cfg.samples, cfg.seed};
    if (cfg.radius == 0.0) return est;
    require(cfg.samples >= 1, ErrorKind::invalid_argument, "sensitivity needs at least one sample");
    const auto base = fn(x, sample_id);
    const std::size_t d = x.size();
    const double r = cfg.radius;

    switch (cfg.estimator) {
        case SensitivityEstimator::monte_carlo: {
            for (const auto& dir : unit_directions(d, cfg.samples, cfg.seed))
                est.value = std::max(est.value, change(fn(shifted(x, dir, r), sample_id), base));
            break;
        }
        case SensitivityEstimator::grid: {
            require(d <= 2, ErrorKind::invalid_argument, "grid estimator supports at most 2 input coordinates");
            const std::size_t g = std::max<std::size_t>(cfg.samples, 2);
            std::vector<double> ticks(g);
            for (std::size_t i = 0; i < g; ++i) ticks[i] = -r + 2.0 * r * double(i) / double(g - 1);
            std::vector<std::size_t> idx(d, 0);
            const std::size_t total = d == 1 ? g : g * g;
            for (std::size_t n = 0; n < total; ++n) {
                Tensor p = x;
                std::size_t rem = n;
                for (std::size_t i = 0; i < d; ++i) {
                    p[i] += ticks[rem % g];
                    rem /= g;
                }
                est.value = std::max(est.value, change(fn(p, sample_id), base));
            }
            break;
        }
        case SensitivityEstimator::ascent: {
            // Seeded hill-climb in the box, step shrinking geometrically.
            Rng rng = make_rng(cfg.seed, 0xa5);
            std::uniform_real_distribution<double> u(-1.0, 1.0);
            std::normal_distribution<double> gauss(0.0, 1.0);
            std::vector<double> delta(d);
            for (double& e : delta) e = r * u(rng);
            double best = change(fn(shifted(x, delta, 1.0), sample_id), base);
            double step = 0.5 * r;
            for (std::size_t s = 1; s < cfg.samples; ++s) {
                auto cand = delta;
                for (double& e : cand) e = std::clamp(e + step * gauss(rng), -r, r);
                const double v = change(fn(shifted(x, cand, 1.0), sample_id), base);
                if (v > best) {
                    best = v;
                    delta = std::move(cand);
                } else {
                    step = std::max(step * 0.9, 1e-3 * r);
                }
            }
            est.value = best;
            break;
        }
    }
    return est;
}

std::vector<double> sensitivity_curve(const ExplanationFn& fn, const Tensor& x, std::span<const double> radii,
                                      std::size_t samples, std::uint64_t seed, std::uint64_t sample_id) {
    for (std::size_t i = 0; i < radii.size(); ++i) {
        require(radii[i] >= 0.0, ErrorKind::invalid_argument, "radius must be >= 0");
        require(i == 0 || radii[i] >= radii[i - 1], ErrorKind::invalid_argument, "radii must be non-decreasing");
    }
    const auto base = fn(x, sample_id);
    const auto dirs = unit_directions(x.size(), samples, seed);
    std::vector<double> curve;
    double running = 0.0;
    for (double r : radii) {
        if (r > 0.0)
            for (const auto& dir : dirs) running = std::max(running, change(fn(shifted(x, dir, r), sample_id), base));
        curve.push_back(running);
    }
    return curve;
}

std::uint64_t content_id(const Tensor& x) {
    std::uint64_t h = 0x84222325cbf29ce4ULL;
    for (double v : x.data) {
        std::uint64_t bits;
        std::memcpy(&bits, &v, sizeof bits);
        h = splitmix64(h ^ bits);
    }
    return h;
}

DatasetSensitivity dataset_sensitivity(const ExplanationFn& fn, std::span<const Tensor> samples,
                                       const SensitivityConfig& cfg) {
    require(!samples.empty(), ErrorKind::invalid_argument, "dataset sensitivity needs at least one sample");
    DatasetSensitivity out;
    for (const auto& x : samples) {
        const auto id = content_id(x);
        out.sample_ids.push_back(id);
        out.values.push_back(sensitivity(fn, x, cfg, id).value);
    }
    auto sorted = out.values;
    std::sort(sorted.begin(), sorted.end());
    double total = 0.0;
    for (double v : sorted) total += v;
    out.mean = {total / double(sorted.size()), cfg.radius, cfg.estimator, cfg.samples, cfg.seed};
    return out;
}

const char* direction_name(UtilityDirection d) {
    switch (d) {
        case UtilityDirection::utility_gain: return "utility_gain";
        case UtilityDirection::utility_loss: return "utility_loss";
        case UtilityDirection::unchanged: return "unchanged";
        case UtilityDirection::undefined: return "undefined";
    }
    return "?";
}

DeltaS delta_s(double pre, double post) {
    require(pre != 0.0, ErrorKind::undefined_baseline, "delta_s is undefined for a zero pre-hardening sensitivity");
    require(pre > 0.0 && post >= 0.0, ErrorKind::invalid_argument, "sensitivities must be nonnegative");
    DeltaS d;
    d.percent = std::abs(pre - post) / pre * 100.0;
    d.direction = post < pre   ? UtilityDirection::utility_gain
                  : post > pre ? UtilityDirection::utility_loss
                               : UtilityDirection::unchanged;
    return d;
}

void write_sensitivity_csv(const std::filesystem::path& path, const DatasetSensitivity& ds) {
    std::ofstream os(path);
    require(bool(os), ErrorKind::io, "cannot open " + path.string() + " for writing");
    os << "sample_id,value\n";
    char buf[32];
    for (std::size_t i = 0; i < ds.values.size(); ++i) {
        const auto r = std::to_chars(buf, buf + sizeof buf, ds.values[i]);
        os << ds.sample_ids[i] << ',' << std::string_view(buf, r.ptr) << '\n';
    }
}

}  // namespace xleak

#include "xleak/hardening.hpp"

#include <algorithm>
#include <bit>
#include <charconv>
#include <chrono>
#include <cmath>
#include <fstream>
#include <limits>
#include <numeric>

#include "xleak/error.hpp"

namespace xleak {

using nlohmann::json;

std::string order_string(const TransformOrder& order) {
    std::string s;
    for (auto t : order) s.push_back(static_cast<char>(t));
    return s;
}

TransformOrder parse_order(const std::string& s) {
    TransformOrder order;
    for (char c : s) {
        require(c == 'C' || c == 'M' || c == 'N', ErrorKind::config, "transform order may only use C, M, N: " + s);
        const auto t = static_cast<Transform>(c);
        require(std::find(order.begin(), order.end(), t) == order.end(), ErrorKind::config,
                "transform order repeats a step: " + s);
        order.push_back(t);
    }
    require(!order.empty(), ErrorKind::config, "transform order must not be empty");
    return order;
}

std::vector<TransformOrder> all_orders() {
    const Transform base[3] = {Transform::clip, Transform::mask, Transform::noise};
    std::vector<TransformOrder> out;
    for (std::size_t len = 1; len <= 3; ++len) {
        for (std::uint32_t bits = 1; bits < 8; ++bits) {
            if (std::size_t(std::popcount(bits)) != len) continue;
            TransformOrder pick;
            for (std::size_t i = 0; i < 3; ++i)
                if (bits & (1u << i)) pick.push_back(base[i]);
            std::sort(pick.begin(), pick.end(), [&](Transform a, Transform b) {
                return std::find(base, base + 3, a) < std::find(base, base + 3, b);
            });
            do out.push_back(pick);
            while (std::next_permutation(pick.begin(), pick.end(), [&](Transform a, Transform b) {
                return std::find(base, base + 3, a) < std::find(base, base + 3, b);
            }));
        }
    }
    return out;
}

namespace {

json encode_real(double v) {
    if (std::isinf(v)) return v > 0 ? "inf" : "-inf";
    return v;
}

double decode_real(const json& j) {
    if (j.is_string()) {
        const auto s = j.get<std::string>();
        if (s == "inf") return kInf;
        if (s == "-inf") return -kInf;
        fail(ErrorKind::config, "expected a number or \"inf\"/\"-inf\", got " + s);
    }
    require(j.is_number(), ErrorKind::config, "expected a number, got " + j.dump());
    return j.get<double>();
}

std::string fmt(double v) {
    if (std::isinf(v)) return v > 0 ? "inf" : "-inf";
    char buf[32];
    const auto r = std::to_chars(buf, buf + sizeof buf, v);
    return std::string(buf, r.ptr);
}

std::string csv_quote(const std::string& s) {
    std::string out = "\"";
    for (char c : s) {
        if (c == '"') out.push_back('"');
        out.push_back(c);
    }
    out.push_back('"');
    return out;
}

}  // namespace

void TransformParams::validate() const {
    require(sigma >= 0.0 && !std::isnan(sigma), ErrorKind::invalid_argument, "noise sigma must be >= 0");
    require(!(c_min > c_max), ErrorKind::invalid_argument, "clip bounds need c_min <= c_max");
    require(!std::isnan(tau), ErrorKind::invalid_argument, "mask threshold is NaN");
    require(!order.empty(), ErrorKind::invalid_argument, "transform order must not be empty");
    parse_order(order_string(order));
}

json TransformParams::to_json() const {
    return json{{"sigma", encode_real(sigma)},
                {"c_min", encode_real(c_min)},
                {"c_max", encode_real(c_max)},
                {"tau", encode_real(tau)},
                {"order", order_string(order)},
                {"mask_mode", mask_mode == MaskMode::signed_threshold ? "signed" : "magnitude"},
                {"seed", seed}};
}

TransformParams TransformParams::from_json(const json& j) {
    TransformParams p;
    if (j.contains("sigma")) p.sigma = decode_real(j["sigma"]);
    if (j.contains("c_min")) p.c_min = decode_real(j["c_min"]);
    if (j.contains("c_max")) p.c_max = decode_real(j["c_max"]);
    if (j.contains("tau")) p.tau = decode_real(j["tau"]);
    if (j.contains("order")) p.order = parse_order(j["order"].get<std::string>());
    const std::string mode = j.value("mask_mode", std::string("signed"));
    require(mode == "signed" || mode == "magnitude", ErrorKind::config, "mask_mode must be signed or magnitude");
    p.mask_mode = mode == "signed" ? MaskMode::signed_threshold : MaskMode::magnitude;
    p.seed = j.value("seed", std::uint64_t{0});
    p.validate();
    return p;
}

std::vector<double> apply_transforms(std::span<const double> phi, const TransformParams& p, std::uint64_t sample_id) {
    p.validate();
    std::vector<double> out(phi.begin(), phi.end());
    for (auto t : p.order) {
        switch (t) {
            case Transform::clip:
                for (double& v : out) v = std::clamp(v, p.c_min, p.c_max);
                break;
            case Transform::mask:
                for (double& v : out) {
                    const double probe = p.mask_mode == MaskMode::magnitude ? std::abs(v) : v;
                    if (probe < p.tau) v = 0.0;
                }
                break;
            case Transform::noise:
                if (p.sigma > 0.0) {
                    Rng rng = make_rng(derive_seed(p.seed, sample_id), 0x4e);
                    std::normal_distribution<double> gauss(0.0, 1.0);
                    for (double& v : out) v += p.sigma * gauss(rng);
                }
                break;
        }
    }
    return out;
}

AttributionMap apply_transforms(const AttributionMap& phi, const TransformParams& params, std::uint64_t sample_id) {
    AttributionMap out = phi;
    out.values.data = apply_transforms(phi.values.data, params, sample_id);
    return out;
}

// ---- search space ----

bool Dimension::contains(const ParamValue& v) const {
    switch (type) {
        case ParamType::categorical:
            return std::find(choices.begin(), choices.end(), v) != choices.end();
        case ParamType::integer: {
            const auto* i = std::get_if<std::int64_t>(&v);
            return i && double(*i) >= lo && double(*i) <= hi;
        }
        case ParamType::real: {
            const auto* d = std::get_if<double>(&v);
            return d && *d >= lo && *d <= hi;
        }
        default:
            return false;
    }
}

bool SearchSpace::contains(const ExplainerParams& point) const {
    for (const auto& d : dims)
        if (!point.has(d.name) || !d.contains(point.at(d.name))) return false;
    return true;
}

json SearchSpace::to_json() const {
    json dj = json::array();
    for (const auto& d : dims) {
        json e{{"name", d.name}};
        if (d.type == ParamType::categorical) {
            e["type"] = "categorical";
            json c = json::array();
            for (const auto& v : d.choices) c.push_back(param_value_to_json(v));
            e["choices"] = c;
        } else {
            e["type"] = d.type == ParamType::integer ? "integer" : "real";
            e["lo"] = encode_real(d.lo);
            e["hi"] = encode_real(d.hi);
        }
        dj.push_back(e);
    }
    return json{{"dims", dj}, {"fixed", fixed.to_json()}};
}

SearchSpace SearchSpace::from_json(const json& j) {
    require(j.is_object() && j.contains("dims") && j.at("dims").is_array(), ErrorKind::config,
            "search space needs a dims array");
    SearchSpace sp;
    for (const auto& e : j.at("dims")) {
        Dimension d;
        d.name = e.at("name").get<std::string>();
        const std::string type = e.value("type", std::string("real"));
        if (type == "categorical") {
            d.type = ParamType::categorical;
            require(e.contains("choices") && e.at("choices").is_array() && !e.at("choices").empty(), ErrorKind::config,
                    "categorical dimension " + d.name + " needs choices");
            for (const auto& c : e.at("choices")) d.choices.push_back(ExplainerParams::from_json(json{{"v", c}}).at("v"));
        } else {
            require(type == "real" || type == "integer", ErrorKind::config, "unknown dimension type " + type);
            d.type = type == "real" ? ParamType::real : ParamType::integer;
            d.lo = decode_real(e.at("lo"));
            d.hi = decode_real(e.at("hi"));
            require(d.lo <= d.hi, ErrorKind::config, "dimension " + d.name + " has lo > hi");
        }
        sp.dims.push_back(std::move(d));
    }
    if (j.contains("fixed")) sp.fixed = ExplainerParams::from_json(j.at("fixed"));
    return sp;
}

namespace {

Dimension real_dim(std::string name, double lo, double hi) { return {std::move(name), ParamType::real, lo, hi, {}}; }
Dimension int_dim(std::string name, std::int64_t lo, std::int64_t hi) {
    return {std::move(name), ParamType::integer, double(lo), double(hi), {}};
}
Dimension cat_dim(std::string name, std::vector<ParamValue> choices) {
    return {std::move(name), ParamType::categorical, 0, 0, std::move(choices)};
}
Dimension bool_dim(std::string name) { return cat_dim(std::move(name), {false, true}); }

std::vector<ParamValue> string_choices(ExplainerKind kind, const std::string& name) {
    std::vector<ParamValue> out;
    for (const auto& s : param_schema(kind))
        if (s.name == name)
            for (const auto& c : s.domain.choices) out.emplace_back(c);
    return out;
}

}  // namespace

SearchSpace default_explainer_space(ExplainerKind kind, const Shape& input_shape) {
    SearchSpace sp;
    const auto cells = static_cast<std::int64_t>(spatial_cells(input_shape));
    switch (kind) {
        case ExplainerKind::smoothgrad:
        case ExplainerKind::vargrad:
            sp.dims = {real_dim("stdevs", 0.0, 4.0), bool_dim("draw_baseline_from_distrib"),
                       int_dim("nt_samples", 1, 20)};
            break;
        case ExplainerKind::integrated_gradients:
            sp.dims = {bool_dim("multiply_by_inputs"), cat_dim("method", string_choices(kind, "method")),
                       int_dim("n_steps", 1, 64)};
            break;
        case ExplainerKind::gradcam:
        case ExplainerKind::gradcam_pp:
            sp.dims = {cat_dim("interpolation_mode", string_choices(kind, "interpolation_mode")),
                       bool_dim("attr_to_layer_input")};
            break;
        case ExplainerKind::occlusion: {
            std::vector<ParamValue> windows{std::vector<std::int64_t>{}}, strides{std::vector<std::int64_t>{}};
            if (input_shape.size() == 1) {
                for (std::int64_t w = 1; w <= std::min<std::int64_t>(4, std::int64_t(input_shape[0])); ++w)
                    windows.emplace_back(std::vector<std::int64_t>{w});
                strides.emplace_back(std::vector<std::int64_t>{1});
            } else if (input_shape.size() == 3) {
                const auto c = std::int64_t(input_shape[0]);
                const auto lim = std::min<std::int64_t>({4, std::int64_t(input_shape[1]), std::int64_t(input_shape[2])});
                for (std::int64_t w = 1; w <= lim; ++w) windows.emplace_back(std::vector<std::int64_t>{c, w, w});
                strides.emplace_back(std::vector<std::int64_t>{c, 1, 1});
            }
            sp.dims = {cat_dim("sliding_window_shapes", windows), cat_dim("strides", strides),
                       real_dim("baseline_value", -1.0, 1.0)};
            break;
        }
        case ExplainerKind::kernel_shap:
            sp.dims = {int_dim("n_segments", 1, std::max<std::int64_t>(cells, 1)), int_dim("compactness", 1, 50)};
            break;
        case ExplainerKind::lime:
            sp.dims = {int_dim("n_segments", 1, std::max<std::int64_t>(cells, 1)), int_dim("compactness", 1, 50),
                       real_dim("kernel_width", 0.05, 2.0), real_dim("ridge_lambda", 0.1, 10.0)};
            break;
        case ExplainerKind::anchors:
            sp.dims = {real_dim("threshold", 0.5, 0.99),
                       real_dim("tau", 0.05, 0.3),
                       real_dim("delta", 0.01, 0.5),
                       int_dim("beam_size", 1, 3),
                       real_dim("p_sample", 0.1, 0.9),
                       cat_dim("segmentation_fn", string_choices(kind, "segmentation_fn")),
                       int_dim("n_segments", 1, std::max<std::int64_t>(cells, 1)),
                       int_dim("compactness", 1, 50),
                       real_dim("sigma", 0.0, 2.0)};
            break;
        case ExplainerKind::protodash:
            sp.dims = {real_dim("sigma", 0.1, 10.0), cat_dim("kernel", string_choices(kind, "kernel")),
                       int_dim("m", 1, 10)};
            break;
        default:
            fail(ErrorKind::invalid_argument,
                 std::string(explainer_name(kind)) + " has no parameters to search; harden it with transforms");
    }
    return sp;
}

namespace {

double quantile(std::vector<double> v, double q) {
    if (v.empty()) return 0.0;
    std::sort(v.begin(), v.end());
    const double pos = q * double(v.size() - 1);
    const auto lo = static_cast<std::size_t>(std::floor(pos));
    const std::size_t hi = std::min(lo + 1, v.size() - 1);
    return v[lo] + (pos - double(lo)) * (v[hi] - v[lo]);
}

struct RowStats {
    double min = 0.0, max = 0.0, std = 0.0;
    std::vector<double> abs;
};

RowStats row_stats(const FeatureRows& rows) {
    RowStats s;
    double sum = 0.0, sq = 0.0;
    std::size_t n = 0;
    s.min = kInf;
    s.max = -kInf;
    for (const auto& r : rows)
        for (double v : r) {
            s.min = std::min(s.min, v);
            s.max = std::max(s.max, v);
            sum += v;
            sq += v * v;
            s.abs.push_back(std::abs(v));
            ++n;
        }
    require(n > 0, ErrorKind::invalid_argument, "no baseline attributions to derive transform ranges from");
    const double mean = sum / double(n);
    s.std = std::sqrt(std::max(0.0, sq / double(n) - mean * mean));
    return s;
}

}  // namespace

SearchSpace default_transform_space(const FeatureRows& baseline) {
    const RowStats s = row_stats(baseline);
    SearchSpace sp;
    sp.dims = {real_dim("sigma", 0.0, 2.0 * s.std), real_dim("c_min", std::min(s.min, 0.0), 0.0),
               real_dim("c_max", 0.0, std::max(s.max, 0.0)), real_dim("tau", 0.0, quantile(s.abs, 0.9))};
    return sp;
}

SearchSpace identity_transform_space() {
    SearchSpace sp;
    sp.dims = {real_dim("sigma", 0.0, 0.0), real_dim("c_min", -kInf, -kInf), real_dim("c_max", kInf, kInf),
               real_dim("tau", -kInf, -kInf)};
    return sp;
}

TransformParams transform_from_point(const ExplainerParams& point, const TransformOrder& order, MaskMode mode,
                                     std::uint64_t seed) {
    TransformParams t;
    t.sigma = point.get_real("sigma");
    t.c_min = point.get_real("c_min");
    t.c_max = point.get_real("c_max");
    t.tau = point.get_real("tau");
    t.order = order;
    t.mask_mode = mode;
    t.seed = seed;
    return t;
}

ExplainerParams sample_point(const SearchSpace& space, Rng& rng) {
    ExplainerParams p = space.fixed;
    for (const auto& d : space.dims) {
        switch (d.type) {
            case ParamType::real:
                p.set(d.name, d.lo == d.hi ? d.lo : uniform(rng, d.lo, d.hi));
                break;
            case ParamType::integer:
                p.set(d.name, std::uniform_int_distribution<std::int64_t>(std::int64_t(d.lo), std::int64_t(d.hi))(rng));
                break;
            case ParamType::categorical:
                require(!d.choices.empty(), ErrorKind::config, "categorical dimension " + d.name + " has no choices");
                p.set(d.name, d.choices[std::uniform_int_distribution<std::size_t>(0, d.choices.size() - 1)(rng)]);
                break;
            default:
                fail(ErrorKind::config, "unsupported search dimension type for " + d.name);
        }
    }
    return p;
}

ExplainerParams mutate_point(const SearchSpace& space, const ExplainerParams& point, Rng& rng) {
    ExplainerParams p = point;
    for (const auto& d : space.dims) {
        switch (d.type) {
            case ParamType::real: {
                const double range = d.hi - d.lo;
                if (!(range > 0.0) || !std::isfinite(range)) break;
                const double v = point.get_real(d.name) + 0.1 * range * normal(rng);
                p.set(d.name, std::clamp(v, d.lo, d.hi));
                break;
            }
            case ParamType::integer: {
                const std::int64_t step = std::uniform_int_distribution<int>(0, 1)(rng) ? 1 : -1;
                const auto v = std::clamp<std::int64_t>(point.get_int(d.name) + step, std::int64_t(d.lo),
                                                        std::int64_t(d.hi));
                p.set(d.name, v);
                break;
            }
            case ParamType::categorical:
                if (std::bernoulli_distribution(0.2)(rng))
                    p.set(d.name, d.choices[std::uniform_int_distribution<std::size_t>(0, d.choices.size() - 1)(rng)]);
                break;
            default:
                break;
        }
    }
    return p;
}

// ---- trials and fronts ----

double TrialRecord::delta_s_loss() const {
    if (direction == UtilityDirection::undefined) return 0.0;
    return direction == UtilityDirection::utility_gain ? -delta_s_percent : delta_s_percent;
}

namespace {

bool dominates(const TrialRecord& a, const TrialRecord& b) {
    return a.mls <= b.mls && a.utility <= b.utility && (a.mls < b.mls || a.utility < b.utility);
}

}  // namespace

ParetoFront pareto_front(std::span<const TrialRecord> trials) {
    ParetoFront f;
    for (std::size_t i = 0; i < trials.size(); ++i) {
        bool keep = true;
        for (std::size_t j = 0; j < trials.size() && keep; ++j) {
            if (j == i) continue;
            if (dominates(trials[j], trials[i])) keep = false;
            if (j < i && trials[j].mls == trials[i].mls && trials[j].utility == trials[i].utility) keep = false;
        }
        if (keep) f.members.push_back(i);
    }
    return f;
}

std::size_t select_best(std::span<const TrialRecord> trials) {
    require(!trials.empty(), ErrorKind::invalid_argument, "select_best needs at least one trial");
    double min_mls = kInf;
    for (const auto& t : trials) min_mls = std::min(min_mls, t.mls);
    std::size_t best = trials.size();
    for (std::size_t i = 0; i < trials.size(); ++i) {
        const auto& t = trials[i];
        if (t.mls > min_mls + kMlsSlack) continue;
        if (best == trials.size()) {
            best = i;
            continue;
        }
        const auto& b = trials[best];
        if (t.utility < b.utility || (t.utility == b.utility && t.mls < b.mls)) best = i;
    }
    return best;
}

namespace {

TrialRecord make_record(std::size_t index, json theta, const TrialOutcome& o, const Baseline& base, double wall,
                        std::uint64_t seed, bool explore) {
    TrialRecord r;
    r.trial = index;
    r.theta = std::move(theta);
    r.mls = o.mls;
    r.auc = o.auc;
    r.balanced_accuracy = o.balanced_accuracy;
    r.utility = o.utility;
    r.wall_time_seconds = wall;
    r.seed = seed;
    r.explore = explore;
    if (base.utility > 0.0) {
        const DeltaS d = delta_s(base.utility, o.utility);
        r.delta_s_percent = d.percent;
        r.direction = d.direction;
    } else {
        r.delta_s_percent = std::numeric_limits<double>::quiet_NaN();
        r.direction = UtilityDirection::undefined;
    }
    return r;
}

}  // namespace

SearchResult optimize(const SearchSpace& space, const SearchConfig& cfg, const Baseline& baseline,
                      const TrialObjective& objective, const PointDescriber& describe) {
    require(!space.dims.empty(), ErrorKind::invalid_argument, "empty search space");
    require(cfg.n_explore >= 1 && cfg.trials >= cfg.n_explore, ErrorKind::invalid_argument,
            "hardening needs trials >= n_explore >= 1");
    SearchResult res;
    res.baseline = baseline;
    Rng rng = make_rng(cfg.seed, 0x5ea);
    std::vector<ExplainerParams> points;
    for (std::size_t t = 0; t < cfg.trials; ++t) {
        const bool explore = t < cfg.n_explore;
        ExplainerParams point;
        if (explore) {
            point = sample_point(space, rng);
        } else {
            const ParetoFront front = pareto_front(res.trials);
            const auto pick = front.members[std::uniform_int_distribution<std::size_t>(0, front.members.size() - 1)(rng)];
            point = mutate_point(space, points[pick], rng);
        }
        const std::uint64_t trial_seed = derive_seed(cfg.seed, t);
        const auto start = std::chrono::steady_clock::now();
        const TrialOutcome o = objective(point, trial_seed);
        const double wall = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
        res.trials.push_back(make_record(t, describe ? describe(point, trial_seed) : point.to_json(), o, baseline, wall, trial_seed, explore));
        points.push_back(std::move(point));
    }
    res.front = pareto_front(res.trials);
    res.best = select_best(res.trials);
    res.best_point = points[res.best];
    return res;
}

namespace {

TrialOutcome outcome_of(const AttackReport& rep, double utility) {
    return {rep.mls, rep.auc, rep.balanced_accuracy, utility};
}

double mean_sensitivity(const HardeningSetup& setup, const ExplanationFn& fn) {
    if (setup.utility_samples.empty()) return 0.0;
    return dataset_sensitivity(fn, setup.utility_samples, setup.sensitivity).mean.value;
}

ExplanationFn base_fn(const HardeningSetup& setup, const ExplainerParams& params) {
    return explainer_fn(*setup.target, setup.kind, params, setup.ctx);
}

}  // namespace

Baseline measure_baseline(const HardeningSetup& setup, const AttackChannel& channel) {
    const AttackReport rep = run_attack_protocol(channel, setup.protocol);
    Baseline b{rep.mls, rep.auc, rep.balanced_accuracy, 0.0};
    if (setup.target) b.utility = mean_sensitivity(setup, base_fn(setup, setup.params));
    return b;
}

TrialOutcome transform_objective(const HardeningSetup& setup, const AttackChannel& channel,
                                 const TransformParams& theta) {
    AttackChannel hardened = transform_channel(
        channel, [&theta](const std::vector<double>& row, std::uint64_t id) { return apply_transforms(row, theta, id); });
    if (!setup.retrain_attack) {
        hardened.shadow_members = channel.shadow_members;
        hardened.shadow_nonmembers = channel.shadow_nonmembers;
    }
    const AttackReport rep = run_attack_protocol(hardened, setup.protocol);
    double utility = 0.0;
    if (setup.target) {
        const ExplanationFn fn = base_fn(setup, setup.params);
        utility = mean_sensitivity(setup, [fn, theta](const Tensor& x, std::uint64_t id) {
            return apply_transforms(fn(x, id), theta, id);
        });
    }
    return outcome_of(rep, utility);
}

namespace {

void check_setup(const HardeningSetup& s) {
    require(s.target && s.shadow && s.bundle, ErrorKind::invalid_argument,
            "hardening needs target and shadow models and a split bundle");
}

}  // namespace

HardeningResult optimize_parameterized(const HardeningSetup& setup, const SearchSpace& space, const SearchConfig& cfg) {
    check_setup(setup);
    require(is_parameterized(setup.kind), ErrorKind::invalid_argument,
            std::string(explainer_name(setup.kind)) + " has no parameters; use optimize_nonparameterized");
    HardeningResult out;
    out.baseline_channel =
        collect_channel(*setup.shadow, *setup.target, *setup.bundle, setup.kind, setup.params, setup.ctx, setup.eval_cap);
    const Baseline base = measure_baseline(setup, out.baseline_channel);
    out.search = optimize(space, cfg, base, [&](const ExplainerParams& point, std::uint64_t) {
        const AttackChannel ch =
            collect_channel(*setup.shadow, *setup.target, *setup.bundle, setup.kind, point, setup.ctx, setup.eval_cap);
        AttackChannel used = ch;
        if (!setup.retrain_attack) {
            used.shadow_members = out.baseline_channel.shadow_members;
            used.shadow_nonmembers = out.baseline_channel.shadow_nonmembers;
        }
        const AttackReport rep = run_attack_protocol(used, setup.protocol);
        return outcome_of(rep, mean_sensitivity(setup, base_fn(setup, point)));
    });
    return out;
}

HardeningResult optimize_nonparameterized(const HardeningSetup& setup, const SearchConfig& cfg,
                                          std::optional<SearchSpace> space, const TransformOrder& order,
                                          MaskMode mask_mode) {
    check_setup(setup);
    HardeningResult out;
    out.baseline_channel =
        collect_channel(*setup.shadow, *setup.target, *setup.bundle, setup.kind, setup.params, setup.ctx, setup.eval_cap);
    const Baseline base = measure_baseline(setup, out.baseline_channel);
    if (!space) space = default_transform_space(out.baseline_channel.shadow_members);
    out.search = optimize(*space, cfg, base, [&](const ExplainerParams& point, std::uint64_t trial_seed) {
        return transform_objective(setup, out.baseline_channel, transform_from_point(point, order, mask_mode, trial_seed));
    }, [&](const ExplainerParams& point, std::uint64_t trial_seed) {
        return transform_from_point(point, order, mask_mode, trial_seed).to_json();
    });
    return out;
}

std::vector<TransformParams> default_transform_grid(const FeatureRows& baseline, MaskMode mode) {
    const RowStats s = row_stats(baseline);
    const double q50 = quantile(s.abs, 0.5), q90 = quantile(s.abs, 0.9);
    std::vector<TransformParams> grid;
    for (double sigma : {0.0, s.std})
        for (double tau : {q50, q90}) {
            TransformParams t;
            t.sigma = sigma;
            t.c_min = std::min(s.min, 0.0);
            t.c_max = std::max(0.0, q90);
            t.tau = tau;
            t.mask_mode = mode;
            t.seed = grid.size() + 1;
            grid.push_back(t);
        }
    return grid;
}

std::vector<OrderingRow> ordering_ablation(const HardeningSetup& setup, const AttackChannel& channel,
                                           const std::vector<TransformParams>& grid, std::optional<Baseline> baseline) {
    require(!grid.empty(), ErrorKind::invalid_argument, "ordering ablation needs a non-empty parameter grid");
    const Baseline base = baseline ? *baseline : measure_baseline(setup, channel);
    std::vector<OrderingRow> rows;
    for (const auto& order : all_orders()) {
        std::vector<TrialRecord> trials;
        for (std::size_t g = 0; g < grid.size(); ++g) {
            TransformParams theta = grid[g];
            theta.order = order;
            const TrialOutcome o = transform_objective(setup, channel, theta);
            trials.push_back(make_record(g, theta.to_json(), o, base, 0.0, theta.seed, true));
        }
        const auto& best = trials[select_best(trials)];
        OrderingRow row;
        row.order = order_string(order);
        row.pre_mls = base.mls;
        row.post_mls = best.mls;
        row.delta_s_percent = best.delta_s_percent;
        row.direction = best.direction;
        row.theta = best.theta;
        row.recommended = row.order == "CMN";
        rows.push_back(std::move(row));
    }
    return rows;
}

void write_trial_log(const std::filesystem::path& path, const SearchResult& result) {
    std::ofstream os(path);
    require(bool(os), ErrorKind::io, "cannot open " + path.string() + " for writing");
    os << "trial,phase,seed,theta,mls,auc,balanced_accuracy,utility,delta_s,direction,on_front\n";
    for (const auto& t : result.trials) {
        const bool on_front =
            std::find(result.front.members.begin(), result.front.members.end(), t.trial) != result.front.members.end();
        os << t.trial << ',' << (t.explore ? "explore" : "exploit") << ',' << t.seed << ',' << csv_quote(t.theta.dump())
           << ',' << fmt(t.mls) << ',' << fmt(t.auc) << ',' << fmt(t.balanced_accuracy) << ',' << fmt(t.utility) << ','
           << fmt(t.delta_s_percent) << ',' << direction_name(t.direction) << ',' << (on_front ? 1 : 0) << '\n';
    }
}

void write_trial_timings(const std::filesystem::path& path, const SearchResult& result) {
    std::ofstream os(path);
    require(bool(os), ErrorKind::io, "cannot open " + path.string() + " for writing");
    os << "trial,wall_time_seconds\n";
    for (const auto& t : result.trials) os << t.trial << ',' << fmt(t.wall_time_seconds) << '\n';
}

json front_to_json(const SearchResult& result) {
    json members = json::array();
    for (auto i : result.front.members) {
        const auto& t = result.trials[i];
        members.push_back({{"trial", t.trial},
                           {"theta", t.theta},
                           {"mls", t.mls},
                           {"utility", t.utility},
                           {"delta_s", t.delta_s_percent},
                           {"delta_s_loss", t.delta_s_loss()},
                           {"direction", direction_name(t.direction)}});
    }
    const auto& b = result.trials[result.best];
    return json{{"ideal_point", {{"mls", 0.0}, {"delta_s", 0.0}}},
                {"baseline", {{"mls", result.baseline.mls},
                              {"auc", result.baseline.auc},
                              {"balanced_accuracy", result.baseline.balanced_accuracy},
                              {"utility", result.baseline.utility}}},
                {"best_trial", b.trial},
                {"best_theta", b.theta},
                {"best_mls", b.mls},
                {"best_utility", b.utility},
                {"best_delta_s", b.delta_s_percent},
                {"best_direction", direction_name(b.direction)},
                {"front", members}};
}

void write_ordering_csv(const std::filesystem::path& path, const std::vector<OrderingRow>& rows) {
    std::ofstream os(path);
    require(bool(os), ErrorKind::io, "cannot open " + path.string() + " for writing");
    os << "order,pre_mls,post_mls,delta_s,direction,recommended,theta\n";
    for (const auto& r : rows)
        os << r.order << ',' << fmt(r.pre_mls) << ',' << fmt(r.post_mls) << ',' << fmt(r.delta_s_percent) << ','
           << direction_name(r.direction) << ',' << (r.recommended ? 1 : 0) << ',' << csv_quote(r.theta.dump()) << '\n';
}

}  // namespace xleak

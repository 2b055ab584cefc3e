#include "xleak/commands.hpp"

#include <algorithm>
#include <chrono>
#include <cstdlib>
#include <fstream>
#include <map>
#include <sstream>

#include <Eigen/Core>

#include "xleak/attribution_io.hpp"
#include "xleak/error.hpp"
#include "xleak/report.hpp"
#include "xleak/rng.hpp"

namespace xleak {

using json = nlohmann::json;
namespace fs = std::filesystem;

namespace {

// Stage seed streams under the master seed.
enum SeedStream : std::uint64_t {
    kDatasetStream = 1,
    kSplitStream,
    kTargetStream,
    kShadowStream,
    kExplainStream,
    kAttackStream,
    kHardeningStream,
    kUtilityStream,
};

template <class F>
auto as_config_error(const std::string& where, F&& f) {
    try {
        return f();
    } catch (const Error& e) {
        throw Error(ErrorKind::config, where + ": " + e.what());
    } catch (const json::exception& e) {
        throw Error(ErrorKind::config, where + ": " + e.what());
    }
}

std::uint64_t seed_or(const json& j, const char* key, std::uint64_t master, std::uint64_t stream) {
    if (j.is_object() && j.contains(key)) return j.at(key).get<std::uint64_t>();
    return derive_seed(master, stream);
}

json shape_json(const std::optional<Shape>& s) { return s ? json(*s) : json(nullptr); }

std::optional<Shape> shape_from(const json& j, const char* key) {
    if (!j.contains(key) || j.at(key).is_null()) return std::nullopt;
    return j.at(key).get<Shape>();
}

DatasetConfig dataset_from_json(const json& j, std::uint64_t master) {
    DatasetConfig d;
    d.kind = j.value("kind", std::string("synthetic"));
    if (d.kind == "synthetic") {
        auto& s = d.synthetic;
        s.num_classes = j.value("num_classes", s.num_classes);
        s.features = j.value("features", s.features);
        s.samples = j.value("samples", s.samples);
        s.class_separation = j.value("class_separation", s.class_separation);
        s.noise_std = j.value("noise_std", s.noise_std);
        s.sample_shape = shape_from(j, "sample_shape");
        s.seed = seed_or(j, "seed", master, kDatasetStream);
    } else if (d.kind == "csv") {
        require(j.contains("path"), ErrorKind::config, "csv dataset needs a path");
        d.csv_path = j.at("path").get<std::string>();
        d.csv.header = j.value("header", false);
        d.csv.scale_to_unit = j.value("scale_to_unit", false);
        d.csv.num_classes = j.value("num_classes", std::size_t{0});
        d.csv.sample_shape = shape_from(j, "sample_shape");
    } else {
        fail(ErrorKind::config, "dataset.kind must be synthetic or csv, got " + d.kind);
    }
    return d;
}

json dataset_to_json(const DatasetConfig& d) {
    if (d.kind == "csv")
        return json{{"kind", "csv"},
                    {"path", d.csv_path.generic_string()},
                    {"header", d.csv.header},
                    {"scale_to_unit", d.csv.scale_to_unit},
                    {"num_classes", d.csv.num_classes},
                    {"sample_shape", shape_json(d.csv.sample_shape)}};
    const auto& s = d.synthetic;
    return json{{"kind", "synthetic"},          {"num_classes", s.num_classes},
                {"features", s.features},       {"samples", s.samples},
                {"class_separation", s.class_separation}, {"noise_std", s.noise_std},
                {"sample_shape", shape_json(s.sample_shape)}, {"seed", s.seed}};
}

ModelConfig model_from_json(const json& j, std::uint64_t master, std::uint64_t stream) {
    ModelConfig m;
    m.architecture = j.value("architecture", m.architecture);
    const json t = j.value("train", json::object());
    m.train = train_config_from_json(t);
    m.train.seed = seed_or(t, "seed", master, stream);
    return m;
}

json model_to_json(const ModelConfig& m) {
    return json{{"architecture", m.architecture}, {"train", train_config_to_json(m.train)}};
}

const char* mask_mode_name(MaskMode m) { return m == MaskMode::signed_threshold ? "signed" : "magnitude"; }

MaskMode mask_mode_from(const std::string& s) {
    if (s == "signed") return MaskMode::signed_threshold;
    if (s == "magnitude") return MaskMode::magnitude;
    fail(ErrorKind::config, "mask_mode must be signed or magnitude, got " + s);
}

std::vector<ExplainerEntry> explainers_from_json(const json& j) {
    std::vector<ExplainerEntry> out;
    if (j.is_string()) {
        require(j.get<std::string>() == "all", ErrorKind::config, "explainers must be \"all\" or a list");
        return out;
    }
    require(j.is_array(), ErrorKind::config, "explainers must be \"all\" or a list");
    for (const auto& e : j) {
        ExplainerEntry entry;
        if (e.is_string()) {
            entry.kind = explainer_from_name(e.get<std::string>());
        } else {
            entry.kind = explainer_from_name(e.at("kind").get<std::string>());
            if (e.contains("params")) entry.params = ExplainerParams::from_json(e.at("params"));
        }
        entry.params = resolve_params(entry.kind, entry.params);
        out.push_back(std::move(entry));
    }
    return out;
}

std::vector<ExplainerEntry> all_entries() {
    std::vector<ExplainerEntry> out;
    for (auto k : all_explainers()) out.push_back({k, default_params(k)});
    return out;
}

}  // namespace

RunConfig RunConfig::from_json(const json& j) {
    return as_config_error("config", [&] {
        require(j.is_object(), ErrorKind::config, "config must be a JSON object");
        RunConfig c;
        c.name = j.value("name", c.name);
        c.seed = j.value("seed", c.seed);
        const std::uint64_t m = c.seed;
        c.dataset = dataset_from_json(j.value("dataset", json::object()), m);
        require(j.contains("split"), ErrorKind::config, "config needs a split section");
        c.split = split_spec_from_json(j.at("split"));
        c.split.seed = seed_or(j.at("split"), "seed", m, kSplitStream);
        c.target = model_from_json(j.value("target", json::object()), m, kTargetStream);
        c.shadow = model_from_json(j.value("shadow", json::object()), m, kShadowStream);
        c.explainers = explainers_from_json(j.value("explainers", json("all")));
        if (c.explainers.empty()) c.explainers = all_entries();
        const std::string mode = j.value("output_mode", std::string("logit"));
        require(mode == "logit" || mode == "probability", ErrorKind::config, "output_mode must be logit or probability");
        c.output_mode = mode == "logit" ? OutputMode::logit : OutputMode::probability;
        c.explain_seed = seed_or(j, "explain_seed", m, kExplainStream);
        const json a = j.value("attack", json::object());
        c.attack = attack_protocol_from_json(a);
        c.attack.seed = seed_or(a, "seed", m, kAttackStream);
        c.eval_cap = j.value("eval_cap", c.eval_cap);
        const json h = j.value("hardening", json::object());
        c.hardening.trials = h.value("trials", c.hardening.trials);
        c.hardening.n_explore = h.value("n_explore", c.hardening.n_explore);
        c.hardening.order = parse_order(h.value("order", std::string("CMN")));
        c.hardening.mask_mode = mask_mode_from(h.value("mask_mode", std::string("signed")));
        c.hardening.retrain_attack = h.value("retrain_attack", true);
        c.hardening.seed = seed_or(h, "seed", m, kHardeningStream);
        if (h.contains("space") && !h.at("space").is_null()) c.hardening.space = h.at("space");
        if (h.contains("attributions_dir") && !h.at("attributions_dir").is_null())
            c.hardening.attributions_dir = h.at("attributions_dir").get<std::string>();
        const json u = j.value("utility", json::object());
        c.utility.sensitivity.radius = u.value("radius", c.utility.sensitivity.radius);
        c.utility.sensitivity.estimator = estimator_from_name(u.value("estimator", std::string("monte_carlo")));
        c.utility.sensitivity.samples = u.value("samples", c.utility.sensitivity.samples);
        c.utility.sensitivity.seed = seed_or(u, "seed", m, kUtilityStream);
        c.utility.n_samples = u.value("n_samples", c.utility.n_samples);
        const json ab = j.value("ablation", json::object());
        c.ablation.architectures = ab.value("architectures", c.ablation.architectures);
        c.ablation.gap_targets = ab.value("gap_targets", c.ablation.gap_targets);
        c.dump_attributions = j.value("dump_attributions", false);
        if (j.contains("output_dir") && !j.at("output_dir").is_null())
            c.output_dir = fs::path(j.at("output_dir").get<std::string>());
        c.validate();
        return c;
    });
}

json RunConfig::to_json() const {
    json ex = json::array();
    for (const auto& e : explainers) ex.push_back({{"kind", explainer_name(e.kind)}, {"params", e.params.to_json()}});
    json split_j = split_spec_to_json(split);
    json h{{"trials", hardening.trials},
           {"n_explore", hardening.n_explore},
           {"order", order_string(hardening.order)},
           {"mask_mode", mask_mode_name(hardening.mask_mode)},
           {"retrain_attack", hardening.retrain_attack},
           {"seed", hardening.seed},
           {"space", hardening.space ? *hardening.space : json(nullptr)},
           {"attributions_dir",
            hardening.attributions_dir ? json(hardening.attributions_dir->generic_string()) : json(nullptr)}};
    return json{{"name", name},
                {"seed", seed},
                {"dataset", dataset_to_json(dataset)},
                {"split", split_j},
                {"target", model_to_json(target)},
                {"shadow", model_to_json(shadow)},
                {"explainers", ex},
                {"output_mode", output_mode == OutputMode::logit ? "logit" : "probability"},
                {"explain_seed", explain_seed},
                {"attack", attack_protocol_to_json(attack)},
                {"eval_cap", eval_cap},
                {"hardening", h},
                {"utility",
                 {{"radius", utility.sensitivity.radius},
                  {"estimator", estimator_name(utility.sensitivity.estimator)},
                  {"samples", utility.sensitivity.samples},
                  {"seed", utility.sensitivity.seed},
                  {"n_samples", utility.n_samples}}},
                {"ablation", {{"architectures", ablation.architectures}, {"gap_targets", ablation.gap_targets}}},
                {"dump_attributions", dump_attributions}};
}

void RunConfig::validate() const {
    as_config_error("config", [&] {
        const auto names = architecture_names();
        for (const auto* m : {&target, &shadow}) {
            require(std::find(names.begin(), names.end(), m->architecture) != names.end(), ErrorKind::config,
                    "unknown architecture " + m->architecture);
            m->train.validate();
        }
        for (const auto& a : ablation.architectures)
            require(std::find(names.begin(), names.end(), a) != names.end(), ErrorKind::config,
                    "unknown ablation architecture " + a);
        for (double g : ablation.gap_targets)
            require(g > 0.0 && g <= 1.0, ErrorKind::config, "gap targets must lie in (0,1]");
        require(attack.epsilon >= 0.0 && attack.epsilon < 1.0, ErrorKind::config, "attack.epsilon must lie in [0,1)");
        require(attack.seeds >= 1, ErrorKind::config, "attack.seeds must be >= 1");
        require(eval_cap >= 1, ErrorKind::config, "eval_cap must be >= 1");
        require(hardening.n_explore >= 1 && hardening.trials >= hardening.n_explore, ErrorKind::config,
                "hardening needs trials >= n_explore >= 1");
        require(!hardening.order.empty(), ErrorKind::config, "hardening.order must be non-empty");
        require(utility.sensitivity.radius > 0.0, ErrorKind::config, "utility.radius must be positive");
        require(utility.sensitivity.samples >= 1, ErrorKind::config, "utility.samples must be >= 1");
        require(!explainers.empty(), ErrorKind::config, "no explainers configured");
        if (dataset.kind == "synthetic") {
            require(dataset.synthetic.num_classes >= 2, ErrorKind::config, "dataset.num_classes must be >= 2");
            require(dataset.synthetic.features >= 1, ErrorKind::config, "dataset.features must be >= 1");
        }
        return 0;
    });
}

RunConfig load_run_config(const fs::path& path) {
    require(fs::exists(path), ErrorKind::config, "config file not found: " + path.string());
    return as_config_error(path.string(), [&] { return RunConfig::from_json(read_json(path)); });
}

fs::path default_output_dir(const RunConfig& cfg) {
    if (cfg.output_dir) return *cfg.output_dir;
    if (const char* root = std::getenv(kOutputRootEnv); root && *root) return fs::path(root) / cfg.name;
    return fs::path("xleak-runs") / cfg.name;
}

Dataset load_dataset(const DatasetConfig& cfg) {
    if (cfg.kind == "csv") {
        require(fs::exists(cfg.csv_path), ErrorKind::config, "dataset file not found: " + cfg.csv_path.string());
        return load_csv(cfg.csv_path, cfg.csv);
    }
    return make_synthetic(cfg.synthetic);
}

Prepared prepare(const RunConfig& cfg) {
    Prepared p;
    p.data = load_dataset(cfg.dataset);
    p.bundle = as_config_error("split", [&] { return split(p.data, cfg.split); });
    p.target = train(cfg.target.architecture, p.bundle.target_train.data, p.bundle.target_test.data, cfg.target.train);
    p.shadow = train(cfg.shadow.architecture, p.bundle.shadow_train.data, p.bundle.shadow_test.data, cfg.shadow.train);
    return p;
}

namespace {

std::string fmt(double v) { return format_double(v); }

std::string csv_field(const std::string& s) {
    if (s.find_first_of(",\"\n") == std::string::npos) return s;
    std::string out = "\"";
    for (char c : s) {
        if (c == '"') out += '"';
        out += c;
    }
    return out + "\"";
}

ExplainContext run_context(const RunConfig& cfg, const Prepared& p) {
    ExplainContext ctx;
    ctx.mode = cfg.output_mode;
    ctx.seed = cfg.explain_seed;
    if (p.bundle.reference.data.size() > 0) ctx.reference = &p.bundle.reference.data;
    return ctx;
}

void save_models(const fs::path& out, const Prepared& p) {
    fs::create_directories(out / "models");
    save_trained_model(out / "models" / "target", p.target);
    save_trained_model(out / "models" / "shadow", p.shadow);
    write_training_log(out / "models" / "target_log.csv", p.target.log);
    write_training_log(out / "models" / "shadow_log.csv", p.shadow.log);
}

json model_summary(const TrainedModel& m) {
    return json{{"architecture", m.architecture},
                {"train_accuracy", m.train_accuracy},
                {"test_accuracy", m.test_accuracy},
                {"generalization_gap", m.train_accuracy - m.test_accuracy},
                {"epochs_run", m.epochs_run}};
}

std::optional<std::string> why_unsupported(const Prepared& p, ExplainerKind kind, const ExplainContext& ctx) {
    for (const Model* m : {&p.shadow.model, &p.target.model})
        if (auto why = incompatibility(*m, kind, ctx)) return why;
    return std::nullopt;
}

AttributionSet channel_set(const FeatureRows& rows, ExplainerKind kind, const ExplainerParams& params, int label,
                           const json& meta) {
    AttributionSet set;
    set.meta = meta;
    for (const auto& r : rows) {
        AttributionMap m;
        m.values = Tensor::vector(r);
        m.method = kind;
        m.params = params;
        m.class_index = -1;
        m.label = static_cast<std::int8_t>(label);
        set.maps.push_back(std::move(m));
    }
    return set;
}

constexpr const char* kChannelFiles[4] = {"shadow_members", "shadow_nonmembers", "eval_members", "eval_nonmembers"};

void dump_channel(const fs::path& dir, const AttackChannel& ch, ExplainerKind kind, const ExplainerParams& params) {
    fs::create_directories(dir);
    const FeatureRows* parts[4] = {&ch.shadow_members, &ch.shadow_nonmembers, &ch.eval_members, &ch.eval_nonmembers};
    for (int i = 0; i < 4; ++i) {
        json meta = ch.provenance;
        meta["set"] = kChannelFiles[i];
        save_attributions(dir / (std::string(kChannelFiles[i]) + ".xatt"),
                          channel_set(*parts[i], kind, params, i % 2 == 0 ? 1 : 0, meta));
    }
}

struct LoadedChannel {
    AttackChannel channel;
    std::string method = "external";
};

LoadedChannel load_channel(const fs::path& dir) {
    require(fs::is_directory(dir), ErrorKind::config, "attributions_dir not found: " + dir.string());
    LoadedChannel out;
    FeatureRows* parts[4] = {&out.channel.shadow_members, &out.channel.shadow_nonmembers, &out.channel.eval_members,
                             &out.channel.eval_nonmembers};
    std::optional<std::size_t> dim;
    for (int i = 0; i < 4; ++i) {
        const fs::path f = dir / (std::string(kChannelFiles[i]) + ".xatt");
        require(fs::exists(f), ErrorKind::config, "missing attribution dump " + f.string());
        const AttributionSet set = load_attributions(f);
        require(!set.maps.empty(), ErrorKind::config, "empty attribution dump " + f.string());
        if (i == 0) {
            if (set.meta.is_object() && set.meta.contains("explainer"))
                out.method = set.meta.at("explainer").get<std::string>();
            out.channel.provenance = set.meta;
            out.channel.provenance.erase("set");
        }
        for (const auto& m : set.maps) {
            if (!dim) dim = m.values.size();
            require(m.values.size() == *dim, ErrorKind::config, "attribution dumps disagree on dimension");
            parts[i]->push_back(m.values.data);
        }
    }
    require(out.channel.eval_members.size() == out.channel.eval_nonmembers.size(), ErrorKind::config,
            "evaluation member and non-member dumps must be the same size");
    return out;
}

void write_roc(const fs::path& dir, const std::string& method, const AttackReport& rep) {
    fs::create_directories(dir);
    write_roc_csv(dir / (method + ".csv"), rep.roc);
}

}  // namespace

std::vector<AuditRow> cmd_audit(const RunConfig& cfg, const fs::path& out) {
    cfg.validate();
    const Prepared p = prepare(cfg);
    fs::create_directories(out);
    save_models(out, p);
    write_json(out / "split.json", bundle_manifest(p.bundle, cfg.split));
    const ExplainContext ctx = run_context(cfg, p);

    std::vector<AuditRow> rows;
    for (const auto& e : cfg.explainers) {
        AuditRow row;
        row.method = explainer_name(e.kind);
        if (auto why = why_unsupported(p, e.kind, ctx)) {
            row.status = "unsupported";
            row.reason = *why;
            rows.push_back(std::move(row));
            continue;
        }
        const AttackChannel ch =
            collect_channel(p.shadow.model, p.target.model, p.bundle, e.kind, e.params, ctx, cfg.eval_cap);
        row.status = "ok";
        row.report = run_attack_protocol(ch, cfg.attack);
        row.explain_seconds = ch.wall_time_seconds;
        write_roc(out / "roc", row.method, row.report);
        if (cfg.dump_attributions) dump_channel(out / "attributions" / row.method, ch, e.kind, e.params);
        rows.push_back(std::move(row));
    }

    std::ostringstream csv, timings;
    csv << "method,status,epsilon,mls,auc,balanced_accuracy,best_seed,attack_input_dim,reason\n";
    timings << "method,explain_wall_time_seconds\n";
    json rows_j = json::array();
    for (const auto& r : rows) {
        if (r.status == "ok") {
            csv << r.method << ",ok," << fmt(r.report.epsilon) << ',' << fmt(r.report.mls) << ','
                << fmt(r.report.auc) << ',' << fmt(r.report.balanced_accuracy) << ',' << r.report.best_seed << ','
                << r.report.attack_input_dim << ",\n";
            rows_j.push_back({{"method", r.method}, {"status", "ok"}, {"report", r.report.to_json()}});
        } else {
            csv << r.method << ',' << r.status << ",,,,,,," << csv_field(r.reason) << '\n';
            rows_j.push_back({{"method", r.method}, {"status", r.status}, {"reason", r.reason}});
        }
        timings << r.method << ',' << fmt(r.explain_seconds) << '\n';
    }
    write_text(out / "audit.csv", csv.str());
    write_text(out / "audit_timings.csv", timings.str());
    write_json(out / "audit.json", json{{"name", cfg.name},
                                        {"epsilon", cfg.attack.epsilon},
                                        {"target", model_summary(p.target)},
                                        {"shadow", model_summary(p.shadow)},
                                        {"rows", rows_j}});
    return rows;
}

namespace {

std::optional<SearchSpace> configured_space(const RunConfig& cfg, const std::string& key) {
    if (!cfg.hardening.space || !cfg.hardening.space->contains(key)) return std::nullopt;
    return as_config_error("hardening.space." + key, [&] { return SearchSpace::from_json(cfg.hardening.space->at(key)); });
}

void write_harden_outputs(const fs::path& dir, const std::string& method, const SearchResult& s,
                          const SearchSpace& space) {
    fs::create_directories(dir);
    write_trial_log(dir / "trials.csv", s);
    write_trial_timings(dir / "trial_timings.csv", s);
    write_json(dir / "front.json", front_to_json(s));
    write_json(dir / "space.json", space.to_json());
    write_text(dir / "pareto.svg", pareto_svg(s, method + " hardening trials"));
}

void write_harden_tables(const fs::path& out, const std::vector<HardenRow>& rows) {
    std::ostringstream csv;
    csv << "method,mode,status,pre_mls,post_mls,pre_auc,post_auc,pre_utility,post_utility,delta_s,direction,"
           "best_trial,trials,front_size,reason\n";
    json rows_j = json::array();
    for (const auto& r : rows) {
        if (r.status != "ok") {
            csv << r.method << ',' << r.mode << ',' << r.status << ",,,,,,,,,,,," << csv_field(r.reason) << '\n';
            rows_j.push_back({{"method", r.method}, {"mode", r.mode}, {"status", r.status}, {"reason", r.reason}});
            continue;
        }
        const auto& s = r.search;
        const auto& b = s.trials[s.best];
        csv << r.method << ',' << r.mode << ",ok," << fmt(s.baseline.mls) << ',' << fmt(b.mls) << ','
            << fmt(s.baseline.auc) << ',' << fmt(b.auc) << ',' << fmt(s.baseline.utility) << ',' << fmt(b.utility)
            << ',' << fmt(b.delta_s_percent) << ',' << direction_name(b.direction) << ',' << b.trial << ','
            << s.trials.size() << ',' << s.front.members.size() << ",\n";
        rows_j.push_back({{"method", r.method},
                          {"mode", r.mode},
                          {"status", "ok"},
                          {"pre_mls", s.baseline.mls},
                          {"post_mls", b.mls},
                          {"pre_auc", s.baseline.auc},
                          {"post_auc", b.auc},
                          {"pre_utility", s.baseline.utility},
                          {"post_utility", b.utility},
                          {"delta_s", b.delta_s_percent},
                          {"direction", direction_name(b.direction)},
                          {"best_trial", b.trial},
                          {"best_theta", b.theta},
                          {"trials", s.trials.size()},
                          {"front", s.front.members}});
    }
    write_text(out / "hardening.csv", csv.str());
    write_json(out / "hardening.json", json{{"rows", rows_j}});
}

HardenRow harden_standalone(const RunConfig& cfg, const fs::path& out) {
    const LoadedChannel lc = load_channel(*cfg.hardening.attributions_dir);
    HardeningSetup setup;
    setup.protocol = cfg.attack;
    setup.retrain_attack = cfg.hardening.retrain_attack;
    const Baseline base = measure_baseline(setup, lc.channel);
    SearchSpace space = configured_space(cfg, "transforms").value_or(default_transform_space(lc.channel.shadow_members));
    const SearchConfig sc{cfg.hardening.trials, cfg.hardening.n_explore, cfg.hardening.seed};
    const auto& order = cfg.hardening.order;
    const MaskMode mode = cfg.hardening.mask_mode;
    HardenRow row{lc.method, "transforms", "ok", "", {}};
    row.search = optimize(
        space, sc, base,
        [&](const ExplainerParams& point, std::uint64_t seed) {
            return transform_objective(setup, lc.channel, transform_from_point(point, order, mode, seed));
        },
        [&](const ExplainerParams& point, std::uint64_t seed) {
            return transform_from_point(point, order, mode, seed).to_json();
        });
    write_harden_outputs(out / "harden" / row.method, row.method, row.search, space);
    return row;
}

HardeningSetup make_setup(const RunConfig& cfg, const Prepared& p, const ExplainerEntry& e) {
    HardeningSetup s;
    s.target = &p.target.model;
    s.shadow = &p.shadow.model;
    s.bundle = &p.bundle;
    s.kind = e.kind;
    s.params = e.params;
    s.ctx = run_context(cfg, p);
    s.protocol = cfg.attack;
    s.eval_cap = cfg.eval_cap;
    const auto& test = p.bundle.target_test.data;
    for (std::size_t i = 0; i < std::min(cfg.utility.n_samples, test.size()); ++i) s.utility_samples.push_back(test.sample(i));
    s.sensitivity = cfg.utility.sensitivity;
    s.retrain_attack = cfg.hardening.retrain_attack;
    return s;
}

}  // namespace

std::vector<HardenRow> cmd_harden(const RunConfig& cfg, const fs::path& out) {
    cfg.validate();
    fs::create_directories(out);
    std::vector<HardenRow> rows;
    if (cfg.hardening.attributions_dir) {
        rows.push_back(harden_standalone(cfg, out));
        write_harden_tables(out, rows);
        return rows;
    }
    const Prepared p = prepare(cfg);
    save_models(out, p);
    write_json(out / "split.json", bundle_manifest(p.bundle, cfg.split));
    const ExplainContext ctx = run_context(cfg, p);
    const Shape input_shape = architecture_input_shape(cfg.target.architecture, p.data.sample_shape);

    for (const auto& e : cfg.explainers) {
        HardenRow row;
        row.method = explainer_name(e.kind);
        row.mode = is_parameterized(e.kind) ? "parameters" : "transforms";
        if (auto why = why_unsupported(p, e.kind, ctx)) {
            row.status = "unsupported";
            row.reason = *why;
            rows.push_back(std::move(row));
            continue;
        }
        row.status = "ok";
        const HardeningSetup setup = make_setup(cfg, p, e);
        const SearchConfig sc{cfg.hardening.trials, cfg.hardening.n_explore,
                              derive_seed(cfg.hardening.seed, static_cast<std::uint64_t>(e.kind))};
        SearchSpace space;
        if (is_parameterized(e.kind)) {
            space = configured_space(cfg, row.method).value_or(default_explainer_space(e.kind, input_shape));
            row.search = optimize_parameterized(setup, space, sc).search;
        } else {
            auto configured = configured_space(cfg, "transforms");
            HardeningResult r =
                optimize_nonparameterized(setup, sc, configured, cfg.hardening.order, cfg.hardening.mask_mode);
            space = configured.value_or(default_transform_space(r.baseline_channel.shadow_members));
            row.search = std::move(r.search);
        }
        write_harden_outputs(out / "harden" / row.method, row.method, row.search, space);
        rows.push_back(std::move(row));
    }
    write_harden_tables(out, rows);
    return rows;
}

namespace {

struct MethodResult {
    std::string method;
    std::string status;
    std::string reason;
    AttackReport report;
};

std::vector<MethodResult> audit_methods(const RunConfig& cfg, const Prepared& p) {
    const ExplainContext ctx = run_context(cfg, p);
    std::vector<MethodResult> out;
    for (const auto& e : cfg.explainers) {
        MethodResult r{explainer_name(e.kind), "ok", "", {}};
        if (auto why = why_unsupported(p, e.kind, ctx)) {
            r.status = "unsupported";
            r.reason = *why;
        } else {
            const AttackChannel ch =
                collect_channel(p.shadow.model, p.target.model, p.bundle, e.kind, e.params, ctx, cfg.eval_cap);
            r.report = run_attack_protocol(ch, cfg.attack);
        }
        out.push_back(std::move(r));
    }
    return out;
}

std::string result_cells(const MethodResult& r) {
    if (r.status != "ok") return r.status + ",,,," + csv_field(r.reason);
    return "ok," + fmt(r.report.mls) + ',' + fmt(r.report.auc) + ',' + fmt(r.report.balanced_accuracy) + ',';
}

constexpr const char* kResultHeader = "status,mls,auc,balanced_accuracy,reason";

void ablate_ordering(const RunConfig& cfg, const fs::path& dir) {
    const Prepared p = prepare(cfg);
    const ExplainerEntry& e = cfg.explainers.front();
    const HardeningSetup setup = make_setup(cfg, p, e);
    if (auto why = why_unsupported(p, e.kind, setup.ctx)) fail(ErrorKind::unsupported_architecture, *why);
    const AttackChannel ch =
        collect_channel(p.shadow.model, p.target.model, p.bundle, e.kind, e.params, setup.ctx, cfg.eval_cap);
    const auto grid = default_transform_grid(ch.shadow_members, cfg.hardening.mask_mode);
    write_ordering_csv(dir / "ordering.csv", ordering_ablation(setup, ch, grid));
}

void ablate_disjoint(const RunConfig& cfg, const fs::path& dir) {
    std::ostringstream csv;
    csv << "split_mode,method," << kResultHeader << '\n';
    for (SplitMode mode : {SplitMode::subset, SplitMode::disjoint}) {
        RunConfig c = cfg;
        c.split.mode = mode;
        const Prepared p = prepare(c);
        for (const auto& r : audit_methods(c, p)) csv << split_mode_name(mode) << ',' << r.method << ',' << result_cells(r) << '\n';
    }
    write_text(dir / "disjoint.csv", csv.str());
}

void ablate_cross_architecture(const RunConfig& cfg, const fs::path& dir) {
    Prepared p = prepare(cfg);
    const auto archs = cfg.ablation.architectures.empty() ? architecture_names() : cfg.ablation.architectures;
    std::ostringstream csv;
    csv << "target_architecture,shadow_architecture,shadow_test_accuracy,method," << kResultHeader << '\n';
    for (const auto& arch : archs) {
        std::string shadow_acc;
        std::vector<MethodResult> results;
        try {
            p.shadow = train(arch, p.bundle.shadow_train.data, p.bundle.shadow_test.data, cfg.shadow.train);
            shadow_acc = fmt(p.shadow.test_accuracy);
            results = audit_methods(cfg, p);
        } catch (const Error& err) {
            if (err.kind() != ErrorKind::input_shape && err.kind() != ErrorKind::unsupported_architecture) throw;
            for (const auto& e : cfg.explainers) results.push_back({explainer_name(e.kind), "unsupported", err.what(), {}});
        }
        for (const auto& r : results)
            csv << cfg.target.architecture << ',' << arch << ',' << shadow_acc << ',' << r.method << ','
                << result_cells(r) << '\n';
    }
    write_text(dir / "cross_architecture.csv", csv.str());
}

void ablate_generalization_gap(const RunConfig& cfg, const fs::path& dir) {
    std::ostringstream csv;
    csv << "test_accuracy_target,train_accuracy,test_accuracy,generalization_gap,method," << kResultHeader
        << ",mls_difference\n";
    std::map<std::string, double> first_mls;
    for (double t : cfg.ablation.gap_targets) {
        RunConfig c = cfg;
        c.target.train.target_test_accuracy = t;
        const Prepared p = prepare(c);
        for (const auto& r : audit_methods(c, p)) {
            std::string diff;
            if (r.status == "ok") {
                auto [it, fresh] = first_mls.emplace(r.method, r.report.mls);
                diff = fmt(r.report.mls - it->second);
            }
            csv << fmt(t) << ',' << fmt(p.target.train_accuracy) << ',' << fmt(p.target.test_accuracy) << ','
                << fmt(p.target.train_accuracy - p.target.test_accuracy) << ',' << r.method << ',' << result_cells(r)
                << ',' << diff << '\n';
        }
    }
    write_text(dir / "generalization_gap.csv", csv.str());
}

}  // namespace

void cmd_ablate(const RunConfig& cfg, const std::string& which, const fs::path& out) {
    cfg.validate();
    const fs::path dir = out / "ablation";
    fs::create_directories(dir);
    if (which == "ordering")
        ablate_ordering(cfg, dir);
    else if (which == "disjoint")
        ablate_disjoint(cfg, dir);
    else if (which == "cross_architecture")
        ablate_cross_architecture(cfg, dir);
    else if (which == "generalization_gap")
        ablate_generalization_gap(cfg, dir);
    else
        fail(ErrorKind::config,
             "ablation must be ordering, disjoint, cross_architecture or generalization_gap, got " + which);
}

json cmd_report(const fs::path& run_dir) {
    require(fs::is_directory(run_dir), ErrorKind::config, "run directory not found: " + run_dir.string());
    const bool has_audit = fs::exists(run_dir / "audit.csv");
    const bool has_harden = fs::exists(run_dir / "hardening.csv");
    require(has_audit || has_harden, ErrorKind::config,
            "run directory holds no audit.csv or hardening.csv: " + run_dir.string());

    json summary{{"run_dir_name", run_dir.filename().string()}};
    std::vector<BarDatum> leakage;
    if (has_audit) {
        const CsvTable t = read_csv_table(run_dir / "audit.csv");
        json rows = json::array();
        const auto m = t.column("method"), st = t.column("status"), mls = t.column("mls"), auc = t.column("auc");
        for (const auto& r : t.rows) {
            json row{{"method", r[m]}, {"status", r[st]}};
            if (r[st] == "ok") {
                row["mls"] = std::stod(r[mls]);
                row["auc"] = std::stod(r[auc]);
                leakage.push_back({r[m], std::stod(r[mls])});
            }
            rows.push_back(row);
        }
        summary["audit"] = rows;
    }
    std::ostringstream runtime;
    runtime << "method,trials,hardening_wall_time_seconds\n";
    std::vector<BarDatum> runtime_bars;
    if (has_harden) {
        const CsvTable t = read_csv_table(run_dir / "hardening.csv");
        json rows = json::array();
        const auto m = t.column("method"), st = t.column("status");
        for (const auto& r : t.rows) {
            json row{{"method", r[m]}, {"status", r[st]}};
            if (r[st] == "ok") {
                for (const char* k : {"pre_mls", "post_mls", "delta_s"}) row[k] = std::stod(r[t.column(k)]);
                row["direction"] = r[t.column("direction")];
                if (!has_audit) leakage.push_back({r[m] + " pre", row["pre_mls"].get<double>()});
                leakage.push_back({r[m] + " post", row["post_mls"].get<double>()});
                const fs::path tf = run_dir / "harden" / r[m] / "trial_timings.csv";
                if (fs::exists(tf)) {
                    const CsvTable tt = read_csv_table(tf);
                    double total = 0.0;
                    for (const auto& tr : tt.rows) total += std::stod(tr[tt.column("wall_time_seconds")]);
                    runtime << r[m] << ',' << tt.rows.size() << ',' << fmt(total) << '\n';
                    runtime_bars.push_back({r[m], total});
                }
            }
            rows.push_back(row);
        }
        summary["hardening"] = rows;
    }
    const fs::path dir = run_dir / "report";
    fs::create_directories(dir);
    write_json(dir / "summary.json", summary);
    write_text(dir / "leakage.svg", bar_svg(leakage, "Membership leakage score", "MLS"));
    write_text(dir / "runtime_timings.csv", runtime.str());
    write_text(dir / "runtime_timings.svg", bar_svg(runtime_bars, "Hardening wall time", "s"));
    return summary;
}

Prepared cmd_train(const RunConfig& cfg, const fs::path& out) {
    cfg.validate();
    Prepared p = prepare(cfg);
    fs::create_directories(out);
    save_models(out, p);
    write_json(out / "split.json", bundle_manifest(p.bundle, cfg.split));
    write_json(out / "train.json", json{{"target", model_summary(p.target)}, {"shadow", model_summary(p.shadow)}});
    return p;
}

void cmd_explain(const RunConfig& cfg, std::size_t sample_index, const fs::path& out,
                 const std::optional<fs::path>& model_stem) {
    cfg.validate();
    Prepared p;
    p.data = load_dataset(cfg.dataset);
    p.bundle = as_config_error("split", [&] { return split(p.data, cfg.split); });
    const auto& test = p.bundle.target_test.data;
    require(sample_index < test.size(), ErrorKind::config,
            "sample index " + std::to_string(sample_index) + " outside the target test split of " +
                std::to_string(test.size()));
    if (model_stem)
        p.target = load_trained_model(*model_stem);
    else
        p.target = train(cfg.target.architecture, p.bundle.target_train.data, test, cfg.target.train);

    const ExplainContext ctx = run_context(cfg, p);
    const Tensor x = test.sample(sample_index);
    AttributionSet set;
    set.meta = json{{"sample_index", sample_index}, {"label", test.y[sample_index]}, {"skipped", json::array()}};
    for (const auto& e : cfg.explainers) {
        if (auto why = incompatibility(p.target.model, e.kind, ctx)) {
            set.meta["skipped"].push_back({{"method", explainer_name(e.kind)}, {"reason", *why}});
            continue;
        }
        AttributionMap m = explain(p.target.model, x, e.kind, e.params, ctx);
        m.label = -1;
        set.maps.push_back(std::move(m));
    }
    const fs::path dir = out / "explain";
    fs::create_directories(dir);
    const std::string stem = "sample_" + std::to_string(sample_index);
    save_attributions(dir / (stem + ".xatt"), set);
    export_attributions_csv(dir / (stem + ".csv"), set);
    write_json(dir / (stem + ".json"), set.meta);
}

void write_manifest(const fs::path& out, const std::string& command, const json& args, const RunConfig& cfg) {
    const json config = cfg.to_json();
    json m{{"command", command},
           {"args", args},
           {"config", config},
           {"config_sha256", sha256_hex(config.dump())},
           {"components",
            {{"xleak", kVersion},
             {"eigen", std::to_string(EIGEN_WORLD_VERSION) + "." + std::to_string(EIGEN_MAJOR_VERSION) + "." +
                           std::to_string(EIGEN_MINOR_VERSION)},
             {"nlohmann_json", std::to_string(NLOHMANN_JSON_VERSION_MAJOR) + "." +
                                   std::to_string(NLOHMANN_JSON_VERSION_MINOR) + "." +
                                   std::to_string(NLOHMANN_JSON_VERSION_PATCH)}}},
           {"seeds",
            {{"master", cfg.seed},
             {"dataset", cfg.dataset.synthetic.seed},
             {"split", cfg.split.seed},
             {"target", cfg.target.train.seed},
             {"shadow", cfg.shadow.train.seed},
             {"explain", cfg.explain_seed},
             {"attack", cfg.attack.seed},
             {"hardening", cfg.hardening.seed},
             {"utility", cfg.utility.sensitivity.seed}}},
           {"inventory", file_inventory(out)}};
    write_json(out / (command + ".manifest.json"), m);
}

ManifestReplay read_manifest(const fs::path& path) {
    require(fs::exists(path), ErrorKind::config, "manifest not found: " + path.string());
    return as_config_error(path.string(), [&] {
        const json m = read_json(path);
        ManifestReplay r;
        r.command = m.at("command").get<std::string>();
        r.args = m.value("args", json::object());
        r.config = RunConfig::from_json(m.at("config"));
        const std::string want = m.value("config_sha256", std::string());
        require(want.empty() || want == sha256_hex(m.at("config").dump()), ErrorKind::config,
                "manifest config checksum mismatch");
        return r;
    });
}

}  // namespace xleak

#include "xleak/attack.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <numeric>

#include "xleak/error.hpp"

namespace xleak {

using nlohmann::json;

AttributionBatch compute_attributions(const Model& model, const Dataset& data, ExplainerKind kind,
                                      const ExplainerParams& params, const ExplainContext& ctx) {
    AttributionBatch out;
    out.rows.reserve(data.size());
    ExplainContext sample_ctx = ctx;
    for (std::size_t i = 0; i < data.size(); ++i) {
        sample_ctx.seed = derive_seed(ctx.seed, i);
        AttributionMap m = explain(model, data.sample(i), kind, params, sample_ctx);
        out.wall_time_seconds += m.wall_time_seconds;
        out.classes.push_back(m.class_index);
        out.rows.push_back(std::move(m.values.data));
    }
    return out;
}

AttackDataset make_attack_dataset(const FeatureRows& members, const FeatureRows& nonmembers, json provenance) {
    AttackDataset ds;
    ds.features.reserve(members.size() + nonmembers.size());
    for (const auto& r : members) {
        ds.features.push_back(r);
        ds.labels.push_back(1);
    }
    for (const auto& r : nonmembers) {
        ds.features.push_back(r);
        ds.labels.push_back(0);
    }
    for (const auto& r : ds.features)
        require(r.size() == ds.dim(), ErrorKind::input_shape, "attribution vectors differ in length");
    ds.provenance = std::move(provenance);
    return ds;
}

AttackDataset build_attack_dataset(const Model& shadow, ExplainerKind kind, const ExplainerParams& params,
                                   const SplitBundle& bundle, const ExplainContext& ctx, const std::string& shadow_id) {
    if (auto why = incompatibility(shadow, kind, ctx)) fail(ErrorKind::unsupported_architecture, *why);
    ExplainContext c = ctx;
    c.seed = derive_seed(ctx.seed, 0);
    const auto members = compute_attributions(shadow, bundle.shadow_train.data, kind, params, c);
    c.seed = derive_seed(ctx.seed, 1);
    const auto nonmembers = compute_attributions(shadow, bundle.shadow_test.data, kind, params, c);
    json prov{{"explainer", explainer_name(kind)},
              {"params", resolve_params(kind, params).to_json()},
              {"shadow_model", shadow_id}};
    return make_attack_dataset(members.rows, nonmembers.rows, std::move(prov));
}

double AttackModel::score(std::span<const double> attribution) const {
    require(attribution.size() == mean.size(), ErrorKind::input_shape,
            "attack expects " + std::to_string(mean.size()) + " attribution values, got " +
                std::to_string(attribution.size()));
    Tensor x({attribution.size()});
    for (std::size_t i = 0; i < x.size(); ++i) x[i] = (attribution[i] - mean[i]) / scale[i];
    const Tensor logits = predict(net, x);
    return logits[1] - logits[0];
}

std::vector<double> AttackModel::scores(const FeatureRows& rows) const {
    std::vector<double> s;
    s.reserve(rows.size());
    for (const auto& r : rows) s.push_back(score(r));
    return s;
}

namespace {

std::vector<LayerSpec> attack_layers(std::size_t dim, AttackArch arch, std::size_t hidden) {
    if (arch == AttackArch::logistic) return {LayerSpec::dense(dim, 2)};
    return {LayerSpec::dense(dim, hidden), LayerSpec::relu(), LayerSpec::dense(hidden, 2)};
}

Dataset rows_dataset(const FeatureRows& rows, const std::vector<int>& labels, const std::vector<std::size_t>& idx,
                     const AttackModel& norm) {
    const std::size_t d = norm.mean.size();
    Dataset ds;
    ds.name = "attack";
    ds.sample_shape = {d};
    ds.num_classes = 2;
    ds.X = Tensor({idx.size(), d});
    for (std::size_t r = 0; r < idx.size(); ++r) {
        for (std::size_t j = 0; j < d; ++j) ds.X[r * d + j] = (rows[idx[r]][j] - norm.mean[j]) / norm.scale[j];
        ds.y.push_back(labels[idx[r]]);
    }
    return ds;
}

}  // namespace

AttackModel untrained_attack(std::size_t dim, AttackArch arch, std::uint64_t seed, std::size_t hidden) {
    AttackModel m;
    m.net = Model({dim}, attack_layers(dim, arch, hidden));
    Rng rng = make_rng(seed, 0xa7);
    m.net.init_uniform(rng);
    m.mean.assign(dim, 0.0);
    m.scale.assign(dim, 1.0);
    return m;
}

TrainedAttack train_attack(const AttackDataset& ds, const AttackSpec& spec, std::uint64_t seed, double epsilon) {
    require(spec.validation_fraction > 0.0 && spec.validation_fraction < 1.0, ErrorKind::invalid_argument,
            "validation_fraction must lie in (0,1)");
    std::vector<std::size_t> pos, neg;
    for (std::size_t i = 0; i < ds.size(); ++i) (ds.labels[i] ? pos : neg).push_back(i);
    require(pos.size() >= 2 && neg.size() >= 2, ErrorKind::invalid_argument,
            "attack training needs at least two members and two non-members");
    const std::size_t d = ds.dim();
    require(d > 0, ErrorKind::input_shape, "empty attribution vectors");

    Rng rng = make_rng(seed, 0x5e1);
    std::shuffle(pos.begin(), pos.end(), rng);
    std::shuffle(neg.begin(), neg.end(), rng);
    std::vector<std::size_t> train_idx, val_idx;
    for (auto* group : {&pos, &neg}) {
        const auto n = group->size();
        const auto n_val = std::clamp<std::size_t>(
            static_cast<std::size_t>(std::llround(spec.validation_fraction * double(n))), 1, n - 1);
        val_idx.insert(val_idx.end(), group->begin(), group->begin() + static_cast<std::ptrdiff_t>(n_val));
        train_idx.insert(train_idx.end(), group->begin() + static_cast<std::ptrdiff_t>(n_val), group->end());
    }
    std::sort(train_idx.begin(), train_idx.end());
    std::sort(val_idx.begin(), val_idx.end());

    TrainedAttack out;
    AttackModel& m = out.model;
    m.mean.assign(d, 0.0);
    m.scale.assign(d, 0.0);
    for (auto i : train_idx)
        for (std::size_t j = 0; j < d; ++j) m.mean[j] += ds.features[i][j];
    for (double& v : m.mean) v /= double(train_idx.size());
    for (auto i : train_idx)
        for (std::size_t j = 0; j < d; ++j) m.scale[j] += std::pow(ds.features[i][j] - m.mean[j], 2);
    for (double& v : m.scale) {
        v = std::sqrt(v / double(train_idx.size()));
        if (!(v > 1e-12)) v = 1.0;
    }

    const Dataset train_set = rows_dataset(ds.features, ds.labels, train_idx, m);
    const Dataset val_set = rows_dataset(ds.features, ds.labels, val_idx, m);
    TrainConfig cfg = spec.train;
    cfg.seed = seed;
    cfg.target_test_accuracy.reset();
    m.net = train(attack_layers(d, spec.arch, spec.hidden), train_set, Dataset{}, cfg, "attack").model;

    std::vector<double> scores;
    std::vector<int> labels;
    std::size_t correct = 0;
    for (auto i : val_idx) {
        scores.push_back(m.score(ds.features[i]));
        labels.push_back(ds.labels[i]);
        correct += (scores.back() >= 0.0) == (labels.back() == 1);
    }
    const RocCurve roc = roc_curve(scores, labels);
    out.validation_accuracy = double(correct) / double(val_idx.size());
    out.validation_tpr = mls(roc, epsilon);
    out.validation_auc = auc(roc);
    return out;
}

AttackEvaluation evaluate_attack(const AttackModel& attack, const FeatureRows& members, const FeatureRows& nonmembers,
                                 double epsilon) {
    require(!members.empty() && !nonmembers.empty(), ErrorKind::invalid_argument, "empty evaluation set");
    AttackEvaluation ev;
    ev.scores = attack.scores(members);
    const auto neg = attack.scores(nonmembers);
    ev.scores.insert(ev.scores.end(), neg.begin(), neg.end());
    ev.labels.assign(members.size(), 1);
    ev.labels.resize(members.size() + nonmembers.size(), 0);
    ev.roc = roc_curve(ev.scores, ev.labels);
    ev.mls = mls(ev.roc, epsilon);
    ev.auc = auc(ev.roc);
    ev.balanced_accuracy = balanced_accuracy(ev.scores, ev.labels, 0.0);
    return ev;
}

AttackChannel collect_channel(const Model& shadow, const Model& target, const SplitBundle& bundle, ExplainerKind kind,
                              const ExplainerParams& params, const ExplainContext& ctx, std::size_t eval_cap) {
    ExplainContext c = ctx;
    if (c.reference == nullptr && bundle.reference.data.size() > 0) c.reference = &bundle.reference.data;
    for (const Model* m : {&shadow, &target})
        if (auto why = incompatibility(*m, kind, c)) fail(ErrorKind::unsupported_architecture, *why);

    const std::size_t n_eval =
        std::min({bundle.target_train.data.size(), bundle.target_test.data.size(), eval_cap});
    require(n_eval > 0, ErrorKind::invalid_argument, "empty evaluation set");
    std::vector<std::size_t> first(n_eval);
    std::iota(first.begin(), first.end(), 0);

    AttackChannel ch;
    auto run = [&](const Model& m, const Dataset& data, std::uint64_t stream) {
        c.seed = derive_seed(ctx.seed, stream);
        auto b = compute_attributions(m, data, kind, params, c);
        ch.wall_time_seconds += b.wall_time_seconds;
        return std::move(b.rows);
    };
    ch.shadow_members = run(shadow, bundle.shadow_train.data, 0);
    ch.shadow_nonmembers = run(shadow, bundle.shadow_test.data, 1);
    ch.eval_members = run(target, bundle.target_train.data.subset(first), 2);
    ch.eval_nonmembers = run(target, bundle.target_test.data.subset(first), 3);
    ch.provenance = json{{"explainer", explainer_name(kind)},
                         {"params", resolve_params(kind, params).to_json()},
                         {"output_mode", ctx.mode == OutputMode::logit ? "logit" : "probability"},
                         {"eval_per_class", n_eval}};
    return ch;
}

AttackChannel transform_channel(const AttackChannel& channel, const FeatureTransform& fn) {
    AttackChannel out;
    out.provenance = channel.provenance;
    out.wall_time_seconds = channel.wall_time_seconds;
    const FeatureRows* in[4] = {&channel.shadow_members, &channel.shadow_nonmembers, &channel.eval_members,
                                &channel.eval_nonmembers};
    FeatureRows* dst[4] = {&out.shadow_members, &out.shadow_nonmembers, &out.eval_members, &out.eval_nonmembers};
    for (std::uint64_t s = 0; s < 4; ++s) {
        dst[s]->reserve(in[s]->size());
        for (std::size_t i = 0; i < in[s]->size(); ++i) dst[s]->push_back(fn((*in[s])[i], (s << 32) | i));
    }
    return out;
}

AttackReport run_attack_protocol(const AttackChannel& channel, const AttackProtocol& protocol) {
    require(protocol.seeds >= 1, ErrorKind::invalid_argument, "attack protocol needs K >= 1 seeds");
    require(protocol.epsilon >= 0.0 && protocol.epsilon < 1.0, ErrorKind::invalid_argument,
            "epsilon must lie in [0,1)");
    const AttackDataset ds = make_attack_dataset(channel.shadow_members, channel.shadow_nonmembers, channel.provenance);

    AttackReport rep;
    rep.epsilon = protocol.epsilon;
    rep.provenance = channel.provenance;
    std::vector<AttackEvaluation> evals;
    for (std::size_t k = 0; k < protocol.seeds; ++k) {
        const TrainedAttack ta = train_attack(ds, protocol.spec, derive_seed(protocol.seed, k), protocol.epsilon);
        // Explanation-only discipline: the attack sees attribution vectors and nothing else.
        require(shape_size(ta.model.net.input_shape()) == ds.dim(), ErrorKind::input_shape,
                "attack input must equal the attribution dimensionality");
        AttackEvaluation ev = evaluate_attack(ta.model, channel.eval_members, channel.eval_nonmembers, protocol.epsilon);
        rep.seeds.push_back({k, ta.validation_tpr, ta.validation_accuracy, ta.validation_auc, ev.mls, ev.auc,
                             ev.balanced_accuracy});
        evals.push_back(std::move(ev));
    }
    std::size_t best = 0;
    for (std::size_t k = 1; k < rep.seeds.size(); ++k) {
        const auto& a = rep.seeds[k];
        const auto& b = rep.seeds[best];
        if (a.validation_tpr > b.validation_tpr ||
            (a.validation_tpr == b.validation_tpr && a.validation_accuracy > b.validation_accuracy))
            best = k;
    }
    rep.best_seed = best;
    rep.mls = evals[best].mls;
    rep.auc = evals[best].auc;
    rep.balanced_accuracy = evals[best].balanced_accuracy;
    rep.roc = std::move(evals[best].roc);
    rep.attack_input_dim = ds.dim();
    for (const auto& s : rep.seeds)
        if (s.mls > rep.mls) rep.better_unselected.push_back(s.seed_index);
    return rep;
}

json AttackReport::to_json() const {
    json seeds_j = json::array();
    for (const auto& s : seeds)
        seeds_j.push_back({{"seed_index", s.seed_index},
                           {"validation_tpr", s.validation_tpr},
                           {"validation_accuracy", s.validation_accuracy},
                           {"validation_auc", s.validation_auc},
                           {"mls", s.mls},
                           {"auc", s.auc},
                           {"balanced_accuracy", s.balanced_accuracy}});
    return json{{"epsilon", epsilon},
                {"best_seed", best_seed},
                {"mls", mls},
                {"auc", auc},
                {"balanced_accuracy", balanced_accuracy},
                {"attack_input_dim", attack_input_dim},
                {"better_unselected_seeds", better_unselected},
                {"provenance", provenance},
                {"seeds", seeds_j}};
}

json attack_protocol_to_json(const AttackProtocol& p) {
    return json{{"seeds", p.seeds},
                {"epsilon", p.epsilon},
                {"seed", p.seed},
                {"model", p.spec.arch == AttackArch::logistic ? "logistic" : "mlp"},
                {"hidden", p.spec.hidden},
                {"validation_fraction", p.spec.validation_fraction},
                {"train", train_config_to_json(p.spec.train)}};
}

AttackProtocol attack_protocol_from_json(const json& j) {
    AttackProtocol p;
    p.seeds = j.value("seeds", p.seeds);
    p.epsilon = j.value("epsilon", p.epsilon);
    p.seed = j.value("seed", p.seed);
    const std::string model = j.value("model", std::string("logistic"));
    require(model == "logistic" || model == "mlp", ErrorKind::config, "attack model must be logistic or mlp");
    p.spec.arch = model == "logistic" ? AttackArch::logistic : AttackArch::mlp;
    p.spec.hidden = j.value("hidden", p.spec.hidden);
    p.spec.validation_fraction = j.value("validation_fraction", p.spec.validation_fraction);
    if (j.contains("train")) p.spec.train = train_config_from_json(j.at("train"));
    require(p.seeds >= 1, ErrorKind::config, "attack.seeds must be >= 1");
    require(p.epsilon >= 0.0 && p.epsilon < 1.0, ErrorKind::config, "attack.epsilon must lie in [0,1)");
    return p;
}

}  // namespace xleak

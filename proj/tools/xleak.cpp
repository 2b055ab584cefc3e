// xleak: membership-leakage audits and hardening of explanation methods.
//
// Exit codes: 0 success, 2 configuration or usage error, 3 runtime failure.

#include <cstdlib>
#include <iostream>
#include <optional>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "json.hpp"
#include "xleak/commands.hpp"
#include "xleak/error.hpp"
#include "xleak/report.hpp"

namespace {

using json = nlohmann::json;
namespace fs = std::filesystem;

constexpr int kExitConfig = 2;
constexpr int kExitRuntime = 3;

// Flags layered over the config file. Unset flags leave the file untouched.
struct Overrides {
    std::optional<std::uint64_t> seed;
    std::optional<std::string> name;
    std::optional<double> epsilon;
    std::optional<std::size_t> attack_seeds;
    std::vector<std::string> explainers;
    std::optional<std::size_t> trials;
    std::optional<std::size_t> n_explore;
    std::optional<std::string> order;
    std::optional<std::string> mask_mode;
    bool fixed_attack = false;
    std::optional<std::string> attributions_dir;
    bool dump_attributions = false;

    void apply(json& j) const {
        if (seed) j["seed"] = *seed;
        if (name) j["name"] = *name;
        if (epsilon) j["attack"]["epsilon"] = *epsilon;
        if (attack_seeds) j["attack"]["seeds"] = *attack_seeds;
        if (!explainers.empty()) j["explainers"] = explainers;
        if (trials) j["hardening"]["trials"] = *trials;
        if (n_explore) j["hardening"]["n_explore"] = *n_explore;
        if (order) j["hardening"]["order"] = *order;
        if (mask_mode) j["hardening"]["mask_mode"] = *mask_mode;
        if (fixed_attack) j["hardening"]["retrain_attack"] = false;
        if (attributions_dir) j["hardening"]["attributions_dir"] = *attributions_dir;
        if (dump_attributions) j["dump_attributions"] = true;
    }
};

struct Source {
    std::string config;
    std::string manifest;
    std::string out;
    Overrides over;
};

void add_source(CLI::App* cmd, Source& s, bool hardening_flags) {
    auto* cfg = cmd->add_option("-c,--config", s.config, "Run configuration (JSON)");
    auto* man = cmd->add_option("-m,--manifest", s.manifest, "Replay the run recorded in a <command>.manifest.json");
    cfg->excludes(man);
    cmd->add_option("-o,--out", s.out, "Output directory (default: $XLEAK_OUTPUT_ROOT/<name>)");
    cmd->add_option("--seed", s.over.seed, "Master seed; stage seeds not pinned in the file derive from it");
    cmd->add_option("--name", s.over.name, "Run name");
    cmd->add_option("--epsilon", s.over.epsilon, "False-positive level for the leakage score");
    cmd->add_option("--attack-seeds", s.over.attack_seeds, "Attack models trained per audit");
    cmd->add_option("--explainer", s.over.explainers, "Explainer to run (repeatable)");
    if (hardening_flags) {
        cmd->add_option("--trials", s.over.trials, "Hardening trials");
        cmd->add_option("--n-explore", s.over.n_explore, "Uniform exploration trials");
        cmd->add_option("--order", s.over.order, "Transform order over C, M, N, e.g. CMN");
        cmd->add_option("--mask-mode", s.over.mask_mode, "signed or magnitude");
        cmd->add_flag("--fixed-attack", s.over.fixed_attack, "Keep baseline attack models across trials");
        cmd->add_option("--attributions-dir", s.over.attributions_dir, "Harden external XATT dumps");
    }
}

struct Resolved {
    xleak::RunConfig cfg;
    json args = json::object();
    fs::path out;
};

Resolved resolve(const std::string& verb, const Source& s) {
    Resolved r;
    json j;
    if (!s.manifest.empty()) {
        const xleak::ManifestReplay m = xleak::read_manifest(s.manifest);
        if (m.command != verb)
            xleak::fail(xleak::ErrorKind::config, "manifest records command " + m.command + ", not " + verb);
        j = m.config.to_json();
        r.args = m.args;
    } else {
        if (s.config.empty()) xleak::fail(xleak::ErrorKind::config, verb + " needs --config or --manifest");
        if (!fs::exists(s.config)) xleak::fail(xleak::ErrorKind::config, "config file not found: " + s.config);
        try {
            j = xleak::read_json(s.config);
        } catch (const json::exception& e) {
            xleak::fail(xleak::ErrorKind::parse, s.config + ": " + e.what());
        }
    }
    s.over.apply(j);
    r.cfg = xleak::RunConfig::from_json(j);
    r.out = s.out.empty() ? xleak::default_output_dir(r.cfg) : fs::path(s.out);
    return r;
}

bool is_config_kind(xleak::ErrorKind k) {
    return k == xleak::ErrorKind::config || k == xleak::ErrorKind::parse;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"Audit and harden explanation methods against membership inference"};
    app.set_version_flag("--version", std::string(xleak::kVersion));
    app.require_subcommand(1);

    Source audit_src, harden_src, ablate_src, train_src, explain_src;
    std::string which, report_dir, model_stem;
    std::size_t sample = 0;

    auto* audit = app.add_subcommand("audit", "Pre-hardening leakage profile of every configured explainer");
    add_source(audit, audit_src, false);
    audit->add_flag("--dump-attributions", audit_src.over.dump_attributions,
                    "Write XATT dumps of every attack channel");
    auto* harden = app.add_subcommand("harden", "Search explainer or transform parameters that reduce leakage");
    add_source(harden, harden_src, true);
    auto* ablate = app.add_subcommand("ablate", "Ablation tables");
    add_source(ablate, ablate_src, true);
    ablate->add_option("which", which, "ordering | disjoint | cross_architecture | generalization_gap");
    auto* report = app.add_subcommand("report", "Consolidate a run directory into summary tables and plots");
    report->add_option("run_dir", report_dir, "Run directory")->required();
    auto* trn = app.add_subcommand("train", "Train the target and shadow models");
    add_source(trn, train_src, false);
    auto* explain = app.add_subcommand("explain", "Attribution dump for one sample of the target test split");
    add_source(explain, explain_src, false);
    explain->add_option("-s,--sample", sample, "Index into the target test split");
    explain->add_option("--model", model_stem, "Trained target model stem (<stem>.xlk); trains when omitted");

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int rc = app.exit(e);
        return rc == 0 ? 0 : kExitConfig;
    }

    try {
        if (audit->parsed()) {
            const Resolved r = resolve("audit", audit_src);
            const auto rows = xleak::cmd_audit(r.cfg, r.out);
            xleak::write_manifest(r.out, "audit", r.args, r.cfg);
            for (const auto& row : rows)
                std::cout << row.method << ' '
                          << (row.status == "ok" ? "mls=" + xleak::format_double(row.report.mls) : row.status) << '\n';
        } else if (harden->parsed()) {
            const Resolved r = resolve("harden", harden_src);
            const auto rows = xleak::cmd_harden(r.cfg, r.out);
            xleak::write_manifest(r.out, "harden", r.args, r.cfg);
            for (const auto& row : rows) {
                if (row.status != "ok") {
                    std::cout << row.method << ' ' << row.status << '\n';
                    continue;
                }
                const auto& b = row.search.trials[row.search.best];
                std::cout << row.method << " pre_mls=" << xleak::format_double(row.search.baseline.mls)
                          << " post_mls=" << xleak::format_double(b.mls)
                          << " delta_s=" << xleak::format_double(b.delta_s_percent) << "% "
                          << xleak::direction_name(b.direction) << '\n';
            }
        } else if (ablate->parsed()) {
            Resolved r = resolve("ablate", ablate_src);
            if (!which.empty()) r.args["which"] = which;
            if (!r.args.contains("which")) xleak::fail(xleak::ErrorKind::config, "ablate needs an ablation name");
            xleak::cmd_ablate(r.cfg, r.args.at("which").get<std::string>(), r.out);
            xleak::write_manifest(r.out, "ablate", r.args, r.cfg);
        } else if (report->parsed()) {
            const json summary = xleak::cmd_report(report_dir);
            std::cout << (fs::path(report_dir) / "report" / "summary.json").string() << '\n';
        } else if (trn->parsed()) {
            const Resolved r = resolve("train", train_src);
            const auto p = xleak::cmd_train(r.cfg, r.out);
            xleak::write_manifest(r.out, "train", r.args, r.cfg);
            std::cout << "target test_accuracy=" << xleak::format_double(p.target.test_accuracy)
                      << " shadow test_accuracy=" << xleak::format_double(p.shadow.test_accuracy) << '\n';
        } else if (explain->parsed()) {
            Resolved r = resolve("explain", explain_src);
            if (explain->count("--sample") > 0 || !r.args.contains("sample")) r.args["sample"] = sample;
            if (!model_stem.empty()) r.args["model"] = model_stem;
            std::optional<fs::path> stem;
            if (r.args.contains("model")) stem = fs::path(r.args.at("model").get<std::string>());
            xleak::cmd_explain(r.cfg, r.args.at("sample").get<std::size_t>(), r.out, stem);
            xleak::write_manifest(r.out, "explain", r.args, r.cfg);
        }
    } catch (const xleak::Error& e) {
        std::cerr << "xleak: " << xleak::error_kind_name(e.kind()) << ": " << e.what() << '\n';
        return is_config_kind(e.kind()) ? kExitConfig : kExitRuntime;
    } catch (const nlohmann::json::exception& e) {
        std::cerr << "xleak: config: " << e.what() << '\n';
        return kExitConfig;
    } catch (const std::exception& e) {
        std::cerr << "xleak: " << e.what() << '\n';
        return kExitRuntime;
    }
    return 0;
}

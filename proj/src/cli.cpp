#include "forecastad/pipeline.hpp"

#include <CLI11.hpp>

#include <cstdlib>
#include <iostream>

using namespace forecastad;

namespace {

int dispatch(const std::string& command, const ExperimentConfig& cfg, const std::string& variant,
             const std::string& sweep) {
    const uint64_t seed0 = cfg.train.seed;
    if (command == "simulate") {
        cmd_simulate(cfg);
        std::cout << "simulated " << cfg.n_days << " days under " << (cfg.out_dir / "data")
                  << "\n";
    } else if (command == "label") {
        const auto report = cmd_label(cfg);
        std::cout << "labelled dataset: " << report.final_anomalies
                  << " anomalous samples (report under " << (cfg.out_dir / "reports") << ")\n";
    } else if (command == "split") {
        cmd_split(cfg);
        std::cout << "split rewritten (" << to_string(cfg.setup) << ") in "
                  << (cfg.out_dir / "data" / "manifest.json") << "\n";
    } else if (command == "pretrain") {
        for (int i = 0; i < cfg.n_seeds; ++i) cmd_pretrain(cfg, seed0 + i);
        std::cout << "pre-trained " << cfg.n_seeds << " seed(s)\n";
    } else if (command == "train") {
        for (int i = 0; i < cfg.n_seeds; ++i) cmd_train(cfg, seed0 + i, variant);
        std::cout << "trained " << cfg.n_seeds << " seed(s)"
                  << (variant.empty() ? "" : " variant " + variant) << "\n";
    } else if (command == "score") {
        for (int i = 0; i < cfg.n_seeds; ++i) cmd_score(cfg, seed0 + i, variant);
        std::cout << "scored " << cfg.n_seeds << " seed(s)\n";
    } else if (command == "evaluate") {
        const auto reports = cmd_evaluate(cfg);
        for (const auto& r : reports) std::cout << render_report(r) << "\n";
    } else if (command == "ablate") {
        cmd_ablate(cfg, sweep);
        std::cout << "ablation sweep '" << sweep << "' complete\n";
    } else if (command == "plot") {
        cmd_plot(cfg);
        std::cout << "plots written under " << (cfg.out_dir / "plots") << "\n";
    } else if (command == "clean-deployment") {
        const auto result = cmd_clean_deployment(cfg, seed0);
        std::cout << "kept " << result.kept.size() << ", removed " << result.removed.size()
                  << " deployment samples (threshold " << result.threshold << ")\n";
    }
    return 0;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"ForecastAD: forecasting-based anomaly detection on irregularly sampled "
                 "thermal-image sequences"};
    app.require_subcommand(1);
    app.fallthrough();

    std::string config_file, profile = "desk", out_dir, variant, sweep = "time";
    bool dry_run = false;
    app.add_option("--config", config_file, "JSON config file (flat dotted keys)");
    app.add_option("--profile", profile, "desk | full")->check(CLI::IsMember({"desk", "full"}));
    app.add_option("--out", out_dir, "output directory");
    app.add_flag("--dry-run", dry_run, "print the plan without executing");

    // every config key is overridable as a flag, e.g. --train.lr 0.001
    std::map<std::string, std::string> overrides;
    for (const auto& [key, value] : config_to_flat(default_config("desk"))) {
        if (key == "profile" || key == "out_dir" || key == "dry_run") continue;
        app.add_option_function<std::string>(
               "--" + key, [&overrides, k = key](const std::string& v) { overrides[k] = v; },
               "override config key " + key)
            ->type_name("VALUE");
    }

    for (const char* name : {"simulate", "label", "split", "pretrain", "train", "score",
                             "evaluate", "ablate", "plot", "clean-deployment"})
        app.add_subcommand(name);
    app.get_subcommand("train")->add_option("--variant", variant,
                                            "no_tau|no_delta|no_time|no_pretrain|K<n>");
    app.get_subcommand("score")->add_option("--variant", variant, "scored model variant");
    app.get_subcommand("ablate")->add_option("sweep", sweep, "time|pretrain|K");

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int code = app.exit(e);
        return code == 0 ? 0 : 2;
    }

    try {
        ExperimentConfig cfg =
            config_file.empty() ? default_config(profile) : load_config(config_file);
        if (!config_file.empty() && app.count("--profile") && cfg.profile != profile)
            throw ConfigError("--profile conflicts with the profile in " + config_file);
        if (!out_dir.empty()) cfg.out_dir = out_dir;
        cfg.dry_run = dry_run;
        for (const auto& [key, value] : overrides) apply_override(cfg, key, value);
        if (const char* env_seed = std::getenv("FORECASTAD_SEED"))
            cfg.train.seed = std::stoull(env_seed);
        cfg.validate();
        return dispatch(app.get_subcommands().front()->get_name(), cfg, variant, sweep);
    } catch (const ConfigError& e) {
        std::cerr << "config error: " << e.what() << "\n";
        return 2;
    } catch (const MissingArtifactError& e) {
        std::cerr << "missing prerequisite: " << e.what() << "\n";
        return 3;
    } catch (const NumericalError& e) {
        std::cerr << "numerical failure: " << e.what() << "\n";
        return 4;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 1;
    }
}

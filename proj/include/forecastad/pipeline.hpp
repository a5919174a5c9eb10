#pragma once

#include "forecastad/eval.hpp"
#include "forecastad/label.hpp"
#include "forecastad/model.hpp"
#include "forecastad/simulate.hpp"

#include <filesystem>
#include <map>
#include <string>

namespace forecastad {

struct ConfigError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

/// A command was invoked before the command that produces its inputs.
struct MissingArtifactError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

/// Everything a run needs, serializable as flat dotted-key JSON
/// ("train.lr": 0.001). Every command writes the resolved config and its
/// hash next to its outputs.
struct ExperimentConfig {
    std::string profile = "desk";  // desk | full
    std::filesystem::path out_dir = "runs/default";
    int n_days = 12;
    int n_seeds = 5;
    SetupTag setup = SetupTag::Tr2;
    double clean_threshold = -1.0;  // < 0: derive from training embeddings
    bool dry_run = false;

    SimConfig sim;
    LabelConfig label;
    CoreConfig core;
    ModelConfig model;
    TrainConfig train;

    void validate() const;
};

/// Profile defaults: "desk" is sized for minutes-scale CPU runs, "full"
/// mirrors the published architecture and data scale.
ExperimentConfig default_config(const std::string& profile);

/// Flat dotted-key JSON round trip.
std::map<std::string, std::string> config_to_flat(const ExperimentConfig& config);
ExperimentConfig config_from_flat(const std::map<std::string, std::string>& flat);

ExperimentConfig load_config(const std::filesystem::path& path);
void save_config(const std::filesystem::path& path, const ExperimentConfig& config);

/// Applies one `key value` override; key uses the flat dotted form.
void apply_override(ExperimentConfig& config, const std::string& key, const std::string& value);

/// FNV-1a hash of the canonical flat serialization, as 16 hex digits.
std::string config_hash(const ExperimentConfig& config);

// --- pipeline commands -------------------------------------------------------
// Layout under config.out_dir:
//   data/day_*.day + data/manifest.json         (simulate, label, split)
//   checkpoints/pretrain_s<seed>.ckpt, model_s<seed>[_<variant>].ckpt
//   scores/<detector>_s<seed>_<split>.csv
//   reports/<detector>.json + reports/summary.txt
//   plots/*.svg, maps/*.png

void cmd_simulate(const ExperimentConfig& config);
LabelReport cmd_label(const ExperimentConfig& config);
void cmd_split(const ExperimentConfig& config);
void cmd_pretrain(const ExperimentConfig& config, uint64_t seed);
void cmd_train(const ExperimentConfig& config, uint64_t seed, const std::string& variant = "");
void cmd_score(const ExperimentConfig& config, uint64_t seed, const std::string& variant = "");
std::vector<EvalReport> cmd_evaluate(const ExperimentConfig& config);
void cmd_ablate(const ExperimentConfig& config, const std::string& sweep);
void cmd_plot(const ExperimentConfig& config);
CleanResult cmd_clean_deployment(const ExperimentConfig& config, uint64_t seed);

/// Score CSV schema: day_id,t,score,y,segment. Atomic write; scores printed
/// with 17 significant digits so reruns are bit-identical.
void write_scores_csv(const std::filesystem::path& path, const std::vector<ScoreRow>& rows);
std::vector<ScoreRow> read_scores_csv(const std::filesystem::path& path);

/// Fig.-3 style split over labelled days: any day containing an anomalous
/// sample is assigned alternately to validation/test; all-normal days are
/// shuffled (by config.sim.seed) 60/20/20 across train/validation/test.
Manifest split_days(const std::vector<std::string>& day_files,
                    const std::vector<DaySequence>& days, SetupTag setup, uint64_t seed);

}  // namespace forecastad

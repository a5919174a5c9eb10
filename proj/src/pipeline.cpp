#include "forecastad/pipeline.hpp"

#include "forecastad/baselines.hpp"
#include "forecastad/plot.hpp"
#include "forecastad/stats.hpp"

#include <json.hpp>

#include <algorithm>
#include <cstdio>
#include <fstream>
#include <iostream>
#include <set>
#include <sstream>

namespace forecastad {

using nlohmann::json;

namespace fs = std::filesystem;

void ExperimentConfig::validate() const {
    if (profile != "desk" && profile != "full")
        throw ConfigError("profile must be desk or full, got " + profile);
    if (n_days < 3) throw ConfigError("n_days must be >= 3 to split train/validation/test");
    if (n_seeds < 1) throw ConfigError("n_seeds must be >= 1");
    try {
        sim.validate();
        label.validate();
        model.validate();
        train.validate();
    } catch (const std::exception& e) {
        throw ConfigError(e.what());
    }
}

ExperimentConfig default_config(const std::string& profile) {
    ExperimentConfig cfg;
    cfg.profile = profile;
    if (profile == "desk") {
        cfg.n_days = 20;
        cfg.model = ModelConfig::desk();
        cfg.sim.height = 64;
        cfg.sim.width = 64;
        cfg.sim.day_length = 9000.0;
        cfg.sim.interarrival_min = 180.0;
        cfg.sim.interarrival_max = 420.0;
        cfg.sim.anomaly_rate = 0.15;  // short days need a denser anomaly draw
        cfg.train.batch_size = 8;
        cfg.train.pretrain_epochs = 6;
        cfg.train.train_epochs = 12;
        cfg.train.context_length = 10;
        cfg.core.context_length = 10;
    } else if (profile == "full") {
        cfg.n_days = 60;
        cfg.model = ModelConfig::full();
        cfg.sim.height = 256;
        cfg.sim.width = 256;
    } else {
        throw ConfigError("unknown profile: " + profile);
    }
    return cfg;
}

namespace {

json config_to_nested(const ExperimentConfig& c) {
    json j;
    j["profile"] = c.profile;
    j["out_dir"] = c.out_dir.string();
    j["n_days"] = c.n_days;
    j["n_seeds"] = c.n_seeds;
    j["setup"] = to_string(c.setup);
    j["clean_threshold"] = c.clean_threshold;
    j["dry_run"] = c.dry_run;

    j["sim"] = {{"height", c.sim.height},
                {"width", c.sim.width},
                {"day_length", c.sim.day_length},
                {"interarrival_min", c.sim.interarrival_min},
                {"interarrival_max", c.sim.interarrival_max},
                {"base_temp", c.sim.base_temp},
                {"peak_temp", c.sim.peak_temp},
                {"ramp_fraction", c.sim.ramp_fraction},
                {"gradient_span", c.sim.gradient_span},
                {"pixel_noise_sd", c.sim.pixel_noise_sd},
                {"anomaly_rate", c.sim.anomaly_rate},
                {"clean_day_fraction", c.sim.clean_day_fraction},
                {"anomaly_delta", c.sim.anomaly_delta},
                {"kind_weights", c.sim.kind_weights},
                {"seed", c.sim.seed}};
    j["label"] = {{"r1_pair_percentile", c.label.r1_pair_percentile},
                  {"r1_dataset_percentile", c.label.r1_dataset_percentile},
                  {"r2_percentile", c.label.r2_percentile},
                  {"r3_template_count", c.label.r3_template_count},
                  {"r4_horizontal_threshold", c.label.r4_horizontal_threshold},
                  {"r4_vertical_threshold", c.label.r4_vertical_threshold},
                  {"trend_threshold", c.label.trend_threshold},
                  {"trend_window", c.label.trend_window},
                  {"min_day_samples", c.label.min_day_samples},
                  {"m_plateau_fraction", c.label.m_plateau_fraction},
                  {"smoothing_window", c.label.smoothing_window}};
    j["core"] = {{"context_length", c.core.context_length}, {"epsilon", c.core.epsilon}};
    j["model"] = {{"input_hw", c.model.input_hw},
                  {"enc_channels", c.model.enc_channels},
                  {"d_latent", c.model.d_latent},
                  {"dec_channels", c.model.dec_channels},
                  {"time_dim", c.model.time_dim},
                  {"sin_period", c.model.sin_period},
                  {"lstm_layers", c.model.lstm_layers},
                  {"kernel", c.model.kernel},
                  {"bn_eps", c.model.bn_eps},
                  {"zero_init_state", c.model.zero_init_state}};
    j["train"] = {{"lr", c.train.lr},
                  {"weight_decay", c.train.weight_decay},
                  {"batch_size", c.train.batch_size},
                  {"pretrain_epochs", c.train.pretrain_epochs},
                  {"train_epochs", c.train.train_epochs},
                  {"context_length", c.train.context_length},
                  {"seed", c.train.seed},
                  {"use_tau", c.train.use_tau},
                  {"use_delta", c.train.use_delta},
                  {"use_pretrained", c.train.use_pretrained}};
    return j;
}

ExperimentConfig config_from_nested(const json& j) {
    ExperimentConfig c;
    c.profile = j.at("profile");
    c.out_dir = std::string(j.at("out_dir"));
    c.n_days = j.at("n_days");
    c.n_seeds = j.at("n_seeds");
    c.setup = setup_tag_from_string(j.at("setup"));
    c.clean_threshold = j.at("clean_threshold");
    c.dry_run = j.at("dry_run");

    const auto& s = j.at("sim");
    c.sim.height = s.at("height");
    c.sim.width = s.at("width");
    c.sim.day_length = s.at("day_length");
    c.sim.interarrival_min = s.at("interarrival_min");
    c.sim.interarrival_max = s.at("interarrival_max");
    c.sim.base_temp = s.at("base_temp");
    c.sim.peak_temp = s.at("peak_temp");
    c.sim.ramp_fraction = s.at("ramp_fraction");
    c.sim.gradient_span = s.at("gradient_span");
    c.sim.pixel_noise_sd = s.at("pixel_noise_sd");
    c.sim.anomaly_rate = s.at("anomaly_rate");
    c.sim.clean_day_fraction = s.at("clean_day_fraction");
    c.sim.anomaly_delta = s.at("anomaly_delta");
    c.sim.kind_weights = s.at("kind_weights");
    c.sim.seed = s.at("seed");

    const auto& l = j.at("label");
    c.label.r1_pair_percentile = l.at("r1_pair_percentile");
    c.label.r1_dataset_percentile = l.at("r1_dataset_percentile");
    c.label.r2_percentile = l.at("r2_percentile");
    c.label.r3_template_count = l.at("r3_template_count");
    c.label.r4_horizontal_threshold = l.at("r4_horizontal_threshold");
    c.label.r4_vertical_threshold = l.at("r4_vertical_threshold");
    c.label.trend_threshold = l.at("trend_threshold");
    c.label.trend_window = l.at("trend_window");
    c.label.min_day_samples = l.at("min_day_samples");
    c.label.m_plateau_fraction = l.at("m_plateau_fraction");
    c.label.smoothing_window = l.at("smoothing_window");

    const auto& co = j.at("core");
    c.core.context_length = co.at("context_length");
    c.core.epsilon = co.at("epsilon");

    const auto& m = j.at("model");
    c.model.input_hw = m.at("input_hw");
    c.model.enc_channels = m.at("enc_channels").get<std::vector<int>>();
    c.model.d_latent = m.at("d_latent");
    c.model.dec_channels = m.at("dec_channels").get<std::vector<int>>();
    c.model.time_dim = m.at("time_dim");
    c.model.sin_period = m.at("sin_period");
    c.model.lstm_layers = m.at("lstm_layers");
    c.model.kernel = m.at("kernel");
    c.model.bn_eps = m.at("bn_eps");
    c.model.zero_init_state = m.at("zero_init_state");

    const auto& t = j.at("train");
    c.train.lr = t.at("lr");
    c.train.weight_decay = t.at("weight_decay");
    c.train.batch_size = t.at("batch_size");
    c.train.pretrain_epochs = t.at("pretrain_epochs");
    c.train.train_epochs = t.at("train_epochs");
    c.train.context_length = t.at("context_length");
    c.train.seed = t.at("seed");
    c.train.use_tau = t.at("use_tau");
    c.train.use_delta = t.at("use_delta");
    c.train.use_pretrained = t.at("use_pretrained");
    return c;
}

void flatten(const json& j, const std::string& prefix, std::map<std::string, std::string>& out) {
    if (j.is_object()) {
        for (const auto& [k, v] : j.items())
            flatten(v, prefix.empty() ? k : prefix + "." + k, out);
    } else {
        out[prefix] = j.dump();
    }
}

void atomic_write_text(const fs::path& path, const std::string& text) {
    auto tmp = path;
    tmp += ".tmp";
    {
        std::ofstream os(tmp, std::ios::binary | std::ios::trunc);
        if (!os) throw std::runtime_error(tmp.string() + ": cannot open for writing");
        os << text;
        if (!os) throw std::runtime_error(tmp.string() + ": write failed");
    }
    fs::rename(tmp, path);
}

}  // namespace

std::map<std::string, std::string> config_to_flat(const ExperimentConfig& config) {
    std::map<std::string, std::string> out;
    flatten(config_to_nested(config), "", out);
    return out;
}

ExperimentConfig config_from_flat(const std::map<std::string, std::string>& flat) {
    json j;
    for (const auto& [key, value] : flat) {
        json leaf;
        try {
            leaf = json::parse(value);
        } catch (const json::parse_error&) {
            leaf = value;  // bare strings are allowed in config files / overrides
        }
        json* node = &j;
        std::string rest = key;
        size_t dot;
        while ((dot = rest.find('.')) != std::string::npos) {
            node = &(*node)[rest.substr(0, dot)];
            rest = rest.substr(dot + 1);
        }
        (*node)[rest] = leaf;
    }
    try {
        return config_from_nested(j);
    } catch (const json::exception& e) {
        throw ConfigError(std::string("bad config: ") + e.what());
    }
}

ExperimentConfig load_config(const fs::path& path) {
    std::ifstream is(path);
    if (!is) throw ConfigError(path.string() + ": cannot open config");
    json j;
    try {
        is >> j;
    } catch (const json::parse_error& e) {
        throw ConfigError(path.string() + ": " + e.what());
    }
    std::map<std::string, std::string> flat;
    if (!j.is_object()) throw ConfigError(path.string() + ": config root must be an object");
    // accept both flat dotted keys and nested objects
    flatten(j, "", flat);
    flat.erase("config_hash");  // written by save_config, not a setting
    auto defaults = config_to_flat(default_config(
        flat.count("profile") ? json::parse(flat["profile"]).get<std::string>() : "desk"));
    for (const auto& [k, v] : flat) {
        if (!defaults.count(k)) throw ConfigError("unknown config key: " + k);
        defaults[k] = v;
    }
    return config_from_flat(defaults);
}

void save_config(const fs::path& path, const ExperimentConfig& config) {
    json j;
    for (const auto& [k, v] : config_to_flat(config)) j[k] = json::parse(v);
    j["config_hash"] = config_hash(config);
    atomic_write_text(path, j.dump(2) + "\n");
}

void apply_override(ExperimentConfig& config, const std::string& key, const std::string& value) {
    auto flat = config_to_flat(config);
    if (!flat.count(key)) throw ConfigError("unknown config key: " + key);
    flat[key] = value;
    config = config_from_flat(flat);
}

std::string config_hash(const ExperimentConfig& config) {
    uint64_t h = 1469598103934665603ULL;  // FNV-1a 64
    for (const auto& [k, v] : config_to_flat(config))
        for (const std::string& s : {k, v})
            for (char c : s) {
                h ^= static_cast<uint8_t>(c);
                h *= 1099511628211ULL;
            }
    char buf[17];
    std::snprintf(buf, sizeof(buf), "%016llx", static_cast<unsigned long long>(h));
    return buf;
}

// --------------------------------------------------------------- commands

namespace {

fs::path data_dir(const ExperimentConfig& c) { return c.out_dir / "data"; }
fs::path manifest_path(const ExperimentConfig& c) { return data_dir(c) / "manifest.json"; }
fs::path ckpt_dir(const ExperimentConfig& c) { return c.out_dir / "checkpoints"; }
fs::path scores_dir(const ExperimentConfig& c) { return c.out_dir / "scores"; }
fs::path reports_dir(const ExperimentConfig& c) { return c.out_dir / "reports"; }

std::string variant_tag(const std::string& variant) {
    return variant.empty() ? "" : "_" + variant;
}

fs::path score_path(const ExperimentConfig& c, const std::string& detector, uint64_t seed,
                    const std::string& split) {
    return scores_dir(c) / (detector + "_s" + std::to_string(seed) + "_" + split + ".csv");
}

bool dry(const ExperimentConfig& c, const std::string& what) {
    if (!c.dry_run) return false;
    std::cout << "[dry-run] " << what << "\n";
    return true;
}

void prepare(const ExperimentConfig& c) {
    c.validate();
    fs::create_directories(c.out_dir);
    save_config(c.out_dir / "config.json", c);
}

Manifest require_manifest(const ExperimentConfig& c) {
    if (!fs::exists(manifest_path(c)))
        throw MissingArtifactError(manifest_path(c).string() +
                                   " not found; run `forecastad simulate` first");
    return read_manifest(manifest_path(c));
}

std::vector<DaySequence> load_days(const ExperimentConfig& c,
                                   const std::vector<std::string>& files) {
    std::vector<DaySequence> days;
    days.reserve(files.size());
    for (const auto& f : files) days.push_back(read_day_file(data_dir(c) / f));
    return days;
}

DatasetSplit require_split(const ExperimentConfig& c) {
    const auto manifest = require_manifest(c);
    if (manifest.validation.empty() || manifest.test.empty())
        throw MissingArtifactError("manifest has no validation/test days; run `forecastad "
                                   "label` and `forecastad split` first");
    return load_split(manifest_path(c));
}

fs::path pretrain_ckpt(const ExperimentConfig& c, uint64_t seed) {
    return ckpt_dir(c) / ("pretrain_s" + std::to_string(seed) + ".ckpt");
}

fs::path model_ckpt(const ExperimentConfig& c, uint64_t seed, const std::string& variant) {
    return ckpt_dir(c) / ("model_s" + std::to_string(seed) + variant_tag(variant) + ".ckpt");
}

/// Named training-ablation variants used by `train` and `ablate`.
TrainConfig apply_variant(TrainConfig tc, const std::string& variant) {
    if (variant.empty()) return tc;
    if (variant == "no_tau")
        tc.use_tau = false;
    else if (variant == "no_delta")
        tc.use_delta = false;
    else if (variant == "no_time") {
        tc.use_tau = false;
        tc.use_delta = false;
    } else if (variant == "no_pretrain")
        tc.use_pretrained = false;
    else if (variant.size() > 1 && variant[0] == 'K')
        tc.context_length = std::stoi(variant.substr(1));
    else
        throw ConfigError("unknown train variant: " + variant +
                          " (expected no_tau|no_delta|no_time|no_pretrain|K<n>)");
    return tc;
}

}  // namespace

Manifest split_days(const std::vector<std::string>& day_files,
                    const std::vector<DaySequence>& days, SetupTag setup, uint64_t seed) {
    if (day_files.size() != days.size())
        throw std::invalid_argument("split_days: file list and day list differ");
    std::vector<size_t> clean, anomalous;
    for (size_t i = 0; i < days.size(); ++i) {
        const bool has_anomaly =
            std::any_of(days[i].samples.begin(), days[i].samples.end(),
                        [](const Sample& s) { return s.y == Label::Anomalous; });
        (has_anomaly ? anomalous : clean).push_back(i);
    }
    if (clean.size() < 3)
        throw std::invalid_argument("split_days: need at least 3 all-normal days, got " +
                                    std::to_string(clean.size()));

    Rng rng(splitmix64(seed ^ 0x5417ULL));
    for (size_t i = clean.size(); i > 1; --i)
        std::swap(clean[i - 1], clean[rng.uniform_int(0, static_cast<int>(i) - 1)]);

    Manifest m;
    m.setup = setup;
    const size_t n_train = std::max<size_t>(1, (clean.size() * 3) / 5);
    const size_t n_val = std::max<size_t>(1, (clean.size() - n_train) / 2);
    for (size_t i = 0; i < clean.size(); ++i) {
        if (i < n_train)
            m.train.push_back(day_files[clean[i]]);
        else if (i < n_train + n_val)
            m.validation.push_back(day_files[clean[i]]);
        else
            m.test.push_back(day_files[clean[i]]);
    }
    for (size_t i = 0; i < anomalous.size(); ++i)
        (i % 2 == 0 ? m.validation : m.test).push_back(day_files[anomalous[i]]);
    if (m.validation.empty() || m.test.empty())
        throw std::invalid_argument("split_days: produced an empty validation or test set");
    std::sort(m.train.begin(), m.train.end());
    std::sort(m.validation.begin(), m.validation.end());
    std::sort(m.test.begin(), m.test.end());
    return m;
}

void cmd_simulate(const ExperimentConfig& config) {
    if (dry(config, "simulate: write " + std::to_string(config.n_days) + " day files under " +
                        data_dir(config).string()))
        return;
    prepare(config);
    simulate_dataset(config.sim, config.n_days, data_dir(config));
}

LabelReport cmd_label(const ExperimentConfig& config) {
    if (dry(config, "label: segment + rule-label the days under " + data_dir(config).string()))
        return {};
    prepare(config);
    const auto manifest = require_manifest(config);
    std::vector<std::string> files = manifest.train;
    files.insert(files.end(), manifest.validation.begin(), manifest.validation.end());
    files.insert(files.end(), manifest.test.begin(), manifest.test.end());
    auto days = load_days(config, files);

    auto filtered = filter_days(std::move(days), config.label);
    const auto report = label_days(filtered.kept, config.label);

    Manifest out;
    out.setup = manifest.setup;
    for (const auto& day : filtered.kept) {
        const auto file = day.day_id + ".fcad";
        write_day_file(data_dir(config) / file, day);
        out.train.push_back(file);
    }
    for (const auto& [day, reason] : filtered.dropped)
        fs::remove(data_dir(config) / (day.day_id + ".fcad"));
    write_manifest(manifest_path(config), out);

    // agreement with simulator ground truth (anomaly_kind survives labelling)
    size_t agree = 0, total = 0;
    for (const auto& day : filtered.kept)
        for (const auto& s : day.samples) {
            const bool truth = s.anomaly_kind != AnomalyKind::None;
            const bool flagged = s.y == Label::Anomalous;
            agree += (truth == flagged);
            ++total;
        }

    fs::create_directories(reports_dir(config));
    json j;
    j["config_hash"] = config_hash(config);
    j["days_kept"] = filtered.kept.size();
    j["days_dropped"] = json::array();
    for (const auto& [day, reason] : filtered.dropped)
        j["days_dropped"].push_back({{"day_id", day.day_id}, {"reason", reason}});
    j["r1_threshold"] = report.r1_threshold;
    j["r2_threshold"] = report.r2_threshold;
    j["r3_threshold"] = report.r3_threshold;
    j["r1_flags"] = report.r1_flags;
    j["r2_flags"] = report.r2_flags;
    j["r3_flags"] = report.r3_flags;
    j["r4_flags"] = report.r4_flags;
    j["trend_flags"] = report.trend_flags;
    j["final_anomalies"] = report.final_anomalies;
    j["short_template_days"] = report.short_template_days;
    j["ground_truth_agreement"] = total ? static_cast<double>(agree) / total : 1.0;
    atomic_write_text(reports_dir(config) / "label_report.json", j.dump(2) + "\n");
    return report;
}

void cmd_split(const ExperimentConfig& config) {
    if (dry(config, "split: rewrite " + manifest_path(config).string() + " membership (" +
                        to_string(config.setup) + ")"))
        return;
    prepare(config);
    const auto manifest = require_manifest(config);
    std::vector<std::string> files = manifest.train;
    files.insert(files.end(), manifest.validation.begin(), manifest.validation.end());
    files.insert(files.end(), manifest.test.begin(), manifest.test.end());
    std::sort(files.begin(), files.end());
    const auto days = load_days(config, files);
    const auto out = split_days(files, days, config.setup, config.sim.seed);
    write_manifest(manifest_path(config), out);
}

void cmd_pretrain(const ExperimentConfig& config, uint64_t seed) {
    if (dry(config, "pretrain: write " + pretrain_ckpt(config, seed).string())) return;
    prepare(config);
    const auto split = require_split(config);
    const auto train_days = apply_setup_filter(split.train, config.setup);
    const auto stats = compute_preprocess_stats(train_days);
    TrainConfig tc = config.train;
    tc.seed = seed;
    ForecastModel model(config.model, tc, stats);
    run_pretrain(model, train_days);
    fs::create_directories(ckpt_dir(config));
    save_checkpoint(pretrain_ckpt(config, seed), model);
}

void cmd_train(const ExperimentConfig& config, uint64_t seed, const std::string& variant) {
    if (dry(config, "train: write " + model_ckpt(config, seed, variant).string())) return;
    prepare(config);
    const auto split = require_split(config);
    const auto train_days = apply_setup_filter(split.train, config.setup);
    const auto stats = compute_preprocess_stats(train_days);
    TrainConfig tc = apply_variant(config.train, variant);
    tc.seed = seed;
    ForecastModel model(config.model, tc, stats);
    if (tc.use_pretrained) {
        if (!fs::exists(pretrain_ckpt(config, seed)))
            throw MissingArtifactError(pretrain_ckpt(config, seed).string() +
                                       " not found; run `forecastad pretrain` first");
        const auto pre = load_checkpoint(pretrain_ckpt(config, seed));
        model.load_backbone(pre);
    }
    run_train(model, train_days);
    fs::create_directories(ckpt_dir(config));
    save_checkpoint(model_ckpt(config, seed, variant), model);
}

void write_scores_csv(const fs::path& path, const std::vector<ScoreRow>& rows) {
    std::ostringstream os;
    os << "day_id,t,score,y,segment\n";
    char buf[64];
    for (const auto& r : rows) {
        os << r.day_id << ",";
        std::snprintf(buf, sizeof(buf), "%.17g,%.17g,", r.t, r.score);
        os << buf << static_cast<int>(r.y) << "," << to_string(r.segment) << "\n";
    }
    atomic_write_text(path, os.str());
}

std::vector<ScoreRow> read_scores_csv(const fs::path& path) {
    std::ifstream is(path);
    if (!is) throw MissingArtifactError(path.string() + " not found; run `forecastad score` first");
    std::vector<ScoreRow> rows;
    std::string line;
    std::getline(is, line);  // header
    while (std::getline(is, line)) {
        if (line.empty() || line[0] == '#') continue;
        std::istringstream ls(line);
        ScoreRow r;
        std::string field;
        std::getline(ls, r.day_id, ',');
        std::getline(ls, field, ',');
        r.t = std::stod(field);
        std::getline(ls, field, ',');
        r.score = std::stod(field);
        std::getline(ls, field, ',');
        r.y = static_cast<Label>(std::stoi(field));
        std::getline(ls, field, ',');
        r.segment = field == "S"   ? Segment::S
                    : field == "M" ? Segment::M
                    : field == "E" ? Segment::E
                                   : Segment::Unassigned;
        rows.push_back(std::move(r));
    }
    return rows;
}

void cmd_score(const ExperimentConfig& config, uint64_t seed, const std::string& variant) {
    if (dry(config, "score: write per-sample CSVs under " + scores_dir(config).string())) return;
    prepare(config);
    const auto split = require_split(config);
    if (!fs::exists(model_ckpt(config, seed, variant)))
        throw MissingArtifactError(model_ckpt(config, seed, variant).string() +
                                   " not found; run `forecastad train` first");
    auto model = load_checkpoint(model_ckpt(config, seed, variant));
    fs::create_directories(scores_dir(config));

    const std::string detector = "forecastad" + variant_tag(variant);
    write_scores_csv(score_path(config, detector, seed, "validation"),
                     score_days(model, split.validation));
    write_scores_csv(score_path(config, detector, seed, "test"), score_days(model, split.test));

    if (!variant.empty()) return;

    // temporal-blind autoencoder baseline from the pre-training checkpoint
    if (fs::exists(pretrain_ckpt(config, seed))) {
        auto pre = load_checkpoint(pretrain_ckpt(config, seed));
        write_scores_csv(score_path(config, "autoencoder", seed, "validation"),
                         autoencoder_score_days(pre, split.validation));
        write_scores_csv(score_path(config, "autoencoder", seed, "test"),
                         autoencoder_score_days(pre, split.test));
    }
    for (auto kind : {FeatureBaseline::TimeOfDay, FeatureBaseline::NegativeMean,
                      FeatureBaseline::NegativeMax, FeatureBaseline::NegativeStd}) {
        write_scores_csv(score_path(config, to_string(kind), seed, "validation"),
                         feature_score_days(split.validation, kind));
        write_scores_csv(score_path(config, to_string(kind), seed, "test"),
                         feature_score_days(split.test, kind));
    }

    // anomaly maps of the highest-scoring test windows
    const int k = model.train_config().context_length;
    struct Scored {
        double score;
        const DaySequence* day;
        ContextWindow window;
    };
    std::vector<Scored> scored;
    for (const auto& day : split.test)
        for (auto& w : build_context_windows(day, k))
            scored.push_back({model.score(w), &day, std::move(w)});
    std::sort(scored.begin(), scored.end(),
              [](const Scored& a, const Scored& b) { return a.score > b.score; });

    // validation maps fix the normalization range
    MapStats map_stats{std::numeric_limits<double>::infinity(),
                       -std::numeric_limits<double>::infinity()};
    int seen = 0;
    for (const auto& day : split.validation) {
        for (auto& w : build_context_windows(day, k)) {
            if (seen >= 10) break;
            const auto xhat = model.forecast(w);
            nn::Tensor x(1, 3, config.model.input_hw, config.model.input_hw);
            const auto pre = preprocess(w.target_sample().frame, model.stats(),
                                        config.model.input_hw);
            std::copy(pre.begin(), pre.end(), x.data.begin());
            for (double v : anomaly_map_raw(x, xhat)) {
                map_stats.min = std::min(map_stats.min, v);
                map_stats.max = std::max(map_stats.max, v);
            }
            ++seen;
        }
        if (seen >= 10) break;
    }

    fs::create_directories(config.out_dir / "maps");
    const size_t n_maps = std::min<size_t>(3, scored.size());
    for (size_t i = 0; i < n_maps; ++i) {
        const auto& s = scored[i];
        const auto xhat = model.forecast(s.window);
        nn::Tensor x(1, 3, config.model.input_hw, config.model.input_hw);
        const auto pre = preprocess(s.window.target_sample().frame, model.stats(),
                                    config.model.input_hw);
        std::copy(pre.begin(), pre.end(), x.data.begin());
        const auto map = normalize_map(anomaly_map_raw(x, xhat), map_stats);
        char name[96];
        std::snprintf(name, sizeof(name), "map_s%llu_%02zu_%s.png",
                      static_cast<unsigned long long>(seed), i, s.day->day_id.c_str());
        write_png_grayscale(config.out_dir / "maps" / name, map, config.model.input_hw,
                            config.model.input_hw);
    }
}

std::vector<EvalReport> cmd_evaluate(const ExperimentConfig& config) {
    if (dry(config, "evaluate: write reports under " + reports_dir(config).string())) return {};
    prepare(config);

    // score any trained checkpoint whose CSVs are missing, so the minimal
    // simulate/label/split/pretrain/train/evaluate pipeline needs no
    // explicit score step
    if (fs::exists(ckpt_dir(config))) {
        for (const auto& entry : fs::directory_iterator(ckpt_dir(config))) {
            const std::string name = entry.path().filename().string();
            if (name.rfind("model_s", 0) != 0 || entry.path().extension() != ".ckpt") continue;
            const std::string stem = name.substr(7, name.size() - 7 - 5);  // <seed>[_<variant>]
            const auto us = stem.find('_');
            const uint64_t seed = std::stoull(stem.substr(0, us));
            const std::string variant = us == std::string::npos ? "" : stem.substr(us + 1);
            const std::string detector = "forecastad" + variant_tag(variant);
            if (!fs::exists(score_path(config, detector, seed, "validation")))
                cmd_score(config, seed, variant);
        }
    }
    if (!fs::exists(scores_dir(config)))
        throw MissingArtifactError(scores_dir(config).string() +
                                   " not found; run `forecastad score` first");

    // detector -> seeds with a complete CSV pair
    std::map<std::string, std::set<uint64_t>> found;
    for (const auto& entry : fs::directory_iterator(scores_dir(config))) {
        const std::string name = entry.path().filename().string();
        const auto pos = name.rfind("_s");
        const auto vpos = name.rfind("_validation.csv");
        if (pos == std::string::npos || vpos == std::string::npos) continue;
        const std::string detector = name.substr(0, pos);
        const uint64_t seed = std::stoull(name.substr(pos + 2, vpos - pos - 2));
        if (fs::exists(score_path(config, detector, seed, "test"))) found[detector].insert(seed);
    }
    if (!found.count("forecastad"))
        throw MissingArtifactError("no forecastad score files; run `forecastad score` first");

    fs::create_directories(reports_dir(config));
    std::vector<EvalReport> reports;
    std::ostringstream summary;
    summary << "# config " << config_hash(config) << "\n\n";
    for (const auto& [detector, seeds] : found) {
        std::vector<SeedEval> evals;
        for (uint64_t seed : seeds) {
            auto val = read_scores_csv(score_path(config, detector, seed, "validation"));
            const auto test = read_scores_csv(score_path(config, detector, seed, "test"));
            if (config.setup == SetupTag::Tr1) val = filter_setup(val, TestSetup::Ts1);
            evals.push_back(evaluate_scores(val, test));
        }
        auto report = aggregate_evals(evals, detector, to_string(config.setup));
        atomic_write_text(reports_dir(config) / (detector + ".json"),
                          report_to_json(report) + "\n");
        summary << render_report(report) << "\n";
        reports.push_back(std::move(report));
    }
    atomic_write_text(reports_dir(config) / "summary.txt", summary.str());
    return reports;
}

void cmd_ablate(const ExperimentConfig& config, const std::string& sweep) {
    std::vector<std::string> variants;
    if (sweep == "time")
        variants = {"no_tau", "no_delta", "no_time"};
    else if (sweep == "pretrain")
        variants = {"no_pretrain"};
    else if (sweep == "K") {
        const std::vector<int> ks = config.profile == "full"
                                        ? std::vector<int>{1, 5, 10, 20, 30, 40, 50, 60}
                                        : std::vector<int>{1, 5, 10, 20};
        for (int k : ks) variants.push_back("K" + std::to_string(k));
    } else
        throw ConfigError("unknown sweep: " + sweep + " (expected time|pretrain|K)");

    if (dry(config, "ablate: train/score/evaluate variants " + [&] {
            std::string s;
            for (const auto& v : variants) s += v + " ";
            return s;
        }()))
        return;

    const uint64_t seed = config.train.seed;
    for (const auto& variant : variants) {
        cmd_train(config, seed, variant);
        cmd_score(config, seed, variant);
    }
    cmd_evaluate(config);
}

void cmd_plot(const ExperimentConfig& config) {
    if (dry(config, "plot: write SVGs under " + (config.out_dir / "plots").string())) return;
    prepare(config);
    const auto manifest = require_manifest(config);
    std::vector<std::string> files = manifest.train;
    files.insert(files.end(), manifest.validation.begin(), manifest.validation.end());
    files.insert(files.end(), manifest.test.begin(), manifest.test.end());
    std::sort(files.begin(), files.end());
    if (files.empty()) throw MissingArtifactError("no day files; run `forecastad simulate` first");
    const auto days = load_days(config, files);

    const auto plots = config.out_dir / "plots";
    fs::create_directories(plots);

    std::vector<Series> curves;
    for (size_t i = 0; i < std::min<size_t>(5, days.size()); ++i) {
        Series s;
        s.name = days[i].day_id;
        const double t0 = days[i].t0();
        for (const auto& sample : days[i].samples) {
            s.x.push_back((sample.t - t0) / 3600.0);
            s.y.push_back(sample.frame.mean());
        }
        curves.push_back(std::move(s));
    }
    write_svg_line_chart(plots / "daily_mean_temperature.svg",
                         "Daily mean temperature (degC vs hours)", curves);

    std::vector<double> interarrivals;
    for (const auto& day : days)
        for (size_t i = 1; i < day.samples.size(); ++i)
            interarrivals.push_back((day.samples[i].t - day.samples[i - 1].t) / 60.0);
    write_svg_histogram(plots / "interarrival_histogram.svg", "Inter-arrival times (minutes)",
                        interarrivals, 20);

    // score timeline of the first test day, when scores exist
    const auto csv = score_path(config, "forecastad", config.train.seed, "test");
    if (fs::exists(csv)) {
        const auto rows = read_scores_csv(csv);
        if (!rows.empty()) {
            const std::string day0 = rows.front().day_id;
            Series normal{"score", {}, {}}, anomalous{"labelled anomalous", {}, {}};
            double t0 = rows.front().t;
            for (const auto& r : rows) {
                if (r.day_id != day0) continue;
                normal.x.push_back((r.t - t0) / 3600.0);
                normal.y.push_back(r.score);
                if (r.y == Label::Anomalous) {
                    anomalous.x.push_back((r.t - t0) / 3600.0);
                    anomalous.y.push_back(r.score);
                }
            }
            std::vector<Series> series{normal};
            if (!anomalous.x.empty()) series.push_back(anomalous);
            write_svg_line_chart(plots / "score_timeline.svg",
                                 "Anomaly score, first test day (" + day0 + ")", series);
        }
    }
}

CleanResult cmd_clean_deployment(const ExperimentConfig& config, uint64_t seed) {
    if (dry(config, "clean-deployment: write reports/clean_deployment.json")) return {};
    prepare(config);
    const auto split = require_split(config);
    if (!fs::exists(model_ckpt(config, seed, "")))
        throw MissingArtifactError(model_ckpt(config, seed, "").string() +
                                   " not found; run `forecastad train` first");
    auto model = load_checkpoint(model_ckpt(config, seed, ""));
    const int k = model.train_config().context_length;

    std::vector<nn::Vector> training;
    for (const auto& day : apply_setup_filter(split.train, config.setup))
        for (const auto& w : build_context_windows(day, k))
            training.push_back(model.encode_context(w));

    std::vector<nn::Vector> deployment;
    std::vector<std::pair<std::string, double>> ids;
    for (const auto& day : split.test)
        for (const auto& w : build_context_windows(day, k)) {
            if (w.target_sample().y == Label::Anomalous) continue;
            deployment.push_back(model.encode_context(w));
            ids.emplace_back(day.day_id, w.target_sample().t);
        }
    if (deployment.empty())
        throw MissingArtifactError("no normal test samples to clean; check labelling");

    const double threshold = config.clean_threshold >= 0.0 ? config.clean_threshold
                                                           : default_clean_threshold(training);
    auto result = clean_deployment(deployment, training, threshold);

    fs::create_directories(reports_dir(config));
    json j;
    j["config_hash"] = config_hash(config);
    j["threshold"] = threshold;
    j["n_training"] = training.size();
    j["n_deployment"] = deployment.size();
    j["kept"] = result.kept.size();
    j["removed"] = json::array();
    for (size_t idx : result.removed)
        j["removed"].push_back(
            {{"day_id", ids[idx].first}, {"t", ids[idx].second}, {"xi", result.xi[idx]}});
    std::vector<double> xi = result.xi;
    j["xi_percentiles"] = {{"p50", percentile(xi, 50.0)},
                           {"p90", percentile(xi, 90.0)},
                           {"p99", percentile(xi, 99.0)}};
    atomic_write_text(reports_dir(config) / "clean_deployment.json", j.dump(2) + "\n");
    return result;
}

}  // namespace forecastad

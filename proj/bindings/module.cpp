// Python bindings for the ForecastAD core library.
#include <pybind11/numpy.h>
#include <pybind11/pybind11.h>
#include <pybind11/stl.h>
#include <pybind11/stl/filesystem.h>

#include "forecastad/pipeline.hpp"

namespace py = pybind11;
using namespace forecastad;

namespace {

py::array_t<float> frame_to_numpy(const ThermalFrame& f) {
    py::array_t<float> out({f.height, f.width});
    std::copy(f.pixels.begin(), f.pixels.end(), out.mutable_data());
    return out;
}

ThermalFrame frame_from_numpy(
    const py::array_t<float, py::array::c_style | py::array::forcecast>& a) {
    if (a.ndim() != 2) throw std::invalid_argument("expected a 2-D array");
    ThermalFrame f(static_cast<int>(a.shape(0)), static_cast<int>(a.shape(1)));
    std::copy(a.data(), a.data() + a.size(), f.pixels.begin());
    return f;
}

py::dict report_to_dict(const LabelReport& r) {
    py::dict d;
    d["r1_threshold"] = r.r1_threshold;
    d["r2_threshold"] = r.r2_threshold;
    d["r3_threshold"] = r.r3_threshold;
    d["r1_flags"] = r.r1_flags;
    d["r2_flags"] = r.r2_flags;
    d["r3_flags"] = r.r3_flags;
    d["r4_flags"] = r.r4_flags;
    d["trend_flags"] = r.trend_flags;
    d["final_anomalies"] = r.final_anomalies;
    d["short_template_days"] = r.short_template_days;
    return d;
}

}  // namespace

PYBIND11_MODULE(_core, m) {
    m.doc() = "forecasting-based anomaly detection on irregularly sampled "
              "thermal-image sequences";

    py::register_exception<ConfigError>(m, "ConfigError");
    py::register_exception<MissingArtifactError>(m, "MissingArtifactError");
    py::register_exception<UndefinedMetricError>(m, "UndefinedMetricError");

    py::enum_<Label>(m, "Label")
        .value("NORMAL", Label::Normal)
        .value("ANOMALOUS", Label::Anomalous)
        .value("UNLABELED", Label::Unlabeled);
    py::enum_<Segment>(m, "Segment")
        .value("UNASSIGNED", Segment::Unassigned)
        .value("S", Segment::S)
        .value("M", Segment::M)
        .value("E", Segment::E);
    py::enum_<AnomalyKind>(m, "AnomalyKind")
        .value("NONE", AnomalyKind::None)
        .value("FREEZE_STREAK", AnomalyKind::FreezeStreak)
        .value("COLD_PATCH", AnomalyKind::ColdPatch)
        .value("GLOBAL_DROP", AnomalyKind::GlobalDrop)
        .value("HOT_SPOT", AnomalyKind::HotSpot)
        .value("SCHEDULE_RESET", AnomalyKind::ScheduleReset);

    py::class_<ThermalFrame>(m, "ThermalFrame")
        .def(py::init(&frame_from_numpy), py::arg("pixels"))
        .def_readonly("height", &ThermalFrame::height)
        .def_readonly("width", &ThermalFrame::width)
        .def("to_numpy", &frame_to_numpy)
        .def("mean", &ThermalFrame::mean);

    py::class_<Sample>(m, "Sample")
        .def_readonly("t", &Sample::t)
        .def_readonly("y", &Sample::y)
        .def_readonly("segment", &Sample::segment)
        .def_readonly("day_id", &Sample::day_id)
        .def_readonly("anomaly_kind", &Sample::anomaly_kind)
        .def_property_readonly("frame",
                               [](const Sample& s) { return frame_to_numpy(s.frame); });

    py::class_<DaySequence>(m, "DaySequence")
        .def_readonly("day_id", &DaySequence::day_id)
        .def_readonly("samples", &DaySequence::samples)
        .def("__len__", &DaySequence::size);

    py::class_<SimConfig>(m, "SimConfig")
        .def(py::init<>())
        .def_readwrite("height", &SimConfig::height)
        .def_readwrite("width", &SimConfig::width)
        .def_readwrite("day_length", &SimConfig::day_length)
        .def_readwrite("interarrival_min", &SimConfig::interarrival_min)
        .def_readwrite("interarrival_max", &SimConfig::interarrival_max)
        .def_readwrite("anomaly_rate", &SimConfig::anomaly_rate)
        .def_readwrite("clean_day_fraction", &SimConfig::clean_day_fraction)
        .def_readwrite("pixel_noise_sd", &SimConfig::pixel_noise_sd)
        .def_readwrite("seed", &SimConfig::seed);

    m.def("simulate_day", &simulate_day, py::arg("config"), py::arg("day_index"));
    m.def("clean_frame",
          [](const SimConfig& c, double delta) { return frame_to_numpy(clean_frame(c, delta)); },
          py::arg("config"), py::arg("delta"));

    py::class_<LabelConfig>(m, "LabelConfig")
        .def(py::init<>())
        .def_readwrite("trend_threshold", &LabelConfig::trend_threshold)
        .def_readwrite("trend_window", &LabelConfig::trend_window)
        .def_readwrite("min_day_samples", &LabelConfig::min_day_samples)
        .def_readwrite("smoothing_window", &LabelConfig::smoothing_window)
        .def_readwrite("r3_template_count", &LabelConfig::r3_template_count);

    m.def(
        "label_days",
        [](std::vector<DaySequence> days, const LabelConfig& cfg) {
            const auto report = label_days(days, cfg);
            return py::make_tuple(days, report_to_dict(report));
        },
        py::arg("days"), py::arg("config"),
        "Segments the days, applies all labelling rules, and returns "
        "(labelled_days, report_dict).");

    m.def("encode_time", &encode_time, py::arg("minutes"), py::arg("dim") = 16,
          py::arg("period") = 1000.0);

    m.def("auroc", &auroc, py::arg("scores"), py::arg("labels"));
    m.def("aupr", &aupr, py::arg("scores"), py::arg("labels"));
    m.def("classify", &classify, py::arg("scores"), py::arg("lambda_"));
    m.def(
        "metrics_at",
        [](const std::vector<double>& s, const std::vector<int>& y, double lam) {
            const auto v = metrics_at(s, y, lam);
            py::dict d;
            d["accuracy"] = v.accuracy;
            d["f1"] = v.f1;
            d["gmean"] = v.gmean;
            return d;
        },
        py::arg("scores"), py::arg("labels"), py::arg("lambda_"));
    m.def(
        "select_thresholds",
        [](const std::vector<double>& s, const std::vector<int>& y) {
            const auto c = select_thresholds(s, y);
            py::dict d;
            d["lambda_f"] = c.lambda_f;
            d["lambda_g"] = c.lambda_g;
            d["best_f1"] = c.best_f1;
            d["best_gmean"] = c.best_gmean;
            return d;
        },
        py::arg("scores"), py::arg("labels"));

    py::class_<ExperimentConfig>(m, "ExperimentConfig")
        .def_readwrite("profile", &ExperimentConfig::profile)
        .def_readwrite("n_days", &ExperimentConfig::n_days)
        .def_readwrite("n_seeds", &ExperimentConfig::n_seeds)
        .def_readwrite("dry_run", &ExperimentConfig::dry_run)
        .def_property(
            "out_dir",
            [](const ExperimentConfig& c) { return c.out_dir.string(); },
            [](ExperimentConfig& c, const std::string& p) { c.out_dir = p; })
        .def("override",
             [](ExperimentConfig& c, const std::string& key, const std::string& value) {
                 apply_override(c, key, value);
             },
             py::arg("key"), py::arg("value"),
             "Sets one flat dotted-key config entry from its string form.")
        .def("hash", &config_hash);

    m.def("default_config", &default_config, py::arg("profile"));
    m.def("load_config", &load_config, py::arg("path"));
    m.def("save_config", &save_config, py::arg("path"), py::arg("config"));

    m.def("run_simulate", &cmd_simulate, py::arg("config"));
    m.def("run_label", [](const ExperimentConfig& c) { return report_to_dict(cmd_label(c)); },
          py::arg("config"));
    m.def("run_split", &cmd_split, py::arg("config"));
    m.def("run_pretrain", &cmd_pretrain, py::arg("config"), py::arg("seed"));
    m.def("run_train", &cmd_train, py::arg("config"), py::arg("seed"), py::arg("variant") = "");
    m.def("run_score", &cmd_score, py::arg("config"), py::arg("seed"), py::arg("variant") = "");
    m.def(
        "run_evaluate",
        [](const ExperimentConfig& c) {
            py::list out;
            for (const auto& r : cmd_evaluate(c)) out.append(report_to_json(r));
            return out;
        },
        py::arg("config"),
        "Runs evaluation and returns one JSON report string per detector.");
}

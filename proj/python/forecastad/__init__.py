"""Forecasting-based anomaly detection on irregularly sampled thermal-image sequences."""

from forecastad._core import (  # noqa: F401
    AnomalyKind,
    ConfigError,
    DaySequence,
    ExperimentConfig,
    Label,
    LabelConfig,
    MissingArtifactError,
    Sample,
    Segment,
    SimConfig,
    ThermalFrame,
    UndefinedMetricError,
    auroc,
    aupr,
    classify,
    clean_frame,
    default_config,
    encode_time,
    label_days,
    load_config,
    metrics_at,
    run_evaluate,
    run_label,
    run_pretrain,
    run_score,
    run_simulate,
    run_split,
    run_train,
    save_config,
    select_thresholds,
    simulate_day,
)

__all__ = [
    "AnomalyKind",
    "ConfigError",
    "DaySequence",
    "ExperimentConfig",
    "Label",
    "LabelConfig",
    "MissingArtifactError",
    "Sample",
    "Segment",
    "SimConfig",
    "ThermalFrame",
    "UndefinedMetricError",
    "auroc",
    "aupr",
    "classify",
    "clean_frame",
    "default_config",
    "encode_time",
    "label_days",
    "load_config",
    "metrics_at",
    "run_evaluate",
    "run_label",
    "run_pretrain",
    "run_score",
    "run_simulate",
    "run_split",
    "run_train",
    "save_config",
    "select_thresholds",
    "simulate_day",
]

__version__ = "0.1.0"

from .data import Dataset, load_dataset, read_pv_csv, read_weather_csv, resample_to_15min, save_dataset
from .folds import FoldPlan, make_folds
from .samples import SampleSet, Scaler, apply_scaler, build_samples, fit_scaler
from .synthetic import SyntheticConfig, conditional_quantiles, generate_synthetic

__all__ = [
    "Dataset",
    "FoldPlan",
    "SampleSet",
    "Scaler",
    "SyntheticConfig",
    "apply_scaler",
    "build_samples",
    "conditional_quantiles",
    "fit_scaler",
    "generate_synthetic",
    "load_dataset",
    "make_folds",
    "read_pv_csv",
    "read_weather_csv",
    "resample_to_15min",
    "save_dataset",
]

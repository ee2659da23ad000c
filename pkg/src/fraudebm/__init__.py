"""Glass-box fraud analytics toolkit: explainable boosting with pairwise
interactions, Taguchi experiment design over scaler sequences and
hyperparameters, correlation/VIF diagnostics, and from-scratch baselines."""

from .dataset import Dataset, StratifiedFolds, load_csv, select_features, stratified_kfold
from .ebm import EbmConfig, EbmModel, load_model, save_model, train_ebm

__version__ = "0.1.0"

__all__ = [
    "Dataset",
    "StratifiedFolds",
    "load_csv",
    "select_features",
    "stratified_kfold",
    "EbmConfig",
    "EbmModel",
    "train_ebm",
    "save_model",
    "load_model",
    "__version__",
]

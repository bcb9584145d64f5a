"""Ensemble selection from a predefined portfolio of machine learning pipelines."""

from .dataset import Dataset, Schema, load_csv, stratified_holdout, stratified_kfold
from .ensemble import AutoEnConfig, EconomyConfig, EnsembleModel, autoen_fit, ensemble_predict
from .persist import load_model, save_model
from .pipeline import Portfolio, default_portfolio, parse_portfolio

__version__ = "0.1.0"

__all__ = [
    "AutoEnConfig",
    "Dataset",
    "EconomyConfig",
    "EnsembleModel",
    "Portfolio",
    "Schema",
    "autoen_fit",
    "default_portfolio",
    "ensemble_predict",
    "load_csv",
    "load_model",
    "parse_portfolio",
    "save_model",
    "stratified_holdout",
    "stratified_kfold",
]

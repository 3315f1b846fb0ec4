from .checkpoint import load_model, save_model
from .export import write_curves, write_probabilities, write_report
from .ingest import Dataset, LightCurve, read_table, split_train_validation, write_table

__all__ = [
    "Dataset",
    "LightCurve",
    "read_table",
    "write_table",
    "split_train_validation",
    "save_model",
    "load_model",
    "write_report",
    "write_curves",
    "write_probabilities",
]

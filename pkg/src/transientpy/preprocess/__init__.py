from .ops import PreprocessedSequence, pad_and_mask, truncate_after_detection
from .pipeline import PreprocessConfig, preprocess_dataset

__all__ = [
    "PreprocessedSequence",
    "PreprocessConfig",
    "pad_and_mask",
    "preprocess_dataset",
    "truncate_after_detection",
]

from .metrics import EvalReport, evaluate

__all__ = ["EvalReport", "evaluate"]

try:
    from ._version import __version__
except ImportError:  # source tree without a build
    __version__ = "0.0.0"

from . import io, nn, preprocess, stats, synth, utils

__all__ = ["__version__", "io", "nn", "preprocess", "stats", "synth", "utils"]

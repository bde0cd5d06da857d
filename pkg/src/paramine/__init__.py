"""Paraphrase mining, control-token preparation, and simplification evaluation."""

__version__ = "0.1.0"

from . import access, corpus, embed, index, kernels, lm, metrics, mine, textnorm, tune

__all__ = [
    "access",
    "corpus",
    "embed",
    "index",
    "kernels",
    "lm",
    "metrics",
    "mine",
    "textnorm",
    "tune",
    "__version__",
]

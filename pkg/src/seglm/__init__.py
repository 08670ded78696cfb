"""Segmental language modeling and unsupervised word segmentation toolkit."""

from . import corpus, lattice, metrics, model, numeric

__all__ = ["corpus", "lattice", "metrics", "model", "numeric"]
__version__ = "0.1.0"

"""Fundamental types and elementary classifier operations.

A dataset is a pair of a logit matrix (N samples x C classes, float64) and
an integer label vector. Everything downstream (confidence scores, selective
risk, tuning) is built from the argmax prediction, the 0/1 loss and the
softmax, all defined here. All functions are pure and operate on immutable
inputs, so they are safe to call from multiple threads.
"""

from __future__ import annotations

import numpy as np

__all__ = [
    "SelclassError",
    "DimensionError",
    "ParameterError",
    "DegenerateInputError",
    "UndefinedMetricError",
    "ParseError",
    "as_logit_matrix",
    "as_label_vector",
    "as_confidence_vector",
    "as_loss_vector",
    "argmax_predict",
    "zero_one_loss",
    "softmax",
]


class SelclassError(Exception):
    """Base class for all errors raised by this package."""


class DimensionError(SelclassError):
    """Array shapes or lengths do not match."""


class ParameterError(SelclassError):
    """A parameter or input value is outside its valid range."""


class DegenerateInputError(SelclassError):
    """An input row is degenerate for the requested operation (e.g. zero norm)."""


class UndefinedMetricError(SelclassError):
    """The requested metric is mathematically undefined for this input."""


class ParseError(SelclassError):
    """A file could not be parsed; the message carries location context."""


def as_logit_matrix(values) -> np.ndarray:
    """Validate and return logits as a float64 matrix (N >= 1, C >= 2, finite)."""
    z = np.asarray(values, dtype=np.float64)
    if z.ndim != 2:
        raise DimensionError(f"logit matrix must be 2-dimensional, got shape {z.shape}")
    n, c = z.shape
    if n < 1:
        raise ParameterError("logit matrix needs at least one row")
    if c < 2:
        raise ParameterError(f"logit matrix needs at least two classes, got {c}")
    if not np.isfinite(z).all():
        raise ParameterError("logit matrix contains non-finite entries")
    return z


def as_label_vector(labels, num_classes: int) -> np.ndarray:
    """Validate integer labels in [0, num_classes)."""
    y = np.asarray(labels)
    if y.ndim != 1:
        raise DimensionError(f"label vector must be 1-dimensional, got shape {y.shape}")
    if not np.issubdtype(y.dtype, np.integer):
        yf = np.asarray(labels, dtype=np.float64)
        if not np.all(yf == np.floor(yf)):
            raise ParameterError("labels must be integers")
        y = yf.astype(np.int64)
    y = y.astype(np.int64)
    if y.size and (y.min() < 0 or y.max() >= num_classes):
        raise ParameterError(f"labels must lie in [0, {num_classes})")
    return y


def as_confidence_vector(scores) -> np.ndarray:
    """Validate confidence scores: a finite float64 vector."""
    s = np.asarray(scores, dtype=np.float64)
    if s.ndim != 1:
        raise DimensionError(f"confidence vector must be 1-dimensional, got shape {s.shape}")
    if not np.isfinite(s).all():
        raise ParameterError("confidence vector contains non-finite entries")
    return s


def as_loss_vector(losses) -> np.ndarray:
    """Validate a 0/1 loss vector."""
    l = np.asarray(losses)
    if l.ndim != 1:
        raise DimensionError(f"loss vector must be 1-dimensional, got shape {l.shape}")
    l = l.astype(np.int64, copy=False) if l.dtype != np.int64 else l
    if l.size and not np.isin(np.asarray(losses), (0, 1)).all():
        raise ParameterError("losses must be 0 or 1")
    return l


def argmax_predict(logits) -> np.ndarray:
    """Per-row argmax prediction; ties broken toward the lowest class index."""
    z = as_logit_matrix(logits)
    return np.argmax(z, axis=1)


def zero_one_loss(predictions, labels) -> np.ndarray:
    """Elementwise 0/1 loss: 1 where prediction differs from label."""
    p = np.asarray(predictions)
    y = np.asarray(labels)
    if p.shape != y.shape or p.ndim != 1:
        raise DimensionError(
            f"predictions and labels must be equal-length vectors, got {p.shape} vs {y.shape}"
        )
    return (p != y).astype(np.int64)


def softmax(z) -> np.ndarray:
    """Softmax of a logit row or matrix (last axis), with max-subtraction.

    Subtracting the row maximum before exponentiating keeps the computation
    finite for logits of any magnitude; the result is invariant to additive
    shifts of the input row.
    """
    x = np.asarray(z, dtype=np.float64)
    if x.ndim == 0 or x.shape[-1] < 1:
        raise DimensionError("softmax needs at least one entry per row")
    shifted = x - x.max(axis=-1, keepdims=True)
    e = np.exp(shifted)
    return e / e.sum(axis=-1, keepdims=True)

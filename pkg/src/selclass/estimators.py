"""Confidence estimators and logit transformations.

Six parameter-free base scores (max softmax probability, softmax margin,
max logit, logits margin, negative entropy, negative Gini) can be combined
with a logit transformation (identity, temperature scaling, p-norm
normalization) into an :class:`EstimatorSpec`. Three composite estimators
with their own hyperparameters (ETS, BK, HTS) are provided as well.

All scores are computed in double precision from shifted logits
``d = z - max(z)``, so softmax-family quantities stay finite for logits of
any magnitude. Higher score always means "accept earlier"; only the induced
ordering of samples is meaningful.
"""

from __future__ import annotations

import warnings
from dataclasses import dataclass, field
from enum import Enum
from typing import Union

import numpy as np

from .core import (
    DegenerateInputError,
    ParameterError,
    as_logit_matrix,
)

__all__ = [
    "BaseEstimator",
    "SOFTMAX_FAMILY",
    "LOGIT_FAMILY",
    "Raw",
    "TemperatureScale",
    "PNorm",
    "Transform",
    "EstimatorSpec",
    "EtsEstimator",
    "BkEstimator",
    "HtsEstimator",
    "CompositeEstimator",
    "msp",
    "softmax_margin",
    "max_logit",
    "logits_margin",
    "negative_entropy",
    "negative_gini",
    "temperature_scale",
    "pnorm",
    "pnorm_normalize",
    "apply_estimator",
    "ets_score",
    "bk_score",
    "hts_score",
    "HTS_MIN_TEMPERATURE",
]

# Softplus output below this is clamped; see hts_score.
HTS_MIN_TEMPERATURE = 1e-12


class BaseEstimator(Enum):
    """The six parameter-free logit-based confidence scores."""

    MSP = "msp"
    SOFTMAX_MARGIN = "softmax-margin"
    MAX_LOGIT = "max-logit"
    LOGITS_MARGIN = "logits-margin"
    NEGATIVE_ENTROPY = "neg-entropy"
    NEGATIVE_GINI = "neg-gini"


# Bases whose score depends on the softmax (temperature-sensitive) versus
# bases computed directly from logits (ranking invariant under scaling).
SOFTMAX_FAMILY = (
    BaseEstimator.MSP,
    BaseEstimator.SOFTMAX_MARGIN,
    BaseEstimator.NEGATIVE_ENTROPY,
    BaseEstimator.NEGATIVE_GINI,
)
LOGIT_FAMILY = (BaseEstimator.MAX_LOGIT, BaseEstimator.LOGITS_MARGIN)


@dataclass(frozen=True)
class Raw:
    """Identity transform: scores are computed on the raw logits."""


@dataclass(frozen=True)
class TemperatureScale:
    """Divide logits by a scalar temperature t > 0 before scoring."""

    t: float

    def __post_init__(self):
        if not (np.isfinite(self.t) and self.t > 0):
            raise ParameterError(f"temperature must be finite and > 0, got {self.t}")


@dataclass(frozen=True)
class PNorm:
    """Divide logits by tau times their p-norm before scoring.

    p must be a nonnegative integer. The 0-norm is the number of nonzero
    entries (the p -> 0 limit of sum |z_i|^p, without the outer root).
    """

    p: int
    tau: float = 1.0

    def __post_init__(self):
        if isinstance(self.p, bool) or not isinstance(self.p, (int, np.integer)):
            raise ParameterError(f"p must be a nonnegative integer, got {self.p!r}")
        if self.p < 0:
            raise ParameterError(f"p must be a nonnegative integer, got {self.p}")
        object.__setattr__(self, "p", int(self.p))
        if not (np.isfinite(self.tau) and self.tau > 0):
            raise ParameterError(f"tau must be finite and > 0, got {self.tau}")
        object.__setattr__(self, "tau", float(self.tau))


Transform = Union[Raw, TemperatureScale, PNorm]


@dataclass(frozen=True)
class EstimatorSpec:
    """A base confidence score plus a logit transformation.

    Construction enforces the compatibility rules: temperature scaling does
    not change the ranking of max-logit or logits-margin scores and is
    rejected for those bases; under p-norm normalization their tau is
    irrelevant and is pinned to 1.
    """

    base: BaseEstimator
    transform: Transform = field(default_factory=Raw)
    fallback_applied: bool = False

    def __post_init__(self):
        if not isinstance(self.base, BaseEstimator):
            raise ParameterError(f"unknown base estimator: {self.base!r}")
        if self.base in LOGIT_FAMILY:
            if isinstance(self.transform, TemperatureScale):
                raise ParameterError(
                    f"temperature scaling does not affect the {self.base.value} "
                    "ranking; combine it with a softmax-family base instead"
                )
            if isinstance(self.transform, PNorm) and self.transform.tau != 1.0:
                object.__setattr__(self, "transform", PNorm(self.transform.p, 1.0))

    def scores(self, logits) -> np.ndarray:
        return apply_estimator(self, logits)


# ---------------------------------------------------------------------------
# shared scoring kernel
#
# Every softmax-family score is derived from three per-row sums of the
# scaled shifted logits x = (z - max z) * r:
#   s1  = sum exp(x)          s2x = sum x * exp(x)          s3 = sum exp(x)^2
# The tuner reuses these exact formulas chunk by chunk, so scores produced
# during grid search and by apply_estimator are bitwise identical.
# ---------------------------------------------------------------------------


def _as_rows(z):
    x = np.asarray(z, dtype=np.float64)
    if x.ndim == 1:
        return as_logit_matrix(x[None, :]), True
    return as_logit_matrix(x), False


def _shift_stats(z: np.ndarray):
    """Row max m, shifted logits d = z - m, and second-largest shifted value."""
    m = z.max(axis=1)
    d = z - m[:, None]
    d2 = np.partition(d, d.shape[1] - 2, axis=1)[:, -2]
    return m, d, d2


def _family_stats(x: np.ndarray, want_entropy: bool, want_gini: bool):
    e = np.exp(x)
    s1 = e.sum(axis=1)
    s2x = np.einsum("ij,ij->i", x, e) if want_entropy else None
    s3 = np.einsum("ij,ij->i", e, e) if want_gini else None
    return s1, s2x, s3


def _softmax_scores_from_stats(base: BaseEstimator, s1, s2x, s3, d2r):
    if base is BaseEstimator.MSP:
        return 1.0 / s1
    if base is BaseEstimator.SOFTMAX_MARGIN:
        return (1.0 - np.exp(d2r)) / s1
    if base is BaseEstimator.NEGATIVE_ENTROPY:
        return s2x / s1 - np.log(s1)
    if base is BaseEstimator.NEGATIVE_GINI:
        return s3 / (s1 * s1) - 1.0
    raise ParameterError(f"{base} is not a softmax-family estimator")


def _base_scores(
    base: BaseEstimator, z2d: np.ndarray, row_scale=None, temp_scale=None
) -> np.ndarray:
    """Scores of one base on scaled logits.

    row_scale (per-row positive vector, e.g. inverse norms) is applied
    first, temp_scale (positive scalar or per-row vector, an inverse
    temperature) second. The two-stage order matches the grid tuner, which
    fixes the row scaling once and sweeps temperatures, so both paths
    produce bitwise-identical scores.
    """
    m, d, d2 = _shift_stats(z2d)
    if base in LOGIT_FAMILY:
        raw = m if base is BaseEstimator.MAX_LOGIT else -d2
        if row_scale is not None:
            raw = raw * row_scale
        if temp_scale is not None:
            raw = raw * temp_scale
        return raw
    if row_scale is not None:
        d = d * row_scale[:, None]
        d2 = d2 * row_scale
    if temp_scale is None:
        x, d2r = d, d2
    elif np.ndim(temp_scale) == 0:
        x, d2r = d * temp_scale, d2 * temp_scale
    else:
        x, d2r = d * temp_scale[:, None], d2 * temp_scale
    s1, s2x, s3 = _family_stats(
        x,
        want_entropy=base is BaseEstimator.NEGATIVE_ENTROPY,
        want_gini=base is BaseEstimator.NEGATIVE_GINI,
    )
    return _softmax_scores_from_stats(base, s1, s2x, s3, d2r)


def _scored(fn_base):
    def scorer(z):
        z2d, squeeze = _as_rows(z)
        out = _base_scores(fn_base, z2d)
        return float(out[0]) if squeeze else out

    return scorer


def msp(z):
    """Maximum softmax probability of a logit row or matrix."""
    return _scored(BaseEstimator.MSP)(z)


def softmax_margin(z):
    """Softmax probability of the predicted class minus the runner-up's."""
    return _scored(BaseEstimator.SOFTMAX_MARGIN)(z)


def max_logit(z):
    """The largest logit."""
    return _scored(BaseEstimator.MAX_LOGIT)(z)


def logits_margin(z):
    """Largest logit minus the second largest; always >= 0."""
    return _scored(BaseEstimator.LOGITS_MARGIN)(z)


def negative_entropy(z):
    """Sum of sigma * log(sigma) over softmax probabilities (natural log)."""
    return _scored(BaseEstimator.NEGATIVE_ENTROPY)(z)


def negative_gini(z):
    """Sum of squared softmax probabilities minus one; in (-1, 0)."""
    return _scored(BaseEstimator.NEGATIVE_GINI)(z)


def temperature_scale(z, t: float):
    """Divide logits by a temperature t > 0."""
    if not (np.isfinite(t) and t > 0):
        raise ParameterError(f"temperature must be finite and > 0, got {t}")
    return np.asarray(z, dtype=np.float64) / t


def pnorm(values, p) -> np.ndarray:
    """p-norm of each row: (sum |v|^p)^(1/p) for p > 0, nonzero count for p = 0.

    p may be any nonnegative real here; integer-only restrictions apply at
    the :class:`PNorm` transform level. The power sum is evaluated on
    entries divided by the row max magnitude, which avoids overflow for
    large p without changing exact cases.
    """
    v = np.asarray(values, dtype=np.float64)
    squeeze = v.ndim == 1
    v2 = v[None, :] if squeeze else v
    if not (np.isfinite(p) and p >= 0):
        raise ParameterError(f"p must be >= 0, got {p}")
    if p == 0:
        out = np.count_nonzero(v2, axis=1).astype(np.float64)
    else:
        a = np.abs(v2)
        mx = a.max(axis=1)
        safe = np.where(mx > 0, mx, 1.0)
        out = safe * np.power(np.power(a / safe[:, None], p).sum(axis=1), 1.0 / p)
        out = np.where(mx > 0, out, 0.0)
    return float(out[0]) if squeeze else out


def pnorm_normalize(z, p: int, tau: float):
    """Divide each logit row by tau times its p-norm.

    Raises DegenerateInputError when a row's norm is zero (an all-zero row,
    or p = 0 with no nonzero entries), naming the first offending row.
    """
    transform = PNorm(p, tau)  # validates p and tau
    z2d, squeeze = _as_rows(z)
    norms = pnorm(z2d, transform.p)
    bad = np.flatnonzero(norms == 0)
    if bad.size:
        raise DegenerateInputError(
            f"row {bad[0]} has zero {transform.p}-norm; cannot normalize"
        )
    out = z2d / (transform.tau * norms)[:, None]
    return out[0] if squeeze else out


def _pnorm_inv_scale(z2d: np.ndarray, p: int):
    """Per-row 1/norm with a mask of degenerate (zero-norm) rows."""
    norms = pnorm(z2d, p)
    bad = norms == 0
    inv = np.divide(1.0, norms, out=np.zeros_like(norms), where=~bad)
    return inv, bad


def apply_estimator(spec: EstimatorSpec, logits) -> np.ndarray:
    """Confidence scores of a spec on a logit matrix: transform, then base."""
    if not isinstance(spec, EstimatorSpec):
        raise ParameterError(f"expected an EstimatorSpec, got {type(spec).__name__}")
    z = as_logit_matrix(logits)
    tr = spec.transform
    if isinstance(tr, Raw):
        return _base_scores(spec.base, z)
    if isinstance(tr, TemperatureScale):
        return _base_scores(spec.base, z, temp_scale=1.0 / tr.t)
    if isinstance(tr, PNorm):
        inv, bad = _pnorm_inv_scale(z, tr.p)
        if bad.any():
            raise DegenerateInputError(
                f"row {np.flatnonzero(bad)[0]} has zero {tr.p}-norm; cannot normalize"
            )
        return _base_scores(spec.base, z, row_scale=inv, temp_scale=1.0 / tr.tau)
    raise ParameterError(f"unknown transform: {tr!r}")


# ---------------------------------------------------------------------------
# composite estimators
# ---------------------------------------------------------------------------


def ets_score(z, w1: float, w2: float, t: float):
    """Ensemble of temperature-scaled and raw MSP: w1*MSP(z/t) + w2*MSP(z)."""
    for name, w in (("w1", w1), ("w2", w2)):
        if not (np.isfinite(w) and 0.0 <= w <= 1.0):
            raise ParameterError(f"{name} must lie in [0, 1], got {w}")
    if not (np.isfinite(t) and t > 0):
        raise ParameterError(f"temperature must be finite and > 0, got {t}")
    z2d, squeeze = _as_rows(z)
    _, d, _ = _shift_stats(z2d)
    s1_cool, _, _ = _family_stats(d * (1.0 / t), False, False)
    s1_raw, _, _ = _family_stats(d, False, False)
    out = w1 * (1.0 / s1_cool) + w2 * (1.0 / s1_raw)
    return float(out[0]) if squeeze else out


def bk_score(z, a: float, b: float):
    """Weighted sum a*MSP(z) + b*(1 - runner-up softmax probability)."""
    for name, w in (("a", a), ("b", b)):
        if not (np.isfinite(w) and -1.0 <= w <= 1.0):
            raise ParameterError(f"{name} must lie in [-1, 1], got {w}")
    z2d, squeeze = _as_rows(z)
    _, d, d2 = _shift_stats(z2d)
    s1, _, _ = _family_stats(d, False, False)
    out = a * (1.0 / s1) + b * (1.0 - np.exp(d2) / s1)
    return float(out[0]) if squeeze else out


def hts_score(z, b: float, w: float):
    """MSP at a per-sample temperature driven by the row's mean entropy.

    The temperature is softplus(b + w * log Hbar) with Hbar the mean softmax
    entropy of the row. Softplus output that underflows to zero is clamped
    to HTS_MIN_TEMPERATURE with a RuntimeWarning.
    """
    if not (np.isfinite(b) and -3.0 <= b <= 1.0):
        raise ParameterError(f"b must lie in [-3, 1], got {b}")
    if not (np.isfinite(w) and -1.0 <= w <= 1.0):
        raise ParameterError(f"w must lie in [-1, 1], got {w}")
    z2d, squeeze = _as_rows(z)
    _, d, _ = _shift_stats(z2d)
    s1, s2x, _ = _family_stats(d, True, False)
    neg_ent = s2x / s1 - np.log(s1)
    # Mean entropy is > 0 for finite logits but can underflow to 0.0 for
    # extremely peaked rows; floor it so log stays finite.
    hbar = np.maximum(-neg_ent / z2d.shape[1], 1e-300)
    t_h = np.logaddexp(0.0, b + w * np.log(hbar))
    if (t_h < HTS_MIN_TEMPERATURE).any():
        warnings.warn(
            "HTS temperature underflowed; clamped to HTS_MIN_TEMPERATURE",
            RuntimeWarning,
            stacklevel=2,
        )
        t_h = np.maximum(t_h, HTS_MIN_TEMPERATURE)
    s1_scaled, _, _ = _family_stats(d * (1.0 / t_h)[:, None], False, False)
    out = 1.0 / s1_scaled
    return float(out[0]) if squeeze else out


@dataclass(frozen=True)
class EtsEstimator:
    """Tuned ETS parameters; t comes from a prior temperature fit."""

    w1: float
    w2: float
    t: float

    def __post_init__(self):
        ets_score(np.zeros((1, 2)), self.w1, self.w2, self.t)  # validate ranges

    def scores(self, logits) -> np.ndarray:
        return ets_score(as_logit_matrix(logits), self.w1, self.w2, self.t)


@dataclass(frozen=True)
class BkEstimator:
    """Tuned BK parameters."""

    a: float
    b: float

    def __post_init__(self):
        bk_score(np.zeros((1, 2)), self.a, self.b)

    def scores(self, logits) -> np.ndarray:
        return bk_score(as_logit_matrix(logits), self.a, self.b)


@dataclass(frozen=True)
class HtsEstimator:
    """Tuned HTS parameters."""

    b: float
    w: float

    def __post_init__(self):
        hts_score(np.zeros((1, 2)), self.b, self.w)

    def scores(self, logits) -> np.ndarray:
        return hts_score(as_logit_matrix(logits), self.b, self.w)


CompositeEstimator = Union[EtsEstimator, BkEstimator, HtsEstimator]

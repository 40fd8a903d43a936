"""Selective-classification and misclassification-detection metrics.

All metrics are driven by one canonical ordering: samples sorted by
confidence descending, ties broken by original index ascending. The k-th
point of the risk-coverage curve is the mean loss of the k most confident
samples at coverage k/N, and AURC is the unweighted mean of those prefix
risks. AUROC uses average ranks (half credit for ties), the standard
Mann-Whitney convention.

Because AURC under heavy ties depends on the tie-breaking order,
:func:`count_tie_groups` is provided as a diagnostic.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .core import (
    DimensionError,
    ParameterError,
    UndefinedMetricError,
    as_confidence_vector,
    as_loss_vector,
)

__all__ = [
    "RCCurve",
    "MetricReport",
    "rank_order",
    "rc_curve",
    "aurc",
    "oracle_aurc",
    "e_aurc",
    "naurc",
    "auroc",
    "sac",
    "apg",
    "compute_report",
    "count_tie_groups",
    "mean_std",
]

FLOAT_FMT = ".17g"  # round-trips float64 exactly


def _conf_losses(conf, losses):
    c = as_confidence_vector(conf)
    l = as_loss_vector(losses)
    if c.shape != l.shape:
        raise DimensionError(
            f"confidence and loss vectors differ in length: {c.size} vs {l.size}"
        )
    if c.size == 0:
        raise ParameterError("metrics need at least one sample")
    return c, l


def rank_order(conf) -> np.ndarray:
    """Indices sorted by score descending; ties keep original index order."""
    c = as_confidence_vector(conf)
    return np.argsort(-c, kind="stable")


def _prefix_risks(conf, losses) -> np.ndarray:
    order = rank_order(conf)
    return np.cumsum(losses[order]) / np.arange(1, losses.size + 1)


@dataclass(eq=False)
class RCCurve:
    """Risk-coverage curve: one (coverage, risk) point per accepted prefix."""

    coverages: np.ndarray
    risks: np.ndarray

    def __eq__(self, other):
        if not isinstance(other, RCCurve):
            return NotImplemented
        return np.array_equal(self.coverages, other.coverages) and np.array_equal(
            self.risks, other.risks
        )

    def to_text(self) -> str:
        """Two-column text (coverage, risk), one point per line."""
        lines = [
            f"{c:{FLOAT_FMT}} {r:{FLOAT_FMT}}"
            for c, r in zip(self.coverages, self.risks)
        ]
        return "\n".join(lines) + "\n"


def rc_curve(conf, losses) -> RCCurve:
    """Risk-coverage curve of a confidence estimator on observed losses."""
    c, l = _conf_losses(conf, losses)
    n = l.size
    return RCCurve(np.arange(1, n + 1) / n, _prefix_risks(c, l))


def aurc(conf, losses) -> float:
    """Area under the risk-coverage curve: mean of the prefix risks."""
    c, l = _conf_losses(conf, losses)
    return float(_prefix_risks(c, l).mean())


def oracle_aurc(losses) -> float:
    """AURC of a perfect ordering: all correct samples accepted first."""
    l = as_loss_vector(losses)
    if l.size == 0:
        raise ParameterError("metrics need at least one sample")
    risks = np.cumsum(np.sort(l)) / np.arange(1, l.size + 1)
    return float(risks.mean())


def e_aurc(conf, losses) -> float:
    """Excess AURC over the oracle ordering; always >= 0."""
    return aurc(conf, losses) - oracle_aurc(losses)


def naurc(conf, losses) -> float:
    """AURC min-max normalized between the oracle (0) and a random estimator (1).

    Undefined when the classifier makes no errors or only errors, since the
    oracle and the random baseline then coincide.
    """
    c, l = _conf_losses(conf, losses)
    errors = int(l.sum())
    if errors == 0 or errors == l.size:
        raise UndefinedMetricError(
            f"NAURC is undefined with {errors} errors out of {l.size} samples"
        )
    oracle = oracle_aurc(l)
    risk = errors / l.size
    return (aurc(c, l) - oracle) / (risk - oracle)


def _average_ranks(values: np.ndarray) -> np.ndarray:
    """1-based ranks, ties assigned the mean rank of their group."""
    n = values.size
    order = np.argsort(values, kind="stable")
    sorted_v = values[order]
    boundary = np.empty(n, dtype=bool)
    boundary[0] = True
    np.not_equal(sorted_v[1:], sorted_v[:-1], out=boundary[1:])
    starts = np.flatnonzero(boundary)
    ends = np.append(starts[1:], n)
    group_rank = (starts + ends + 1) / 2.0
    ranks = np.empty(n)
    ranks[order] = group_rank[np.cumsum(boundary) - 1]
    return ranks


def auroc(conf, losses) -> float:
    """Probability a correct prediction outranks an incorrect one (ties half).

    Computed as the normalized Mann-Whitney U statistic over all
    correct x incorrect pairs.
    """
    c, l = _conf_losses(conf, losses)
    n_correct = int((l == 0).sum())
    n_wrong = l.size - n_correct
    if n_correct == 0 or n_wrong == 0:
        raise UndefinedMetricError(
            "AUROC needs at least one correct and one incorrect prediction"
        )
    ranks = _average_ranks(c)
    u = ranks[l == 0].sum() - n_correct * (n_correct + 1) / 2.0
    return float(u / (n_correct * n_wrong))


def sac(conf, losses, target_accuracy: float) -> float:
    """Largest coverage whose prefix accuracy meets the target; 0 if none does."""
    if not (np.isfinite(target_accuracy) and 0.0 < target_accuracy <= 1.0):
        raise ParameterError(f"target accuracy must lie in (0, 1], got {target_accuracy}")
    c, l = _conf_losses(conf, losses)
    n = l.size
    accuracies = 1.0 - _prefix_risks(c, l)
    qualifying = np.flatnonzero(accuracies >= target_accuracy)
    if qualifying.size == 0:
        return 0.0
    return float((qualifying[-1] + 1) / n)


def apg(naurc_msp, naurc_method, epsilon: float) -> float:
    """Mean gain of a method's NAURC over the baseline, zeroing gains <= epsilon.

    Inputs are per-model NAURC values for the baseline and the method, in
    matching order.
    """
    if not (np.isfinite(epsilon) and epsilon >= 0):
        raise ParameterError(f"epsilon must be >= 0, got {epsilon}")
    base = np.asarray(naurc_msp, dtype=np.float64)
    meth = np.asarray(naurc_method, dtype=np.float64)
    if base.ndim != 1 or base.shape != meth.shape:
        raise DimensionError(
            f"per-model NAURC lists differ in shape: {base.shape} vs {meth.shape}"
        )
    if base.size == 0:
        raise ParameterError("APG needs at least one model")
    gains = base - meth
    return float(np.where(gains > epsilon, gains, 0.0).mean())


def count_tie_groups(conf) -> int:
    """Number of distinct confidence values shared by more than one sample."""
    c = as_confidence_vector(conf)
    _, counts = np.unique(c, return_counts=True)
    return int((counts > 1).sum())


@dataclass
class MetricReport:
    """Bundle of selective-classification metrics for one evaluation.

    naurc and auroc are None when mathematically undefined (no errors, or
    no correct predictions). sac maps each requested target accuracy to the
    achievable coverage.
    """

    accuracy: float
    aurc: float
    oracle_aurc: float
    e_aurc: float
    naurc: float | None
    auroc: float | None
    sac: dict[float, float] = field(default_factory=dict)


def compute_report(conf, losses, sac_targets=()) -> MetricReport:
    """Evaluate the full metric bundle for one confidence vector."""
    c, l = _conf_losses(conf, losses)
    a = aurc(c, l)
    oracle = oracle_aurc(l)
    try:
        nau = naurc(c, l)
    except UndefinedMetricError:
        nau = None
    try:
        roc = auroc(c, l)
    except UndefinedMetricError:
        roc = None
    return MetricReport(
        accuracy=float(1.0 - l.mean()),
        aurc=a,
        oracle_aurc=oracle,
        e_aurc=a - oracle,
        naurc=nau,
        auroc=roc,
        sac={float(t): sac(c, l, t) for t in sac_targets},
    )


def mean_std(values) -> tuple[float, float]:
    """Mean and population standard deviation of a value list."""
    v = np.asarray(values, dtype=np.float64)
    if v.size == 0:
        raise ParameterError("cannot aggregate an empty value list")
    return float(v.mean()), float(v.std())

"""Grid-search tuning of estimator hyperparameters on a labeled tuning set.

Temperature scaling is tuned against negative log-likelihood or AURC over a
fixed temperature grid; p-norm normalization tunes tau per p and then picks
the best p, always against AURC; the composite estimators (ETS, BK, HTS)
minimize AURC over their parameter grids. All tuners are deterministic:
grids are totally ordered and ties resolve by fixed rules (temperatures
toward 1, p toward smaller values, composite parameters lexicographically),
regardless of how many worker threads evaluate candidates.

Every result carries the tuning-set AURC of the chosen estimator together
with the raw-MSP baseline AURC, so :func:`apply_fallback` can revert to the
baseline whenever the tuned estimator fails to improve on it.

The heavy inner loop evaluates softmax-family scores for hundreds of
temperatures over the same shifted-logit matrix. It runs chunk-blocked so
each chunk stays cache resident across the whole temperature block, and
row-parallel across threads (numpy releases the GIL in its inner loops).
Per-row sums are computed with the same elementary operations as
apply_estimator, so tuned and re-applied scores agree bitwise.
"""

from __future__ import annotations

from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field, replace
from enum import Enum
from typing import Optional, Union

import numpy as np

from .core import (
    DegenerateInputError,
    ParameterError,
    argmax_predict,
    as_label_vector,
    as_logit_matrix,
    zero_one_loss,
)
from .metrics import naurc
from .estimators import (
    HTS_MIN_TEMPERATURE,
    LOGIT_FAMILY,
    BaseEstimator,
    BkEstimator,
    CompositeEstimator,
    EstimatorSpec,
    EtsEstimator,
    HtsEstimator,
    PNorm,
    Raw,
    TemperatureScale,
    _base_scores,
    _family_stats,
    _pnorm_inv_scale,
    _shift_stats,
    _softmax_scores_from_stats,
)

__all__ = [
    "Objective",
    "GridSpec",
    "TuneResult",
    "Method",
    "SweepPoint",
    "parse_method",
    "method_ids",
    "nll",
    "tune_temperature",
    "tune_pnorm",
    "tune_composite",
    "tune_method",
    "apply_fallback",
    "data_efficiency_sweep",
]

_CHUNK_ROWS = 512


class Objective(Enum):
    NLL = "nll"
    AURC = "aurc"


def _step_grid(lo_hundredths: int, hi_hundredths: int) -> tuple[float, ...]:
    return tuple(np.arange(lo_hundredths, hi_hundredths + 1) / 100.0)


DEFAULT_TEMPERATURES = _step_grid(1, 300)  # 0.01 .. 3.00
DEFAULT_P_VALUES = tuple(range(11))  # 0 .. 10
DEFAULT_ETS_WEIGHTS = _step_grid(0, 100)  # 0 .. 1
DEFAULT_BK_WEIGHTS = _step_grid(-100, 100)  # -1 .. 1
DEFAULT_HTS_B = _step_grid(-300, 100)  # -3 .. 1
DEFAULT_HTS_W = _step_grid(-100, 100)  # -1 .. 1


def _check_grid(name, values, positive=False, integer=False):
    if len(values) == 0:
        raise ParameterError(f"{name} grid must not be empty")
    arr = np.asarray(values, dtype=np.float64)
    if not np.isfinite(arr).all():
        raise ParameterError(f"{name} grid contains non-finite values")
    if (np.diff(arr) <= 0).any():
        raise ParameterError(f"{name} grid must be strictly increasing")
    if positive and arr[0] <= 0:
        raise ParameterError(f"{name} grid values must be > 0")
    if integer and not all(
        isinstance(v, (int, np.integer)) and not isinstance(v, bool) and v >= 0
        for v in values
    ):
        raise ParameterError(f"{name} grid must hold nonnegative integers")


@dataclass(frozen=True)
class GridSpec:
    """Hyperparameter grids for every tunable method."""

    temperatures: tuple[float, ...] = DEFAULT_TEMPERATURES
    p_values: tuple[int, ...] = DEFAULT_P_VALUES
    ets_weights: tuple[float, ...] = DEFAULT_ETS_WEIGHTS
    bk_weights: tuple[float, ...] = DEFAULT_BK_WEIGHTS
    hts_b: tuple[float, ...] = DEFAULT_HTS_B
    hts_w: tuple[float, ...] = DEFAULT_HTS_W

    def __post_init__(self):
        _check_grid("p_values", tuple(self.p_values), integer=True)
        object.__setattr__(self, "temperatures", tuple(float(t) for t in self.temperatures))
        object.__setattr__(self, "p_values", tuple(int(p) for p in self.p_values))
        for name in ("ets_weights", "bk_weights", "hts_b", "hts_w"):
            object.__setattr__(self, name, tuple(float(v) for v in getattr(self, name)))
        _check_grid("temperatures", self.temperatures, positive=True)
        _check_grid("ets_weights", self.ets_weights)
        _check_grid("bk_weights", self.bk_weights)
        _check_grid("hts_b", self.hts_b)
        _check_grid("hts_w", self.hts_w)


@dataclass(frozen=True)
class TuneResult:
    """Outcome of tuning one method on one tuning set.

    tuning_aurc and msp_tuning_aurc are both tuning-set AURC values (the
    fallback decision metric), whatever objective drove the search.
    """

    spec: Union[EstimatorSpec, CompositeEstimator]
    objective: Objective
    tuning_aurc: float
    msp_tuning_aurc: float
    fallback_applied: bool = False
    candidates_evaluated: int = 0
    edge_hit: bool = False
    excluded_rows: int = 0


@dataclass(frozen=True)
class SweepPoint:
    """Test-set NAURC statistics for one tuning-set size."""

    size: int
    naurc_mean: float
    naurc_std: float
    naurc_values: tuple[float, ...]


# ---------------------------------------------------------------------------
# fast candidate evaluation
# ---------------------------------------------------------------------------


def _aurc_unchecked(scores: np.ndarray, losses: np.ndarray) -> float:
    # Same operations as metrics.aurc, minus input validation.
    order = np.argsort(-scores, kind="stable")
    risks = np.cumsum(losses[order]) / np.arange(1, losses.size + 1)
    return float(risks.mean())


def _row_ranges(n: int, jobs: int):
    """Split rows into at most `jobs` chunk-aligned contiguous ranges."""
    per = -(-n // max(1, jobs))
    per = -(-per // _CHUNK_ROWS) * _CHUNK_ROWS
    return [(lo, min(lo + per, n)) for lo in range(0, n, max(per, 1))]


def _stats_sweep(d: np.ndarray, r_values, want_entropy: bool, want_gini: bool, jobs: int):
    """Per-temperature row sums s1/s2x/s3 for every r in r_values."""
    n, c = d.shape
    nb = len(r_values)
    s1 = np.empty((nb, n))
    s2x = np.empty((nb, n)) if want_entropy else None
    s3 = np.empty((nb, n)) if want_gini else None

    def worker(bounds):
        lo, hi = bounds
        x = np.empty((min(_CHUNK_ROWS, hi - lo), c))
        e = np.empty_like(x)
        for c0 in range(lo, hi, _CHUNK_ROWS):
            c1 = min(c0 + _CHUNK_ROWS, hi)
            ch = d[c0:c1]
            xv, ev = x[: c1 - c0], e[: c1 - c0]
            for bi, r in enumerate(r_values):
                np.multiply(ch, r, out=xv)
                np.exp(xv, out=ev)
                s1[bi, c0:c1] = ev.sum(axis=1)
                if want_entropy:
                    s2x[bi, c0:c1] = np.einsum("ij,ij->i", xv, ev)
                if want_gini:
                    s3[bi, c0:c1] = np.einsum("ij,ij->i", ev, ev)

    ranges = _row_ranges(n, jobs)
    if len(ranges) == 1 or jobs <= 1:
        for b in ranges:
            worker(b)
    else:
        with ThreadPoolExecutor(max_workers=min(jobs, len(ranges))) as pool:
            list(pool.map(worker, ranges))
    return s1, s2x, s3


def _family_aurc_sweep(d, d2, r_values, losses, bases, jobs: int) -> np.ndarray:
    """AURC of each softmax-family base at each inverse temperature.

    Returns an array of shape (len(r_values), len(bases)). All requested
    bases share one stats sweep; candidate AURCs are assembled by grid
    index, so the result does not depend on thread scheduling.
    """
    want_entropy = BaseEstimator.NEGATIVE_ENTROPY in bases
    want_gini = BaseEstimator.NEGATIVE_GINI in bases
    s1, s2x, s3 = _stats_sweep(d, r_values, want_entropy, want_gini, jobs)
    out = np.empty((len(r_values), len(bases)))

    def metric_worker(bi):
        r = r_values[bi]
        for k, base in enumerate(bases):
            scores = _softmax_scores_from_stats(
                base,
                s1[bi],
                s2x[bi] if want_entropy else None,
                s3[bi] if want_gini else None,
                d2 * r,
            )
            out[bi, k] = _aurc_unchecked(scores, losses)

    if jobs <= 1:
        for bi in range(len(r_values)):
            metric_worker(bi)
    else:
        with ThreadPoolExecutor(max_workers=jobs) as pool:
            list(pool.map(metric_worker, range(len(r_values))))
    return out


def _pick_temperature(taus, objective_values) -> int:
    """Index of the grid minimum; ties go to the tau nearest 1, then smaller."""
    best = objective_values.min()
    tied = np.flatnonzero(objective_values == best)
    keys = [(abs(taus[i] - 1.0), taus[i]) for i in tied]
    return int(tied[min(range(len(tied)), key=keys.__getitem__)])


# ---------------------------------------------------------------------------
# tuning operations
# ---------------------------------------------------------------------------


def _tuning_inputs(logits, labels):
    z = as_logit_matrix(logits)
    y = as_label_vector(labels, z.shape[1])
    if y.size != z.shape[0]:
        raise ParameterError(
            f"labels ({y.size}) and logits ({z.shape[0]} rows) differ in length"
        )
    losses = zero_one_loss(argmax_predict(z), y)
    return z, y, losses


def nll(logits, labels, t: float) -> float:
    """Mean negative log-likelihood of the labels under softmax(z / t)."""
    if not (np.isfinite(t) and t > 0):
        raise ParameterError(f"temperature must be finite and > 0, got {t}")
    z = as_logit_matrix(logits)
    y = as_label_vector(labels, z.shape[1])
    if y.size != z.shape[0]:
        raise ParameterError(
            f"labels ({y.size}) and logits ({z.shape[0]} rows) differ in length"
        )
    _, d, _ = _shift_stats(z)
    x = d * (1.0 / t)
    s1 = np.exp(x).sum(axis=1)
    return float(np.mean(np.log(s1) - x[np.arange(y.size), y]))


def tune_temperature(
    base: BaseEstimator,
    logits,
    labels,
    temperatures=None,
    objective: Objective = Objective.AURC,
    jobs: int = 1,
) -> TuneResult:
    """Pick the grid temperature minimizing NLL or AURC for one base score."""
    if base in LOGIT_FAMILY:
        raise ParameterError(
            f"temperature scaling does not affect the {base.value} ranking"
        )
    if not isinstance(objective, Objective):
        raise ParameterError(f"unknown objective: {objective!r}")
    taus = DEFAULT_TEMPERATURES if temperatures is None else tuple(temperatures)
    _check_grid("temperatures", taus, positive=True)
    z, y, losses = _tuning_inputs(logits, labels)
    _, d, d2 = _shift_stats(z)
    rs = [1.0 / t for t in taus]

    want_entropy = base is BaseEstimator.NEGATIVE_ENTROPY
    want_gini = base is BaseEstimator.NEGATIVE_GINI
    s1, s2x, s3 = _stats_sweep(d, rs, want_entropy, want_gini, jobs)

    if objective is Objective.NLL:
        # mean(log s1 - x_y) decomposed; the label shift is linear in 1/t.
        dy_mean = d[np.arange(y.size), y].mean()
        values = np.log(s1).mean(axis=1) - np.asarray(rs) * dy_mean
    else:
        values = np.empty(len(taus))
        for bi, r in enumerate(rs):
            scores = _softmax_scores_from_stats(
                base,
                s1[bi],
                s2x[bi] if want_entropy else None,
                s3[bi] if want_gini else None,
                d2 * r,
            )
            values[bi] = _aurc_unchecked(scores, losses)

    idx = _pick_temperature(taus, values)
    t_star = taus[idx]
    scores_star = _softmax_scores_from_stats(
        base,
        s1[idx],
        s2x[idx] if want_entropy else None,
        s3[idx] if want_gini else None,
        d2 * rs[idx],
    )
    return TuneResult(
        spec=EstimatorSpec(base, TemperatureScale(t_star)),
        objective=objective,
        tuning_aurc=_aurc_unchecked(scores_star, losses),
        msp_tuning_aurc=_aurc_unchecked(_base_scores(BaseEstimator.MSP, z), losses),
        candidates_evaluated=len(taus),
        edge_hit=idx in (0, len(taus) - 1),
    )


def _pnorm_tau_grid(p: int, num_classes: int, taus) -> tuple[float, ...]:
    """The tau grid for one p.

    For p = 0 on fully nonzero logits, dividing by tau * (nonzero count)
    equals temperature scaling with t = tau * C, so the grid is extended
    with every t / C. The tuned p-norm estimator is then never worse on the
    tuning set than tuned temperature scaling, since it searches a superset
    of the equivalent candidates.
    """
    if p != 0:
        return taus
    extended = np.union1d(np.asarray(taus), np.asarray(taus) / num_classes)
    return tuple(extended)


def tune_pnorm(
    base: BaseEstimator,
    logits,
    labels,
    grids: Optional[GridSpec] = None,
    jobs: int = 1,
) -> TuneResult:
    """Jointly tune (p, tau) for one base score, minimizing AURC.

    tau is optimized per p and the best p wins; ties prefer tau nearest 1
    and then the smaller p. For max-logit and logits-margin, tau does not
    affect the ranking, so only the p grid is searched (one candidate per
    p, tau pinned to 1). Rows with zero norm are excluded from tuning and
    counted in the result.
    """
    grids = grids or GridSpec()
    z, y, losses = _tuning_inputs(logits, labels)
    n, c = z.shape
    _, d, d2 = _shift_stats(z)

    best = None  # (aurc, p, tau, candidates_for_p, edge_hit, excluded)
    candidates = 0
    excluded_max = 0
    for p in grids.p_values:
        inv, bad = _pnorm_inv_scale(z, p)
        kept = ~bad
        n_excluded = int(bad.sum())
        excluded_max = max(excluded_max, n_excluded)
        if not kept.any():
            raise DegenerateInputError(f"all rows have zero {p}-norm")
        losses_p = losses[kept] if n_excluded else losses
        if base in LOGIT_FAMILY:
            raw = _base_scores(base, z)[kept] * inv[kept]
            value = _aurc_unchecked(raw, losses_p)
            candidates += 1
            key = (value, p, 1.0, False)
        else:
            dp = d[kept] * inv[kept, None] if n_excluded else d * inv[:, None]
            d2p = d2[kept] * inv[kept] if n_excluded else d2 * inv
            taus = _pnorm_tau_grid(p, c, grids.temperatures)
            rs = [1.0 / t for t in taus]
            aurcs = _family_aurc_sweep(dp, d2p, rs, losses_p, (base,), jobs)[:, 0]
            candidates += len(taus)
            idx = _pick_temperature(taus, aurcs)
            key = (aurcs[idx], p, taus[idx], idx in (0, len(taus) - 1))
        if best is None or key[0] < best[0]:  # p grid ascending: ties keep smaller p
            best = key

    value, p_star, tau_star, edge = best
    if excluded_max == 0:
        msp_aurc = _aurc_unchecked(_base_scores(BaseEstimator.MSP, z), losses)
    else:
        msp_aurc = _msp_aurc_on_kept(z, losses, grids.p_values)
    return TuneResult(
        spec=EstimatorSpec(base, PNorm(p_star, tau_star)),
        objective=Objective.AURC,
        tuning_aurc=value,
        msp_tuning_aurc=msp_aurc,
        candidates_evaluated=candidates,
        edge_hit=edge,
        excluded_rows=excluded_max,
    )


def _msp_aurc_on_kept(z, losses, p_values):
    # Degenerate rows cannot be scored by any p-norm spec; compare against
    # the MSP baseline on the widest kept subset so the fallback decision
    # stays apples to apples.
    bad_any = np.zeros(z.shape[0], dtype=bool)
    for p in p_values:
        _, bad = _pnorm_inv_scale(z, p)
        bad_any |= bad
    kept = ~bad_any
    return _aurc_unchecked(_base_scores(BaseEstimator.MSP, z)[kept], losses[kept])


def tune_composite(
    kind: str,
    logits,
    labels,
    grids: Optional[GridSpec] = None,
    jobs: int = 1,
) -> TuneResult:
    """Exhaustively tune a composite estimator (ets, bk or hts) on AURC.

    Parameter ties resolve lexicographically in grid order. For ETS the
    mixing temperature is fixed beforehand by an NLL temperature fit.
    """
    grids = grids or GridSpec()
    z, y, losses = _tuning_inputs(logits, labels)
    _, d, d2 = _shift_stats(z)
    msp_raw = _base_scores(BaseEstimator.MSP, z)
    msp_aurc = _aurc_unchecked(msp_raw, losses)
    n = losses.size
    denom = np.arange(1, n + 1)

    def batched_aurcs(score_matrix):
        orders = np.argsort(-score_matrix, axis=1, kind="stable")
        risks = np.cumsum(losses[orders], axis=1) / denom
        return risks.mean(axis=1)

    if kind == "ets":
        t_nll = tune_temperature(
            BaseEstimator.MSP, z, y, grids.temperatures, Objective.NLL, jobs
        ).spec.transform.t
        s1_cool, _, _ = _family_stats(d * (1.0 / t_nll), False, False)
        cool = 1.0 / s1_cool
        w1s, w2s = grids.ets_weights, grids.ets_weights
        best = None
        for i, w1 in enumerate(w1s):
            values = batched_aurcs(w1 * cool + np.multiply.outer(np.asarray(w2s), msp_raw))
            j = int(values.argmin())  # argmin keeps the first (smaller w2) on ties
            if best is None or values[j] < best[0]:
                best = (float(values[j]), w1, w2s[j], i, j)
        value, w1, w2, i, j = best
        spec = EtsEstimator(w1, w2, t_nll)
        edge = i in (0, len(w1s) - 1) or j in (0, len(w2s) - 1)
        n_cand = len(w1s) * len(w2s)
    elif kind == "bk":
        s1_raw, _, _ = _family_stats(d, False, False)
        runner_up = 1.0 - np.exp(d2) / s1_raw  # 1 - second softmax probability
        aas, bbs = grids.bk_weights, grids.bk_weights
        best = None
        for i, a in enumerate(aas):
            values = batched_aurcs(a * msp_raw + np.multiply.outer(np.asarray(bbs), runner_up))
            j = int(values.argmin())
            if best is None or values[j] < best[0]:
                best = (float(values[j]), a, bbs[j], i, j)
        value, a, b, i, j = best
        spec = BkEstimator(a, b)
        edge = i in (0, len(aas) - 1) or j in (0, len(bbs) - 1)
        n_cand = len(aas) * len(bbs)
    elif kind == "hts":
        s1, s2x, _ = _family_stats(d, True, False)
        neg_ent = s2x / s1 - np.log(s1)
        log_hbar = np.log(np.maximum(-neg_ent / z.shape[1], 1e-300))
        bs, ws = grids.hts_b, grids.hts_w
        results = np.empty((len(bs), len(ws)))

        def hts_row(i):
            b = bs[i]
            for j, w in enumerate(ws):
                t_h = np.maximum(np.logaddexp(0.0, b + w * log_hbar), HTS_MIN_TEMPERATURE)
                s1_scaled, _, _ = _family_stats(d * (1.0 / t_h)[:, None], False, False)
                results[i, j] = _aurc_unchecked(1.0 / s1_scaled, losses)

        if jobs <= 1:
            for i in range(len(bs)):
                hts_row(i)
        else:
            with ThreadPoolExecutor(max_workers=jobs) as pool:
                list(pool.map(hts_row, range(len(bs))))
        flat = int(results.argmin())  # row-major: lexicographic (b, w) tie rule
        i, j = divmod(flat, len(ws))
        value = float(results[i, j])
        spec = HtsEstimator(bs[i], ws[j])
        edge = i in (0, len(bs) - 1) or j in (0, len(ws) - 1)
        n_cand = len(bs) * len(ws)
    else:
        raise ParameterError(f"unknown composite estimator kind: {kind!r}")

    return TuneResult(
        spec=spec,
        objective=Objective.AURC,
        tuning_aurc=value,
        msp_tuning_aurc=msp_aurc,
        candidates_evaluated=n_cand,
        edge_hit=edge,
    )


def apply_fallback(result: TuneResult, epsilon_fallback: float = 0.0) -> TuneResult:
    """Revert to raw MSP unless the tuned estimator beats it by more than epsilon.

    Both sides of the comparison are tuning-set AURC values carried in the
    result. The returned result's spec is (MSP, raw) with the fallback flag
    set whenever msp_aurc - tuned_aurc <= epsilon_fallback.
    """
    if not (np.isfinite(epsilon_fallback) and epsilon_fallback >= 0):
        raise ParameterError(f"epsilon_fallback must be >= 0, got {epsilon_fallback}")
    if result.msp_tuning_aurc - result.tuning_aurc <= epsilon_fallback:
        return replace(
            result,
            spec=EstimatorSpec(BaseEstimator.MSP, Raw(), fallback_applied=True),
            tuning_aurc=result.msp_tuning_aurc,
            fallback_applied=True,
        )
    return result


# ---------------------------------------------------------------------------
# method descriptors
# ---------------------------------------------------------------------------

_COMPOSITE_KINDS = ("ets", "bk", "hts")


@dataclass(frozen=True)
class Method:
    """A tunable method: either base score + transform, or a composite kind."""

    name: str
    base: Optional[BaseEstimator] = None
    transform: str = ""  # "raw" | "ts" | "pnorm"
    objective: Optional[Objective] = None
    composite: Optional[str] = None


def parse_method(method_id: str) -> Method:
    """Parse a method id like "msp-ts-aurc", "max-logit-pnorm", "neg-gini-raw" or "bk"."""
    s = method_id.strip().lower()
    if s in _COMPOSITE_KINDS:
        return Method(name=s, composite=s)
    for base in BaseEstimator:
        prefix = base.value + "-"
        if not s.startswith(prefix):
            continue
        rest = s[len(prefix) :]
        if rest == "raw":
            return Method(name=s, base=base, transform="raw")
        if rest == "pnorm":
            return Method(name=s, base=base, transform="pnorm", objective=Objective.AURC)
        if rest in ("ts-nll", "ts-aurc"):
            if base in LOGIT_FAMILY:
                raise ParameterError(
                    f"temperature scaling does not affect the {base.value} ranking"
                )
            return Method(
                name=s, base=base, transform="ts", objective=Objective(rest.split("-")[1])
            )
        raise ParameterError(f"unknown transform in method id: {method_id!r}")
    raise ParameterError(f"unknown method id: {method_id!r}")


def method_ids() -> list[str]:
    """All valid method ids: base-transform combinations plus composites."""
    out = []
    for base in BaseEstimator:
        out.append(f"{base.value}-raw")
        if base not in LOGIT_FAMILY:
            out.append(f"{base.value}-ts-nll")
            out.append(f"{base.value}-ts-aurc")
        out.append(f"{base.value}-pnorm")
    return out + list(_COMPOSITE_KINDS)


def tune_method(
    method: Method,
    logits,
    labels,
    grids: Optional[GridSpec] = None,
    jobs: int = 1,
) -> TuneResult:
    """Tune one method on a tuning set and return its result."""
    grids = grids or GridSpec()
    if method.composite:
        return tune_composite(method.composite, logits, labels, grids, jobs)
    if method.transform == "raw":
        z, _, losses = _tuning_inputs(logits, labels)
        spec = EstimatorSpec(method.base, Raw())
        return TuneResult(
            spec=spec,
            objective=Objective.AURC,
            tuning_aurc=_aurc_unchecked(_base_scores(method.base, z), losses),
            msp_tuning_aurc=_aurc_unchecked(_base_scores(BaseEstimator.MSP, z), losses),
            candidates_evaluated=1,
        )
    if method.transform == "ts":
        return tune_temperature(
            method.base, logits, labels, grids.temperatures, method.objective, jobs
        )
    if method.transform == "pnorm":
        return tune_pnorm(method.base, logits, labels, grids, jobs)
    raise ParameterError(f"method {method.name!r} has no tunable form")


# ---------------------------------------------------------------------------
# data-efficiency sweep
# ---------------------------------------------------------------------------


def data_efficiency_sweep(
    method: Method,
    tune_logits,
    tune_labels,
    test_logits,
    test_labels,
    sizes,
    repetitions: int,
    seed: int,
    grids: Optional[GridSpec] = None,
    jobs: int = 1,
) -> list[SweepPoint]:
    """Re-tune on random tuning subsets of each size; report test NAURC spread.

    Subsets are drawn without replacement with a counter-based generator
    keyed by (seed, size index, repetition), so reruns are bitwise
    identical. The test set stays fixed.
    """
    grids = grids or GridSpec()
    if repetitions < 1:
        raise ParameterError(f"repetitions must be >= 1, got {repetitions}")
    zt = as_logit_matrix(tune_logits)
    yt = as_label_vector(tune_labels, zt.shape[1])
    ze = as_logit_matrix(test_logits)
    ye = as_label_vector(test_labels, ze.shape[1])
    test_losses = zero_one_loss(argmax_predict(ze), ye)
    n_tune = zt.shape[0]
    sizes = [int(s) for s in sizes]
    for s in sizes:
        if not 0 < s <= n_tune:
            raise ParameterError(f"subset size {s} not in 1..{n_tune}")

    points = []
    for si, size in enumerate(sizes):
        values = []
        for rep in range(repetitions):
            key = np.array([seed & 0xFFFFFFFFFFFFFFFF, (si << 32) | rep], dtype=np.uint64)
            rng = np.random.Generator(np.random.Philox(key=key))
            idx = np.sort(rng.choice(n_tune, size=size, replace=False))
            result = tune_method(method, zt[idx], yt[idx], grids, jobs)
            conf = _spec_scores(result.spec, ze)
            values.append(naurc(conf, test_losses))
        arr = np.asarray(values)
        points.append(
            SweepPoint(size, float(arr.mean()), float(arr.std()), tuple(values))
        )
    return points


def _spec_scores(spec, logits) -> np.ndarray:
    return spec.scores(logits)

"""Dataset persistence, reproducible splits, synthetic data, serialization.

Datasets travel as CSV (one row per sample: C logit columns then an integer
label; an optional single header line) or as a compact binary format with a
16-byte header (magic "SCLG", version, N, C, little-endian) followed by
float32 logits and uint32 labels. Binary logits are float32; the CSV writer
emits the float32-widened values with 17 significant digits, so loading
either encoding of the same dataset yields bitwise-identical float64
matrices.

Splits use a counter-based generator (Philox) keyed by (seed, repetition),
which makes them reproducible across platforms and numpy builds that share
the generator implementation.

Tuned estimators, tuning results, metric reports, risk-coverage curves and
benchmark reports serialize to a line-oriented human-readable text format;
floats are printed with 17 significant digits so every round-trip is exact.
"""

from __future__ import annotations

import json
import struct
from dataclasses import dataclass, field

import numpy as np

from .core import (
    ParameterError,
    ParseError,
    as_label_vector,
    as_logit_matrix,
    softmax,
)
from .estimators import (
    BaseEstimator,
    BkEstimator,
    EstimatorSpec,
    EtsEstimator,
    HtsEstimator,
    PNorm,
    Raw,
    TemperatureScale,
    msp,
)
from .metrics import FLOAT_FMT, MetricReport, RCCurve
from .tuning import GridSpec, Method, Objective, TuneResult, parse_method

__all__ = [
    "SplitSpec",
    "SyntheticModelSpec",
    "RunConfig",
    "BenchmarkReport",
    "MethodCell",
    "SplitRecord",
    "ApgRow",
    "save_dataset",
    "load_dataset",
    "split",
    "generate_synthetic",
    "save_spec",
    "load_spec",
    "save_report",
    "load_report",
    "load_run_config",
    "hyper_label",
]

_MAGIC = b"SCLG"
_BINARY_VERSION = 1
_MASK64 = 0xFFFFFFFFFFFFFFFF


def _fmt(x: float) -> str:
    return format(float(x), FLOAT_FMT)


def _fmt_opt(x) -> str:
    return "undefined" if x is None else _fmt(x)


def _parse_float(token: str, where: str) -> float:
    try:
        return float(token)
    except ValueError:
        raise ParseError(f"{where}: expected a number, got {token!r}") from None


def _parse_opt(token: str, where: str):
    return None if token == "undefined" else _parse_float(token, where)


def _parse_bool(token: str, where: str) -> bool:
    if token not in ("true", "false"):
        raise ParseError(f"{where}: expected true/false, got {token!r}")
    return token == "true"


# ---------------------------------------------------------------------------
# datasets
# ---------------------------------------------------------------------------


def save_dataset(path, logits, labels, fmt: str | None = None) -> None:
    """Write a dataset as binary or CSV; format inferred from suffix if omitted."""
    z = as_logit_matrix(logits)
    y = as_label_vector(labels, z.shape[1])
    if y.size != z.shape[0]:
        raise ParameterError(
            f"labels ({y.size}) and logits ({z.shape[0]} rows) differ in length"
        )
    if fmt is None:
        fmt = "csv" if str(path).lower().endswith(".csv") else "binary"
    n, c = z.shape
    z32 = z.astype(np.float32)
    if fmt == "binary":
        with open(path, "wb") as fh:
            fh.write(struct.pack("<4sHHII", _MAGIC, _BINARY_VERSION, 0, n, c))
            fh.write(np.ascontiguousarray(z32, dtype="<f4").tobytes())
            fh.write(y.astype("<u4").tobytes())
    elif fmt == "csv":
        wide = z32.astype(np.float64)  # widen so text values match binary loads
        with open(path, "w") as fh:
            for i in range(n):
                fh.write(",".join(_fmt(v) for v in wide[i]))
                fh.write(f",{y[i]}\n")
    else:
        raise ParameterError(f"unknown dataset format: {fmt!r}")


def _load_binary(path, data: bytes):
    if len(data) < 16:
        raise ParseError(f"{path}: truncated header ({len(data)} bytes)")
    magic, version, _, n, c = struct.unpack_from("<4sHHII", data, 0)
    if magic != _MAGIC:
        raise ParseError(f"{path}: bad magic bytes {magic!r}")
    if version != _BINARY_VERSION:
        raise ParseError(f"{path}: unsupported version {version}")
    if n < 1:
        raise ParseError(f"{path}: declared N={n}, need at least 1 sample")
    if c < 2:
        raise ParseError(f"{path}: declared C={c}, need at least 2 classes")
    expected = 16 + 4 * n * c + 4 * n
    if len(data) != expected:
        raise ParseError(f"{path}: expected {expected} bytes, found {len(data)}")
    z = np.frombuffer(data, dtype="<f4", count=n * c, offset=16)
    z = z.reshape(n, c).astype(np.float64)
    y = np.frombuffer(data, dtype="<u4", count=n, offset=16 + 4 * n * c)
    bad = np.flatnonzero(~np.isfinite(z).all(axis=1))
    if bad.size:
        raise ParseError(f"{path}: non-finite logit in row {bad[0]}")
    if (y >= c).any():
        i = int(np.flatnonzero(y >= c)[0])
        raise ParseError(f"{path}: label {y[i]} out of range [0, {c}) in row {i}")
    return z, y.astype(np.int64)


def _load_csv(path, text: str):
    rows, labels = [], []
    c = None
    for lineno, line in enumerate(text.splitlines(), start=1):
        s = line.strip()
        if not s:
            continue
        toks = s.split(",")
        if c is None:
            try:
                [float(t) for t in toks]
            except ValueError:
                if lineno == 1:
                    continue  # single optional header line
                raise ParseError(f"{path}:{lineno}: non-numeric field") from None
            if len(toks) < 3:
                raise ParseError(
                    f"{path}:{lineno}: need at least 2 logit columns and a label"
                )
            c = len(toks) - 1
        if len(toks) != c + 1:
            raise ParseError(
                f"{path}:{lineno}: expected {c + 1} fields, found {len(toks)}"
            )
        try:
            vals = [float(t) for t in toks[:-1]]
        except ValueError:
            raise ParseError(f"{path}:{lineno}: non-numeric logit field") from None
        if not all(np.isfinite(vals)):
            raise ParseError(f"{path}:{lineno}: non-finite logit")
        try:
            label = int(toks[-1])
        except ValueError:
            raise ParseError(f"{path}:{lineno}: label must be an integer") from None
        if not 0 <= label < c:
            raise ParseError(f"{path}:{lineno}: label {label} out of range [0, {c})")
        rows.append(vals)
        labels.append(label)
    if not rows:
        raise ParseError(f"{path}: no data rows")
    return np.asarray(rows, dtype=np.float64), np.asarray(labels, dtype=np.int64)


def load_dataset(path):
    """Load a dataset file, sniffing binary versus CSV from the magic bytes."""
    with open(path, "rb") as fh:
        data = fh.read()
    if data[:4] == _MAGIC:
        return _load_binary(path, data)
    try:
        text = data.decode("utf-8")
    except UnicodeDecodeError as exc:
        raise ParseError(f"{path}: not a dataset file ({exc})") from None
    return _load_csv(path, text)


# ---------------------------------------------------------------------------
# splits
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class SplitSpec:
    """Tuning/test split sizes and seeding for repeated evaluation."""

    tuning_size: int
    seed: int = 0
    repetitions: int = 1

    def __post_init__(self):
        if self.tuning_size < 1:
            raise ParameterError(f"tuning_size must be >= 1, got {self.tuning_size}")
        if self.repetitions < 1:
            raise ParameterError(f"repetitions must be >= 1, got {self.repetitions}")


def split(n: int, spec: SplitSpec, repetition_index: int = 0):
    """Disjoint, exhaustive (tuning, test) index arrays for one repetition.

    Derived from a Philox stream keyed by (seed, repetition), so identical
    inputs give identical splits on every platform.
    """
    if not 0 <= repetition_index < spec.repetitions:
        raise ParameterError(
            f"repetition index {repetition_index} not in [0, {spec.repetitions})"
        )
    if spec.tuning_size >= n:
        raise ParameterError(
            f"tuning_size {spec.tuning_size} must be smaller than the dataset ({n})"
        )
    key = np.array([spec.seed & _MASK64, repetition_index], dtype=np.uint64)
    rng = np.random.Generator(np.random.Philox(key=key))
    perm = rng.permutation(n)
    return np.sort(perm[: spec.tuning_size]), np.sort(perm[spec.tuning_size :])


# ---------------------------------------------------------------------------
# synthetic data
# ---------------------------------------------------------------------------

_SYNTH_MODES = ("none", "norm-inflation", "underconfidence")


@dataclass(frozen=True)
class SyntheticModelSpec:
    """Desk-scale stand-in for a pretrained model's logits.

    Latent rows are unit gaussian noise plus one boosted coordinate whose
    margin varies per sample (the difficulty signal), globally scaled so
    the mean maximum softmax probability hits the accuracy target. Labels
    are sampled from the latent softmax, so the clean data is calibrated at
    temperature 1. Distortions then emulate common pathologies:
    "norm-inflation" multiplies each row by a log-normal factor (score
    magnitudes vary independently of difficulty, which breaks raw
    logit-based scores until the norm is divided out) and
    "underconfidence" divides all logits by a constant > 1.
    """

    n: int
    c: int
    accuracy: float = 0.8
    mode: str = "none"
    norm_log_mean: float = 0.0
    norm_log_sigma: float = 1.0
    underconfidence_divisor: float = 5.0
    seed: int = 0

    def __post_init__(self):
        if self.n < 1:
            raise ParameterError(f"n must be >= 1, got {self.n}")
        if self.c < 2:
            raise ParameterError(f"c must be >= 2, got {self.c}")
        if not 1.0 / self.c < self.accuracy < 1.0:
            raise ParameterError(
                f"accuracy target must lie in (1/C, 1), got {self.accuracy}"
            )
        if self.mode not in _SYNTH_MODES:
            raise ParameterError(f"mode must be one of {_SYNTH_MODES}, got {self.mode!r}")
        if self.norm_log_sigma < 0:
            raise ParameterError("norm_log_sigma must be >= 0")
        if self.underconfidence_divisor <= 1:
            raise ParameterError("underconfidence_divisor must be > 1")


def generate_synthetic(spec: SyntheticModelSpec):
    """Generate (logits, labels) according to a synthetic model spec."""
    key = np.array([spec.seed & _MASK64, 0], dtype=np.uint64)
    rng = np.random.Generator(np.random.Philox(key=key))
    g = rng.standard_normal((spec.n, spec.c))
    dominant = rng.integers(0, spec.c, spec.n)
    margin = 3.0 * (1.0 + np.abs(rng.standard_normal(spec.n)))
    g[np.arange(spec.n), dominant] += margin

    def mean_msp(scale):
        return float(np.mean(msp(scale * g)))

    lo, hi = 0.0, 1.0
    while mean_msp(hi) < spec.accuracy and hi < 1e6:
        hi *= 2.0
    for _ in range(60):
        mid = 0.5 * (lo + hi)
        if mean_msp(mid) < spec.accuracy:
            lo = mid
        else:
            hi = mid
    latent = (0.5 * (lo + hi)) * g

    cum = np.cumsum(softmax(latent), axis=1)
    u = rng.random(spec.n)
    labels = np.minimum((cum < u[:, None]).sum(axis=1), spec.c - 1).astype(np.int64)

    if spec.mode == "norm-inflation":
        factors = rng.lognormal(spec.norm_log_mean, spec.norm_log_sigma, spec.n)
        logits = latent * factors[:, None]
    elif spec.mode == "underconfidence":
        logits = latent / spec.underconfidence_divisor
    else:
        logits = latent
    return logits, labels


# ---------------------------------------------------------------------------
# estimator / tune-result serialization
# ---------------------------------------------------------------------------


def hyper_label(spec) -> str:
    """Compact single-token summary of a tuned spec, "F" after fallback."""
    if isinstance(spec, EstimatorSpec):
        if spec.fallback_applied:
            return "F"
        tr = spec.transform
        if isinstance(tr, Raw):
            return "raw"
        if isinstance(tr, TemperatureScale):
            return f"T={tr.t:g}"
        return f"p={tr.p},tau={tr.tau:g}"
    if isinstance(spec, EtsEstimator):
        return f"ets:w1={spec.w1:g},w2={spec.w2:g},T={spec.t:g}"
    if isinstance(spec, BkEstimator):
        return f"bk:a={spec.a:g},b={spec.b:g}"
    if isinstance(spec, HtsEstimator):
        return f"hts:b={spec.b:g},w={spec.w:g}"
    raise ParameterError(f"not an estimator spec: {spec!r}")


def _estimator_lines(spec) -> list[str]:
    out = ["begin estimator"]
    if isinstance(spec, EstimatorSpec):
        out += ["kind base", f"base {spec.base.value}"]
        tr = spec.transform
        if isinstance(tr, Raw):
            out.append("transform raw")
        elif isinstance(tr, TemperatureScale):
            out += ["transform ts", f"t {_fmt(tr.t)}"]
        else:
            out += ["transform pnorm", f"p {tr.p}", f"tau {_fmt(tr.tau)}"]
        out.append(f"fallback {'true' if spec.fallback_applied else 'false'}")
    elif isinstance(spec, EtsEstimator):
        out += ["kind ets", f"w1 {_fmt(spec.w1)}", f"w2 {_fmt(spec.w2)}", f"t {_fmt(spec.t)}"]
    elif isinstance(spec, BkEstimator):
        out += ["kind bk", f"a {_fmt(spec.a)}", f"b {_fmt(spec.b)}"]
    elif isinstance(spec, HtsEstimator):
        out += ["kind hts", f"b {_fmt(spec.b)}", f"w {_fmt(spec.w)}"]
    else:
        raise ParameterError(f"not an estimator spec: {spec!r}")
    out.append("end estimator")
    return out


class _Reader:
    def __init__(self, lines: list[str], where: str):
        self.lines = lines
        self.pos = 0
        self.where = where

    def context(self) -> str:
        return f"{self.where}:{self.pos}"

    def peek(self) -> str | None:
        while self.pos < len(self.lines):
            s = self.lines[self.pos].strip()
            if s and not s.startswith("#"):
                return s
            self.pos += 1
        return None

    def next(self) -> str:
        s = self.peek()
        if s is None:
            raise ParseError(f"{self.where}: unexpected end of file")
        self.pos += 1
        return s

    def expect(self, literal: str) -> None:
        s = self.next()
        if s != literal:
            raise ParseError(f"{self.context()}: expected {literal!r}, got {s!r}")

    def fields(self) -> dict[str, str]:
        """Read key/value lines until the next `end` line (not consumed)."""
        out = {}
        while True:
            s = self.peek()
            if s is None or s.startswith("end ") or s.startswith("begin "):
                return out
            self.pos += 1
            key, _, value = s.partition(" ")
            out[key] = value


def _read_estimator(r: _Reader):
    r.expect("begin estimator")
    f = r.fields()
    r.expect("end estimator")
    kind = f.get("kind")
    where = r.context()
    if kind == "base":
        try:
            base = BaseEstimator(f["base"])
        except (KeyError, ValueError):
            raise ParseError(f"{where}: bad or missing base estimator") from None
        tr_kind = f.get("transform")
        if tr_kind == "raw":
            transform = Raw()
        elif tr_kind == "ts":
            transform = TemperatureScale(_parse_float(f.get("t", ""), where))
        elif tr_kind == "pnorm":
            try:
                p = int(f["p"])
            except (KeyError, ValueError):
                raise ParseError(f"{where}: bad or missing p") from None
            transform = PNorm(p, _parse_float(f.get("tau", ""), where))
        else:
            raise ParseError(f"{where}: unknown transform {tr_kind!r}")
        fallback = _parse_bool(f.get("fallback", "false"), where)
        return EstimatorSpec(base, transform, fallback_applied=fallback)
    if kind == "ets":
        return EtsEstimator(
            _parse_float(f.get("w1", ""), where),
            _parse_float(f.get("w2", ""), where),
            _parse_float(f.get("t", ""), where),
        )
    if kind == "bk":
        return BkEstimator(_parse_float(f.get("a", ""), where), _parse_float(f.get("b", ""), where))
    if kind == "hts":
        return HtsEstimator(_parse_float(f.get("b", ""), where), _parse_float(f.get("w", ""), where))
    raise ParseError(f"{where}: unknown estimator kind {kind!r}")


def _tune_result_lines(result: TuneResult) -> list[str]:
    return [
        "begin tune-result",
        f"objective {result.objective.value}",
        f"tuning-aurc {_fmt(result.tuning_aurc)}",
        f"msp-tuning-aurc {_fmt(result.msp_tuning_aurc)}",
        f"fallback-applied {'true' if result.fallback_applied else 'false'}",
        f"candidates {result.candidates_evaluated}",
        f"edge-hit {'true' if result.edge_hit else 'false'}",
        f"excluded-rows {result.excluded_rows}",
        *_estimator_lines(result.spec),
        "end tune-result",
    ]


def _read_tune_result(r: _Reader) -> TuneResult:
    r.expect("begin tune-result")
    f = r.fields()
    where = r.context()
    spec = _read_estimator(r)
    r.expect("end tune-result")
    try:
        objective = Objective(f.get("objective", ""))
    except ValueError:
        raise ParseError(f"{where}: bad objective") from None
    try:
        candidates = int(f.get("candidates", "0"))
        excluded = int(f.get("excluded-rows", "0"))
    except ValueError:
        raise ParseError(f"{where}: bad integer field") from None
    return TuneResult(
        spec=spec,
        objective=objective,
        tuning_aurc=_parse_float(f.get("tuning-aurc", ""), where),
        msp_tuning_aurc=_parse_float(f.get("msp-tuning-aurc", ""), where),
        fallback_applied=_parse_bool(f.get("fallback-applied", "false"), where),
        candidates_evaluated=candidates,
        edge_hit=_parse_bool(f.get("edge-hit", "false"), where),
        excluded_rows=excluded,
    )


def save_spec(obj, path) -> None:
    """Write a tuned estimator (optionally with its TuneResult) to a spec file."""
    lines = ["selclass-spec v1"]
    if isinstance(obj, TuneResult):
        lines += _tune_result_lines(obj)
    else:
        lines += _estimator_lines(obj)
    with open(path, "w") as fh:
        fh.write("\n".join(lines) + "\n")


def load_spec(path):
    """Load a spec file; returns a TuneResult or a bare estimator spec."""
    with open(path) as fh:
        r = _Reader(fh.read().splitlines(), str(path))
    r.expect("selclass-spec v1")
    head = r.peek()
    if head == "begin tune-result":
        return _read_tune_result(r)
    return _read_estimator(r)


# ---------------------------------------------------------------------------
# metric report / rc-curve serialization
# ---------------------------------------------------------------------------


def _metric_report_lines(rep: MetricReport) -> list[str]:
    out = [
        "begin metric-report",
        f"accuracy {_fmt(rep.accuracy)}",
        f"aurc {_fmt(rep.aurc)}",
        f"oracle-aurc {_fmt(rep.oracle_aurc)}",
        f"e-aurc {_fmt(rep.e_aurc)}",
        f"naurc {_fmt_opt(rep.naurc)}",
        f"auroc {_fmt_opt(rep.auroc)}",
    ]
    for target in sorted(rep.sac):
        out.append(f"sac {_fmt(target)} {_fmt(rep.sac[target])}")
    out.append("end metric-report")
    return out


def _read_metric_report(r: _Reader) -> MetricReport:
    r.expect("begin metric-report")
    where = r.context()
    fields: dict[str, str] = {}
    sac: dict[float, float] = {}
    while True:
        s = r.peek()
        if s is None:
            raise ParseError(f"{r.where}: unterminated metric-report")
        r.pos += 1
        if s == "end metric-report":
            break
        key, _, value = s.partition(" ")
        if key == "sac":
            toks = value.split()
            if len(toks) != 2:
                raise ParseError(f"{r.context()}: sac line needs target and coverage")
            sac[_parse_float(toks[0], where)] = _parse_float(toks[1], where)
        else:
            fields[key] = value
    try:
        return MetricReport(
            accuracy=_parse_float(fields["accuracy"], where),
            aurc=_parse_float(fields["aurc"], where),
            oracle_aurc=_parse_float(fields["oracle-aurc"], where),
            e_aurc=_parse_float(fields["e-aurc"], where),
            naurc=_parse_opt(fields["naurc"], where),
            auroc=_parse_opt(fields["auroc"], where),
            sac=sac,
        )
    except KeyError as exc:
        raise ParseError(f"{where}: missing metric field {exc}") from None


def _rc_curve_lines(curve: RCCurve) -> list[str]:
    out = ["begin rc-curve", f"points {curve.coverages.size}"]
    out += [
        f"{_fmt(c)} {_fmt(rk)}" for c, rk in zip(curve.coverages, curve.risks)
    ]
    out.append("end rc-curve")
    return out


def _read_rc_curve(r: _Reader) -> RCCurve:
    r.expect("begin rc-curve")
    head = r.next()
    if not head.startswith("points "):
        raise ParseError(f"{r.context()}: expected a points count")
    try:
        n = int(head.split()[1])
    except (IndexError, ValueError):
        raise ParseError(f"{r.context()}: bad points count") from None
    cov, risk = np.empty(n), np.empty(n)
    for i in range(n):
        toks = r.next().split()
        if len(toks) != 2:
            raise ParseError(f"{r.context()}: curve point needs two columns")
        cov[i] = _parse_float(toks[0], r.context())
        risk[i] = _parse_float(toks[1], r.context())
    r.expect("end rc-curve")
    return RCCurve(cov, risk)


# ---------------------------------------------------------------------------
# benchmark report
# ---------------------------------------------------------------------------


@dataclass
class SplitRecord:
    """One (model, method, split) evaluation on the test half."""

    split: int
    hyper: str
    fallback: bool
    report: MetricReport


@dataclass
class MethodCell:
    """All split evaluations of one method on one model, plus aggregates.

    aggregates maps fixed metric keys ("naurc-mean", "auroc-std", ...) to
    values; None marks a metric undefined on every split.
    """

    method: str
    splits: list[SplitRecord] = field(default_factory=list)
    aggregates: dict[str, float | None] = field(default_factory=dict)


@dataclass
class ApgRow:
    """Average positive gain of one method, per split and aggregated."""

    method: str
    values: tuple[float, ...]
    mean: float
    std: float


@dataclass
class BenchmarkReport:
    """Full benchmark outcome: models x methods x splits, plus APG."""

    models: tuple[str, ...]
    methods: tuple[str, ...]
    repetitions: int
    tuning_size: int
    seed: int
    apg_epsilon: float
    fallback_epsilon: float | None
    sac_targets: tuple[float, ...]
    cells: dict[tuple[str, str], MethodCell]
    apg: list[ApgRow]


def _kv(token: str, where: str) -> tuple[str, str]:
    key, sep, value = token.partition("=")
    if not sep:
        raise ParseError(f"{where}: expected key=value, got {token!r}")
    return key, value


def _benchmark_lines(rep: BenchmarkReport) -> list[str]:
    out = [
        "begin benchmark",
        f"models {','.join(rep.models)}",
        f"methods {','.join(rep.methods)}",
        f"repetitions {rep.repetitions}",
        f"tuning-size {rep.tuning_size}",
        f"seed {rep.seed}",
        f"apg-epsilon {_fmt(rep.apg_epsilon)}",
        "fallback-epsilon "
        + ("none" if rep.fallback_epsilon is None else _fmt(rep.fallback_epsilon)),
        f"sac-targets {','.join(_fmt(t) for t in rep.sac_targets)}",
    ]
    for model in rep.models:
        for method in rep.methods:
            cell = rep.cells[(model, method)]
            for rec in cell.splits:
                m = rec.report
                toks = [
                    f"row model={model}",
                    f"method={method}",
                    f"split={rec.split}",
                    f"hyper={rec.hyper}",
                    f"fallback={'true' if rec.fallback else 'false'}",
                    f"accuracy={_fmt(m.accuracy)}",
                    f"aurc={_fmt(m.aurc)}",
                    f"oracle-aurc={_fmt(m.oracle_aurc)}",
                    f"e-aurc={_fmt(m.e_aurc)}",
                    f"naurc={_fmt_opt(m.naurc)}",
                    f"auroc={_fmt_opt(m.auroc)}",
                ]
                toks += [
                    f"sac:{_fmt(t)}={_fmt(m.sac[t])}" for t in sorted(m.sac)
                ]
                out.append(" ".join(toks))
            toks = [f"agg model={model}", f"method={method}"]
            toks += [
                f"{key}={_fmt_opt(value)}" for key, value in cell.aggregates.items()
            ]
            out.append(" ".join(toks))
    for row in rep.apg:
        for i, v in enumerate(row.values):
            out.append(f"apg-split method={row.method} split={i} value={_fmt(v)}")
        out.append(f"apg method={row.method} mean={_fmt(row.mean)} std={_fmt(row.std)}")
    out.append("end benchmark")
    return out


def _read_benchmark(r: _Reader) -> BenchmarkReport:
    r.expect("begin benchmark")
    where = r.where
    header: dict[str, str] = {}
    rows, aggs, apg_splits, apg_rows = [], [], {}, []
    while True:
        s = r.peek()
        if s is None:
            raise ParseError(f"{where}: unterminated benchmark block")
        r.pos += 1
        if s == "end benchmark":
            break
        key, _, rest = s.partition(" ")
        if key in ("row", "agg", "apg-split", "apg"):
            pairs = dict(_kv(t, r.context()) for t in rest.split())
            if key == "row":
                rows.append(pairs)
            elif key == "agg":
                aggs.append(pairs)
            elif key == "apg-split":
                apg_splits.setdefault(pairs["method"], []).append(
                    (int(pairs["split"]), _parse_float(pairs["value"], r.context()))
                )
            else:
                apg_rows.append(pairs)
        else:
            header[key] = rest

    def head(key):
        if key not in header:
            raise ParseError(f"{where}: missing benchmark header {key!r}")
        return header[key]

    models = tuple(head("models").split(","))
    methods = tuple(head("methods").split(","))
    sac_targets = tuple(
        _parse_float(t, where) for t in head("sac-targets").split(",") if t
    )
    fb = head("fallback-epsilon")
    cells = {
        (model, method): MethodCell(method=method)
        for model in models
        for method in methods
    }
    for pairs in rows:
        m_sac = {}
        for k, v in pairs.items():
            if k.startswith("sac:"):
                m_sac[_parse_float(k[4:], where)] = _parse_float(v, where)
        rec = SplitRecord(
            split=int(pairs["split"]),
            hyper=pairs["hyper"],
            fallback=_parse_bool(pairs["fallback"], where),
            report=MetricReport(
                accuracy=_parse_float(pairs["accuracy"], where),
                aurc=_parse_float(pairs["aurc"], where),
                oracle_aurc=_parse_float(pairs["oracle-aurc"], where),
                e_aurc=_parse_float(pairs["e-aurc"], where),
                naurc=_parse_opt(pairs["naurc"], where),
                auroc=_parse_opt(pairs["auroc"], where),
                sac=m_sac,
            ),
        )
        cells[(pairs["model"], pairs["method"])].splits.append(rec)
    for pairs in aggs:
        cell = cells[(pairs["model"], pairs["method"])]
        cell.aggregates = {
            k: _parse_opt(v, where)
            for k, v in pairs.items()
            if k not in ("model", "method")
        }
    apg = [
        ApgRow(
            method=pairs["method"],
            values=tuple(v for _, v in sorted(apg_splits.get(pairs["method"], []))),
            mean=_parse_float(pairs["mean"], where),
            std=_parse_float(pairs["std"], where),
        )
        for pairs in apg_rows
    ]
    return BenchmarkReport(
        models=models,
        methods=methods,
        repetitions=int(head("repetitions")),
        tuning_size=int(head("tuning-size")),
        seed=int(head("seed")),
        apg_epsilon=_parse_float(head("apg-epsilon"), where),
        fallback_epsilon=None if fb == "none" else _parse_float(fb, where),
        sac_targets=sac_targets,
        cells=cells,
        apg=apg,
    )


# ---------------------------------------------------------------------------
# top-level report save/load
# ---------------------------------------------------------------------------

_REPORT_HEADER = "selclass-report v1"


def save_report(obj, path, trailer: str = "") -> None:
    """Serialize a MetricReport, RCCurve, TuneResult or BenchmarkReport.

    trailer, if given, is appended as comment lines (human-readable tables);
    it is ignored when loading.
    """
    if isinstance(obj, MetricReport):
        lines = _metric_report_lines(obj)
    elif isinstance(obj, RCCurve):
        lines = _rc_curve_lines(obj)
    elif isinstance(obj, TuneResult):
        lines = _tune_result_lines(obj)
    elif isinstance(obj, BenchmarkReport):
        lines = _benchmark_lines(obj)
    else:
        raise ParameterError(f"cannot serialize {type(obj).__name__} as a report")
    text = _REPORT_HEADER + "\n" + "\n".join(lines) + "\n"
    if trailer:
        text += "".join(f"# {line}\n" for line in trailer.splitlines())
    with open(path, "w") as fh:
        fh.write(text)


def load_report(path):
    """Load whatever report object a file contains."""
    with open(path) as fh:
        r = _Reader(fh.read().splitlines(), str(path))
    r.expect(_REPORT_HEADER)
    head = r.peek()
    if head == "begin metric-report":
        return _read_metric_report(r)
    if head == "begin rc-curve":
        return _read_rc_curve(r)
    if head == "begin tune-result":
        return _read_tune_result(r)
    if head == "begin benchmark":
        return _read_benchmark(r)
    raise ParseError(f"{r.context()}: unknown report block {head!r}")


# ---------------------------------------------------------------------------
# run configuration
# ---------------------------------------------------------------------------


def _default_methods() -> tuple[str, ...]:
    out = []
    for base in BaseEstimator:
        out.append(f"{base.value}-raw")
    for base in BaseEstimator:
        if base not in (BaseEstimator.MAX_LOGIT, BaseEstimator.LOGITS_MARGIN):
            out.append(f"{base.value}-ts-nll")
            out.append(f"{base.value}-ts-aurc")
    for base in BaseEstimator:
        out.append(f"{base.value}-pnorm")
    return tuple(out)


@dataclass(frozen=True)
class RunConfig:
    """Everything a benchmark run needs besides the dataset files."""

    methods: tuple[str, ...] = field(default_factory=_default_methods)
    grids: GridSpec = field(default_factory=GridSpec)
    tuning_size: int = 5000
    seed: int = 0
    repetitions: int = 10
    apg_epsilon: float = 0.01
    fallback_epsilon: float | None = 0.0
    sac_targets: tuple[float, ...] = (0.98,)

    def __post_init__(self):
        if not self.methods:
            raise ParameterError("benchmark needs at least one method")
        for m in self.methods:
            parse_method(m)  # validates
        if self.repetitions < 1:
            raise ParameterError(f"repetitions must be >= 1, got {self.repetitions}")
        if self.tuning_size < 1:
            raise ParameterError(f"tuning_size must be >= 1, got {self.tuning_size}")
        if not (np.isfinite(self.apg_epsilon) and self.apg_epsilon >= 0):
            raise ParameterError("apg_epsilon must be >= 0")
        if self.fallback_epsilon is not None and not (
            np.isfinite(self.fallback_epsilon) and self.fallback_epsilon >= 0
        ):
            raise ParameterError("fallback_epsilon must be >= 0 or null")
        for t in self.sac_targets:
            if not 0 < t <= 1:
                raise ParameterError(f"sac target {t} not in (0, 1]")

    def parsed_methods(self) -> list[Method]:
        return [parse_method(m) for m in self.methods]


def _grid_from_json(value, name) -> tuple[float, ...]:
    if isinstance(value, dict):
        try:
            start, stop, step = value["start"], value["stop"], value["step"]
        except KeyError:
            raise ParseError(f"config grid {name!r} needs start/stop/step") from None
        count = int(round((stop - start) / step)) + 1
        return tuple(np.round(start + step * np.arange(count), 10))
    if isinstance(value, list):
        return tuple(value)
    raise ParseError(f"config grid {name!r} must be a list or start/stop/step object")


def load_run_config(path) -> RunConfig:
    """Parse a JSON benchmark configuration file."""
    with open(path) as fh:
        try:
            raw = json.load(fh)
        except json.JSONDecodeError as exc:
            raise ParseError(f"{path}: invalid JSON ({exc})") from None
    if not isinstance(raw, dict):
        raise ParseError(f"{path}: config must be a JSON object")
    known = {
        "methods",
        "tuning_size",
        "seed",
        "repetitions",
        "apg_epsilon",
        "fallback_epsilon",
        "sac_targets",
        "temperatures",
        "p_values",
        "ets_weights",
        "bk_weights",
        "hts_b",
        "hts_w",
    }
    unknown = set(raw) - known
    if unknown:
        raise ParseError(f"{path}: unknown config keys {sorted(unknown)}")
    grid_kwargs = {}
    for name in ("temperatures", "ets_weights", "bk_weights", "hts_b", "hts_w"):
        if name in raw:
            grid_kwargs[name] = _grid_from_json(raw[name], name)
    if "p_values" in raw:
        grid_kwargs["p_values"] = tuple(int(p) for p in raw["p_values"])
    kwargs = {}
    if "methods" in raw:
        kwargs["methods"] = tuple(raw["methods"])
    for key in ("tuning_size", "seed", "repetitions"):
        if key in raw:
            kwargs[key] = int(raw[key])
    if "apg_epsilon" in raw:
        kwargs["apg_epsilon"] = float(raw["apg_epsilon"])
    if "fallback_epsilon" in raw:
        fb = raw["fallback_epsilon"]
        kwargs["fallback_epsilon"] = None if fb is None else float(fb)
    if "sac_targets" in raw:
        kwargs["sac_targets"] = tuple(float(t) for t in raw["sac_targets"])
    try:
        return RunConfig(grids=GridSpec(**grid_kwargs), **kwargs)
    except ParameterError as exc:
        raise ParseError(f"{path}: {exc}") from None

"""Post-hoc selective classification toolkit.

Given any classifier's logits and labels, tune and evaluate confidence
estimators (temperature scaling, p-norm logit normalization, composite
scores) and report risk-coverage metrics with repeated-split statistics.
"""

from .core import (
    DegenerateInputError,
    DimensionError,
    ParameterError,
    ParseError,
    SelclassError,
    UndefinedMetricError,
    argmax_predict,
    softmax,
    zero_one_loss,
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
    apply_estimator,
    bk_score,
    ets_score,
    hts_score,
    logits_margin,
    max_logit,
    msp,
    negative_entropy,
    negative_gini,
    pnorm,
    pnorm_normalize,
    softmax_margin,
    temperature_scale,
)
from .io import (
    BenchmarkReport,
    RunConfig,
    SplitSpec,
    SyntheticModelSpec,
    generate_synthetic,
    load_dataset,
    load_report,
    load_run_config,
    load_spec,
    save_dataset,
    save_report,
    save_spec,
    split,
)
from .metrics import (
    MetricReport,
    RCCurve,
    apg,
    aurc,
    auroc,
    compute_report,
    count_tie_groups,
    e_aurc,
    naurc,
    oracle_aurc,
    rank_order,
    rc_curve,
    sac,
)
from .tuning import (
    GridSpec,
    Method,
    Objective,
    SweepPoint,
    TuneResult,
    apply_fallback,
    data_efficiency_sweep,
    method_ids,
    nll,
    parse_method,
    tune_composite,
    tune_method,
    tune_pnorm,
    tune_temperature,
)

__version__ = "0.1.0"

"""Discrimination and calibration metrics for survival predictions.

Higher risk score means higher risk of an early event, for every metric in
this module.

Each metric returns a :class:`MetricResult` that knows how to recompute itself
on bootstrap resamples of the subjects. That is what backs the percentile
confidence intervals of AUC and Brier score and the paired comparison of two
models evaluated on the same subjects. The concordance index additionally
carries an analytic (U-statistic) standard error.
"""

from __future__ import annotations

import enum
from dataclasses import dataclass, field
from functools import cached_property
from statistics import NormalDist
from typing import Callable

import numpy as np

from .data import SubjectWeights, as_arrays, check_risk_scores, check_survival_probabilities
from .errors import (
    DegenerateCensoring,
    MissingVariance,
    NoCases,
    NoComparablePairs,
    NoControls,
    NumericError,
    ShapeMismatch,
    TooFewTimes,
    UnpairedInputs,
    ZeroVariance,
)
from .km import StepFunction, censoring_distribution, ipcw_weights

_NORMAL = NormalDist()

DEFAULT_B = 1000
REPORT_FIELDS = (
    "metric", "estimate", "se", "ci", "alpha", "p_value", "alternative",
    "times", "per_time", "weighting", "B", "seed",
)
# Value of each metric for an uninformative predictor.
RANDOM_PREDICTOR = {"auc": 0.5, "cindex": 0.5, "brier": 0.25}


class Alternative(str, enum.Enum):
    TWO_SIDED = "two_sided"
    GREATER = "greater"
    LESS = "less"


@dataclass(eq=False)
class MetricResult:
    metric: str
    estimate: float
    per_time: np.ndarray = field(default_factory=lambda: np.empty(0))
    times: np.ndarray = field(default_factory=lambda: np.empty(0))
    standard_error: float | None = None
    weighting: str = "uniform"
    B: int = DEFAULT_B
    seed: int = 0
    metadata: dict = field(default_factory=dict)
    # Recomputes the estimate on resampled subject indices (nan if undefined there).
    resample: Callable[[np.ndarray], float] | None = field(default=None, repr=False)
    # (event, time) of the evaluated subjects; used to check pairing in compare.
    subjects: tuple | None = field(default=None, repr=False)

    def __post_init__(self):
        self.per_time = np.asarray(self.per_time, dtype=np.float64)
        self.times = np.asarray(self.times, dtype=np.float64)
        if self.standard_error is not None and self.standard_error < 0:
            raise ValueError("standard error must be >= 0")

    @property
    def n(self) -> int | None:
        return None if self.subjects is None else len(self.subjects[1])

    @cached_property
    def replicates(self) -> np.ndarray:
        """Bootstrap replicates of the estimate; resamples where it is undefined are dropped."""
        if self.resample is None or self.n is None:
            raise MissingVariance(f"{self.metric}: no bootstrap machinery attached")
        reps = np.array([self.resample(idx) for idx in bootstrap_indices(self.n, self.B, self.seed)])
        kept = reps[np.isfinite(reps)]
        self.metadata["bootstrap_dropped"] = int(reps.size - kept.size)
        if kept.size < 2:
            raise MissingVariance(f"{self.metric}: fewer than 2 usable bootstrap replicates")
        return kept

    @property
    def se(self) -> float:
        """Analytic standard error when available, else the bootstrap standard deviation."""
        if self.standard_error is not None:
            return float(self.standard_error)
        return float(np.std(self.replicates, ddof=1))

    def confidence_interval(self, alpha: float = 0.05, method: str | None = None):
        return confidence_interval(self, alpha, method)

    def p_value(self, alternative="two_sided", null: float | None = None) -> float:
        return p_value(self, alternative, null)

    def compare(self, other: "MetricResult", alternative="greater") -> float:
        return compare(self, other, alternative)

    def integral(self) -> float:
        return brier_integral(self)

    def report(self, alpha: float = 0.05, alternative=None, null: float | None = None,
               method: str | None = None) -> dict:
        """JSON-ready summary with exactly the fields in ``REPORT_FIELDS``.

        ``p_value`` is None when the standard error is zero but the estimate
        differs from the null, where the normal test is undefined.
        """
        if alternative is None:
            alternative = Alternative.LESS if self.metric == "brier" else Alternative.GREATER
        alternative = Alternative(alternative)
        lo, hi = self.confidence_interval(alpha, method)
        try:
            p = self.p_value(alternative, null)
        except ZeroVariance:
            p = None
        return {
            "metric": self.metric,
            "estimate": float(self.estimate),
            "se": self.se,
            "ci": [float(lo), float(hi)],
            "alpha": alpha,
            "p_value": p,
            "alternative": alternative.value,
            "times": self.times.tolist(),
            "per_time": self.per_time.tolist(),
            "weighting": self.weighting,
            "B": self.B,
            "seed": self.seed,
        }


def bootstrap_indices(n: int, B: int, seed: int):
    """Subject resamples; replicate ``i`` draws from its own stream seeded by ``(seed, i)``."""
    for i in range(B):
        yield np.random.default_rng([seed, i]).integers(0, n, size=n)


def _time_average(times: np.ndarray, values: np.ndarray) -> float:
    if values.size == 1:
        return float(values[0])
    span = times[-1] - times[0]
    if span <= 0:
        return float(np.mean(values))
    area = np.sum((values[1:] + values[:-1]) * np.diff(times)) / 2.0
    return float(area / span)


def default_times(event, time) -> np.ndarray:
    """Distinct event times strictly before the last observed time."""
    event, time = as_arrays(event, time)
    t = np.unique(time[event])
    t = t[t < time.max()]
    if t.size == 0:
        raise NoCases("no event time has both cases and later controls")
    return t


def _subject_weights(weights, n: int):
    if isinstance(weights, SubjectWeights):
        return weights.kind, weights.weights
    if isinstance(weights, str):
        if weights not in ("ipcw", "uniform"):
            raise ValueError(f"unknown weighting {weights!r}")
        return weights, None
    if weights is None:
        return "uniform", None
    w = np.asarray(weights, dtype=np.float64)
    if w.shape[0] != n or w.ndim > 2 or not np.all(np.isfinite(w)) or np.any(w < 0):
        raise ShapeMismatch(f"weights of shape {w.shape} are not valid for {n} subjects")
    return "custom", w


def _time_weights(kind, custom, censoring, event, time, times) -> np.ndarray:
    """n x T weights per evaluation time."""
    n = time.size
    if kind == "ipcw" and custom is None:
        g = censoring if censoring is not None else censoring_distribution(event, time)
        return np.column_stack([ipcw_weights(g, event, time, t).weights for t in times])
    if custom is None:
        return np.ones((n, times.size))
    if custom.ndim == 1:
        return np.repeat(custom[:, None], times.size, axis=1)
    if custom.shape[1] != times.size:
        raise ShapeMismatch(f"weights have {custom.shape[1]} columns for {times.size} times")
    return custom


def _auc_column(score, case_w, ctrl_w):
    """Weighted Mann-Whitney AUC of one score vector against T weight columns."""
    order = np.argsort(score, kind="stable")
    s = score[order]
    starts = np.flatnonzero(np.r_[True, s[1:] != s[:-1]])
    group = np.cumsum(np.r_[True, s[1:] != s[:-1]]) - 1
    ctrl_sorted = ctrl_w[order]
    group_ctrl = np.add.reduceat(ctrl_sorted, starts, axis=0)
    below = np.cumsum(group_ctrl, axis=0) - group_ctrl
    credit = below[group] + 0.5 * group_ctrl[group]
    num = np.sum(case_w[order] * credit, axis=0)
    return num, case_w.sum(axis=0) * ctrl_w.sum(axis=0)


def _auc_values(scores, event, time, times, w):
    cases = event[:, None] & (time[:, None] <= times[None, :])
    controls = time[:, None] > times[None, :]
    for k, t in enumerate(times):
        if not cases[:, k].any():
            raise NoCases(f"no cases at time {t}", time=float(t))
        if not controls[:, k].any():
            raise NoControls(f"no controls at time {t}", time=float(t))
    case_w, ctrl_w = w * cases, w * controls
    if scores.ndim == 1:
        num, den = _auc_column(scores, case_w, ctrl_w)
    else:
        pairs = [_auc_column(scores[:, k], case_w[:, [k]], ctrl_w[:, [k]]) for k in range(times.size)]
        num = np.concatenate([p[0] for p in pairs])
        den = np.concatenate([p[1] for p in pairs])
    if np.any(den <= 0):
        raise NoCases("cases or controls carry zero total weight")
    return num / den


def auc(scores, event, time, weights=None, new_time=None, censoring: StepFunction | None = None,
        B: int = DEFAULT_B, seed: int = 0) -> MetricResult:
    """Cumulative/dynamic AUC at each evaluation time.

    Cases at ``t`` have an event at or before ``t``; controls are still
    event-free after ``t``. ``scores`` is an n-vector, or n x T aligned with
    ``new_time``. ``weights`` may be None (uniform), ``"ipcw"``, a
    :class:`SubjectWeights`, or an n / n x T array. With ``"ipcw"`` the
    censoring curve is estimated on these subjects unless ``censoring`` is
    supplied. Default times are the distinct event times before the last
    observed time; they cannot be combined with time-dependent scores.
    """
    event, time = as_arrays(event, time)
    s = np.asarray(scores, dtype=np.float64)
    if new_time is None:
        if s.ndim == 2 and s.shape[1] > 1:
            raise ShapeMismatch("time-dependent scores need explicit evaluation times")
        times = default_times(event, time)
    else:
        times = np.atleast_1d(np.asarray(new_time, dtype=np.float64))
    s = check_risk_scores(s, time.size, times.size if s.ndim == 2 else None)
    kind, custom = _subject_weights(weights, time.size)

    def compute(idx=None):
        e, t, sc, cw = event, time, s, custom
        g = censoring
        if idx is not None:
            e, t, sc = event[idx], time[idx], s[idx]
            cw = None if custom is None else custom[idx]
        w = _time_weights(kind, cw, g, e, t, times)
        return _auc_values(sc, e, t, times, w)

    per_time = compute()
    return MetricResult(
        "auc", _time_average(times, per_time), per_time, times,
        weighting=kind, B=B, seed=seed,
        resample=_guarded(lambda idx: _time_average(times, compute(idx))),
        subjects=(event, time),
        metadata={"score_ties": _tie_count(s), "time_ties": _tie_count(time)},
    )


def _guarded(fn):
    def run(idx):
        try:
            return fn(idx)
        except NumericError:
            return float("nan")
    return run


def _tie_count(a) -> int:
    a = np.asarray(a).ravel()
    return int(a.size - np.unique(a).size)


def _concordance_parts(scores, event, time, pair_w):
    comparable = event[:, None] & (
        (time[:, None] < time[None, :])
        | ((time[:, None] == time[None, :]) & ~event[None, :])
    )
    if scores.ndim == 1:
        si, sj = scores[:, None], scores[None, :]
    else:
        si, sj = np.diag(scores)[:, None], scores.T
    h = (si > sj) + 0.5 * (si == sj)
    W = pair_w * comparable
    total = W.sum()
    if total <= 0:
        raise NoComparablePairs("no comparable pairs")
    c = float((W * h).sum() / total)
    dev = W * (h - c)
    phi = dev.sum(axis=1) + dev.sum(axis=0)
    se = float(np.sqrt(np.sum(phi ** 2)) / total)
    return c, se, int(comparable.sum())


def _pair_weights(kind, custom, censoring, event, time):
    n = time.size
    if kind == "ipcw" and custom is None:
        g = censoring if censoring is not None else censoring_distribution(event, time)
        gl = g.left_limit(time)
        w = np.zeros(n)
        ok = event & (gl > 0)
        w[ok] = gl[ok] ** -2.0
        if np.any(event & (gl <= 0)):
            bad = int(np.argmax(event & (gl <= 0)))
            raise DegenerateCensoring(f"censoring survival is 0 before subject {bad}", row=bad)
        return np.repeat(w[:, None], n, axis=1)
    if custom is None:
        return np.ones((n, n))
    if custom.ndim != 1:
        raise ShapeMismatch("concordance weights must be one per subject")
    return np.repeat((custom ** 2)[:, None], n, axis=1)


def concordance_index(scores, event, time, weights=None, censoring: StepFunction | None = None,
                      B: int = DEFAULT_B, seed: int = 0) -> MetricResult:
    """Concordance index over comparable pairs.

    A pair (i, j) is comparable when i has an event and either
    ``time_i < time_j`` or the times tie and j is censored. Tied scores count
    one half. Pair weights are 1, ``G(time_i-) ** -2`` for ``"ipcw"``, or
    ``w_i ** 2`` for per-subject weights ``w``. Time-dependent ``scores``
    are n x n with column k evaluated at subject k's time; pair (i, j) then
    compares column i.
    """
    event, time = as_arrays(event, time)
    s = np.asarray(scores, dtype=np.float64)
    if s.ndim == 2 and s.shape[1] > 1:
        if s.shape != (time.size, time.size):
            raise ShapeMismatch("time-dependent concordance scores must be n x n")
        s = check_risk_scores(s, time.size, time.size)
    else:
        s = check_risk_scores(s, time.size)
    kind, custom = _subject_weights(weights, time.size)

    def compute(idx=None):
        if idx is None:
            e, t, sc, cw = event, time, s, custom
        else:
            e, t = event[idx], time[idx]
            sc = s[idx] if s.ndim == 1 else s[np.ix_(idx, idx)]
            cw = None if custom is None else custom[idx]
        return _concordance_parts(sc, e, t, _pair_weights(kind, cw, censoring, e, t))

    c, se, n_pairs = compute()
    return MetricResult(
        "cindex", c, standard_error=se, weighting=kind, B=B, seed=seed,
        resample=_guarded(lambda idx: compute(idx)[0]),
        subjects=(event, time),
        metadata={"comparable_pairs": n_pairs, "score_ties": _tie_count(s),
                  "time_ties": _tie_count(time)},
    )


def _brier_values(surv, event, time, times, w):
    cases = event[:, None] & (time[:, None] <= times[None, :])
    controls = time[:, None] > times[None, :]
    terms = surv ** 2 * cases * w + (1.0 - surv) ** 2 * controls * w
    return terms.mean(axis=0)


def brier(surv, event, time, new_time=None, weights="ipcw", censoring: StepFunction | None = None,
          B: int = DEFAULT_B, seed: int = 0) -> MetricResult:
    """Brier score of predicted survival probabilities ``surv`` (n x T).

    Defaults to IPCW weighting; ``weights=None`` or ``"uniform"`` uses unit
    weights, which is only unbiased without censoring before ``t``. With
    several evaluation times the estimate is the integrated Brier score.
    """
    event, time = as_arrays(event, time)
    times = default_times(event, time) if new_time is None else np.atleast_1d(
        np.asarray(new_time, dtype=np.float64))
    surv = check_survival_probabilities(surv, time.size, times.size)
    kind, custom = _subject_weights(weights, time.size)

    def compute(idx=None):
        e, t, sv, cw = event, time, surv, custom
        if idx is not None:
            e, t, sv = event[idx], time[idx], surv[idx]
            cw = None if custom is None else custom[idx]
        return _brier_values(sv, e, t, times, _time_weights(kind, cw, censoring, e, t, times))

    per_time = compute()
    return MetricResult(
        "brier", _time_average(times, per_time), per_time, times,
        weighting=kind, B=B, seed=seed,
        resample=_guarded(lambda idx: _time_average(times, compute(idx))),
        subjects=(event, time),
        metadata={"time_ties": _tie_count(time)},
    )


def brier_integral(result: MetricResult) -> float:
    """Trapezoidal integral of the per-time values divided by the time span."""
    if result.times.size < 2:
        raise TooFewTimes("the integral needs at least two evaluation times")
    return _time_average(result.times, result.per_time)


def confidence_interval(result: MetricResult, alpha: float = 0.05, method: str | None = None):
    """(lower, upper) at level ``1 - alpha``.

    ``"noether"``: estimate +/- z * analytic SE, truncated to [0, 1] (the
    concordance default). ``"bootstrap"``: percentile interval of the
    replicates (AUC and Brier default), widened if needed to contain the
    estimate. ``"normal"``: estimate +/- z * SE, using whichever SE exists.
    """
    if not 0 < alpha <= 1:
        raise ValueError(f"alpha must lie in (0, 1], got {alpha}")
    if method is None:
        method = "noether" if result.standard_error is not None else "bootstrap"
    est = float(result.estimate)
    if method in ("noether", "normal"):
        if method == "noether" and result.standard_error is None:
            raise MissingVariance(f"{result.metric}: no analytic standard error")
        half = _NORMAL.inv_cdf(1 - alpha / 2) * result.se
        return max(0.0, est - half), min(1.0, est + half)
    if method == "bootstrap":
        lo, hi = np.quantile(result.replicates, [alpha / 2, 1 - alpha / 2])
        return min(float(lo), est), max(float(hi), est)
    raise ValueError(f"unknown interval method {method!r}")


def _tail(z: float, alternative: Alternative) -> float:
    if alternative is Alternative.GREATER:
        return 1.0 - _NORMAL.cdf(z)
    if alternative is Alternative.LESS:
        return _NORMAL.cdf(z)
    return min(1.0, 2.0 * min(_NORMAL.cdf(z), 1.0 - _NORMAL.cdf(z)))


def _z(diff: float, se: float) -> float:
    if diff == 0:
        return 0.0
    if se <= 0:
        raise ZeroVariance("standard error is zero for a nonzero difference")
    return diff / se


def p_value(result: MetricResult, alternative="two_sided", null: float | None = None) -> float:
    """Normal-approximation test of ``estimate == null`` (default: random predictor)."""
    alternative = Alternative(alternative)
    if null is None:
        null = RANDOM_PREDICTOR[result.metric]
    diff = float(result.estimate) - null
    if diff == 0:
        return _tail(0.0, alternative)
    return _tail(_z(diff, result.se), alternative)


def compare(a: MetricResult, b: MetricResult, alternative="greater") -> float:
    """Paired test of ``a.estimate == b.estimate`` on shared bootstrap resamples."""
    return paired_test(a, b, alternative)[2]


def paired_test(a: MetricResult, b: MetricResult, alternative="greater"):
    """``(difference, se, p_value)`` of the paired comparison of ``a`` and ``b``."""
    alternative = Alternative(alternative)
    _check_paired(a, b)
    diff = float(a.estimate) - float(b.estimate)
    if diff == 0:
        return diff, 0.0, _tail(0.0, alternative)
    se = paired_se(a, b)
    return diff, se, _tail(_z(diff, se), alternative)


def paired_se(a: MetricResult, b: MetricResult) -> float:
    _check_paired(a, b)
    if a.resample is None or b.resample is None:
        raise MissingVariance("both results need bootstrap machinery")
    diffs = np.array([a.resample(idx) - b.resample(idx)
                      for idx in bootstrap_indices(a.n, a.B, a.seed)])
    diffs = diffs[np.isfinite(diffs)]
    if diffs.size < 2:
        raise MissingVariance("fewer than 2 usable paired bootstrap replicates")
    return float(np.std(diffs, ddof=1))


def _check_paired(a: MetricResult, b: MetricResult) -> None:
    if a.metric != b.metric:
        raise UnpairedInputs(f"cannot compare {a.metric} with {b.metric}")
    if a.subjects is None or b.subjects is None:
        raise UnpairedInputs("results do not record their subjects")
    if a.n != b.n:
        raise UnpairedInputs(f"results cover {a.n} and {b.n} subjects")
    if not np.array_equal(a.times, b.times):
        raise UnpairedInputs("results use different evaluation times")
    for x, y in zip(a.subjects, b.subjects):
        if not np.array_equal(x, y):
            raise UnpairedInputs("results were computed on different subjects")

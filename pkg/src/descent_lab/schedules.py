"""Step-size schedules ``k -> M_k`` and finite-horizon property diagnostics.

A schedule carries *declared* analytic tags. :func:`classify` never proves
a tag; it only reports whether a finite prefix of the sequence looks
consistent with each property.
"""

import enum
import math
from dataclasses import dataclass, field

import numpy as np

from ._validation import check_int, check_positive
from .errors import (
    InvalidHorizonError,
    InvalidQError,
    InvalidTagsError,
    TagViolationError,
)
from .linalg import StepMatrix, is_spd


@dataclass(frozen=True)
class PropertyTags:
    spd: bool = True
    divergent_min_sum: bool = False
    diminishing: bool = False
    q_summable: float | None = None

    def __post_init__(self):
        if self.q_summable is not None:
            if not self.q_summable > 1:
                raise InvalidTagsError(f"q_summable witness must be > 1, got {self.q_summable}")
            if not self.diminishing:
                raise InvalidTagsError("q_summable requires diminishing to be declared")


@dataclass(frozen=True)
class Schedule:
    """A deterministic rule ``k -> StepMatrix`` plus declared tags.

    ``extremes`` optionally maps an integer array ``k`` to arrays
    ``(lambda_min, lambda_max)``; it only speeds up :func:`classify` and is
    never used by the descent engine.
    """

    name: str
    rule: object
    tags: PropertyTags = field(default_factory=PropertyTags)
    params: dict = field(default_factory=dict)
    extremes: object = None

    def step_at(self, k):
        return step_at(self, k)

    def extremes_upto(self, horizon):
        if self.extremes is not None:
            lo, hi = self.extremes(np.arange(horizon))
            return np.asarray(lo, dtype=float), np.asarray(hi, dtype=float)
        lo = np.empty(horizon)
        hi = np.empty(horizon)
        for k in range(horizon):
            m = self.rule(k)
            lo[k], hi[k] = m.lambda_min, m.lambda_max
        return lo, hi


def step_at(s, k):
    if isinstance(k, bool) or not isinstance(k, (int, np.integer)) or k < 0:
        raise ValueError(f"step index must be a non-negative integer, got {k!r}")
    m = s.rule(k)
    if s.tags.spd and not is_spd(m, 0.0):
        raise TagViolationError(
            f"schedule {s.name!r} is tagged SPD but M_{k} has lambda_min = {m.lambda_min}"
        )
    return m


def power_scalar(a, c=1.0):
    """``M_k = c (k+1)^(-a) I``."""
    a = check_positive(a, "exponent")
    c = check_positive(c, "scale")
    # sum (k+1)^(-a q) converges iff a q > 1; any q > 1/a is a witness.
    q = 1.0 / a + 1.0 if a < 1 else 2.0
    tags = PropertyTags(spd=True, divergent_min_sum=a <= 1, diminishing=True, q_summable=q)

    def rule(k):
        return StepMatrix.scalar(c * (k + 1) ** (-a))

    def extremes(k):
        v = c * (k + 1.0) ** (-a)
        return v, v

    return Schedule(f"power(a={a:g}, c={c:g})", rule, tags, {"exponent": a, "scale": c}, extremes)


def log_scalar(c=1.0):
    """``M_k = c / log(k+2) I``.

    The offset ``k+2`` keeps ``M_0`` finite; the asymptotics are those of
    ``1/log(k+1)``.
    """
    c = check_positive(c, "scale")
    tags = PropertyTags(spd=True, divergent_min_sum=True, diminishing=True, q_summable=None)

    def rule(k):
        return StepMatrix.scalar(c / math.log(k + 2))

    def extremes(k):
        v = c / np.log(k + 2.0)
        return v, v

    return Schedule(f"log(c={c:g})", rule, tags, {"scale": c}, extremes)


def constant_scalar(c):
    c = check_positive(c, "value")
    tags = PropertyTags(spd=True, divergent_min_sum=True, diminishing=False, q_summable=None)
    m = StepMatrix.scalar(c)

    def rule(k):
        return m

    def extremes(k):
        v = np.full(k.shape, c)
        return v, v

    return Schedule(f"constant(c={c:g})", rule, tags, {"value": c}, extremes)


def diagonal_power(a, weights):
    """``M_k = (k+1)^(-a) Diag(weights)``."""
    a = check_positive(a, "exponent")
    w = np.array(weights, dtype=np.float64).reshape(-1)
    if w.size == 0 or not np.all(np.isfinite(w)) or np.any(w <= 0):
        raise ValueError("weights must be a non-empty list of positive finite numbers")
    wmin, wmax = float(w.min()), float(w.max())
    q = 1.0 / a + 1.0 if a < 1 else 2.0
    tags = PropertyTags(spd=True, divergent_min_sum=a <= 1, diminishing=True, q_summable=q)

    def rule(k):
        return StepMatrix.diagonal((k + 1) ** (-a) * w)

    def extremes(k):
        f = (k + 1.0) ** (-a)
        return wmin * f, wmax * f

    return Schedule(
        f"diagonal_power(a={a:g})", rule, tags, {"exponent": a, "weights": w.tolist()}, extremes
    )


class Verdict(enum.Enum):
    """Finite-horizon evidence about one property.

    ``CONSISTENT`` means the prefix looks like the property holds,
    ``INCONSISTENT`` means it looks like the property fails.
    """

    CONSISTENT = "ConsistentWithTag"
    INCONSISTENT = "InconsistentWithTag"
    INCONCLUSIVE = "Inconclusive"

    def __str__(self):
        return self.value


@dataclass(frozen=True)
class ClassifierThresholds:
    """Heuristic constants used by :func:`classify`.

    tail_fraction
        A partial sum counts as settled if its increment over the last half
        of the horizon is below this fraction of the total.
    growth_ratio
        A partial sum counts as still growing strongly if its value at the
        horizon exceeds this multiple of its value at half the horizon.
    harmonic_slack
        Terms whose log-log decay rate over the last half of the horizon is
        at most ``1 + harmonic_slack`` decay no faster than ``1/k``.
    """

    tail_fraction: float = 0.01
    growth_ratio: float = 10.0
    harmonic_slack: float = 1e-6


@dataclass(frozen=True)
class PropertyReport:
    schedule: str
    horizon: int
    partial_min_sum: float
    max_lambda_at_horizon: float
    q_partial_sums: dict
    q_decay_rates: dict
    q_verdicts: dict
    verdicts: dict
    tag_conflicts: tuple
    thresholds: ClassifierThresholds
    heuristic: bool = True

    def lines(self):
        out = [f"schedule {self.schedule} horizon {self.horizon} (heuristic verdicts)"]
        out.append(f"  partial_min_sum = {self.partial_min_sum:.17g}")
        out.append(f"  max_lambda_at_horizon = {self.max_lambda_at_horizon:.17g}")
        for name, v in self.verdicts.items():
            out.append(f"  {name}: {v}")
        for q in self.q_verdicts:
            out.append(
                f"  q={q:g}: sum={self.q_partial_sums[q]:.6g} "
                f"decay_rate={self.q_decay_rates[q]:.4f} {self.q_verdicts[q]}"
            )
        return out


def _decay_rate(terms, half):
    """Log-log slope ``-d log t / d log k`` between ``k = half`` and the end."""
    n = terms.size
    t0, t1 = terms[half - 1], terms[n - 1]
    if t1 <= 0 or t0 <= 0:
        return math.inf
    return -math.log(t1 / t0) / math.log(n / half)


def _series_verdict(terms, thr):
    """Return (verdict that the series converges, total, decay rate)."""
    n = terms.size
    half = n // 2
    csum = np.cumsum(terms)
    total = float(csum[-1])
    at_half = float(csum[half - 1])
    rate = _decay_rate(terms, half)
    if total == 0.0:
        return Verdict.CONSISTENT, total, rate
    looks_harmonic = rate <= 1.0 + thr.harmonic_slack
    if looks_harmonic or (at_half > 0 and total > thr.growth_ratio * at_half):
        return Verdict.INCONSISTENT, total, rate
    if (total - at_half) < thr.tail_fraction * total:
        return Verdict.CONSISTENT, total, rate
    return Verdict.INCONCLUSIVE, total, rate


def classify(s, horizon, q_grid=(), thresholds=None):
    """Compare a finite prefix of ``s`` against Properties SPD/divergent/diminishing/q.

    Summability at ``q`` is judged on the terms ``lambda_max(M_k)^q``: they
    are inconsistent with summability when their log-log decay rate over the
    second half of the horizon is harmonic or slower (the comparison used
    to show ``1/log(k)^q`` is not summable), or when the partial sum is
    still growing by more than ``growth_ratio``; consistent when the
    decay rate exceeds one and the last-half increment is below
    ``tail_fraction`` of the total.
    """
    thr = thresholds or ClassifierThresholds()
    try:
        horizon = check_int(horizon, "horizon", minimum=2)
    except ValueError as exc:
        raise InvalidHorizonError(str(exc)) from None
    qs = []
    for q in q_grid:
        if not (isinstance(q, (int, float)) and math.isfinite(q) and q > 1):
            raise InvalidQError(f"q must be a finite real > 1, got {q!r}")
        qs.append(float(q))
    if s.tags.q_summable is not None and s.tags.q_summable not in qs:
        qs.append(float(s.tags.q_summable))

    lo, hi = s.extremes_upto(horizon)
    half = horizon // 2
    verdicts = {}

    verdicts["spd"] = Verdict.CONSISTENT if np.all(lo > 0) else Verdict.INCONSISTENT

    # Divergence of sum lambda_min looks like the negation of summability.
    conv, min_sum, _ = _series_verdict(lo, thr)
    if min_sum >= math.log(horizon) / 2:
        verdicts["divergent_min_sum"] = Verdict.CONSISTENT
    elif conv is Verdict.CONSISTENT:
        verdicts["divergent_min_sum"] = Verdict.INCONSISTENT
    else:
        verdicts["divergent_min_sum"] = Verdict.INCONCLUSIVE

    early, late = float(np.max(hi[:half])), float(np.max(hi[half:]))
    if late >= early:
        verdicts["diminishing"] = Verdict.INCONSISTENT
    elif np.all(np.diff(hi[half:]) <= 0):
        verdicts["diminishing"] = Verdict.CONSISTENT
    else:
        verdicts["diminishing"] = Verdict.INCONCLUSIVE

    q_sums, q_rates, q_verdicts = {}, {}, {}
    for q in qs:
        v, total, rate = _series_verdict(hi**q, thr)
        q_sums[q], q_rates[q], q_verdicts[q] = total, rate, v
    if s.tags.q_summable is not None:
        verdicts["q_summable"] = q_verdicts[float(s.tags.q_summable)]

    conflicts = []
    for name in ("spd", "divergent_min_sum", "diminishing"):
        if getattr(s.tags, name) and verdicts[name] is Verdict.INCONSISTENT:
            conflicts.append(name)
    if verdicts.get("q_summable") is Verdict.INCONSISTENT:
        conflicts.append("q_summable")

    return PropertyReport(
        schedule=s.name,
        horizon=horizon,
        partial_min_sum=min_sum,
        max_lambda_at_horizon=float(hi[-1]),
        q_partial_sums=q_sums,
        q_decay_rates=q_rates,
        q_verdicts=q_verdicts,
        verdicts=verdicts,
        tag_conflicts=tuple(conflicts),
        thresholds=thr,
    )


SCHEDULES = {
    "power": power_scalar,
    "log": log_scalar,
    "constant": constant_scalar,
    "diagonal_power": diagonal_power,
}

"""Discrete gradient descent ``x_{k+1} = x_k - M_k F'(x_k)`` and its diagnostics."""

import math
import warnings
from dataclasses import dataclass, field

import numpy as np

from ._validation import check_int, check_point, check_positive
from .errors import MissingLowerBoundError
from .linalg import SCALAR
from .objectives import estimate_local_constants

DEFAULT_TOL_G = 1e-6
DEFAULT_TAIL_FRACTION = 0.1
MIN_TAIL_RECORDS = 10


@dataclass(eq=False)
class Trace:
    """Record of one descent run; entry ``k`` describes ``x_k`` and ``M_k``.

    ``nonfinite_at`` is the index whose successor would have been
    non-finite, or ``None`` when the full budget ran.
    """

    x: np.ndarray
    f: np.ndarray
    grad_norm: np.ndarray
    lambda_min: np.ndarray
    lambda_max: np.ndarray
    objective: str = ""
    schedule: str = ""
    budget: int = 0
    nonfinite_at: int | None = None
    _radius_cache: dict = field(default_factory=dict, repr=False)

    def __len__(self):
        return self.x.shape[0]

    @property
    def x0(self):
        return self.x[0]

    @property
    def dim(self):
        return self.x.shape[1]

    def radius_profile(self, z):
        """Running maximum of ``|x_j - z|`` over ``j <= k``, cached per ``z``."""
        z = np.asarray(z, dtype=float).reshape(-1)
        key = z.tobytes()
        prof = self._radius_cache.get(key)
        if prof is None:
            with np.errstate(over="ignore"):
                prof = np.maximum.accumulate(np.linalg.norm(self.x - z, axis=1))
            prof.setflags(write=False)
            self._radius_cache[key] = prof
        return prof

    def chi_sequence(self, z, radius):
        return (self.radius_profile(z) <= radius).astype(np.int8)


def run(obj, s, x0, budget):
    """Run ``budget`` steps of descent from ``x0``; returns ``budget + 1`` records.

    If an iterate becomes non-finite the run stops early and the trace is
    truncated after the last finite record, with ``nonfinite_at`` set.
    """
    budget = check_int(budget, "budget", minimum=1)
    x = check_point(x0, obj.dim, "x0")
    if not s.tags.spd:
        raise ValueError(f"schedule {s.name!r} is not tagged SPD")
    xs, fs, gn, lmin, lmax = [], [], [], [], []
    lb = obj.lower_bound
    value, gradient, rule, check_spd = obj.value, obj.gradient, s.rule, s.tags.spd
    stopped = None
    # Overflow is detected below and truncates the trace, so no warnings.
    with np.errstate(over="ignore", invalid="ignore"):
        for k in range(budget + 1):
            m = rule(k)
            if check_spd and not m.lambda_min > 0:
                s.step_at(k)  # raises TagViolationError
            g = gradient(x)
            xs.append(x)
            fs.append(value(x))
            gn.append(math.sqrt(float(g.dot(g))))
            lmin.append(m.lambda_min)
            lmax.append(m.lambda_max)
            if k == budget:
                break
            x_next = x - (m.data * g if m.form == SCALAR else m.apply(g))
            # A finite squared norm implies finite entries; fall back only when it is not.
            if not math.isfinite(x_next.dot(x_next)) and not np.all(np.isfinite(x_next)):
                stopped = k
                break
            x = x_next
    fs = np.array(fs)
    if lb is not None and np.any(fs < lb - 1e-12 * max(1.0, abs(lb))):
        warnings.warn(f"{obj.name}: value below declared lower bound {lb}", RuntimeWarning)
    return Trace(
        np.array(xs), fs, np.array(gn), np.array(lmin), np.array(lmax),
        objective=obj.name, schedule=s.name, budget=budget, nonfinite_at=stopped,
    )


def chi(trace, z, radius, k):
    """1 if every iterate ``x_0 .. x_k`` lies in the closed ball ``B(z, radius)``."""
    if not 0 <= k < len(trace):
        raise IndexError(f"k = {k} outside trace of length {len(trace)}")
    return int(trace.radius_profile(z)[k] <= radius)


def running_grad_min(trace, z, radius):
    """Running minimum of ``|F'(x_k)| chi_k``."""
    return np.minimum.accumulate(trace.grad_norm * trace.chi_sequence(z, radius))


@dataclass(frozen=True)
class TelescopingReport:
    radius: float
    l_hat: float
    g_hat: float
    c_hat: float
    K: int
    lhs: np.ndarray
    rhs: float
    residuals: np.ndarray
    violations: tuple
    slack: float
    verdict: str
    empty_range: bool
    constants_estimated: bool
    reestimated: bool = False

    @property
    def holds(self):
        return self.verdict == "holds"

    @property
    def cumulative_ok(self):
        return self.lhs.size == 0 or self.lhs[-1] <= self.rhs + self.slack


def _telescope(trace, obj, z, radius, l_hat, g_hat, slack_rel):
    f_lb = obj.lower_bound
    c_hat = l_hat / 2.0 + g_hat
    lam = trace.lambda_max
    n = len(trace)
    # K: first index after which every observed lambda_max < 2 / C.
    ok = lam < (2.0 / c_hat if c_hat > 0 else math.inf)
    K = n
    for k in range(n - 1, -1, -1):
        if not ok[k]:
            break
        K = k
    chi_seq = trace.chi_sequence(z, radius).astype(float)
    gap = (trace.f - f_lb) * chi_seq
    decrease = 0.5 * trace.lambda_min * trace.grad_norm**2
    slack = slack_rel * max(1.0, abs(trace.f[0] - f_lb))
    if K >= n - 1:
        residuals = np.empty(0)
        lhs = np.empty(0)
    else:
        rhs_steps = (trace.f[K:-1] - f_lb - decrease[K:-1]) * chi_seq[K:-1]
        residuals = rhs_steps - gap[K + 1 :]
        lhs = np.cumsum(decrease[K:-1] * chi_seq[K:-1])
    rhs = float(gap[K]) if K < n else 0.0
    bad = tuple(int(K + i) for i in np.nonzero(residuals < -slack)[0])
    if lhs.size and lhs[-1] > rhs + slack:
        bad = bad + (-1,)
    return c_hat, K, lhs, rhs, residuals, bad, slack


def verify_descent_inequalities(
    trace, obj, z=None, radius=1.0, constants=None, n_samples=10_000, seed=0, slack_rel=1e-9
):
    """Check the stopped one-step decrease and its telescoped sum on a trace.

    With ``C = L/2 + G`` and ``K`` the first index after which every
    ``lambda_max(M_k) < 2/C``, each ``k >= K`` must satisfy::

        [F(x_{k+1}) - F_lb] chi_{k+1} <= [F(x_k) - F_lb - lambda_min(M_k)|F'(x_k)|^2 / 2] chi_k

    and the partial sums of ``lambda_min |F'|^2 chi / 2`` from ``K`` must stay
    below ``[F(x_K) - F_lb] chi_K``.

    ``constants`` is ``(L, G)`` with ``L`` taken on the ball of radius
    ``radius + 1`` and ``G`` on the ball of radius ``radius``, both centred
    at ``z``. When omitted they are estimated by sampling; a violation then
    triggers one re-estimation with ten times the samples before it is
    reported. Violations at steps where the Lipschitz-type constant needed
    to close the inequality exceeds ``C`` are reported as
    ``"constants_insufficient"``; any others as ``"violated"``. Index ``-1``
    in ``violations`` marks a failed cumulative bound.
    """
    if obj.lower_bound is None:
        raise MissingLowerBoundError(f"{obj.name} has no lower bound")
    check_positive(radius, "radius")
    z = np.zeros(trace.dim) if z is None else check_point(z, trace.dim, "z")
    estimated = constants is None
    if estimated:
        l_hat, _ = estimate_local_constants(obj, z, radius + 1.0, n_samples, seed)
        _, g_hat = estimate_local_constants(obj, z, radius, n_samples, seed)
    else:
        l_hat, g_hat = (float(c) for c in constants)
    out = _telescope(trace, obj, z, radius, l_hat, g_hat, slack_rel)
    reestimated = False
    if estimated and out[5]:
        l2, _ = estimate_local_constants(obj, z, radius + 1.0, 10 * n_samples, seed + 1)
        _, g2 = estimate_local_constants(obj, z, radius, 10 * n_samples, seed + 1)
        l_hat, g_hat = max(l_hat, l2), max(g_hat, g2)
        out = _telescope(trace, obj, z, radius, l_hat, g_hat, slack_rel)
        reestimated = True
    c_hat, K, lhs, rhs, residuals, bad, slack = out

    if not bad:
        verdict = "holds"
    else:
        verdict = "constants_insufficient"
        step_bad = [k for k in bad if k >= 0]
        for k in step_bad:
            if _needed_constant(trace, obj, z, radius, k) <= c_hat:
                verdict = "violated"
                break
        if not step_bad:
            verdict = "violated"
    return TelescopingReport(
        radius=float(radius), l_hat=l_hat, g_hat=g_hat, c_hat=c_hat, K=K, lhs=lhs, rhs=rhs,
        residuals=residuals, violations=bad, slack=slack, verdict=verdict,
        empty_range=K >= len(trace) - 1, constants_estimated=estimated, reestimated=reestimated,
    )


def _needed_constant(trace, obj, z, radius, k):
    """Smallest ``C`` closing the general one-step bound at step ``k``.

    Uses ``gT M g >= lambda_min |g|^2`` and ``|M g| <= lambda_max |g|``.
    """
    chi_seq = trace.chi_sequence(z, radius)
    if not chi_seq[k]:
        return math.inf
    f_lb = obj.lower_bound
    g2 = trace.grad_norm[k] ** 2
    if g2 == 0:
        return math.inf
    lhs = (trace.f[k + 1] - f_lb) * chi_seq[k + 1]
    base = trace.f[k] - f_lb - trace.lambda_min[k] * g2
    return (lhs - base) / (trace.lambda_max[k] ** 2 * g2)


CONVERGED = "Converged"
DIVERGING = "Diverging"
UNDECIDED = "Undecided"


@dataclass(frozen=True)
class Outcome:
    kind: str
    x_star: np.ndarray | None
    grad_at_star: float | None
    escape_radius: float
    tail_diameter: float
    final_grad_norm: float
    final_norm: float

    def __str__(self):
        return self.kind


def detect_outcome(trace, tol_x=None, tol_g=DEFAULT_TOL_G, escape_radius=None,
                   tail_fraction=DEFAULT_TAIL_FRACTION):
    """Classify a finite trace as converged, diverging or undecided.

    Converged: the last ``tail_fraction`` of iterates has diameter below
    ``tol_x``, the final gradient norm is below ``tol_g``, and the final
    iterate lies inside the escape radius. Diverging: the final iterate lies
    beyond the escape radius and ``|x_k|`` is nondecreasing (with net
    growth) over the last quarter of the trace. The two predicates are
    exclusive by construction. Traces whose tail has fewer than
    ``MIN_TAIL_RECORDS`` entries are always undecided.
    """
    if len(trace) == 0:
        raise ValueError("empty trace")
    if not 0 < tail_fraction <= 0.5:
        raise ValueError(f"tail_fraction must be in (0, 1/2], got {tail_fraction}")
    x0_norm = float(np.linalg.norm(trace.x[0]))
    if tol_x is None:
        tol_x = 1e-6 * (1.0 + x0_norm)
    if escape_radius is None:
        escape_radius = 1e3 * (1.0 + x0_norm)
    n = len(trace)
    n_tail = math.ceil(tail_fraction * n)
    tail = trace.x[n - n_tail :]
    diameter = _diameter(tail)
    norms = np.linalg.norm(trace.x, axis=1)
    final_norm = float(norms[-1])
    final_g = float(trace.grad_norm[-1])
    quarter = norms[n - max(2, math.ceil(n / 4)) :]

    kind = UNDECIDED
    if n_tail >= MIN_TAIL_RECORDS:
        if diameter < tol_x and final_g < tol_g and final_norm <= escape_radius:
            kind = CONVERGED
        elif (final_norm > escape_radius and np.all(np.diff(quarter) >= 0)
              and quarter[-1] > quarter[0]):
            kind = DIVERGING
    return Outcome(
        kind=kind,
        x_star=trace.x[-1].copy() if kind == CONVERGED else None,
        grad_at_star=final_g if kind == CONVERGED else None,
        escape_radius=float(escape_radius),
        tail_diameter=diameter,
        final_grad_norm=final_g,
        final_norm=final_norm,
    )


def _diameter(points):
    # Exact for 1-D; bounding-box diagonal (an upper bound) otherwise.
    span = points.max(axis=0) - points.min(axis=0)
    return float(np.linalg.norm(span))

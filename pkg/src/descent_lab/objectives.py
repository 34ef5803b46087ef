"""Objective functions with analytic gradients, plus numerical oracles.

The suite is deliberately small: ``exp(-x^2)``, a quadratic bowl, the
divergence staircase, and the Palis-de Melo function. Every objective maps
finite points to finite values and gradients.
"""

import bisect
import math
import threading

import numpy as np
from scipy.stats import norm, qmc

from ._validation import check_int, check_point, check_positive
from .errors import InvalidRadiusError, NonFiniteError, SegmentOverflowError
from .linalg import SCALAR

NEGATIVE_REGION = -1

# Below this |r^2 - 1| both exponential factors of Palis-de Melo underflow.
PDM_UNDERFLOW_BAND = 1.3e-3

# exp(-EXP_CUTOFF) underflows to zero in double precision.
EXP_CUTOFF = 745.0


class Objective:
    """Scalar field on ``R^dim``.

    Subclasses implement :meth:`value` and :meth:`gradient`. ``lower_bound``
    is ``None`` when no finite bound is known.
    """

    name = "objective"
    dim = 1
    lower_bound = None

    def value(self, x):
        raise NotImplementedError

    def gradient(self, x):
        raise NotImplementedError

    def analytic_constants(self, z, radius):
        """Exact ``(L, G)`` over the closed ball ``B(z, radius)``, if known."""
        return None

    def __repr__(self):
        return f"{type(self).__name__}(dim={self.dim})"


class ExpNegSquare(Objective):
    """``F(x) = exp(-x^2)`` on the real line; bounded below by 0."""

    name = "exp_neg_square"
    dim = 1
    lower_bound = 0.0

    def value(self, x):
        x = float(np.asarray(x).reshape(-1)[0])
        return math.exp(-x * x)

    def gradient(self, x):
        x = float(np.asarray(x).reshape(-1)[0])
        return np.array([-2.0 * x * math.exp(-x * x)])

    def analytic_constants(self, z, radius):
        # |F''| = |4x^2 - 2| e^{-x^2} peaks at x = 0; |F'| peaks at |x| = 1/sqrt(2).
        z = float(np.asarray(z).reshape(-1)[0])
        lo, hi = z - radius, z + radius
        peak = 1.0 / math.sqrt(2.0)
        if lo <= peak <= hi or lo <= -peak <= hi:
            g = math.sqrt(2.0) * math.exp(-0.5)
        else:
            g = max(abs(2 * t * math.exp(-t * t)) for t in (lo, hi))
        return 2.0, g


class QuadraticBowl(Objective):
    """``F(x) = |x|^2 / 2`` in any dimension."""

    name = "quadratic_bowl"
    lower_bound = 0.0

    def __init__(self, dim=1):
        self.dim = check_int(dim, "dim", minimum=1)

    def value(self, x):
        x = np.asarray(x)
        return 0.5 * float(x.dot(x))

    def gradient(self, x):
        return np.array(x, dtype=float)

    def analytic_constants(self, z, radius):
        return 1.0, float(np.linalg.norm(z)) + radius


class StaircaseSpec:
    """Lazily grown prefix sums ``S_0 = 0, S_{j+1} = S_j + m_j``.

    ``m_j`` is read from a scalar schedule, so the prefix reproduces exactly
    the additions performed by gradient descent with ``M_k = m_k I``.
    Extension is guarded by a lock; concurrent readers see a consistent,
    deterministic prefix.
    """

    def __init__(self, schedule, max_segments=10**7):
        self.schedule = schedule
        self.max_segments = check_int(max_segments, "max_segments", minimum=1)
        self._m = []
        self._prefix = [0.0]
        self._lock = threading.Lock()

    def m(self, j):
        self.extend_to_count(j + 1)
        return self._m[j]

    def prefix(self, j):
        """``S_j``."""
        self.extend_to_count(j)
        return self._prefix[j]

    @property
    def segments(self):
        return len(self._m)

    def _append(self):
        k = len(self._m)
        if k >= self.max_segments:
            raise SegmentOverflowError(
                f"staircase needs more than max_segments={self.max_segments} segments"
            )
        step = self.schedule.step_at(k)
        if step.form != SCALAR:
            raise ValueError("the staircase requires a scalar schedule")
        mk = step.lambda_max
        self._m.append(mk)
        self._prefix.append(self._prefix[-1] + mk)

    def extend_to_count(self, count):
        if len(self._m) >= count:
            return
        with self._lock:
            while len(self._m) < count:
                self._append()

    def extend_past(self, x):
        if self._prefix[-1] >= x:
            return
        with self._lock:
            while self._prefix[-1] < x:
                self._append()

    def locate(self, x):
        return staircase_locate(self, x)


def staircase_locate(spec, x):
    """Segment ``j`` with ``S_j < x <= S_{j+1}``, or ``NEGATIVE_REGION`` for ``x <= 0``."""
    x = float(x)
    if not math.isfinite(x):
        raise NonFiniteError(f"x = {x!r} is not finite")
    if x <= 0.0:
        return NEGATIVE_REGION
    spec.extend_past(x)
    return bisect.bisect_left(spec._prefix, x) - 1


class Staircase(Objective):
    """Piecewise objective on which descent with ``M_k = m_k I`` from 0 walks up.

    Each segment ``(S_j, S_{j+1}]`` holds a descending ramp, a quadratic
    well, a flat-topped exponential bump and a mirrored well, pinned so
    that ``F(S_j) = S_j / 2`` and ``F'(S_j) = -1``. The outer ramps are
    written relative to their own segment endpoint, which makes the grid
    identity exact in floating point.
    """

    name = "staircase"
    dim = 1

    def __init__(self, schedule, max_segments=10**7):
        self.spec = StaircaseSpec(schedule, max_segments)
        # Global infimum sits in segment 0 for nonincreasing m_k.
        self.lower_bound = -3.0 * self.spec.m(0) / 32.0

    def _eval(self, x):
        j = staircase_locate(self.spec, x)
        if j == NEGATIVE_REGION:
            return -x, -1.0
        s_lo = self.spec._prefix[j]
        s_hi = self.spec._prefix[j + 1]
        m = self.spec._m[j]
        base = 0.5 * s_lo
        t = x - s_lo
        if t < m / 16:
            return base - t, -1.0
        if t < 3 * m / 16:
            d = t - m / 8
            return 8.0 / m * d * d - 3 * m / 32 + base, 16.0 / m * d
        a = 5 * m / 16
        if t < m / 2:
            u = t - m / 2
            arg = a / u + 1.0
            if arg < -EXP_CUTOFF:
                return m / 4 + base, 0.0
            e = math.exp(arg)
            return -a * e + m / 4 + base, (a / u) ** 2 * e
        if t == m / 2:
            return m / 4 + base, 0.0
        if t < 13 * m / 16:
            u = t - m / 2
            arg = -a / u + 1.0
            if arg < -EXP_CUTOFF:
                return m / 4 + base, 0.0
            e = math.exp(arg)
            return a * e + m / 4 + base, (a / u) ** 2 * e
        if t < 15 * m / 16:
            d = t - 7 * m / 8
            return -8.0 / m * d * d + 19 * m / 32 + base, -16.0 / m * d
        return 0.5 * s_hi - (x - s_hi), -1.0

    def value(self, x):
        return self._eval(float(np.asarray(x).reshape(-1)[0]))[0]

    def gradient(self, x):
        return np.array([self._eval(float(np.asarray(x).reshape(-1)[0]))[1]])

    def seams(self, j):
        """Sub-piece boundaries of segment ``j`` (including the midpoint)."""
        s = self.spec.prefix(j)
        m = self.spec.m(j)
        return [s + d * m / 16 for d in (1, 3, 8, 13, 15)]


class PalisDeMelo(Objective):
    """Modified Palis-de Melo function on the plane.

    Inside the unit disk ``F = exp(1/(|x|^2 - 1))``; on the circle ``F = 0``;
    outside ``F = -exp(-1/(|x|^2-1)) [sin(c) x1/|x| - cos(c) x2/|x|]`` with
    ``c = 1/(|x| - 1)``. Values and gradients are exactly zero in a thin
    band around the circle where both exponentials underflow.
    """

    name = "palis_de_melo"
    dim = 2
    lower_bound = -1.0

    def value(self, x):
        x1, x2 = (float(v) for v in np.asarray(x).reshape(-1))
        r2 = x1 * x1 + x2 * x2
        s = r2 - 1.0
        if abs(s) < PDM_UNDERFLOW_BAND:
            return 0.0
        if s < 0:
            return math.exp(1.0 / s)
        r = math.sqrt(r2)
        c = 1.0 / (r - 1.0)
        return -math.exp(-1.0 / s) * (math.sin(c) * x1 / r - math.cos(c) * x2 / r)

    def gradient(self, x):
        x1, x2 = (float(v) for v in np.asarray(x).reshape(-1))
        r2 = x1 * x1 + x2 * x2
        s = r2 - 1.0
        if abs(s) < PDM_UNDERFLOW_BAND:
            return np.zeros(2)
        if s < 0:
            f = math.exp(1.0 / s) * (-2.0 / (s * s))
            return np.array([f * x1, f * x2])
        # Polar form F = -e sin(psi), psi = 1/(r-1) - theta, differentiated
        # in (r, theta) and mapped back with the polar basis vectors.
        r = math.sqrt(r2)
        c = 1.0 / (r - 1.0)
        cos_t, sin_t = x1 / r, x2 / r
        sin_c, cos_c = math.sin(c), math.cos(c)
        sin_psi = sin_c * cos_t - cos_c * sin_t
        cos_psi = cos_c * cos_t + sin_c * sin_t
        e = math.exp(-1.0 / s)
        d_r = -e * (2.0 * r / (s * s) * sin_psi - cos_psi * c * c)
        d_t_over_r = e * cos_psi / r
        return np.array(
            [d_r * cos_t - d_t_over_r * sin_t, d_r * sin_t + d_t_over_r * cos_t]
        )


def pdm_theta(x):
    """Polar angle in ``(-pi/2, 3pi/2]`` built from arcsin as in the polar form."""
    x1, x2 = (float(v) for v in np.asarray(x).reshape(-1))
    r = math.hypot(x1, x2)
    a = math.asin(max(-1.0, min(1.0, x2 / r)))
    return a if x1 >= 0 else math.pi - a


def pdm_value_polar(x):
    """``-exp(-1/(r^2-1)) sin(1/(r-1) - theta)`` for ``|x| > 1``."""
    x1, x2 = (float(v) for v in np.asarray(x).reshape(-1))
    r = math.hypot(x1, x2)
    return -math.exp(-1.0 / (r * r - 1.0)) * math.sin(1.0 / (r - 1.0) - pdm_theta(x))


def fd_gradient(obj, x, h=1e-6):
    """Central-difference gradient ``(F(x + h e_i) - F(x - h e_i)) / 2h``."""
    h = check_positive(h, "h")
    x = check_point(x)
    g = np.empty_like(x)
    for i in range(x.size):
        xp = x.copy()
        xm = x.copy()
        xp[i] += h
        xm[i] -= h
        g[i] = (obj.value(xp) - obj.value(xm)) / (2.0 * h)
    if not np.all(np.isfinite(g)):
        raise NonFiniteError(f"finite-difference gradient is not finite at {x}")
    return g


def _ball_points(u_radius, u_dir, z, radius):
    p = z.size
    dirs = norm.ppf(np.clip(u_dir, 1e-12, 1 - 1e-12))
    lengths = np.linalg.norm(dirs, axis=1, keepdims=True)
    lengths[lengths == 0] = 1.0
    dirs = dirs / lengths
    rad = radius * u_radius ** (1.0 / p)
    return z + rad[:, None] * dirs


def estimate_local_constants(obj, z, radius, n, seed=0):
    """Sampling-based lower estimates ``(L_hat, G_hat)`` on the ball ``B(z, radius)``.

    ``G_hat`` is the largest gradient norm over ``n`` scrambled Halton
    points in the ball. ``L_hat`` is the largest difference quotient
    ``|F'(x) - F'(y)| / |x - y|`` over ``n`` pairs whose separations are
    log-uniform between ``1e-4 radius`` and ``2 radius``. Both undershoot
    the true constants.
    """
    z = check_point(z, obj.dim, "z")
    if not (isinstance(radius, (int, float)) and math.isfinite(radius) and radius > 0):
        raise InvalidRadiusError(f"radius must be a finite positive number, got {radius!r}")
    n = check_int(n, "n", minimum=2)
    p = z.size
    sampler = qmc.Halton(d=2 * p + 2, scramble=True, seed=seed)
    u = sampler.random(n)
    xs = _ball_points(u[:, 0], u[:, 1 : p + 1], z, radius)
    grads = np.array([obj.gradient(x) for x in xs])
    g_hat = float(np.max(np.linalg.norm(grads, axis=1)))

    sep = radius * 1e-4 * (2e4) ** u[:, p + 1]
    dirs = norm.ppf(np.clip(u[:, p + 2 : 2 * p + 2], 1e-12, 1 - 1e-12))
    if p == 1:
        dirs = np.where(dirs >= 0, 1.0, -1.0)
    else:
        lengths = np.linalg.norm(dirs, axis=1, keepdims=True)
        lengths[lengths == 0] = 1.0
        dirs = dirs / lengths
    ys = xs + sep[:, None] * dirs
    off = np.linalg.norm(ys - z, axis=1)
    scale = np.where(off > radius, radius / np.where(off > 0, off, 1.0), 1.0)
    ys = z + (ys - z) * scale[:, None]
    l_hat = 0.0
    for x, gx, y in zip(xs, grads, ys):
        d = np.linalg.norm(x - y)
        if d > 0:
            l_hat = max(l_hat, float(np.linalg.norm(gx - obj.gradient(y)) / d))
    return l_hat, g_hat


OBJECTIVES = {
    "exp_neg_square": ExpNegSquare,
    "quadratic_bowl": QuadraticBowl,
    "staircase": Staircase,
    "palis_de_melo": PalisDeMelo,
}

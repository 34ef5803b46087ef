"""Continuous gradient descent ``dy/dt = -F'(y)`` and the Palis-de Melo separatrix.

The integrator is an explicit Dormand-Prince 5(4) pair with PI step-size
control. The dissipation integral ``int |F'(y(s))|^2 ds`` is carried as an
extra state component, so it is computed from the same stage evaluations
as the trajectory and ``F(y(t)) - F(y(0)) + dissipation(t)`` should vanish
up to integration error.
"""

import math
from dataclasses import dataclass

import numpy as np

from ._validation import check_int, check_point, check_positive
from .descent import detect_outcome, run
from .errors import (
    DescentLabError,
    NonFiniteError,
    NotSettledError,
    OriginCrossingError,
    SameClassError,
    StepUnderflowError,
)
from .objectives import PDM_UNDERFLOW_BAND, PalisDeMelo

# Dormand-Prince 5(4) tableau.
_C = (0.0, 1 / 5, 3 / 10, 4 / 5, 8 / 9, 1.0, 1.0)
_A = (
    (),
    (1 / 5,),
    (3 / 40, 9 / 40),
    (44 / 45, -56 / 15, 32 / 9),
    (19372 / 6561, -25360 / 2187, 64448 / 6561, -212 / 729),
    (9017 / 3168, -355 / 33, 46732 / 5247, 49 / 176, -5103 / 18656),
    (35 / 384, 0.0, 500 / 1113, 125 / 192, -2187 / 6784, 11 / 84),
)
_B = np.array(_A[6] + (0.0,))
_E = _B - np.array([5179 / 57600, 0.0, 7571 / 16695, 393 / 640, -92097 / 339200, 187 / 2100, 1 / 40])

_SAFETY = 0.9
_FAC_MIN, _FAC_MAX = 0.2, 10.0
_ALPHA, _BETA = 0.17, 0.04

ORIGIN_GUARD = 0.1
MAX_ANGLE_STEP = math.pi / 4

INNER = "Inner"
OUTER = "Outer"


@dataclass(eq=False)
class FlowTrace:
    """Accepted steps of one gradient-flow solve.

    ``winding[i]`` is the unwrapped change of the polar angle from ``t[0]``
    to ``t[i]`` (2-D only, otherwise ``None``). ``direction`` is ``-1`` for
    a reverse-time (gradient ascent) solve, in which case ``t`` is elapsed
    reverse time.
    """

    t: np.ndarray
    y: np.ndarray
    f: np.ndarray
    grad_norm: np.ndarray
    dissipation: np.ndarray
    winding: np.ndarray | None
    rel_tol: float = math.nan
    abs_tol: float = math.nan
    accepted: int = 0
    rejected: int = 0
    h_min: float = math.nan
    h_max: float = math.nan
    objective: str = ""
    direction: int = 1

    def __len__(self):
        return self.t.size

    @property
    def energy_residual(self):
        """``F(y(T)) - F(y(0)) + direction * dissipation(T)``."""
        return float(self.f[-1] - self.f[0] + self.direction * self.dissipation[-1])

    @classmethod
    def from_points(cls, points, t=None):
        """Build a trace from a hand-made path (no objective attached)."""
        y = np.asarray(points, dtype=float)
        n = y.shape[0]
        t = np.arange(n, dtype=float) if t is None else np.asarray(t, dtype=float)
        zeros = np.zeros(n)
        wind = _winding_of(y) if y.shape[1] == 2 else None
        return cls(t, y, zeros, zeros, zeros, wind)


def _winding_of(points):
    x, y = points[:-1], points[1:]
    cross = x[:, 0] * y[:, 1] - x[:, 1] * y[:, 0]
    dot = x[:, 0] * y[:, 0] + x[:, 1] * y[:, 1]
    return np.concatenate(([0.0], np.cumsum(np.arctan2(cross, dot))))


def _angle_step(a, b):
    return math.atan2(a[0] * b[1] - a[1] * b[0], a[0] * b[0] + a[1] * b[1])


def integrate(obj, x0, T, rel_tol=1e-8, abs_tol=1e-12, *, direction=1, h0=None,
              max_angle_step=MAX_ANGLE_STEP, stop_when=None, max_steps=5_000_000):
    """Solve ``dy/dt = -direction * F'(y)``, ``y(0) = x0`` on ``[0, T]``.

    Parameters
    ----------
    rel_tol, abs_tol
        Mixed local error tolerance per component (trajectory and
        dissipation).
    direction
        ``1`` for gradient descent, ``-1`` for the time-reversed flow.
    max_angle_step
        In 2-D, steps that turn the polar angle by more than this are
        rejected and retried smaller, so consecutive states can be
        unwrapped unambiguously.
    stop_when
        Optional predicate ``(t, y, winding) -> bool`` checked after every
        accepted step; the solve ends at the first step where it is true.
    """
    T = check_positive(T, "T")
    rel_tol = check_positive(rel_tol, "rel_tol")
    abs_tol = check_positive(abs_tol, "abs_tol")
    if direction not in (1, -1):
        raise ValueError("direction must be 1 or -1")
    y = check_point(x0, obj.dim, "x0")
    p = y.size
    planar = p == 2
    sign = -float(direction)
    grad = obj.gradient
    h_floor = 1e-14 * T

    def rhs(state):
        g = grad(state[:p])
        out = np.empty(p + 1)
        out[:p] = sign * g
        out[p] = float(g @ g)
        return out, g

    z = np.append(y, 0.0)
    k_first, g0 = rhs(z)
    ts, ys, fs, gns, ds, ws = [0.0], [y.copy()], [obj.value(y)], [math.sqrt(g0 @ g0)], [0.0], [0.0]

    if h0 is None:
        sc = abs_tol + rel_tol * np.abs(z)
        d0 = np.sqrt(np.mean((z / sc) ** 2))
        d1 = np.sqrt(np.mean((k_first / sc) ** 2))
        h0 = 1e-6 if d0 < 1e-5 or d1 < 1e-5 else 0.01 * d0 / d1
    h = min(float(h0), T)
    t = 0.0
    err_prev = 1e-4
    accepted = rejected = 0
    h_min, h_max = math.inf, 0.0
    winding = 0.0
    k = np.empty((7, p + 1))
    while t < T:
        if accepted + rejected >= max_steps:
            raise DescentLabError(f"integrate exceeded max_steps={max_steps}")
        last = t + h >= T
        if last:
            h = T - t
        k[0] = k_first
        for i in range(1, 7):
            zi = z + h * (np.dot(_A[i], k[:i]))
            k[i], gi = rhs(zi)
        z_new = zi  # seventh stage is evaluated at the 5th-order solution (FSAL)
        if not np.all(np.isfinite(z_new)):
            raise NonFiniteError(f"non-finite state at t = {t + h}")
        err_vec = h * (_E @ k)
        sc = abs_tol + rel_tol * np.maximum(np.abs(z), np.abs(z_new))
        err = math.sqrt(float(np.mean((err_vec / sc) ** 2)))
        turn = _angle_step(z[:2], z_new[:2]) if planar else 0.0
        if err <= 1.0 and abs(turn) <= max_angle_step:
            t = T if last else t + h
            z = z_new
            k_first = k[6]
            accepted += 1
            h_min, h_max = min(h_min, h), max(h_max, h)
            winding += turn
            yc = z[:p].copy()
            ts.append(t)
            ys.append(yc)
            fs.append(obj.value(yc))
            gns.append(math.sqrt(float(gi @ gi)))
            ds.append(float(z[p]))
            ws.append(winding)
            fac = _SAFETY * max(err, 1e-10) ** -_ALPHA * err_prev**_BETA
            h *= min(_FAC_MAX, max(_FAC_MIN, fac))
            err_prev = max(err, 1e-4)
            if stop_when is not None and stop_when(t, yc, winding):
                break
        else:
            rejected += 1
            if err > 1.0:
                h *= max(_FAC_MIN, _SAFETY * err**-0.2)
            else:
                h *= 0.5
        if h < h_floor and t < T:
            raise StepUnderflowError(f"step size {h:.3e} below {h_floor:.3e} at t = {t}")

    return FlowTrace(
        t=np.array(ts), y=np.array(ys), f=np.array(fs), grad_norm=np.array(gns),
        dissipation=np.array(ds), winding=np.array(ws) if planar else None,
        rel_tol=rel_tol, abs_tol=abs_tol, accepted=accepted, rejected=rejected,
        h_min=h_min, h_max=h_max, objective=getattr(obj, "name", ""), direction=direction,
    )


def winding_angle(trace):
    """Total unwrapped change of ``atan2(y2, y1)`` along a planar trace."""
    y = np.asarray(trace.y)
    if y.ndim != 2 or y.shape[1] != 2:
        raise ValueError("winding angle needs a 2-D trajectory")
    if np.min(np.linalg.norm(y, axis=1)) < ORIGIN_GUARD:
        raise OriginCrossingError(f"trajectory comes within {ORIGIN_GUARD} of the origin")
    return float(_winding_of(y)[-1])


def points_winding(points):
    """Cumulative unwrapped polar angle along a sequence of planar points."""
    y = np.asarray(points, dtype=float)
    if np.min(np.linalg.norm(y, axis=1)) < ORIGIN_GUARD:
        raise OriginCrossingError(f"path comes within {ORIGIN_GUARD} of the origin")
    return _winding_of(y)


@dataclass(frozen=True)
class AnnulusRegion:
    """Spiral band ``1 + 1/(2 pi + theta) < r < 1 + 1/(pi + theta)``, ``theta >= 0``."""

    def inner(self, theta):
        return 1.0 + 1.0 / (2 * math.pi + theta)

    def outer(self, theta):
        return 1.0 + 1.0 / (math.pi + theta)

    def contains(self, r, theta):
        r, theta = np.asarray(r, dtype=float), np.asarray(theta, dtype=float)
        with np.errstate(divide="ignore", invalid="ignore"):
            inside = (theta >= 0) & (self.inner(theta) < r) & (r < self.outer(theta))
        return inside if inside.ndim else bool(inside)

    def first_exit(self, trace):
        """Index of the first state outside the band, or ``None``."""
        r, theta = _polar_unwrapped(trace)
        out = np.nonzero(~self.contains(r, theta))[0]
        return int(out[0]) if out.size else None


def _polar_unwrapped(trace):
    y = np.asarray(trace.y)
    theta0 = math.atan2(y[0, 1], y[0, 0])
    wind = trace.winding if trace.winding is not None else _winding_of(y)
    return np.linalg.norm(y, axis=1), theta0 + np.asarray(wind)


def pdm_phase(trace):
    """Unwrapped phase ``1/(|y| - 1) - theta`` at the end of a trace."""
    r, theta = _polar_unwrapped(trace)
    return 1.0 / (r[-1] - 1.0) - theta[-1]


def classify_pdm_trajectory(trace, settle_tol=0.1):
    """Which valley a settled Palis-de Melo trajectory has fallen into.

    The phase ``psi = 1/(|y| - 1) - theta`` uses the *unwrapped* angle.
    Inside the band ``pi < psi < 2 pi`` the function is positive with its
    ridge at ``psi = 3 pi / 2``; trajectories leave across the inner zero
    spiral (``psi`` grows past ``2 pi``) or across the outer one (``psi``
    drops below ``pi``). Reducing ``psi`` modulo ``2 pi`` would map both
    valleys to the same residue, so it is not reduced.

    Raises :class:`NotSettledError` if the end state is still in the band,
    inside the underflow ring around the unit circle, or has gradient norm
    at least ``settle_tol``.
    """
    y_end = trace.y[-1]
    r2 = float(y_end @ y_end)
    if r2 - 1.0 < PDM_UNDERFLOW_BAND:
        raise NotSettledError(f"end state |y|^2 = {r2:.6g} is not outside the unit circle band")
    if trace.grad_norm[-1] >= settle_tol:
        raise NotSettledError(
            f"gradient norm {trace.grad_norm[-1]:.3e} >= settle_tol {settle_tol:g} at T"
        )
    psi = pdm_phase(trace)
    if math.pi < psi < 2 * math.pi:
        raise NotSettledError(f"trajectory still inside the band (psi = {psi:.6f})")
    return INNER if psi > 1.5 * math.pi else OUTER


def default_bracket(margin=1e-4):
    return 1.0 + 1.0 / (2 * math.pi) + margin, 1.0 + 1.0 / math.pi - margin


@dataclass(frozen=True)
class SeparatrixBracket:
    lo: float
    hi: float
    lo_class: str
    hi_class: str
    iters: int
    initial_width: float

    @property
    def r_star(self):
        return 0.5 * (self.lo + self.hi)

    @property
    def width(self):
        return self.hi - self.lo


def _classify_start(r, T, rel_tol, abs_tol, settle_tol):
    tr = integrate(PalisDeMelo(), (r, 0.0), T, rel_tol, abs_tol)
    return classify_pdm_trajectory(tr, settle_tol)


def bisect_separatrix_bracket(lo=None, hi=None, T=100.0, iters=40, rel_tol=1e-10,
                              abs_tol=1e-13, settle_tol=0.1, margin=1e-4):
    """Bisect the starting abscissa ``(r, 0)`` between the two valley classes."""
    dlo, dhi = default_bracket(margin)
    lo = dlo if lo is None else float(lo)
    hi = dhi if hi is None else float(hi)
    iters = check_int(iters, "iters", minimum=0)
    c_lo = _classify_start(lo, T, rel_tol, abs_tol, settle_tol)
    c_hi = _classify_start(hi, T, rel_tol, abs_tol, settle_tol)
    if c_lo == c_hi:
        raise SameClassError(lo, hi, c_lo, c_hi)
    w0 = hi - lo
    for _ in range(iters):
        mid = 0.5 * (lo + hi)
        if _classify_start(mid, T, rel_tol, abs_tol, settle_tol) == c_lo:
            lo = mid
        else:
            hi = mid
    return SeparatrixBracket(lo, hi, c_lo, c_hi, iters, w0)


def bisect_separatrix(lo=None, hi=None, T=100.0, iters=40, **kwargs):
    """Starting abscissa of the separatrix, as the midpoint of the final bracket."""
    return bisect_separatrix_bracket(lo, hi, T, iters, **kwargs).r_star


@dataclass(frozen=True)
class SeparatrixProfile:
    """Separatrix recovered by integrating the reversed flow back to ``theta = 0``.

    Reversed in time, the separatrix attracts nearby states, so this is the
    numerically stable way to follow it through many turns. ``forward_time``
    gives, for each stored state, the forward flow time from ``(r_star, 0)``.
    """

    trace: FlowTrace
    r_star: float
    travel_time: float
    theta: np.ndarray
    forward_time: np.ndarray

    def winding_at(self, T):
        """Winding of the forward separatrix solution after time ``T``."""
        if T > self.travel_time:
            raise ValueError(f"profile only covers forward times up to {self.travel_time:g}")
        ft, th = self.forward_time[::-1], self.theta[::-1]
        return float(np.interp(T, ft, th))


def separatrix_profile(theta_end=2 * math.pi, rel_tol=1e-10, abs_tol=1e-14, t_max=1e7):
    """Follow the Palis-de Melo separatrix from unwrapped angle ``theta_end`` back to 0."""
    theta_end = check_positive(theta_end, "theta_end")
    r0 = 1.0 + 1.0 / (1.5 * math.pi + theta_end)
    x0 = (r0 * math.cos(theta_end), r0 * math.sin(theta_end))

    def reached_axis(t, y, w):
        return w <= -theta_end

    tr = integrate(PalisDeMelo(), x0, t_max, rel_tol, abs_tol, direction=-1,
                   stop_when=reached_axis)
    theta = theta_end + tr.winding
    if theta[-1] > 0:
        raise DescentLabError("reverse-time solve ended before returning to theta = 0")
    # Linear interpolation of the axis crossing between the last two states.
    w = theta[-2] / (theta[-2] - theta[-1])
    r = np.linalg.norm(tr.y, axis=1)
    r_star = float(r[-2] + w * (r[-1] - r[-2]))
    travel = float(tr.t[-2] + w * (tr.t[-1] - tr.t[-2]))
    return SeparatrixProfile(tr, r_star, travel, theta, travel - tr.t)


@dataclass(frozen=True)
class ContrastReport:
    r_star: float
    outcome: object
    discrete_trace: object
    discrete_winding: float
    discrete_tail_winding: float
    discrete_first_exit: int | None
    flow_trace: FlowTrace
    continuous_winding: float
    continuous_first_exit_time: float | None
    separatrix_winding: float | None

    def lines(self):
        exit_t = self.continuous_first_exit_time
        out = [
            f"r_star = {self.r_star:.17g}",
            f"discrete outcome = {self.outcome.kind} "
            f"(final |grad| = {self.outcome.final_grad_norm:.6e}, "
            f"final |x| = {self.outcome.final_norm:.6g})",
            f"discrete winding = {self.discrete_winding:.6g} rad, "
            f"tail increment = {self.discrete_tail_winding:.3e} rad",
            f"discrete first iterate outside band = {self.discrete_first_exit}",
            f"continuous winding = {self.continuous_winding:.6g} rad "
            f"over T = {self.flow_trace.t[-1]:g}",
            "continuous first exit time = "
            + ("none" if exit_t is None else f"{exit_t:.6g}"),
        ]
        if self.separatrix_winding is not None:
            out.append(f"reverse-time separatrix winding at T = {self.separatrix_winding:.6g} rad")
        return out


def contrast_discrete(r_star, s, budget, T=200.0, *, tol_x=None, tol_g=1e-3,
                      escape_radius=None, tail_fraction=0.1, rel_tol=1e-10, abs_tol=1e-13,
                      separatrix=None):
    """Discrete descent versus the continuous flow from ``(r_star, 0)``.

    ``separatrix`` may be a :class:`SeparatrixProfile`; its winding at
    ``T`` is then included as the reference for the true solution.
    """
    if s.tags.q_summable is None:
        raise ValueError(f"schedule {s.name!r} is not tagged q-summable")
    obj = PalisDeMelo()
    trace = run(obj, s, (r_star, 0.0), budget)
    outcome = detect_outcome(trace, tol_x=tol_x, tol_g=tol_g, escape_radius=escape_radius,
                             tail_fraction=tail_fraction)
    wind = points_winding(trace.x)
    n_tail = math.ceil(tail_fraction * len(trace))
    tail_wind = float(abs(wind[-1] - wind[len(trace) - n_tail]))
    band = AnnulusRegion()
    r = np.linalg.norm(trace.x, axis=1)
    d_exit = np.nonzero(~band.contains(r, wind))[0]

    flow = integrate(obj, (r_star, 0.0), T, rel_tol, abs_tol)
    c_exit = band.first_exit(flow)
    sep_w = None
    if separatrix is not None and T <= separatrix.travel_time:
        sep_w = separatrix.winding_at(T)
    return ContrastReport(
        r_star=float(r_star), outcome=outcome, discrete_trace=trace,
        discrete_winding=float(wind[-1]), discrete_tail_winding=tail_wind,
        discrete_first_exit=int(d_exit[0]) if d_exit.size else None,
        flow_trace=flow, continuous_winding=float(flow.winding[-1]),
        continuous_first_exit_time=float(flow.t[c_exit]) if c_exit is not None else None,
        separatrix_winding=sep_w,
    )

"""scikit-learn style wrappers around :func:`run` and :func:`integrate`.

``fit`` takes the starting point as ``X``; there is no ``y``. Fitted
attributes carry a trailing underscore, and ``get_params``/``set_params``
come from :class:`sklearn.base.BaseEstimator`.
"""

from sklearn.base import BaseEstimator
from sklearn.utils.validation import check_is_fitted

from ._validation import check_point
from .descent import DEFAULT_TAIL_FRACTION, DEFAULT_TOL_G, detect_outcome, run
from .flow import integrate
from .objectives import OBJECTIVES
from .schedules import SCHEDULES


def build_objective(name, params=None):
    try:
        factory = OBJECTIVES[name]
    except KeyError:
        raise ValueError(f"unknown objective {name!r}; choose from {sorted(OBJECTIVES)}") from None
    return factory(**(params or {}))


def build_schedule(name, params=None):
    try:
        factory = SCHEDULES[name]
    except KeyError:
        raise ValueError(f"unknown schedule {name!r}; choose from {sorted(SCHEDULES)}") from None
    return factory(**(params or {}))


class GradientDescent(BaseEstimator):
    """Discrete descent with a step-matrix schedule.

    Parameters mirror :func:`run` and :func:`detect_outcome`. ``objective``
    and ``schedule`` may be registry names (with ``*_params``) or ready
    instances.
    """

    def __init__(self, objective="quadratic_bowl", objective_params=None, schedule="power",
                 schedule_params=None, budget=1000, tol_x=None, tol_g=DEFAULT_TOL_G,
                 escape_radius=None, tail_fraction=DEFAULT_TAIL_FRACTION):
        self.objective = objective
        self.objective_params = objective_params
        self.schedule = schedule
        self.schedule_params = schedule_params
        self.budget = budget
        self.tol_x = tol_x
        self.tol_g = tol_g
        self.escape_radius = escape_radius
        self.tail_fraction = tail_fraction

    def _resolve(self):
        obj = self.objective
        if isinstance(obj, str):
            obj = build_objective(obj, self.objective_params)
        s = self.schedule
        if isinstance(s, str):
            s = build_schedule(s, self.schedule_params)
        return obj, s

    def fit(self, X, y=None):
        obj, s = self._resolve()
        x0 = check_point(X, obj.dim, "X")
        self.objective_, self.schedule_ = obj, s
        self.trace_ = run(obj, s, x0, self.budget)
        self.outcome_ = detect_outcome(self.trace_, self.tol_x, self.tol_g,
                                       self.escape_radius, self.tail_fraction)
        self.x_ = self.trace_.x[-1].copy()
        self.n_iter_ = len(self.trace_) - 1
        return self

    def score(self, X=None, y=None):
        """Negative final objective value (larger is better)."""
        check_is_fitted(self, "trace_")
        return -float(self.trace_.f[-1])


class GradientFlow(BaseEstimator):
    """Continuous descent ``dy/dt = -F'(y)`` over ``[0, T]``."""

    def __init__(self, objective="quadratic_bowl", objective_params=None, T=1.0,
                 rel_tol=1e-8, abs_tol=1e-12):
        self.objective = objective
        self.objective_params = objective_params
        self.T = T
        self.rel_tol = rel_tol
        self.abs_tol = abs_tol

    def fit(self, X, y=None):
        obj = self.objective
        if isinstance(obj, str):
            obj = build_objective(obj, self.objective_params)
        x0 = check_point(X, obj.dim, "X")
        self.objective_ = obj
        self.trace_ = integrate(obj, x0, self.T, self.rel_tol, self.abs_tol)
        self.y_ = self.trace_.y[-1].copy()
        return self

    def score(self, X=None, y=None):
        check_is_fitted(self, "trace_")
        return -float(self.trace_.f[-1])

"""Step matrices and their eigenvalue extremes.

Three storage forms are supported: a scalar multiple of the identity, a
diagonal, and a dense symmetric matrix. Extremes are computed once at
construction, so schedule diagnostics only ever read two floats.
"""

import math

import numpy as np

from .errors import DimensionMismatchError, NonFiniteError, NonSymmetricError

SCALAR = "scalar"
DIAGONAL = "diagonal"
DENSE = "dense"

SYMMETRY_RTOL = 1e-12
JACOBI_RTOL = 1e-14
JACOBI_MAX_SWEEPS = 100


def _check_symmetric(a):
    if not np.all(np.isfinite(a)):
        raise NonFiniteError("matrix has non-finite entries")
    if a.ndim != 2 or a.shape[0] != a.shape[1] or a.shape[0] < 1:
        raise DimensionMismatchError(f"expected a square matrix, got shape {a.shape}")
    scale = np.max(np.abs(a))
    asym = np.max(np.abs(a - a.T))
    if asym > SYMMETRY_RTOL * scale:
        raise NonSymmetricError(
            f"matrix is not symmetric: max |M_ij - M_ji| = {asym:.3e}"
        )


def jacobi_eigenvalues(a, rtol=JACOBI_RTOL, max_sweeps=JACOBI_MAX_SWEEPS):
    """All eigenvalues of a symmetric matrix by cyclic Jacobi rotations.

    Sweeps continue until the off-diagonal Frobenius norm drops below
    ``rtol`` times the Frobenius norm of the input. The lower triangle of
    ``a`` is authoritative.
    """
    a = np.array(a, dtype=np.float64)
    n = a.shape[0]
    a = np.tril(a) + np.tril(a, -1).T
    scale = np.linalg.norm(a)
    if scale == 0.0:
        return np.zeros(n)
    for _ in range(max_sweeps):
        off = math.sqrt(2.0) * np.linalg.norm(np.tril(a, -1))
        if off < rtol * scale:
            break
        for p in range(n - 1):
            for q in range(p + 1, n):
                apq = a[p, q]
                if apq == 0.0:
                    continue
                diff = a[q, q] - a[p, p]
                if abs(diff) > 1e30 * abs(apq):
                    # Rotation angle below 1e-30: drop the entry, avoiding tau overflow.
                    a[p, q] = a[q, p] = 0.0
                    continue
                # Rutishauser's stable form of the 2x2 symmetric Schur rotation.
                tau = diff / (2.0 * apq)
                t = math.copysign(1.0, tau) / (abs(tau) + math.hypot(1.0, tau))
                c = 1.0 / math.sqrt(1.0 + t * t)
                s = t * c
                ap = a[:, p].copy()
                aq = a[:, q].copy()
                a[:, p] = c * ap - s * aq
                a[:, q] = s * ap + c * aq
                rp = a[p, :].copy()
                rq = a[q, :].copy()
                a[p, :] = c * rp - s * rq
                a[q, :] = s * rp + c * rq
                a[p, q] = a[q, p] = 0.0
    return np.sort(np.diag(a))


class StepMatrix:
    """Immutable symmetric step matrix with cached extreme eigenvalues.

    Use the :meth:`scalar`, :meth:`diagonal` and :meth:`dense` constructors.
    A scalar matrix has no fixed dimension and applies to vectors of any
    length.
    """

    __slots__ = ("form", "data", "dim", "lambda_min", "lambda_max")

    def __init__(self, form, data, dim, lambda_min, lambda_max):
        object.__setattr__(self, "form", form)
        object.__setattr__(self, "data", data)
        object.__setattr__(self, "dim", dim)
        object.__setattr__(self, "lambda_min", lambda_min)
        object.__setattr__(self, "lambda_max", lambda_max)

    def __setattr__(self, name, value):
        raise AttributeError("StepMatrix is immutable")

    @classmethod
    def scalar(cls, c):
        c = float(c)
        if not math.isfinite(c):
            raise NonFiniteError(f"scalar step {c!r} is not finite")
        return cls(SCALAR, c, None, c, c)

    @classmethod
    def diagonal(cls, d):
        d = np.array(d, dtype=np.float64).reshape(-1)
        if d.size == 0:
            raise DimensionMismatchError("diagonal must be non-empty")
        if not np.all(np.isfinite(d)):
            raise NonFiniteError("diagonal has non-finite entries")
        d.setflags(write=False)
        return cls(DIAGONAL, d, d.size, float(d.min()), float(d.max()))

    @classmethod
    def dense(cls, m):
        m = np.array(m, dtype=np.float64)
        _check_symmetric(m)
        m = np.tril(m) + np.tril(m, -1).T
        m.setflags(write=False)
        eig = jacobi_eigenvalues(m)
        return cls(DENSE, m, m.shape[0], float(eig[0]), float(eig[-1]))

    def to_dense(self, dim=None):
        dim = self.dim if dim is None else dim
        if self.form == SCALAR:
            if dim is None:
                raise DimensionMismatchError("a scalar step matrix needs an explicit dim")
            return self.data * np.eye(dim)
        if self.form == DIAGONAL:
            return np.diag(self.data)
        return np.array(self.data)

    def apply(self, v):
        return apply(self, v)

    def __repr__(self):
        if self.form == SCALAR:
            return f"StepMatrix.scalar({self.data!r})"
        return f"StepMatrix.{self.form}({self.data.tolist()!r})"


def eigen_extremes(m):
    """Return ``(lambda_min, lambda_max)``.

    ``m`` may be a :class:`StepMatrix` (cached values are returned) or an
    array-like symmetric matrix, which is checked and decomposed by Jacobi
    sweeps.
    """
    if isinstance(m, StepMatrix):
        return m.lambda_min, m.lambda_max
    a = np.array(m, dtype=np.float64)
    _check_symmetric(a)
    eig = jacobi_eigenvalues(a)
    return float(eig[0]), float(eig[-1])


def is_spd(m, tol=0.0):
    return m.lambda_min > tol


def apply(m, v):
    """Matrix-vector product ``M v`` without materialising scalar/diagonal forms."""
    v = np.asarray(v, dtype=np.float64)
    if m.form == SCALAR:
        return m.data * v
    if v.shape != (m.dim,):
        raise DimensionMismatchError(
            f"step matrix of dimension {m.dim} applied to vector of shape {v.shape}"
        )
    if m.form == DIAGONAL:
        return m.data * v
    return m.data @ v

"""Discrete Riemann-Liouville integral and Caputo derivative on uniform grids."""

import math
from dataclasses import dataclass

import numpy as np

from .errors import DomainError, PreconditionError

STARTUP_SKIP = 5


@dataclass(frozen=True)
class SampledPath:
    """State samples ``values[k] = x(k*h)``; ``values`` has shape (K+1, n)."""

    h: float
    values: np.ndarray

    def __post_init__(self):
        v = np.asarray(self.values, dtype=float)
        if v.ndim == 1:
            v = v[:, None]
        if v.ndim != 2 or v.shape[0] == 0:
            raise DomainError("values must be a nonempty sequence of equal-length vectors")
        if not self.h > 0:
            raise DomainError(f"h must be positive, got {self.h}")
        object.__setattr__(self, "values", v)

    @property
    def dimension(self):
        return self.values.shape[1]

    @property
    def times(self):
        return self.h * np.arange(len(self.values))

    def __len__(self):
        return len(self.values)


def _check_order(q):
    if not 0 < q < 1:
        raise DomainError(f"fractional order must lie in (0, 1), got {q}")


def rl_integral(path, q):
    """Product-rectangle approximation of the Riemann-Liouville integral I^q.

    On each cell the data is replaced by its midpoint value (mean of the two
    endpoint samples) and the kernel ``(t_k - s)**(q-1)`` is integrated exactly.
    """
    _check_order(q)
    f = path.values
    K = len(f) - 1
    out = np.zeros_like(f)
    if K == 0:
        return SampledPath(path.h, out)
    mid = 0.5 * (f[:-1] + f[1:])
    m = np.arange(K + 1, dtype=float)
    # w[l] integrates the kernel over the cell whose right end is l steps back
    w = path.h**q * (m[1:] ** q - m[:-1] ** q) / q
    for k in range(1, K + 1):
        out[k] = w[:k][::-1] @ mid[:k]
    return SampledPath(path.h, out / math.gamma(q))


def caputo_derivative(path, q):
    """L1 scheme for the Caputo derivative of order q in (0, 1).

    ``D^q f(t_k) ~ h^{-q}/Gamma(2-q) * sum_j b_{k-1-j} (f_{j+1} - f_j)`` with
    ``b_m = (m+1)^{1-q} - m^{1-q}``.  Exact for piecewise-linear data.
    """
    _check_order(q)
    f = path.values
    if len(f) < 3:
        raise DomainError("caputo_derivative needs at least 3 samples")
    K = len(f) - 1
    df = np.diff(f, axis=0)
    m = np.arange(K + 1, dtype=float)
    b = m[1:] ** (1 - q) - m[:-1] ** (1 - q)
    out = np.zeros_like(f)
    for k in range(1, K + 1):
        out[k] = b[:k][::-1] @ df[:k]
    return SampledPath(path.h, out / (path.h**q * math.gamma(2 - q)))


def deterministic_residual(traj, system, skip=STARTUP_SKIP):
    """Max norm of ``D^q x - A x - f(t, x)`` over interior grid points.

    Only meaningful when the system has no diffusion and no jumps; the first
    ``skip`` points are skipped because the L1 scheme is least accurate there.
    For a fixed number of skipped points the residual does not shrink with h
    on solutions behaving like t^q near 0; skip a fixed time span instead
    (``skip = round(t0 / h)``) to observe convergence.
    """
    if skip < 1:
        raise DomainError("skip must be at least 1")
    if not system.is_deterministic:
        raise PreconditionError(
            "deterministic_residual requires sigma and g to be identically zero"
        )
    if hasattr(traj, "grid"):
        traj = traj.grid
    d = caputo_derivative(traj, system.q).values
    t = traj.times
    worst = 0.0
    for k in range(skip, len(t)):
        x = traj.values[k]
        r = d[k] - system.A @ x - system.f(t[k], x)
        worst = max(worst, float(np.linalg.norm(r)))
    return worst

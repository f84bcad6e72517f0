"""Reproducible random drivers: Wiener increments, marked Poisson jumps, Ito sums."""

import math
import warnings
from dataclasses import dataclass, field

import numpy as np

from .errors import AccuracyError, DomainError
from .fracops import SampledPath

_MASK64 = (1 << 64) - 1

# disjoint Philox counter ranges per consumer of a stream
PURPOSE_WIENER = 1
PURPOSE_JUMPS = 2


@dataclass(frozen=True)
class RngStream:
    """Counter-based random stream keyed by ``(seed, stream_id)``.

    Draws come from a Philox generator whose 128-bit key is the pair, and
    whose counter is offset by a purpose tag so that e.g. the jump draws of a
    path never depend on how many Wiener draws it made.
    """

    seed: int
    stream_id: int = 0

    def __post_init__(self):
        for name in ("seed", "stream_id"):
            v = getattr(self, name)
            if not 0 <= int(v) <= _MASK64:
                raise DomainError(f"{name} must be a 64-bit unsigned integer, got {v}")

    def generator(self, purpose=0):
        key = (int(self.stream_id) << 64) | int(self.seed)
        counter = [0, 0, 0, int(purpose)]
        return np.random.Generator(np.random.Philox(key=key, counter=counter))


@dataclass(frozen=True)
class JumpMeasure:
    """Finite jump measure ``intensity * P(d eta)``.

    ``marks`` is either a sequence of ``(value, probability)`` atoms or a
    ``(family, a, b)`` triple with family ``"uniform"`` or ``"gaussian"``.
    """

    intensity: float
    marks: tuple = ((1.0, 1.0),)

    def __post_init__(self):
        if not math.isfinite(self.intensity):
            raise DomainError("jump intensity must be finite")
        if self.intensity < 0:
            raise DomainError(f"jump intensity must be >= 0, got {self.intensity}")
        marks = self.marks
        if isinstance(marks, tuple) and len(marks) == 3 and isinstance(marks[0], str):
            fam, a, b = marks
            if fam == "uniform" and not a < b:
                raise DomainError("uniform(a, b) needs a < b")
            if fam == "gaussian" and not b > 0:
                raise DomainError("gaussian(m, s) needs s > 0")
            if fam not in ("uniform", "gaussian"):
                raise DomainError(f"unknown mark family {fam!r}")
            if fam == "uniform" and a < 0 or fam == "gaussian":
                warnings.warn("jump marks may be negative", stacklevel=2)
            return
        atoms = tuple((float(v), float(pr)) for v, pr in marks)
        if not atoms:
            raise DomainError("discrete mark distribution is empty")
        if any(pr < 0 for _, pr in atoms):
            raise DomainError("mark probabilities must be nonnegative")
        if abs(sum(pr for _, pr in atoms) - 1.0) > 1e-12:
            raise DomainError("mark probabilities must sum to 1")
        if any(v < 0 for v, _ in atoms):
            warnings.warn("jump marks include negative values", stacklevel=2)
        object.__setattr__(self, "marks", atoms)

    @property
    def family(self):
        if isinstance(self.marks[0], str):
            return self.marks[0]
        return "discrete"

    def quadrature(self):
        """Nodes and weights (summing to 1) for integrating against the marks."""
        fam = self.family
        if fam == "discrete":
            return (np.array([v for v, _ in self.marks]), np.array([pr for _, pr in self.marks]))
        _, a, b = self.marks
        if fam == "uniform":
            x, w = np.polynomial.legendre.leggauss(64)
            return 0.5 * (b - a) * x + 0.5 * (a + b), 0.5 * w
        x, w = np.polynomial.hermite_e.hermegauss(64)
        return a + b * x, w / math.sqrt(2 * math.pi)

    def sample_marks(self, rng, size):
        fam = self.family
        if fam == "discrete":
            vals = np.array([v for v, _ in self.marks])
            if len(vals) == 1:
                return np.full(size, vals[0])
            probs = np.array([pr for _, pr in self.marks])
            return rng.choice(vals, size=size, p=probs / probs.sum())
        _, a, b = self.marks
        if fam == "uniform":
            return rng.uniform(a, b, size)
        return rng.normal(a, b, size)


@dataclass(frozen=True)
class JumpRecord:
    times: np.ndarray = field(default_factory=lambda: np.zeros(0))
    marks: np.ndarray = field(default_factory=lambda: np.zeros(0))

    def __post_init__(self):
        t = np.asarray(self.times, dtype=float)
        m = np.asarray(self.marks, dtype=float)
        if t.shape != m.shape:
            raise DomainError("jump times and marks must have equal length")
        if np.any(np.diff(t) <= 0):
            raise DomainError("jump times must be strictly increasing")
        object.__setattr__(self, "times", t)
        object.__setattr__(self, "marks", m)

    def __len__(self):
        return len(self.times)


def wiener_increments(dimension, steps, h, stream):
    """(steps, dimension) array of independent N(0, h) increments."""
    if dimension < 1 or steps < 1:
        raise DomainError("dimension and steps must be positive")
    if not h > 0:
        raise DomainError(f"h must be positive, got {h}")
    rng = stream.generator(PURPOSE_WIENER)
    return math.sqrt(h) * rng.standard_normal((steps, dimension))


def sample_jumps(measure, T, stream):
    """Realize the marked Poisson process on (0, T]."""
    if not T > 0:
        raise DomainError("T must be positive")
    rng = stream.generator(PURPOSE_JUMPS)
    count = int(rng.poisson(measure.intensity * T)) if measure.intensity > 0 else 0
    if count == 0:
        return JumpRecord()
    # 1 - U maps [0, 1) onto (0, 1]
    times = np.sort(T * (1.0 - rng.random(count)))
    marks = measure.sample_marks(rng, count)
    return JumpRecord(times, marks)


def _ito_sum(sig, dW):
    """Running left-point sums of sig[j] @ dW[j]; sig is (K, n, m), dW is (K, m)."""
    incr = np.einsum("kij,kj->ki", sig, dW)
    out = np.zeros((len(dW) + 1, sig.shape[1]))
    np.cumsum(incr, axis=0, out=out[1:])
    return out


def ito_path(sigma_spec, x_path, dW):
    """``I(t_k) = sum_{j<k} sigma(t_j, x_j) dW_j`` with I(t_0) = 0."""
    dW = np.asarray(dW, dtype=float)
    if dW.ndim == 1:
        dW = dW[:, None]
    K = len(dW)
    if len(x_path) < K:
        raise DomainError(f"path has {len(x_path)} samples but {K} increments were given")
    t = x_path.times
    sig = np.array([np.atleast_2d(sigma_spec(t[j], x_path.values[j])) for j in range(K)])
    if sig.shape[2] != dW.shape[1]:
        raise DomainError(
            f"sigma has {sig.shape[2]} columns but the Wiener process has dimension {dW.shape[1]}"
        )
    return SampledPath(x_path.h, _ito_sum(sig, dW))


def mark_average(g_spec, t, x, measure):
    """``int g(t, x, eta) Pi(d eta)`` = intensity * E[g(t, x, eta)]."""
    if measure.intensity == 0:
        return np.zeros_like(np.asarray(x, dtype=float))
    nodes, weights = measure.quadrature()
    x = np.asarray(x, dtype=float)
    shape = (len(nodes),) + x.shape
    # builtins broadcast over a column of marks; anything else is evaluated per node
    vals = np.asarray(g_spec(t, x, nodes[:, None]))
    if vals.shape != shape:
        vals = np.array([g_spec(t, x, eta) for eta in nodes])
    vals = np.broadcast_to(vals, shape)
    out = measure.intensity * (weights @ vals)
    if not np.all(np.isfinite(out)):
        raise AccuracyError("mark quadrature produced a non-finite value")
    return out


def compensator_path(g_spec, x_path, measure):
    """``C(t_k) = sum_{j<k} h * int g(t_j, x_j, eta) Pi(d eta)`` with C(t_0) = 0."""
    if not math.isfinite(measure.intensity):
        raise DomainError("compensator needs a finite intensity")
    t = x_path.times
    vals = x_path.values
    out = np.zeros_like(vals)
    for j in range(len(vals) - 1):
        out[j + 1] = out[j] + x_path.h * mark_average(g_spec, t[j], vals[j], measure)
    return SampledPath(x_path.h, out)

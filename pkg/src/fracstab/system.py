"""Problem description: the fractional stochastic system and its nonlinearities."""

import math
import warnings
from dataclasses import dataclass, field

import numpy as np

from .errors import DomainError
from .stochastic import JumpMeasure

ROLES = ("f", "sigma", "g")

# 1/(1 - t) in the worked example is clamped here to stay finite at t = 1
EXAMPLE_T_CLAMP = 1.0 - 1e-6


def _arity(name, n):
    return {
        "zero": 0,
        "linear": n * n,
        "paper_example_f": 0,
        "paper_example_sigma": 2,
        "paper_example_g": 0,
        "saturated_quadratic": 1,
    }[name]


def _f_zero(t, x, p):
    return np.zeros_like(x)


def _f_linear(t, x, p):
    return p.reshape(len(x), len(x)) @ x


def _f_example(t, x, p):
    t = min(t, EXAMPLE_T_CLAMP)
    return np.array([-x[1] ** 2, -x[0] ** 2]) / (1.0 - t)


def _f_satq(t, x, p):
    return -p[0] * x * np.abs(x) / (1.0 + x * x)


def _s_zero(t, x, p):
    return np.zeros((len(x), len(x)))


def _s_linear(t, x, p):
    return np.diag(p.reshape(len(x), len(x)) @ x)


def _s_example(t, x, p):
    return np.diag([-p[0] * x[0], -p[1] * x[1]])


def _s_satq(t, x, p):
    return np.diag(p[0] * x * x / (1.0 + x * x))


def _g_zero(t, x, eta, p):
    return np.zeros_like(x)


def _g_linear(t, x, eta, p):
    return eta * (p.reshape(len(x), len(x)) @ x)


def _g_example(t, x, eta, p):
    return -(0.2 - t) * x * math.exp(-t) / eta


def _g_satq(t, x, eta, p):
    return p[0] * eta * x * x / (1.0 + x * x)


_REGISTRY = {
    "f": {
        "zero": _f_zero,
        "linear": _f_linear,
        "paper_example_f": _f_example,
        "saturated_quadratic": _f_satq,
    },
    "sigma": {
        "zero": _s_zero,
        "linear": _s_linear,
        "paper_example_sigma": _s_example,
        "saturated_quadratic": _s_satq,
    },
    "g": {
        "zero": _g_zero,
        "linear": _g_linear,
        "paper_example_g": _g_example,
        "saturated_quadratic": _g_satq,
    },
}


def builtin_names(role):
    return sorted(_REGISTRY[role])


@dataclass(frozen=True)
class Nonlinearity:
    """A named builtin nonlinearity with its parameter vector.

    Callable as ``f(t, x)`` / ``sigma(t, x)`` (an n x n matrix) or
    ``g(t, x, eta)`` depending on ``role``.

    ``linear`` takes the n*n entries of a matrix M (row-major): f = M x,
    sigma = diag(M x), g = eta * M x.  ``saturated_quadratic`` takes a single
    gain c.  The ``paper_example_*`` family is the two-dimensional worked
    example and needs n = 2.
    """

    role: str
    name: str = "zero"
    params: tuple = ()
    n: int = 2

    def __post_init__(self):
        if self.role not in ROLES:
            raise DomainError(f"unknown nonlinearity role {self.role!r}")
        if self.name not in _REGISTRY[self.role]:
            raise DomainError(
                f"unknown {self.role} nonlinearity {self.name!r}; "
                f"choose from {builtin_names(self.role)}"
            )
        params = tuple(float(v) for v in self.params)
        need = _arity(self.name, self.n)
        if len(params) != need:
            raise DomainError(
                f"{self.role} nonlinearity {self.name!r} takes {need} parameters, got {len(params)}"
            )
        if self.name.startswith("paper_example") and self.n != 2:
            raise DomainError(f"{self.name} is defined for n = 2 only")
        object.__setattr__(self, "params", params)
        object.__setattr__(self, "_fn", _REGISTRY[self.role][self.name])
        object.__setattr__(self, "_p", np.array(params))

    @property
    def is_zero(self):
        if self.name == "zero":
            return True
        return self.name in ("linear", "paper_example_sigma", "saturated_quadratic") and not any(
            self.params
        )

    def __call__(self, t, x, *eta):
        return self._fn(t, np.asarray(x, dtype=float), *eta, self._p)

    def __reduce__(self):
        return (Nonlinearity, (self.role, self.name, self.params, self.n))


@dataclass(frozen=True, eq=False)
class FracSystem:
    """``D^q x = A x + f(t,x) + int_0^t sigma dw + int g dN~``, x(0) = x0 on [0, T]."""

    q: float
    A: np.ndarray
    x0: np.ndarray
    T: float
    f: Nonlinearity = None
    sigma: Nonlinearity = None
    g: Nonlinearity = None
    jump_measure: JumpMeasure = field(default_factory=lambda: JumpMeasure(0.0))
    override_q_range: bool = False

    def __post_init__(self):
        A = np.atleast_2d(np.asarray(self.A, dtype=float))
        x0 = np.atleast_1d(np.asarray(self.x0, dtype=float))
        n = len(x0)
        if n < 1:
            raise DomainError("dimension must be >= 1")
        if A.shape != (n, n):
            raise DomainError(f"A must be {n}x{n}, got {A.shape}")
        if not self.T > 0:
            raise DomainError(f"T must be positive, got {self.T}")
        if not 0.5 < self.q < 1:
            if not self.override_q_range:
                raise DomainError(
                    f"q = {self.q} violates the standing assumption 1/2 < q < 1 "
                    "(set override_q_range to proceed)"
                )
            if not 0 < self.q <= 1:
                raise DomainError(f"q must lie in (0, 1], got {self.q}")
            warnings.warn(f"q = {self.q} is outside (1/2, 1); proceeding under override",
                          stacklevel=2)
        object.__setattr__(self, "A", A)
        object.__setattr__(self, "x0", x0)
        for role in ROLES:
            h = getattr(self, role)
            if h is None:
                h = Nonlinearity(role, "zero", (), n)
            elif h.n != n:
                h = Nonlinearity(h.role, h.name, h.params, n)
            object.__setattr__(self, role, h)

    @property
    def n(self):
        return len(self.x0)

    def __eq__(self, other):
        if not isinstance(other, FracSystem):
            return NotImplemented
        return (
            self.q == other.q
            and self.T == other.T
            and np.array_equal(self.A, other.A)
            and np.array_equal(self.x0, other.x0)
            and (self.f, self.sigma, self.g) == (other.f, other.sigma, other.g)
            and self.jump_measure == other.jump_measure
            and self.override_q_range == other.override_q_range
        )

    @property
    def is_deterministic(self):
        return self.sigma.is_zero and (self.g.is_zero or self.jump_measure.intensity == 0)

    def replace(self, **changes):
        kw = {k: getattr(self, k) for k in self.__dataclass_fields__}
        kw.update(changes)
        return FracSystem(**kw)


def example4_system(q=0.6, sigma1=9.8, sigma2=10.0, x0=(0.5, 0.5), intensity=1.0, T=1.0,
                    override_q_range=False):
    """The two-dimensional worked example with diagonal A = -0.1 I and atom eta = 1."""
    return FracSystem(
        q=q,
        A=np.diag([-0.1, -0.1]),
        x0=np.asarray(x0, dtype=float),
        T=T,
        f=Nonlinearity("f", "paper_example_f", (), 2),
        sigma=Nonlinearity("sigma", "paper_example_sigma", (sigma1, sigma2), 2),
        g=Nonlinearity("g", "paper_example_g", (), 2),
        jump_measure=JumpMeasure(intensity, ((1.0, 1.0),)),
        override_q_range=override_q_range,
    )

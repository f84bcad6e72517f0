"""Existence, stability and exponential-stability certificates.

Two evaluation modes are supported:

``rectified`` (default)
    Lipschitz moduli enter through the norms of their absolute values, as
    the hypotheses require nonnegative moduli.
``verbatim-replication``
    Reproduces the printed arithmetic of the worked example, including its
    negative "norms", the factor ``3 T^{2q} / 0.5^2 * N2`` and the plain sum of
    the three norms.  Only M (and Q1 = 8/3 M) use that recipe.
"""

import math
from dataclasses import dataclass
from typing import Callable, Optional, Sequence, Union

import numpy as np
from scipy import integrate

from .errors import DomainError, InfeasibleError

RECTIFIED = "rectified"
VERBATIM = "verbatim-replication"
MODES = (RECTIFIED, VERBATIM)

SIMPSON_INTERVALS = 1000
# divisor printed in the worked example's first factor, 3 (T^{2q} / 0.5^2) N2
PRINTED_DIVISOR = 0.5

TimeFunction = Union[float, Sequence[float], Callable[[float], float]]


def _as_callable(L):
    if callable(L):
        return L
    if np.ndim(L) == 0:
        c = float(L)
        return lambda t: c + 0.0 * np.asarray(t, dtype=float)
    coeffs = np.asarray(L, dtype=float)
    return lambda t: np.polynomial.polynomial.polyval(t, coeffs)


def _is_constant(L):
    if callable(L):
        return False
    return np.ndim(L) == 0 or np.size(L) == 1


def lbeta_norm(L, beta_exp, T, notes=None, name="L"):
    """``(int_0^T |L(s)|^beta ds)^(1/beta)``.

    Constants use the closed form ``|c| T^(1/beta)``; polynomial coefficient
    lists and callables use composite Simpson on 1000 subintervals.  A
    negative modulus appends a warning to ``notes``.
    """
    if not beta_exp > 1:
        raise DomainError(f"integrability exponent beta must exceed 1, got {beta_exp}")
    if not T > 0:
        raise DomainError("T must be positive")
    if _is_constant(L):
        c = float(np.ravel([L])[0]) if not np.ndim(L) == 0 else float(L)
        if c < 0 and notes is not None:
            notes.append(f"{name} is negative ({c:g}); using |{name}| (moduli must be >= 0)")
        return abs(c) * T ** (1.0 / beta_exp)
    fn = _as_callable(L)
    s = np.linspace(0.0, T, SIMPSON_INTERVALS + 1)
    vals = np.asarray(fn(s), dtype=float) * np.ones_like(s)
    if np.any(vals < 0) and notes is not None:
        notes.append(
            f"{name}(t) takes negative values (min {vals.min():g}); using |{name}| "
            "(moduli must be >= 0)"
        )
    return float(integrate.simpson(np.abs(vals) ** beta_exp, x=s) ** (1.0 / beta_exp))


@dataclass
class HypothesisConstants:
    """Inputs to the certificate: moduli, envelope constants and growth bounds.

    ``L_*`` are time functions (constant, polynomial coefficients in t, or a
    callable).  ``*_norm`` optionally carry printed L^beta norms; these are
    used as-is in verbatim-replication mode.
    """

    L_f: Optional[TimeFunction] = None
    L_sigma: Optional[TimeFunction] = None
    L_g: Optional[TimeFunction] = None
    beta_exp: float = 2.0
    alpha_exp: Optional[float] = None
    N1: float = 1.0
    N2: float = 1.0
    omega: float = 1.0
    R_f: float = 0.0
    R_sigma: float = 0.0
    R_g: float = 0.0
    V_f: float = 0.0
    V_sigma: float = 0.0
    V_g: float = 0.0
    c_p: float = 1.0
    E_x0_sq: float = 0.0
    L_f_norm: Optional[float] = None
    L_sigma_norm: Optional[float] = None
    L_g_norm: Optional[float] = None

    def __post_init__(self):
        if not self.beta_exp > 1:
            raise DomainError(f"beta_exp must exceed 1, got {self.beta_exp}")
        if self.alpha_exp is None:
            self.alpha_exp = self.beta_exp / (self.beta_exp - 1.0)
        if not self.alpha_exp > 1:
            raise DomainError(f"alpha_exp must exceed 1, got {self.alpha_exp}")
        if abs(1.0 / self.alpha_exp + 1.0 / self.beta_exp - 1.0) > 1e-12:
            raise DomainError("alpha_exp and beta_exp must be Hoelder conjugates")

    def input_warnings(self):
        out = []
        if self.N1 < 1 or self.N2 < 1:
            out.append(f"envelope constants must be >= 1 (N1 = {self.N1:g}, N2 = {self.N2:g})")
        if not self.omega > 0:
            out.append(f"envelope rate omega = {self.omega:g} is not positive")
        for name in ("R_f", "R_sigma", "R_g", "V_f", "V_sigma", "V_g", "c_p", "E_x0_sq"):
            v = getattr(self, name)
            if v < 0:
                out.append(f"{name} = {v:g} is negative but bounds a squared norm")
        for name in ("L_f_norm", "L_sigma_norm", "L_g_norm"):
            v = getattr(self, name)
            if v is not None and v < 0:
                out.append(f"printed {name} = {v:g} is negative; a norm cannot be negative")
        return out


def _check_q(q):
    if not 2 * q - 1 > 0:
        raise DomainError(f"the certificate needs 2q - 1 > 0 (q > 1/2), got q = {q}")


def _bracket(omega, scale, T):
    """(1 - exp(-2 omega T scale)) / (2 omega scale), continuous at omega = 0."""
    x = 2.0 * omega * scale
    if x == 0:
        return T
    return -math.expm1(-x * T) / x


def norms(hc, T, mode=RECTIFIED, notes=None):
    """The three L^beta norms used by the certificate, per evaluation mode.

    Verbatim mode prefers printed norms; rectified mode prefers the moduli
    themselves and falls back to the magnitude of a printed norm.
    """
    out = []
    for name in ("L_f", "L_sigma", "L_g"):
        L = getattr(hc, name)
        printed = getattr(hc, name + "_norm")
        if mode == VERBATIM and printed is not None:
            out.append(float(printed))
        elif L is not None:
            out.append(lbeta_norm(L, hc.beta_exp, T, notes, name))
        elif printed is not None:
            if printed < 0 and notes is not None:
                notes.append(f"printed {name} norm {printed:g} is negative; using its magnitude")
            out.append(abs(float(printed)))
        else:
            out.append(0.0)
    return tuple(out)


def _weights(q, T):
    w1 = T ** (2 * q - 1) / (2 * q - 1)
    w2 = T ** (2 * q) / q**2
    return w1, w2


def _lipschitz_sum(hc, q, T, mode, notes):
    nf, ns, ng = norms(hc, T, mode, notes)
    w1, w2 = _weights(q, T)
    return w1 * nf + w2 * ns + w1 * hc.c_p * ng


def compute_Q1(hc, q, T, mode=RECTIFIED, notes=None):
    _check_q(q)
    if mode == VERBATIM:
        return 8.0 / 3.0 * compute_M(hc, q, T, mode, notes)
    a = hc.alpha_exp
    return 8 * hc.N2**2 * _bracket(hc.omega, a, T) ** (1 / a) * _lipschitz_sum(hc, q, T, mode, notes)


def compute_Q2(hc, q, T, mode=RECTIFIED, notes=None):
    _check_q(q)
    w1, w2 = _weights(q, T)
    growth = w1 * hc.R_f + w2 * hc.R_sigma + w1 * hc.c_p * hc.R_g
    return 8 * hc.N2**2 * _bracket(hc.omega, 1.0, T) * growth


def printed_m_factors(hc, q, T, notes=None):
    """The three factors of M as printed in the worked example.

    ``3 T^{2q} / 0.5^2 * N2``, the envelope bracket ``[...]^{1/alpha}`` and
    the unweighted sum of the (printed) norms.
    """
    _check_q(q)
    first = 3.0 * T ** (2 * q) / PRINTED_DIVISOR**2 * hc.N2
    a = hc.alpha_exp
    second = _bracket(hc.omega, a, T) ** (1 / a)
    nf, ns, ng = norms(hc, T, VERBATIM, notes)
    third = nf + ns + hc.c_p * ng
    return first, second, third


def compute_M(hc, q, T, mode=RECTIFIED, notes=None):
    """Contraction constant; M < 1 (with Q1 < 1) certifies a unique solution."""
    _check_q(q)
    if mode == VERBATIM:
        a, b, c = printed_m_factors(hc, q, T, notes)
        return a * b * c
    a = hc.alpha_exp
    return 3 * hc.N2**2 * _bracket(hc.omega, a, T) ** (1 / a) * _lipschitz_sum(hc, q, T, mode, notes)


def _radius(hc, T, E_x0_sq, Q1, Q2):
    return (4 * hc.N1**2 * math.exp(-2 * hc.omega * T) * E_x0_sq + Q2) / (1 - Q1)


def fixed_point_radius(hc, q, T, mode=RECTIFIED, notes=None, Q1=None, Q2=None):
    """Radius r of the invariant ball: (4 N1^2 e^{-2 omega T} E|x0|^2 + Q2) / (1 - Q1)."""
    Q1 = compute_Q1(hc, q, T, mode) if Q1 is None else Q1
    Q2 = compute_Q2(hc, q, T, mode) if Q2 is None else Q2
    if Q1 >= 1:
        raise InfeasibleError(f"no invariant ball: Q1 = {Q1:.6g} >= 1")
    return _radius(hc, T, hc.E_x0_sq, Q1, Q2)


def stability_delta(hc, q, T, epsilon, mode=RECTIFIED, notes=None, Q1=None, Q2=None):
    """Largest E|x0|^2 keeping the invariant radius within epsilon."""
    if not epsilon > 0:
        raise DomainError("epsilon must be positive")
    Q1 = compute_Q1(hc, q, T, mode) if Q1 is None else Q1
    Q2 = compute_Q2(hc, q, T, mode) if Q2 is None else Q2
    if Q1 >= 1:
        raise InfeasibleError(f"stability margin undefined: Q1 = {Q1:.6g} >= 1")
    scale = 4 * hc.N1**2 * math.exp(-2 * hc.omega * T)
    delta = (epsilon * (1 - Q1) - Q2) / scale
    if not delta > 0:
        eps_min = Q2 / (1 - Q1)
        raise InfeasibleError(
            f"epsilon = {epsilon:g} is infeasible; need epsilon > Q2/(1 - Q1) = {eps_min:.6g}",
            minimal=eps_min,
        )
    back = _radius(hc, T, delta, Q1, Q2)
    if abs(back - epsilon) > 1e-12 * max(1.0, epsilon):
        raise AssertionError(f"delta round trip failed: r(delta) = {back!r}, epsilon = {epsilon!r}")
    return delta


@dataclass(frozen=True)
class ExpRate:
    beta_rate: float
    nu: float
    M1: float
    bound_fn: Callable[[float], float]

    def __iter__(self):
        return iter((self.beta_rate, self.nu, self.M1, self.bound_fn))


def exp_rate(hc, q, T, r, notes=None):
    """Exponential-stability constants; ``nu / 2 = omega - 2 beta_rate``."""
    _check_q(q)
    if not r >= 0:
        raise DomainError(f"r must be >= 0, got {r}")
    w1, w2 = _weights(q, T)
    beta_rate = hc.N2**2 * (w1 * (hc.V_f + hc.c_p * hc.V_g) * (1 + r) + w2 * hc.V_sigma * (1 + r))
    half_nu = hc.omega - 2 * beta_rate
    M1 = 4 * hc.N1**2
    if hc.omega > beta_rate and half_nu <= 0 and notes is not None:
        notes.append(
            f"omega = {hc.omega:g} > beta_rate = {beta_rate:g} holds but the resulting decay "
            f"rate nu/2 = omega - 2 beta_rate = {half_nu:g} is not positive"
        )
    x0sq = hc.E_x0_sq

    def bound_fn(t):
        return M1 * x0sq * np.exp(-half_nu * np.asarray(t, dtype=float))

    return ExpRate(beta_rate, 2 * half_nu, M1, bound_fn)


@dataclass(frozen=True)
class StabilityCertificate:
    Q1: float
    Q2: float
    M: float
    r: float
    delta: float
    beta_rate: float
    nu: float
    M1: float
    contraction_ok: bool
    exp_stable_ok: bool
    warnings: tuple = ()
    mode: str = RECTIFIED
    norms: tuple = ()
    m_factors: tuple = ()
    epsilon: Optional[float] = None

    def as_pairs(self):
        """Flat (key, value) pairs in report order."""
        pairs = [
            ("mode", self.mode),
            ("q1", self.Q1),
            ("q2", self.Q2),
            ("m", self.M),
            ("r", self.r),
            ("delta", self.delta),
            ("beta_rate", self.beta_rate),
            ("nu", self.nu),
            ("m1", self.M1),
            ("contraction_ok", self.contraction_ok),
            ("exp_stable_ok", self.exp_stable_ok),
        ]
        if self.epsilon is not None:
            pairs.append(("epsilon", self.epsilon))
        for i, v in enumerate(self.norms):
            pairs.append((("norm_l_f", "norm_l_sigma", "norm_l_g")[i], v))
        for i, v in enumerate(self.m_factors):
            pairs.append((f"m_factor{i + 1}", v))
        for i, w in enumerate(self.warnings):
            pairs.append((f"warnings[{i}]", w))
        return pairs


def _fmt(v):
    if isinstance(v, bool):
        return "true" if v else "false"
    if isinstance(v, float):
        return f"{v:.10g}"
    return str(v)


def format_report(cert):
    """Aligned ``key = value`` text, one entry per line."""
    pairs = cert.as_pairs()
    width = max(len(k) for k, _ in pairs)
    return "\n".join(f"{k:<{width}} = {_fmt(v)}" for k, v in pairs) + "\n"


def format_flat(cert):
    """Machine-readable ``key=value`` lines."""
    return "\n".join(f"{k}={_fmt(v)}" for k, v in cert.as_pairs()) + "\n"


def build_certificate(hc, q=None, T=None, mode=RECTIFIED, epsilon=None):
    """Evaluate every certificate quantity and collect verdicts and warnings.

    ``hc`` may also be a parsed config, in which case q, T, mode and epsilon
    default to the config's values.
    """
    if hasattr(hc, "hypothesis"):
        cfg = hc
        hc = cfg.hypothesis
        q = cfg.system.q if q is None else q
        T = cfg.system.T if T is None else T
        mode = cfg.mode
        epsilon = cfg.epsilon if epsilon is None else epsilon
    if mode not in MODES:
        raise DomainError(f"unknown mode {mode!r}; choose from {MODES}")
    notes = list(hc.input_warnings())
    nrm = norms(hc, T, mode, notes)
    factors = printed_m_factors(hc, q, T) if mode == VERBATIM else ()
    M = compute_M(hc, q, T, mode)
    Q1 = compute_Q1(hc, q, T, mode)
    Q2 = compute_Q2(hc, q, T, mode)
    if M < 0:
        notes.append(f"contraction constant M = {M:.6g} is negative, which is impossible for "
                     "nonnegative moduli; M < 1 holds only formally")
    contraction_ok = M < 1 and Q1 < 1
    if mode == RECTIFIED and not contraction_ok:
        notes.append(f"contraction condition fails: M = {M:.6g}, Q1 = {Q1:.6g}")
    r = math.nan
    delta = math.nan
    try:
        r = fixed_point_radius(hc, q, T, mode, Q1=Q1, Q2=Q2)
    except InfeasibleError as exc:
        notes.append(str(exc))
    if not math.isnan(r) and r <= 0:
        notes.append(f"fixed-point radius r = {r:.6g} is not positive")
    if epsilon is not None and Q1 < 1:
        try:
            delta = stability_delta(hc, q, T, epsilon, mode, Q1=Q1, Q2=Q2)
        except InfeasibleError as exc:
            notes.append(str(exc))
    rate = exp_rate(hc, q, T, max(r, 0.0) if not math.isnan(r) else 0.0, notes)
    exp_ok = hc.omega > rate.beta_rate
    return StabilityCertificate(
        Q1=Q1,
        Q2=Q2,
        M=M,
        r=r,
        delta=delta,
        beta_rate=rate.beta_rate,
        nu=rate.nu,
        M1=rate.M1,
        contraction_ok=contraction_ok,
        exp_stable_ok=exp_ok,
        warnings=tuple(dict.fromkeys(notes)),
        mode=mode,
        norms=nrm,
        m_factors=factors,
        epsilon=epsilon,
    )

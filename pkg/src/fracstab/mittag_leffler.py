"""Two-parameter Mittag-Leffler function E_{q,p}(z) for scalar and matrix arguments.

Small arguments are summed directly from the power series with a rigorous
tail bound.  Large arguments (or arguments where the series suffers from
cancellation) go through numerical inversion of the Laplace transform
``s**(q-p) / (s**q - z)`` along an optimal parabolic contour, following
R. Garrappa, SIAM J. Numer. Anal. 53 (2015).
"""

import cmath
import math
from dataclasses import dataclass

import numpy as np
from scipy import integrate

from .errors import AccuracyError, DomainError, FitError, StabilityPreconditionError

EPS = float(np.finfo(float).eps)
LOG_EPS = math.log(EPS)

DEFAULT_CROSSOVER = 5.0
DEFAULT_MAX_TERMS = 1000
SERIES_TOL = 1e-12
MATRIX_SERIES_TOL = 1e-10
COND_CUTOFF = 1e8

# error target of the contour quadrature and the bound we report for it
_LT_TARGET = 1e-15
_LT_BOUND = 1e-13


@dataclass(frozen=True)
class MLEvaluation:
    value: complex
    truncation_bound: float
    terms_used: int

    def __post_init__(self):
        if not self.truncation_bound >= 0:
            raise ValueError("truncation_bound must be >= 0")
        if self.terms_used < 1:
            raise ValueError("terms_used must be >= 1")


@dataclass(frozen=True)
class MLEnvelope:
    n_const: float
    omega: float
    max_violation: float


def _check_params(q, p):
    for name, v in (("q", q), ("p", p)):
        if not math.isfinite(v) or v <= 0:
            raise DomainError(f"{name} must be a finite positive real, got {v!r}")


def _series(q, p, z, max_terms):
    """Sum the power series; return (value, tail bound, rounding bound, terms)."""
    az = abs(z)
    if z == 0:
        v = 1.0 / math.gamma(p)
        return complex(v), 0.0, 4 * EPS * v, 1
    logz = cmath.log(z)
    log_az = logz.real
    total = 0j
    abs_sum = 0.0
    re_parts, im_parts = [], []
    for k in range(max_terms):
        x = k * q + p
        if x < 170.0 and k * log_az < 700.0:
            term = z**k / math.gamma(x) if k else complex(1.0 / math.gamma(p))
        else:
            term = cmath.exp(k * logz - math.lgamma(x))
        total += term
        re_parts.append(term.real)
        im_parts.append(term.imag)
        mag = abs(term)
        abs_sum += mag
        # ratio |t_{k+1}/t_k| is nonincreasing in k (log-convexity of Gamma),
        # so once it drops below 1 the tail is dominated by a geometric series
        ratio = az * math.exp(math.lgamma(x) - math.lgamma(x + q))
        if ratio < 1.0:
            nxt = mag * ratio
            tail = nxt / (1.0 - ratio)
            if tail <= 0.25 * EPS * max(abs(total), EPS * abs_sum, 1e-300):
                # exactly rounded sum of the computed terms
                total = complex(math.fsum(re_parts), math.fsum(im_parts))
                return total, tail, 20 * EPS * abs_sum, k + 1
    ratio = az * math.exp(math.lgamma(x) - math.lgamma(x + q))
    tail = abs(term) * ratio / (1.0 - ratio) if ratio < 1.0 else math.inf
    total = complex(math.fsum(re_parts), math.fsum(im_parts))
    return total, tail, 20 * EPS * abs_sum, max_terms


# --- Laplace-transform inversion --------------------------------------------


def _optimal_bounded(phi_j, phi_j1, pj, qj, log_eps):
    """Contour parameters for a region bounded by two singularities."""
    fac = 1.01
    f_max = math.exp(log_eps - LOG_EPS)
    sq_j = math.sqrt(phi_j)
    threshold = 2.0 * math.sqrt(log_eps - LOG_EPS)
    sq_j1 = min(math.sqrt(phi_j1), threshold - sq_j)
    if pj < 1e-14 and qj < 1e-14:
        sqb_j, sqb_j1, f_bar = sq_j, sq_j1, 1.0
    elif pj < 1e-14:
        f_min = fac * (sq_j / (sq_j1 - sq_j)) ** qj if sq_j > 0 else fac
        if f_min >= f_max:
            return None
        f_bar = f_min + f_min / f_max * (f_max - f_min)
        fq = f_bar ** (-1.0 / qj)
        sqb_j = sq_j
        sqb_j1 = (2 * sq_j1 - fq * sq_j) / (2 + fq)
    elif qj < 1e-14:
        f_min = fac * (sq_j1 / (sq_j1 - sq_j)) ** pj
        if f_min >= f_max:
            return None
        f_bar = f_min + f_min / f_max * (f_max - f_min)
        fp = f_bar ** (-1.0 / pj)
        sqb_j = (2 * sq_j + fp * sq_j1) / (2 - fp)
        sqb_j1 = sq_j1
    else:
        f_min = fac * (sq_j + sq_j1) / (sq_j1 - sq_j) ** max(pj, qj)
        if f_min >= f_max:
            return None
        f_min = max(f_min, 1.5)
        f_bar = f_min + f_min / f_max * (f_max - f_min)
        fp = f_bar ** (-1.0 / pj)
        fq = f_bar ** (-1.0 / qj)
        w = -phi_j1 / log_eps
        den = 2 + w - (1 + w) * fp + fq
        sqb_j = ((2 + w + fq) * sq_j + fp * sq_j1) / den
        sqb_j1 = (-(1 + w) * fq * sq_j + (2 + w - (1 + w) * fp) * sq_j1) / den
    log_eps = log_eps - math.log(f_bar)
    w = -(sqb_j1**2) / log_eps
    mu = (((1 + w) * sqb_j + sqb_j1) / (2 + w)) ** 2
    h = -2 * math.pi / log_eps * (sqb_j1 - sqb_j) / ((1 + w) * sqb_j + sqb_j1)
    if h <= 0 or mu <= 0:
        return None
    n = math.ceil(math.sqrt(1 - log_eps / mu) / h)
    return mu, h, n


def _optimal_unbounded(phi_j, pj, log_eps):
    """Contour parameters for the region to the right of the last singularity."""
    sq_phi = math.sqrt(phi_j)
    phib = phi_j * 1.01 if phi_j > 0 else 0.01
    sqb = math.sqrt(phib)
    f_min, f_max, f_tar = 1.0, 10.0, 5.0
    for _ in range(100):
        log_eps_phi = log_eps / phib
        n = math.ceil(phib / math.pi * (1 - 1.5 * log_eps_phi + math.sqrt(1 - 2 * log_eps_phi)))
        a = math.pi * n / phib
        sq_mu = sqb * abs(4 - a) / abs(7 - math.sqrt(1 + 12 * a))
        fbar = ((sqb - sq_phi) / sq_mu) ** (-pj)
        if pj < 1e-14 or f_min < fbar < f_max:
            break
        sqb = f_tar ** (-1.0 / pj) * sq_mu + sq_phi
        phib = sqb**2
    mu = sq_mu**2
    h = (-3 * a - 2 + 2 * math.sqrt(1 + 12 * a)) / (4 - a) / n
    threshold = log_eps - LOG_EPS
    if mu > threshold:
        qq = 0.0 if abs(pj) < 1e-14 else f_tar ** (-1.0 / pj) * math.sqrt(mu)
        phib = (qq + sq_phi) ** 2
        if phib < threshold:
            w = math.sqrt(LOG_EPS / (LOG_EPS - log_eps))
            u = math.sqrt(-phib / LOG_EPS)
            mu = threshold
            n = math.ceil(w * log_eps / 2 / math.pi / (u * w - 1))
            h = math.sqrt(LOG_EPS / (LOG_EPS - log_eps)) / n
        else:
            return None
    return mu, h, n


def _laplace_inversion(q, p, z, tol=_LT_TARGET):
    """E_{q,p}(z) for 0 < q <= 1 by contour inversion; returns (value, nodes)."""
    log_eps = math.log(tol)
    theta = cmath.phase(z)
    kmin = math.ceil(-q / 2 - theta / (2 * math.pi))
    kmax = math.floor(q / 2 - theta / (2 * math.pi))
    r = abs(z) ** (1.0 / q)
    poles = [r * cmath.exp(1j * (theta + 2 * k * math.pi) / q) for k in range(kmin, kmax + 1)]
    poles = [s for s in poles if (s.real + abs(s)) / 2 > 1e-15]
    poles.sort(key=lambda s: (s.real + abs(s)) / 2)
    s_star = [0j] + poles
    phi = [0.0] + [(s.real + abs(s)) / 2 for s in poles]
    nsing = len(s_star)
    strength_p = [max(0.0, -2 * (q - p + 1))] + [1.0] * (nsing - 1)
    strength_q = [1.0] * (nsing - 1) + [math.inf]
    phi.append(math.inf)
    admissible = [
        j for j in range(nsing) if phi[j] < log_eps - LOG_EPS and phi[j] < phi[j + 1]
    ]
    if not admissible:
        raise AccuracyError("no admissible integration region for contour inversion")
    while True:
        best = None
        for j in admissible:
            if j < nsing - 1:
                par = _optimal_bounded(phi[j], phi[j + 1], strength_p[j], strength_q[j], log_eps)
            else:
                par = _optimal_unbounded(phi[j], strength_p[j], log_eps)
            if par is not None and (best is None or par[2] < best[1][2]):
                best = (j, par)
        if best is not None and best[1][2] <= 200:
            break
        log_eps += math.log(10.0)
        if log_eps > math.log(1e-6):
            raise AccuracyError("contour inversion failed to find parameters", bound=1e-6)
    j, (mu, h, n) = best
    u = h * np.arange(-n, n + 1)
    s = mu * (1j * u + 1) ** 2
    ds = -2 * mu * u + 2j * mu
    f = np.exp(s) * s ** (q - p) / (s**q - z) * ds
    value = h * np.sum(f) / (2j * math.pi)
    # poles enclosed by the contour contribute their residues
    for s_pole in s_star[j + 1 :]:
        value += (1.0 / q) * s_pole ** (1 - p) * cmath.exp(s_pole)
    return complex(value), 2 * n + 1


def _large_argument(q, p, z):
    if q <= 1.0:
        return _laplace_inversion(q, p, z)
    # E_{q,p}(z) = (1/m) sum_k E_{q/m,p}(z^(1/m) e^(2 pi i k/m)) with q/m <= 1
    m = math.ceil(q)
    root = complex(z) ** (1.0 / m)
    total = 0j
    nodes = 0
    for k in range(m):
        v, n = _laplace_inversion(q / m, p, root * cmath.exp(2j * math.pi * k / m))
        total += v
        nodes += n
    return total / m, nodes


def ml_scalar(q, p, z, crossover=DEFAULT_CROSSOVER, max_terms=DEFAULT_MAX_TERMS):
    """Evaluate E_{q,p}(z) = sum_k z**k / Gamma(k*q + p).

    Returns an :class:`MLEvaluation` whose ``truncation_bound`` bounds the
    absolute error and is at most ``1e-12 * max(1, |value|)``.
    """
    _check_params(q, p)
    z = complex(z)
    if not (math.isfinite(z.real) and math.isfinite(z.imag)):
        raise DomainError(f"argument must be finite, got {z!r}")
    series_bound = math.inf
    if abs(z) <= crossover:
        value, tail, rnd, terms = _series(q, p, z, max_terms)
        series_bound = tail + rnd
        if series_bound <= SERIES_TOL * max(1.0, abs(value)):
            return MLEvaluation(value, series_bound, terms)
    if q > 2.0 and abs(z) > crossover:
        raise AccuracyError(f"no large-argument method for q={q} > 2", bound=series_bound)
    try:
        value, nodes = _large_argument(q, p, z)
    except (AccuracyError, OverflowError, ZeroDivisionError) as exc:
        bound = getattr(exc, "bound", series_bound)
        raise AccuracyError(
            f"E_{{{q},{p}}}({z}) did not converge within {max_terms} terms", bound=bound
        ) from exc
    if not (math.isfinite(value.real) and math.isfinite(value.imag)):
        raise AccuracyError(f"E_{{{q},{p}}}({z}) overflowed", bound=math.inf)
    return MLEvaluation(value, _LT_BOUND * max(1.0, abs(value)), nodes)


def ml_value(q, p, z):
    """Shortcut returning only the (real if possible) value of E_{q,p}(z)."""
    v = ml_scalar(q, p, z).value
    return v.real if v.imag == 0.0 else v


# --- matrix argument ---------------------------------------------------------


def _matrix_series(q, p, B, max_terms):
    n = B.shape[0]
    nb = np.linalg.norm(B, 2)
    total = np.eye(n) / math.gamma(p)
    power = np.eye(n)
    abs_sum = abs(1.0 / math.gamma(p))
    for k in range(1, max_terms):
        power = power @ B
        x = k * q + p
        coef = math.exp(-math.lgamma(x))
        total = total + coef * power
        bound_term = nb**k * coef
        abs_sum += bound_term
        ratio = nb * math.exp(math.lgamma(x) - math.lgamma(x + q))
        if ratio < 1.0:
            tail = bound_term * ratio / (1 - ratio)
            if tail < 0.1 * MATRIX_SERIES_TOL:
                err = tail + 50 * n * EPS * abs_sum
                if err > MATRIX_SERIES_TOL * max(1.0, np.linalg.norm(total, 2)):
                    raise AccuracyError(
                        "matrix Mittag-Leffler series loses too much to cancellation", bound=err
                    )
                return total
    raise AccuracyError(f"matrix series did not converge in {max_terms} terms")


def ml_matrix(q, p, A, t_pow, max_terms=DEFAULT_MAX_TERMS):
    """Evaluate the matrix function E_{q,p}(A * t_pow) (real part)."""
    _check_params(q, p)
    A = np.asarray(A, dtype=float)
    if A.ndim != 2 or A.shape[0] != A.shape[1]:
        raise DomainError(f"A must be square, got shape {A.shape}")
    if not t_pow >= 0:
        raise DomainError(f"t_pow must be >= 0, got {t_pow!r}")
    B = A * t_pow
    n = A.shape[0]
    if np.count_nonzero(B - np.diag(np.diag(B))) == 0:
        out = np.zeros((n, n))
        for i in range(n):
            out[i, i] = ml_scalar(q, p, B[i, i]).value.real
        return out
    lam, V = np.linalg.eig(A)
    if np.linalg.cond(V) < COND_CUTOFF:
        d = np.array([ml_scalar(q, p, complex(l) * t_pow).value for l in lam])
        return np.real(V @ np.diag(d) @ np.linalg.inv(V))
    return _matrix_series(q, p, B, max_terms)


# --- envelope fit -------------------------------------------------------------


def _norm_curve(q, p, A, times):
    return np.array([np.linalg.norm(ml_matrix(q, p, A, t**q), 2) for t in times])


def fit_envelope(q, p, A, horizon, grid_points, tol=1e-10):
    """Fit the exponential envelope ``||E_{q,p}(A t^q)|| <= N exp(-omega t)``.

    omega ranges over (0, omega_max], omega_max the smallest spectral decay
    rate ``-Re(lambda)`` of A.  For each omega the smallest admissible
    ``N(omega) = max(1, max_t ||E|| e^{omega t})`` is taken and omega is chosen by
    golden-section search to make the envelope tightest at the horizon, i.e.
    to minimise ``log N(omega) - omega * horizon`` (a convex function).  The
    result is certified on a 10x refined grid.
    """
    if not 0 < q <= 1:
        raise DomainError(f"q must lie in (0, 1], got {q}")
    if not horizon > 0:
        raise DomainError("horizon must be positive")
    if grid_points < 1:
        raise DomainError("grid_points must be positive")
    A = np.asarray(A, dtype=float)
    if A.ndim != 2 or A.shape[0] != A.shape[1]:
        raise DomainError(f"A must be square, got shape {A.shape}")
    lam = np.linalg.eigvals(A)
    if np.any(lam.real >= 0):
        raise StabilityPreconditionError(
            f"all eigenvalues of A must have negative real part, got {lam}"
        )
    omega_max = float(np.min(-lam.real))
    times = np.linspace(0.0, horizon, grid_points + 1)
    log_norms = np.log(_norm_curve(q, p, A, times))

    def log_n(omega):
        return max(0.0, float(np.max(log_norms + omega * times)))

    def objective(omega):
        return log_n(omega) - omega * horizon

    # golden-section over (0, omega_max]
    g = (math.sqrt(5) - 1) / 2
    lo, hi = 0.0, omega_max
    c, d = hi - g * (hi - lo), lo + g * (hi - lo)
    fc, fd = objective(c), objective(d)
    while hi - lo > tol * max(1.0, omega_max):
        if fc <= fd:
            hi, d, fd = d, c, fc
            c = hi - g * (hi - lo)
            fc = objective(c)
        else:
            lo, c, fc = c, d, fd
            d = lo + g * (hi - lo)
            fd = objective(d)
    candidates = [(objective(w), -w, w) for w in (lo, hi, omega_max) if w > 0]
    omega = min(candidates)[2]
    n_const = math.exp(log_n(omega))

    fine = np.linspace(0.0, horizon, 10 * grid_points + 1)
    norms = _norm_curve(q, p, A, fine)
    env = n_const * np.exp(-omega * fine)
    excess = float(np.max((norms - env) / env))
    if excess > 0:
        n_const *= 1.0 + excess
        env = n_const * np.exp(-omega * fine)
        excess = float(np.max((norms - env) / env))
        if excess > 0:
            n_const *= 1.0 + 2 * excess
            env = n_const * np.exp(-omega * fine)
            excess = float(np.max((norms - env) / env))
    if n_const > 1e6:
        raise FitError(f"envelope needs N = {n_const:.3g} > 1e6")
    return MLEnvelope(n_const=n_const, omega=omega, max_violation=excess)


# --- Laplace identity self-test ------------------------------------------------


def laplace_residual(q, p, a, s):
    """|int_0^inf e^{-st} t^{p-1} E_{q,p}(a t^q) dt - s^{q-p}/(s^q - a)|."""
    _check_params(q, p)
    if not s > 0:
        raise DomainError("s must be positive")
    if not s**q > a:
        raise DomainError(f"Laplace transform needs s^q > a; got s^q = {s**q}, a = {a}")
    rate = s - (a ** (1.0 / q) if a > 0 else 0.0)
    t_max = -math.log(1e-14) / rate

    def smooth(t):
        return math.exp(-s * t) * ml_scalar(q, p, a * t**q).value.real

    # the t^{p-1} factor is handled as an algebraic endpoint weight
    pieces = [0.0, min(1.0, t_max), t_max]
    total = 0.0
    val, _ = integrate.quad(smooth, pieces[0], pieces[1], weight="alg", wvar=(p - 1, 0),
                            epsabs=1e-13, epsrel=1e-12, limit=200)
    total += val
    if pieces[2] > pieces[1]:
        val, _ = integrate.quad(lambda t: t ** (p - 1) * smooth(t), pieces[1], pieces[2],
                                epsabs=1e-13, epsrel=1e-12, limit=400)
        total += val
    exact = s ** (q - p) / (s**q - a)
    return abs(total - exact)

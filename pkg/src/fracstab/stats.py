"""Monte Carlo ensemble statistics and the statistical lemma checks."""

import math
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field

import numpy as np

from .errors import DivergenceError, DomainError, EnsembleError, FitError
from .solver import build_kernels, simulate_path
from .stochastic import JumpMeasure, RngStream, _ito_sum, sample_jumps, wiener_increments

Z95 = 1.959963984540054
MAX_DIVERGENT_FRACTION = 0.01


@dataclass(frozen=True)
class EnsembleStats:
    times: np.ndarray
    mean_sq: np.ndarray
    ci_half_width: np.ndarray
    paths: int
    sup_mean_sq: float
    divergent: int = 0
    divergent_ids: tuple = ()


@dataclass(frozen=True)
class DecayFit:
    mu_hat: float
    m_star_hat: float
    r_squared: float
    window: tuple
    mu_stderr: float = 0.0

    @property
    def mu_ci95(self):
        return (self.mu_hat - Z95 * self.mu_stderr, self.mu_hat + Z95 * self.mu_stderr)


def _sq_norms(system, h, seed, ids, kernels):
    out = []
    for sid in ids:
        try:
            tr = simulate_path(system, h, RngStream(seed, sid), kernels)
        except DivergenceError:
            out.append(None)
            continue
        with np.errstate(over="ignore"):
            sq = np.sum(tr.states**2, axis=1)
        # a finite state can still overflow when squared
        out.append(sq if np.all(np.isfinite(sq)) else None)
    return out


def run_ensemble(system, h, paths, seed, workers=1):
    """Estimate E||x(t_k)||^2 over ``paths`` trajectories with stream ids 0..paths-1.

    Divergent paths are excluded and counted; more than 1% divergent is an
    error.  The reduction runs in stream-id order, so the result does not
    depend on ``workers``.
    """
    if paths < 2:
        raise DomainError("an ensemble needs at least 2 paths")
    kernels = build_kernels(system, h)
    ids = list(range(paths))
    if workers > 1:
        chunks = [ids[i::workers] for i in range(workers)]
        with ProcessPoolExecutor(workers) as pool:
            parts = list(pool.map(_sq_norms, [system] * workers, [h] * workers,
                                  [seed] * workers, chunks, [kernels] * workers))
        by_id = {}
        for chunk, part in zip(chunks, parts):
            by_id.update(zip(chunk, part))
        sq = [by_id[i] for i in ids]
    else:
        sq = _sq_norms(system, h, seed, ids, kernels)

    bad = tuple(i for i, v in zip(ids, sq) if v is None)
    if len(bad) > MAX_DIVERGENT_FRACTION * paths:
        raise EnsembleError(
            f"{len(bad)} of {paths} paths diverged (limit {MAX_DIVERGENT_FRACTION:.0%}); "
            f"first divergent stream ids: {list(bad[:10])}"
        )
    good = np.array([v for v in sq if v is not None])
    n = len(good)
    total = np.zeros(good.shape[1])
    for row in good:
        total += row
    mean = total / n
    var = np.zeros_like(mean)
    for row in good:
        var += (row - mean) ** 2
    var /= n - 1
    # paths that agree exactly carry no sampling error (deterministic systems)
    var[np.all(good == good[0], axis=0)] = 0.0
    ci = Z95 * np.sqrt(var / n)
    times = h * np.arange(good.shape[1])
    return EnsembleStats(times, mean, ci, n, float(np.max(mean)), len(bad), bad)


def fit_decay(stats, window_fraction=0.5, min_samples=10):
    """Least-squares fit of ``log mean_sq = log M* - mu t`` on the trailing window."""
    if not 0 < window_fraction <= 1:
        raise DomainError("window_fraction must lie in (0, 1]")
    t = np.asarray(stats.times, dtype=float)
    y = np.asarray(stats.mean_sq, dtype=float)
    t_lo = t[-1] - window_fraction * (t[-1] - t[0])
    sel = t >= t_lo - 1e-12 * max(1.0, abs(t[-1]))
    tw, yw = t[sel], y[sel]
    if np.any(yw <= 0):
        raise FitError("nonpositive mean_sq in the fit window; try a shorter window_fraction")
    if len(tw) < min_samples:
        raise FitError(f"only {len(tw)} samples in the fit window, need {min_samples}")
    ly = np.log(yw)
    # regress on offsets from the first sample so a constant series gives slope 0 exactly
    dy = ly - ly[0]
    tm = tw.mean()
    sxx = np.sum((tw - tm) ** 2)
    slope = np.sum((tw - tm) * (dy - dy.mean())) / sxx
    intercept = ly[0] + dy.mean() - slope * tm
    resid = dy - (dy.mean() + slope * (tw - tm))
    ss_res = float(np.sum(resid**2))
    ss_tot = float(np.sum((dy - dy.mean()) ** 2))
    r2 = 1.0 - ss_res / ss_tot if ss_tot > 0 else 1.0
    stderr = math.sqrt(ss_res / (len(tw) - 2) / sxx) if len(tw) > 2 else math.inf
    return DecayFit(
        mu_hat=float(-slope),
        m_star_hat=float(math.exp(intercept)),
        r_squared=float(min(max(r2, 0.0), 1.0)),
        window=(float(tw[0]), float(tw[-1])),
        mu_stderr=stderr,
    )


def ensemble_csv(stats, fit=None):
    lines = ["t,mean_sq,ci_half_width"]
    for row in zip(stats.times, stats.mean_sq, stats.ci_half_width):
        lines.append(",".join(f"{v:.15g}" for v in row))
    if fit is not None:
        lines.append(f"# mu_hat,{fit.mu_hat:.15g}")
        lines.append(f"# m_star_hat,{fit.m_star_hat:.15g}")
        lines.append(f"# r_squared,{fit.r_squared:.15g}")
        lines.append(f"# mu_stderr,{fit.mu_stderr:.15g}")
    return "\n".join(lines) + "\n"


# --- lemma checks ----------------------------------------------------------------


@dataclass(frozen=True)
class IsometryReport:
    case: str
    kind: str  # "equality" or "bound"
    empirical: float
    theoretical: float
    stderr: float
    z: float
    passed: bool
    details: dict = field(default_factory=dict)


CASES = ("wiener_isometry", "jump_isometry", "wiener_p4_bound", "jump_martingale")

_ITO_H = 1e-3
_JUMP_C = 1.5
_JUMP_RATE = 2.0


def _ito_samples(paths, seed, h=_ITO_H, T=1.0):
    """Left-point sums of sigma(t) = t against dW on [0, T], one per path."""
    K = round(T / h)
    sig = (h * np.arange(K)).reshape(K, 1, 1)
    return np.array(
        [_ito_sum(sig, wiener_increments(1, K, h, RngStream(seed, i)))[-1, 0] for i in range(paths)]
    )


def _compensated_jump_samples(paths, seed, c=_JUMP_C, rate=_JUMP_RATE, T=1.0):
    """sum_i g(tau_i, eta_i) - int int g Pi(d eta) ds for g = c and an atom at eta = 1."""
    measure = JumpMeasure(rate, ((1.0, 1.0),))
    counts = np.array([len(sample_jumps(measure, T, RngStream(seed, i))) for i in range(paths)])
    return c * counts - c * rate * T


def _equality(case, samples_stat, theory, extra=None):
    est = float(np.mean(samples_stat))
    se = float(np.std(samples_stat, ddof=1) / math.sqrt(len(samples_stat)))
    z = (est - theory) / se if se > 0 else (0.0 if est == theory else math.inf)
    return IsometryReport(case, "equality", est, theory, se, z, abs(z) <= 3.0, extra or {})


def isometry_report(paths, seed, case):
    """Empirical check of one moment identity or bound (see CASES)."""
    if case not in CASES:
        raise DomainError(f"unknown case {case!r}; choose from {CASES}")
    if case == "wiener_isometry":
        x = _ito_samples(paths, seed)
        return _equality(case, x**2, 1.0 / 3.0, {"sigma": "t", "T": 1.0, "h": _ITO_H})
    if case == "wiener_p4_bound":
        x = _ito_samples(paths, seed)
        p, T = 4, 1.0
        # (p(p-1)/2)^{p/2} T^{(p-2)/2} int_0^1 t^4 dt
        bound = (p * (p - 1) / 2) ** (p / 2) * T ** ((p - 2) / 2) / 5.0
        est = float(np.mean(x**4))
        se = float(np.std(x**4, ddof=1) / math.sqrt(paths))
        z = (est - bound) / se
        return IsometryReport(case, "bound", est, bound, se, z, est <= bound,
                              {"p": p, "exact_moment": 1.0 / 3.0})
    x = _compensated_jump_samples(paths, seed)
    if case == "jump_martingale":
        return _equality(case, x, 0.0, {"c": _JUMP_C, "intensity": _JUMP_RATE})
    return _equality(case, x**2, _JUMP_RATE * _JUMP_C**2,
                     {"c": _JUMP_C, "intensity": _JUMP_RATE})


def selftest(paths=5000, seed=20240601):
    return [isometry_report(paths, seed, case) for case in CASES]

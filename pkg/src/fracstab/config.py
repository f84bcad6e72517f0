"""Flat ``key = value`` configuration files.

One assignment per line, ``#`` starts a comment, groups are dotted keys::

    system.q = 0.6
    A.row1 = [-0.1, 0]
    jump.marks = [(1.0, 1.0)]

Values are Python literals (numbers, lists, tuples), ``true``/``false``,
bare names, or a mark family ``uniform(a, b)`` / ``gaussian(m, s)``.
"""

import ast
import math
import re
from dataclasses import dataclass, field
from importlib import resources
from pathlib import Path
from typing import Optional

import numpy as np

from .certify import MODES, RECTIFIED, HypothesisConstants
from .errors import ConfigError, FracStabError
from .mittag_leffler import fit_envelope
from .stochastic import JumpMeasure
from .system import FracSystem, Nonlinearity

REQUIRED = (
    "system.n",
    "system.q",
    "system.T",
    "system.x0",
    "A.row*",
    "f.name",
    "sigma.name",
    "g.name",
    "jump.intensity",
    "jump.marks",
    "numerics.h",
)

_HYP_NUMERIC = (
    "beta_exp", "alpha_exp", "N1", "N2", "omega", "R_f", "R_sigma", "R_g",
    "V_f", "V_sigma", "V_g", "c_p", "E_x0_sq", "L_f_norm", "L_sigma_norm", "L_g_norm",
)
_HYP_FUNCS = ("L_f", "L_sigma", "L_g")

OPTIONAL = (
    "f.params", "sigma.params", "g.params", "numerics.override_q_range", "mode",
    "ensemble.paths", "ensemble.seed", "ensemble.window_fraction", "hypothesis.epsilon",
) + tuple("hypothesis." + k for k in _HYP_NUMERIC + _HYP_FUNCS)

_FAMILY = re.compile(r"^(uniform|gaussian)\s*\(\s*([^,]+?)\s*,\s*([^)]+?)\s*\)$")
_NAME = re.compile(r"^[A-Za-z_][\w\-]*$")
_ROW = re.compile(r"^A\.row([1-9]\d*)$")

BUILTIN_CONFIGS = ("paper_sec4",)


@dataclass
class Config:
    system: FracSystem
    h: float
    override_q_range: bool = False
    hypothesis: Optional[HypothesisConstants] = None
    paths: int = 1000
    seed: int = 0
    window_fraction: float = 0.5
    mode: str = RECTIFIED
    epsilon: Optional[float] = None
    source: Optional[str] = field(default=None, compare=False)


def _parse_value(text, line):
    text = text.strip()
    low = text.lower()
    if low in ("true", "false"):
        return low == "true"
    m = _FAMILY.match(text)
    if m:
        try:
            return (m.group(1), float(m.group(2)), float(m.group(3)))
        except ValueError:
            raise ConfigError(f"bad mark family parameters in {text!r}", line) from None
    try:
        return ast.literal_eval(text)
    except (ValueError, SyntaxError):
        pass
    if _NAME.match(text):
        return text
    raise ConfigError(f"cannot parse value {text!r}", line)


def _read_entries(text):
    entries, lines = {}, {}
    for no, raw in enumerate(text.splitlines(), start=1):
        body = raw.split("#", 1)[0].strip()
        if not body:
            continue
        if "=" not in body:
            raise ConfigError(f"expected 'key = value', got {raw.strip()!r}", no)
        key, val = (s.strip() for s in body.split("=", 1))
        if not key:
            raise ConfigError("empty key", no)
        if key in entries:
            raise ConfigError(f"duplicate key {key!r} (first on line {lines[key]})", no)
        known = key in REQUIRED or key in OPTIONAL or _ROW.match(key)
        if not known:
            raise ConfigError(f"unknown key {key!r}", no)
        entries[key] = _parse_value(val, no)
        lines[key] = no
    return entries, lines


def _num(entries, lines, key, kind=float, default=None):
    if key not in entries:
        return default
    v = entries[key]
    if isinstance(v, bool) or not isinstance(v, (int, float)):
        raise ConfigError(f"{key} must be a number, got {v!r}", lines[key])
    if kind is int:
        if int(v) != v:
            raise ConfigError(f"{key} must be an integer, got {v!r}", lines[key])
        return int(v)
    return float(v)


def _vector(entries, lines, key, n):
    v = entries[key]
    if isinstance(v, (int, float)) and not isinstance(v, bool):
        v = [v]
    if not isinstance(v, (list, tuple)) or not all(
        isinstance(e, (int, float)) and not isinstance(e, bool) for e in v
    ):
        raise ConfigError(f"{key} must be a list of numbers", lines[key])
    if n is not None and len(v) != n:
        raise ConfigError(f"{key} needs {n} entries, got {len(v)}", lines[key])
    return [float(e) for e in v]


def _marks(entries, lines):
    v = entries["jump.marks"]
    line = lines["jump.marks"]
    if isinstance(v, tuple) and len(v) == 3 and isinstance(v[0], str):
        return v
    if isinstance(v, tuple) and len(v) == 2 and all(isinstance(e, (int, float)) for e in v):
        v = [v]
    if not isinstance(v, (list, tuple)) or not v:
        raise ConfigError("jump.marks must be a list of (value, probability) pairs "
                          "or uniform(a, b) / gaussian(m, s)", line)
    out = []
    for atom in v:
        if not (isinstance(atom, (list, tuple)) and len(atom) == 2):
            raise ConfigError(f"mark atom {atom!r} must be a (value, probability) pair", line)
        out.append((float(atom[0]), float(atom[1])))
    return tuple(out)


def _handle(entries, lines, role, n):
    name = entries[f"{role}.name"]
    if not isinstance(name, str):
        raise ConfigError(f"{role}.name must be a name", lines[f"{role}.name"])
    key = f"{role}.params"
    params = _vector(entries, lines, key, None) if key in entries else []
    try:
        return Nonlinearity(role, name, tuple(params), n)
    except FracStabError as exc:
        raise ConfigError(str(exc), lines.get(key, lines[f"{role}.name"])) from None


def _hypothesis(entries, lines, system):
    keys = [k for k in entries if k.startswith("hypothesis.") and k != "hypothesis.epsilon"]
    if not keys:
        return None
    kw = {}
    fit_keys = []
    for key in keys:
        name = key.split(".", 1)[1]
        v = entries[key]
        if name in _HYP_FUNCS:
            if isinstance(v, (int, float)) and not isinstance(v, bool):
                kw[name] = float(v)
            else:
                kw[name] = _vector(entries, lines, key, None)
        elif name in ("N1", "N2", "omega") and v == "fit":
            fit_keys.append(name)
        else:
            kw[name] = _num(entries, lines, key)
    if fit_keys:
        try:
            env1 = fit_envelope(system.q, 1.0, system.A, system.T, 100)
            env2 = fit_envelope(system.q, system.q, system.A, system.T, 100)
        except FracStabError as exc:
            raise ConfigError(f"cannot fit envelope constants: {exc}",
                              lines["hypothesis." + fit_keys[0]]) from None
        fitted = {"N1": env1.n_const, "N2": env2.n_const, "omega": min(env1.omega, env2.omega)}
        # a common omega needs both N refitted at that rate
        if "omega" in fit_keys and env1.omega != env2.omega:
            w = fitted["omega"]
            fitted["N1"] = _n_at(system, 1.0, w)
            fitted["N2"] = _n_at(system, system.q, w)
        for name in fit_keys:
            kw[name] = fitted[name]
    if "E_x0_sq" not in kw:
        kw["E_x0_sq"] = float(system.x0 @ system.x0)
    try:
        return HypothesisConstants(**kw)
    except FracStabError as exc:
        raise ConfigError(str(exc), lines[keys[0]]) from None


def _n_at(system, p, omega):
    from .mittag_leffler import ml_matrix

    t = np.linspace(0.0, system.T, 1001)
    vals = [np.linalg.norm(ml_matrix(system.q, p, system.A, s**system.q), 2) * math.exp(omega * s)
            for s in t]
    return max(1.0, float(max(vals)))


def parse_text(text, source=None):
    entries, lines = _read_entries(text)
    rows = sorted((int(_ROW.match(k).group(1)), k) for k in entries if _ROW.match(k))
    missing = [
        ("A.row1..A.rowN" if k == "A.row*" else k)
        for k in REQUIRED
        if (not rows if k == "A.row*" else k not in entries)
    ]
    if missing:
        raise ConfigError("missing required keys: " + ", ".join(missing))
    n = _num(entries, lines, "system.n", int)
    if n < 1:
        raise ConfigError("system.n must be >= 1", lines["system.n"])
    if [r for r, _ in rows] != list(range(1, n + 1)):
        line = lines[rows[-1][1]]
        raise ConfigError(f"A needs rows A.row1..A.row{n}, got {[k for _, k in rows]}", line)
    A = np.array([_vector(entries, lines, k, n) for _, k in rows])
    x0 = _vector(entries, lines, "system.x0", n)
    q = _num(entries, lines, "system.q")
    T = _num(entries, lines, "system.T")
    h = _num(entries, lines, "numerics.h")
    override = entries.get("numerics.override_q_range", False)
    if not isinstance(override, bool):
        raise ConfigError("numerics.override_q_range must be true or false",
                          lines["numerics.override_q_range"])
    if not 0.5 < q < 1 and not override:
        raise ConfigError(
            f"system.q = {q} lies outside (1/2, 1), the range assumed by the theory; "
            "set numerics.override_q_range = true to proceed",
            lines["system.q"],
        )
    if not T > 0:
        raise ConfigError("system.T must be positive", lines["system.T"])
    if not h > 0:
        raise ConfigError("numerics.h must be positive", lines["numerics.h"])
    intensity = _num(entries, lines, "jump.intensity")
    try:
        measure = JumpMeasure(intensity, _marks(entries, lines))
    except FracStabError as exc:
        raise ConfigError(str(exc), lines["jump.marks"]) from None
    handles = {role: _handle(entries, lines, role, n) for role in ("f", "sigma", "g")}
    try:
        system = FracSystem(q=q, A=A, x0=np.array(x0), T=T, jump_measure=measure,
                            override_q_range=override, **handles)
    except FracStabError as exc:
        raise ConfigError(str(exc), lines["system.q"]) from None
    mode = entries.get("mode", RECTIFIED)
    if mode not in MODES:
        raise ConfigError(f"mode must be one of {MODES}, got {mode!r}", lines["mode"])
    wf = _num(entries, lines, "ensemble.window_fraction", default=0.5)
    if not 0 < wf <= 1:
        raise ConfigError("ensemble.window_fraction must lie in (0, 1]",
                          lines["ensemble.window_fraction"])
    return Config(
        system=system,
        h=h,
        override_q_range=override,
        hypothesis=_hypothesis(entries, lines, system),
        paths=_num(entries, lines, "ensemble.paths", int, 1000),
        seed=_num(entries, lines, "ensemble.seed", int, 0),
        window_fraction=wf,
        mode=mode,
        epsilon=_num(entries, lines, "hypothesis.epsilon"),
        source=source,
    )


def builtin_config_text(name):
    if name not in BUILTIN_CONFIGS:
        raise ConfigError(f"no builtin config {name!r}")
    return resources.files("fracstab").joinpath("configs", f"{name}.cfg").read_text("utf-8")


def parse_config(path):
    """Parse a config file.

    ``builtin:NAME`` selects a config shipped with the package; a path that
    does not exist but is named after a shipped config (``examples/paper_sec4.cfg``)
    also resolves to it.
    """
    p = str(path)
    if p.startswith("builtin:"):
        return parse_text(builtin_config_text(p.split(":", 1)[1]), source=p)
    stem = Path(p)
    if not stem.exists() and stem.suffix == ".cfg" and stem.stem in BUILTIN_CONFIGS:
        return parse_text(builtin_config_text(stem.stem), source=p)
    try:
        text = Path(p).read_text(encoding="utf-8")
    except OSError as exc:
        raise ConfigError(f"cannot read config {p}: {exc.strerror}") from None
    return parse_text(text, source=p)


def _lit(v):
    if isinstance(v, bool):
        return "true" if v else "false"
    if isinstance(v, float):
        return repr(v)
    if isinstance(v, (list, tuple)):
        return "[" + ", ".join(_lit(e) for e in v) + "]"
    return str(v)


def serialize_config(cfg):
    """Inverse of :func:`parse_text` (comments and key order are not preserved)."""
    s = cfg.system
    out = [
        f"system.n = {s.n}",
        f"system.q = {s.q!r}",
        f"system.T = {s.T!r}",
        f"system.x0 = {_lit(list(map(float, s.x0)))}",
    ]
    for i, row in enumerate(s.A, start=1):
        out.append(f"A.row{i} = {_lit(list(map(float, row)))}")
    for role in ("f", "sigma", "g"):
        hnd = getattr(s, role)
        out.append(f"{role}.name = {hnd.name}")
        if hnd.params:
            out.append(f"{role}.params = {_lit(list(hnd.params))}")
    jm = s.jump_measure
    out.append(f"jump.intensity = {float(jm.intensity)!r}")
    if jm.family == "discrete":
        atoms = ", ".join(f"({v!r}, {pr!r})" for v, pr in jm.marks)
        out.append(f"jump.marks = [{atoms}]")
    else:
        fam, a, b = jm.marks
        out.append(f"jump.marks = {fam}({float(a)!r}, {float(b)!r})")
    out.append(f"numerics.h = {cfg.h!r}")
    out.append(f"numerics.override_q_range = {_lit(cfg.override_q_range)}")
    out.append(f"mode = {cfg.mode}")
    out.append(f"ensemble.paths = {cfg.paths}")
    out.append(f"ensemble.seed = {cfg.seed}")
    out.append(f"ensemble.window_fraction = {cfg.window_fraction!r}")
    if cfg.epsilon is not None:
        out.append(f"hypothesis.epsilon = {cfg.epsilon!r}")
    hc = cfg.hypothesis
    if hc is not None:
        for name in _HYP_FUNCS:
            v = getattr(hc, name)
            if v is not None:
                out.append(f"hypothesis.{name} = {_lit(v)}")
        for name in _HYP_NUMERIC:
            v = getattr(hc, name)
            if v is not None:
                out.append(f"hypothesis.{name} = {float(v)!r}")
    return "\n".join(out) + "\n"

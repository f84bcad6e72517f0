"""Command-line interface: ``fracstab {certify,simulate,ensemble,ml,selftest}``."""

import argparse
import sys

from .certify import MODES, build_certificate, format_flat, format_report
from .config import parse_config
from .errors import FracStabError, PreconditionError
from .fracops import deterministic_residual
from .mittag_leffler import ml_scalar
from .plot import write_svg
from .solver import simulate_path, trajectory_csv
from .stats import ensemble_csv, fit_decay, run_ensemble, selftest
from .stochastic import RngStream

EXIT_OK = 0
EXIT_ERROR = 1
EXIT_CONDITION = 2
EXIT_USAGE = 64


class UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        raise UsageError(f"{self.format_usage()}{self.prog}: error: {message}\n")


def build_parser():
    p = _Parser(prog="fracstab", description=__doc__.splitlines()[0])
    sub = p.add_subparsers(dest="command", required=True, parser_class=_Parser)

    c = sub.add_parser("certify", help="evaluate the stability certificate of a config")
    c.add_argument("--config", required=True)
    c.add_argument("--epsilon", type=float)
    c.add_argument("--report", metavar="OUT", help="also write flat key=value report")
    c.add_argument("--mode", choices=MODES, help="override the config's mode")

    s = sub.add_parser("simulate", help="simulate one trajectory to CSV")
    s.add_argument("--config", required=True)
    s.add_argument("--seed", type=int, required=True)
    s.add_argument("--stream-id", type=int, default=0)
    s.add_argument("--out", required=True)
    s.add_argument("--verify", action="store_true",
                   help="report the Caputo residual (noise- and jump-free systems only)")

    e = sub.add_parser("ensemble", help="Monte Carlo mean-square statistics to CSV")
    e.add_argument("--config", required=True)
    e.add_argument("--paths", type=int)
    e.add_argument("--seed", type=int)
    e.add_argument("--out", required=True)
    e.add_argument("--fit-decay", action="store_true")
    e.add_argument("--svg")
    e.add_argument("--workers", type=int, default=1)

    m = sub.add_parser("ml", help="evaluate the Mittag-Leffler function E_{q,p}(z)")
    m.add_argument("--q", type=float, required=True)
    m.add_argument("--p", type=float, required=True)
    m.add_argument("--re", type=float, required=True)
    m.add_argument("--im", type=float, default=0.0)

    t = sub.add_parser("selftest", help="statistical checks of the stochastic integrals")
    t.add_argument("--paths", type=int, default=5000)
    t.add_argument("--seed", type=int, default=20240601)
    return p


def _write(path, text):
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        fh.write(text)


def _certify(args, out):
    cfg = parse_config(args.config)
    if cfg.hypothesis is None:
        raise PreconditionError("config has no hypothesis.* entries; certify needs them")
    if args.mode:
        cfg.mode = args.mode
    cert = build_certificate(cfg, epsilon=args.epsilon)
    out.write(format_report(cert))
    if args.report:
        _write(args.report, format_flat(cert))
    return EXIT_OK if cert.contraction_ok else EXIT_CONDITION


def _simulate(args, out):
    cfg = parse_config(args.config)
    traj = simulate_path(cfg.system, cfg.h, RngStream(args.seed, args.stream_id))
    _write(args.out, trajectory_csv(traj))
    if args.verify:
        if cfg.system.is_deterministic:
            out.write(f"residual = {deterministic_residual(traj, cfg.system):.6e}\n")
        else:
            out.write("residual skipped: system has noise or jumps\n")
    return EXIT_OK


def _ensemble(args, out):
    cfg = parse_config(args.config)
    paths = cfg.paths if args.paths is None else args.paths
    seed = cfg.seed if args.seed is None else args.seed
    stats = run_ensemble(cfg.system, cfg.h, paths, seed, workers=args.workers)
    fit = fit_decay(stats, cfg.window_fraction) if args.fit_decay else None
    _write(args.out, ensemble_csv(stats, fit))
    if args.svg:
        write_svg(stats, fit, args.svg)
    out.write(f"paths = {stats.paths}\ndivergent = {stats.divergent}\n"
              f"sup_mean_sq = {stats.sup_mean_sq:.15g}\n")
    if fit is not None:
        out.write(f"mu_hat = {fit.mu_hat:.15g}\nm_star_hat = {fit.m_star_hat:.15g}\n"
                  f"r_squared = {fit.r_squared:.15g}\n")
    return EXIT_OK


def _ml(args, out):
    z = complex(args.re, args.im) if args.im else args.re
    ev = ml_scalar(args.q, args.p, z)
    v = complex(ev.value)
    # repr gives the shortest string that round-trips (at most 17 digits)
    text = repr(v.real) if v.imag == 0 and not args.im else f"{v.real!r} {v.imag:+.17g}j"
    out.write(f"{text} bound={ev.truncation_bound:.15g}\n")
    return EXIT_OK


def _selftest(args, out):
    ok = True
    for rep in selftest(args.paths, args.seed):
        ok &= rep.passed
        out.write(f"{'PASS' if rep.passed else 'FAIL'} {rep.case}: empirical={rep.empirical:.6g} "
                  f"{'theory' if rep.kind == 'equality' else 'bound'}={rep.theoretical:.6g} "
                  f"z={rep.z:+.3f}\n")
    return EXIT_OK if ok else EXIT_CONDITION


_COMMANDS = {
    "certify": _certify,
    "simulate": _simulate,
    "ensemble": _ensemble,
    "ml": _ml,
    "selftest": _selftest,
}


def run(argv=None, out=None, err=None):
    """Run the CLI and return its exit code."""
    out = out or sys.stdout
    err = err or sys.stderr
    try:
        args = build_parser().parse_args(argv)
    except UsageError as exc:
        err.write(str(exc))
        return EXIT_USAGE
    except SystemExit as exc:  # --help
        return EXIT_OK if not exc.code else EXIT_USAGE
    try:
        return _COMMANDS[args.command](args, out)
    except (FracStabError, ValueError, ArithmeticError, OSError) as exc:
        err.write(f"fracstab {args.command}: error: {exc}\n")
        return EXIT_ERROR


def main():
    sys.exit(run())


if __name__ == "__main__":
    main()

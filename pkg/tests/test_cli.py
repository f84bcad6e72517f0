import io
import re
import xml.etree.ElementTree as ET

import numpy as np
import pytest

from fracstab.certify import VERBATIM
from fracstab.cli import EXIT_CONDITION, EXIT_ERROR, EXIT_OK, EXIT_USAGE, run
from fracstab.config import (
    REQUIRED,
    builtin_config_text,
    parse_config,
    parse_text,
    serialize_config,
)
from fracstab.errors import ConfigError
from fracstab.plot import MARGIN, svg_text, write_svg
from fracstab.stats import DecayFit, EnsembleStats

SEC4 = builtin_config_text("paper_sec4")

LINEAR = """\
system.n = 2
system.q = 0.6
system.T = 1.0
system.x0 = [1.0, 1.0]
A.row1 = [-0.1, 0.0]
A.row2 = [0.0, -0.1]
f.name = zero
sigma.name = zero
g.name = zero
jump.intensity = 0.0
jump.marks = [(1.0, 1.0)]
numerics.h = 0.01
hypothesis.omega = 0.5
hypothesis.N2 = 1.0
"""

NOISY = LINEAR.replace("sigma.name = zero", "sigma.name = linear\nsigma.params = [0.2, 0, 0, 0.2]")


def cli(*argv):
    out, err = io.StringIO(), io.StringIO()
    code = run(list(argv), out, err)
    return code, out.getvalue(), err.getvalue()


# --- config -------------------------------------------------------------------


def test_shipped_config_is_the_worked_example():
    cfg = parse_text(SEC4)
    s = cfg.system
    assert (s.q, s.T, cfg.h) == (0.6, 1.0, 0.01)
    assert s.sigma.name == "paper_example_sigma" and s.sigma.params == (9.8, 10.0)
    assert np.array_equal(s.A, np.diag([-0.1, -0.1]))
    assert cfg.hypothesis.N2 == 1.0202


def test_examples_path_resolves_to_shipped_config():
    assert parse_config("examples/paper_sec4.cfg") == parse_text(SEC4)


def test_empty_file_lists_every_required_key():
    with pytest.raises(ConfigError) as info:
        parse_text("")
    msg = str(info.value)
    for key in REQUIRED:
        assert key.split("*")[0] in msg


def test_q_out_of_range_cites_assumption():
    text = SEC4.replace("system.q = 0.6", "system.q = 0.3")
    with pytest.raises(ConfigError, match=r"line 3: .*\(1/2, 1\)"):
        parse_text(text)
    ok = parse_text(text.replace("numerics.h = 0.01",
                                 "numerics.h = 0.01\nnumerics.override_q_range = true"))
    assert ok.system.q == 0.3


@pytest.mark.parametrize(
    "edit,pattern",
    [
        (("system.T = 1.0", "system.Tee = 1.0"), r"unknown key 'system.Tee'"),
        (("A.row2 = [0.0, -0.1]", "A.row2 = [0.0]"), r"line 7: A.row2 needs 2 entries"),
        (("system.x0 = [0.5, 0.5]", "system.x0 = [0.5]"), r"line 5: system.x0 needs 2"),
        (("sigma.params = [9.8, 10.0]", "sigma.params = [9.8]"), r"takes 2 parameters"),
        (("numerics.h = 0.01", "numerics.h = banana("), r"cannot parse value"),
        (("mode = rectified", "mode = sloppy"), r"mode must be one of"),
        (("system.n = 2", "system.n = 2\nsystem.n = 3"), r"duplicate key"),
    ],
)
def test_config_errors_carry_line_numbers(edit, pattern):
    with pytest.raises(ConfigError, match=pattern) as info:
        parse_text(SEC4.replace(*edit))
    assert str(info.value).startswith("line ")


def test_round_trip():
    for text in (SEC4, LINEAR, NOISY):
        cfg = parse_text(text)
        again = parse_text(serialize_config(cfg))
        assert again == cfg
        assert serialize_config(again) == serialize_config(cfg)


def test_round_trip_mark_families():
    for marks in ("uniform(0.5, 1.5)", "[(1.0, 0.25), (2.0, 0.75)]"):
        cfg = parse_text(NOISY.replace("jump.marks = [(1.0, 1.0)]", f"jump.marks = {marks}"))
        assert parse_text(serialize_config(cfg)) == cfg


def test_envelope_constants_can_be_fitted():
    cfg = parse_text(LINEAR.replace("hypothesis.N2 = 1.0", "hypothesis.N2 = fit"))
    assert cfg.hypothesis.N2 >= 1.0


def test_unknown_builtin_nonlinearity():
    with pytest.raises(ConfigError, match="unknown f nonlinearity"):
        parse_text(LINEAR.replace("f.name = zero", "f.name = cubic"))


# --- CLI ----------------------------------------------------------------------


def test_ml_prints_e():
    code, out, _ = cli("ml", "--q", "1", "--p", "1", "--re", "1")
    assert code == EXIT_OK
    assert out.split()[0] == "2.718281828459045"
    assert len(out.strip().splitlines()) == 1


def test_ml_complex():
    code, out, _ = cli("ml", "--q", "2", "--p", "1", "--re", "0", "--im", "1")
    assert code == EXIT_OK and "bound=" in out


def test_certify_verbatim(tmp_path):
    report = tmp_path / "r.txt"
    code, out, _ = cli("certify", "--config", "examples/paper_sec4.cfg", "--mode", VERBATIM,
                       "--report", str(report))
    assert code == EXIT_OK
    flat = dict(line.split("=", 1) for line in report.read_text().splitlines())
    assert "warnings[0]" in flat and flat["contraction_ok"] == "true"
    assert re.search(r"^m\s+= ", out, re.M)


def test_certify_rectified_fails_condition():
    code, _, _ = cli("certify", "--config", "builtin:paper_sec4")
    assert code == EXIT_CONDITION


def test_certify_pass(tmp_path):
    f = tmp_path / "lin.cfg"
    f.write_text(LINEAR)
    code, out, _ = cli("certify", "--config", str(f), "--epsilon", "1.0")
    assert code == EXIT_OK and "contraction_ok = true" in out


def test_certify_without_hypothesis_is_error(tmp_path):
    f = tmp_path / "bare.cfg"
    f.write_text("\n".join(l for l in LINEAR.splitlines() if not l.startswith("hypothesis")))
    assert cli("certify", "--config", str(f))[0] == EXIT_ERROR


@pytest.mark.parametrize(
    "argv",
    [[], ["bogus"], ["certify"], ["ml", "--q", "x", "--p", "1", "--re", "1"],
     ["simulate", "--config", "a.cfg", "--out", "o.csv"]],
)
def test_usage_errors(argv):
    code, _, err = cli(*argv)
    assert code == EXIT_USAGE and "usage:" in err


def test_missing_config_file_is_error(tmp_path):
    assert cli("certify", "--config", str(tmp_path / "none.cfg"))[0] == EXIT_ERROR


def test_bad_config_is_error(tmp_path):
    f = tmp_path / "bad.cfg"
    f.write_text("system.q = 0.3\n")
    code, _, err = cli("certify", "--config", str(f))
    assert code == EXIT_ERROR and "missing required keys" in err


def test_simulate_verify(tmp_path):
    f = tmp_path / "lin.cfg"
    f.write_text(LINEAR)
    out_csv = tmp_path / "x.csv"
    code, out, _ = cli("simulate", "--config", str(f), "--seed", "1", "--out", str(out_csv),
                       "--verify")
    assert code == EXIT_OK and out.startswith("residual = ")
    assert out_csv.read_text().splitlines()[0] == "t,x1,x2"


def test_simulate_verify_skips_noisy(tmp_path):
    f = tmp_path / "n.cfg"
    f.write_text(NOISY)
    code, out, _ = cli("simulate", "--config", str(f), "--seed", "1",
                       "--out", str(tmp_path / "x.csv"), "--verify")
    assert code == EXIT_OK and "skipped" in out


def test_ensemble_outputs(tmp_path):
    f = tmp_path / "n.cfg"
    f.write_text(NOISY)
    csv, svg = tmp_path / "e.csv", tmp_path / "e.svg"
    code, out, _ = cli("ensemble", "--config", str(f), "--paths", "50", "--seed", "3",
                       "--out", str(csv), "--fit-decay", "--svg", str(svg))
    assert code == EXIT_OK
    lines = csv.read_text().splitlines()
    assert lines[0] == "t,mean_sq,ci_half_width" and any(l.startswith("# mu_hat,") for l in lines)
    ET.parse(svg)


def test_selftest_runs():
    code, out, _ = cli("selftest", "--paths", "2000")
    assert code == EXIT_OK
    assert out.count("PASS") == 4


def test_outputs_are_byte_identical(tmp_path):
    f = tmp_path / "n.cfg"
    f.write_text(NOISY)
    blobs = []
    for i in range(2):
        p = tmp_path / f"s{i}.csv"
        e = tmp_path / f"e{i}.csv"
        cli("simulate", "--config", str(f), "--seed", "9", "--out", str(p))
        cli("ensemble", "--config", str(f), "--paths", "20", "--seed", "9", "--out", str(e))
        blobs.append((p.read_bytes(), e.read_bytes()))
    assert blobs[0] == blobs[1]


# --- SVG ----------------------------------------------------------------------


def _stats(values, ci=None, h=0.01):
    v = np.asarray(values, dtype=float)
    c = np.zeros_like(v) if ci is None else np.asarray(ci)
    return EnsembleStats(h * np.arange(len(v)), v, c, 100, float(v.max()))


def _polyline(root, ident):
    ns = {"s": "http://www.w3.org/2000/svg"}
    node = root.find(f".//s:*[@id='{ident}']", ns)
    pts = np.array([[float(a) for a in p.split(",")] for p in node.get("points").split()])
    return pts


def _to_data(root, pts):
    x_lo, x_hi = map(float, root.get("data-x-range").split())
    y_lo, y_hi = map(float, root.get("data-y-range").split())
    left, top, pw, ph = map(float, root.get("data-plot-box").split())
    x = x_lo + (pts[:, 0] - left) / pw * (x_hi - x_lo)
    y = y_hi - (pts[:, 1] - top) / ph * (y_hi - y_lo)
    return x, y


def test_svg_flat_line_for_zero_system():
    root = ET.fromstring(svg_text(_stats(np.full(101, 2.0))))
    _, y = _to_data(root, _polyline(root, "mean-sq"))
    assert np.allclose(y, 2.0, atol=1e-6)


def test_svg_overlay_coincides_with_exponential():
    t = 0.01 * np.arange(101)
    st = _stats(3 * np.exp(-0.4 * t), 0.05 * np.exp(-0.4 * t))
    fit = DecayFit(0.4, 3.0, 1.0, (0.5, 1.0))
    root = ET.fromstring(svg_text(st, fit))
    _, y_curve = _to_data(root, _polyline(root, "mean-sq"))
    _, y_fit = _to_data(root, _polyline(root, "fit"))
    assert np.max(np.abs(y_curve - y_fit)) < 1e-6
    assert np.max(np.abs(y_curve - st.mean_sq)) < 1e-5
    assert root.find(".//{http://www.w3.org/2000/svg}polygon").get("id") == "ci-band"
    texts = [el.text for el in root.iter("{http://www.w3.org/2000/svg}text")]
    assert "t" in texts and any("x(t)" in (s or "") for s in texts)


def test_svg_unwritable_path(tmp_path):
    with pytest.raises(OSError):
        write_svg(_stats([1.0, 0.5]), None, tmp_path / "missing" / "x.svg")


def test_svg_layout_constants():
    assert MARGIN["left"] > 0

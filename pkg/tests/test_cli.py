import json

import numpy as np
import pytest

from convexdrum.cli import DEFAULTS, main, parse_shape
from convexdrum.errors import ConfigError, InvalidShapeError
from convexdrum.geometry import save_shape, stadium_for_area
from convexdrum.reporting import OUTPUT_ENV, Report, RunConfig, parse_config, render_svg


def _report(d):
    return json.loads((d / "report.json").read_text())


def test_eigs_command(tmp_path, capsys):
    assert main(["eigs", "--shape", "disk:n=128", "--h", "0.06", "--output-dir", str(tmp_path)]) == 0
    rep = _report(tmp_path)
    assert rep["passed"] and rep["checks"]["positive_sorted"]
    assert abs(rep["results"]["scaled"][0] / 18.168 - 1) < 5e-3
    assert "eigs: ok" in capsys.readouterr().out


def test_poisson_command(tmp_path):
    assert main(["poisson", "--shape", "disk:n=128", "--h", "0.06", "--output-dir", str(tmp_path)]) == 0
    rep = _report(tmp_path)
    assert rep["checks"] == {k: True for k in rep["checks"]}
    assert "energy_negative" in rep["checks"]


def test_shape_file_and_render(tmp_path):
    path = save_shape(stadium_for_area(1.0, 1.0, 256), tmp_path / "st.csv")
    out = tmp_path / "out"
    assert main(["render", "--shape", str(path), "--overlay", "curvature", "--output-dir", str(out)]) == 0
    svg = (out / "shape.svg").read_text()
    assert svg.startswith("<svg") and svg.count('class="junction"') == 4 and svg.count('class="flat"') == 2
    assert _report(out)["results"]["n_flat_runs"] == 2


def test_mixed_demo(tmp_path):
    assert main(["mixed-demo", "--a0", "0.75", "--output-dir", str(tmp_path)]) == 0
    ex = json.loads((tmp_path / "expansion.json").read_text())
    assert abs(ex["a0"] - 0.75) < 1e-3


def test_conformal_command(tmp_path):
    assert main(["conformal", "--shape", "disk:n=256", "--n", "512", "--output-dir", str(tmp_path)]) == 0
    rep = _report(tmp_path)
    assert rep["checks"]["monotone_correspondence"]
    assert (tmp_path / "map.csv").read_text().startswith("t,x,y")


def test_short_optimize(tmp_path):
    args = ["optimize", "--n-vertices", "48", "--max-iter", "6", "--refine-vertices", "0", "--h", "0.08",
            "--output-dir", str(tmp_path)]
    assert main(args) == 0
    rep = _report(tmp_path)
    assert rep["checks"]["area_preserved"] and rep["checks"]["monotone_epochs"]


def test_config_precedence(tmp_path, monkeypatch):
    cfg = tmp_path / "run.cfg"
    cfg.write_text("# comment\nh = 0.07\nk = 2\nresidual-tol = 1e-6\n")
    env_dir = tmp_path / "env"
    monkeypatch.setenv(OUTPUT_ENV, str(env_dir))
    assert main(["eigs", "--config", str(cfg), "--shape", "disk:n=128", "--k", "4"]) == 0
    p = _report(env_dir)["parameters"]
    assert p["h"] == 0.07 and p["k"] == 4 and p["residual_tol"] == 1e-6
    flag_dir = tmp_path / "flag"
    assert main(["eigs", "--config", str(cfg), "--shape", "disk:n=128", "--output-dir", str(flag_dir)]) == 0
    assert (flag_dir / "report.json").exists()


def test_exit_codes(tmp_path, capsys):
    bad = tmp_path / "bad.cfg"
    bad.write_text("not_a_key = 3\n")
    assert main(["eigs", "--config", str(bad), "--output-dir", str(tmp_path)]) == 2
    assert main(["eigs", "--shape", "triangle:n=3", "--output-dir", str(tmp_path)]) == 3
    assert "convexdrum: convex_geometry:" in capsys.readouterr().err
    assert main(["eigs", "--residual-tol", "-1", "--output-dir", str(tmp_path)]) == 2
    with pytest.raises(SystemExit):
        main(["nonsense"])


def test_parse_shape():
    s = parse_shape("stadium:ratio=1.0,n=128")
    assert s.n == 128
    with pytest.raises(ConfigError):
        parse_shape("disk:n")
    with pytest.raises(InvalidShapeError):
        parse_shape("disk:n=4")


def test_parse_config_errors():
    assert parse_config("a-b = true\nc = 'x'\n") == {"a_b": True, "c": "x"}
    with pytest.raises(ConfigError):
        parse_config("just words\n")
    with pytest.raises(ConfigError):
        RunConfig.resolve("eigs", DEFAULTS["eigs"], {"bogus": 1}, {})


def test_report_and_svg_deterministic(tmp_path):
    rep = Report("x", {"a": 1})
    rep.check("ok", True)
    rep.check("bad", np.False_)
    assert not rep.passed
    d = json.loads(rep.write(tmp_path).read_text())
    assert d["checks"] == {"ok": True, "bad": False} and "timestamp" in d
    s = stadium_for_area(0.5, 1.0, 128)
    ov = np.arange(128, dtype=float)
    a = render_svg(s, ov, "idx")
    assert a == render_svg(s, ov, "idx")
    assert 'class="colorbar"' in a and 'class="overlay"' in a


def test_reports_reproducible(tmp_path):
    outs = []
    for name in ("a", "b"):
        d = tmp_path / name
        assert main(["eigs", "--shape", "stadium:ratio=0.5,n=128", "--h", "0.08", "--seed", "7",
                     "--output-dir", str(d)]) == 0
        rep = _report(d)
        rep.pop("timestamp")
        outs.append(json.dumps(rep, sort_keys=True))
    assert outs[0] == outs[1]


def test_render_disk_no_highlights(tmp_path):
    assert main(["render", "--shape", "disk:n=128", "--output-dir", str(tmp_path)]) == 0
    svg = (tmp_path / "shape.svg").read_text()
    assert svg.count("<path") == 1 and 'class="flat"' not in svg and 'class="junction"' not in svg


def test_optimize_manifest(tmp_path):
    args = ["optimize", "--objective", "lambda2-convex", "--v0", "1", "--seed", "7", "--n-vertices", "48",
            "--max-iter", "6", "--refine-vertices", "0", "--h", "0.08", "--output-dir", str(tmp_path)]
    assert main(args) == 0
    for f in ("trace.csv", "shape.csv", "junctions.json", "overdetermined.json", "report.json"):
        assert (tmp_path / f).exists()

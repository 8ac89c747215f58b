import json
import subprocess
import sys

import pytest

from ttess import cli, monitor
from ttess.tessellation import load

BASE = """
seed = 4
iterations = 600
burn_in = 100
subsample = 50

[model]
name = "crtt"
tau = 1.9

[output]
dir = "{out}"
trace_period = 50
"""

VERIFY = """
seed = 11

[model]
name = "crtt"
tau = 1.0

[proposals]
p_split = {ps}
p_merge = {pm}
p_flip = {pf}

[output]
dir = "{out}"

[verify]
gnz_states = 300
gnz_period = 10
uniformity_states = 3000
"""


def write(tmp_path, text, name="run.toml"):
    path = tmp_path / name
    path.write_text(text)
    return str(path)


@pytest.mark.parametrize(
    "body,fragment",
    [
        ("iterations = -3\n", "iterations"),
        ("iterations = 'many'\n", "iterations"),
        ("colour = 1\n", "colour"),
        ("[model]\nname = 'crtt'\ntau = -1.0\n", "model"),
        ("[model]\nname = 'hexagons'\n", "hexagons"),
        ("[proposals]\np_split = 0.9\np_merge = 0.9\n", "proposals"),
        ("[output]\nsvg_period = -1\n", "output.svg_period"),
        ("[output]\nsave_samples = 'yes'\n", "output.save_samples"),
        ("[domain]\nshape = 'circle'\n", "domain.shape"),
        ("[domain]\nvertices = [[0, 0], [1, 0]]\n", "domain"),
        ("[verify]\ngnz_states = 1\n", "verify.gnz_states"),
        ("iterations = [\n", "run.toml"),
    ],
)
def test_config_errors_exit_2(tmp_path, capsys, body, fragment):
    code = cli.main(["simulate", "--config", write(tmp_path, body)])
    assert code == cli.EXIT_CONFIG
    err = capsys.readouterr().err
    assert "config error" in err and fragment in err


def test_missing_config_file(tmp_path, capsys):
    assert cli.main(["simulate", "--config", str(tmp_path / "none.toml")]) == cli.EXIT_CONFIG


def test_bad_overrides(tmp_path):
    cfg = write(tmp_path, BASE.format(out=tmp_path / "o"))
    assert cli.main(["simulate", "--config", cfg, "--iterations", "-1"]) == cli.EXIT_CONFIG
    assert cli.main(["simulate", "--config", cfg, "--replicates", "0"]) == cli.EXIT_CONFIG


def test_parse_config_defaults():
    cfg = cli.parse_config({})
    assert cfg.model.tau == 1.0
    assert cfg.domain.area == pytest.approx(1.0)
    sq = cli.parse_config({"domain": {"shape": "square", "side": 2.0}})
    assert sq.domain.perimeter == pytest.approx(8.0)
    comp = cli.parse_config(
        {"model": {"name": "composite", "components": [{"name": "crtt", "tau": 2.0}, {"name": "area", "alpha": 93000.0}]}}
    )
    assert comp.model.stability_constant == pytest.approx(2.0)


def test_simulate_artifacts_and_determinism(tmp_path):
    out = tmp_path / "a"
    cfg = write(tmp_path, BASE.format(out=out))
    assert cli.main(["simulate", "--config", cfg]) == 0
    for name in ("trace.csv", "final.ttess", "final.svg", "samples.txt", "summary.json"):
        assert (out / name).is_file(), name
    trace = monitor.read_trace_csv(out / "trace.csv")
    assert [r.iteration for r in trace] == list(range(50, 601, 50))
    summary = json.loads((out / "summary.json").read_text())
    final = load(out / "final.ttess")
    assert final.validate() == []
    assert summary["nseint"] == final.stats.nseint
    assert summary["iterations"] == 600
    samples = cli.read_samples(out / "samples.txt")
    assert [it for it, _ in samples] == list(range(150, 601, 50))
    assert samples[-1][1].same_geometry(final)
    # the same seed reproduces every file byte for byte
    again = tmp_path / "b"
    assert cli.main(["simulate", "--config", cfg, "--out", str(again)]) == 0
    for name in ("trace.csv", "final.ttess", "final.svg", "samples.txt"):
        assert (again / name).read_bytes() == (out / name).read_bytes(), name
    other = tmp_path / "c"
    assert cli.main(["simulate", "--config", cfg, "--out", str(other), "--seed", "5"]) == 0
    assert (other / "trace.csv").read_bytes() != (out / "trace.csv").read_bytes()


def test_svg_snapshots(tmp_path):
    out = tmp_path / "s"
    cfg = write(tmp_path, BASE.format(out=out).replace("trace_period = 50", "trace_period = 50\nsvg_period = 200"))
    assert cli.main(["simulate", "--config", cfg]) == 0
    assert sorted(p.name for p in out.glob("state_*.svg")) == [
        "state_000000200.svg",
        "state_000000400.svg",
        "state_000000600.svg",
    ]


def test_render_matches_in_memory(tmp_path):
    out = tmp_path / "r"
    assert cli.main(["simulate", "--config", write(tmp_path, BASE.format(out=out))]) == 0
    target = tmp_path / "again.svg"
    assert cli.main(["render", str(out / "final.ttess"), "--out", str(target)]) == 0
    assert target.read_bytes() == (out / "final.svg").read_bytes()
    assert target.read_text() == monitor.render_svg(load(out / "final.ttess"))
    assert cli.main(["render", str(out / "final.ttess")]) == 0
    assert (out / "final.svg").is_file()


def test_render_bad_input(tmp_path):
    bad = tmp_path / "bad.ttess"
    bad.write_text("garbage\n")
    assert cli.main(["render", str(bad)]) == cli.EXIT_CONFIG


def test_stats_writes_csvs(tmp_path):
    out = tmp_path / "r"
    assert cli.main(["simulate", "--config", write(tmp_path, BASE.format(out=out))]) == 0
    st = tmp_path / "stats"
    assert cli.main(["stats", str(out / "samples.txt"), "--out", str(st), "--lags", "0", "50", "100"]) == 0
    lor = monitor.read_lorenz_csv(st / "lorenz.csv")
    assert lor[-1] == (1.0, 1.0)
    surv = monitor.read_survival_csv(st / "survival.csv")
    assert surv.lags == [0, 50, 100]
    assert surv.fraction_common[0] == 1.0
    angles = monitor.read_angles_csv(st / "angles.csv")
    assert angles.total > 0
    # a single state file also works
    assert cli.main(["stats", str(out / "final.ttess"), "--out", str(tmp_path / "one")]) == 0
    assert (tmp_path / "one" / "survival.csv").is_file()


def test_replicates(tmp_path):
    out = tmp_path / "rep"
    cfg = write(tmp_path, BASE.format(out=out))
    assert cli.main(["simulate", "--config", cfg, "--replicates", "2"]) == 0
    a, b = (out / "rep_000" / "trace.csv"), (out / "rep_001" / "trace.csv")
    assert a.is_file() and b.is_file()
    assert a.read_bytes() != b.read_bytes()


def test_verify_passes(tmp_path, capsys):
    out = tmp_path / "v"
    cfg = write(tmp_path, VERIFY.format(out=out, ps=0.3333, pm=0.3333, pf=0.3333))
    assert cli.main(["verify", "--config", cfg]) == cli.EXIT_OK
    report = json.loads((out / "verify.json").read_text())
    assert report["convergence"]["verdict"] == "convergent"
    assert report["gnz_split"]["pass"] and report["gnz_flip"]["pass"]
    assert report["uniformity_two_lines"]["pass"]
    assert capsys.readouterr().out.count("PASS") == 3


def test_verify_unknown_verdict(tmp_path):
    out = tmp_path / "v"
    cfg = write(tmp_path, VERIFY.format(out=out, ps=0.5, pm=0.5, pf=0.0))
    assert cli.main(["verify", "--config", cfg]) == cli.EXIT_UNKNOWN
    assert json.loads((out / "verify.json").read_text())["convergence"]["verdict"] == "not established"


def test_console_script():
    res = subprocess.run([sys.executable, "-m", "ttess.cli", "--help"], capture_output=True, text=True)
    assert res.returncode == 0
    assert "simulate" in res.stdout

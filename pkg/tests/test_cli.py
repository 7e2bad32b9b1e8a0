import json

import numpy as np
import pytest

import oracles
from greedylab.cli import main
from greedylab.config import settings


@pytest.fixture
def specs(tmp_path):
    files = {}
    for name, d in {"lp": {"variant": "lp", "p": 2}, "ts": {"variant": "tsirelson"},
                    "bad": {"variant": "nope"}}.items():
        f = tmp_path / f"{name}.json"
        f.write_text(json.dumps(d))
        files[name] = str(f)
    return files


def test_analyze_lp(specs, tmp_path):
    out = tmp_path / "r.json"
    rc = main(["analyze", "--space", specs["lp"], "--dim", "8", "--samples", "500", "--budget", "200",
               "--out", str(out)])
    assert rc == 0
    rep = json.loads(out.read_text())
    assert rep["all_passed"] and rep["reports"][0]["Delta"] == pytest.approx(1.0)


def test_analyze_tsirelson_phi_matches_recursion(specs, tmp_path):
    out = tmp_path / "r.json"
    assert main(["analyze", "--space", specs["ts"], "--dim", "6", "--samples", "300", "--budget", "100",
                 "--out", str(out)]) == 0
    phi = json.loads(out.read_text())["reports"][0]["phi"]
    x = np.zeros(6)
    x[3:] = 1
    assert phi[2] == pytest.approx(oracles.tsirelson_norm_naive(x))
    assert phi[5] == pytest.approx(oracles.tsirelson_norm_naive(np.ones(6)))


def test_analyze_bad_spec_exits_1(specs, capsys):
    assert main(["analyze", "--space", specs["bad"], "--dim", "3"]) == 1
    assert main(["analyze", "--space", "/nonexistent.json", "--dim", "3"]) == 1


def test_usage_error_exits_1():
    with pytest.raises(SystemExit) as e:
        main(["analyze"])
    assert e.value.code == 1


def test_cap_exceeded_names_the_cap(specs, capsys):
    assert main(["analyze", "--space", specs["lp"], "--dim", "8", "--cap-enum", "4"]) == 1
    assert "enum_cap" in capsys.readouterr().err
    assert settings.enum_cap == 20  # restored after the run


def test_renorm_democratic_tsirelson(specs, tmp_path):
    out = tmp_path / "t.json"
    assert main(["renorm", "thm42", "--space", specs["ts"], "--dim", "8", "--eps", "1", "--out", str(out)]) == 0
    from greedylab.fundfn import democracy_constant
    from greedylab.serialize import load_space
    assert democracy_constant(load_space(out)) <= 2 + 1e-9


def test_renorm_is_byte_stable(specs, tmp_path):
    a, b = tmp_path / "a.json", tmp_path / "b.json"
    for f in (a, b):
        assert main(["renorm", "thm21", "--space", specs["lp"], "--dim", "5", "--out", str(f)]) == 0
    assert a.read_bytes() == b.read_bytes()


def test_renorm_truncation_infeasible(specs, capsys):
    assert main(["renorm", "thm43", "--space", specs["lp"], "--eps", "0.01", "--dim", "6"]) == 2
    assert "n0 exceeds dimension" in capsys.readouterr().err


def test_renorm_needs_eps(specs):
    assert main(["renorm", "thm42", "--space", specs["lp"], "--dim", "4"]) == 1


def test_fundfn_delta(capsys):
    assert main(["fundfn", "delta", "--formula", "sqrt", "--cap", "100000", "--m", "4"]) == 0
    lines = capsys.readouterr().out.strip().splitlines()
    assert lines[0] == "m,delta,n_lo,n_hi"
    assert float(lines[1].split(",")[1]) == pytest.approx(0.5, abs=1e-6)


def test_fundfn_envelope(tmp_path, capsys):
    s = tmp_path / "s.json"
    s.write_text("[1, 1.2, 1.8]")
    assert main(["fundfn", "envelope", "--samples", str(s)]) == 0
    rows = [r.split(",") for r in capsys.readouterr().out.strip().splitlines()[1:]]
    assert np.allclose([float(r[2]) for r in rows], oracles.upper_hull_values([1, 1.2, 1.8]))


def test_fundfn_alternating(capsys):
    assert main(["fundfn", "alternating", "--breakpoints", "1,10,100,1000"]) == 0
    rows = {int(r.split(",")[0]): float(r.split(",")[1])
            for r in capsys.readouterr().out.strip().splitlines()[1:]}
    assert rows[10] == 10 and rows[100] == 10 and rows[1000] == pytest.approx(100)


def test_fundfn_interpolation_and_urp(capsys, tmp_path):
    out = tmp_path / "l.json"
    assert main(["fundfn", "lemma31", "--formula", "power", "--alpha", "0.9", "--m", "2", "--eps", "0.5",
                 "--cap", "20000", "--format", "json", "--out", str(out)]) == 0
    d = json.loads(out.read_text())
    assert all(d["checks"].values())
    assert main(["fundfn", "urp", "--formula", "sqrt", "--cap", "1000"]) == 0
    assert capsys.readouterr().out.strip().splitlines()[1].startswith("4,")

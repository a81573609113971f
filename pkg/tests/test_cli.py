import csv
import io
import json

import pytest

from fmeixner.cli import main
from fmeixner.experiments import ConfigError, load_config, parse_config, run_experiment


def run(capsys, *argv):
    code = main(list(argv))
    out, err = capsys.readouterr()
    return code, out, err


def rows(text):
    return list(csv.DictReader(io.StringIO(text)))


def test_moments_catalan_columns(capsys):
    code, out, _ = run(capsys, "moments", "--a1", "0", "--a2", "0", "--b1", "1", "--b2", "1",
                       "--mmax", "8")
    assert code == 0
    r = rows(out)
    assert [float(x["comb"]) for x in r] == [1, 0, 1, 0, 2, 0, 5, 0, 14]
    assert all(float(x["max_dev"]) == 0 for x in r)
    assert list(r[0]) == ["m", "comb", "tridiag", "fock", "max_dev"]


def test_moments_dirac_and_beta2_zero(capsys, tmp_path):
    code, out, _ = run(capsys, "moments", "--a1", "1.5", "--b1", "0", "--mmax", "4")
    assert code == 0 and [float(x["fock"]) for x in rows(out)] == [1.5 ** m for m in range(5)]
    code, _, _ = run(capsys, "moments", "--a1", "1", "--a2", "2", "--b1", "1", "--b2", "0",
                     "--out", str(tmp_path))
    man = json.loads((tmp_path / "manifest.json").read_text())
    assert man["run"]["params"]["fock_route"] == "beta2-zero"
    assert rows((tmp_path / "moments.csv").read_text())[4]["fock"] == "13.0"


def test_moments_json_and_bad_methods(capsys):
    code, out, _ = run(capsys, "moments", "--mmax", "2", "--format", "json", "--methods", "comb")
    assert code == 0 and json.loads(out)[2] == {"m": 2, "comb": 1.0, "max_dev": 0.0}
    code, _, err = run(capsys, "moments", "--methods", "comb,magic")
    assert code == 2 and "methods" in err


def test_computation_error_exit_code(capsys):
    code, _, err = run(capsys, "moments", "--b2", "-1")
    assert code == 1 and "non-negative" in err


def test_density(capsys, tmp_path):
    code, out, err = run(capsys, "density", "--grid", "5", "--xmin", "-4", "--xmax", "4")
    assert code == 0
    r = rows(out)
    assert float(r[0]["density"]) == 0.0 and float(r[-1]["density"]) == 0.0
    assert float(r[2]["density"]) == pytest.approx(1 / 3.141592653589793)
    rep = json.loads(err)
    assert rep["mass"] == pytest.approx(1.0, abs=1e-6)
    assert max(c["abs_error"] for c in rep["moment_check"]) < 1e-5
    code, _, _ = run(capsys, "density", "--a2", "0.5", "--b2", "1.5", "--out", str(tmp_path),
                     "--figures")
    assert code == 0
    assert {"density.csv", "density_report.json", "density.png", "manifest.json"} <= \
        {p.name for p in tmp_path.iterdir()}


def test_density_errors(capsys):
    assert run(capsys, "density", "--a1", "1")[0] == 2
    code, _, err = run(capsys, "density", "--a2", "1", "--b2", "1")
    assert code == 1 and "denominator" in err


def test_fock_command(capsys):
    args = ["--a1", "1", "--a2", "-1", "--b1", "2", "--b2", "3"]
    code, out, _ = run(capsys, "fock", "p1* p2* p2* p2 p2 p2* p2 p1", *args)
    assert code == 0 and float(out) == pytest.approx(54.0)
    code, out, _ = run(capsys, "fock", "p1* p2* g p2* p2 g p2 p1 g", *args)
    assert float(out) == pytest.approx(18.0)
    assert float(run(capsys, "fock", "")[1]) == 1.0
    code, _, err = run(capsys, "fock", "p1 x2 p1*")
    assert code == 2 and "token 1" in err
    code, _, err = run(capsys, "fock", "w w w w", "--depth", "2")
    assert code == 1 and "exactness" in err


def test_cfree_command(capsys, tmp_path):
    code, out, _ = run(capsys, "cfree", "--word", "s,u,s", "--label", "s=0.5,-0.5,1,2",
                       "--draws", "20")
    rep = json.loads(out)
    assert code == 0 and rep["pass"] and rep["word"] == ["s", "u", "s"]
    code, out, _ = run(capsys, "cfree", "--word", "s,u,s", "--centering", "psi1", "--draws", "20",
                       "--check")
    assert code == 3 and not json.loads(out)["pass"]


def test_nc_dump(capsys):
    code, out, _ = run(capsys, "nc", "4", "--pairs-only")
    assert out.splitlines() == ["{1,2}{3,4} | d=1,1", "{1,4}{2,3} | d=1,2"]
    assert len(run(capsys, "nc", "6")[1].splitlines()) == 51


SMALL = """
n = 48
trials = 6
seed = 3
m_max = 3
states = [1, 2]

[labels.a]
a1 = 0.5
a2 = -0.5
v12 = 1.0
v22 = 2.0

[labels.b]
v12 = 1.0
v22 = 1.0

[[words]]
id = "ab"
labels = ["a", "b", "a"]
polys = [[0.0, 1.0], [-1.0, 0.0, 1.0], [0.0, 1.0]]

[sweep]
label = "b"
m = 2
n_list = [16, 32]
"""


def test_rmt_run_is_byte_identical_and_replayable(capsys, tmp_path):
    cfg = tmp_path / "c.toml"
    cfg.write_text(SMALL)
    a, b, c = tmp_path / "a", tmp_path / "b", tmp_path / "c"
    assert run(capsys, "rmt", "--config", str(cfg), "--out", str(a))[0] == 0
    assert run(capsys, "rmt", "--config", str(cfg), "--out", str(b))[0] == 0
    assert (a / "rmt.csv").read_bytes() == (b / "rmt.csv").read_bytes()
    assert run(capsys, "replay", str(a / "manifest.json"), "--out", str(c))[0] == 0
    assert (a / "rmt.csv").read_bytes() == (c / "rmt.csv").read_bytes()
    r = rows((a / "rmt.csv").read_text())
    assert list(r[0]) == ["target", "index", "n", "estimate", "stderr", "oracle", "abs_error"]
    assert {x["target"] for x in r} >= {"a@tau1", "a@tau2", "b@tau1", "a.b.a@tau1", "sweep:b@tau1"}
    m0 = [x for x in r if x["index"] == "0" and not x["target"].startswith("sweep")]
    assert all(float(x["estimate"]) == 1.0 and float(x["abs_error"]) == 0.0 for x in m0)
    summary = json.loads((a / "summary.json").read_text())
    assert summary["n_checks"] == len(summary["checks"]) > 0


def test_rmt_overrides_and_check(capsys, tmp_path):
    cfg = tmp_path / "c.toml"
    cfg.write_text(SMALL)
    code, _, _ = run(capsys, "rmt", "--config", str(cfg), "--trials", "3", "--n", "32",
                     "--out", str(tmp_path / "o"))
    man = json.loads((tmp_path / "o" / "manifest.json").read_text())
    assert man["run"]["params"]["config"]["trials"] == 3
    assert man["run"]["params"]["config"]["n"] == 32
    assert set(man["versions"]) == {"fmeixner", "numpy", "scipy", "python"}
    # n = 32 with 3 trials is far from the limit, so --check reports the failure
    code, _, err = run(capsys, "rmt", "--config", str(cfg), "--trials", "3", "--n", "32", "--check")
    assert code == 3 and json.loads(err)["pass"] is False


def test_rmt_config_errors_carry_line_numbers(capsys, tmp_path):
    bad = tmp_path / "bad.toml"
    bad.write_text("n = 64\n[labels.a]\nv12 = 1.0\nbogus = 2\n")
    code, _, err = run(capsys, "rmt", "--config", str(bad))
    assert code == 2 and "line 4" in err
    bad.write_text("n = 64\n[labels.a\n")
    code, _, err = run(capsys, "rmt", "--config", str(bad))
    assert code == 2 and "line 2" in err
    bad.write_text('n = "big"\n[labels.a]\n')
    code, _, err = run(capsys, "rmt", "--config", str(bad))
    assert code == 2 and "line 1" in err
    assert run(capsys, "rmt", "--config", str(tmp_path / "missing.toml"))[0] == 2


@pytest.mark.parametrize("name", ["block_moments", "cfree_counterexample", "finite_size"])
def test_bundled_configs_parse(name):
    from importlib.resources import files
    cfg, _ = load_config(str(files("fmeixner") / "configs" / f"{name}.toml"))
    assert cfg.n == 512 and cfg.trials == 400 and cfg.block.n1 == 22


def test_bundled_counterexample_config_small_run(capsys, tmp_path):
    code, _, _ = run(capsys, "rmt", "--config", "bundled:cfree_counterexample", "--n", "64",
                     "--trials", "4",
                     "--out", str(tmp_path), "--figures")
    assert code == 0
    r = rows((tmp_path / "rmt.csv").read_text())
    assert [float(x["oracle"]) for x in r] == pytest.approx([1, 0, 2, 0], abs=1e-12)
    assert (tmp_path / "rmt.png").exists()


def test_plot_subcommand(capsys, tmp_path):
    run(capsys, "moments", "--mmax", "6", "--out", str(tmp_path))
    code, out, _ = run(capsys, "plot", str(tmp_path))
    assert code == 0 and out.strip().endswith("moments.png")
    assert run(capsys, "plot", str(tmp_path / "nothing"))[0] == 2


def test_parse_config_validation():
    base = {"n": 64, "labels": {"a": {"v12": 1.0}}}
    assert parse_config(base).block.n1 == 8
    for bad in ({**base, "states": [3]}, {**base, "m_max": 9}, {"n": 64},
                {**base, "words": [{"labels": ["zz"]}]}, {**base, "rho": 2.0},
                {**base, "sweep": {"label": "zz", "n_list": [8]}}):
        with pytest.raises(ConfigError):
            parse_config(bad)


def test_run_experiment_checks_use_tolerance():
    cfg = parse_config({"n": 32, "trials": 2, "m_max": 1, "tol_abs": 100.0,
                        "labels": {"a": {"v12": 1.0}}})
    res = run_experiment(cfg)
    assert res.passed and len(res.checks) == 2

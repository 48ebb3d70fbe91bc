import csv
import json
import math

import numpy as np
import pytest

from weakmoments import __version__
from weakmoments.cli import EXIT_CONFIG, EXIT_DOMAIN, EXIT_NUMERIC, apply_overrides, main, resolve_config


def run(tmp_path, *args):
    code = main([*args, "--out", str(tmp_path)])
    return code


def read_csv(path):
    with open(path, newline="") as fh:
        rows = list(csv.reader(fh))
    return rows[0], [[float(v) if v not in ("true", "false") else v == "true" for v in r] for r in rows[1:]]


def test_moments_default(tmp_path, capsys):
    assert run(tmp_path, "moments") == 0
    cols, rows = read_csv(tmp_path / "moments.csv")
    assert cols == ["n", "m_n"] and len(rows) == 13
    assert rows[0][1] == pytest.approx(math.exp(0.5) * math.erfc(1 / math.sqrt(2)), abs=1e-10)
    summary = json.loads(capsys.readouterr().out)
    assert summary["outputs"] == ["moments.csv"]
    man = json.loads((tmp_path / "moments_manifest.json").read_text())
    assert man["seed"] == 7 and man["version"] == __version__
    assert man["config"]["distribution"]["family"] == "cauchy"
    assert man["wall_clock_seconds"] >= 0


def test_moments_of_a_point_mass_are_exact(tmp_path):
    cfg = tmp_path / "atom.toml"
    cfg.write_text('[distribution]\nfamily = "atom"\nlocation = 1.0\nweight = 2.0\n[experiment]\nN = 6\n')
    assert run(tmp_path, "moments", "--config", str(cfg)) == 0
    _, rows = read_csv(tmp_path / "moments.csv")
    assert all(r[1] == 2 * math.exp(-0.5) for r in rows)


def test_moments_of_student_t_match_reference(tmp_path, oracles):
    cfg = tmp_path / "t3.toml"
    cfg.write_text('[distribution]\nfamily = "studentt"\nnu = 3.0\n'
                   '[quadrature]\nabs_tol = 1e-14\nrel_tol = 1e-13\n')
    assert run(tmp_path, "moments", "--config", str(cfg)) == 0
    _, rows = read_csv(tmp_path / "moments.csv")
    ref = oracles["student_t3_gauss_moments"]
    for n, m in rows:
        assert m == pytest.approx(ref[int(n)], rel=1e-11, abs=1e-12)


def test_moments_comparison_under_vanishing_kernel(tmp_path, capsys):
    args = ["moments", "--set", 'kernel.family="zero_at_origin"',
            "--set", 'distribution={family="mixture",components=[{family="cauchy"},{family="atom",location=0.0}]}',
            "--set", 'experiment.compare={family="cauchy"}', "--set", "experiment.N=10"]
    assert run(tmp_path, *args) == 0
    assert json.loads(capsys.readouterr().out)["max_abs_difference"] == 0.0


def test_cf_and_cumulants(tmp_path):
    assert run(tmp_path, "cf", "--set", "experiment.n_points=21") == 0
    cols, rows = read_csv(tmp_path / "cf.csv")
    assert cols == ["t", "re_cf", "im_cf", "re_cgf", "im_cgf", "winding"] and len(rows) == 21
    assert run(tmp_path, "cumulants") == 0
    cols, rows = read_csv(tmp_path / "cumulants.csv")
    r = {c: np.array([row[i] for row in rows]) for i, c in enumerate(cols)}
    assert np.allclose(r["kappa_sum"], r["kappa_n"] + r["kappa_partner"], atol=1e-6)
    assert r["kappa_shifted"][0] == pytest.approx(r["kappa_n"][0] + 2, abs=1e-7)
    assert r["kappa_scaled"][1] == pytest.approx(9 * r["kappa_n"][1], rel=1e-6)


def test_clt_table(tmp_path, capsys):
    assert run(tmp_path, "clt", "--set", "experiment.n_points=61",
               "--set", 'distribution={family="cauchy",mu=1.0,gamma=1.0}') == 0
    cols, rows = read_csv(tmp_path / "clt.csv")
    assert cols == ["n", "sup_error", "log_error", "bound", "fitted_slope"]
    assert -0.65 <= rows[0][4] <= -0.35
    assert all(r[2] <= r[3] for r in rows)
    assert json.loads(capsys.readouterr().out)["bound_holds"] is True


def test_tikhonov_without_noise_is_bias_only(tmp_path):
    assert run(tmp_path, "tikhonov", "--set", "experiment.deltas=[0.0]", "--set", "experiment.schedule=false") == 0
    _, rows = read_csv(tmp_path / "tikhonov.csv")
    assert len(rows) == 4
    assert all(r[3] == r[4] and r[5] is True for r in rows)


def test_estimate_table(tmp_path):
    assert run(tmp_path, "estimate", "--set", "experiment.reps=200", "--set", "experiment.n_list=[100]") == 0
    cols, rows = read_csv(tmp_path / "estimate.csv")
    assert cols == ["n", "bias", "sd", "sd_sqrt_n", "failures"]
    assert rows[0][0] == 100 and rows[0][4] == 0


def test_remaining_subcommands_run(tmp_path):
    for args in (["recover", "--set", "experiment.N=8"], ["cdf", "--set", "experiment.a_points=5"],
                 ["gevrey", "--set", "experiment.k_max=5"], ["carleman", "--set", "experiment.N=8"],
                 ["distclt", "--set", "experiment.reps=1000", "--set", "experiment.n_list=[2,5]"]):
        assert run(tmp_path, *args) == 0, args
        assert (tmp_path / f"{args[0]}_manifest.json").exists()


def test_replaying_a_manifest_is_byte_identical(tmp_path):
    a, b = tmp_path / "a", tmp_path / "b"
    assert main(["distclt", "--out", str(a), "--seed", "99", "--set", "experiment.reps=1000",
                 "--set", "experiment.n_list=[3]"]) == 0
    assert main(["distclt", "--out", str(b), "--config", str(a / "distclt_manifest.json")]) == 0
    assert (a / "distclt.csv").read_bytes() == (b / "distclt.csv").read_bytes()
    assert json.loads((b / "distclt_manifest.json").read_text())["seed"] == 99


def test_json_output_and_no_temp_files(tmp_path):
    assert run(tmp_path, "moments", "--format", "json", "--set", "experiment.N=3",
               "--set", "experiment.fd_order=1") == 0
    data = json.loads((tmp_path / "moments.json").read_text())
    assert data["columns"] == ["n", "m_n", "m_n_from_cf"]
    assert data["rows"][3][2] is None
    assert not [p for p in tmp_path.iterdir() if p.name.startswith(".")]


def test_exit_codes(tmp_path, capsys):
    bad = tmp_path / "bad.toml"
    bad.write_text("[experiment]\nN = 3\nN = 4\n")
    assert run(tmp_path, "moments", "--config", str(bad)) == EXIT_CONFIG
    assert "line 3" in capsys.readouterr().err
    assert run(tmp_path, "moments", "--set", 'experiment.N="many"') == EXIT_CONFIG
    assert "N" in capsys.readouterr().err
    assert run(tmp_path, "moments", "--set", "experiment.order=3") == EXIT_CONFIG
    assert run(tmp_path, "moments", "--set", "bogus.x=1") == EXIT_CONFIG
    assert run(tmp_path, "moments", "--set", 'distribution.family="laplace"') == EXIT_CONFIG
    assert run(tmp_path, "moments", "--set", "distribution.gamma=-1.0") == EXIT_DOMAIN
    assert run(tmp_path, "carleman", "--set", 'kernel.family="zero_at_origin"') == EXIT_DOMAIN
    assert run(tmp_path, "moments", "--set", "quadrature.max_subdivisions=1",
               "--set", "quadrature.abs_tol=1e-300", "--set", "quadrature.rel_tol=1e-300") == EXIT_NUMERIC


def test_override_parsing():
    cfg = apply_overrides({}, ["experiment.N=5", "experiment.name=abc", "kernel.a=0.25"])
    assert cfg == {"experiment": {"N": 5, "name": "abc"}, "kernel": {"a": 0.25}}
    resolved = resolve_config("moments", {"experiment": {"N": 5}})
    assert resolved["experiment"]["N"] == 5 and resolved["quadrature"]["abs_tol"] == 1e-10

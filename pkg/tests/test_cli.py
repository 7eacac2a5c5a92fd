import csv
import json
import math
import subprocess
import sys

import numpy as np
import pytest

from mixspec import WindowSpec, markov_profile, deviation_constant, two_state_example
from mixspec.bounds import REPORT_FIELDS, bias_bound_bartlett, loglog_rate
from mixspec.cli import build_parser, main
from mixspec.harness import RESULT_HEADER

B1_BARTLETT_5 = 20865.256987198880632
FIT_BARTLETT_5 = (22161.95399190271, 3.3924867329734085)
BIAS_BARTLETT_5 = 2.4593901261517901922


def run(*argv):
    try:
        return main([str(a) for a in argv])
    except SystemExit as exc:
        return exc.code


def read_rows(path):
    with open(path, newline="") as fh:
        return list(csv.reader(fh))


# -- simulate -----------------------------------------------------------------------


def test_simulate_preset_is_reproducible(tmp_path):
    a, b = tmp_path / "a.csv", tmp_path / "b.csv"
    assert run("simulate", "--preset", "two-state", "--n", 1000, "--seed", 7, "--out", a) == 0
    assert run("simulate", "--preset", "two-state", "--n", 1000, "--seed", 7, "--out", b) == 0
    assert len(read_rows(a)) == 1000
    assert a.read_bytes() == b.read_bytes()
    vals = sorted({float(r[0]) for r in read_rows(a)})
    assert vals == pytest.approx([-7 / 12, 5 / 12], abs=1e-15)


def test_simulate_requires_out(tmp_path, capsys):
    assert run("simulate", "--preset", "two-state", "--n", 10) == 2


def test_simulate_needs_a_model(tmp_path):
    assert run("simulate", "--n", 10, "--out", tmp_path / "x.csv") == 2


def test_simulate_linear_model_file(tmp_path):
    model = tmp_path / "ma.toml"
    model.write_text("[linear]\nimpulse_response = [1.0, 0.5]\nsigma = 2.0\n")
    out = tmp_path / "y.csv"
    assert run("simulate", "--model", model, "--n", 50, "--innovation", "rademacher", "--out", out) == 0
    vals = np.array([float(r[0]) for r in read_rows(out)])
    assert set(np.round(np.abs(vals), 12)) <= {1.0, 3.0}


def test_resolved_config_is_echoed(tmp_path, capsys):
    run("simulate", "--preset", "two-state", "--n", 5, "--seed", 3, "--out", tmp_path / "y.csv")
    echoed = json.loads(capsys.readouterr().err.strip().splitlines()[-1])
    assert echoed["command"] == "simulate" and echoed["seed"] == 3 and echoed["n"] == 5


# -- estimate ------------------------------------------------------------------------


def test_estimate_on_empty_input_is_data_error(tmp_path):
    empty = tmp_path / "empty.csv"
    empty.write_text("")
    assert run("estimate", "--input", empty, "--method", "bartlett", "--segment-len", 5, "--segments", 1,
               "--out", tmp_path / "e.csv") == 3
    assert run("estimate", "--input", empty, "--method", "bartlett", "--segment-len", 5,
               "--out", tmp_path / "e.csv") == 3


def test_estimate_on_malformed_input_is_data_error(tmp_path):
    bad = tmp_path / "bad.csv"
    bad.write_text("1\nfoo\n")
    assert run("estimate", "--input", bad, "--method", "bartlett", "--segment-len", 1, "--out", tmp_path / "e.csv") == 3


def test_bartlett_with_mismatched_hop_is_usage_error(tmp_path):
    y = tmp_path / "y.csv"
    y.write_text("\n".join(["1"] * 20))
    assert run("estimate", "--input", y, "--method", "bartlett", "--segment-len", 5, "--hop", 3,
               "--out", tmp_path / "e.csv") == 2


def test_estimate_example_near_density(tmp_path, chain_profile):
    y = tmp_path / "y.csv"
    out = tmp_path / "e.csv"
    assert run("simulate", "--preset", "two-state", "--n", 50000, "--seed", 11, "--out", y) == 0
    assert run("estimate", "--input", y, "--method", "bartlett", "--segment-len", 5, "--freq", 0.5,
               "--segments", 10**4, "--out", out) == 0
    rows = read_rows(out)
    assert rows[0] == ["k", "s", "re_11", "im_11"]
    assert rows[1][0] == "10000"
    value = float(rows[1][2])
    budget = deviation_constant(chain_profile, 1, 5, 5) * loglog_rate(10**4) + bias_bound_bartlett(chain_profile, 5)
    assert abs(value - 35 / 96) <= budget
    assert abs(value - 35 / 96) <= 0.05


def test_estimate_frequency_grid_and_welch_window_file(tmp_path):
    y = tmp_path / "y.csv"
    y.write_text("\n".join(f"{x},{-x}" for x in np.random.default_rng(0).standard_normal(100)))
    w = tmp_path / "w.csv"
    w.write_text("1\n2\n2\n1\n")
    out = tmp_path / "e.csv"
    assert run("estimate", "--input", y, "--method", "welch", "--segment-len", 4, "--hop", 2, "--window", w,
               "--freq-grid", 5, "--out", out) == 0
    rows = read_rows(out)
    assert len(rows) == 6
    assert [float(r[1]) for r in rows[1:]] == [-0.5, -0.25, 0.0, 0.25, 0.5]
    assert len(rows[0]) == 2 + 2 * 3


def test_estimate_rejects_too_many_segments(tmp_path):
    y = tmp_path / "y.csv"
    y.write_text("\n".join(["1"] * 20))
    assert run("estimate", "--input", y, "--method", "bartlett", "--segment-len", 5, "--segments", 5,
               "--out", tmp_path / "e.csv") == 3


# -- bound ----------------------------------------------------------------------------


def test_bound_variance_at_four(tmp_path):
    out = tmp_path / "b.csv"
    assert run("bound", "--preset", "two-state", "--q", 1, "--k", 4, "--segment-len", 5, "--out", out) == 0
    header, row = read_rows(out)
    rec = dict(zip(header, map(float, row)))
    assert tuple(header) == REPORT_FIELDS
    assert rec["variance_bound"] == pytest.approx(rec["b_q"] / 2, rel=1e-15)


def test_bound_full_report_fixture(tmp_path):
    out = tmp_path / "b.csv"
    assert run("bound", "--preset", "two-state", "--k", 10**4, "--nu", 0.1, "--segment-len", 5, "--out", out) == 0
    rec = dict(zip(*read_rows(out)))
    c, r = FIT_BARTLETT_5
    expect = {
        "k": 10**4, "nu": 0.1, "q": 1.0, "b_q": B1_BARTLETT_5,
        "variance_bound": B1_BARTLETT_5 * math.log2(math.log2(10**4)) / 100,
        "c": c, "r": r,
        "epsilon": c * math.log2(math.log2(10**4)) / 100 * math.exp(r),
        "bias_bound": BIAS_BARTLETT_5,
    }
    for key, val in expect.items():
        assert float(rec[key]) == pytest.approx(val, rel=1e-13), key


def test_bound_is_idempotent(tmp_path, capsys):
    args = ("bound", "--preset", "two-state", "--k", 100, "--method", "welch", "--segment-len", 16, "--hop", 8,
            "--window", "hann")
    run(*args)
    first = capsys.readouterr().out
    run(*args)
    assert capsys.readouterr().out == first
    assert "bias bound" in first


@pytest.mark.parametrize("extra", [("--nu", 1.5), ("--k", 3), ("--q", 0.5)])
def test_bound_domain_errors(extra):
    args = ["bound", "--preset", "two-state", "--k", 100, *extra]
    assert run(*args) == 2


def test_bound_from_profile_table(tmp_path):
    prof = tmp_path / "p.csv"
    prof.write_text("q,M_q,Gamma_dq,gamma_0,gamma_1\n" + "\n".join(f"{q},1,1,1,0" for q in (1, 2, 4, 8, 16, 32)))
    out = tmp_path / "b.csv"
    assert run("bound", "--profile", prof, "--k", 4, "--segment-len", 5, "--out", out) == 0
    rec = dict(zip(*read_rows(out)))
    assert float(rec["b_q"]) == pytest.approx(128 * 3 * math.sqrt(3) * math.sqrt(4 * math.sqrt(6) + 2) + 24, rel=1e-12)


def test_bound_with_profile_and_model_is_usage_error(tmp_path):
    prof = tmp_path / "p.csv"
    prof.write_text("q,M_q,Gamma_dq\n1,1,1\n")
    assert run("bound", "--profile", prof, "--preset", "two-state", "--k", 4) == 2


def test_bound_bad_model_file_names_field(tmp_path, capsys):
    model = tmp_path / "m.toml"
    model.write_text("[markov]\nvalues = [0, 1]\n")
    assert run("bound", "--model", model, "--k", 4) == 2
    assert "transition" in capsys.readouterr().err


# -- verify ------------------------------------------------------------------------------


def test_verify_failure_path(tmp_path):
    prof = tmp_path / "tiny.csv"
    prof.write_text("q,M_q,Gamma_dq,gamma_0\n" + "\n".join(f"{q},1e-9,1e-9,1e-9" for q in (1, 2, 4, 8, 16, 32)))
    out = tmp_path / "r.csv"
    code = run("verify", "--preset", "two-state", "--profile", prof, "--nu", 0.999, "--replications", 5,
               "--checkpoints", "4,16", "--seed", 1, "--out", out)
    assert code == 1
    rows = read_rows(out)
    assert tuple(rows[0]) == RESULT_HEADER and len(rows) == 3


def test_verify_requires_seed(tmp_path):
    assert run("verify", "--preset", "two-state", "--out", tmp_path / "r.csv") == 2


def test_verify_small_bartlett_run(tmp_path, capsys):
    out = tmp_path / "r.csv"
    code = run("verify", "--preset", "two-state", "--method", "bartlett", "--segment-len", 5,
               "--replications", 20, "--checkpoints", "4,16,64,256,1024", "--seed", 0, "--out", out)
    assert code == 0
    assert "PASS" in capsys.readouterr().out
    rows = read_rows(out)[1:]
    assert [int(r[0]) for r in rows] == [4, 16, 64, 256, 1024]
    assert all(int(r[6]) == 0 for r in rows)


def test_verify_from_config_file(tmp_path):
    cfg = tmp_path / "exp.toml"
    cfg.write_text(
        "seed = 2\nreplications = 10\nnu = 0.1\ncheckpoints = [4, 16, 64]\nfreq = 0.5\n"
        '[estimator]\nmethod = "welch"\nsegment_len = 16\nhop = 8\nwindow = "hann"\n'
        "[markov]\ntransition = [[0.3, 0.7], [0.5, 0.5]]\nvalues = [0, 1]\n"
    )
    out1, out2 = tmp_path / "a.csv", tmp_path / "b.csv"
    assert run("verify", "--config", cfg, "--out", out1) == 0
    assert run("verify", "--config", cfg, "--out", out2) == 0
    assert out1.read_bytes() == out2.read_bytes()


def test_verify_flags_override_config(tmp_path, capsys):
    cfg = tmp_path / "exp.toml"
    cfg.write_text("seed = 2\nreplications = 3\ncheckpoints = [4]\n[markov]\ntransition = [[0.3, 0.7], [0.5, 0.5]]\n"
                   "values = [0, 1]\n")
    assert run("verify", "--config", cfg, "--seed", 5, "--checkpoints", "4,8", "--out", tmp_path / "r.csv") == 0
    echoed = json.loads(capsys.readouterr().err.strip().splitlines()[-1])
    assert echoed["seed"] == 5 and echoed["checkpoints"] == [4, 8] and echoed["replications"] == 3


def test_verify_rejects_bad_checkpoints(tmp_path):
    assert run("verify", "--preset", "two-state", "--seed", 0, "--checkpoints", "16,4", "--out", tmp_path / "r.csv") == 2


# -- parser ---------------------------------------------------------------------------


def test_help_lists_flags(capsys):
    parser = build_parser()
    for cmd, flags in {
        "simulate": ["--model", "--preset", "--n", "--seed", "--innovation", "--out"],
        "estimate": ["--input", "--method", "--segment-len", "--hop", "--window", "--freq", "--segments", "--out"],
        "bound": ["--profile", "--q", "--k", "--nu", "--q-grid", "--tail-tol"],
        "verify": ["--config", "--checkpoints", "--full-scale", "--replications", "--workers", "--seed"],
    }.items():
        with pytest.raises(SystemExit) as exc:
            parser.parse_args([cmd, "--help"])
        assert exc.value.code == 0
        text = capsys.readouterr().out
        for flag in flags:
            assert flag in text, (cmd, flag)


def test_module_entry_point():
    proc = subprocess.run([sys.executable, "-m", "mixspec", "bound", "--preset", "two-state", "--k", "4"],
                          capture_output=True, text=True)
    assert proc.returncode == 0
    assert "b_q" in proc.stdout

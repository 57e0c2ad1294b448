import json
import os

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from lbfilm import cli
from lbfilm.cli import RunConfig, main, parse_config, run, serialize_config
from lbfilm.errors import ConfigError

SMALL = """
[model]
L = 0.3
c0 = -0.5
nu = 0.3
[run]
command = steady
"""


def test_parse_minimal_defaults():
    cfg = parse_config("command = steady\nL = 2.0\n")
    assert cfg.command == "steady"
    assert cfg.params.L == 2.0
    assert cfg.params.x_mns == 1.0  # resolved default
    assert cfg.n_scan == 512 and cfg.n_out == 513 and cfg.n == 257
    assert cfg.dt is None and cfg.T == 10.0
    assert cfg.output_dir == "out" and cfg.seed == 0


def test_parse_sections_are_cosmetic():
    a = parse_config(SMALL)
    b = parse_config("command = steady\nL = 0.3\nc0 = -0.5\nnu = 0.3\n")
    assert a == b


def test_parse_default_command_fill():
    cfg = parse_config("L = 1.0\n", default_command="spectrum")
    assert cfg.command == "spectrum"
    with pytest.raises(ConfigError):
        parse_config("L = 1.0\n")  # no command anywhere


def test_parse_errors_carry_line_numbers():
    with pytest.raises(ConfigError, match="line 2: unknown key"):
        parse_config("L = 1.0\nwat = 3\n", default_command="steady")
    with pytest.raises(ConfigError, match="line 3: duplicate key"):
        parse_config("L = 1.0\nc0 = -0.5\nL = 2.0\n", default_command="steady")
    with pytest.raises(ConfigError, match="line 1: invalid value"):
        parse_config("L = banana\n", default_command="steady")
    with pytest.raises(ConfigError, match="line 1: L > 0 required"):
        parse_config("L = -1\n", default_command="steady")
    with pytest.raises(ConfigError, match="line 2: beta >= 0"):
        parse_config("L = 1.0\nbeta = -0.5\n", default_command="steady")
    with pytest.raises(ConfigError, match="line 1: unknown section"):
        parse_config("[menu]\nL = 1.0\n", default_command="steady")
    with pytest.raises(ConfigError, match="unterminated section"):
        parse_config("[model\n", default_command="steady")
    with pytest.raises(ConfigError, match="expected `key = value`"):
        parse_config("just words\n", default_command="steady")
    with pytest.raises(ConfigError, match="needs sweep keys"):
        parse_config("command = sweep\nL = 1.0\n")
    with pytest.raises(ConfigError, match="count >= 16"):
        parse_config("command = branch-points\nlo = 1.0\nhi = 2.0\ncount = 4\n")
    with pytest.raises(ConfigError, match="parameter must be L or beta"):
        parse_config("command = sweep\nlo = 1.0\nhi = 2.0\ncount = 3\nparameter = nu\n")


def test_serialize_round_trip_small():
    cfg = parse_config(SMALL)
    assert parse_config(serialize_config(cfg)) == cfg


@settings(max_examples=60, deadline=None)
@given(
    L=st.floats(0.05, 8.0, allow_nan=False),
    beta=st.floats(0.0, 0.5, allow_nan=False),
    c0=st.floats(-0.95, 0.9, allow_nan=False),
    nu=st.floats(0.0, 2.0, allow_nan=False),
    with_mns=st.booleans(),
    seed=st.integers(0, 10**6),
    T=st.floats(0.01, 50.0, allow_nan=False),
    with_dt=st.booleans(),
)
def test_serialize_round_trip_property(L, beta, c0, nu, with_mns, seed, T, with_dt):
    lines = [
        "command = evolve",
        f"L = {L!r}",
        f"beta = {beta!r}",
        f"c0 = {c0!r}",
        f"nu = {nu!r}",
        f"seed = {seed}",
        f"T = {T!r}",
    ]
    if with_mns:
        lines += [f"x_mns = {0.4 * L!r}", f"l_mns = {0.05 * L!r}"]
    if with_dt:
        lines.append("dt = 0.0005")
    cfg = parse_config("\n".join(lines) + "\n")
    assert parse_config(serialize_config(cfg)) == cfg


def test_steady_end_to_end(tmp_path):
    cfg_file = tmp_path / "run.cfg"
    cfg_file.write_text(SMALL)
    out = tmp_path / "out"
    code = main(["steady", "--config", str(cfg_file), "--output", str(out)])
    assert code == 0
    body = [ln for ln in (out / "catalog.jsonl").read_text().splitlines()
            if not ln.startswith("#")]
    assert len(body) == 1
    rec = json.loads(body[0])
    assert rec["z"] == pytest.approx(-0.020362012280434, abs=1e-9)
    assert rec["nondegenerate"] is True
    assert rec["n_scan"] == 512
    prof = (out / rec["profile"]).read_text().splitlines()
    assert prof[0].startswith("# ")
    x0, u0 = (float(v) for v in [ln for ln in prof if not ln.startswith("#")][0].split())
    assert (x0, u0) == (0.0, 0.0)


def test_outputs_byte_deterministic(tmp_path):
    cfg_file = tmp_path / "run.cfg"
    out = tmp_path / "out"
    cfg_file.write_text(SMALL + f"output_dir = {out}\n")
    cfg = parse_config(cfg_file.read_text())

    def snapshot():
        assert run(cfg) == 0
        return {p.name: p.read_bytes() for p in out.iterdir()}

    assert snapshot() == snapshot()


def test_preamble_parses_back(tmp_path):
    out = tmp_path / "out"
    cfg = parse_config(SMALL + f"output_dir = {out}\n")
    assert run(cfg) == 0
    text = (out / "catalog.jsonl").read_text()
    preamble = "\n".join(ln[2:] for ln in text.splitlines() if ln.startswith("# "))
    assert parse_config(preamble) == cfg


def test_branches_command(tmp_path):
    out = tmp_path / "out"
    cfg = parse_config(
        "command = branches\nL = 1.0\nc0 = -0.5\nnu = 0.3\n"
        f"parameter = beta\nlo = 0.005\nhi = 0.01\ncount = 2\noutput_dir = {out}\n"
    )
    assert run(cfg) == 0
    rows = [ln for ln in (out / "branch_000.csv").read_text().splitlines()
            if not ln.startswith("#")]
    assert rows[0] == "value,z,newton_iters,residual,flagged"
    assert len(rows) == 4  # header + seed + 2 targets
    values = [float(r.split(",")[0]) for r in rows[1:]]
    assert values == pytest.approx([0.0, 0.005, 0.01])


def test_spectrum_command(tmp_path):
    out = tmp_path / "out"
    cfg = parse_config(
        f"command = spectrum\nL = 1.0\nc0 = -0.5\nnu = 0.3\nn = 65\noutput_dir = {out}\n"
    )
    assert run(cfg) == 0
    summary = [json.loads(ln) for ln in (out / "spectrum_summary.jsonl").read_text().splitlines()
               if not ln.startswith("#")]
    assert len(summary) == 1
    assert summary[0]["hyperbolic"] is True
    assert summary[0]["max_abs_imag"] == 0.0
    rows = [ln for ln in (out / "spectrum.csv").read_text().splitlines()
            if not ln.startswith("#")]
    assert rows[0] == "index,k,re,im"
    assert len(rows) == 1 + 64  # one state, n - 1 eigenvalues


def test_evolve_command(tmp_path):
    out = tmp_path / "out"
    cfg = parse_config(
        "command = evolve\nL = 1.0\nc0 = -0.5\nnu = 0.3\nn = 65\n"
        f"dt = 0.001\nT = 0.1\nrecord_every = 10\nseed = 1\noutput_dir = {out}\n"
    )
    assert run(cfg) == 0
    rows = [ln for ln in (out / "trajectory.csv").read_text().splitlines()
            if not ln.startswith("#")]
    assert rows[0] == "t,E,E1,muV2,advect,dEdt_residual,ut_norm,dist_0"
    assert len(rows) == 12  # header + 11 records at 0, 0.01, ..., 0.1
    report = json.loads("".join(ln for ln in (out / "report.json").read_text().splitlines()
                                if not ln.startswith("#")))
    assert report["converged"] is False  # horizon far too short
    assert report["absorb_pass"] is True
    assert (out / "final_profile.dat").exists()


def test_sweep_command(tmp_path):
    out = tmp_path / "out"
    cfg = parse_config(
        "command = sweep\nL = 0.4\nc0 = -0.5\nnu = 0.3\n"
        f"parameter = L\nlo = 0.3\nhi = 0.5\ncount = 3\noutput_dir = {out}\n"
    )
    assert run(cfg, jobs=1) == 0
    rows = [ln for ln in (out / "index.csv").read_text().splitlines()
            if not ln.startswith("#")]
    assert rows[0] == "cell,parameter,value,status,n_states,file"
    assert len(rows) == 4
    assert all(r.split(",")[3] == "ok" for r in rows[1:])
    assert (out / "catalog_0000.jsonl").exists()


def test_sweep_partial_failure(tmp_path, monkeypatch):
    real_cell = cli._sweep_cell

    def flaky(args):
        cfg, i, value = args
        if i == 1:
            return i, value, "error: synthetic cell failure", []
        return real_cell(args)

    monkeypatch.setattr(cli, "_sweep_cell", flaky)
    out = tmp_path / "out"
    text = (
        "command = sweep\nL = 0.4\nc0 = -0.5\nnu = 0.3\n"
        f"parameter = L\nlo = 0.3\nhi = 0.5\ncount = 3\noutput_dir = {out}\n"
    )
    cfg = parse_config(text)
    assert run(cfg, jobs=1) == 0  # >= 1 cell succeeded
    assert run(cfg, jobs=1, strict=True) == 1
    rows = [ln for ln in (out / "index.csv").read_text().splitlines()
            if not ln.startswith("#")]
    assert "synthetic cell failure" in rows[2]

    def always_fail(args):
        cfg, i, value = args
        return i, value, "error: nope", []

    monkeypatch.setattr(cli, "_sweep_cell", always_fail)
    assert run(cfg, jobs=1) == 1


def test_branch_points_command(tmp_path):
    out = tmp_path / "out"
    cfg = parse_config(
        "command = branch-points\nL = 1.5\nc0 = 0.0\nnu = 0.0\nn_scan = 64\n"
        f"parameter = L\nlo = 1.4\nhi = 1.7\ncount = 16\noutput_dir = {out}\n"
    )
    assert run(cfg) == 0
    recs = [json.loads(ln) for ln in (out / "branch_points.jsonl").read_text().splitlines()
            if not ln.startswith("#")]
    assert len(recs) == 1
    assert recs[0]["L"] == pytest.approx(np.pi / 2, abs=1e-6)


def test_exit_codes(tmp_path, capsys):
    bad = tmp_path / "bad.cfg"
    bad.write_text("L = -2\n")
    assert main(["steady", "--config", str(bad)]) == 2
    assert "line 1" in capsys.readouterr().err

    assert main(["steady", "--config", str(tmp_path / "missing.cfg")]) == 2
    assert main(["steady"]) == 2  # no config for a config-requiring command

    mismatch = tmp_path / "mismatch.cfg"
    mismatch.write_text("command = evolve\nL = 1.0\n")
    assert main(["steady", "--config", str(mismatch)]) == 2

    solver = tmp_path / "solver.cfg"
    solver.write_text(
        "command = branches\nL = 1.0\nc0 = -0.5\nnu = 0.3\n"
        "parameter = beta\nlo = -0.01\nhi = 0.01\ncount = 3\n"
        f"output_dir = {tmp_path / 'o'}\n"
    )
    assert main(["branches", "--config", str(solver)]) == 1
    assert "solver error" in capsys.readouterr().err


def test_verify_config_parses_without_file():
    cfg = parse_config("", default_command="verify")
    assert cfg.command == "verify"

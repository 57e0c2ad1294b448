"""Command-line front end: config parsing, dispatch, sweeps, file outputs.

Configs are plain `key = value` lines with optional `[section]` headers and
`#` comments.  Sections are cosmetic grouping; keys are globally unique and
may appear with or without their canonical section.  Unknown keys, duplicate
keys, and invalid values are rejected with the offending line number.

Every output file starts with a `#`-commented preamble holding the fully
resolved configuration, so runs are self-describing and reproducible;
identical (config, seed) pairs produce byte-identical outputs.
"""

from __future__ import annotations

import argparse
import json
import os
import sys
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, replace

import numpy as np

from .continuation import continue_in_beta, continue_in_L
from .errors import ConfigError
from .evolve import EvolveOptions, default_dt, evolve, seeded_initial_data
from .model import ModelParams
from .shoot import detect_branch_points, find_steady_states
from .spectrum import assemble_l4, eigenvalues, kernel_indicator, spectral_gap

COMMANDS = ("steady", "branches", "branch-points", "spectrum", "evolve", "sweep", "verify")
_SECTIONS = ("model", "numerics", "sweep", "run")

# key -> (canonical section, converter, default); converters returning None
# mark the key as optional
def _float(s):
    return float(s)


def _int(s):
    return int(s)


def _str(s):
    return s


def _opt_float(s):
    return float(s) if s != "" else None


_KEYS = {
    "command": ("run", _str, ""),
    "L": ("model", _float, 1.0),
    "beta": ("model", _float, 0.0),
    "c0": ("model", _float, -0.3),
    "nu": ("model", _float, 1.0),
    "x_mns": ("model", _opt_float, None),
    "l_mns": ("model", _opt_float, None),
    "n_scan": ("numerics", _int, 512),
    "n_out": ("numerics", _int, 513),
    "n": ("numerics", _int, 257),
    "tol": ("numerics", _float, 1e-10),
    "dt": ("numerics", _opt_float, None),
    "T": ("numerics", _float, 10.0),
    "record_every": ("numerics", _int, 20),
    "stop_tol": ("numerics", _float, 1e-9),
    "S": ("numerics", _opt_float, None),
    "parameter": ("sweep", _str, "L"),
    "lo": ("sweep", _opt_float, None),
    "hi": ("sweep", _opt_float, None),
    "count": ("sweep", _int, 0),
    "output_dir": ("run", _str, "out"),
    "seed": ("run", _int, 0),
}


@dataclass
class RunConfig:
    command: str
    params: ModelParams
    n_scan: int = 512
    n_out: int = 513
    n: int = 257
    tol: float = 1e-10
    dt: float | None = None
    T: float = 10.0
    record_every: int = 20
    stop_tol: float = 1e-9
    S: float | None = None
    sweep_parameter: str = "L"
    sweep_lo: float | None = None
    sweep_hi: float | None = None
    sweep_count: int = 0
    output_dir: str = "out"
    seed: int = 0

    def evolve_options(self) -> EvolveOptions:
        dt = self.dt if self.dt is not None else default_dt(self.params)
        return EvolveOptions(dt=dt, T=self.T, n=self.n, S=self.S,
                             record_every=self.record_every, stop_tol=self.stop_tol)


def parse_config(text: str, default_command: str | None = None) -> RunConfig:
    """Parse and validate a config document; errors carry line numbers."""
    raw: dict[str, tuple[str, int]] = {}
    for ln, line in enumerate(text.splitlines(), 1):
        body = line.split("#", 1)[0].strip()
        if not body:
            continue
        if body.startswith("["):
            if not body.endswith("]"):
                raise ConfigError("unterminated section header", ln)
            section = body[1:-1].strip()
            if section not in _SECTIONS:
                raise ConfigError(f"unknown section [{section}]", ln)
            continue
        if "=" not in body:
            raise ConfigError(f"expected `key = value`, got {body!r}", ln)
        key, val = (part.strip() for part in body.split("=", 1))
        if key not in _KEYS:
            raise ConfigError(f"unknown key {key!r}", ln)
        if key in raw:
            raise ConfigError(f"duplicate key {key!r} (first on line {raw[key][1]})", ln)
        raw[key] = (val, ln)

    vals = {}
    lines = {}
    for key, (_, conv, default) in _KEYS.items():
        if key in raw:
            sval, ln = raw[key]
            lines[key] = ln
            try:
                vals[key] = conv(sval)
            except ValueError:
                raise ConfigError(f"invalid value for {key!r}: {sval!r}", ln) from None
        else:
            vals[key] = default

    command = vals["command"] or default_command or ""
    if command not in COMMANDS:
        raise ConfigError(
            f"command must be one of {', '.join(COMMANDS)}; got {command!r}",
            lines.get("command"),
        )
    try:
        params = ModelParams(L=vals["L"], beta=vals["beta"], c0=vals["c0"],
                             nu=vals["nu"], x_mns=vals["x_mns"], l_mns=vals["l_mns"])
    except ValueError as exc:
        msg = str(exc)
        culprit = next((k for k in ("l_mns", "x_mns", "beta", "c0", "nu", "L")
                        if k in msg.split()), "L")
        raise ConfigError(msg, lines.get(culprit)) from None

    for key in ("tol", "T", "stop_tol"):
        if vals[key] <= 0:
            raise ConfigError(f"{key} must be positive, got {vals[key]}", lines.get(key))
    if vals["dt"] is not None and vals["dt"] <= 0:
        raise ConfigError(f"dt must be positive, got {vals['dt']}", lines.get("dt"))
    if command in ("sweep", "branches", "branch-points"):
        min_count = 16 if command == "branch-points" else 2
        if vals["lo"] is None or vals["hi"] is None or vals["count"] < min_count:
            raise ConfigError(
                f"command {command!r} needs sweep keys: lo, hi, count >= {min_count}",
                lines.get("count"),
            )
        if vals["parameter"] not in ("L", "beta"):
            raise ConfigError(
                f"sweep parameter must be L or beta, got {vals['parameter']!r}",
                lines.get("parameter"),
            )
        if command == "branch-points" and vals["parameter"] != "L":
            raise ConfigError("branch-points sweeps the parameter L",
                              lines.get("parameter"))

    return RunConfig(
        command=command,
        params=params,
        n_scan=vals["n_scan"],
        n_out=vals["n_out"],
        n=vals["n"],
        tol=vals["tol"],
        dt=vals["dt"],
        T=vals["T"],
        record_every=vals["record_every"],
        stop_tol=vals["stop_tol"],
        S=vals["S"],
        sweep_parameter=vals["parameter"],
        sweep_lo=vals["lo"],
        sweep_hi=vals["hi"],
        sweep_count=vals["count"],
        output_dir=vals["output_dir"],
        seed=vals["seed"],
    )


def _fmt(x) -> str:
    if isinstance(x, bool):
        return "true" if x else "false"
    if isinstance(x, float):
        return repr(x)
    return str(x)


def serialize_config(cfg: RunConfig) -> str:
    """Canonical config text; parse_config(serialize_config(cfg)) == cfg."""
    p = cfg.params
    by_key = {
        "command": cfg.command,
        "L": p.L, "beta": p.beta, "c0": p.c0, "nu": p.nu,
        "x_mns": p.x_mns, "l_mns": p.l_mns,
        "n_scan": cfg.n_scan, "n_out": cfg.n_out, "n": cfg.n, "tol": cfg.tol,
        "dt": cfg.dt, "T": cfg.T, "record_every": cfg.record_every,
        "stop_tol": cfg.stop_tol, "S": cfg.S,
        "parameter": cfg.sweep_parameter, "lo": cfg.sweep_lo,
        "hi": cfg.sweep_hi, "count": cfg.sweep_count,
        "output_dir": cfg.output_dir, "seed": cfg.seed,
    }
    out = []
    for section in _SECTIONS:
        block = [k for k, (sec, _, _) in _KEYS.items() if sec == section
                 and by_key[k] is not None]
        if not block:
            continue
        out.append(f"[{section}]")
        out.extend(f"{k} = {_fmt(by_key[k])}" for k in block)
    return "\n".join(out) + "\n"


def _preamble(cfg: RunConfig) -> str:
    return "".join(f"# {line}\n" for line in serialize_config(cfg).splitlines())


def _write(path: str, cfg: RunConfig, body: str):
    with open(path, "w") as fh:
        fh.write(_preamble(cfg))
        fh.write(body)


def _profile_body(u) -> str:
    x = u.grid.nodes()
    return "\n".join(f"{repr(float(xi))} {repr(float(ui))}"
                     for xi, ui in zip(x, u.values)) + "\n"


def _catalog_record(k: int, ss, n_scan: int, profile: str | None) -> str:
    return json.dumps({
        "index": k,
        "z": ss.z,
        "f_residual": ss.f_residual,
        "dzf": ss.dzf,
        "nondegenerate": bool(ss.nondegenerate),
        "mu_residual": ss.mu_residual,
        "n_scan": n_scan,
        "profile": profile,
    })


def _beta_zero(p: ModelParams) -> ModelParams:
    return replace(p, beta=0.0) if p.beta != 0.0 else p


def _cmd_steady(cfg: RunConfig) -> int:
    cat = find_steady_states(cfg.params, n_scan=cfg.n_scan, tol=cfg.tol, n_out=cfg.n_out)
    lines = []
    for k, ss in enumerate(cat):
        prof = f"profile_{k:03d}.dat"
        _write(os.path.join(cfg.output_dir, prof), cfg, _profile_body(ss.u))
        lines.append(_catalog_record(k, ss, cfg.n_scan, prof))
    _write(os.path.join(cfg.output_dir, "catalog.jsonl"), cfg, "\n".join(lines) + "\n")
    return 0


def _cmd_branches(cfg: RunConfig) -> int:
    seed_params = _beta_zero(cfg.params)
    cat = find_steady_states(seed_params, n_scan=cfg.n_scan, tol=cfg.tol, n_out=cfg.n_out)
    targets = np.linspace(cfg.sweep_lo, cfg.sweep_hi, cfg.sweep_count)
    for k, ss in enumerate(cat):
        if cfg.sweep_parameter == "beta":
            br = continue_in_beta(ss, targets, tol=cfg.tol)
        else:
            br = continue_in_L(ss, targets, tol=cfg.tol)
        rows = ["value,z,newton_iters,residual,flagged"]
        for s in br.samples:
            rows.append(",".join([
                _fmt(float(s.value)), _fmt(float(s.state.z)), str(s.newton_iters),
                _fmt(float(s.residual)), _fmt(bool(s.flagged)),
            ]))
        if br.ratios:
            rows.append("# ratios: " + " ".join(_fmt(float(r)) for r in br.ratios))
        _write(os.path.join(cfg.output_dir, f"branch_{k:03d}.csv"), cfg,
               "\n".join(rows) + "\n")
    return 0


def _cmd_branch_points(cfg: RunConfig) -> int:
    if cfg.sweep_parameter != "L":
        raise ConfigError("branch-points sweeps the parameter L")
    bps = detect_branch_points(cfg.params, cfg.sweep_lo, cfg.sweep_hi,
                               n_L=cfg.sweep_count, n_scan=cfg.n_scan, tol=cfg.tol)
    lines = [json.dumps({
        "L": bp.L,
        "z": bp.z,
        "f_residual": bp.f_residual,
        "dzf_residual": bp.dzf_residual,
        "second_deriv_dz2f": bp.second_deriv_dz2f,
    }) for bp in bps]
    _write(os.path.join(cfg.output_dir, "branch_points.jsonl"), cfg,
           "\n".join(lines) + ("\n" if lines else ""))
    return 0


def _cmd_spectrum(cfg: RunConfig) -> int:
    beta = cfg.params.beta
    cat = find_steady_states(_beta_zero(cfg.params), n_scan=cfg.n_scan,
                             tol=cfg.tol, n_out=cfg.n)
    eig_rows = ["index,k,re,im"]
    summaries = []
    for k, ss in enumerate(cat):
        ki = kernel_indicator(ss)
        res = eigenvalues(assemble_l4(ss, beta), operator="L4", beta=beta)
        delta, hyperbolic = spectral_gap(ss, beta)
        for j, lam in enumerate(res.eigenvalues):
            eig_rows.append(f"{k},{j},{_fmt(float(lam.real))},{_fmt(float(lam.imag))}")
        summaries.append(json.dumps({
            "index": k,
            "sigma_min": ki.sigma_min,
            "dzf": ki.dzf,
            "consistent": bool(ki.consistent),
            "delta": delta,
            "hyperbolic": bool(hyperbolic),
            "min_abs": res.min_abs,
            "max_abs_imag": res.max_abs_imag,
        }))
    _write(os.path.join(cfg.output_dir, "spectrum.csv"), cfg, "\n".join(eig_rows) + "\n")
    _write(os.path.join(cfg.output_dir, "spectrum_summary.jsonl"), cfg,
           "\n".join(summaries) + "\n")
    return 0


def _cmd_evolve(cfg: RunConfig) -> int:
    p = cfg.params
    cat = find_steady_states(_beta_zero(p), n_scan=cfg.n_scan, tol=cfg.tol,
                             n_out=cfg.n_out)
    if p.beta != 0.0:
        cat = [continue_in_beta(ss, [p.beta], tol=cfg.tol).samples[-1].state
               for ss in cat]
    u0 = seeded_initial_data(p, cfg.n, cfg.seed)
    traj, rep = evolve(u0, p, cfg.evolve_options(), cat)
    ncat = len(cat)
    header = "t,E,E1,muV2,advect,dEdt_residual,ut_norm" + "".join(
        f",dist_{j}" for j in range(ncat))
    rows = [header]
    for s in traj.samples:
        row = [s.t, s.E, s.E1, s.muV2, s.advect, s.dEdt_residual, s.ut_norm,
               *s.dist_H1]
        rows.append(",".join(_fmt(float(v)) for v in row))
    _write(os.path.join(cfg.output_dir, "trajectory.csv"), cfg, "\n".join(rows) + "\n")
    _write(os.path.join(cfg.output_dir, "final_profile.dat"), cfg,
           _profile_body(traj.samples[-1].u))
    def finite_or_null(x):
        return float(x) if x is not None and np.isfinite(x) else None

    report = {
        "converged": bool(rep.converged),
        "omega_index": rep.omega_index,
        "final_dist": finite_or_null(rep.final_dist),
        "t_plateau": finite_or_null(rep.t_plateau),
        "absorb_pass": bool(rep.absorb_pass),
        "M1_bound": finite_or_null(rep.M1_bound),
        "t_entry": finite_or_null(rep.t_entry),
    }
    _write(os.path.join(cfg.output_dir, "report.json"), cfg,
           json.dumps(report, indent=2) + "\n")
    return 0


def _sweep_cell(args: tuple) -> tuple:
    """One sweep cell; returns (index, value, status, jsonl records)."""
    cfg, i, value = args
    try:
        if cfg.sweep_parameter == "beta":
            p0 = _beta_zero(cfg.params)
            seed_cat = find_steady_states(p0, n_scan=cfg.n_scan, tol=cfg.tol,
                                          n_out=cfg.n_out)
            if value == 0.0:
                cell = seed_cat
            else:
                cell = [continue_in_beta(ss, [value], tol=cfg.tol).samples[-1].state
                        for ss in seed_cat]
        else:
            # meniscus stays fixed at the seed's resolved position across the sweep
            p = replace(cfg.params, L=value)
            cell = find_steady_states(p, n_scan=cfg.n_scan, tol=cfg.tol,
                                      n_out=cfg.n_out)
        records = [_catalog_record(k, ss, cfg.n_scan, None) for k, ss in enumerate(cell)]
        return i, value, "ok", records
    except Exception as exc:  # per-cell failures are recorded, not fatal
        return i, value, f"error: {exc}", []


def _cmd_sweep(cfg: RunConfig, jobs: int | None, strict: bool) -> int:
    values = [float(v) for v in np.linspace(cfg.sweep_lo, cfg.sweep_hi, cfg.sweep_count)]
    tasks = [(cfg, i, v) for i, v in enumerate(values)]
    if jobs is None:
        jobs = os.cpu_count() or 1
    if jobs > 1:
        with ProcessPoolExecutor(max_workers=jobs) as pool:
            results = list(pool.map(_sweep_cell, tasks))
    else:
        results = [_sweep_cell(t) for t in tasks]
    results.sort(key=lambda r: r[0])

    index_rows = ["cell,parameter,value,status,n_states,file"]
    n_ok = 0
    for i, value, status, records in results:
        fname = f"catalog_{i:04d}.jsonl"
        if status == "ok":
            n_ok += 1
            _write(os.path.join(cfg.output_dir, fname), cfg,
                   "\n".join(records) + ("\n" if records else ""))
        else:
            fname = ""
        safe_status = status.replace(",", ";").replace("\n", " ")
        index_rows.append(
            f"{i},{cfg.sweep_parameter},{_fmt(value)},{safe_status},{len(records)},{fname}")
    _write(os.path.join(cfg.output_dir, "index.csv"), cfg, "\n".join(index_rows) + "\n")
    if n_ok == 0:
        return 1
    if strict and n_ok < len(values):
        return 1
    return 0


def _cmd_verify(cfg: RunConfig) -> int:
    from .acceptance import run_all

    results = run_all()
    lines = []
    for r in results:
        line = f"{r.name} {'PASS' if r.passed else 'FAIL'} - {r.detail}"
        print(line)
        lines.append(line)
    _write(os.path.join(cfg.output_dir, "verify.txt"), cfg, "\n".join(lines) + "\n")
    return 0 if all(r.passed for r in results) else 1


def run(cfg: RunConfig, jobs: int | None = None, strict: bool = False) -> int:
    """Dispatch one validated RunConfig; returns the process exit code."""
    os.makedirs(cfg.output_dir, exist_ok=True)
    if cfg.command == "steady":
        return _cmd_steady(cfg)
    if cfg.command == "branches":
        return _cmd_branches(cfg)
    if cfg.command == "branch-points":
        return _cmd_branch_points(cfg)
    if cfg.command == "spectrum":
        return _cmd_spectrum(cfg)
    if cfg.command == "evolve":
        return _cmd_evolve(cfg)
    if cfg.command == "sweep":
        return _cmd_sweep(cfg, jobs, strict)
    if cfg.command == "verify":
        return _cmd_verify(cfg)
    raise ConfigError(f"unknown command {cfg.command!r}")


def main(argv=None) -> int:
    ap = argparse.ArgumentParser(
        prog="lbfilm",
        description="Steady states, branches, spectra, and dynamics of the "
                    "advective Cahn-Hilliard transfer model.",
    )
    ap.add_argument("command", choices=COMMANDS)
    ap.add_argument("--config", help="path to a key = value config file")
    ap.add_argument("--jobs", type=int, default=None, help="sweep worker count")
    ap.add_argument("--strict", action="store_true",
                    help="fail the sweep if any cell fails")
    ap.add_argument("--output", help="override output_dir")
    args = ap.parse_args(argv)

    try:
        if args.config is not None:
            with open(args.config) as fh:
                text = fh.read()
        elif args.command == "verify":
            text = ""
        else:
            print(f"error: command {args.command!r} requires --config", file=sys.stderr)
            return 2
        cfg = parse_config(text, default_command=args.command)
        if cfg.command != args.command:
            raise ConfigError(
                f"config sets command = {cfg.command!r} but CLI asked for {args.command!r}")
        if args.output is not None:
            cfg = replace(cfg, output_dir=args.output)
    except (ConfigError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2

    try:
        return run(cfg, jobs=args.jobs, strict=args.strict)
    except ConfigError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    except (RuntimeError, ValueError) as exc:
        print(f"solver error: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())

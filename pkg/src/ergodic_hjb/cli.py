"""Batch front end: ``ergodic-hjb {check,discounted,ergodic,parabolic}``.

Exit codes: 0 success, 1 numerical or condition failure, 2 configuration error.
"""

from __future__ import annotations

import argparse
import csv
import json
import platform
import sys
from dataclasses import dataclass, field
from pathlib import Path
from typing import Optional

import numpy as np
import scipy

from . import __version__
from .conditions import ConditionId, as_condition, check_condition
from .core import ConfigError, ControlSet, ScalarField, build_grid, make_problem
from .ergodic import ErgodicError, uniqueness_probe, vanishing_discount, write_field_csv
from .oracle import gaussian_average, mc_discounted_value
from .presets import get_preset, initial_datum
from .scheme import BARRIER, FROZEN, BoundaryClosure, discretize
from .solver import SolverError, cfl_limit, march_parabolic, solve_discounted

EXIT_OK, EXIT_FAIL, EXIT_CONFIG = 0, 1, 2

CSV_HELP = """\
output files (in --out):
  manifest.json      config echo, versions, seed, command
  conditions.json    check: one report per condition {id, holds, R0, margins, params}
  u.csv              discounted: x[,y],u
  discounted.json    discounted: delta, residual, iterations, u0, sup_u, inf_u, closure_slack
  ladder.csv         ergodic: k,delta,c,residual
  chi.csv            ergodic: x[,y],chi   (chi = u_delta - u_delta(x_ref), last rung)
  ergodic.json       ergodic: ladder, c, c_aitken, x_ref, closure_slack, flags, growth
  growth.csv         ergodic: r_outer,max_abs_chi,ratio_r2[,ratio_r<beta>...]
  snapshots.csv      parabolic: t,x[,y],u   (long format)
  tail.json          parabolic: ubar, ulow, spreads, probes, gaussian comparison
  *.gp               gnuplot scripts (with --gnuplot)
"""

# flag dest -> (type, default); None defaults fall back to the preset
FIELDS = {
    "preset": (str, "paper-example"),
    "grid_l": (float, None),
    "grid_n": (int, None),
    "dim": (int, None),
    "mode": (str, None),
    "lam": (float, None),
    "big_lam": (float, None),
    "delta": (float, 0.1),
    "delta0": (float, 0.2),
    "ladder_factor": (float, 0.5),
    "ladder_len": (int, 7),
    "tol": (float, 1e-8),
    "dt": (float, None),
    "t_final": (float, None),
    "tail_window": (float, None),
    "x_ref": (float, 0.0),
    "probe": (float, None),
    "out": (str, "out"),
    "seed": (int, 0),
    "threads": (int, 1),
    "h0": (str, None),
    "closure": (str, None),
    "h_bar": (float, 0.05),
    "anchor": (float, None),
    "inner": (str, "direct"),
    "angles": (int, 64),
    "mc_paths": (int, 0),
    "mc_dt": (float, 0.01),
}


@dataclass
class RunConfig:
    command: str
    preset: str = "paper-example"
    grid_l: float = 6.0
    grid_n: int = 481
    dim: int = 1
    mode: str = "hjb-inf"
    lam: float = 1.0
    big_lam: float = 1.0
    delta: float = 0.1
    delta0: float = 0.2
    ladder_factor: float = 0.5
    ladder_len: int = 7
    tol: float = 1e-8
    dt: Optional[float] = None
    t_final: float = 40.0
    tail_window: Optional[float] = None
    x_ref: float = 0.0
    probe: Optional[float] = None
    out: str = "out"
    seed: int = 0
    threads: int = 1
    h0: str = "lorentz"
    closure: Optional[str] = None     # barrier for stationary runs, frozen for marching
    h_bar: float = 0.05
    anchor: Optional[float] = None
    inner: str = "direct"
    angles: int = 64
    mc_paths: int = 0
    mc_dt: float = 0.01
    conditions: list = field(default_factory=list)
    params: dict = field(default_factory=dict)
    gnuplot: bool = False
    lam_given: bool = False

    def to_json(self) -> dict:
        return dict(self.__dict__)


def read_config_file(path) -> dict:
    """``key = value`` lines; ``#`` starts a comment; keys use flag names."""
    out = {}
    try:
        text = Path(path).read_text()
    except OSError as exc:
        raise ConfigError(f"cannot read config file: {exc}") from exc
    for n, line in enumerate(text.splitlines(), 1):
        line = line.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ConfigError(f"{path}:{n}: expected key = value")
        k, v = (s.strip() for s in line.split("=", 1))
        out[k.lstrip("-").replace("-", "_")] = v
    return out


def _parse_params(items) -> dict:
    out = {}
    for item in items or []:
        if "=" not in item:
            raise ConfigError(f"--param expects key=value, got {item!r}")
        k, v = item.split("=", 1)
        try:
            out[k.strip()] = float(v)
        except ValueError as exc:
            raise ConfigError(f"--param {k} needs a number") from exc
    return out


def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    g = common.add_argument_group("problem")
    g.add_argument("--config", help="key = value file; explicit flags win")
    g.add_argument("--preset", help="paper-example, ou-1d, ou-linear, pucci-ou, strong-drift, constant-cost")
    g.add_argument("--param", action="append", metavar="KEY=VALUE",
                   help="preset or condition constant (repeatable)")
    g.add_argument("--grid-l", type=float, dest="grid_l", help="box half-width L")
    g.add_argument("--grid-n", type=int, dest="grid_n", help="nodes per axis (odd)")
    g.add_argument("--dim", type=int)
    g.add_argument("--mode", help="hjb-inf, hjb-sup, pucci-minus, pucci-plus")
    g.add_argument("--lambda", type=float, dest="lam")
    g.add_argument("--big-lambda", type=float, dest="big_lam")
    g.add_argument("--closure", choices=["barrier", "frozen"])
    g.add_argument("--h-bar", type=float, dest="h_bar")
    g.add_argument("--anchor", type=float)
    g.add_argument("--inner", choices=["direct", "gauss-seidel"])
    g.add_argument("--tol", type=float)
    g = common.add_argument_group("run")
    g.add_argument("--out", help="output directory")
    g.add_argument("--seed", type=int)
    g.add_argument("--threads", type=int)
    g.add_argument("--gnuplot", action="store_true", help="also write gnuplot scripts")

    p = argparse.ArgumentParser(prog="ergodic-hjb", description=__doc__, epilog=CSV_HELP,
                                formatter_class=argparse.RawDescriptionHelpFormatter)
    p.add_argument("--version", action="version", version=__version__)
    sub = p.add_subparsers(dest="command", required=True)

    c = sub.add_parser("check", parents=[common], help="check Lyapunov conditions",
                       epilog=CSV_HELP, formatter_class=argparse.RawDescriptionHelpFormatter)
    c.add_argument("conditions", nargs="+", help=", ".join(m.value for m in ConditionId))
    c.add_argument("--angles", type=int, help="directions in 2D")

    d = sub.add_parser("discounted", parents=[common], help="one discounted solve",
                       epilog=CSV_HELP, formatter_class=argparse.RawDescriptionHelpFormatter)
    d.add_argument("--delta", type=float)
    d.add_argument("--x-ref", type=float, dest="x_ref", help="point for the Monte Carlo check")
    d.add_argument("--mc-paths", type=int, dest="mc_paths", help="compare with Monte Carlo")
    d.add_argument("--mc-dt", type=float, dest="mc_dt")

    e = sub.add_parser("ergodic", parents=[common], help="vanishing-discount ladder",
                       epilog=CSV_HELP, formatter_class=argparse.RawDescriptionHelpFormatter)
    e.add_argument("--delta0", type=float)
    e.add_argument("--ladder-factor", type=float, dest="ladder_factor")
    e.add_argument("--ladder-len", type=int, dest="ladder_len")
    e.add_argument("--x-ref", type=float, dest="x_ref", help="first coordinate of the reference node")
    e.add_argument("--probe", type=float, help="second reference point for a uniqueness probe (same ladder; "
                        "the c gap shrinks like the last discount)")

    q = sub.add_parser("parabolic", parents=[common], help="march the Cauchy problem",
                       epilog=CSV_HELP, formatter_class=argparse.RawDescriptionHelpFormatter)
    q.add_argument("--dt", type=float)
    q.add_argument("--t-final", type=float, dest="t_final")
    q.add_argument("--tail-window", type=float, dest="tail_window")
    q.add_argument("--h0", help="lorentz, sin-gauss, cos-lorentz, tanh or const:<v>")
    return p


def _coerce(key, value):
    typ = FIELDS[key][0]
    if value is None or isinstance(value, typ):
        return value
    try:
        return typ(value)
    except ValueError as exc:
        raise ConfigError(f"{key}: cannot read {value!r} as {typ.__name__}") from exc


def resolve_config(ns: argparse.Namespace) -> RunConfig:
    """Preset defaults, then the config file, then explicit flags."""
    file_vals = read_config_file(ns.config) if ns.config else {}
    params = {}
    if "param" in file_vals:
        params.update(_parse_params(file_vals.pop("param").split(",")))
    unknown = set(file_vals) - set(FIELDS)
    if unknown:
        raise ConfigError(f"unknown config keys: {sorted(unknown)}")
    merged = {k: default for k, (_, default) in FIELDS.items()}
    merged.update({k: _coerce(k, v) for k, v in file_vals.items()})
    for k in FIELDS:
        v = getattr(ns, k, None)
        if v is not None:
            merged[k] = v
    params.update(_parse_params(ns.param))

    preset = get_preset(merged["preset"])
    lam_given = merged["lam"] is not None or merged["big_lam"] is not None
    fallback = {"grid_l": preset.halfwidth, "grid_n": preset.n_per_dim, "dim": preset.dim,
                "mode": preset.mode, "lam": preset.pucci_lambda, "big_lam": preset.pucci_Lambda,
                "t_final": preset.T_final, "h0": preset.h0}
    for k, v in fallback.items():
        if merged[k] is None:
            merged[k] = v
    cfg = RunConfig(command=ns.command, conditions=list(getattr(ns, "conditions", []) or []),
                    params=params, gnuplot=bool(ns.gnuplot), lam_given=lam_given, **merged)
    _validate(cfg)
    return cfg


def _validate(cfg: RunConfig) -> None:
    if cfg.threads < 1:
        raise ConfigError("--threads must be at least 1")
    if cfg.closure not in (None, "barrier", "frozen"):
        raise ConfigError("--closure must be barrier or frozen")
    if cfg.command == "check":
        for cid in cfg.conditions:
            as_condition(cid)
    # grid, mode and Pucci constants are checked by the core constructors
    _problem(cfg)


def _problem(cfg: RunConfig):
    preset = get_preset(cfg.preset)
    grid = build_grid(cfg.dim, cfg.grid_l, cfg.grid_n)
    fns = preset.fns(cfg.params)
    return fns, make_problem(fns, grid, ControlSet.single(), cfg.mode, cfg.lam, cfg.big_lam)


def _closure(cfg: RunConfig, kind_default: str = BARRIER) -> BoundaryClosure:
    kind = {"barrier": BARRIER, "frozen": FROZEN}[cfg.closure] if cfg.closure else kind_default
    if kind == BARRIER and cfg.anchor is None and cfg.command == "parabolic":
        raise ConfigError("a barrier closure for marching needs --anchor")
    return BoundaryClosure(kind=kind, h_bar=cfg.h_bar, anchor=cfg.anchor)


def write_manifest(cfg: RunConfig, out: Path, argv) -> None:
    manifest = {"config": cfg.to_json(), "argv": list(argv), "seed": cfg.seed,
                "threads": cfg.threads,
                "versions": {"ergodic_hjb": __version__, "python": platform.python_version(),
                             "numpy": np.__version__, "scipy": scipy.__version__}}
    (out / "manifest.json").write_text(json.dumps(manifest, indent=2, default=str))


def _gnuplot(path: Path, data: str, cols: str, title: str) -> None:
    path.write_text(f"set datafile separator ','\nset key autotitle columnhead\n"
                    f"set title '{title}'\nplot '{data}' using {cols} with lines\n")


def cmd_check(cfg: RunConfig, out: Path) -> int:
    fns, problem = _problem(cfg)
    grid = problem.grid
    radii = grid.axis[grid.axis > 0]
    reports = []
    for name in cfg.conditions:
        cid = as_condition(name)
        params = dict(cfg.params)
        if cfg.lam_given or problem.mode.is_pucci:
            params.setdefault("lam", cfg.lam)
            params.setdefault("Lam", cfg.big_lam)
        if cid in (ConditionId.C10EXTRASTRONG, ConditionId.C10LESSSTRONG):
            params.setdefault("l_inf", float(np.abs(problem.coefficients.l).max()))
        if cid is ConditionId.C6_5:
            # with one control the split F >= -bbar.p - g|p| + cbar t is exact
            params.setdefault("bbar", lambda x: fns.eval_b(x, 0))
            params.setdefault("g", lambda x: np.zeros(x.shape[0]))
            params.setdefault("cbar", lambda x: fns.eval_scalar("c0", x, 0))
        reports.append(check_condition(cid, fns, params, radii, cfg.angles, dim=grid.dim))
    payload = [r.to_json() for r in reports]
    (out / "conditions.json").write_text(json.dumps(payload, indent=2))
    for r in reports:
        print(f"{r.id.value}: holds={r.holds} R0={r.R0} ({r.evidence})")
    return EXIT_OK if all(r.holds for r in reports) else EXIT_FAIL


def cmd_discounted(cfg: RunConfig, out: Path) -> int:
    fns, problem = _problem(cfg)
    sol = solve_discounted(problem, _closure(cfg), delta=cfg.delta, tol=cfg.tol, inner=cfg.inner)
    write_field_csv(sol.u, out / "u.csv", "u")
    summary = sol.summary()
    if cfg.mc_paths > 0:
        x0 = np.zeros(problem.grid.dim)
        x0[0] = cfg.x_ref
        node = problem.grid.index_of(x0)
        est = mc_discounted_value(fns, x0, cfg.delta, n_paths=cfg.mc_paths, dt=cfg.mc_dt,
                                  seed=cfg.seed)
        summary["monte_carlo"] = {**est.to_json(), "x": x0.tolist(),
                                  "grid_value": float(sol.u.values[node])}
    (out / "discounted.json").write_text(json.dumps(summary, indent=2))
    if cfg.gnuplot and problem.grid.dim == 1:
        _gnuplot(out / "u.gp", "u.csv", "1:2", "u_delta")
    print(json.dumps(summary))
    return EXIT_OK


def _write_growth(path: Path, growth) -> None:
    names = [k for k in growth.ratios if k != "1"]
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["r_outer", "max_abs_chi"] + [f"ratio_{n.replace('^', '')}" for n in names])
        for j, r in enumerate(growth.radii):
            w.writerow([repr(float(r)), repr(float(growth.max_abs[j]))]
                       + [repr(float(growth.ratios[n][j])) for n in names])


def _write_ergodic(res, out: Path, gnuplot: bool, dim: int) -> dict:
    with open(out / "ladder.csv", "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["k", "delta", "c", "residual"])
        for k, (d, c, r) in enumerate(zip(res.deltas, res.c_estimates, res.residuals)):
            w.writerow([k, repr(float(d)), repr(float(c)), repr(float(r))])
    write_field_csv(res.chi, out / "chi.csv", "chi")
    if res.growth is not None:
        _write_growth(out / "growth.csv", res.growth)
    if gnuplot and dim == 1:
        _gnuplot(out / "chi.gp", "chi.csv", "1:2", "corrector")
    payload = res.to_json(str(out / "chi.csv"))
    (out / "ergodic.json").write_text(json.dumps(payload, indent=2))
    return payload


def _ref_point(grid, x1: float):
    p = np.zeros(grid.dim)
    p[0] = x1
    return grid.index_of(p)


def cmd_ergodic(cfg: RunConfig, out: Path) -> int:
    _, problem = _problem(cfg)
    grid = problem.grid
    op = discretize(problem, _closure(cfg))
    ref = _ref_point(grid, cfg.x_ref)
    ladder = dict(delta0=cfg.delta0, ladder_factor=cfg.ladder_factor, ladder_len=cfg.ladder_len,
                  tol=cfg.tol, inner=cfg.inner)
    try:
        res = vanishing_discount(op, x_ref=ref, **ladder)
    except ErgodicError as exc:
        if exc.partial is not None:
            _write_ergodic(exc.partial, out, cfg.gnuplot, grid.dim)
        print(f"ergodic run failed: {exc}", file=sys.stderr)
        return EXIT_FAIL
    payload = _write_ergodic(res, out, cfg.gnuplot, grid.dim)
    if cfg.probe is not None:
        probe = uniqueness_probe(op, x_ref_a=ref, x_ref_b=_ref_point(grid, cfg.probe),
                                 threads=cfg.threads, **ladder)
        summary = {k: probe[k] for k in ("delta_c", "max_dev_from_constant", "c_a", "c_b")}
        (out / "probe.json").write_text(json.dumps(summary, indent=2))
        payload["probe"] = summary
    print(json.dumps({"c": payload["c"], "c_aitken": payload["c_aitken"], "flags": payload["flags"]}))
    return EXIT_OK


def cmd_parabolic(cfg: RunConfig, out: Path) -> int:
    _, problem = _problem(cfg)
    grid = problem.grid
    op = discretize(problem, _closure(cfg, FROZEN))
    limit = cfl_limit(op)
    if cfg.dt is not None and cfg.dt > limit:
        print(f"dt={cfg.dt:g} exceeds the monotonicity limit {limit:g}", file=sys.stderr)
        return EXIT_FAIL
    h_fn = initial_datum(cfg.h0)
    h0 = ScalarField.from_function(grid, h_fn)
    run = march_parabolic(op, h0=h0, dt=cfg.dt, T_final=cfg.t_final, tail_window=cfg.tail_window)
    stats = run.tail_stats()
    stats["h0"] = cfg.h0
    stats["h0_range"] = [float(h0.values.min()), float(h0.values.max())]
    preset = get_preset(cfg.preset)
    if preset.gaussian is not None and grid.dim == 1:
        mean, var = preset.gaussian(preset.params(cfg.params))
        avg = gaussian_average(lambda y: h_fn(np.asarray(y)[:, None]), mean, var)
        stats["gaussian_average"] = avg
        stats["ubar_minus_average"] = run.ubar - avg
    (out / "tail.json").write_text(json.dumps(stats, indent=2))
    with open(out / "snapshots.csv", "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["t"] + ["x", "y"][: grid.dim] + ["u"])
        for t, snap in zip(run.times, run.snapshots):
            for x, v in zip(grid.coords, snap):
                w.writerow([repr(float(t)), *map(repr, x.tolist()), repr(float(v))])
    if cfg.gnuplot and grid.dim == 1:
        _gnuplot(out / "final.gp", "snapshots.csv", "2:3", "snapshots")
    print(json.dumps({k: stats[k] for k in ("ubar", "ulow", "spread_ubar", "spread_ulow")}))
    return EXIT_OK


COMMANDS = {"check": cmd_check, "discounted": cmd_discounted, "ergodic": cmd_ergodic,
            "parabolic": cmd_parabolic}


def main(argv=None) -> int:
    argv = sys.argv[1:] if argv is None else list(argv)
    parser = build_parser()
    try:
        ns = parser.parse_args(argv)
    except SystemExit as exc:
        return EXIT_CONFIG if exc.code else EXIT_OK
    try:
        cfg = resolve_config(ns)
        out = Path(cfg.out)
        out.mkdir(parents=True, exist_ok=True)
        write_manifest(cfg, out, argv)
        return COMMANDS[cfg.command](cfg, out)
    except ConfigError as exc:
        print(f"configuration error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except SolverError as exc:
        print(f"numerical failure: {exc}", file=sys.stderr)
        return EXIT_FAIL


if __name__ == "__main__":
    sys.exit(main())

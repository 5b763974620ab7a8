"""Command-line front end.

Subcommands:
  solve       run one scenario at one beta; writes run.csv, ligament.csv,
              jumps.csv, and per-cycle solution_<k>.vtu files
  sweep-beta  run a list of betas and merge the ligament/jump tables
  plot-phi    tabulate the phi1/phi2 response functions with a pole sidecar

Exit codes: 0 success, 1 runtime/solver failure, 2 usage error.
"""

from __future__ import annotations

import argparse
import logging
import sys
from pathlib import Path

import numpy as np

from . import driver, scenarios
from .errors import HpCrackError, PoleProximity
from .material import MaterialParams, critical_thresholds, default_material, phi1, phi2
from .vtu import write_vtu

LIGAMENT_HEADER = "x,ux,t22,eps22,sed,beta,mode"
JUMPS_HEADER = "x,jump_ux,jump_uy,beta,mode"

JUMP_XS = (0.55, 0.6, 0.65, 0.7, 0.75, 0.8, 0.85, 0.9, 0.95)


def _g(v: float) -> str:
    return format(float(v), ".17g")


def _beta_list(text: str) -> list[float]:
    items = [s for s in text.split(",") if s.strip()]
    if not items:
        raise argparse.ArgumentTypeError("expected a comma-separated list of betas")
    try:
        return [float(s) for s in items]
    except ValueError as exc:
        raise argparse.ArgumentTypeError(f"bad beta list {text!r}") from exc


def _range_pair(text: str) -> tuple[float, float]:
    try:
        lo, hi = text.split(":")
        return float(lo), float(hi)
    except ValueError as exc:
        raise argparse.ArgumentTypeError(f"expected lo:hi, got {text!r}") from exc


def _add_solve_flags(sub):
    sub.add_argument("--mode", choices=scenarios.MODES, default="tensile")
    sub.add_argument("--n0", type=int, default=8)
    sub.add_argument("--cycles", type=int, default=8)
    sub.add_argument("--p-max", type=int, default=6)
    sub.add_argument("--refine-fraction", type=float, default=0.3)
    sub.add_argument("--sigma-threshold", type=float, default=2.0)
    sub.add_argument("--ubar", type=float, default=0.01)
    sub.add_argument("--vbar", type=float, default=0.01)
    sub.add_argument("--n-samples", type=int, default=64)
    sub.add_argument("--out-dir", type=Path, default=Path("out"))


def _config_from_args(args, beta: float) -> scenarios.ScenarioConfig:
    return scenarios.ScenarioConfig(
        mode=args.mode,
        u_bar=args.ubar,
        v_bar=args.vbar,
        material=default_material(beta),
        n0=args.n0,
        cycles=args.cycles,
        p_max=args.p_max,
        refine_fraction=args.refine_fraction,
        sigma_threshold=args.sigma_threshold,
        n_samples=args.n_samples,
    )


def _write(path: Path, text: str):
    path.parent.mkdir(parents=True, exist_ok=True)
    path.write_text(text, encoding="ascii")


def _ligament_rows(record: driver.RunRecord, beta: float) -> list[str]:
    cfg = record.config
    samples = scenarios.ligament_extract(
        record.solution, cfg.material, cfg.n_samples, cfg.delta_tip
    )
    return [
        f"{_g(s.x)},{_g(s.ux)},{_g(s.t22)},{_g(s.eps22)},{_g(s.sed)},{_g(beta)},{cfg.mode}"
        for s in samples
    ]


def _jump_rows(record: driver.RunRecord, beta: float) -> list[str]:
    rows = []
    for x, jx, jy in scenarios.jump_profile(record.solution, JUMP_XS):
        rows.append(f"{_g(x)},{_g(jx)},{_g(jy)},{_g(beta)},{record.config.mode}")
    return rows


def _cmd_solve(args) -> int:
    out = args.out_dir
    out.mkdir(parents=True, exist_ok=True)
    config = _config_from_args(args, args.beta)

    def snapshot(cycle, solution, indicators):
        write_vtu(out / f"solution_{cycle}.vtu", solution, indicators)

    record = driver.run(config, on_cycle=snapshot)
    _write(out / "run.csv", record.to_csv())
    _write(
        out / "ligament.csv",
        "\n".join([LIGAMENT_HEADER] + _ligament_rows(record, args.beta)) + "\n",
    )
    _write(
        out / "jumps.csv",
        "\n".join([JUMPS_HEADER] + _jump_rows(record, args.beta)) + "\n",
    )
    return 0


def _cmd_sweep(args) -> int:
    out = args.out_dir
    lig = [LIGAMENT_HEADER]
    jmp = [JUMPS_HEADER]
    for beta in args.betas:
        config = _config_from_args(args, beta)
        record = driver.run(config)
        _write(out / f"run_beta_{_g(beta)}.csv", record.to_csv())
        lig.extend(_ligament_rows(record, beta))
        jmp.extend(_jump_rows(record, beta))
        k = len(record.rows) - 1
        write_vtu(out / f"solution_beta_{_g(beta)}_{k}.vtu", record.solution, record.indicators)
    _write(out / "ligament.csv", "\n".join(lig) + "\n")
    _write(out / "jumps.csv", "\n".join(jmp) + "\n")
    return 0


def _cmd_plot_phi(args) -> int:
    params = MaterialParams(
        e1=args.e1, e2=args.e2, d=args.d, a1=args.a1, a2=args.a2, a3=args.a3
    )
    lo, hi = args.range
    ts = np.linspace(lo, hi, args.samples)
    rows = ["tr_t,phi1,phi2"]
    for t in ts:
        try:
            rows.append(f"{_g(t)},{_g(phi1(float(t), params))},{_g(phi2(float(t), params))}")
        except PoleProximity:
            continue
    t1, t2, _ = critical_thresholds(params)
    poles = ["pole,value"]
    if np.isfinite(t1):
        poles.append(f"t_cr1,{_g(t1)}")
    if np.isfinite(t2):
        poles.append(f"t_cr2,{_g(t2)}")
    out = args.out_dir
    _write(out / "plot_phi.csv", "\n".join(rows) + "\n")
    _write(out / "plot_phi_poles.csv", "\n".join(poles) + "\n")
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="hpcrack",
        description="hp-adaptive crack-tip solver for density-dependent nonlinear elasticity",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    s = sub.add_parser("solve", help="run one scenario at a single beta")
    _add_solve_flags(s)
    s.add_argument("--beta", type=float, default=0.0)
    s.set_defaults(func=_cmd_solve)

    s = sub.add_parser("sweep-beta", help="run a beta sweep and merge CSVs")
    _add_solve_flags(s)
    s.add_argument("--betas", type=_beta_list, required=True)
    s.set_defaults(func=_cmd_sweep)

    s = sub.add_parser("plot-phi", help="tabulate the response functions")
    s.add_argument("--a1", type=float, default=0.5)
    s.add_argument("--a2", type=float, default=0.2)
    s.add_argument("--a3", type=float, default=0.1)
    s.add_argument("--e1", type=float, default=0.3)
    s.add_argument("--e2", type=float, default=0.4)
    s.add_argument("--d", type=int, default=2)
    s.add_argument("--range", type=_range_pair, default=(-30.0, 30.0))
    s.add_argument("--samples", type=int, default=501)
    s.add_argument("--out-dir", type=Path, default=Path("out"))
    s.set_defaults(func=_cmd_plot_phi)
    return parser


def main(argv=None) -> int:
    logging.basicConfig(level=logging.INFO, format="%(message)s")
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except HpCrackError as exc:
        print(f"error: {type(exc).__name__}: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())

"""Command-line front end.

    plateau-h solve  -c config.json        solve the Dirichlet problem
    plateau-h verify -c config.json        run every inequality certificate
    plateau-h cap --radius 1 --sigma 0.6   closed-form cap parameters
    plateau-h report <run-dir>             summarize artifacts + render figures

Exit codes: 0 success, 2 configuration error, 3 solver stagnation,
4 certificate failure.  PLATEAU_H_THREADS caps sweep workers (0 = auto).
"""

from __future__ import annotations

import argparse
import json
import sys
import time
from pathlib import Path

import numpy as np

from .config import ConfigError, RunConfig, config_to_dict, parse_config
from .domain import DomainError
from .figures import render_run_dir
from .reports import export_solution, run_verify
from .solver import StagnationError, continuation_solve, exact_cap, shifted_cap

EXIT_OK = 0
EXIT_CONFIG = 2
EXIT_STAGNATION = 3
EXIT_CERTIFICATE = 4


def _load_config(path: str) -> RunConfig:
    try:
        text = Path(path).read_text()
    except OSError as exc:
        raise ConfigError(path, f"cannot read config: {exc}") from None
    return parse_config(text)


def _cmd_solve(args) -> int:
    cfg = _load_config(args.config)
    if cfg.domain is None:
        raise ConfigError("domain", "is required in solve mode")
    t0 = time.perf_counter()
    try:
        sol, reports = continuation_solve(
            cfg.domain, cfg.sigma, list(cfg.eps_schedule),
            resolution=cfg.grid_resolution,
        )
    except StagnationError as exc:
        print(f"solver stagnated: {exc}", file=sys.stderr)
        if exc.partial is not None and exc.reports:
            out = Path(cfg.output_dir)
            export_solution(exc.partial, exc.reports[-1], out,
                            config_echo=config_to_dict(cfg), stages=exc.reports)
            print(f"partial result written to {out}", file=sys.stderr)
        return EXIT_STAGNATION
    elapsed = time.perf_counter() - t0
    out = Path(cfg.output_dir)
    paths = export_solution(sol, reports[-1], out,
                            config_echo=config_to_dict(cfg), stages=reports)
    rep = reports[-1]
    print(f"converged in {elapsed:.1f}s over {len(reports)} reported stages")
    print(f"  min nu_up       {rep.min_nu_up:.6f}  (sigma = {cfg.sigma})")
    print(f"  min kappa       {rep.min_kappa:.6f}")
    print(f"  S1 ratio        {rep.ratio:.6f}")
    print(f"  residual sup    {rep.residual_linf:.3e}")
    print(f"  artifacts       {paths['solution']}")
    return EXIT_OK


def _cmd_verify(args) -> int:
    cfg = _load_config(args.config)
    report = run_verify(cfg)
    out = Path(cfg.output_dir)
    out.mkdir(parents=True, exist_ok=True)
    (out / "verify.json").write_text(report.to_json())
    n_fail = sum(1 for r in report.records if not r.passed)
    for rec in report.records:
        tag = "PASS" if rec.passed else "FAIL"
        scope = f"n={rec.n}" if rec.n is not None else "sweep"
        print(f"[{tag}] {rec.name:<28} {scope:<8} min margin {rec.min_margin:+.3e}")
    print(f"{len(report.records) - n_fail}/{len(report.records)} certificates passed; "
          f"report at {out / 'verify.json'}")
    return EXIT_OK if n_fail == 0 else EXIT_CERTIFICATE


def _cmd_cap(args) -> int:
    if args.eps > 0:
        cap = shifted_cap(args.radius, args.sigma, args.eps)
    else:
        cap = exact_cap(args.radius, args.sigma)
    print(f"rho        {cap.rho:.12g}")
    print(f"c          {cap.c:.12g}")
    print(f"apex u(0)  {cap.height(0.0):.12g}")
    print(f"rim nu_up  {cap.nu_up(args.radius):.12g}")
    if args.out:
        r = np.linspace(0.0, args.radius, args.samples)
        path = Path(args.out)
        path.parent.mkdir(parents=True, exist_ok=True)
        with path.open("w") as fh:
            fh.write("r,u,nu_up\n")
            for rr, uu, nn in zip(r, cap.height(r), cap.nu_up(r)):
                fh.write(f"{rr:.12e},{uu:.12e},{nn:.12e}\n")
        print(f"profile    {path}")
    return EXIT_OK


def _cmd_report(args) -> int:
    run = Path(args.run_dir)
    if not run.is_dir():
        print(f"no such run directory: {run}", file=sys.stderr)
        return EXIT_CONFIG
    rep_path = run / "report.json"
    if rep_path.exists():
        rep = json.loads(rep_path.read_text())
        print("estimate report:")
        for key in ("sigma", "eps", "min_nu_up", "min_kappa", "max_S1_interior",
                    "max_S1_boundary_ring", "ratio", "q_argmax_location",
                    "residual_linf"):
            if key in rep:
                print(f"  {key:<22} {rep[key]}")
    ver_path = run / "verify.json"
    if ver_path.exists():
        doc = json.loads(ver_path.read_text())
        n_ok = sum(1 for r in doc["certificates"] if r["pass"])
        print(f"verification: {n_ok}/{len(doc['certificates'])} certificates passed")
    figures = render_run_dir(run)
    for f in figures:
        print(f"figure  {f}")
    if not figures and not rep_path.exists() and not ver_path.exists():
        print("nothing to report in this directory", file=sys.stderr)
        return EXIT_CONFIG
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(
        prog="plateau-h",
        description="constant scalar curvature graphs over the hyperbolic half-space",
    )
    sub = ap.add_subparsers(dest="command", required=True)

    p = sub.add_parser("solve", help="run the continuation solver")
    p.add_argument("-c", "--config", required=True)
    p.set_defaults(fn=_cmd_solve)

    p = sub.add_parser("verify", help="run all inequality certificates")
    p.add_argument("-c", "--config", required=True)
    p.set_defaults(fn=_cmd_verify)

    p = sub.add_parser("cap", help="closed-form equidistant cap")
    p.add_argument("--radius", type=float, required=True)
    p.add_argument("--sigma", type=float, required=True)
    p.add_argument("--eps", type=float, default=0.0)
    p.add_argument("--out", default=None, help="write a radial profile CSV")
    p.add_argument("--samples", type=int, default=129)
    p.set_defaults(fn=_cmd_cap)

    p = sub.add_parser("report", help="summarize a run directory and render figures")
    p.add_argument("run_dir")
    p.set_defaults(fn=_cmd_report)
    return ap


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return args.fn(args)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except DomainError as exc:
        print(f"domain error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except ValueError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except StagnationError as exc:
        print(f"solver stagnated: {exc}", file=sys.stderr)
        return EXIT_STAGNATION


if __name__ == "__main__":
    sys.exit(main())

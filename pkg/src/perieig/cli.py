"""``perieig`` command line.

Exit codes: 0 success, 1 catalog failures, 2 configuration or expression
error, 3 violated theorem hypothesis, 4 numerical failure.
"""

from __future__ import annotations

import argparse
import logging
import sys
from pathlib import Path

from .catalog import SELECTORS, format_outcomes, run_catalog
from .config import load_config
from .errors import ConfigError, HypothesisError, PerieigError
from .limits import LIMIT_MODES, compute_limit
from .ode import find_periodic_solutions
from .pde import build_period_map, principal_eigenpair
from .report import eigenfunction_csv, fmt, orbit_csv, orbit_table, write_text
from .study import run_study


def _cmd_eigen(args) -> int:
    cfg = load_config(args.config)
    if not args.diffusion > 0:
        raise ConfigError("--diffusion must be positive")
    scheme = cfg.scheme_for(args.diffusion)
    pmap = build_period_map(cfg.problem, args.diffusion, scheme)
    res = principal_eigenpair(pmap, cfg.tol, cfg.max_iters, eigenfunction=cfg.output_dir is not None)
    print(f"lambda = {fmt(res.lambda_)}")
    print(f"nx = {scheme.n_x}  nt = {scheme.n_t}  iterations = {res.iterations}  residual = {res.residual:.3g}")
    if cfg.output_dir is not None:
        path = write_text(
            Path(cfg.output_dir) / f"eigenfunction_D{args.diffusion:g}.csv",
            eigenfunction_csv(res.x, res.t, res.eigenfunction),
        )
        print(f"eigenfunction written to {path}")
    return 0


def _cmd_limit(args) -> int:
    cfg = load_config(args.config)
    result = compute_limit(cfg.problem, args.mode or cfg.limit_mode)
    print(result.report())
    if cfg.output_dir is not None:
        write_text(Path(cfg.output_dir) / "limit.csv", result.to_csv())
    return 0


def _cmd_orbits(args) -> int:
    cfg = load_config(args.config)
    orbits = find_periodic_solutions(cfg.problem.fields(), scan_n=args.scan_n, allow_degenerate=True)
    table = orbit_table(orbits)
    sys.stdout.write(table)
    if cfg.output_dir is not None:
        out = Path(cfg.output_dir)
        write_text(out / "orbits.csv", table)
        for i, orbit in enumerate(orbits):
            write_text(out / f"orbit_{i}.csv", orbit_csv(orbit))
    return 0


def _cmd_study(args) -> int:
    cfg = load_config(args.config)
    if len(cfg.diffusions) < 2:
        raise ConfigError("[study] diffusions needs at least two values")
    report = run_study(cfg, workers=args.workers)
    print(report.limit.report())
    print()
    print(report.summary())
    for name, path in report.files.items():
        print(f"{name}: {path}")
    return 4 if any(r.failed for r in report.rows) else 0


def _cmd_catalog(args) -> int:
    try:
        outcomes = run_catalog(args.select, progress=lambda o: print(format_outcomes([o]).splitlines()[0], flush=True))
    except ValueError as exc:
        raise ConfigError(str(exc)) from None
    failed = sum(not o.passed for o in outcomes)
    print(f"{len(outcomes) - failed}/{len(outcomes)} passed")
    return 1 if failed else 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="perieig", description="Principal eigenvalues of time-periodic parabolic operators")
    parser.add_argument("-v", "--verbose", action="store_true", help="debug logging")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("eigen", help="principal eigenvalue at one diffusion value")
    p.add_argument("--config", required=True)
    p.add_argument("--diffusion", type=float, required=True)
    p.set_defaults(func=_cmd_eigen)

    p = sub.add_parser("limit", help="closed-form small-diffusion limit")
    p.add_argument("--config", required=True)
    p.add_argument("--mode", choices=LIMIT_MODES)
    p.set_defaults(func=_cmd_limit)

    p = sub.add_parser("orbits", help="periodic solutions of the drift ODE")
    p.add_argument("--config", required=True)
    p.add_argument("--scan-n", type=int, default=128)
    p.set_defaults(func=_cmd_orbits)

    p = sub.add_parser("study", help="lambda(D) against the limit over the configured diffusions")
    p.add_argument("--config", required=True)
    p.add_argument("--workers", type=int, default=None)
    p.set_defaults(func=_cmd_study)

    p = sub.add_parser("catalog", help="run the built-in problem suite")
    p.add_argument("--select", default="all", help=f"group ({', '.join(SELECTORS)}) or entry name")
    p.set_defaults(func=_cmd_catalog)
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(level=logging.DEBUG if args.verbose else logging.WARNING, format="%(levelname)s %(name)s: %(message)s")
    try:
        return args.func(args)
    except HypothesisError as exc:
        print(f"error: {exc}", file=sys.stderr)
        for check in exc.report:
            print(f"  {check}", file=sys.stderr)
        return exc.exit_code
    except PerieigError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return exc.exit_code
    except (OSError, ValueError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())

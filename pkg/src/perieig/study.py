"""Convergence studies: lambda(D) over a decreasing diffusion sequence
compared with the closed-form limit."""

from __future__ import annotations

import logging
import math
import os
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from pathlib import Path

from .config import StudyConfig
from .errors import NumericalError
from .limits import LimitResult, compute_limit
from .pde import build_period_map, principal_eigenpair
from .report import fmt, svg_plot, write_text

__all__ = ["StudyRow", "StudyReport", "solve_row", "run_study", "STUDY_HEADER"]

log = logging.getLogger(__name__)

STUDY_HEADER = "D,lambda,limit,gap,nx,nt,iterations,residual"


@dataclass
class StudyRow:
    D: float
    lambda_: float
    n_x: int
    n_t: int
    iterations: int
    residual: float
    error: str | None = None

    @property
    def failed(self) -> bool:
        return self.error is not None


@dataclass
class StudyReport:
    rows: list[StudyRow]
    limit: LimitResult
    files: dict[str, Path] = field(default_factory=dict)

    @property
    def limit_value(self) -> float:
        return self.limit.value

    def gap(self, row: StudyRow) -> float:
        return abs(row.lambda_ - self.limit.value) if not row.failed else math.nan

    @property
    def gaps(self) -> list[float]:
        return [self.gap(r) for r in self.rows]

    @property
    def final_gap(self) -> float:
        good = [self.gap(r) for r in self.rows if not r.failed]
        return good[-1] if good else math.nan

    @property
    def monotone(self) -> bool:
        """True iff the gaps never increase from one successful row to the next."""
        good = [self.gap(r) for r in self.rows if not r.failed]
        return all(b <= a for a, b in zip(good, good[1:]))

    def to_csv(self) -> str:
        lines = [STUDY_HEADER]
        for r in self.rows:
            lines.append(
                ",".join(
                    fmt(v)
                    for v in (r.D, r.lambda_, self.limit.value, self.gap(r), r.n_x, r.n_t, r.iterations, r.residual)
                )
            )
        return "\n".join(lines) + "\n"

    def summary(self) -> str:
        out = [f"limit = {fmt(self.limit.value)} ({self.limit.theorem_used}, attained by {self.limit.attaining.label})"]
        out.append(f"{'D':>10} {'lambda':>22} {'gap':>12} {'nx':>6} {'nt':>7} {'iters':>6}")
        for r in self.rows:
            if r.failed:
                out.append(f"{r.D:>10.3g} FAILED: {r.error}")
            else:
                out.append(
                    f"{r.D:>10.3g} {r.lambda_:>22.15g} {self.gap(r):>12.4g} {r.n_x:>6d} {r.n_t:>7d} {r.iterations:>6d}"
                )
        out.append(f"gaps non-increasing: {'yes' if self.monotone else 'no'}")
        return "\n".join(out)

    def svg(self) -> str:
        good = [r for r in self.rows if not r.failed]
        return svg_plot(
            [("|lambda(D) - limit|", [r.D for r in good], [self.gap(r) for r in good])],
            title="gap to the small-diffusion limit",
            xlabel="D",
            ylabel="gap",
            logx=True,
            logy=True,
        )


def solve_row(cfg: StudyConfig, D: float) -> StudyRow:
    scheme = cfg.scheme_for(D)
    try:
        pmap = build_period_map(cfg.problem, D, scheme)
        res = principal_eigenpair(pmap, cfg.tol, cfg.max_iters, eigenfunction=False)
    except NumericalError as exc:
        log.warning("D=%g failed: %s", D, exc)
        return StudyRow(D, math.nan, scheme.n_x, scheme.n_t, 0, math.nan, str(exc))
    return StudyRow(D, res.lambda_, scheme.n_x, scheme.n_t, res.iterations, res.residual)


def run_study(cfg: StudyConfig, workers: int | None = None, write: bool = True) -> StudyReport:
    """Compute the limit, then lambda(D) for every D on a thread pool.

    Rows come back in descending-D order regardless of completion order.  A
    row whose solver fails is kept and flagged; the limit and the other rows
    stay valid.  Hypothesis errors from the limit evaluation propagate.
    """
    if len(cfg.diffusions) < 2:
        raise ValueError("a study needs at least two diffusion values")
    limit = compute_limit(cfg.problem, cfg.limit_mode)
    ds = sorted(cfg.diffusions, reverse=True)
    if workers is None:
        workers = min(len(ds), os.cpu_count() or 1)
    if workers <= 1:
        rows = [solve_row(cfg, D) for D in ds]
    else:
        with ThreadPoolExecutor(max_workers=workers) as pool:
            rows = list(pool.map(lambda D: solve_row(cfg, D), ds))
    report = StudyReport(rows, limit)
    if write and cfg.output_dir is not None:
        out = Path(cfg.output_dir)
        report.files["study"] = write_text(out / "study.csv", report.to_csv())
        report.files["limit"] = write_text(out / "limit.csv", limit.to_csv())
        report.files["report"] = write_text(out / "report.txt", limit.report() + "\n\n" + report.summary() + "\n")
        report.files["plot"] = write_text(out / "study.svg", report.svg())
    return report

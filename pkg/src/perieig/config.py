"""Line-oriented study configuration files.

Example::

    [problem]
    T = 1
    m = -(x-0.45)^2
    V = sin(2*pi*t)*cos(pi*x) + x

    [study]
    diffusions = 1e-2, 3e-3, 1e-3, 3e-4

Sections ``[problem]``, ``[solver]``, ``[study]`` and ``[output]``; unknown
keys are rejected with their line number.
"""

from __future__ import annotations

import re
from dataclasses import dataclass, field
from pathlib import Path

from .errors import ConfigError
from .expr import parse_expr
from .fields import BoundaryCondition, LinearDrift, ProblemSpec
from .limits import LIMIT_MODES
from .pde import ADVECTION_SCHEMES, SchemeConfig, default_resolution

__all__ = ["StudyConfig", "load_config", "parse_config"]

KEYS = {
    "problem": {"T", "m", "V", "b", "alpha", "bc_left", "bc_right"},
    "solver": {"nx", "nt", "advection", "tol", "max_iters"},
    "study": {"diffusions", "limit_mode"},
    "output": {"dir"},
}
_SECTION = re.compile(r"^\[(\w+)\]$")
_PARAM = re.compile(r"^param\.([A-Za-z_]\w*)$")


@dataclass
class StudyConfig:
    problem: ProblemSpec
    diffusions: tuple[float, ...] = ()
    n_x: int | None = None
    n_t: int | None = None
    advection: str = "auto"
    tol: float = 1e-10
    max_iters: int = 20000
    output_dir: Path | None = None
    limit_mode: str = "auto"
    source: Path | None = field(default=None, compare=False)

    def scheme_for(self, D: float) -> SchemeConfig:
        """Scheme at diffusion ``D``: the default resolution policy plus overrides."""
        return default_resolution(D, self.problem, self.advection, self.n_x, self.n_t)


def load_config(path) -> StudyConfig:
    path = Path(path)
    text = path.read_text(encoding="utf-8")
    cfg = parse_config(text)
    cfg.source = path
    if cfg.output_dir is not None and not cfg.output_dir.is_absolute():
        cfg.output_dir = path.parent / cfg.output_dir
    return cfg


def _number(value: str, key: str, line: int, kind=float):
    try:
        return kind(value)
    except ValueError:
        raise ConfigError(f"{key} expects a {kind.__name__}, got {value!r}", line) from None


def parse_config(text: str) -> StudyConfig:
    section = None
    raw: dict[tuple[str, str], tuple[str, int]] = {}
    params: dict[str, float] = {}
    for lineno, line in enumerate(text.splitlines(), start=1):
        line = line.split("#", 1)[0].strip()
        if not line:
            continue
        head = _SECTION.match(line)
        if head:
            section = head.group(1)
            if section not in KEYS:
                raise ConfigError(f"unknown section [{section}]", lineno)
            continue
        if "=" not in line:
            raise ConfigError(f"expected 'key = value', got {line!r}", lineno)
        key, value = (part.strip() for part in line.split("=", 1))
        if section is None:
            raise ConfigError(f"key {key!r} outside of any section", lineno)
        if not value:
            raise ConfigError(f"empty value for {key!r}", lineno)
        pm = _PARAM.match(key)
        if pm and section == "problem":
            if pm.group(1) in params:
                raise ConfigError(f"duplicate parameter {pm.group(1)!r}", lineno)
            params[pm.group(1)] = _number(value, key, lineno)
            continue
        if key not in KEYS[section]:
            raise ConfigError(f"unknown key {key!r} in [{section}]", lineno)
        if (section, key) in raw:
            raise ConfigError(f"duplicate key {key!r}", lineno)
        raw[(section, key)] = (value, lineno)

    def get(section, key):
        return raw.get((section, key), (None, None))

    T_text, T_line = get("problem", "T")
    T = _number(T_text, "T", T_line) if T_text is not None else 1.0
    if not T > 0:
        raise ConfigError("T must be positive", T_line)

    bcs = []
    for key in ("bc_left", "bc_right"):
        text_bc, line_bc = get("problem", key)
        if text_bc is None:
            bcs.append(BoundaryCondition.neumann())
            continue
        try:
            bcs.append(BoundaryCondition.parse(text_bc))
        except ConfigError as exc:
            raise ConfigError(str(exc), line_bc) from None
        except ValueError as exc:
            raise ConfigError(str(exc), line_bc) from None

    V_text, _ = get("problem", "V")
    if V_text is None:
        raise ConfigError("[problem] needs V")
    V = parse_expr(V_text, params)

    b_text, b_line = get("problem", "b")
    alpha_text, alpha_line = get("problem", "alpha")
    m_text, m_line = get("problem", "m")
    drift = None
    if (b_text is None) != (alpha_text is None):
        raise ConfigError("b and alpha must be given together", b_line or alpha_line)
    if b_text is not None:
        alpha = _number(alpha_text, "alpha", alpha_line)
        try:
            drift = LinearDrift(parse_expr(b_text, params), alpha)
        except ValueError as exc:
            raise ConfigError(str(exc), alpha_line) from None
    if m_text is not None:
        m = parse_expr(m_text, params)
    elif drift is not None:
        m = drift.m_expr()
    else:
        raise ConfigError("[problem] needs m (or b and alpha)")
    problem = ProblemSpec(m, V, T, params, bcs[0], bcs[1], drift)

    cfg = StudyConfig(problem)
    text_nx, line_nx = get("solver", "nx")
    if text_nx is not None:
        cfg.n_x = _number(text_nx, "nx", line_nx, int)
        if cfg.n_x < 16:
            raise ConfigError("nx must be >= 16", line_nx)
    text_nt, line_nt = get("solver", "nt")
    if text_nt is not None:
        cfg.n_t = _number(text_nt, "nt", line_nt, int)
        if cfg.n_t < 32:
            raise ConfigError("nt must be >= 32", line_nt)
    adv, adv_line = get("solver", "advection")
    if adv is not None:
        if adv not in ADVECTION_SCHEMES:
            raise ConfigError(f"advection must be one of {', '.join(ADVECTION_SCHEMES)}", adv_line)
        cfg.advection = adv
    tol, tol_line = get("solver", "tol")
    if tol is not None:
        cfg.tol = _number(tol, "tol", tol_line)
        if not cfg.tol > 0:
            raise ConfigError("tol must be positive", tol_line)
    iters, iters_line = get("solver", "max_iters")
    if iters is not None:
        cfg.max_iters = _number(iters, "max_iters", iters_line, int)
        if cfg.max_iters < 1:
            raise ConfigError("max_iters must be positive", iters_line)

    diff, diff_line = get("study", "diffusions")
    if diff is not None:
        values = tuple(_number(v.strip(), "diffusions", diff_line) for v in diff.split(","))
        if len(values) < 2:
            raise ConfigError("diffusions needs at least two values", diff_line)
        if any(not v > 0 for v in values):
            raise ConfigError("diffusions must be positive", diff_line)
        if any(b >= a for a, b in zip(values, values[1:])):
            raise ConfigError("diffusions must be strictly decreasing", diff_line)
        cfg.diffusions = values
    mode, mode_line = get("study", "limit_mode")
    if mode is not None:
        if mode not in LIMIT_MODES:
            raise ConfigError(f"limit_mode must be one of {', '.join(LIMIT_MODES)}", mode_line)
        cfg.limit_mode = mode
    out, _ = get("output", "dir")
    if out is not None:
        cfg.output_dir = Path(out)
    return cfg

"""Batch driver: ``proxmm-run CONFIG``.

The config file holds ``key = value`` lines; ``#`` starts a comment and
unknown keys are rejected.  Example::

    task = denoise
    solver = pmm
    synthetic = 16        # or: input = noisy.pgm
    noise_density = 0.2
    seed = 2024
    alpha = 1.5
    c_factor = 2
    output = run/denoise

Outputs ``<output>.trace.csv`` and, for ``denoise``, ``<output>.out.pgm``
(plus ``<output>.noisy.pgm`` when noise is applied); for ``lasso`` the
solution is written to ``<output>.x.txt``.

Exit status: 0 converged, 2 finished without convergence, 1 bad config or I/O.
"""
from __future__ import annotations

import argparse
import csv
import math
import os
import sys
from dataclasses import dataclass, fields

import numpy as np

from .inner_newton import InnerConfig
from .outer_solvers import (
    CSV_COLUMNS,
    ConstantC,
    FBNConfig,
    GeometricC,
    GeometricEps,
    OuterConfig,
    admm_solve,
    alm_solve,
    fb_newton_solve,
    pmm_solve,
)
from .operators import Identity
from .problems_io import Image, build_l1tv, build_lasso, phantom, read_pgm, salt_pepper_noise, write_pgm

__all__ = ["ConfigError", "RunConfig", "parse_config", "run", "write_trace_csv", "main"]

TASKS = ("denoise", "lasso")
SOLVERS = ("pmm", "alm", "admm", "fbn")


class ConfigError(ValueError):
    pass


@dataclass
class RunConfig:
    task: str = "denoise"
    solver: str = "pmm"
    input: str | None = None
    synthetic: int | None = None
    A: str | None = None
    b: str | None = None
    alpha: float = 1.0
    c0: float | None = None
    c_factor: float = 1.0
    c_cap: float = 1e6
    eps0: float = 1e-2
    kappa: float = 0.5
    r: int = 0
    kkt_tol: float = 1e-8
    max_outer: int = 100
    seed: int = 0
    noise_density: float = 0.0
    output: str = "out"

    def validate(self) -> None:
        if self.task not in TASKS:
            raise ConfigError(f"task must be one of {TASKS}, got {self.task!r}")
        if self.solver not in SOLVERS:
            raise ConfigError(f"solver must be one of {SOLVERS}, got {self.solver!r}")
        if self.task == "denoise" and self.solver == "fbn":
            raise ConfigError("solver fbn needs E = Identity; the denoise task has E = [I; grad]")
        if self.task == "denoise" and (self.input is None) == (self.synthetic is None):
            raise ConfigError("denoise needs exactly one of 'input' or 'synthetic'")
        if self.task == "lasso" and self.input is None and (self.A is None or self.b is None):
            raise ConfigError("lasso needs 'input' (.npz with A and b) or inline 'A' and 'b'")
        if not self.alpha > 0:
            raise ConfigError("alpha must be positive")
        if self.c0 is not None and not self.c0 > 0:
            raise ConfigError("c0 must be positive")
        if self.c_factor < 1:
            raise ConfigError("c_factor must be >= 1")
        if not self.eps0 > 0 or not 0 < self.kappa < 1:
            raise ConfigError("need eps0 > 0 and 0 < kappa < 1")
        if self.r not in (0, 1):
            raise ConfigError("r must be 0 or 1")
        if not self.kkt_tol > 0 or self.max_outer < 1:
            raise ConfigError("need kkt_tol > 0 and max_outer >= 1")
        if not 0 <= self.noise_density < 1:
            raise ConfigError("noise_density must lie in [0, 1)")


_TYPES = {f.name: f.type for f in fields(RunConfig)}


def _convert(key: str, raw: str):
    kind = _TYPES[key]
    try:
        if "int" in kind:
            return int(raw)
        if "float" in kind:
            return float(raw)
    except ValueError as exc:
        raise ConfigError(f"bad value for {key}: {raw!r}") from exc
    return raw


def parse_config(text: str) -> RunConfig:
    cfg = RunConfig()
    seen = set()
    for lineno, line in enumerate(text.splitlines(), 1):
        line = line.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ConfigError(f"line {lineno}: expected 'key = value'")
        key, raw = (s.strip() for s in line.split("=", 1))
        if key not in _TYPES:
            raise ConfigError(f"line {lineno}: unknown key {key!r}")
        if key in seen:
            raise ConfigError(f"line {lineno}: duplicate key {key!r}")
        seen.add(key)
        setattr(cfg, key, _convert(key, raw))
    cfg.validate()
    return cfg


def _parse_matrix(text: str) -> np.ndarray:
    """Rows separated by ';', entries by ',' or spaces."""
    rows = [r.replace(",", " ").split() for r in text.split(";")]
    try:
        M = np.array([[float(v) for v in r] for r in rows])
    except ValueError as exc:
        raise ConfigError(f"cannot parse matrix {text!r}") from exc
    if M.ndim != 2:
        raise ConfigError(f"ragged matrix {text!r}")
    return M


def _fmt(v) -> str:
    if isinstance(v, (int, np.integer)):
        return str(int(v))
    return repr(float(v))


def write_trace_csv(trace, path) -> None:
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(CSV_COLUMNS)
        for row in trace.rows:
            w.writerow(
                [_fmt(getattr(row, col)) if col != "wall_ms" else f"{row.wall_ms:.3f}" for col in CSV_COLUMNS]
            )


def _outer_config(cfg: RunConfig) -> OuterConfig:
    c0 = 1.0 if cfg.c0 is None else cfg.c0
    sched = ConstantC(c0) if cfg.c_factor == 1 else GeometricC(c0, cfg.c_factor, max(cfg.c_cap, c0))
    return OuterConfig(
        c_schedule=sched,
        eps_schedule=GeometricEps(cfg.eps0, cfg.kappa),
        r=cfg.r,
        max_outer=cfg.max_outer,
        kkt_tol=cfg.kkt_tol,
        inner=InnerConfig(),
    )


def run(cfg: RunConfig) -> int:
    """Execute one configured run; returns the process exit status."""
    prefix = cfg.output
    parent = os.path.dirname(prefix)
    if parent:
        os.makedirs(parent, exist_ok=True)

    img = None
    if cfg.task == "denoise":
        img = phantom(cfg.synthetic) if cfg.synthetic is not None else read_pgm(cfg.input)
        if cfg.noise_density > 0:
            img = salt_pepper_noise(img, cfg.noise_density, cfg.seed)
            write_pgm(img, prefix + ".noisy.pgm")
        p = build_l1tv(img, cfg.alpha)
        x0 = img.vector
    else:
        if cfg.input is not None:
            with np.load(cfg.input) as data:
                A, b = data["A"], data["b"]
        else:
            A, b = _parse_matrix(cfg.A), _parse_matrix(cfg.b).ravel()
        try:
            p = build_lasso(A, b, cfg.alpha)
        except ValueError as exc:
            raise ConfigError(str(exc)) from exc
        x0 = np.zeros(p.n)

    if cfg.solver in ("pmm", "alm"):
        solve = pmm_solve if cfg.solver == "pmm" else alm_solve
        state, trace = solve(p, _outer_config(cfg), x0=x0)
        x = state.x
    elif cfg.solver == "admm":
        state, trace = admm_solve(p, 1.0 if cfg.c0 is None else cfg.c0, cfg.max_outer, cfg.kkt_tol, x0=x0)
        x = state.x
    else:
        if not isinstance(p.E, Identity):
            raise ConfigError("solver fbn needs E = Identity")
        c = 2.0 * max(p.f.lipschitz, 1e-12) if cfg.c0 is None else cfg.c0
        try:
            x, trace = fb_newton_solve(p, c, FBNConfig(max_iters=cfg.max_outer, tol=cfg.kkt_tol), x0=x0)
        except ValueError as exc:
            raise ConfigError(str(exc)) from exc

    write_trace_csv(trace, prefix + ".trace.csv")
    if img is not None:
        write_pgm(Image.from_vector(x, clip=True), prefix + ".out.pgm")
    else:
        np.savetxt(prefix + ".x.txt", x, fmt="%.17g")
    final = trace.final
    print(
        f"{cfg.solver}: {len(trace)} iterations, objective {final.objective:.12g}, "
        f"kkt ({final.kkt_stat:.3e}, {final.kkt_feas:.3e})"
        + ("" if trace.converged else f", not converged: {'; '.join(trace.flags)}"),
        file=sys.stderr,
    )
    if not math.isfinite(final.objective) or not trace.converged:
        return 2
    return 0


def main(argv=None) -> int:
    parser = argparse.ArgumentParser(prog="proxmm-run", description="Run a configured solve.")
    parser.add_argument("config", help="path to a key = value config file")
    args = parser.parse_args(argv)
    try:
        with open(args.config) as fh:
            cfg = parse_config(fh.read())
        return run(cfg)
    except (ConfigError, OSError, ValueError, KeyError) as exc:
        print(f"proxmm-run: error: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())

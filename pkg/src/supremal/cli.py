"""Command line entry point: ``python -m supremal <command> ...``.

Commands: envelope, decide, solve, verify, sweep.  Every run writes JSON or
CSV files into ``--out`` and exits with a code derived from the result:

    0   exists / audit passed
    1   audit failed
    2   bad configuration
    3   computation error
    10  no minimizer exists
    11  undecided at this resolution
    12  solve refused after a no-minimizer verdict
"""

from __future__ import annotations

import argparse
import csv
import json
import sys
from dataclasses import asdict, dataclass, field, fields
from pathlib import Path
from typing import Optional

import numpy as np

from .config import ToleranceConfig
from .errors import ConfigError, SupremalError, UnknownField, VerdictWasNotExists
from .fields import Domain, GridSpec, ScalarField, builtin, load_field

EXIT = {"exists": 0, "not_exists": 10, "unknown": 11}
EXIT_AUDIT_FAIL = 1
EXIT_CONFIG = 2
EXIT_COMPUTE = 3
EXIT_REFUSED = 12

COMMANDS = ("envelope", "decide", "solve", "verify", "sweep")


@dataclass
class RunConfig:
    command: str
    builtin: Optional[str] = None
    field: Optional[str] = None
    grid: Optional[int] = None
    bounds: Optional[str] = None
    domain: Optional[str] = None
    xi0: Optional[str] = None
    mesh: Optional[str] = None
    claimed: Optional[float] = None
    pieces: int = 4
    residual_tol: float = 1e-2
    max_cells: int = 20000
    range: str = "-1.5:1.5"
    steps: int = 31
    tol_geom: float = 1e-9
    tol_level: float = 1e-7
    seed: int = 0
    out: str = "out"

    def validate(self) -> "RunConfig":
        if self.command not in COMMANDS:
            raise ConfigError(f"unknown command {self.command!r}")
        if self.command != "verify" and (self.builtin is None) == (self.field is None):
            raise ConfigError("give exactly one of --builtin or --field")
        if self.command in ("decide", "solve") and self.xi0 is None:
            raise ConfigError(f"{self.command} needs --xi0")
        if self.grid is not None and self.grid < 2:
            raise ConfigError("--grid needs at least 2 nodes per axis")
        if self.pieces < 1 or self.max_cells < 1 or self.steps < 1:
            raise ConfigError("--pieces, --max-cells and --steps must be positive")
        if not 0 <= self.residual_tol < 1:
            raise ConfigError("--residual-tol must lie in [0, 1)")
        if self.tol_geom <= 0 or self.tol_level <= 0:
            raise ConfigError("tolerances must be positive")
        return self

    @property
    def tol(self) -> ToleranceConfig:
        return ToleranceConfig(geom=self.tol_geom, level=self.tol_level)

    def load_field(self) -> ScalarField:
        if self.builtin is not None:
            return builtin(self.builtin)
        try:
            return load_field(self.field)
        except (OSError, json.JSONDecodeError) as exc:
            raise ConfigError(f"cannot read field file {self.field}: {exc}") from exc

    def grid_for(self, f: ScalarField) -> GridSpec:
        if f.kind == "sampled" and self.grid is None and self.bounds is None:
            return f.grid
        lo, hi = _pair(self.bounds or "-2:2")
        n = self.grid or (401 if f.dim == 1 else 65)
        return GridSpec((lo,) * f.dim, (hi,) * f.dim, n)

    def domain_for(self, dim: int) -> Domain:
        if self.domain is None:
            return Domain.interval(0.0, 1.0) if dim == 1 else Domain.box()
        pts = [[float(c) for c in v.split(",")] for v in self.domain.split(";")]
        if dim == 1:
            if len(pts) != 2:
                raise ConfigError("1D domain is 'a;b'")
            return Domain.interval(pts[0][0], pts[1][0])
        return Domain.polygon(pts)

    def point(self, dim: int) -> np.ndarray:
        p = np.array([float(c) for c in self.xi0.split(",")])
        if len(p) != dim:
            raise ConfigError(f"--xi0 needs {dim} component(s)")
        return p


def _pair(text: str) -> tuple:
    try:
        a, b = (float(t) for t in text.split(":"))
    except ValueError as exc:
        raise ConfigError(f"expected 'lo:hi', got {text!r}") from exc
    if not a < b:
        raise ConfigError(f"empty range {text!r}")
    return a, b


def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--config", help="JSON file with RunConfig keys; flags override it")
    common.add_argument("--out", help="output directory")
    common.add_argument("--tol-geom", type=float)
    common.add_argument("--tol-level", type=float)
    common.add_argument("--seed", type=int)
    common.add_argument("--builtin")
    common.add_argument("--field", help="field JSON file")
    common.add_argument("--grid", type=int, help="nodes per axis")
    common.add_argument("--bounds", help="grid extent lo:hi on every axis")
    common.add_argument("--domain", help="domain vertices 'x,y;x,y;...' (1D: 'a;b')")

    p = argparse.ArgumentParser(prog="supremal", description=__doc__.splitlines()[0])
    sub = p.add_subparsers(dest="command", required=True)
    sub.add_parser("envelope", parents=[common], help="level-convex envelope on a grid")
    d = sub.add_parser("decide", parents=[common], help="existence verdict for affine data")
    d.add_argument("--xi0")
    s = sub.add_parser("solve", parents=[common], help="construct a minimizer")
    s.add_argument("--xi0")
    s.add_argument("--pieces", type=int)
    s.add_argument("--residual-tol", type=float)
    s.add_argument("--max-cells", type=int)
    v = sub.add_parser("verify", parents=[common], help="audit a stored solution")
    v.add_argument("--mesh", help="mesh JSON (default OUT/solution_mesh.json)")
    v.add_argument("--claimed", type=float, help="claimed relaxed value (default from solve report)")
    w = sub.add_parser("sweep", parents=[common], help="verdicts over a lattice of xi0")
    w.add_argument("--range")
    w.add_argument("--steps", type=int)
    return p


def make_config(argv=None) -> RunConfig:
    args = build_parser().parse_args(argv)
    values = {}
    if args.config:
        try:
            raw = json.loads(Path(args.config).read_text())
        except (OSError, json.JSONDecodeError) as exc:
            raise ConfigError(f"cannot read config {args.config}: {exc}") from exc
        known = {f.name for f in fields(RunConfig)}
        unknown = set(raw) - known
        if unknown:
            raise ConfigError(f"unknown config keys: {sorted(unknown)}")
        values.update(raw)
    for k, v in vars(args).items():
        if k != "config" and v is not None:
            values[k] = v
    values["command"] = args.command
    return RunConfig(**values).validate()


def _write_json(path: Path, obj) -> None:
    path.write_text(json.dumps(obj, indent=1))


def cmd_envelope(cfg: RunConfig, out: Path) -> int:
    from .envelope import envelope

    f = cfg.load_field()
    grid = cfg.grid_for(f)
    env = envelope(f, grid, cfg.tol)
    env.save(out / "envelope.csv", out / "envelope_certificates.json")
    # whitespace columns with blank lines between rows, readable by gnuplot splot
    nodes = grid.nodes()
    with open(out / "envelope.dat", "w") as fh:
        row = grid.shape[-1] if grid.dim == 2 else len(nodes) + 1
        for k, (p, fv, ev) in enumerate(zip(nodes, env.field_values.ravel(), env.values.ravel())):
            fh.write(" ".join(repr(float(c)) for c in p) + f" {float(fv)!r} {float(ev)!r}\n")
            if grid.dim == 2 and (k + 1) % row == 0:
                fh.write("\n")
    print(f"envelope: {grid.size} nodes, method {env.method}, min {env.values.min():.6g}")
    return 0


def cmd_decide(cfg: RunConfig, out: Path) -> int:
    from .existence import decide_affine

    f = cfg.load_field()
    verdict = decide_affine(f, cfg.point(f.dim), cfg.grid_for(f), cfg.tol)
    _write_json(out / "verdict.json", verdict.to_dict())
    print(verdict.summary())
    return EXIT[verdict.decision.value]


def cmd_solve(cfg: RunConfig, out: Path) -> int:
    from .inclusion import solve_P

    f = cfg.load_field()
    try:
        u, report = solve_P(f, cfg.point(f.dim), cfg.grid_for(f), cfg.domain_for(f.dim), cfg.residual_tol,
                            cfg.pieces, cfg.max_cells, cfg.tol)
    except VerdictWasNotExists as exc:
        print(f"refused: {exc}")
        return EXIT_REFUSED
    u.save(out / "solution_mesh.json", out / "solution_gradients.csv")
    _write_json(out / "solve_report.json", report.to_dict())
    print(f"solve: {len(u.cells)} cells, ess-sup {report.ess_sup:.6g}, relaxed value "
          f"{report.relaxed_value:.6g}, residual {report.residual_fraction:.3g}")
    return 0


def cmd_verify(cfg: RunConfig, out: Path) -> int:
    from .envelope import envelope
    from .inclusion import PiecewiseAffineFunction
    from .oracle import audit_solution, jensen_audit

    mesh = Path(cfg.mesh) if cfg.mesh else out / "solution_mesh.json"
    try:
        u = PiecewiseAffineFunction.load(mesh)
    except (OSError, json.JSONDecodeError, KeyError) as exc:
        raise ConfigError(f"cannot read mesh {mesh}: {exc}") from exc
    claimed = cfg.claimed
    if claimed is None:
        rep = out / "solve_report.json"
        if not rep.exists():
            raise ConfigError("give --claimed or run solve into the same --out first")
        claimed = json.loads(rep.read_text())["relaxed_value"]
    if cfg.builtin is None and cfg.field is None:
        raise ConfigError("verify needs --builtin or --field")
    f = cfg.load_field()
    audit = audit_solution(f, u, claimed, cfg.tol)
    lc = envelope(f, cfg.grid_for(f), cfg.tol, certificates=False).as_field()
    jensen = jensen_audit(lc, u, cfg.tol)
    _write_json(out / "verify_report.json", {"audit": audit.to_dict(), "jensen_on_envelope": jensen.to_dict()})
    print(f"audit: max f = {audit.max_f:.6g} vs claimed {claimed:.6g} -> {'pass' if audit.passed else 'fail'}; "
          f"jensen on envelope {'holds' if jensen.holds else 'violated'}")
    return 0 if audit.passed else EXIT_AUDIT_FAIL


def cmd_sweep(cfg: RunConfig, out: Path) -> int:
    from .envelope import envelope
    from .existence import decide_affine

    f = cfg.load_field()
    lo, hi = _pair(cfg.range)
    ticks = np.round(np.linspace(lo, hi, cfg.steps), 12)
    pts = ticks[:, None] if f.dim == 1 else np.array([(a, b) for b in ticks for a in ticks])
    env = envelope(f, cfg.grid_for(f), cfg.tol, certificates=False)
    counts = {"exists": 0, "not_exists": 0, "unknown": 0}
    with open(out / "sweep.csv", "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow([f"xi0_{i + 1}" for i in range(f.dim)] + ["relaxed_value", "verdict", "level_gap",
                                                              "boundary_distance"])
        for p in pts:
            v = decide_affine(f, p, tol=cfg.tol, env=env)
            counts[v.decision.value] += 1
            w.writerow([repr(float(c)) for c in p] + [repr(v.relaxed_value), v.decision.value,
                                                      repr(v.margins.get("level_gap", float("nan"))),
                                                      repr(v.margins.get("boundary_distance", float("nan")))])
    print("sweep: " + ", ".join(f"{k}={n}" for k, n in counts.items()))
    return 0


HANDLERS = {"envelope": cmd_envelope, "decide": cmd_decide, "solve": cmd_solve, "verify": cmd_verify,
            "sweep": cmd_sweep}


def main(argv=None) -> int:
    try:
        cfg = make_config(argv)
        out = Path(cfg.out)
        out.mkdir(parents=True, exist_ok=True)
        _write_json(out / "run_config.json", asdict(cfg))
    except (ConfigError, UnknownField) as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except TypeError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    try:
        return HANDLERS[cfg.command](cfg, out)
    except (ConfigError, UnknownField) as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except (SupremalError, ValueError) as exc:
        print(f"computation error: {type(exc).__name__}: {exc}", file=sys.stderr)
        return EXIT_COMPUTE


if __name__ == "__main__":
    sys.exit(main())

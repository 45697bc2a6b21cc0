"""Command-line front end: ``solve``, ``certify``, ``verify`` and ``bench``.

Settings come from built-in defaults, then an optional JSON ``--config``
file, then explicit flags. Outputs are JSON (structured results) and CSV
(time series) written under ``--out``, which defaults to the directory in
``$MSACERT_OUT`` or ``./msacert-out``.

Exit codes: 0 on success, 1 when a verification fails or the solver does
not converge, 2 on a bad configuration.
"""

from __future__ import annotations

import argparse
import csv
import dataclasses
import io
import json
import logging
import math
import os
import sys
from dataclasses import dataclass
from pathlib import Path
from typing import Optional

import numpy as np

from .benchmarks import BUILTINS, BenchmarkProblem, builtin, lqr_problem
from .certificate import certify
from .exceptions import IntegrationDivergedError, MinimizerFailedError, UnknownProblemError
from .msa import empirical_contraction, solve
from .norms import L2, NormKind
from .oracle import LqrSpec
from .problem import LipschitzData, estimate_constants
from .signals import BoxSet, Grid, write_csv
from .sweep import backward_sweep, forward_sweep
from .verify import run_checks

__all__ = ["RunConfig", "ConfigError", "build_problem", "main", "run"]

OUT_ENV = "MSACERT_OUT"
log = logging.getLogger("msacert")


class ConfigError(ValueError):
    """Invalid run configuration."""


@dataclass
class RunConfig:
    """Everything that determines a run; serializes to and from JSON.

    ``lqr`` holds an inline LQR instance (keys ``A``, ``B``, ``Q``, ``R``,
    ``P_T``, ``x0`` and optionally ``box`` and ``c``) and replaces
    ``problem`` when given. ``state_norm`` and ``control_norm`` override the
    norms of LQR problems, whose constants are recomputed exactly.
    """

    problem: Optional[str] = "lqr-scalar"
    lqr: Optional[dict] = None
    grid_steps: int = 200
    horizon: Optional[float] = None
    tol: float = 1e-9
    max_iter: int = 100
    seed: int = 0
    state_norm: Optional[dict] = None
    control_norm: Optional[dict] = None
    out: Optional[str] = None
    constants: str = "declared"
    constants_file: Optional[str] = None
    budget: int = 256
    draws: int = 50
    pairs: int = 50
    bench_t_min: float = 0.1
    bench_t_max: float = 10.0
    bench_per_decade: int = 8
    bench_pairs: int = 10

    def __post_init__(self):
        self.validate()

    def validate(self) -> None:
        for name in ("grid_steps", "max_iter", "budget", "draws", "pairs", "bench_per_decade", "bench_pairs"):
            v = getattr(self, name)
            if isinstance(v, bool) or not isinstance(v, int) or v < 1:
                raise ConfigError(f"{name} must be a positive integer, got {v!r}")
        if self.grid_steps < 2:
            raise ConfigError("grid_steps must be at least 2")
        if not isinstance(self.seed, int) or isinstance(self.seed, bool) or self.seed < 0:
            raise ConfigError(f"seed must be a nonnegative integer, got {self.seed!r}")
        for name in ("tol", "bench_t_min", "bench_t_max"):
            v = getattr(self, name)
            if not isinstance(v, (int, float)) or not (math.isfinite(v) and v > 0):
                raise ConfigError(f"{name} must be a positive number, got {v!r}")
        if self.bench_t_max < self.bench_t_min:
            raise ConfigError("bench_t_max must not be below bench_t_min")
        if self.horizon is not None and not (math.isfinite(self.horizon) and self.horizon > 0):
            raise ConfigError(f"horizon must be positive, got {self.horizon!r}")
        if self.constants not in ("declared", "estimate"):
            raise ConfigError(f"constants must be 'declared' or 'estimate', got {self.constants!r}")
        if self.lqr is None and self.problem is None:
            raise ConfigError("either problem or lqr must be given")
        if self.lqr is not None and not isinstance(self.lqr, dict):
            raise ConfigError("lqr must be an object")
        if self.lqr is None and self.problem not in BUILTINS:
            raise ConfigError(f"unknown problem {self.problem!r}; choose from {list(BUILTINS)}")
        for name in ("state_norm", "control_norm"):
            d = getattr(self, name)
            if d is not None:
                try:
                    NormKind.from_dict(d)
                except (TypeError, ValueError, KeyError) as exc:
                    raise ConfigError(f"{name}: {exc}") from None

    @classmethod
    def from_dict(cls, d: dict) -> "RunConfig":
        if not isinstance(d, dict):
            raise ConfigError("configuration must be a JSON object")
        known = {f.name for f in dataclasses.fields(cls)}
        unknown = sorted(set(d) - known)
        if unknown:
            raise ConfigError(f"unknown configuration keys: {unknown}")
        d = dict(d)
        for name in ("tol", "bench_t_min", "bench_t_max", "horizon"):
            if isinstance(d.get(name), int) and not isinstance(d.get(name), bool):
                d[name] = float(d[name])
        return cls(**d)

    def to_dict(self) -> dict:
        return dataclasses.asdict(self)

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), indent=2, sort_keys=True) + "\n"

    def replace(self, **changes) -> "RunConfig":
        return dataclasses.replace(self, **changes)


def _lqr_from_config(cfg: RunConfig) -> BenchmarkProblem:
    d = dict(cfg.lqr)
    allowed = {"A", "B", "Q", "R", "P_T", "x0", "box", "c", "name"}
    unknown = sorted(set(d) - allowed)
    if unknown:
        raise ConfigError(f"unknown lqr keys: {unknown}")
    missing = [k for k in ("A", "B", "Q", "R", "x0") if k not in d]
    if missing:
        raise ConfigError(f"lqr is missing {missing}")
    n = len(d["x0"])
    lqr = LqrSpec(
        A=d["A"], B=d["B"], Q=d["Q"], R=d["R"],
        P_T=d.get("P_T", np.zeros((n, n))), x0=d["x0"],
        T=1.0 if cfg.horizon is None else cfg.horizon,
    )
    box = d.get("box", 10.0)
    if isinstance(box, dict):
        box = BoxSet(box["lower"], box["upper"])
    else:
        box = BoxSet.symmetric(float(box), lqr.k)
    sn = NormKind.from_dict(cfg.state_norm) if cfg.state_norm else L2
    cn = NormKind.from_dict(cfg.control_norm) if cfg.control_norm else L2
    return lqr_problem(lqr, box, sn, cn, c=d.get("c"), name=d.get("name", "lqr-inline"))


def build_problem(cfg: RunConfig) -> BenchmarkProblem:
    """Benchmark problem described by ``cfg`` (builtin or inline LQR)."""
    if cfg.lqr is not None:
        return _lqr_from_config(cfg)
    bp = builtin(cfg.problem, cfg.horizon)
    if cfg.state_norm is None and cfg.control_norm is None:
        return bp
    if bp.lqr is None:
        raise ConfigError(f"norm overrides are only supported for LQR problems, not {bp.name!r}")
    sn = NormKind.from_dict(cfg.state_norm) if cfg.state_norm else bp.spec.state_norm
    cn = NormKind.from_dict(cfg.control_norm) if cfg.control_norm else bp.spec.control_norm
    # the declared rate belongs to the default norm; recompute it for the new one
    return lqr_problem(bp.lqr, bp.spec.control_box, sn, cn, name=bp.name)


def resolve_constants(cfg: RunConfig, bp: BenchmarkProblem) -> LipschitzData:
    if cfg.constants_file is not None:
        try:
            with open(cfg.constants_file) as fh:
                return LipschitzData.from_dict(json.load(fh))
        except (OSError, json.JSONDecodeError, TypeError) as exc:
            raise ConfigError(f"cannot read constants from {cfg.constants_file}: {exc}") from None
    if cfg.constants == "estimate":
        return estimate_constants(bp.spec, bp.bounds, budget=cfg.budget, seed=cfg.seed)
    return bp.constants


def _dumps(obj) -> str:
    return json.dumps(obj, indent=2, sort_keys=True) + "\n"


def _out_dir(cfg: RunConfig) -> Path:
    out = Path(cfg.out or os.environ.get(OUT_ENV) or "msacert-out")
    out.mkdir(parents=True, exist_ok=True)
    return out


def _certificate_dict(cert, tol: float) -> dict:
    lip = cert.constants
    d = cert.to_dict()
    d["b1_terms"] = {
        "l_hx*l_fu": lip.l_hx * lip.l_fu,
        "l_hlam*l_psixx*l_fu": lip.l_hlam * lip.l_psixx * lip.l_fu,
        "l_hlam*l_phixu": lip.l_hlam * lip.l_phixu,
        "l_hlam*l_fxu": lip.l_hlam * lip.l_fxu,
    }
    d["b2_terms"] = {
        "l_hlam*l_fu*l_phixx": lip.l_hlam * lip.l_fu * lip.l_phixx,
        "l_hlam*l_fu*l_fxx": lip.l_hlam * lip.l_fu * lip.l_fxx,
    }
    d["tol"] = tol
    d["iterations_for_unit_gap"] = cert.iterations_for(tol, 1.0)
    return d


def cmd_solve(cfg: RunConfig, dump_trajectories: bool = False) -> int:
    bp = build_problem(cfg)
    spec = bp.spec
    grid = Grid(spec.T, cfg.grid_steps)
    report = solve(spec, grid=grid, tol=cfg.tol, max_iter=cfg.max_iter)
    out = _out_dir(cfg)
    cert = certify(resolve_constants(cfg, bp), spec.T)
    payload = {"problem": bp.name, "config": cfg.to_dict(), "report": report.to_dict()}
    payload["certificate"] = {
        "lip_bound": cert.lip_bound,
        "contractive": cert.contractive,
        "soundness": cert.soundness,
    }
    ratios = report.ratios()
    payload["report"]["max_residual_ratio"] = float(ratios.max()) if ratios.size else None
    (out / "solve.json").write_text(_dumps(payload))
    write_csv(out / "control.csv", report.control)
    write_csv(out / "state.csv", report.final_state.state)
    write_csv(out / "costate.csv", report.final_costate.costate)
    if dump_trajectories:
        iters = out / "iterations"
        iters.mkdir(exist_ok=True)
        for i, u in enumerate(report.iterates):
            x = forward_sweep(spec, u)
            lam = backward_sweep(spec, x)
            write_csv(iters / f"iter_{i:04d}_u.csv", u)
            write_csv(iters / f"iter_{i:04d}_x.csv", x.state)
            write_csv(iters / f"iter_{i:04d}_lam.csv", lam.costate)
    status = "converged" if report.converged else "did not converge"
    print(
        f"{bp.name}: {status} after {report.iterations} iterations, "
        f"last residual {report.residuals[-1]:.3e}, J = {report.costs[-1]:.10g}"
    )
    return 0 if report.converged else 1


def cmd_certify(cfg: RunConfig) -> int:
    bp = build_problem(cfg)
    lip = resolve_constants(cfg, bp)
    cert = certify(lip, bp.spec.T)
    d = _certificate_dict(cert, cfg.tol)
    d["problem"] = bp.name
    text = _dumps(d)
    (_out_dir(cfg) / "certificate.json").write_text(text)
    sys.stdout.write(text)
    return 0


def cmd_verify(cfg: RunConfig, report_path: Optional[str]) -> int:
    bp = build_problem(cfg)
    rep = run_checks(
        bp,
        grid_steps=cfg.grid_steps,
        tol=cfg.tol,
        max_iter=cfg.max_iter,
        seed=cfg.seed,
        draws=cfg.draws,
        pairs=cfg.pairs,
    )
    path = Path(report_path) if report_path else _out_dir(cfg) / "verify.json"
    path.parent.mkdir(parents=True, exist_ok=True)
    path.write_text(rep.to_json())
    for r in rep.records:
        mark = "PASS" if r.passed else "FAIL"
        if r.allowed is None and r.passed:
            mark = "INFO"
        print(f"{mark}  {r.name}  measured={r.measured!r} allowed={r.allowed!r}")
    print(f"{bp.name}: {'all checks passed' if rep.passed else f'{len(rep.failures())} checks failed'}")
    return 0 if rep.passed else 1


def horizon_sweep(t_min: float, t_max: float, per_decade: int) -> np.ndarray:
    """Log-spaced horizons from ``t_min`` to ``t_max`` at ``per_decade`` points per decade."""
    decades = math.log10(t_max / t_min)
    count = max(1, int(round(decades * per_decade))) + 1
    return np.logspace(math.log10(t_min), math.log10(t_max), count)


def cmd_bench(cfg: RunConfig) -> int:
    if cfg.lqr is not None:
        raise ConfigError("bench runs on builtin problems only")
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(["T", "kappa", "lip_bound", "contractive", "empirical_contraction", "converged", "iterations"])
    for T in horizon_sweep(cfg.bench_t_min, cfg.bench_t_max, cfg.bench_per_decade):
        bp = build_problem(cfg.replace(horizon=float(T)))
        cert = certify(resolve_constants(cfg, bp), bp.spec.T)
        grid = Grid(bp.spec.T, cfg.grid_steps)
        try:
            emp = empirical_contraction(bp.spec, pairs=cfg.bench_pairs, seed=cfg.seed, grid=grid)
            rep = solve(bp.spec, grid=grid, tol=cfg.tol, max_iter=cfg.max_iter)
            conv, iters = rep.converged, rep.iterations
        except (IntegrationDivergedError, MinimizerFailedError) as exc:
            log.warning("T=%g: %s", T, exc)
            emp, conv, iters = float("nan"), False, 0
        w.writerow(
            [repr(float(T)), repr(cert.kappa), repr(cert.lip_bound), int(cert.contractive), repr(float(emp)), int(conv), iters]
        )
    text = buf.getvalue()
    (_out_dir(cfg) / "bench.csv").write_text(text)
    sys.stdout.write(text)
    return 0


def _parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--config", help="JSON run configuration; flags take precedence")
    common.add_argument("--problem", help=f"builtin problem, one of {', '.join(BUILTINS)}")
    common.add_argument("--grid-steps", type=int, dest="grid_steps")
    common.add_argument("--horizon", type=float)
    common.add_argument("--tol", type=float)
    common.add_argument("--max-iter", type=int, dest="max_iter")
    common.add_argument("--seed", type=int)
    common.add_argument("--out", help=f"output directory (default ${OUT_ENV} or ./msacert-out)")
    src = common.add_mutually_exclusive_group()
    src.add_argument("--declared-constants", dest="constants_file", metavar="FILE")
    src.add_argument("--estimate", action="store_true", help="sample the Lipschitz constants")
    common.add_argument("--budget", type=int, help="sampling budget for --estimate")
    common.add_argument("-v", "--verbose", action="store_true")

    p = argparse.ArgumentParser(prog="msacert", description=__doc__.splitlines()[0])
    sub = p.add_subparsers(dest="command", required=True)
    s = sub.add_parser("solve", parents=[common], help="run MSA and write the report and trajectories")
    s.add_argument("--dump-trajectories", action="store_true", help="write x, lam and u for every iterate")
    sub.add_parser("certify", parents=[common], help="evaluate the contraction certificate")
    v = sub.add_parser("verify", parents=[common], help="run the invariant suites and oracles")
    v.add_argument("--report", help="path of the JSON report (default OUT/verify.json)")
    v.add_argument("--draws", type=int)
    v.add_argument("--pairs", type=int)
    b = sub.add_parser("bench", parents=[common], help="sweep the horizon and tabulate the certificate")
    b.add_argument("--t-min", type=float, dest="bench_t_min")
    b.add_argument("--t-max", type=float, dest="bench_t_max")
    b.add_argument("--per-decade", type=int, dest="bench_per_decade")
    b.add_argument("--pairs", type=int, dest="bench_pairs")
    return p


_CONFIG_FLAGS = (
    "problem", "grid_steps", "horizon", "tol", "max_iter", "seed", "out", "constants_file",
    "budget", "draws", "pairs", "bench_t_min", "bench_t_max", "bench_per_decade", "bench_pairs",
)


def load_config(args: argparse.Namespace) -> RunConfig:
    base = {}
    if args.config:
        try:
            with open(args.config) as fh:
                base = json.load(fh)
        except (OSError, json.JSONDecodeError) as exc:
            raise ConfigError(f"cannot read config {args.config}: {exc}") from None
    cfg = RunConfig.from_dict(base)
    changes = {k: getattr(args, k) for k in _CONFIG_FLAGS if getattr(args, k, None) is not None}
    if args.estimate:
        changes["constants"] = "estimate"
    if "problem" in changes:
        changes["lqr"] = None
    try:
        cfg = cfg.replace(**changes)
    except TypeError as exc:
        raise ConfigError(str(exc)) from None
    return cfg


def run(argv=None) -> int:
    parser = _parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return int(exc.code or 0)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING, format="%(levelname)s %(message)s")
    try:
        cfg = load_config(args)
        if args.command == "solve":
            return cmd_solve(cfg, args.dump_trajectories)
        if args.command == "certify":
            return cmd_certify(cfg)
        if args.command == "verify":
            return cmd_verify(cfg, args.report)
        return cmd_bench(cfg)
    except (ConfigError, UnknownProblemError) as exc:
        print(f"msacert: configuration error: {exc}", file=sys.stderr)
        return 2
    except ValueError as exc:
        print(f"msacert: invalid input: {exc}", file=sys.stderr)
        return 2


def main() -> None:
    sys.exit(run())

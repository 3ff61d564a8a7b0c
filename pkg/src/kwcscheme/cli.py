"""Command-line driver: configuration, example presets, runs and CSV output.

Subcommands are ``run``, ``bounds``, ``converge`` and ``verify-ops``. Exit
codes are 0 (ok), 1 (order floor or self-check not met), 2 (angle solver
did not converge), 3 (range or dissipation check failed) and 64 (bad
configuration or usage).

Configuration files are flat ``key = value`` text, ``#`` starts a comment.
Recognised keys are listed in :data:`CONFIG_KEYS`; ``--set key=value`` on
the command line overrides a file entry.
"""
from __future__ import annotations

import argparse
import csv
import math
import sys
from dataclasses import dataclass, field
from pathlib import Path
from typing import Callable, Sequence, TextIO

import numpy as np

from . import analysis
from .discrete_ops import GridSpec, identity_suite, interior, make_field
from .model import (PAPER_PARAMS, MobilityField, ModelParams, bound_suite, dt_error_bound,
                    dt_existence_bound, estimate_lipschitz)
from .stepper import (RANGE_TOL, StepReport, ThetaNonconvergence, ThetaSolveConfig, advance,
                      initial_state)

__all__ = [
    "EXIT_OK",
    "EXIT_FLOOR",
    "EXIT_NONCONVERGENCE",
    "EXIT_INVARIANT",
    "EXIT_CONFIG",
    "CONFIG_KEYS",
    "SERIES_HEADER",
    "ConfigError",
    "ConvergeSettings",
    "RunConfig",
    "TimeSeriesRow",
    "preset_initial",
    "preset_functions",
    "parse_config_text",
    "build_config",
    "load_config",
    "run",
    "bounds",
    "converge",
    "verify_ops",
    "read_series",
    "main",
]

EXIT_OK = 0
EXIT_FLOOR = 1
EXIT_NONCONVERGENCE = 2
EXIT_INVARIANT = 3
EXIT_CONFIG = 64

SERIES_HEADER = ["j", "t", "energy", "minH", "maxH", "minTheta", "maxTheta", "theta_iters",
                 "dissipation_slack"]

CONFIG_KEYS = {
    "params.eps": "regularisation eps in (0, 1)",
    "params.delta0": "mobility floor delta0 in (0, 1)",
    "params.c": "relaxation constant c > 0",
    "params.kappa0": "orientation-order diffusion kappa0 > 0",
    "params.kappa": "coupling kappa > 0",
    "params.nu": "angle diffusion nu > 0",
    "grid.K": "number of cells",
    "grid.dt": "time step",
    "grid.N": "number of steps",
    "ic": "example1 | example2 | example3 | smooth | expr | table",
    "ic.H": "orientation order: expression in x (ic=expr) or K+1 comma-separated values (ic=table)",
    "ic.Theta": "angle: expression in x (ic=expr) or K+1 comma-separated values (ic=table)",
    "mobility.alpha0": "expression in t and x; default delta0",
    "mobility.lipschitz": "Lipschitz constant of alpha0; estimated when omitted",
    "solver.method": "newton | picard",
    "solver.tol_abs": "absolute residual tolerance of the angle solve",
    "solver.max_iter": "iteration cap of the angle solve",
    "solver.warn_only_on_exist_cond": "true: warn when dt exceeds the existence bound; false: refuse",
    "output.dir": "output directory",
    "output.stride": "snapshot every this many steps",
    "bounds.C1": "bound on |eta| entering the error step size; default max(1, max|H0|)",
    "converge.levels": "comma-separated K values, at least 3",
    "converge.floor": "minimum acceptable fitted order",
    "converge.T": "final time of the study",
    "converge.ref_factor": "reference resolution as a multiple of the finest K",
    "converge.dt_ratio": "dt = dx * dt_ratio",
    "converge.workers": "threads used for the levels",
}


class ConfigError(ValueError):
    pass


# ---------------------------------------------------------------------------
# Presets
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class _Preset:
    dt: float
    N: int
    split: float
    A: float
    B: float
    theta0: Callable


def _preset_table() -> dict[int, _Preset]:
    d = 0.5 * np.pi  # |theta2 - theta1|
    a1 = -d / np.cosh(0.5) / (d + 2.0 * np.tanh(0.5))
    den = d + np.tanh(0.25) + np.tanh(0.75)
    a2, b2 = -d / np.cosh(0.25) / den, -d / np.cosh(0.75) / den

    def linear(x):
        return 0.5 * np.pi * x - 0.25 * np.pi

    def kinked(x):
        return np.where(x < 0.6, -0.25 * np.pi * x - 0.1 * np.pi, 0.125 * np.pi * x + 0.125 * np.pi)

    return {
        1: _Preset(dt=0.06, N=200, split=0.5, A=a1, B=a1, theta0=linear),
        2: _Preset(dt=0.075, N=128, split=0.25, A=a2, B=b2, theta0=linear),
        3: _Preset(dt=0.1414, N=200, split=0.25, A=a2, B=b2, theta0=kinked),
    }


PRESETS = _preset_table()


def _preset_id(example_id) -> int:
    s = str(example_id).strip().lower()
    if s.startswith("example"):
        s = s[len("example"):]
    try:
        idx = int(s)
    except ValueError:
        idx = None
    if idx not in PRESETS:
        raise ValueError(f"unknown example id {example_id!r}; expected 1, 2 or 3")
    return idx


def preset_functions(example_id) -> Callable:
    """Initial data of an example as a function ``x -> (eta0, theta0)``."""
    p = PRESETS[_preset_id(example_id)]

    def ic(x):
        x = np.asarray(x, dtype=float)
        eta = np.where(x < p.split, p.A * np.cosh(x) + 1.0, p.B * np.cosh(x - 1.0) + 1.0)
        return eta, p.theta0(x)

    return ic


def preset_initial(example_id, grid: GridSpec) -> tuple[np.ndarray, np.ndarray]:
    """Folded initial fields ``(H0, Theta0)`` of example 1, 2 or 3 on ``grid``."""
    eta, theta = preset_functions(example_id)(grid.x)
    return make_field(eta), make_field(theta)


# ---------------------------------------------------------------------------
# Configuration
# ---------------------------------------------------------------------------

_EXPR_NAMES = {
    "pi": np.pi, "e": np.e, "sin": np.sin, "cos": np.cos, "tan": np.tan, "exp": np.exp,
    "log": np.log, "sqrt": np.sqrt, "sinh": np.sinh, "cosh": np.cosh, "tanh": np.tanh,
    "abs": np.abs, "where": np.where, "minimum": np.minimum, "maximum": np.maximum,
}


def _compile_expr(text: str, variables: tuple[str, ...], key: str) -> Callable:
    try:
        code = compile(text, f"<{key}>", "eval")
    except SyntaxError as exc:
        raise ConfigError(f"{key}: cannot parse expression {text!r}: {exc.msg}") from None
    unknown = set(code.co_names) - set(_EXPR_NAMES) - set(variables)
    if unknown:
        raise ConfigError(f"{key}: unknown names {sorted(unknown)} in {text!r}")

    def f(*args):
        scope = dict(_EXPR_NAMES)
        scope.update(zip(variables, args))
        return eval(code, {"__builtins__": {}}, scope)

    return f


@dataclass(frozen=True)
class ConvergeSettings:
    levels: tuple[int, ...] = (25, 50, 100, 200)
    floor: float = 0.9
    T: float = 0.5
    ref_factor: int = 4
    dt_ratio: float = 0.1
    workers: int = 1


@dataclass
class RunConfig:
    """Everything a subcommand needs, resolved from the flat key-value form.

    ``ic_function`` maps node coordinates to ``(eta0, theta0)``; it is
    ``None`` for tabulated data, which only fit the configured grid.
    """

    params: ModelParams
    grid: GridSpec
    mobility: MobilityField
    ic: str
    H0: np.ndarray
    Theta0: np.ndarray
    ic_function: Callable | None
    solver: ThetaSolveConfig = field(default_factory=ThetaSolveConfig)
    output_dir: Path = Path("out")
    stride: int = 10
    c1: float = 1.0
    converge: ConvergeSettings = field(default_factory=ConvergeSettings)


@dataclass(frozen=True)
class TimeSeriesRow:
    j: int
    t: float
    energy: float
    minH: float
    maxH: float
    minTheta: float
    maxTheta: float
    theta_iters: int
    dissipation_slack: float

    def cells(self) -> list[str]:
        return [str(self.j), *(_fmt(getattr(self, k)) for k in SERIES_HEADER[1:7]),
                str(self.theta_iters), _fmt(self.dissipation_slack)]


def _fmt(v: float) -> str:
    return "%.17g" % v


def parse_config_text(text: str) -> dict[str, str]:
    """Parse flat ``key = value`` lines into a dict; rejects unknown or repeated keys."""
    out: dict[str, str] = {}
    for n, raw in enumerate(text.splitlines(), 1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ConfigError(f"line {n}: expected 'key = value', got {raw!r}")
        key, value = (s.strip() for s in line.split("=", 1))
        if key not in CONFIG_KEYS:
            raise ConfigError(f"line {n}: unknown key {key!r}")
        if key in out:
            raise ConfigError(f"line {n}: key {key!r} given twice")
        out[key] = value
    return out


def _get(mapping, key, conv, default):
    if key not in mapping:
        return default
    raw = mapping[key]
    try:
        return conv(raw)
    except (TypeError, ValueError):
        raise ConfigError(f"{key}: invalid value {raw!r}") from None


def _as_bool(s: str) -> bool:
    v = s.strip().lower()
    if v in ("1", "true", "yes", "on"):
        return True
    if v in ("0", "false", "no", "off"):
        return False
    raise ValueError(s)


def _as_int(s: str) -> int:
    f = float(s)
    if f != int(f):
        raise ValueError(s)
    return int(f)


def _as_levels(s: str) -> tuple[int, ...]:
    return tuple(_as_int(p) for p in s.split(",") if p.strip())


def _as_values(s: str) -> np.ndarray:
    return np.array([float(p) for p in s.split(",") if p.strip()])


def build_config(mapping: dict[str, str]) -> RunConfig:
    """Resolve a key-value mapping into a validated :class:`RunConfig`."""
    unknown = set(mapping) - set(CONFIG_KEYS)
    if unknown:
        raise ConfigError(f"unknown keys {sorted(unknown)}")
    try:
        base = PAPER_PARAMS
        params = ModelParams(**{
            name: _get(mapping, f"params.{name}", float, getattr(base, name))
            for name in ("eps", "delta0", "c", "kappa0", "kappa", "nu")})

        ic = mapping.get("ic", "example1").strip().lower()
        preset = None
        if ic.startswith("example"):
            preset = PRESETS[_preset_id(ic)]
        elif ic not in ("smooth", "expr", "table"):
            raise ConfigError(f"ic: unknown initial data {ic!r}")
        grid = GridSpec(
            K=_get(mapping, "grid.K", _as_int, 50),
            dt=_get(mapping, "grid.dt", float, preset.dt if preset else 1e-3),
            N=_get(mapping, "grid.N", _as_int, preset.N if preset else 100),
        )

        if preset is not None:
            ic_function = preset_functions(ic)
        elif ic == "smooth":
            ic_function = analysis.smooth_initial_data
        elif ic == "expr":
            for key in ("ic.H", "ic.Theta"):
                if key not in mapping:
                    raise ConfigError(f"ic=expr needs {key}")
            fh = _compile_expr(mapping["ic.H"], ("x",), "ic.H")
            ft = _compile_expr(mapping["ic.Theta"], ("x",), "ic.Theta")

            def ic_function(x):
                x = np.asarray(x, dtype=float)
                return (np.broadcast_to(fh(x), x.shape).astype(float),
                        np.broadcast_to(ft(x), x.shape).astype(float))
        else:
            ic_function = None
        if ic_function is not None:
            eta0, theta0 = ic_function(grid.x)
        else:
            eta0 = _get(mapping, "ic.H", _as_values, None)
            theta0 = _get(mapping, "ic.Theta", _as_values, None)
            if eta0 is None or theta0 is None:
                raise ConfigError("ic=table needs ic.H and ic.Theta")
            if len(eta0) != grid.K + 1 or len(theta0) != grid.K + 1:
                raise ConfigError(f"tabulated initial data must have K+1 = {grid.K + 1} values")
        H0, Theta0 = make_field(eta0), make_field(theta0)

        if "mobility.alpha0" in mapping:
            expr = mapping["mobility.alpha0"]
            fa = _compile_expr(expr, ("t", "x"), "mobility.alpha0")

            def alpha0(t, x):
                return np.broadcast_to(fa(t, x), np.shape(x)).astype(float)

            lip = _get(mapping, "mobility.lipschitz", float, None)
            if lip is None:
                lip = estimate_lipschitz(alpha0, grid.T)
            samples = np.array([alpha0(t, grid.x) for t in np.linspace(0.0, grid.T, 11)])
            if not np.all(np.isfinite(samples)) or np.min(samples) <= 0.0:
                raise ConfigError("mobility.alpha0 must be positive and finite")
            mobility = MobilityField(alpha0, lipschitz=lip, inf_value=float(np.min(samples)),
                                     description=expr)
        else:
            if "mobility.lipschitz" in mapping:
                raise ConfigError("mobility.lipschitz given without mobility.alpha0")
            mobility = MobilityField.default(params)

        solver = ThetaSolveConfig(
            method=mapping.get("solver.method", "newton").strip().lower(),
            tol_abs=_get(mapping, "solver.tol_abs", float, 1e-12),
            max_iter=_get(mapping, "solver.max_iter", _as_int, 50),
            warn_only_on_exist_cond=_get(mapping, "solver.warn_only_on_exist_cond", _as_bool,
                                         True),
        )
        stride = _get(mapping, "output.stride", _as_int, 10)
        if stride < 1:
            raise ConfigError("output.stride must be >= 1")
        c1 = _get(mapping, "bounds.C1", float, max(1.0, float(np.max(np.abs(interior(H0))))))
        if c1 < 1.0:
            raise ConfigError("bounds.C1 must be >= 1")
        conv = ConvergeSettings(
            levels=_get(mapping, "converge.levels", _as_levels, ConvergeSettings.levels),
            floor=_get(mapping, "converge.floor", float, ConvergeSettings.floor),
            T=_get(mapping, "converge.T", float, ConvergeSettings.T),
            ref_factor=_get(mapping, "converge.ref_factor", _as_int, ConvergeSettings.ref_factor),
            dt_ratio=_get(mapping, "converge.dt_ratio", float, ConvergeSettings.dt_ratio),
            workers=_get(mapping, "converge.workers", _as_int, ConvergeSettings.workers),
        )
        if conv.workers < 1 or conv.ref_factor < 1 or not conv.T > 0 or not conv.dt_ratio > 0:
            raise ConfigError("converge settings out of range")
    except ConfigError:
        raise
    except ValueError as exc:
        raise ConfigError(str(exc)) from None
    return RunConfig(params=params, grid=grid, mobility=mobility, ic=ic, H0=H0, Theta0=Theta0,
                     ic_function=ic_function, solver=solver,
                     output_dir=Path(mapping.get("output.dir", "out")), stride=stride, c1=c1,
                     converge=conv)


def load_config(path: str | Path | None = None, overrides: Sequence[str] = ()) -> RunConfig:
    """Read a config file (optional) and apply ``key=value`` overrides."""
    mapping: dict[str, str] = {}
    if path is not None:
        try:
            text = Path(path).read_text()
        except OSError as exc:
            raise ConfigError(f"cannot read config: {exc}") from None
        mapping = parse_config_text(text)
    for item in overrides:
        if "=" not in item:
            raise ConfigError(f"override {item!r} is not key=value")
        key, value = (s.strip() for s in item.split("=", 1))
        if key not in CONFIG_KEYS:
            raise ConfigError(f"unknown key {key!r}")
        mapping[key] = value
    return build_config(mapping)


# ---------------------------------------------------------------------------
# Output
# ---------------------------------------------------------------------------

def _row(state, report: StepReport | None) -> TimeSeriesRow:
    h, th = interior(state.H), interior(state.Theta)
    return TimeSeriesRow(
        j=state.j, t=state.t, energy=state.energy,
        minH=float(np.min(h)), maxH=float(np.max(h)),
        minTheta=float(np.min(th)), maxTheta=float(np.max(th)),
        theta_iters=report.theta_iters if report else 0,
        dissipation_slack=report.dissipation_slack if report else math.nan,
    )


def _write_snapshot(out: Path, name: str, j: int, x, values) -> None:
    with open(out / f"snap_{name}_{j}.csv", "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["x", "value"])
        for a, b in zip(x, values):
            w.writerow([_fmt(a), _fmt(b)])


def read_series(path) -> list[TimeSeriesRow]:
    with open(path, newline="") as fh:
        r = csv.reader(fh)
        header = next(r)
        if header != SERIES_HEADER:
            raise ValueError(f"unexpected series header {header}")
        return [TimeSeriesRow(int(c[0]), *map(float, c[1:7]), int(c[7]), float(c[8]))
                for c in r]


def _print_bounds(cfg: RunConfig, out: TextIO) -> tuple[bool, bool]:
    g = cfg.grid
    b = dt_error_bound(cfg.params, cfg.mobility, cfg.c1, dx=g.dx)
    ok_exist = g.dt < b.dt_exist
    ok_error = g.dt < b.dt_error
    print(f"dt = {g.dt:.6g}, dx = {g.dx:.6g}", file=out)
    print(f"dt_exist = {b.dt_exist:.6e}  [{'ok' if ok_exist else 'violated'}]", file=out)
    print(f"a = {b.a_const:.6f}  (C1 = {b.c1:g}, L_alpha0 = {cfg.mobility.lipschitz:g})",
          file=out)
    print(f"dt_error = {b.dt_error:.6e}  [{'ok' if ok_error else 'violated'}]", file=out)
    return ok_exist, ok_error


# ---------------------------------------------------------------------------
# Subcommands
# ---------------------------------------------------------------------------

def bounds(cfg: RunConfig, out: TextIO | None = None) -> int:
    out = sys.stdout if out is None else out
    _print_bounds(cfg, out)
    return EXIT_OK


def _badness(r: StepReport) -> float:
    # how far the worst check of a step is beyond its tolerance
    v = 0.0
    if not r.range_ok:
        v = max(v, r.range_violation / RANGE_TOL)
    if not r.dissipation_ok:
        v = max(v, r.dissipation_slack / r.dissipation_tol)
    if not r.monotone_ok:
        v = max(v, 1.0)
    return v


def run(cfg: RunConfig, out: TextIO | None = None, err: TextIO | None = None) -> int:
    """Step to ``N * dt``, writing ``series.csv`` and field snapshots."""
    out = sys.stdout if out is None else out
    err = sys.stderr if err is None else err
    g = cfg.grid
    ok_exist, _ = _print_bounds(cfg, out)
    if not ok_exist:
        if not cfg.solver.warn_only_on_exist_cond:
            print("error: dt violates the existence bound", file=err)
            return EXIT_CONFIG
        print(f"warning: dt = {g.dt:g} exceeds the sufficient existence bound "
              f"{dt_existence_bound(cfg.params, g.dx):.4g}; proceeding", file=err)
    outdir = Path(cfg.output_dir)
    outdir.mkdir(parents=True, exist_ok=True)

    state = initial_state(cfg.params, cfg.H0, cfg.Theta0)
    worst: StepReport | None = None
    with open(outdir / "series.csv", "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(SERIES_HEADER)
        w.writerow(_row(state, None).cells())
        _write_snapshot(outdir, "H", 0, g.x, interior(state.H))
        _write_snapshot(outdir, "Theta", 0, g.x, interior(state.Theta))
        for _ in range(g.N):
            try:
                state, rep = advance(cfg.params, g, cfg.mobility, state, cfg.solver)
            except ThetaNonconvergence as exc:
                print(f"error: angle solver did not converge at step {exc.step} "
                      f"(residual {exc.residual:.3e} after {exc.iterations} iterations); "
                      f"last completed step {exc.step - 1}", file=err)
                return EXIT_NONCONVERGENCE
            w.writerow(_row(state, rep).cells())
            if state.j % cfg.stride == 0 or state.j == g.N:
                _write_snapshot(outdir, "H", state.j, g.x, interior(state.H))
                _write_snapshot(outdir, "Theta", state.j, g.x, interior(state.Theta))
            if not rep.passed and (worst is None or _badness(rep) > _badness(worst)):
                worst = rep
    if worst is not None:
        print(f"error: invariant violated; worst at step {worst.j}: range violation "
              f"{worst.range_violation:.3e}, dissipation slack {worst.dissipation_slack:.3e} "
              f"(tol {worst.dissipation_tol:.3e}), energy {worst.energy_before:.17g} -> "
              f"{worst.energy_after:.17g}", file=err)
        return EXIT_INVARIANT
    print(f"ok: {g.N} steps to t = {g.T:g}, energy {state.energy:.10g}; output in {outdir}",
          file=out)
    return EXIT_OK


def converge(cfg: RunConfig, levels: Sequence[int] | None = None, floor: float | None = None,
             out: TextIO | None = None, err: TextIO | None = None) -> int:
    """Self-convergence study; exit 0 iff the fitted order reaches ``floor``."""
    out = sys.stdout if out is None else out
    err = sys.stderr if err is None else err
    s = cfg.converge
    levels = tuple(levels) if levels is not None else s.levels
    floor = s.floor if floor is None else floor
    if len(set(levels)) < 3:
        raise ConfigError("converge needs at least 3 distinct levels")
    if cfg.ic_function is None:
        raise ConfigError("converge needs initial data given as a function of x")
    ratio = s.dt_ratio
    try:
        report, _ = analysis.convergence_study(
            cfg.params, cfg.mobility, ic=cfg.ic_function, levels=levels,
            dt_rule=lambda dx: dx * ratio, T=s.T, ref_factor=s.ref_factor, cfg=cfg.solver,
            max_workers=s.workers)
    except analysis.ConvergenceLevelFailed as exc:
        print(f"error: {exc}", file=err)
        return EXIT_NONCONVERGENCE
    except ValueError as exc:
        raise ConfigError(str(exc)) from None
    outdir = Path(cfg.output_dir)
    outdir.mkdir(parents=True, exist_ok=True)
    analysis.write_convergence_csv(report, outdir / "convergence.csv")
    for r in report.levels:
        print(f"K={r.K:5d} dt={r.dt:.4g} e_eta={r.e_eta:.4e} e_theta={r.e_theta:.4e}", file=out)
    print(report.summary(), file=out)
    order = report.fitted_order
    if order is None or order < floor:
        print(f"fitted order {order} below floor {floor}", file=err)
        return EXIT_FLOOR
    print(f"ok: fitted order {order:.4f} >= {floor}", file=out)
    return EXIT_OK


#: Pass thresholds of the self-check suites.
IDENTITY_TOL = 1e-13
LEMMA_TOL = 1e-12


def verify_ops(trials: int = 1000, samples: int = 10_000, seed: int = 0,
               out: TextIO | None = None) -> int:
    """Run the operator identity suite and the bound suite; exit 1 on any failure."""
    out = sys.stdout if out is None else out
    ok = True
    for name, v in identity_suite(trials=trials, seed=seed).items():
        passed = v <= IDENTITY_TOL
        ok &= passed
        print(f"{'PASS' if passed else 'FAIL'} identity {name}: rel err {v:.3e}", file=out)
    for name, v in bound_suite(samples=samples, seed=seed).items():
        if name.startswith("lemma42"):
            passed = v <= LEMMA_TOL
            what = "rel err"
        elif name == "|gamma'|<1":
            passed = v < 1.0
            what = "max"
        elif name == "dq_gamma_prime>=0":
            passed = v == 0.0
            what = "negative excess"
        else:
            passed = v <= 1.0
            what = "value/bound"
        ok &= passed
        print(f"{'PASS' if passed else 'FAIL'} bound {name}: {what} {v:.10g}", file=out)
    return EXIT_OK if ok else EXIT_FLOOR


# ---------------------------------------------------------------------------
# Entry point
# ---------------------------------------------------------------------------

class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        print(f"{self.prog}: error: {message}", file=sys.stderr)
        raise SystemExit(EXIT_CONFIG)


def _add_config_args(p: argparse.ArgumentParser):
    p.add_argument("--config", help="flat key = value configuration file")
    p.add_argument("--preset", help="example1, example2 or example3 (same as ic=...)")
    p.add_argument("--set", action="append", default=[], metavar="KEY=VALUE",
                   help="override one configuration key; repeatable")
    p.add_argument("--out", help="output directory (same as output.dir=...)")


def _make_parser() -> argparse.ArgumentParser:
    p = _Parser(prog="kwc-scheme", description=__doc__.split("\n")[0])
    sub = p.add_subparsers(dest="command", required=True, parser_class=_Parser)
    for name, helptext in (("run", "step a configured problem and write CSV output"),
                           ("bounds", "print both step-size bounds for the configuration")):
        _add_config_args(sub.add_parser(name, help=helptext))
    c = sub.add_parser("converge", help="self-convergence study")
    _add_config_args(c)
    c.add_argument("--levels", help="comma-separated K values (at least 3)")
    c.add_argument("--floor", type=float, help="minimum fitted order (default 0.9)")
    v = sub.add_parser("verify-ops", help="run the operator identity and bound suites")
    v.add_argument("--trials", type=int, default=1000)
    v.add_argument("--samples", type=int, default=10_000)
    v.add_argument("--seed", type=int, default=0)
    return p


def _config_from_args(args) -> RunConfig:
    overrides = []
    if args.preset:
        overrides.append(f"ic={args.preset}")
    overrides.extend(args.set)
    if args.out:
        overrides.append(f"output.dir={args.out}")
    return load_config(args.config, overrides)


def main(argv: Sequence[str] | None = None) -> int:
    args = _make_parser().parse_args(argv)
    try:
        if args.command == "verify-ops":
            return verify_ops(args.trials, args.samples, args.seed)
        cfg = _config_from_args(args)
        if args.command == "run":
            return run(cfg)
        if args.command == "bounds":
            return bounds(cfg)
        levels = _as_levels(args.levels) if args.levels else None
        return converge(cfg, levels, args.floor)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except ValueError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG


if __name__ == "__main__":
    sys.exit(main())

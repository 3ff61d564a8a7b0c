"""Error analysis: reflected extensions, consistency residuals, error norms and
self-convergence studies against a refined reference run."""
from __future__ import annotations

import csv
import math
import warnings
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from typing import Callable, Sequence

import numpy as np

from . import discrete_ops as ops
from .discrete_ops import GridSpec, interior, norm_l2d
from .model import (MobilityField, ModelParams, alpha_of, dq_gamma, dq_gamma_prime, gamma_eps,
                    gamma_eps_prime, gamma_eps_second)
from .stepper import ThetaNonconvergence, ThetaSolveConfig, Trajectory, simulate

__all__ = [
    "SmoothFieldPair",
    "ResidualSet",
    "ErrorReport",
    "LevelResult",
    "ConvergenceReport",
    "ConvergenceLevelFailed",
    "reflect_extend",
    "residual_xi",
    "error_equation_defect",
    "pde_residuals",
    "error_norms",
    "convergence_study",
    "smooth_initial_data",
    "write_convergence_csv",
]


@dataclass(frozen=True)
class SmoothFieldPair:
    """Smooth ``eta(t, x)``, ``theta(t, x)`` with the partial derivatives the
    consistency residuals need. All callables take ``(t, x)`` with array ``x``."""

    eta: Callable
    eta_t: Callable
    eta_x: Callable
    eta_xx: Callable
    theta: Callable
    theta_t: Callable
    theta_x: Callable
    theta_xx: Callable

    def derivative_mismatch(self, t: float, x, h: float = 1e-5) -> float:
        """Largest relative disagreement between the supplied derivatives and
        central differences of the values (or of the supplied first derivative)."""
        x = np.asarray(x, dtype=float)
        worst = 0.0
        for f, ft, fx, fxx in ((self.eta, self.eta_t, self.eta_x, self.eta_xx),
                               (self.theta, self.theta_t, self.theta_x, self.theta_xx)):
            checks = (
                (ft(t, x), (f(t + h, x) - f(t - h, x)) / (2 * h)),
                (fx(t, x), (f(t, x + h) - f(t, x - h)) / (2 * h)),
                (fxx(t, x), (fx(t, x + h) - fx(t, x - h)) / (2 * h)),
            )
            for exact, approx in checks:
                exact = np.broadcast_to(exact, x.shape)
                scale = max(1.0, float(np.max(np.abs(exact))))
                worst = max(worst, float(np.max(np.abs(exact - approx))) / scale)
        return worst


@dataclass(frozen=True)
class ResidualSet:
    """Consistency residuals at one time level, node values 0..K."""

    xi1: np.ndarray
    xi2: np.ndarray
    xi3: np.ndarray
    xi4: np.ndarray
    xi5: np.ndarray
    xi6: np.ndarray

    @property
    def xi13(self) -> np.ndarray:
        return self.xi1 + self.xi2 + self.xi3

    @property
    def xi46(self) -> np.ndarray:
        return self.xi4 + self.xi5 + self.xi6

    def max_abs(self) -> dict[str, float]:
        return {f"xi{i}": float(np.max(np.abs(getattr(self, f"xi{i}")))) for i in range(1, 7)}


@dataclass(frozen=True)
class ErrorReport:
    times: np.ndarray
    e_eta_l2: np.ndarray
    e_theta_l2: np.ndarray

    @property
    def sup_e_eta(self) -> float:
        return float(np.max(self.e_eta_l2))

    @property
    def sup_e_theta(self) -> float:
        return float(np.max(self.e_theta_l2))


@dataclass(frozen=True)
class LevelResult:
    K: int
    dt: float
    e_eta: float
    e_theta: float


@dataclass(frozen=True)
class ConvergenceReport:
    """Observed orders from a log-log least-squares fit of error against ``dx``.

    Orders are ``None`` when the errors sit at round-off and no fit is made.
    """

    levels: list[LevelResult]
    reference_K: int
    order_eta: float | None
    order_theta: float | None
    fit_residual_eta: float | None
    fit_residual_theta: float | None
    pairwise_eta: float | None
    pairwise_theta: float | None

    @property
    def fitted_order(self) -> float | None:
        if self.order_eta is None or self.order_theta is None:
            return None
        return min(self.order_eta, self.order_theta)

    def summary(self) -> str:
        def fmt(v):
            return "n/a" if v is None else f"{v:.4f}"
        return (f"fitted order: eta {fmt(self.order_eta)} (fit residual "
                f"{fmt(self.fit_residual_eta)}), theta {fmt(self.order_theta)} (fit residual "
                f"{fmt(self.fit_residual_theta)}); finest pair: eta {fmt(self.pairwise_eta)}, "
                f"theta {fmt(self.pairwise_theta)}; reference K={self.reference_K}")


class ConvergenceLevelFailed(RuntimeError):
    def __init__(self, K: int, cause: Exception):
        super().__init__(f"level K={K} failed: {cause}")
        self.K = K
        self.cause = cause


# ---------------------------------------------------------------------------
# Extension and residuals
# ---------------------------------------------------------------------------

def reflect_extend(f: Callable, dx: float) -> Callable:
    """Even reflection of ``f`` (defined on [0, 1]) onto ``[-dx, 1 + dx]``.

    ``f`` may be ``f(x)`` or ``f(t, x)``; the extension keeps the signature.
    """
    def _map(x):
        x = np.asarray(x, dtype=float)
        if np.any(x < -dx * (1 + 1e-12)) or np.any(x > 1.0 + dx * (1 + 1e-12)):
            raise ValueError(f"evaluation outside [-{dx}, 1 + {dx}]")
        return np.where(x < 0.0, -x, np.where(x > 1.0, 2.0 - x, x))

    def ext(*args):
        *lead, x = args
        return f(*lead, _map(x))

    return ext


def _ext_nodes(pair: SmoothFieldPair, grid: GridSpec, t: float):
    xe = grid.x_ext
    eta = reflect_extend(pair.eta, grid.dx)(t, xe)
    theta = reflect_extend(pair.theta, grid.dx)(t, xe)
    return np.broadcast_to(eta, xe.shape).astype(float), np.broadcast_to(theta, xe.shape).astype(float)


def _flux_divergence(params: ModelParams, H, Theta) -> np.ndarray:
    """``(kappa/2)[d+(a(H) g'(d-Theta)) + d-(a(H) g'(d+Theta))]`` evaluated term by term."""
    a = alpha_of(params, np.asarray(H))
    dm = np.empty_like(a)
    dp = np.empty_like(a)
    K = len(H) - 3
    dm[1:] = np.diff(Theta) * K
    dm[0] = np.nan
    dp[:-1] = np.diff(Theta) * K
    dp[-1] = np.nan
    f_minus = a * gamma_eps_prime(params, dm)   # a(H_k) g'(d- Theta_k), k = 0..K+1
    f_plus = a * gamma_eps_prime(params, dp)    # a(H_k) g'(d+ Theta_k), k = -1..K
    return 0.5 * params.kappa * K * ((f_minus[2:] - f_minus[1:-1]) + (f_plus[1:-1] - f_plus[:-2]))


def residual_xi(params: ModelParams, grid: GridSpec, mobility: MobilityField,
                pair: SmoothFieldPair, j: int) -> ResidualSet:
    """Consistency residuals at time level ``j + 1`` for a smooth pair."""
    p, dt = params, grid.dt
    t0, t1 = j * dt, (j + 1) * dt
    x = grid.x
    eta0, th0 = _ext_nodes(pair, grid, t0)
    eta1, th1 = _ext_nodes(pair, grid, t1)
    a0 = mobility.at(t1, x)
    eta1_x = np.broadcast_to(pair.eta_x(t1, x), x.shape)
    th1_x = np.broadcast_to(pair.theta_x(t1, x), x.shape)
    th1_xx = np.broadcast_to(pair.theta_xx(t1, x), x.shape)
    xi1 = pair.eta_t(t1, x) - (interior(eta1) - interior(eta0)) / dt
    xi2 = p.kappa0 ** 2 * (ops.d_c2(eta1) - pair.eta_xx(t1, x))
    avg_gamma = 0.5 * (gamma_eps(p, ops.d_plus(th0)) + gamma_eps(p, ops.d_minus(th0)))
    xi3 = -p.kappa * interior(eta1) * (avg_gamma - gamma_eps(p, th1_x))
    xi4 = -a0 * ((interior(th1) - interior(th0)) / dt - pair.theta_t(t1, x))
    xi5 = p.nu ** 2 * (ops.d_c2(th1) - pair.theta_xx(t1, x))
    h1 = interior(eta1)
    exact_flux_x = p.kappa * (h1 * eta1_x * gamma_eps_prime(p, th1_x)
                              + alpha_of(p, h1) * gamma_eps_second(p, th1_x) * th1_xx)
    xi6 = _flux_divergence(p, eta1, th1) - exact_flux_x
    as_arr = lambda v: np.broadcast_to(v, x.shape).astype(float)
    return ResidualSet(*(as_arr(v) for v in (xi1, xi2, xi3, xi4, xi5, xi6)))


def pde_residuals(params: ModelParams, mobility: MobilityField, pair: SmoothFieldPair,
                  t: float, x):
    """Pointwise residuals of the continuous system for a smooth pair.

    Zero for an exact solution; nonzero for a manufactured pair.
    """
    p = params
    x = np.asarray(x, dtype=float)
    eta, eta_x = pair.eta(t, x), pair.eta_x(t, x)
    th_x, th_xx = pair.theta_x(t, x), pair.theta_xx(t, x)
    r_eta = (pair.eta_t(t, x) - p.kappa0 ** 2 * pair.eta_xx(t, x) + p.c * (eta - 1.0)
             + p.kappa * eta * gamma_eps(p, th_x))
    flux_x = p.kappa * (eta * eta_x * gamma_eps_prime(p, th_x)
                        + alpha_of(p, eta) * gamma_eps_second(p, th_x) * th_xx) + p.nu ** 2 * th_xx
    r_theta = mobility.at(t, x) * pair.theta_t(t, x) - flux_x
    return np.broadcast_to(r_eta, x.shape), np.broadcast_to(r_theta, x.shape)


def error_equation_defect(params: ModelParams, grid: GridSpec, mobility: MobilityField,
                          pair: SmoothFieldPair, j: int, H0, Theta0, H1, Theta1):
    """Defect of the linearised error equations for one scheme step.

    ``(H0, Theta0) -> (H1, Theta1)`` must be a step of the scheme from level
    ``j``. The errors are taken against the reflected pair; for an exact
    solution both returned node arrays vanish, and in general they equal
    minus :func:`pde_residuals` at ``t_{j+1}``.
    """
    p, dt = params, grid.dt
    t1 = (j + 1) * dt
    eta0, th0 = _ext_nodes(pair, grid, j * dt)
    eta1, th1 = _ext_nodes(pair, grid, t1)
    e_eta0, e_eta1 = H0 - eta0, H1 - eta1
    e_th0, e_th1 = Theta0 - th0, Theta1 - th1
    res = residual_xi(params, grid, mobility, pair, j)

    h1 = interior(H1)
    lin = (dq_gamma(p, ops.d_plus(Theta0), ops.d_plus(th0)) * ops.d_plus(e_th0)
           + dq_gamma(p, ops.d_minus(Theta0), ops.d_minus(th0)) * ops.d_minus(e_th0))
    avg_gamma = 0.5 * (gamma_eps(p, ops.d_plus(th0)) + gamma_eps(p, ops.d_minus(th0)))
    rhs_eta = (p.kappa0 ** 2 * ops.d_c2(e_eta1) - p.c * interior(e_eta1)
               - 0.5 * p.kappa * h1 * lin - p.kappa * interior(e_eta1) * avg_gamma + res.xi13)
    defect_eta = (interior(e_eta1) - interior(e_eta0)) / dt - rhs_eta

    K = grid.K
    mid = 0.5 * (H1 + eta1)
    a_eta = alpha_of(p, eta1)
    s = np.diff(Theta1) * K            # d+ Theta at k=-1..K, i.e. d- Theta at k=0..K+1
    s_ref = np.diff(th1) * K
    s_err = np.diff(e_th1) * K
    g_minus = mid[1:] * gamma_eps_prime(p, s) * e_eta1[1:] \
        + a_eta[1:] * dq_gamma_prime(p, s, s_ref) * s_err        # k = 0..K+1
    g_plus = mid[:-1] * gamma_eps_prime(p, s) * e_eta1[:-1] \
        + a_eta[:-1] * dq_gamma_prime(p, s, s_ref) * s_err       # k = -1..K
    flux = 0.5 * p.kappa * K * ((g_minus[1:] - g_minus[:-1]) + (g_plus[1:] - g_plus[:-1]))
    rhs_th = flux + p.nu ** 2 * ops.d_c2(e_th1) + res.xi46
    a0 = mobility.at(t1, grid.x)
    defect_th = a0 * (interior(e_th1) - interior(e_th0)) / dt - rhs_th
    return defect_eta, defect_th


# ---------------------------------------------------------------------------
# Error norms and convergence
# ---------------------------------------------------------------------------

def _match_times(t_small, t_big):
    idx = []
    for t in t_small:
        hit = np.nonzero(np.abs(t_big - t) <= 1e-9 * max(1.0, abs(t)))[0]
        if hit.size == 0:
            return None
        idx.append(int(hit[0]))
    return np.array(idx)


def error_norms(run: Trajectory, reference: Trajectory) -> ErrorReport:
    """Discrete L2 errors between two runs on their shared nodes and times.

    Errors are measured on the coarser of the two grids, at the stored times
    of whichever run has fewer of them; the other run must contain those
    nodes and times.
    """
    a, b = (run, reference) if run.grid.K <= reference.grid.K else (reference, run)
    if b.grid.K % a.grid.K:
        raise ValueError(f"grids are not nested: K={a.grid.K} vs K={b.grid.K}")
    ratio = b.grid.K // a.grid.K
    if len(run.times) <= len(reference.times):
        times = run.times
        i_run = np.arange(len(run.times))
        i_ref = _match_times(run.times, reference.times)
    else:
        times = reference.times
        i_ref = np.arange(len(reference.times))
        i_run = _match_times(reference.times, run.times)
    if i_run is None or i_ref is None:
        raise ValueError("stored times are not nested")
    i_a, i_b = (i_run, i_ref) if a is run else (i_ref, i_run)

    def fine_on_coarse(F):
        return F[:, 1:-1][:, ::ratio]

    Ha, Hb = a.H[i_a][:, 1:-1], fine_on_coarse(b.H[i_b])
    Ta, Tb = a.Theta[i_a][:, 1:-1], fine_on_coarse(b.Theta[i_b])
    e_eta = np.array([norm_l2d(r) for r in Ha - Hb])
    e_th = np.array([norm_l2d(r) for r in Ta - Tb])
    return ErrorReport(times=np.asarray(times, dtype=float), e_eta_l2=e_eta, e_theta_l2=e_th)


def smooth_initial_data(x):
    """``eta0 = 0.5 + 0.25 cos(pi x)``, ``theta0 = 0.25 cos(pi x)``."""
    x = np.asarray(x, dtype=float)
    return 0.5 + 0.25 * np.cos(np.pi * x), 0.25 * np.cos(np.pi * x)


def _fit(dx, err):
    err = np.asarray(err, dtype=float)
    if np.any(err <= 1e-14) or len(err) < 2:
        return None, None, None
    X, Y = np.log(dx), np.log(err)
    slope, icept = np.polyfit(X, Y, 1)
    resid = float(np.sqrt(np.mean((Y - (slope * X + icept)) ** 2)))
    pair = float((Y[-2] - Y[-1]) / (X[-2] - X[-1]))
    return float(slope), resid, pair


def _steps_for(T: float, dt: float) -> int:
    N = int(round(T / dt))
    if N < 1 or abs(N * dt - T) > 1e-9 * max(1.0, T):
        raise ValueError(f"T={T} is not a whole number of steps dt={dt}")
    return N


def convergence_study(params: ModelParams, mobility: MobilityField,
                      ic: Callable = smooth_initial_data,
                      levels: Sequence[int] = (25, 50, 100, 200),
                      dt_rule: Callable[[float], float] = lambda dx: dx / 10.0,
                      T: float = 0.5, ref_factor: int = 4,
                      cfg: ThetaSolveConfig = ThetaSolveConfig(),
                      max_workers: int = 1) -> tuple[ConvergenceReport, dict[int, ErrorReport]]:
    """Self-convergence study: every level against a run at ``ref_factor`` times
    the finest ``K``.

    ``dt_rule`` maps ``dx`` to ``dt``, so the mesh width is the single
    refinement parameter. Returns the report and the per-level error reports.
    """
    levels = sorted(int(k) for k in levels)
    if len(levels) < 3:
        raise ValueError("a convergence fit needs at least 3 levels")
    K_ref = ref_factor * levels[-1]
    if any(K_ref % k for k in levels):
        raise ValueError("levels must divide the reference resolution")
    dts = {k: float(dt_rule(1.0 / k)) for k in levels + [K_ref]}
    dt_ref = dts[K_ref]
    strides = []
    for k in levels:
        r = dts[k] / dt_ref
        if abs(r - round(r)) > 1e-9 * r:
            raise ValueError(f"time step of level K={k} is not a multiple of the reference step")
        strides.append(int(round(r)))
    store_every = math.gcd(*strides)

    def run(K, store=1):
        grid = GridSpec(K=K, dt=dts[K], N=_steps_for(T, dts[K]))
        h0, th0 = ic(grid.x)
        try:
            return simulate(params, grid, mobility, ops.make_field(h0), ops.make_field(th0),
                            cfg, store_every=store)
        except (ThetaNonconvergence, ArithmeticError) as exc:
            raise ConvergenceLevelFailed(K, exc) from exc

    with warnings.catch_warnings():
        warnings.simplefilter("ignore", RuntimeWarning)
        if max_workers > 1:
            with ThreadPoolExecutor(max_workers=max_workers) as pool:
                ref_future = pool.submit(run, K_ref, store_every)
                runs = list(pool.map(run, levels))
                ref = ref_future.result()
        else:
            ref = run(K_ref, store_every)
            runs = [run(k) for k in levels]

    errs = {k: error_norms(r, ref) for k, r in zip(levels, runs)}
    rows = [LevelResult(K=k, dt=dts[k], e_eta=errs[k].sup_e_eta, e_theta=errs[k].sup_e_theta)
            for k in levels]
    dx = np.array([1.0 / k for k in levels])
    oe, re_, pe = _fit(dx, [r.e_eta for r in rows])
    ot, rt, pt = _fit(dx, [r.e_theta for r in rows])
    report = ConvergenceReport(levels=rows, reference_K=K_ref, order_eta=oe, order_theta=ot,
                               fit_residual_eta=re_, fit_residual_theta=rt,
                               pairwise_eta=pe, pairwise_theta=pt)
    return report, errs


def write_convergence_csv(report: ConvergenceReport, path) -> None:
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["level", "K", "dt", "e_eta", "e_theta"])
        for i, r in enumerate(report.levels):
            w.writerow([i, r.K, repr(r.dt), repr(r.e_eta), repr(r.e_theta)])

"""One time step of the scheme, the discrete energy, and the structural checks.

A step first solves the linear implicit update for the orientation order
``H`` (using the previous angle), then the nonlinear implicit update for the
angle ``Theta`` (using the new ``H``). Both linear systems are tridiagonal
and strictly diagonally dominant.
"""
from __future__ import annotations

import warnings
from dataclasses import dataclass, field, replace
from typing import Callable

import numpy as np

from . import discrete_ops as ops
from .discrete_ops import GridSpec, fold_ghosts, interior, trap_sum
from .linalg import SingularSystemError, Tridiagonal, thomas_solve
from .model import (MobilityField, ModelParams, alpha_of, dt_existence_bound, gamma_eps,
                    gamma_eps_prime, gamma_eps_second)

__all__ = [
    "ThetaSolveConfig",
    "SolverDiagnostics",
    "SimState",
    "StepReport",
    "Trajectory",
    "ThetaNonconvergence",
    "ExistenceConditionViolated",
    "RANGE_TOL",
    "ENERGY_RTOL",
    "initial_state",
    "assemble_eta_system",
    "step_eta",
    "theta_residual",
    "theta_jacobian",
    "picard_matrix",
    "picard_map",
    "step_theta",
    "discrete_energy",
    "dissipation_terms",
    "dissipation_check",
    "dissipation_tolerance",
    "advance",
    "simulate",
]

# slack on the range bounds, absorbing the nonlinear-solve tolerance
RANGE_TOL = 1e-10
# updates below this (relative to max|Theta|) are round-off; two in a row end
# the solve even if the residual sits above tol_abs
ROUNDOFF_STEP = 64 * np.finfo(float).eps
# energy allowance, relative to max(1, initial energy)
ENERGY_RTOL = 1e-8


class ThetaNonconvergence(RuntimeError):
    """The angle update did not reach the residual tolerance."""

    def __init__(self, message, residual: float, iterations: int, step: int | None = None):
        super().__init__(message)
        self.residual = residual
        self.iterations = iterations
        self.step = step


class ExistenceConditionViolated(ValueError):
    pass


@dataclass(frozen=True)
class ThetaSolveConfig:
    method: str = "newton"
    tol_abs: float = 1e-12
    max_iter: int = 50
    warn_only_on_exist_cond: bool = True

    def __post_init__(self):
        if self.method not in ("newton", "picard"):
            raise ValueError(f"unknown theta solver {self.method!r}")
        if not self.tol_abs > 0.0:
            raise ValueError("tol_abs must be positive")
        if int(self.max_iter) != self.max_iter or self.max_iter < 1:
            raise ValueError("max_iter must be an integer >= 1")


@dataclass(frozen=True)
class SolverDiagnostics:
    iterations: int = 0
    residual: float = 0.0
    history: tuple[float, ...] = ()

    def quadratic_tail(self) -> float | None:
        """``r_n / r_{n-1}^2`` for the last two residuals, if defined."""
        h = [r for r in self.history if r > 0.0]
        if len(h) < 2:
            return None
        return h[-1] / h[-2] ** 2


@dataclass(frozen=True)
class SimState:
    """Scheme state at step ``j``.

    ``theta_bound`` is the constant bounding ``|Theta|`` (max over the initial
    angle) and ``energy0`` the initial energy; both are carried along for the
    per-step checks.
    """

    j: int
    t: float
    H: np.ndarray
    Theta: np.ndarray
    energy: float
    theta_bound: float
    energy0: float
    last_solver: SolverDiagnostics = field(default_factory=SolverDiagnostics)


@dataclass(frozen=True)
class StepReport:
    j: int
    range_ok: bool
    range_violation: float
    dissipation_ok: bool
    dissipation_slack: float
    dissipation_tol: float
    monotone_ok: bool
    energy_before: float
    energy_after: float
    theta_iters: int
    theta_residual: float

    @property
    def passed(self) -> bool:
        return self.range_ok and self.dissipation_ok and self.monotone_ok


def initial_state(params: ModelParams, H0, Theta0, t0: float = 0.0) -> SimState:
    H = fold_ghosts(H0)
    Theta = fold_ghosts(Theta0)
    if H.shape != Theta.shape:
        raise ValueError("H and Theta must live on the same grid")
    e = discrete_energy(params, H, Theta)
    return SimState(j=0, t=t0, H=H, Theta=Theta, energy=e,
                    theta_bound=float(np.max(np.abs(interior(Theta)))), energy0=e)


def _check_grid(grid: GridSpec, *fields):
    for f in fields:
        if np.shape(f) != (grid.K + 3,):
            raise ValueError(f"field of shape {np.shape(f)} does not match K={grid.K}")


# ---------------------------------------------------------------------------
# Orientation order: linear implicit update
# ---------------------------------------------------------------------------

def _d2_matrix(K: int, scale: float) -> Tridiagonal:
    """``scale * D2`` with the ghost-folded corner factor 2."""
    s = scale * K * K
    lower = np.full(K, s)
    upper = np.full(K, s)
    upper[0] = 2.0 * s
    lower[-1] = 2.0 * s
    return Tridiagonal(lower, np.full(K + 1, -2.0 * s), upper)


def assemble_eta_system(params: ModelParams, grid: GridSpec, H, Theta):
    """Matrix ``I + dt(-kappa0^2 D2 + c I + kappa V)`` and right-hand side ``H + c dt``."""
    _check_grid(grid, H, Theta)
    p, dt = params, grid.dt
    V = 0.5 * (gamma_eps(p, ops.d_plus(Theta)) + gamma_eps(p, ops.d_minus(Theta)))
    D = _d2_matrix(grid.K, -dt * p.kappa0 ** 2)
    A = Tridiagonal(D.lower, 1.0 + D.diag + dt * (p.c + p.kappa * V), D.upper)
    rhs = interior(H) + p.c * dt
    return A, rhs


def step_eta(params: ModelParams, grid: GridSpec, H, Theta) -> np.ndarray:
    A, rhs = assemble_eta_system(params, grid, H, Theta)
    if not A.is_strictly_diagonally_dominant():
        raise SingularSystemError("orientation-order matrix lost strict diagonal dominance")
    return ops.make_field(thomas_solve(A, rhs))


# ---------------------------------------------------------------------------
# Orientation angle: nonlinear implicit update
# ---------------------------------------------------------------------------

def _edge_mobility(params: ModelParams, H) -> np.ndarray:
    a = alpha_of(params, np.asarray(H))
    return 0.5 * (a[1:] + a[:-1])


def _flux_divergence(params: ModelParams, H, Theta) -> np.ndarray:
    """``(kappa/2)[d+(a(H) g'(d-Theta)) + d-(a(H) g'(d+Theta))]`` at nodes 0..K.

    Both halves combine into one conservative difference of edge fluxes
    carrying the edge-averaged ``a(H)``.
    """
    K = len(Theta) - 3
    s = np.diff(Theta) * K
    flux = _edge_mobility(params, H) * gamma_eps_prime(params, s)
    return params.kappa * K * np.diff(flux)


def theta_residual(params: ModelParams, grid: GridSpec, alpha0, H_next, Theta_prev,
                   Theta) -> np.ndarray:
    """Residual of the angle update at node values 0..K.

    ``alpha0`` holds the mobility at the new time level on nodes 0..K.
    """
    _check_grid(grid, H_next, Theta_prev, Theta)
    p = params
    time_term = np.asarray(alpha0) * (interior(Theta) - interior(Theta_prev)) / grid.dt
    return (time_term - _flux_divergence(p, H_next, Theta)
            - p.nu ** 2 * ops.d_c2(Theta))


def _edge_operator(grid: GridSpec, alpha0, g, nu2) -> Tridiagonal:
    """``diag(alpha0)/dt`` plus the folded three-point operator with edge weights ``g``."""
    g_right, g_left = g[1:], g[:-1]
    diag = np.asarray(alpha0) / grid.dt + g_right + g_left + 2.0 * nu2
    upper = -(g_right[:-1] + nu2)
    lower = -(g_left[1:] + nu2)
    upper[0] += -(g_left[0] + nu2)
    lower[-1] += -(g_right[-1] + nu2)
    return Tridiagonal(lower, diag, upper)


def theta_jacobian(params: ModelParams, grid: GridSpec, alpha0, H_next, Theta) -> Tridiagonal:
    """Analytic Jacobian of :func:`theta_residual` w.r.t. node values 0..K.

    Ghost columns are folded onto columns 1 and K-1.
    """
    _check_grid(grid, H_next, Theta)
    p, K = params, grid.K
    s = np.diff(Theta) * K
    g = _edge_mobility(p, H_next) * gamma_eps_second(p, s) * (p.kappa * K * K)
    return _edge_operator(grid, alpha0, g, p.nu ** 2 * K * K)


def picard_matrix(params: ModelParams, grid: GridSpec, alpha0) -> Tridiagonal:
    """``W - dt nu^2 D2`` with ``W = diag(alpha0)``."""
    D = _d2_matrix(grid.K, -grid.dt * params.nu ** 2)
    return Tridiagonal(D.lower, np.asarray(alpha0, dtype=float) + D.diag, D.upper)


def picard_map(params: ModelParams, grid: GridSpec, alpha0, H_next, Theta_prev, Theta,
               B: Tridiagonal | None = None) -> np.ndarray:
    """Fixed-point map: nonlinear flux lagged, angle diffusion implicit."""
    if B is None:
        B = picard_matrix(params, grid, alpha0)
    rhs = (np.asarray(alpha0) * interior(Theta_prev)
           + grid.dt * _flux_divergence(params, H_next, Theta))
    return ops.make_field(thomas_solve(B, rhs))


def _primal_dual_step(params: ModelParams, grid: GridSpec, alpha0, H_next, R, Theta, w):
    """One Newton step on the angle update with the edge flux ``w`` as extra unknown.

    Solves ``gamma(s) w - s = 0`` jointly with the nodal equations. After
    eliminating ``w`` the system is tridiagonal; when ``w = gamma'(s)`` it is
    exactly :func:`theta_jacobian`. The flux update is damped to keep
    ``|w| < 1``.
    """
    p, K = params, grid.K
    s = np.diff(Theta) * K
    gam = gamma_eps(p, s)
    abar = _edge_mobility(p, H_next)
    gap = gam * w - s
    # flux residual evaluated with w rather than gamma'(s)
    Rw = R - p.kappa * K * np.diff(abar * (w - s / gam))
    coef = (1.0 - w * s / gam) / gam
    M = _edge_operator(grid, alpha0, abar * coef * (p.kappa * K * K), p.nu ** 2 * K * K)
    if not M.is_strictly_diagonally_dominant():
        raise SingularSystemError("Newton matrix lost strict diagonal dominance")
    rhs = -Rw - p.kappa * K * np.diff(abar * gap / gam)
    dtheta = ops.make_field(thomas_solve(M, rhs))
    ds = np.diff(dtheta) * K
    dw = (coef * ds - gap / gam)
    tau = 1.0
    moving = dw != 0.0
    if np.any(moving):
        room = np.where(dw[moving] > 0, 1.0 - w[moving], 1.0 + w[moving]) / np.abs(dw[moving])
        tau = min(1.0, 0.99 * float(np.min(room)))
    return fold_ghosts(Theta + dtheta), w + tau * dw, float(np.max(np.abs(dtheta)))


def _check_existence(params: ModelParams, grid: GridSpec, cfg: ThetaSolveConfig):
    bound = dt_existence_bound(params, grid.dx)
    if grid.dt >= bound and not cfg.warn_only_on_exist_cond:
        raise ExistenceConditionViolated(
            f"dt={grid.dt:.6g} violates the sufficient solvability bound {bound:.6g}")
    return bound


def step_theta(params: ModelParams, grid: GridSpec, alpha0, H_next, Theta_prev,
               cfg: ThetaSolveConfig = ThetaSolveConfig()):
    """Solve the angle update; returns ``(Theta_next, SolverDiagnostics)``.

    Newton works on the primal-dual form (see :func:`_primal_dual_step`);
    Picard iterates :func:`picard_map`. The initial guess is ``Theta_prev``.
    """
    _check_existence(params, grid, cfg)
    alpha0 = np.asarray(alpha0, dtype=float)
    Theta = fold_ghosts(Theta_prev)

    def residual(th):
        return theta_residual(params, grid, alpha0, H_next, Theta_prev, th)

    R = residual(Theta)
    rn = float(np.max(np.abs(R)))
    history = [rn]
    it = 0
    B = None
    w = gamma_eps_prime(params, np.diff(Theta) * grid.K)
    if cfg.method == "picard":
        B = picard_matrix(params, grid, alpha0)
        if not B.is_strictly_diagonally_dominant():
            raise SingularSystemError("Picard matrix lost strict diagonal dominance")
    stalled = 0
    while rn > cfg.tol_abs and stalled < 2:
        if it >= cfg.max_iter:
            raise ThetaNonconvergence(
                f"{cfg.method} did not converge in {cfg.max_iter} iterations "
                f"(residual {rn:.3e})", residual=rn, iterations=it)
        it += 1
        if cfg.method == "newton":
            Theta, w, change = _primal_dual_step(params, grid, alpha0, H_next, R, Theta, w)
        else:
            new = picard_map(params, grid, alpha0, H_next, Theta_prev, Theta, B)
            change = float(np.max(np.abs(new - Theta)))
            Theta = new
        R = residual(Theta)
        if change <= ROUNDOFF_STEP * max(1.0, float(np.max(np.abs(Theta)))):
            stalled += 1
        else:
            stalled = 0
        rn = float(np.max(np.abs(R)))
        history.append(rn)
    return Theta, SolverDiagnostics(iterations=it, residual=rn, history=tuple(history))


# ---------------------------------------------------------------------------
# Energy and dissipation
# ---------------------------------------------------------------------------

def _two_sided(f, fn: Callable):
    return 0.5 * (fn(ops.d_plus(f)) + fn(ops.d_minus(f)))


def discrete_energy(params: ModelParams, H, Theta) -> float:
    """Discrete global energy of a folded pair ``(H, Theta)``."""
    p = params
    dx = 1.0 / (len(H) - 3)
    h = interior(H)
    grad_h = trap_sum(_two_sided(H, np.square))
    pot = trap_sum(np.square(h - 1.0))
    grad_th = trap_sum(_two_sided(Theta, np.square))
    tv = trap_sum(alpha_of(p, h) * _two_sided(Theta, lambda v: gamma_eps(p, v)))
    return float(dx * (0.5 * p.kappa0 ** 2 * grad_h + 0.5 * p.c * pot
                       + 0.5 * p.nu ** 2 * grad_th + p.kappa * tv))


def dissipation_terms(params: ModelParams, grid: GridSpec, alpha0_next, H0, Theta0, H1,
                      Theta1):
    """Both sides of the per-step energy inequality: ``(lhs, rhs)``."""
    dt, dx = grid.dt, grid.dx
    lhs = (discrete_energy(params, H1, Theta1) - discrete_energy(params, H0, Theta0)) / dt
    vh = (interior(H1) - interior(H0)) / dt
    vt = (interior(Theta1) - interior(Theta0)) / dt
    rhs = -trap_sum(vh * vh) * dx - trap_sum(np.asarray(alpha0_next) * vt * vt) * dx
    return lhs, rhs


def dissipation_tolerance(energy0: float, dt: float) -> float:
    return ENERGY_RTOL * max(1.0, energy0) / dt


def dissipation_check(params: ModelParams, grid: GridSpec, mobility: MobilityField,
                      state_j: SimState, state_j1: SimState, tol: float | None = None):
    """Check the energy inequality between two consecutive states.

    Returns ``(ok, slack)`` with ``slack = lhs - rhs``; ``ok`` iff ``slack <= tol``.
    """
    if tol is None:
        tol = dissipation_tolerance(state_j.energy0, grid.dt)
    alpha0 = mobility.at(state_j1.t, grid.x)
    lhs, rhs = dissipation_terms(params, grid, alpha0, state_j.H, state_j.Theta,
                                 state_j1.H, state_j1.Theta)
    slack = lhs - rhs
    return bool(slack <= tol), float(slack)


def _range_violation(H, Theta, theta_bound: float) -> float:
    h, th = interior(H), interior(Theta)
    return float(max(0.0, -np.min(h), np.max(h) - 1.0,
                     np.max(np.abs(th)) - theta_bound))


def advance(params: ModelParams, grid: GridSpec, mobility: MobilityField, state: SimState,
            cfg: ThetaSolveConfig = ThetaSolveConfig()):
    """Advance one step; returns ``(new_state, StepReport)``."""
    t1 = (state.j + 1) * grid.dt
    H1 = step_eta(params, grid, state.H, state.Theta)
    alpha0 = mobility.at(t1, grid.x)
    try:
        Theta1, diag = step_theta(params, grid, alpha0, H1, state.Theta, cfg)
    except ThetaNonconvergence as exc:
        exc.step = state.j + 1
        raise
    new = replace(state, j=state.j + 1, t=t1, H=H1, Theta=Theta1,
                  energy=discrete_energy(params, H1, Theta1), last_solver=diag)
    tol = dissipation_tolerance(state.energy0, grid.dt)
    ok, slack = dissipation_check(params, grid, mobility, state, new, tol)
    viol = max(_range_violation(state.H, state.Theta, state.theta_bound) if state.j == 0 else 0.0,
               _range_violation(H1, Theta1, state.theta_bound))
    report = StepReport(
        j=new.j,
        range_ok=viol <= RANGE_TOL,
        range_violation=viol,
        dissipation_ok=ok,
        dissipation_slack=slack,
        dissipation_tol=tol,
        monotone_ok=new.energy <= state.energy + ENERGY_RTOL * max(1.0, state.energy0),
        energy_before=state.energy,
        energy_after=new.energy,
        theta_iters=diag.iterations,
        theta_residual=diag.residual,
    )
    return new, report


@dataclass
class Trajectory:
    """Stored states of a run: arrays indexed by step, fields as ``K + 3`` rows."""

    grid: GridSpec
    times: np.ndarray
    H: np.ndarray
    Theta: np.ndarray
    energy: np.ndarray
    reports: list[StepReport]

    @property
    def passed(self) -> bool:
        return all(r.passed for r in self.reports)


def simulate(params: ModelParams, grid: GridSpec, mobility: MobilityField, H0, Theta0,
             cfg: ThetaSolveConfig = ThetaSolveConfig(), *, store_every: int = 1,
             on_step: Callable[[SimState, StepReport], None] | None = None) -> Trajectory:
    """Run ``grid.N`` steps from ``(H0, Theta0)``.

    States at steps divisible by ``store_every`` (and the last one) are kept.
    """
    bound = _check_existence(params, grid, cfg)
    if grid.dt >= bound:
        msg = (f"dt={grid.dt:.6g} exceeds the sufficient solvability bound {bound:.4g}; "
               "continuing")
        warnings.warn(msg, RuntimeWarning, stacklevel=2)
    state = initial_state(params, H0, Theta0)
    _check_grid(grid, state.H)
    keep = [0]
    Hs, Ts, Es = [state.H], [state.Theta], [state.energy]
    reports = []
    for _ in range(grid.N):
        state, rep = advance(params, grid, mobility, state, cfg)
        reports.append(rep)
        if on_step is not None:
            on_step(state, rep)
        if state.j % store_every == 0 or state.j == grid.N:
            keep.append(state.j)
            Hs.append(state.H)
            Ts.append(state.Theta)
            Es.append(state.energy)
    return Trajectory(grid=grid, times=np.array(keep) * grid.dt, H=np.array(Hs),
                      Theta=np.array(Ts), energy=np.array(Es), reports=reports)

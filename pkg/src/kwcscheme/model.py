"""Model constants, the regularised functions, mobility and step-size bounds."""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from types import SimpleNamespace
from typing import Callable

import numpy as np

from .discrete_ops import Differentiable, diff_quotient, fbar_second

__all__ = [
    "ModelParams",
    "PAPER_PARAMS",
    "MobilityField",
    "StabilityBounds",
    "gamma_eps",
    "gamma_eps_prime",
    "gamma_eps_second",
    "gamma_eps_third",
    "gamma_function",
    "gamma_prime_function",
    "dq_gamma",
    "dq_gamma_prime",
    "alpha_of",
    "dt_existence_bound",
    "dt_error_bound",
    "estimate_lipschitz",
    "lemma42_defect",
    "bound_suite",
]


@dataclass(frozen=True)
class ModelParams:
    eps: float = 0.01
    delta0: float = 0.01
    c: float = 1.0
    kappa0: float = 0.01
    kappa: float = 0.1
    nu: float = 0.01

    def __post_init__(self):
        for name in ("eps", "delta0"):
            v = getattr(self, name)
            if not (0.0 < v < 1.0):
                raise ValueError(f"{name} must lie in (0, 1), got {v!r}")
        for name in ("c", "kappa0", "kappa", "nu"):
            v = getattr(self, name)
            if not (np.isfinite(v) and v > 0.0):
                raise ValueError(f"{name} must be positive, got {v!r}")


#: Constants used for all three computation examples.
PAPER_PARAMS = ModelParams(eps=0.01, delta0=0.01, c=1.0, kappa0=0.01, kappa=0.1, nu=0.01)


@dataclass(frozen=True)
class MobilityField:
    """Positive Lipschitz mobility ``alpha0(t, x)`` of the angle equation.

    ``alpha0`` must accept numpy arrays for ``x``. The default is the constant
    ``delta0`` with Lipschitz constant 0.
    """

    alpha0: Callable
    lipschitz: float = 0.0
    inf_value: float | None = None
    description: str = field(default="", compare=False)

    def __post_init__(self):
        if not self.lipschitz >= 0.0:
            raise ValueError("Lipschitz constant must be >= 0")
        if self.inf_value is not None and not self.inf_value > 0.0:
            raise ValueError("mobility infimum must be positive")

    @classmethod
    def constant(cls, value: float) -> "MobilityField":
        if not value > 0.0:
            raise ValueError("constant mobility must be positive")
        return cls(lambda t, x: np.full(np.shape(x), float(value)), 0.0, float(value),
                   description=repr(float(value)))

    @classmethod
    def default(cls, params: ModelParams) -> "MobilityField":
        return cls.constant(params.delta0)

    def at(self, t: float, x) -> np.ndarray:
        vals = np.asarray(self.alpha0(t, np.asarray(x, dtype=float)), dtype=float)
        return np.broadcast_to(vals, np.shape(x)).astype(float)


@dataclass(frozen=True)
class StabilityBounds:
    dt_exist: float
    dt_error: float
    a_const: float
    c1: float
    l_tilde: float


# ---------------------------------------------------------------------------
# gamma_eps(v) = sqrt(eps^2 + v^2) and derivatives
# ---------------------------------------------------------------------------

def gamma_eps(params: ModelParams, v):
    return np.hypot(params.eps, v)


def gamma_eps_prime(params: ModelParams, v):
    return v / np.hypot(params.eps, v)


def gamma_eps_second(params: ModelParams, v):
    e2 = params.eps ** 2
    return e2 / np.hypot(params.eps, v) ** 3


def gamma_eps_third(params: ModelParams, v):
    e2 = params.eps ** 2
    return -3.0 * e2 * v / np.hypot(params.eps, v) ** 5


def dq_gamma(params: ModelParams, u, v):
    """Secant slope of ``gamma_eps``, in the rationalised form ``(u+v)/(g(u)+g(v))``."""
    u = np.asarray(u, dtype=float)
    v = np.asarray(v, dtype=float)
    out = (u + v) / (gamma_eps(params, u) + gamma_eps(params, v))
    return out[()] if out.ndim == 0 else out


def dq_gamma_prime(params: ModelParams, u, v):
    """Secant slope of ``gamma_eps'``, free of cancellation near ``u = v``."""
    u = np.asarray(u, dtype=float)
    v = np.asarray(v, dtype=float)
    gu, gv = gamma_eps(params, u), gamma_eps(params, v)
    same_sign = u * v > 0.0
    # u g(v) + v g(u) only vanishes when u, v have opposite signs
    den_same = np.where(same_sign, (u * gv + v * gu) * gu * gv, 1.0)
    stable = params.eps ** 2 * (u + v) / den_same
    diff = u - v
    safe = np.where(diff == 0.0, 1.0, diff)
    direct = np.where(diff == 0.0, gamma_eps_second(params, v), (u / gu - v / gv) / safe)
    out = np.where(same_sign, stable, direct)
    return out[()] if out.ndim == 0 else out


def gamma_function(params: ModelParams) -> Differentiable:
    return Differentiable(
        f=lambda v: gamma_eps(params, v),
        d1=lambda v: gamma_eps_prime(params, v),
        d2=lambda v: gamma_eps_second(params, v),
        quotient=lambda u, v: dq_gamma(params, u, v),
    )


def gamma_prime_function(params: ModelParams) -> Differentiable:
    """``gamma_eps'`` viewed as a function in its own right."""
    return Differentiable(
        f=lambda v: gamma_eps_prime(params, v),
        d1=lambda v: gamma_eps_second(params, v),
        d2=lambda v: gamma_eps_third(params, v),
        quotient=lambda u, v: dq_gamma_prime(params, u, v),
    )


def alpha_of(params: ModelParams, h):
    return 0.5 * np.square(h) + params.delta0


# ---------------------------------------------------------------------------
# Step-size bounds
# ---------------------------------------------------------------------------

def dt_existence_bound(params: ModelParams, dx: float) -> float:
    """Sufficient step size for unique solvability of the angle update."""
    if not dx > 0.0:
        raise ValueError("dx must be positive")
    p = params
    return (p.nu ** 2 * p.eps ** 2
            / (4.0 * p.kappa ** 2 * p.delta0 * (p.delta0 + 0.5) ** 2) * dx ** 2)


def dt_error_bound(params: ModelParams, mobility: MobilityField, c1: float = 1.0,
                   dx: float | None = None) -> StabilityBounds:
    """Step-size restriction ``dt < 1/(3a)`` under which the error estimate holds.

    A non-positive ``a`` imposes no restriction and is reported as ``inf``.
    ``dt_exist`` is filled in when ``dx`` is given, otherwise NaN.
    """
    if c1 < 1.0:
        raise ValueError("C1 must be >= 1")
    p = params
    l_tilde = mobility.lipschitz + 1.0
    a = max(2.0 * (p.kappa * c1 / p.nu) ** 2 - (2.0 * p.kappa * p.eps + p.c),
            l_tilde / p.delta0)
    dt_error = 1.0 / (3.0 * a) if a > 0.0 else math.inf
    dt_exist = dt_existence_bound(params, dx) if dx is not None else math.nan
    return StabilityBounds(dt_exist=dt_exist, dt_error=dt_error, a_const=a, c1=c1,
                           l_tilde=l_tilde)


def estimate_lipschitz(alpha0: Callable, T: float, n: int = 101,
                       safety: float = 1.05) -> float:
    """Lipschitz estimate of ``alpha0`` on ``[0, T] x [0, 1]``.

    Takes neighbour finite-difference ratios on an ``n x n`` lattice, using
    the ``|dt| + |dx|`` metric, and inflates the maximum by ``safety``.
    """
    t = np.linspace(0.0, T, n)
    x = np.linspace(0.0, 1.0, n)
    vals = np.array([np.broadcast_to(alpha0(ti, x), x.shape) for ti in t], dtype=float)
    ratios = [0.0]
    if T > 0.0:
        ratios.append(np.max(np.abs(np.diff(vals, axis=0))) / (t[1] - t[0]))
    ratios.append(np.max(np.abs(np.diff(vals, axis=1))) / (x[1] - x[0]))
    return safety * float(max(ratios))


# ---------------------------------------------------------------------------
# Bound suite
# ---------------------------------------------------------------------------

def lemma42_defect(F: Differentiable, xi, xi_t, eta, eta_t):
    """Relative defect of the four-point splitting

    ``dF/d(xi,eta) - dF/d(xi_t,eta_t)
    = (Fbar''(xi,xi_t;eta,eta_t)(xi-xi_t) + Fbar''(eta,eta_t;xi,xi_t)(eta-eta_t)) / 2``

    normalised by ``|dF/d(xi,eta)| + |dF/d(xi_t,eta_t)|`` (at least 1).
    """
    lhs = diff_quotient(F, xi, eta) - diff_quotient(F, xi_t, eta_t)
    rhs = 0.5 * (fbar_second(F, xi, xi_t, eta, eta_t) * (np.asarray(xi) - xi_t)
                 + fbar_second(F, eta, eta_t, xi, xi_t) * (np.asarray(eta) - eta_t))
    scale = np.maximum(1.0, np.abs(diff_quotient(F, xi, eta))
                       + np.abs(diff_quotient(F, xi_t, eta_t)))
    return np.abs(lhs - rhs) / scale


def bound_suite(samples: int = 10_000, eps_values=(0.01, 0.1, 1.0),
                seed: int = 0) -> dict[str, float]:
    """Check the pointwise bounds on ``gamma_eps`` and its quotients.

    Returns, per check, the worst ratio ``value / bound`` (must be <= 1) or,
    for the identities, the worst relative defect. Samples mix the scale
    ``eps`` with order-one arguments.
    """
    rng = np.random.default_rng(seed)
    out: dict[str, float] = {}

    def record(name, v):
        out[name] = max(out.get(name, 0.0), float(v))

    for eps in eps_values:
        # the gamma functions read only eps, which may here reach 1
        p = SimpleNamespace(eps=eps)
        g, gp = gamma_function(p), gamma_prime_function(p)

        def draw(n=samples):
            scale = np.where(rng.random(n) < 0.5, eps, 1.0)
            return rng.standard_normal(n) * scale * rng.choice([0.1, 1.0, 10.0], n)

        u, v = draw(), draw()
        record("dq_gamma<=1", np.max(np.abs(dq_gamma(p, u, v))))
        q = dq_gamma_prime(p, u, v)
        if np.min(q) < 0.0:
            record("dq_gamma_prime>=0", 1.0 + abs(np.min(q)))
        else:
            record("dq_gamma_prime>=0", 0.0)
        record("dq_gamma_prime<=3/(2eps)", np.max(q) * 2.0 * eps / 3.0)
        record("|gamma'''|<=3/eps^2", np.max(np.abs(gamma_eps_third(p, u))) * eps ** 2 / 3.0)
        record("gamma''<=1/eps", np.max(gamma_eps_second(p, u)) * eps)
        record("|gamma'|<1", np.max(np.abs(gamma_eps_prime(p, u))))
        record("1/gamma<=1/eps", np.max(eps / gamma_eps(p, u)))

        a, b, c, d = draw(), draw(), draw(), draw()
        record("|fbar''(gamma')|<=3/eps^2",
               np.max(np.abs(fbar_second(gp, a, b, c, d))) * eps ** 2 / 3.0)
        # equal-argument branches
        record("|fbar''(gamma')|<=3/eps^2",
               np.max(np.abs(fbar_second(gp, a, a, c, d))) * eps ** 2 / 3.0)
        for name, F in (("gamma", g), ("gamma'", gp)):
            # quadruples with the two pairs close, where the splitting matters
            at = a + 1e-3 * eps * rng.standard_normal(samples)
            ct = c + 1e-3 * eps * rng.standard_normal(samples)
            record(f"lemma42[{name}]", np.max(lemma42_defect(F, a, at, c, ct)))
            record(f"lemma42[{name}]", np.max(lemma42_defect(F, a, b, c, d)))
    return out

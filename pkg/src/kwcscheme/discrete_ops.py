"""Grid bookkeeping and discrete calculus on a uniform 1D grid over (0, 1).

Fields are stored as float arrays of length ``K + 3``; array position ``i``
holds node ``k = i - 1``, so the ghost nodes ``k = -1`` and ``k = K + 1`` sit
at the two ends. The homogeneous Neumann condition is imposed by even
folding of the ghosts (see :func:`fold_ghosts`).

Vectorised operators (``d_plus``, ``d_minus``, ...) return the value at every
node ``k = 0..K``; the scalar per-node forms (``diff_plus``, ...) exist for
spot checks and validate the index window.
"""
from __future__ import annotations

from dataclasses import dataclass
from typing import Callable, NamedTuple

import numpy as np

__all__ = [
    "GridSpec",
    "Differentiable",
    "make_field",
    "fold_ghosts",
    "is_folded",
    "interior",
    "diff_plus",
    "diff_minus",
    "diff_c1",
    "diff_c2",
    "avg_plus",
    "avg_minus",
    "d_plus",
    "d_minus",
    "d_c1",
    "d_c2",
    "mu_plus",
    "mu_minus",
    "trap_weights",
    "trap_sum",
    "norm_l2d",
    "norm_linfd",
    "dirichlet_seminorm",
    "diff_quotient",
    "fbar_second",
    "identity_errors",
    "identity_suite",
]


@dataclass(frozen=True)
class GridSpec:
    """Uniform space-time discretisation: ``K`` cells on (0, 1), ``N`` steps of ``dt``."""

    K: int
    dt: float
    N: int = 1

    def __post_init__(self):
        if int(self.K) != self.K or self.K < 2:
            raise ValueError(f"K must be an integer >= 2, got {self.K!r}")
        if not (np.isfinite(self.dt) and self.dt > 0):
            raise ValueError(f"dt must be positive, got {self.dt!r}")
        if int(self.N) != self.N or self.N < 1:
            raise ValueError(f"N must be an integer >= 1, got {self.N!r}")

    @property
    def dx(self) -> float:
        return 1.0 / self.K

    @property
    def T(self) -> float:
        return self.N * self.dt

    @property
    def x(self) -> np.ndarray:
        """Node coordinates ``k * dx`` for ``k = 0..K``."""
        return np.arange(self.K + 1) * self.dx

    @property
    def x_ext(self) -> np.ndarray:
        """Node coordinates including the two ghosts, ``k = -1..K+1``."""
        return np.arange(-1, self.K + 2) * self.dx

    def with_(self, **changes) -> "GridSpec":
        fields = {"K": self.K, "dt": self.dt, "N": self.N}
        fields.update(changes)
        return GridSpec(**fields)


class Differentiable(NamedTuple):
    """A scalar function bundled with its derivatives.

    ``quotient`` optionally overrides the generic secant ``(F(u)-F(v))/(u-v)``
    with a cancellation-free closed form.
    """

    f: Callable
    d1: Callable
    d2: Callable | None = None
    quotient: Callable | None = None


# ---------------------------------------------------------------------------
# Fields and ghosts
# ---------------------------------------------------------------------------

def _K_of(f: np.ndarray) -> int:
    n = np.shape(f)[-1]
    if n < 5:
        raise ValueError(f"field needs at least K+3 = 5 entries, got {n}")
    return n - 3


def make_field(interior_values) -> np.ndarray:
    """Embed node values ``0..K`` into a folded ``K + 3`` field."""
    g = np.asarray(interior_values, dtype=float)
    if g.ndim != 1 or g.size < 3:
        raise ValueError("interior values must be a 1D array with at least 3 entries")
    f = np.empty(g.size + 2)
    f[1:-1] = g
    return fold_ghosts(f)


def fold_ghosts(f) -> np.ndarray:
    """Return a copy of ``f`` with ``f[-1] = f[1]`` and ``f[K+1] = f[K-1]``."""
    f = np.array(f, dtype=float)
    _K_of(f)
    if not np.all(np.isfinite(f[1:-1])):
        raise ValueError("field has non-finite interior entries")
    f[0] = f[2]
    f[-1] = f[-3]
    return f


def is_folded(f) -> bool:
    f = np.asarray(f)
    return bool(f[0] == f[2] and f[-1] == f[-3] and np.all(np.isfinite(f)))


def interior(f) -> np.ndarray:
    """View of the node values ``k = 0..K``."""
    return np.asarray(f)[1:-1]


# ---------------------------------------------------------------------------
# Per-node operators
# ---------------------------------------------------------------------------

def _at(f, k: int, offsets: tuple[int, ...]) -> list[float]:
    K = _K_of(f)
    if int(k) != k:
        raise IndexError(f"node index must be an integer, got {k!r}")
    lo, hi = k + min(offsets), k + max(offsets)
    if lo < -1 or hi > K + 1:
        raise IndexError(f"stencil of node {k} reaches outside -1..{K + 1}")
    return [float(f[k + 1 + o]) for o in offsets]


def diff_plus(f, k: int) -> float:
    a, b = _at(f, k, (0, 1))
    return (b - a) * _K_of(f)


def diff_minus(f, k: int) -> float:
    a, b = _at(f, k, (-1, 0))
    return (b - a) * _K_of(f)


def diff_c1(f, k: int) -> float:
    a, b = _at(f, k, (-1, 1))
    return (b - a) * _K_of(f) / 2.0


def diff_c2(f, k: int) -> float:
    a, b, c = _at(f, k, (-1, 0, 1))
    K = _K_of(f)
    return (c - 2.0 * b + a) * K * K


def avg_plus(f, k: int) -> float:
    a, b = _at(f, k, (0, 1))
    return (a + b) / 2.0


def avg_minus(f, k: int) -> float:
    a, b = _at(f, k, (-1, 0))
    return (a + b) / 2.0


# ---------------------------------------------------------------------------
# Vectorised operators, evaluated at k = 0..K
# ---------------------------------------------------------------------------

def d_plus(f) -> np.ndarray:
    f = np.asarray(f)
    return (f[2:] - f[1:-1]) * _K_of(f)


def d_minus(f) -> np.ndarray:
    f = np.asarray(f)
    return (f[1:-1] - f[:-2]) * _K_of(f)


def d_c1(f) -> np.ndarray:
    f = np.asarray(f)
    return (f[2:] - f[:-2]) * (_K_of(f) / 2.0)


def d_c2(f) -> np.ndarray:
    f = np.asarray(f)
    K = _K_of(f)
    return (f[2:] - 2.0 * f[1:-1] + f[:-2]) * (K * K)


def mu_plus(f) -> np.ndarray:
    f = np.asarray(f)
    return (f[1:-1] + f[2:]) / 2.0


def mu_minus(f) -> np.ndarray:
    f = np.asarray(f)
    return (f[1:-1] + f[:-2]) / 2.0


# ---------------------------------------------------------------------------
# Summation and norms
# ---------------------------------------------------------------------------

def trap_weights(K: int) -> np.ndarray:
    w = np.ones(K + 1)
    w[0] = w[-1] = 0.5
    return w


def trap_sum(g) -> float:
    """Trapezoidal weighted sum ``g_0/2 + g_1 + ... + g_{K-1} + g_K/2``.

    The mesh width is *not* included; multiply by ``dx`` where an integral
    is meant.
    """
    g = np.asarray(g, dtype=float)
    if g.ndim != 1 or g.size < 2:
        raise ValueError("trap_sum needs a 1D array of node values 0..K")
    return float(np.sum(g[1:-1]) + 0.5 * (g[0] + g[-1]))


def norm_l2d(g) -> float:
    """Discrete L2 norm of node values ``0..K``."""
    g = np.asarray(g, dtype=float)
    dx = 1.0 / (g.size - 1)
    return float(np.sqrt(trap_sum(g * g) * dx))


def norm_linfd(g) -> float:
    return float(np.max(np.abs(np.asarray(g, dtype=float))))


def dirichlet_seminorm(g) -> float:
    """``sqrt(sum_{k<K} |(g_{k+1} - g_k)/dx|^2 dx)`` over node values ``0..K``."""
    g = np.asarray(g, dtype=float)
    K = g.size - 1
    s = np.diff(g) * K
    return float(np.sqrt(np.sum(s * s) / K))


# ---------------------------------------------------------------------------
# Difference quotients
# ---------------------------------------------------------------------------

# relative closeness below which u and v count as equal
EQUAL_RTOL = 1e-12


def _close(u, v):
    scale = np.maximum(1.0, np.maximum(np.abs(u), np.abs(v)))
    return np.abs(u - v) <= EQUAL_RTOL * scale


def diff_quotient(F: Differentiable, u, v):
    """Secant slope ``dF/d(u, v)``; ``F'`` at the midpoint when ``u`` and ``v`` coincide.

    Works elementwise on arrays.
    """
    if F.quotient is not None:
        return F.quotient(u, v)
    u = np.asarray(u, dtype=float)
    v = np.asarray(v, dtype=float)
    eq = _close(u, v)
    den = np.where(eq, 1.0, u - v)
    # midpoint keeps the near-equal branch symmetric in (u, v)
    out = np.where(eq, F.d1(0.5 * (u + v)), (F.f(u) - F.f(v)) / den)
    return out[()] if out.ndim == 0 else out


def _dquotient_dfirst(F: Differentiable, xi, eta):
    """Partial derivative of ``dF/d(xi, eta)`` with respect to ``xi``."""
    eq = _close(xi, eta)
    den = np.where(eq, 1.0, xi - eta)
    q = diff_quotient(F, xi, eta)
    return np.where(eq, 0.5 * F.d2(xi), (F.d1(xi) - q) / den)


def fbar_second(F: Differentiable, xi, xi_t, eta, eta_t):
    """Four-point second-order difference quotient of ``F``.

    For ``xi != xi_t`` this is the divided difference in the first slot of
    ``dF/d(., eta) + dF/d(., eta_t)``; at ``xi == xi_t`` it falls back to the
    partial derivative of that sum. ``F.d2`` is required.
    """
    if F.d2 is None:
        raise ValueError("fbar_second needs the second derivative of F")
    xi, xi_t, eta, eta_t = (np.asarray(a, dtype=float) for a in (xi, xi_t, eta, eta_t))
    eq = _close(xi, xi_t)
    den = np.where(eq, 1.0, xi - xi_t)
    s_xi = diff_quotient(F, xi, eta) + diff_quotient(F, xi, eta_t)
    s_xit = diff_quotient(F, xi_t, eta) + diff_quotient(F, xi_t, eta_t)
    branch_eq = _dquotient_dfirst(F, xi_t, eta) + _dquotient_dfirst(F, xi_t, eta_t)
    out = np.where(eq, branch_eq, (s_xi - s_xit) / den)
    return out[()] if out.ndim == 0 else out


# ---------------------------------------------------------------------------
# Identity suite
# ---------------------------------------------------------------------------

def _rel(lhs, rhs, scale) -> float:
    return float(np.max(np.abs(np.asarray(lhs) - np.asarray(rhs)) / scale))


def identity_errors(f, g) -> dict[str, float]:
    """Relative defects of the product rules and summation-by-parts identities
    for one pair of folded fields.

    Each defect is normalised by the sum of magnitudes of the terms entering
    the identity, so it measures round-off rather than cancellation.
    """
    f = np.asarray(f, dtype=float)
    g = np.asarray(g, dtype=float)
    K = _K_of(f)
    dx = 1.0 / K
    fg = f * g
    out = {}

    a1 = d_plus(f) * mu_plus(g)
    a2 = mu_plus(f) * d_plus(g)
    out["prod_plus"] = _rel(d_plus(fg), a1 + a2,
                            np.abs(a1) + np.abs(a2) + np.abs(d_plus(fg)) + 1e-300)
    b1 = d_minus(f) * mu_minus(g)
    b2 = mu_minus(f) * d_minus(g)
    out["prod_minus"] = _rel(d_minus(fg), b1 + b2,
                             np.abs(b1) + np.abs(b2) + np.abs(d_minus(fg)) + 1e-300)

    w = trap_weights(K) * dx
    fi, gi = interior(f), interior(g)

    def bracket(h):
        # [h_k]_0^K
        return h[-1] - h[0]

    # sum'' f d+g dx + sum'' (d-f) g dx = [(f_k g_{k+1} + f_{k-1} g_k)/2]_0^K
    t1 = w * fi * d_plus(g)
    t2 = w * d_minus(f) * gi
    edge = (fi * g[2:] + f[:-2] * gi) / 2.0
    rhs = bracket(edge)
    out["sbp1"] = float(abs(t1.sum() + t2.sum() - rhs) / (
        np.abs(t1).sum() + np.abs(t2).sum() + abs(edge[0]) + abs(edge[-1]) + 1e-300))

    # sum_{k<K} f d+g dx + sum'' (d-f) g dx = [(mu- f) g]_0^K
    t1 = (fi * d_plus(g))[:-1] * dx
    edge = mu_minus(f) * gi
    out["sbp2a"] = float(abs(t1.sum() + t2.sum() - bracket(edge)) / (
        np.abs(t1).sum() + np.abs(t2).sum() + abs(edge[0]) + abs(edge[-1]) + 1e-300))

    # sum_{1<=k<=K} f d-g dx + sum'' (d+f) g dx = [(mu+ f) g]_0^K
    t1 = (fi * d_minus(g))[1:] * dx
    t2 = w * d_plus(f) * gi
    edge = mu_plus(f) * gi
    out["sbp2b"] = float(abs(t1.sum() + t2.sum() - bracket(edge)) / (
        np.abs(t1).sum() + np.abs(t2).sum() + abs(edge[0]) + abs(edge[-1]) + 1e-300))

    # sum_{k<K} (d+f)(d+g) dx = -sum'' (d2 f) g dx + [(d1 f) g]_0^K
    t1 = (d_plus(f) * d_plus(g))[:-1] * dx
    t2 = w * d_c2(f) * gi
    edge = d_c1(f) * gi
    out["sbp5"] = float(abs(t1.sum() + t2.sum() - bracket(edge)) / (
        np.abs(t1).sum() + np.abs(t2).sum() + abs(edge[0]) + abs(edge[-1]) + 1e-300))

    # folded f: sum'' (|d+f|^2 + |d-f|^2)/2 dx = sum_{k<K} |d+f|^2 dx
    ff = fold_ghosts(f)
    lhs = w * (d_plus(ff) ** 2 + d_minus(ff) ** 2) / 2.0
    rhs = (d_plus(ff) ** 2)[:-1] * dx
    out["two_sided_gradient"] = float(abs(lhs.sum() - rhs.sum())
                                      / (lhs.sum() + rhs.sum() + 1e-300))
    return out


def identity_suite(trials: int = 1000, Ks=(3, 7, 16), seed: int = 0) -> dict[str, float]:
    """Worst relative defect of every identity over random folded field pairs."""
    rng = np.random.default_rng(seed)
    worst: dict[str, float] = {}
    for K in Ks:
        for _ in range(trials):
            f = make_field(rng.standard_normal(K + 1))
            g = make_field(rng.standard_normal(K + 1))
            for name, v in identity_errors(f, g).items():
                worst[name] = max(worst.get(name, 0.0), v)
    return worst

"""Acceptance suite: one check per criterion, each printing a PASS/FAIL line.

Run under pytest (``pytest tests/test_acceptance.py -v``) or directly
(``python tests/test_acceptance.py``) for a compact report.
"""
from __future__ import annotations

import contextlib
import io
import math
import re
import time
import warnings
from fractions import Fraction
from functools import lru_cache

import numpy as np
import pytest

from kwcscheme import analysis, cli
from kwcscheme.discrete_ops import (GridSpec, diff_minus, diff_plus, identity_suite, interior,
                                    make_field, norm_l2d)
from kwcscheme.linalg import dense_solve
from kwcscheme.model import (PAPER_PARAMS, MobilityField, alpha_of, bound_suite,
                             dt_existence_bound, gamma_eps_prime)
from kwcscheme.stepper import (ENERGY_RTOL, RANGE_TOL, advance, assemble_eta_system,
                               dissipation_terms, initial_state, picard_map, picard_matrix,
                               simulate, step_eta, theta_jacobian, theta_residual)

P = PAPER_PARAMS
MOB = MobilityField.default(P)
EXAMPLES = {1: (0.06, 200), 2: (0.075, 128), 3: (0.1414, 200)}


def report(n: int, ok: bool, detail: str) -> str:
    return f"criterion {n}: {'PASS' if ok else 'FAIL'}  {detail}"


def _emit(capsys, line: str):
    if capsys is None:
        print(line)
        return
    with capsys.disabled():
        print("\n" + line)


# ---------------------------------------------------------------------------
# criteria
# ---------------------------------------------------------------------------

def criterion_1():
    t0 = time.perf_counter()
    worst = identity_suite(trials=1000, Ks=(3, 7, 16), seed=2024)
    elapsed = time.perf_counter() - t0
    name, err = max(worst.items(), key=lambda kv: kv[1])
    ok = err <= 1e-13 and elapsed < 1.0
    return ok, f"operator identities: worst rel err {err:.2e} ({name}), {elapsed:.2f}s (< 1s)"


def criterion_2():
    t0 = time.perf_counter()
    r = bound_suite(samples=10_000, eps_values=(0.01, 0.1, 1.0), seed=2024)
    elapsed = time.perf_counter() - t0
    failures = []
    for name, v in r.items():
        if name.startswith("lemma42"):
            good = v <= 1e-12
        elif name == "dq_gamma_prime>=0":
            good = v == 0.0
        elif name == "|gamma'|<1":
            good = v < 1.0
        else:
            good = v <= 1.0
        if not good:
            failures.append(f"{name}={v:.3g}")
    lemma = max(v for k, v in r.items() if k.startswith("lemma42"))
    ok = not failures and elapsed < 1.0
    detail = (f"gamma bounds over 3x10^4 samples: max value/bound "
              f"{max(v for k, v in r.items() if not k.startswith('lemma42') and k != 'dq_gamma_prime>=0'):.6f}, "
              f"four-point split rel err {lemma:.1e}, {elapsed:.2f}s (< 1s)")
    if failures:
        detail += "; failed: " + ", ".join(failures)
    return ok, detail


@lru_cache(maxsize=None)
def _example_runs():
    runs = {}
    t0 = time.perf_counter()
    for idx, (dt, N) in EXAMPLES.items():
        g = GridSpec(K=50, dt=dt, N=N)
        H0, T0 = cli.preset_initial(idx, g)
        with warnings.catch_warnings():
            warnings.simplefilter("ignore", RuntimeWarning)
            runs[idx] = simulate(P, g, MOB, H0, T0)
    return runs, time.perf_counter() - t0


def criterion_3():
    runs, elapsed = _example_runs()
    parts, ok = [], elapsed < 10.0
    for idx, tr in runs.items():
        h = tr.H[:, 1:-1]
        th = np.abs(tr.Theta[:, 1:-1])
        lo, hi, tmax = h.min(), h.max(), th.max()
        good = (lo >= -RANGE_TOL and hi <= 1 + RANGE_TOL
                and tmax <= 0.25 * math.pi + RANGE_TOL and len(tr.times) == EXAMPLES[idx][1] + 1)
        ok &= bool(good)
        parts.append(f"ex{idx} H in [{lo:.4f},{hi:.4f}] max|Theta|-pi/4 {tmax - math.pi / 4:.1e}")
    return ok, "; ".join(parts) + f"; {elapsed:.2f}s (< 10s)"


def criterion_4():
    runs, _ = _example_runs()
    parts, ok = [], True
    for idx, tr in runs.items():
        g = tr.grid
        e0 = tr.energy[0]
        tol = ENERGY_RTOL * max(1.0, e0) / g.dt
        a0 = np.full(g.K + 1, P.delta0)
        worst = -math.inf
        for j in range(len(tr.times) - 1):
            lhs, rhs = dissipation_terms(P, g, a0, tr.H[j], tr.Theta[j], tr.H[j + 1],
                                         tr.Theta[j + 1])
            worst = max(worst, lhs - rhs)
        rise = float(np.max(np.diff(tr.energy)))
        good = worst <= tol and rise <= 1e-8 and all(r.dissipation_ok for r in tr.reports)
        ok &= bool(good)
        parts.append(f"ex{idx} max slack {worst:.1e} (tol {tol:.1e}), max rise {rise:.1e}, "
                     f"F {tr.energy[0]:.4f}->{tr.energy[-1]:.6f}")
    return ok, "; ".join(parts)


def criterion_5():
    rng = np.random.default_rng(5)
    t0 = time.perf_counter()
    K = 10
    worst_solve = 0.0
    for _ in range(100):
        g = GridSpec(K=K, dt=10 ** rng.uniform(-4, 0))
        H = make_field(rng.uniform(0, 1, K + 1))
        Th = make_field(rng.standard_normal(K + 1))
        A, rhs = assemble_eta_system(P, g, H, Th)
        x = interior(step_eta(P, g, H, Th))
        y = dense_solve(A, rhs)
        worst_solve = max(worst_solve, np.max(np.abs(x - y)) / np.max(np.abs(y)))
        a0 = rng.uniform(P.delta0, 1.0, K + 1)
        B = picard_matrix(P, g, a0)
        Tp = make_field(rng.standard_normal(K + 1))
        xp = interior(picard_map(P, g, a0, H, Tp, Th, B))
        rhs_p = a0 * interior(Tp) + g.dt * _flux_by_node(H, Th)
        yp = dense_solve(B, rhs_p)
        worst_solve = max(worst_solve, np.max(np.abs(xp - yp)) / np.max(np.abs(yp)))
    worst_jac = 0.0
    K = 8
    for _ in range(100):
        g = GridSpec(K=K, dt=0.06)
        H = make_field(rng.uniform(0, 1, K + 1))
        Th = make_field(0.1 * rng.standard_normal(K + 1))
        Tp = make_field(0.1 * rng.standard_normal(K + 1))
        a0 = rng.uniform(P.delta0, 0.1, K + 1)
        J = theta_jacobian(P, g, a0, H, Th).to_dense()
        Jfd = np.zeros_like(J)
        for m in range(K + 1):
            h = 1e-6 * max(1.0, abs(interior(Th)[m]))
            e = np.zeros(K + 1)
            e[m] = h
            rp = theta_residual(P, g, a0, H, Tp, make_field(interior(Th) + e))
            rm = theta_residual(P, g, a0, H, Tp, make_field(interior(Th) - e))
            Jfd[:, m] = (rp - rm) / (2 * h)
        worst_jac = max(worst_jac, np.max(np.abs(J - Jfd)) / np.max(np.abs(J)))
    elapsed = time.perf_counter() - t0
    ok = worst_solve <= 1e-12 and worst_jac <= 1e-6 and elapsed < 2.0
    return ok, (f"banded vs dense rel err {worst_solve:.1e} (<= 1e-12), Jacobian vs central FD "
                f"rel err {worst_jac:.1e} (<= 1e-6), {elapsed:.2f}s (< 2s)")


def _flux_by_node(H, Th):
    """(kappa/2)[d+(a(H) g'(d-Theta)) + d-(a(H) g'(d+Theta))] node by node with scalar operators."""
    K = len(H) - 3
    a = lambda k: alpha_of(P, H[k + 1])
    gp = lambda v: gamma_eps_prime(P, v)
    out = np.empty(K + 1)
    for k in range(K + 1):
        plus = (a(k + 1) * gp(diff_minus(Th, k + 1)) - a(k) * gp(diff_minus(Th, k))) * K
        minus = (a(k) * gp(diff_plus(Th, k)) - a(k - 1) * gp(diff_plus(Th, k - 1))) * K
        out[k] = 0.5 * P.kappa * (plus + minus)
    return out


def criterion_6():
    rng = np.random.default_rng(6)
    t0 = time.perf_counter()
    K = 10
    dx = 1.0 / K
    g = GridSpec(K=K, dt=0.5 * dt_existence_bound(P, dx))
    a0 = np.full(K + 1, P.delta0)
    worst = 0.0
    for _ in range(50):
        Tp = make_field(rng.uniform(-1, 1, K + 1))
        H = make_field(rng.uniform(0, 1, K + 1))
        radius = math.sqrt(2) * norm_l2d(interior(Tp))
        pair = []
        for _ in range(2):
            v = rng.standard_normal(K + 1)
            v *= rng.uniform(0, 1) * radius / norm_l2d(v)
            pair.append(make_field(v))
        B = picard_matrix(P, g, a0)
        d_out = norm_l2d(interior(picard_map(P, g, a0, H, Tp, pair[0], B)
                                  - picard_map(P, g, a0, H, Tp, pair[1], B)))
        d_in = norm_l2d(interior(pair[0] - pair[1]))
        worst = max(worst, d_out / d_in)
    elapsed = time.perf_counter() - t0
    ok = worst < 1.0 and elapsed < 2.0
    return ok, (f"Picard map at dt = dt_exist/2 = {g.dt:.3e}: max contraction ratio {worst:.4f} "
                f"(< 1), {elapsed:.2f}s (< 2s)")


def criterion_7():
    K = 50
    g = GridSpec(K=K, dt=0.06)
    h_star = P.c / (P.c + P.kappa * P.eps)
    s = initial_state(P, make_field(np.full(K + 1, h_star)), make_field(np.full(K + 1, 0.3)))
    H0, T0 = s.H.copy(), s.Theta.copy()
    for _ in range(100):
        s, _ = advance(P, g, MOB, s)
    drift = max(np.max(np.abs(s.H - H0)), np.max(np.abs(s.Theta - T0)))
    return drift <= 1e-12, f"fixed point H = {h_star:.6f}, flat Theta: drift after 100 steps {drift:.1e} (<= 1e-12)"


def criterion_8():
    t0 = time.perf_counter()
    rep, _ = analysis.convergence_study(P, MOB, levels=(25, 50, 100, 200),
                                        dt_rule=lambda dx: dx / 10, T=0.5, ref_factor=4)
    elapsed = time.perf_counter() - t0
    oe, ot = rep.order_eta, rep.order_theta
    ok = oe is not None and ot is not None and oe >= 0.9 and ot >= 0.9 and elapsed < 60.0
    return ok, (f"observed order eta {oe:.3f}, theta {ot:.3f} (>= 0.9), reference K="
                f"{rep.reference_K}, {elapsed:.1f}s (< 60s)")


def _sig4(x: float) -> str:
    return f"{x:.3e}"


def criterion_9():
    buf = io.StringIO()
    with contextlib.redirect_stdout(buf):
        code = cli.main(["bounds", "--preset", "example1", "--set", "bounds.C1=1"])
    out = buf.getvalue()
    dt_exist = float(re.search(r"dt_exist = (\S+)", out).group(1))
    dt_error = float(re.search(r"dt_error = (\S+)", out).group(1))
    # hand computation in exact rational arithmetic
    eps = delta0 = nu = Fraction(1, 100)
    kappa, c, dx, c1, lip = Fraction(1, 10), Fraction(1), Fraction(1, 50), Fraction(1), Fraction(0)
    hand_exist = nu ** 2 * eps ** 2 / (4 * kappa ** 2 * delta0 * (delta0 + Fraction(1, 2)) ** 2) * dx ** 2
    a = max(2 * (kappa * c1 / nu) ** 2 - (2 * kappa * eps + c), (lip + 1) / delta0)
    hand_error = 1 / (3 * a)
    ok = (code == 0 and _sig4(dt_exist) == _sig4(float(hand_exist))
          and _sig4(dt_error) == _sig4(float(hand_error)))
    return ok, (f"dt_exist {_sig4(dt_exist)} vs hand {_sig4(float(hand_exist))} "
                f"(= {hand_exist}); dt_error {_sig4(dt_error)} vs hand {_sig4(float(hand_error))} "
                f"(a = {float(a)})")


CRITERIA = {n: globals()[f"criterion_{n}"] for n in range(1, 10)}


# ---------------------------------------------------------------------------
# pytest entry points
# ---------------------------------------------------------------------------

@pytest.mark.parametrize("n", sorted(CRITERIA))
def test_criterion(n, capsys):
    ok, detail = CRITERIA[n]()
    _emit(capsys, report(n, ok, detail))
    assert ok, detail


if __name__ == "__main__":
    failed = 0
    for n, fn in CRITERIA.items():
        ok, detail = fn()
        failed += not ok
        print(report(n, ok, detail))
    raise SystemExit(1 if failed else 0)

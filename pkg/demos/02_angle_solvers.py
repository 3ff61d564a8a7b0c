"""
Newton and Picard on the angle update
=====================================

The angle update is a nonlinear implicit system. The fixed-point map is a
contraction only below a tiny step size; Newton on the tridiagonal system
works at the step sizes actually used.

"""

import numpy as np

from kwcscheme import PAPER_PARAMS, GridSpec, dt_error_bound, MobilityField
from kwcscheme.cli import preset_initial
from kwcscheme.discrete_ops import interior, make_field, norm_l2d
from kwcscheme.model import dt_existence_bound
from kwcscheme.stepper import (ThetaSolveConfig, picard_map, picard_matrix, step_eta,
                               step_theta)

params = PAPER_PARAMS
K = 50
bounds = dt_error_bound(params, MobilityField.default(params), c1=1.0, dx=1.0 / K)
print(f"existence bound {bounds.dt_exist:.4e}, error-estimate bound {bounds.dt_error:.4e}")

# %%
# Newton at dt = 0.06, one step from the first configuration
grid = GridSpec(K=K, dt=0.06)
H0, Theta0 = preset_initial(1, grid)
alpha0 = np.full(K + 1, params.delta0)
H1 = step_eta(params, grid, H0, Theta0)
Theta1, diag = step_theta(params, grid, alpha0, H1, Theta0, ThetaSolveConfig("newton"))
print("Newton residual history:", " ".join(f"{r:.1e}" for r in diag.history))

# %%
# Below the existence bound the Picard map contracts; measure its ratio
# on random pairs.
K = 10
grid = GridSpec(K=K, dt=0.5 * dt_existence_bound(params, 1.0 / K))
rng = np.random.default_rng(1)
alpha0 = np.full(K + 1, params.delta0)
B = picard_matrix(params, grid, alpha0)
H = make_field(rng.uniform(0, 1, K + 1))
Tp = make_field(rng.uniform(-1, 1, K + 1))
ratios = []
for _ in range(20):
    a, b = make_field(rng.standard_normal(K + 1)), make_field(rng.standard_normal(K + 1))
    da = picard_map(params, grid, alpha0, H, Tp, a, B) - picard_map(params, grid, alpha0, H, Tp, b, B)
    ratios.append(norm_l2d(interior(da)) / norm_l2d(interior(a - b)))
print(f"Picard contraction ratio at dt = {grid.dt:.2e}: max {max(ratios):.2e}")

# Both methods land on the same solution where both converge
tn, _ = step_theta(params, grid, alpha0, H, Tp, ThetaSolveConfig("newton"))
tp, dp = step_theta(params, grid, alpha0, H, Tp, ThetaSolveConfig("picard", max_iter=200))
print(f"Picard iterations {dp.iterations}, max |Newton - Picard| = {np.max(np.abs(tn - tp)):.1e}")

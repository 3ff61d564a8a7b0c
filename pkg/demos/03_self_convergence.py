"""
Observed convergence order
==========================

No closed-form solution is available, so each resolution is compared with a
run at four times the finest resolution. dt is tied to dx, so one number
drives the refinement.

"""

from kwcscheme import PAPER_PARAMS, MobilityField, convergence_study

params = PAPER_PARAMS
report, errors = convergence_study(params, MobilityField.default(params),
                                   levels=(25, 50, 100, 200), T=0.5)

print(f"{'K':>5} {'dt':>8} {'sup e_eta':>11} {'sup e_theta':>11}")
for row in report.levels:
    print(f"{row.K:5d} {row.dt:8.4f} {row.e_eta:11.3e} {row.e_theta:11.3e}")
print(report.summary())

# %%
# The error over time at the coarsest level: it peaks early, while the
# initial profile relaxes, and decays after.
e = errors[25]
for t, a, b in list(zip(e.times, e.e_eta_l2, e.e_theta_l2))[::25]:
    print(f"t = {t:.3f}  e_eta {a:.2e}  e_theta {b:.2e}")

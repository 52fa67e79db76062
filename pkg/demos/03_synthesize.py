"""Design a gain by solving the two matrix inequalities, then certify it.

The search minimizes the largest constraint violation over (P, V, eps) with
a nonsmooth quasi-Newton method.  Any point it returns is re-checked from
scratch, so the solver itself does not have to be trusted.

    python3 demos/03_synthesize.py
"""
import numpy as np

from hinftrack import build_stochastic, certify, follower_spectrum, load_config, solve_feasibility
from hinftrack.cli import demo_config_path
from hinftrack.synthesis import SolverOptions, SynthesisInfeasible, lmi_margins

cfg = load_config(demo_config_path())
aug = cfg.augmented()
dec = build_stochastic(cfg.adjacency, cfg.h)
spec = follower_spectrum(dec)

for eps in (0.25, None):
    opts = SolverOptions(fixed_eps=eps)
    cert = solve_feasibility(aug, cfg.gamma, spec.lambda0, opts)
    label = "eps fixed at 0.25" if eps else f"eps free (found {cert.variables.eps:.4f})"
    print(f"{label}: {cert.iterations} iterations, F = {cert.F.ravel()}")
    print("  margins:", ", ".join(f"{m:.3e}" for m in cert.margins))
    rep = certify(cert, aug, spec, dec=dec)
    print(f"  certified: {rep.passed}, decoupled norms "
          + ", ".join(f"{s.norm:.4f}" for s in rep.decoupled.systems))

# A feasible point stays feasible for any larger gamma.
print("\nmargins at larger gamma:")
for g in (1.0, 2.0, 10.0):
    print(f"  gamma={g:g}:", ", ".join(f"{m:.3e}" for m in lmi_margins(cert.variables, g, spec.lambda0, aug)))

# Asking for a vanishing gamma makes the output-penalty term dominate.
try:
    solve_feasibility(aug, 1e-9, spec.lambda0, SolverOptions(fixed_eps=0.25, max_iter=300, restarts=0))
except SynthesisInfeasible as exc:
    print("\ngamma=1e-9:", exc)

np.set_printoptions(precision=4)
print("\nP =\n", cert.variables.P)

"""Tikhonov reconstruction and the logarithmic convergence rate.

Reconstructs a band-limited refractive index from noisy near-field data
at several noise levels with the a-priori regularization parameter rule,
then fits the logarithmic rate exponent.
"""

import numpy as np

from emiscat.forward import NearFieldData, SphereGrid
from emiscat.fourier import CubeGrid, hm_norm
from emiscat.inversion import (
    InverseProblem,
    _ForwardState,
    alpha_rule,
    band_limited_index,
    rate_study,
)

KAPPA = 1.0
R = 1.2 * np.pi

print("== A-priori regularization parameter rule ==")
print(f"alpha(delta=0.1, A=1, nu=1/2) = {alpha_rule(0.1, 1.0, 0.5):.4f} "
      "(closed-form worked value ~ 0.2487)")

grid = CubeGrid(np.pi, 12)
truth = band_limited_index(grid, 2.0, 0.08, seed=11)
print(f"\ntruth: band-limited contrast, max amplitude "
      f"{np.max(np.abs(truth.values - 1)):.2f}, "
      f"H^4 norm {hm_norm(truth.coeffs, 4.0, grid):.3f}")

sphere = SphereGrid.build(R, 1, 3)
shape = (sphere.nodes.shape[0], sphere.nodes.shape[0], 3, 3)
dummy = NearFieldData(receivers=sphere, sources=sphere,
                      matrices=np.zeros(shape, dtype=complex))
problem = InverseProblem(kind="near", kappa=KAPPA, grid=grid, data=dummy,
                         delta=0.0, m=4.0, gamma_max=2.0, b=0.5)
state = _ForwardState(problem, truth)
problem.data = NearFieldData(receivers=sphere, sources=sphere,
                             matrices=state.matrices)

print("\n== Noise sweep (warm-started) ==")
study = rate_study(truth, problem, deltas=(1e-1, 1e-2, 1e-3),
                   seeds=(1, 2, 3), A=1.0, nu=0.5, maxiter=25)
for d, a, e, mis in zip(study.deltas, study.alphas, study.errors,
                        study.misfits):
    print(f"  delta = {d:.0e}: alpha = {a:.2e}, H^4 error = {e:.3f}, "
          f"misfit = {mis:.2e}")
print(f"fitted rate exponent nu_hat = {study.nu_hat:.2f} "
      f"(theory nu = {study.nu_theory}), "
      f"monotonicity violations = {study.monotonicity_violations}")
print("rates demo done")

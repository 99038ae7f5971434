"""Near-field and far-field data operators.

Builds the matrix near-field (Green's tensor) data on a measurement
sphere, demonstrates reciprocity, then reconstructs near-field values
from far-field data through the spherical harmonic series.
"""

import numpy as np

from emiscat.forward import SphereGrid, far_field_operator, near_field_operator
from emiscat.fourier import BumpProfile, CubeGrid, make_test_index
from emiscat.spherical import far_coeffs, near_from_far

KAPPA = 1.0
R = 1.1 * np.pi

grid = CubeGrid(np.pi, 16)
medium = make_test_index(
    BumpProfile(centers=[(0.3, -0.2, 0.1)], amplitudes=[0.2], widths=[1.5]),
    grid, b=0.7)

print("== Near-field data and reciprocity ==")
sphere = SphereGrid.build(R, 2, 5)
near = near_field_operator(medium, KAPPA, sphere)
sym = np.linalg.norm(near.matrices - np.swapaxes(near.matrices, 0, 1).transpose(0, 1, 3, 2))
print(f"receiver/source nodes: {sphere.nodes.shape[0]}")
print(f"reciprocity |w(x,y) - w(y,x)^T| / |w|: "
      f"{sym / np.linalg.norm(near.matrices):.2e}")

print("\n== Far field and the near-from-far series ==")
L = int(np.ceil(KAPPA * R)) + 12
unit = SphereGrid.build(1.0, L + 1, 2 * L + 1)
far = far_field_operator(medium, KAPPA, unit, unit)
coeffs = far_coeffs(far, L)
print(f"harmonic degree L = {L}, coefficient energy = "
      f"{coeffs.frobenius_sum():.3e}")

x = np.array([2.0 * R, 0.0, 0.0])
y = np.array([0.0, 0.0, R])
series, shell = near_from_far(coeffs, KAPPA, x, y)
direct = near_field_operator(
    medium, KAPPA,
    SphereGrid(radius=R, nodes=np.array([[0.0, 0.0, 1.0]]),
               weights=np.array([1.0])),
    receivers=SphereGrid(radius=2.0 * R, nodes=np.array([[1.0, 0.0, 0.0]]),
                         weights=np.array([1.0])))
err = np.linalg.norm(series - direct.matrices[0, 0]) \
    / np.linalg.norm(direct.matrices[0, 0])
print(f"series vs direct near value at |x| = 2R: rel err = {err:.2e} "
      f"(last shell {shell:.1e})")
print("near/far data demo done")

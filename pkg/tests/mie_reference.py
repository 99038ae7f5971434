"""Reference far fields for a homogeneous dielectric ball (Lorenz-Mie series).

Independent oracle for the volume-integral forward solver.  Uses the
textbook partial-wave expansion with Riccati-Bessel functions; conventions
match the solver's scattered-field asymptotics E^s ~ (exp(i*kappa*r)/r) E_inf
and the time dependence exp(-i*omega*t).

The ball has refractive index n0 in the Maxwell sense (kappa^2 * n * E), so
the optical contrast entering the Mie coefficients is m = sqrt(n0).
"""

import numpy as np
from scipy.special import spherical_jn, spherical_yn


def _riccati(l_max, z):
    """psi_l(z) = z*j_l(z), xi_l(z) = z*h1_l(z) and derivatives, l = 1..l_max."""
    ls = np.arange(1, l_max + 1)
    j = spherical_jn(ls, z)
    jp = spherical_jn(ls, z, derivative=True)
    y = spherical_yn(ls, z)
    yp = spherical_yn(ls, z, derivative=True)
    h = j + 1j * y
    hp = jp + 1j * yp
    psi = z * j
    psi_p = j + z * jp
    xi = z * h
    xi_p = h + z * hp
    return psi, psi_p, xi, xi_p


def mie_coefficients(kappa, radius, n0, l_max=None):
    """Partial wave coefficients (a_l, b_l), l = 1..l_max, for a uniform ball."""
    x = kappa * radius
    m = np.sqrt(complex(n0))
    if l_max is None:
        l_max = int(np.ceil(x + 4.05 * x ** (1.0 / 3.0) + 8))
    psi_x, psi_px, xi_x, xi_px = _riccati(l_max, x)
    psi_mx, psi_pmx, _, _ = _riccati(l_max, m * x)
    a = (m * psi_mx * psi_px - psi_x * psi_pmx) / (m * psi_mx * xi_px - xi_x * psi_pmx)
    b = (psi_mx * psi_px - m * psi_x * psi_pmx) / (psi_mx * xi_px - m * xi_x * psi_pmx)
    return a, b


def _angular_functions(l_max, mu):
    """pi_l and tau_l angular functions by upward recurrence."""
    pi = np.zeros(l_max + 1)
    tau = np.zeros(l_max + 1)
    pi[1] = 1.0
    tau[1] = mu
    for l in range(2, l_max + 1):
        pi[l] = ((2 * l - 1) * mu * pi[l - 1] - l * pi[l - 2]) / (l - 1)
        tau[l] = l * mu * pi[l] - (l + 1) * pi[l - 1]
    return pi[1:], tau[1:]


def amplitudes(kappa, radius, n0, mu, l_max=None):
    """Scattering amplitudes S1(mu), S2(mu) at cos(scattering angle) mu."""
    a, b = mie_coefficients(kappa, radius, n0, l_max)
    ls = np.arange(1, a.size + 1)
    w = (2 * ls + 1) / (ls * (ls + 1.0))
    pi_l, tau_l = _angular_functions(a.size, mu)
    s1 = np.sum(w * (a * pi_l + b * tau_l))
    s2 = np.sum(w * (a * tau_l + b * pi_l))
    return s1, s2


def far_field(xhat, d, p, kappa, radius, n0, l_max=None):
    """Far-field amplitude E_inf(xhat) for incident plane wave (d, p)."""
    xhat = np.asarray(xhat, dtype=float)
    d = np.asarray(d, dtype=float)
    p = np.asarray(p, dtype=complex)
    mu = float(np.dot(d, xhat))
    s1, s2 = amplitudes(kappa, radius, n0, mu, l_max)
    cross = np.cross(d, xhat)
    sin_t = np.linalg.norm(cross)
    if sin_t < 1e-10:
        s = s2 if mu > 0 else s1
        return (1j / kappa) * s * (p - d * np.dot(d, p))
    e_perp = cross / sin_t
    e_par_i = np.cross(e_perp, d)
    e_par_s = np.cross(e_perp, xhat)
    return (1j / kappa) * (s2 * np.dot(p, e_par_i) * e_par_s
                           + s1 * np.dot(p, e_perp) * e_perp)


def far_matrix(xhat, d, kappa, radius, n0, l_max=None):
    """3x3 matrix e_inf(xhat, d) acting on the polarization vector."""
    cols = [far_field(xhat, d, e, kappa, radius, n0, l_max)
            for e in np.eye(3)]
    return np.stack(cols, axis=-1)

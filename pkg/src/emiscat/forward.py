"""Forward electromagnetic scattering by the volume integral equation.

The total field solves

    E = E_inc - kappa^2 * conv(Phi, (1-n) E) + grad conv(Phi, (1/n) grad(n).E)

with Phi the outgoing Helmholtz kernel.  The convolutions are discretized
by periodizing the kernel, truncated at radius 2*pi, on the enclosing cube
of half-side 2*pi; the truncated kernel's Fourier symbol is known in closed
form, so one application costs a few FFTs on the padded grid.  Truncation
at 2*pi is exact for source and observation points in B(pi).

Near- and far-field data operators assemble the 3x3 matrix responses to
dipole and plane-wave excitations on measurement spheres.
"""

from __future__ import annotations

from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field

import numpy as np
import scipy.fft
from scipy.sparse.linalg import LinearOperator, gmres

from .fourier import CubeGrid, RefractiveIndex, fourier_coeffs, inverse_fourier


class SolveError(RuntimeError):
    """Krylov iteration failed to reach the requested residual."""

    def __init__(self, message, residuals=None, context=None):
        super().__init__(message)
        self.residuals = residuals if residuals is not None else []
        self.context = context


def helmholtz_kernel(x, kappa):
    """Outgoing fundamental solution exp(i*kappa*|x|)/(4*pi*|x|)."""
    x = np.asarray(x, dtype=float)
    r = np.sqrt(np.sum(x * x, axis=-1)) if x.shape[-1] == 3 else np.abs(x)
    if np.any(r == 0):
        raise ValueError("Helmholtz kernel evaluated at the origin")
    return np.exp(1j * kappa * r) / (4.0 * np.pi * r)


def background_green(x, y, kappa):
    """Free-space electric Green's tensor w1(x, y).

    ``w1(x, y) a`` is the dipole field -(1/(i*kappa)) curl curl (a * Phi),
    in closed form (i/kappa) * (kappa^2 Phi I + Hess Phi).
    """
    z = np.asarray(x, dtype=float) - np.asarray(y, dtype=float)
    r = np.linalg.norm(z, axis=-1)
    if np.any(r == 0):
        raise ValueError("coincident source and evaluation points")
    rhat = z / r[..., None]
    phi = np.exp(1j * kappa * r) / (4.0 * np.pi * r)
    dp = (1j * kappa - 1.0 / r) * phi
    ddp = ((1j * kappa - 1.0 / r) ** 2 + 1.0 / r**2) * phi
    eye = np.eye(3)
    outer = rhat[..., :, None] * rhat[..., None, :]
    hess = (ddp - dp / r)[..., None, None] * outer + (dp / r)[..., None, None] * eye
    return (1j / kappa) * (kappa**2 * phi[..., None, None] * eye + hess)


def grad_kernel(x, y, kappa):
    """Gradient in x of Phi(x - y)."""
    z = np.asarray(x, dtype=float) - np.asarray(y, dtype=float)
    r = np.linalg.norm(z, axis=-1)
    phi = np.exp(1j * kappa * r) / (4.0 * np.pi * r)
    return ((1j * kappa - 1.0 / r) * phi)[..., None] * (z / r[..., None])


class DipoleSource:
    """Electric dipole with moment ``a`` at ``y``; fields solve the
    background Maxwell system away from the source point."""

    def __init__(self, y, a, kappa):
        self.y = np.asarray(y, dtype=float)
        self.a = np.asarray(a, dtype=complex)
        self.kappa = float(kappa)

    def electric(self, points):
        return background_green(points, self.y, self.kappa) @ self.a

    def magnetic(self, points):
        # H = curl(a Phi) = grad(Phi) x a
        g = grad_kernel(points, self.y, self.kappa)
        return np.cross(g, self.a)


class PlaneWave:
    """Plane wave in direction ``d`` with polarization ``p`` (projected
    transverse to ``d``)."""

    def __init__(self, d, p, kappa):
        d = np.asarray(d, dtype=float)
        if abs(np.linalg.norm(d) - 1.0) > 1e-10:
            raise ValueError("direction must be a unit vector")
        self.d = d
        p = np.asarray(p, dtype=complex)
        self.q = np.cross(d, np.cross(p, d))  # d x (p x d)
        self.kappa = float(kappa)

    def electric(self, points):
        phase = np.exp(1j * self.kappa * np.asarray(points) @ self.d)
        return phase[..., None] * self.q

    def magnetic(self, points):
        phase = np.exp(1j * self.kappa * np.asarray(points) @ self.d)
        return phase[..., None] * np.cross(self.d, self.q)


def truncated_kernel_symbol(xi_norm, kappa, radius):
    """Fourier transform of Phi restricted to |x| <= radius, at |xi|.

    Closed form -(g(kappa+xi) - g(kappa-xi)) / (2 xi) with
    g(u) = (exp(i*u*radius) - 1)/u; removable singularities handled by
    series.
    """
    xi = np.asarray(xi_norm, dtype=float)

    def g(u):
        u = np.asarray(u, dtype=float)
        out = np.empty(u.shape, dtype=complex)
        small = np.abs(u) < 1e-6
        us = u[~small]
        # stable e^{iur}-1 via real/imag parts
        out[~small] = (-2.0 * np.sin(0.5 * us * radius) ** 2
                       + 1j * np.sin(us * radius)) / us
        ut = u[small]
        out[small] = (1j * radius - 0.5 * radius**2 * ut
                      - 1j * radius**3 * ut**2 / 6.0)
        return out

    out = np.empty(xi.shape, dtype=complex)
    zero = xi < 1e-9
    xs = xi[~zero]
    out[~zero] = -(g(kappa + xs) - g(kappa - xs)) / (2.0 * xs)
    if np.any(zero):
        # limit -g'(kappa), g'(u) = (i*rho*u*exp(i*u*rho) - (exp(i*u*rho)-1))/u^2
        if abs(kappa) > 1e-4:
            eikr = np.exp(1j * kappa * radius)
            gp = (1j * radius * kappa * eikr - (eikr - 1.0)) / kappa**2
        else:
            gp = (-0.5 * radius**2 - 1j * radius**3 * kappa / 3.0
                  + radius**4 * kappa**2 / 8.0)
        out[zero] = -gp
    return out


@dataclass
class VectorFieldGrid:
    """Complex 3-vector samples on a cube grid."""

    grid: CubeGrid
    values: np.ndarray  # (N, N, N, 3)

    def __post_init__(self):
        if self.values.shape != (self.grid.n,) * 3 + (3,):
            raise ValueError("field shape does not match grid")

    def l2(self) -> float:
        return float(np.sqrt(np.sum(np.abs(self.values) ** 2) * self.grid.spacing**3))


class ScatteringSolver:
    """Matrix-free Lippmann-Schwinger solver for one medium at one kappa."""

    def __init__(self, n: RefractiveIndex, kappa: float, rtol: float = 1e-8,
                 restart: int = 50, maxiter: int = 2000):
        self.n = n
        self.kappa = float(kappa)
        self.rtol = rtol
        self.restart = restart
        self.maxiter = maxiter
        grid = n.grid
        if abs(grid.half_side - np.pi) > 1e-12:
            raise ValueError("medium must live on C(pi)")
        N = grid.n
        self.N = N
        self.M = 2 * N
        self.pts = grid.points()
        # contrast and spectral derivative of n (exact for the interpolant)
        self.q = 1.0 - n.values
        f1, f2, f3 = grid.frequencies()
        grad = np.empty((N, N, N, 3), dtype=complex)
        for c, f in enumerate((f1, f2, f3)):
            grad[..., c] = inverse_fourier(1j * f * n.coeffs, grid)
        self.grad_n = grad
        self.p = grad / n.values[..., None]
        # quadrature support: contrast lives in B(pi); keep nodes where the
        # contrast or its (spectral) gradient is non-negligible
        scale = max(np.max(np.abs(self.q)), 1.0)
        self.support = (grid.radii() < np.pi) & (
            np.abs(self.q) + np.linalg.norm(grad, axis=-1) > 1e-14 * scale)
        # symbol of the truncated kernel on the padded lattice
        big = np.fft.fftfreq(self.M, d=1.0 / self.M) * (np.pi / (2 * np.pi))
        k1, k2, k3 = np.meshgrid(big, big, big, indexing="ij")
        xi = np.sqrt(k1**2 + k2**2 + k3**2)
        self.symbol = truncated_kernel_symbol(xi, self.kappa, 2.0 * np.pi)
        self.grad_symbol = (1j * np.stack([k1, k2, k3], axis=-1)
                            * self.symbol[..., None])

    def _conv(self, f, symbol):
        pad = np.zeros((self.M,) * 3, dtype=complex)
        o = self.N // 2
        pad[o:o + self.N, o:o + self.N, o:o + self.N] = f
        out = scipy.fft.ifftn(symbol * scipy.fft.fftn(pad))
        return out[o:o + self.N, o:o + self.N, o:o + self.N]

    def _grad_conv(self, f):
        pad = np.zeros((self.M,) * 3, dtype=complex)
        o = self.N // 2
        pad[o:o + self.N, o:o + self.N, o:o + self.N] = f
        fhat = scipy.fft.fftn(pad)
        out = np.empty((self.N,) * 3 + (3,), dtype=complex)
        for c in range(3):
            comp = scipy.fft.ifftn(self.grad_symbol[..., c] * fhat)
            out[..., c] = comp[o:o + self.N, o:o + self.N, o:o + self.N]
        return out

    def potential(self, e):
        """-kappa^2 conv(Phi, q E) + grad conv(Phi, p.E) on the grid."""
        o, N = self.N // 2, self.N
        sl = slice(o, o + N)
        pad = np.zeros((self.M,) * 3, dtype=complex)
        pad[sl, sl, sl] = np.sum(self.p * e, axis=-1)
        ghat = scipy.fft.fftn(pad)
        out = np.empty_like(e)
        for c in range(3):
            pad[...] = 0.0
            pad[sl, sl, sl] = self.q * e[..., c]
            spec = (-self.kappa**2 * self.symbol * scipy.fft.fftn(pad)
                    + self.grad_symbol[..., c] * ghat)
            out[..., c] = scipy.fft.ifftn(spec)[sl, sl, sl]
        return out

    def _matvec(self, flat):
        e = flat.reshape((self.N,) * 3 + (3,))
        return (e - self.potential(e)).ravel()

    def solve(self, source, x0=None) -> VectorFieldGrid:
        """Total electric field for the given incident-field source."""
        e_inc = source.electric(self.pts)
        b = e_inc.ravel()
        size = b.size
        op = LinearOperator((size, size), matvec=self._matvec, dtype=complex)
        residuals = []
        x, info = gmres(op, b, x0=(x0.ravel() if x0 is not None else b.copy()),
                        rtol=self.rtol, atol=0.0, restart=self.restart,
                        maxiter=self.maxiter // self.restart,
                        callback=residuals.append, callback_type="pr_norm")
        if info != 0:
            raise SolveError(f"GMRES did not converge (info={info})",
                             residuals=residuals)
        e = x.reshape((self.N,) * 3 + (3,))
        resid = np.linalg.norm(self._matvec(x) - b) / np.linalg.norm(b)
        if resid > 10 * self.rtol:
            raise SolveError(f"residual {resid:.2e} above tolerance",
                             residuals=residuals)
        return VectorFieldGrid(self.n.grid, e)

    def born_field(self, source) -> VectorFieldGrid:
        """First Born approximation E_inc + potential(E_inc)."""
        e_inc = source.electric(self.pts)
        return VectorFieldGrid(self.n.grid, e_inc + self.potential(e_inc))

    def scattered_at(self, e_total: VectorFieldGrid, points) -> np.ndarray:
        """Scattered field at exterior points by direct quadrature.

        Valid for |x| > pi where the kernel is smooth across the support.
        """
        points = np.atleast_2d(np.asarray(points, dtype=float))
        if np.any(np.linalg.norm(points, axis=-1) <= np.pi):
            raise ValueError("evaluation points must lie outside B(pi)")
        h3 = self.n.grid.spacing**3
        mask = self.support
        ys = self.pts[mask]
        qe = (self.q[..., None] * e_total.values)[mask]
        pe = np.sum(self.p * e_total.values, axis=-1)[mask]
        out = np.empty((points.shape[0], 3), dtype=complex)
        for i, x in enumerate(points):
            phi = helmholtz_kernel(x[None, :] - ys, self.kappa)
            gp = grad_kernel(x[None, :], ys, self.kappa)
            out[i] = h3 * (-self.kappa**2 * phi @ qe + pe @ gp)
        return out

    def far_pattern(self, e_total: VectorFieldGrid, xhats) -> np.ndarray:
        """Far-field amplitude E_inf(xhat) from the volume representation."""
        xhats = np.atleast_2d(np.asarray(xhats, dtype=float))
        h3 = self.n.grid.spacing**3
        mask = self.support
        ys = self.pts[mask]
        qe = (self.q[..., None] * e_total.values)[mask]
        pe = np.sum(self.p * e_total.values, axis=-1)[mask]
        out = np.empty((xhats.shape[0], 3), dtype=complex)
        for i, xh in enumerate(xhats):
            ph = np.exp(-1j * self.kappa * ys @ xh)
            out[i] = (h3 / (4 * np.pi)) * (-self.kappa**2 * ph @ qe
                                           + 1j * self.kappa * (ph @ pe) * xh)
        return out

    def residual(self, e_total: VectorFieldGrid, source) -> float:
        """Relative Lippmann-Schwinger residual inside B(pi)."""
        e_inc = source.electric(self.pts)
        r = e_total.values - self.potential(e_total.values) - e_inc
        inside = self.n.grid.radii() < np.pi
        return float(np.linalg.norm(r[inside]) / np.linalg.norm(e_inc[inside]))


@dataclass(frozen=True)
class SphereGrid:
    """Quadrature on a sphere of given radius: Gauss-Legendre in cos(theta)
    times uniform trapezoid in phi.  Exact for spherical harmonics up to
    ``degree`` = min(2*n_theta - 1, n_phi - 1)."""

    radius: float
    nodes: np.ndarray  # (K, 3) unit vectors
    weights: np.ndarray  # (K,), sum to 4*pi

    @staticmethod
    def build(radius: float, n_theta: int, n_phi: int) -> "SphereGrid":
        mu, w = np.polynomial.legendre.leggauss(n_theta)
        phi = 2.0 * np.pi * np.arange(n_phi) / n_phi
        st = np.sqrt(1.0 - mu**2)
        nodes = np.empty((n_theta * n_phi, 3))
        weights = np.empty(n_theta * n_phi)
        k = 0
        for i in range(n_theta):
            for j in range(n_phi):
                nodes[k] = (st[i] * np.cos(phi[j]), st[i] * np.sin(phi[j]), mu[i])
                weights[k] = w[i] * 2.0 * np.pi / n_phi
                k += 1
        return SphereGrid(radius=radius, nodes=nodes, weights=weights)

    @property
    def degree(self) -> int:
        n_theta = len(np.unique(np.round(self.nodes[:, 2], 12)))
        n_phi = self.nodes.shape[0] // n_theta
        return min(2 * n_theta - 1, n_phi - 1)

    def points(self) -> np.ndarray:
        return self.radius * self.nodes


@dataclass
class NearFieldData:
    """3x3 responses w(x, y) on receiver x sphere of source y sphere."""

    receivers: SphereGrid
    sources: SphereGrid
    matrices: np.ndarray  # (n_rec, n_src, 3, 3)
    part: str = "scattered"

    def norm(self) -> float:
        """L2 norm over R S^2 x R S^2 with surface measure (R^4 factor)."""
        w = (self.receivers.weights[:, None] * self.sources.weights[None, :]
             * self.receivers.radius**2 * self.sources.radius**2)
        return float(np.sqrt(np.sum(w * np.sum(np.abs(self.matrices) ** 2,
                                               axis=(2, 3)))))


@dataclass
class FarFieldData:
    """3x3 far-field patterns e_inf(xhat, d) on direction quadratures."""

    receivers: SphereGrid  # xhat grid (radius 1)
    incidences: SphereGrid  # d grid (radius 1)
    matrices: np.ndarray  # (n_x, n_d, 3, 3)

    def norm(self) -> float:
        w = self.receivers.weights[:, None] * self.incidences.weights[None, :]
        return float(np.sqrt(np.sum(w * np.sum(np.abs(self.matrices) ** 2,
                                               axis=(2, 3)))))


def _run_pool(jobs, workers):
    if workers <= 1:
        return [job() for job in jobs]
    with ThreadPoolExecutor(max_workers=workers) as pool:
        futures = [pool.submit(job) for job in jobs]
        return [f.result() for f in futures]


def near_field_operator(n: RefractiveIndex, kappa: float, sources: SphereGrid,
                        receivers: SphereGrid | None = None, rtol: float = 1e-8,
                        workers: int = 1) -> NearFieldData:
    """Scattered part of the Green's tensor data, column j the response to a
    unit dipole moment along axis j."""
    if sources.radius <= np.pi:
        raise ValueError("measurement sphere must have radius > pi")
    if receivers is None:
        receivers = sources
    solver = ScatteringSolver(n, kappa, rtol=rtol)
    rec_pts = receivers.points()
    src_pts = sources.points()

    def one(iy, j):
        def job():
            src = DipoleSource(src_pts[iy], np.eye(3)[j], kappa)
            try:
                e = solver.solve(src)
            except SolveError as err:
                err.context = (iy, j)
                raise
            return solver.scattered_at(e, rec_pts)
        return job

    jobs = [one(iy, j) for iy in range(src_pts.shape[0]) for j in range(3)]
    results = _run_pool(jobs, workers)
    mats = np.empty((rec_pts.shape[0], src_pts.shape[0], 3, 3), dtype=complex)
    k = 0
    for iy in range(src_pts.shape[0]):
        for j in range(3):
            mats[:, iy, :, j] = results[k]
            k += 1
    return NearFieldData(receivers=receivers, sources=sources, matrices=mats)


def far_field_operator(n: RefractiveIndex, kappa: float, receivers: SphereGrid,
                       incidences: SphereGrid, rtol: float = 1e-8,
                       workers: int = 1) -> FarFieldData:
    """Matrix far-field patterns from plane-wave solves.

    Two tangential polarization solves per incidence suffice; Cartesian
    columns follow by linearity since longitudinal polarizations radiate
    nothing.
    """
    solver = ScatteringSolver(n, kappa, rtol=rtol)
    xhats = receivers.nodes
    ds = incidences.nodes

    def tangents(d):
        ref = np.eye(3)[np.argmin(np.abs(d))]
        t1 = np.cross(d, ref)
        t1 /= np.linalg.norm(t1)
        return t1, np.cross(d, t1)

    def one(idx):
        def job():
            d = ds[idx]
            t1, t2 = tangents(d)
            pats = []
            for t in (t1, t2):
                e = solver.solve(PlaneWave(d, t, kappa))
                pats.append(solver.far_pattern(e, xhats))
            mat = np.empty((xhats.shape[0], 3, 3), dtype=complex)
            for j in range(3):
                mat[:, :, j] = t1[j] * pats[0] + t2[j] * pats[1]
            return mat
        return job

    results = _run_pool([one(i) for i in range(ds.shape[0])], workers)
    mats = np.stack(results, axis=1)
    return FarFieldData(receivers=receivers, incidences=incidences, matrices=mats)

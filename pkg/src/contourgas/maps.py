"""Exterior and interior conformal maps, Schwarzians, Green's functions and
harmonic extensions.

The exterior map is the inverse of the Laurent polynomial and is evaluated by
Newton iteration. The interior map w_int with w_int(center) = 0 is built from a
double-layer Dirichlet solve for -log|z - center| followed by Cauchy-transform
conjugation of the layer density.
"""
from dataclasses import dataclass, field
from functools import cached_property

import numpy as np
from scipy import linalg

from . import fourier
from .geometry import boundary_distance, is_inside, spectral_ds
from .operators import build_double_layer


class NotExterior(ValueError):
    pass


class NoConvergence(RuntimeError):
    pass


class CenterOutside(ValueError):
    pass


class IllConditioned(RuntimeError):
    pass


class SideMismatch(ValueError):
    pass


class CoincidentPoints(ValueError):
    pass


GUARD = 1e-3
SIDES = ("interior", "exterior")


def _check_side(side):
    if side not in SIDES:
        raise ValueError("side must be 'interior' or 'exterior', got %r" % (side,))


# ---------------------------------------------------------------- exterior

def eval_w_ext(grid, z, tol=1e-12, maxiter=100, guard=GUARD):
    """Inverse of the Laurent map at points strictly outside the contour."""
    spec = grid.spec
    z = np.asarray(z, dtype=complex)
    zf = np.atleast_1d(z).ravel()
    finite = np.isfinite(zf)
    bad = finite & (is_inside(grid, np.where(finite, zf, 0)) | (boundary_distance(grid, np.where(finite, zf, 0)) < guard * spec.r))
    if np.any(bad):
        raise NotExterior("point %s is inside or within %.0e r of the contour" % (zf[bad][0], guard))
    w = np.where(finite, (zf - spec.a0) / spec.r, np.inf + 0j)
    zz = zf[finite]
    ww = w[finite]
    scale = np.maximum(1.0, np.abs(zz))
    for _ in range(maxiter):
        res = spec.z(ww) - zz
        if np.all(np.abs(res) <= tol * scale):
            break
        ww = ww - res / spec.dz(ww)
        small = np.abs(ww) < 1.0
        ww[small] = ww[small] / np.abs(ww[small]) * 1.01
    else:
        raise NoConvergence("Newton inversion of the exterior map did not converge")
    if np.any(np.abs(ww) <= 1.0):
        raise NoConvergence("Newton iteration landed inside the unit circle")
    w[finite] = ww
    return w.reshape(z.shape) if z.ndim else w[0]


def exterior_derivative(grid, z):
    """w_ext'(z) = 1 / z'(w)."""
    w = eval_w_ext(grid, z)
    return 1.0 / grid.spec.dz(w)


def _schwarzian_of_inverse(d1, d2, d3):
    # {w; z} = -(w')^2 {z; w} for an inverse pair, with w' = 1/z'
    s_zw = d3 / d1 - 1.5 * (d2 / d1) ** 2
    return -s_zw / d1 ** 2


def schwarzian_exterior_at_w(spec, w):
    return _schwarzian_of_inverse(spec.dz(w, 1), spec.dz(w, 2), spec.dz(w, 3))


# ---------------------------------------------------------------- interior

@dataclass(frozen=True, eq=False)
class InteriorMapData:
    grid: object
    center: complex
    g: np.ndarray  # double-layer density for -log|z - center|
    v: np.ndarray  # boundary harmonic conjugate
    v_center: float
    psi: np.ndarray
    wprime_int: np.ndarray
    diagnostics: dict = field(default_factory=dict)
    oversample: int = 4  # uniform-psi grid has oversample * M points

    @property
    def L(self):
        return self.oversample * self.grid.M

    # -- Cauchy transform F(z) = (1/(pi i)) int g(xi) dxi / (xi - z) and its derivatives
    def _cauchy(self, z, order=0):
        z = np.atleast_1d(np.asarray(z, dtype=complex))
        gr = self.grid
        d = gr.z[None, :] - z[:, None]
        fact = float(np.prod(np.arange(1, order + 1)))
        return fact * (d ** (-(order + 1))) @ (self.g * gr.dz * gr.h) / (np.pi * 1j)

    def _check_interior(self, z):
        z = np.atleast_1d(np.asarray(z, dtype=complex))
        if not np.all(is_inside(self.grid, z)):
            raise SideMismatch("interior map evaluated at a point outside the contour")
        return z

    def w(self, z):
        """w_int(z) for strictly interior z (Cauchy integral, accurate away from the boundary)."""
        z = self._check_interior(z)
        G = self._cauchy(z) - 1j * self.v_center
        return (z - self.center) * np.exp(G)

    def derivatives(self, z):
        """(w, w', w'', w''') at interior points, differentiating the Cauchy integral analytically."""
        z = self._check_interior(z)
        u = z - self.center
        G = self._cauchy(z) - 1j * self.v_center
        G1, G2, G3 = (self._cauchy(z, n) for n in (1, 2, 3))
        e = np.exp(G)
        A = 1 + u * G1
        dA = G1 + u * G2
        ddA = 2 * G2 + u * G3
        B = G1 * A + dA
        dB = G2 * A + G1 * dA + ddA
        return u * e, e * A, e * B, e * (G1 * B + dB)

    def schwarzian(self, z):
        _, d1, d2, d3 = self.derivatives(z)
        return d3 / d1 - 1.5 * (d2 / d1) ** 2

    # -- transfer between the t grid and the uniform psi grid
    @cached_property
    def t_of_uniform_psi(self):
        """Exterior angles tau_k with psi(tau_k) = 2 pi k / M (Newton on the trig interpolant)."""
        M = self.grid.M
        target = fourier.nodes(self.L)
        p = self.psi - self.grid.t
        dp = fourier.ddt(p)
        tau = target - np.mean(p)
        for _ in range(60):
            E = fourier.interp_matrix(tau, M)
            res = tau + E @ p - target
            if np.abs(res).max() < 1e-14:
                break
            tau = tau - res / (1.0 + E @ dp)
        return tau

    @cached_property
    def to_uniform(self):
        return fourier.interp_matrix(self.t_of_uniform_psi, self.grid.M)

    @cached_property
    def from_uniform(self):
        return fourier.interp_matrix(self.psi, self.L)

    def uniform_values(self, f):
        """Node data resampled onto the uniform psi grid."""
        return self.to_uniform @ f

    @cached_property
    def inverse_coeffs(self):
        """Taylor coefficients c_n of z_int(W) = sum_n c_n W^n from samples on |W| = 1."""
        c = np.fft.fft(self.uniform_values(self.grid.z)) / self.L
        c = c[: self.L // 2]
        # drop the roundoff floor: derivatives amplify mode n by n^3
        above = np.nonzero(np.abs(c) > 1e-14 * np.abs(c).max())[0]
        return c[: above[-1] + 1]

    def inverse_map(self, W, order=0):
        c = self.inverse_coeffs
        n = np.arange(c.size)
        W = np.asarray(W, dtype=complex)
        coef = c.copy()
        for j in range(order):
            coef = coef * (n - j)
        pw = n - order
        coef = np.where(pw >= 0, coef, 0)
        return np.sum(coef[None, :] * np.atleast_1d(W)[:, None] ** np.maximum(pw, 0)[None, :], axis=1)

    def boundary_schwarzian(self):
        """{w_int; z} at the nodes.

        h = w_int o z_ext maps e^{it} to e^{i psi(t)}, so
        {h; w} = -({psi; t} + (psi'^2 - 1)/2) / w^2 and {w_int; z} = ({h; w} - {z; w}) / z'(w)^2.
        """
        spec = self.grid.spec
        d1 = 1.0 + fourier.ddt(self.psi - self.grid.t)
        d2 = fourier.ddt(d1)
        d3 = fourier.ddt(d2)
        s_psi = d3 / d1 - 1.5 * (d2 / d1) ** 2
        w = np.exp(1j * self.grid.t)
        s_h = -(s_psi + 0.5 * (d1 ** 2 - 1)) / w ** 2
        zp = spec.dz(w)
        s_zw = spec.dz(w, 3) / zp - 1.5 * (spec.dz(w, 2) / zp) ** 2
        return (s_h - s_zw) / zp ** 2

    def boundary_schwarzian_series(self):
        """Same quantity from the Taylor series of z_int(W); a slower cross-check."""
        W = np.exp(1j * self.psi)
        d1, d2, d3 = (self.inverse_map(W, n) for n in (1, 2, 3))
        return _schwarzian_of_inverse(d1, d2, d3)


def interior_map(grid, center=None, V=None, oversample=4):
    """Build the interior conformal map data with w_int(center) = 0."""
    zc = complex(grid.spec.a0 if center is None else center)
    if not is_inside(grid, zc)[0] or boundary_distance(grid, zc)[0] < GUARD * grid.r:
        raise CenterOutside("center %s is not strictly inside the contour" % zc)
    M, h = grid.M, grid.h
    V = build_double_layer(grid) if V is None else V
    A = np.eye(M) + V.matrix
    u = -np.log(np.abs(grid.z - zc))
    g = linalg.solve(A, u)
    solve_res = float(np.abs(A @ g - u).max())
    if solve_res > 1e-10:
        raise IllConditioned("(I+V)g = u residual %.2e > 1e-10" % solve_res)

    # S_j = int (g(xi) - g(z_j)) dxi / (xi - z_j), smooth integrand
    d = grid.z[None, :] - grid.z[:, None]
    np.fill_diagonal(d, 1.0)
    Q = (g[None, :] - g[:, None]) * (grid.dz * h)[None, :] / d
    np.fill_diagonal(Q, h * fourier.ddt(g))
    S = Q.sum(axis=1)
    v = -S.real / np.pi
    # Re F(z+) = 2g + Im S / pi must reproduce (I+V)g
    plemelj_res = float(np.abs(2 * g + S.imag / np.pi - A @ g).max())

    Fc = np.sum(g * grid.dz * h / (grid.z - zc)) / (np.pi * 1j)
    v_center = float(Fc.imag)

    dc = grid.z - zc
    wp = (np.conj(grid.nu) * dc).real / np.abs(dc) ** 2 + spectral_ds(v, grid)
    psi = np.unwrap(np.angle(dc)) + v - v_center
    psi_cum = psi[0] + fourier.cumulative_integral(wp * grid.sp)

    diagnostics = {
        "solve_residual": solve_res,
        "plemelj_residual": plemelj_res,
        "turning_residual": float(abs(grid.integrate(wp) - 2 * np.pi)),
        "psi_monotone": bool(np.all(np.diff(psi) > 0) and np.all(wp > 0)),
        "psi_cumulative_residual": float(np.abs(psi - psi_cum).max()),
    }
    imap = InteriorMapData(grid, zc, g, v, v_center, psi, wp, diagnostics, oversample)
    diagnostics["psi_tail"] = float(fourier.tail_ratio(imap.uniform_values(grid.z), width=imap.L // 8))
    return imap


# ---------------------------------------------------------------- Schwarzian

def schwarzian(side, grid, z, imap=None):
    """{w; z} = w'''/w' - (3/2)(w''/w')^2 for the map of the given side."""
    _check_side(side)
    z = np.atleast_1d(np.asarray(z, dtype=complex))
    inside = is_inside(grid, z)
    if side == "exterior":
        if np.any(inside):
            raise SideMismatch("exterior Schwarzian requested at an interior point")
        return schwarzian_exterior_at_w(grid.spec, eval_w_ext(grid, z))
    if imap is None:
        raise ValueError("interior Schwarzian requires InteriorMapData")
    if not np.all(inside):
        raise SideMismatch("interior Schwarzian requested at an exterior point")
    return imap.schwarzian(z)


def boundary_schwarzian(side, grid, imap=None):
    """One-sided boundary values of the Schwarzian at the nodes."""
    _check_side(side)
    if side == "exterior":
        return schwarzian_exterior_at_w(grid.spec, np.exp(1j * grid.t))
    if imap is None:
        raise ValueError("interior Schwarzian requires InteriorMapData")
    return imap.boundary_schwarzian()


# ---------------------------------------------------------------- Green's functions

def map_to_disk(side, grid, z, imap=None):
    _check_side(side)
    z = np.atleast_1d(np.asarray(z, dtype=complex))
    if side == "exterior":
        if np.any(is_inside(grid, z[np.isfinite(z)])):
            raise SideMismatch("point is not exterior")
        return eval_w_ext(grid, z)
    if imap is None:
        raise ValueError("interior Green's function requires InteriorMapData")
    return imap.w(z)


def green_function(side, grid, z, zeta, imap=None):
    """G(z, zeta) = log|(w(z) - w(zeta)) / (1 - w(z) conj w(zeta))|, zeta = inf allowed outside."""
    wz = map_to_disk(side, grid, z, imap)
    zeta = np.atleast_1d(np.asarray(zeta, dtype=complex))
    if side == "exterior" and np.all(np.isinf(zeta)):
        out = -np.log(np.abs(wz))
        return out if out.size > 1 else float(out[0])
    wzeta = map_to_disk(side, grid, zeta, imap)
    num = np.abs(wz - wzeta)
    if np.any(num == 0.0):
        raise CoincidentPoints("Green's function at coincident points")
    out = np.log(num / np.abs(1 - wz * np.conj(wzeta)))
    return out if out.size > 1 else float(out[0])


def poisson_kernel_interior(grid, imap, a):
    """Boundary density of harmonic measure at interior a: |w'(xi)|(1-|w(a)|^2)/|w(xi)-w(a)|^2 / (2 pi)."""
    wa = imap.w(a)[0]
    wx = np.exp(1j * imap.psi)
    return imap.wprime_int * (1 - abs(wa) ** 2) / np.abs(wx - wa) ** 2 / (2 * np.pi)


def poisson_kernel_exterior(grid, a):
    wa = eval_w_ext(grid, a)
    wx = np.exp(1j * grid.t)
    return grid.wprime_ext * (abs(wa) ** 2 - 1) / np.abs(wx - wa) ** 2 / (2 * np.pi)


# ---------------------------------------------------------------- harmonic extension

def _series_eval(c, zeta_pos, zeta_neg):
    """sum_k c_k with mode k>0 -> zeta_pos^k, k<0 -> zeta_neg^|k|; Nyquist split evenly."""
    M = c.size
    half = M // 2
    out = np.full(zeta_pos.shape, c[0], dtype=complex)
    pp = np.ones_like(zeta_pos)
    pn = np.ones_like(zeta_neg)
    for k in range(1, half):
        pp = pp * zeta_pos
        pn = pn * zeta_neg
        out = out + c[k] * pp + c[M - k] * pn
    out = out + 0.5 * c[half] * (pp * zeta_pos + pn * zeta_neg)
    return out


@dataclass(frozen=True, eq=False)
class HarmonicExtension:
    side: str
    grid: object
    data: np.ndarray
    coeffs: np.ndarray  # Fourier coefficients in t (exterior) or uniform psi (interior)
    imap: object = None

    @property
    def at_infinity(self):
        if self.side != "exterior":
            raise SideMismatch("f^H(infinity) is defined for the exterior extension")
        return float(self.coeffs[0].real)

    def __call__(self, z):
        z = np.atleast_1d(np.asarray(z, dtype=complex))
        if self.side == "exterior":
            out = np.empty(z.shape, dtype=complex)
            inf = np.isinf(z)
            out[inf] = self.coeffs[0]
            if np.any(~inf):
                w = eval_w_ext(self.grid, z[~inf])
                out[~inf] = _series_eval(self.coeffs, 1.0 / np.conj(w), 1.0 / w)
        else:
            W = self.imap.w(z)
            out = _series_eval(self.coeffs, W, np.conj(W))
        return out.real if np.isrealobj(self.data) else out

    def boundary_values(self):
        """Series evaluated on the unit circle at the node images."""
        if self.side == "exterior":
            W = np.exp(1j * self.grid.t)
        else:
            W = np.exp(1j * self.imap.psi)
        out = _series_eval(self.coeffs, W, np.conj(W))
        return out.real if np.isrealobj(self.data) else out

    def poisson(self, z):
        """Direct Poisson-integral quadrature (cross-check of the series)."""
        vals = []
        for a in np.atleast_1d(z):
            if self.side == "exterior":
                ker = poisson_kernel_exterior(self.grid, a)
            else:
                ker = poisson_kernel_interior(self.grid, self.imap, a)
            vals.append(self.grid.integrate(ker * self.data))
        return np.array(vals)


def harmonic_extend(grid, f, side, imap=None):
    _check_side(side)
    f = np.asarray(f)
    if side == "exterior":
        c = np.fft.fft(f) / grid.M
    else:
        if imap is None:
            raise ValueError("interior harmonic extension requires InteriorMapData")
        c = np.fft.fft(imap.uniform_values(f)) / imap.L
    return HarmonicExtension(side, grid, f, c, imap)

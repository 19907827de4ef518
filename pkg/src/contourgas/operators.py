"""Nystrom discretizations of the boundary operators on a ContourGrid.

Every operator is an M x M matrix acting on node values. Kernels are
integrated against the arclength measure with the periodic trapezoid rule,
except the log kernel of the single layer, which uses Kress-type splitting.
"""
from dataclasses import dataclass
from functools import cached_property

import numpy as np
from scipy import linalg

from . import fourier


class ComplexSpectrum(ValueError):
    pass


class SolveFailure(RuntimeError):
    pass


@dataclass(frozen=True, eq=False)
class BoundaryOperator:
    """(A f)_i = sum_j kernel_ij f_j w_j with arclength weights w_j."""
    kernel: np.ndarray
    weights: np.ndarray
    name: str = ""

    @cached_property
    def matrix(self):
        return self.kernel * self.weights[None, :]

    def __call__(self, f):
        return self.matrix @ f

    def __matmul__(self, other):
        other = other.matrix if isinstance(other, BoundaryOperator) else other
        return self.matrix @ other

    @classmethod
    def from_matrix(cls, A, weights, name=""):
        return cls(A / weights[None, :], weights, name)


def _pair_geometry(grid):
    d = grid.z[None, :] - grid.z[:, None]  # xi_j - z_i
    np.fill_diagonal(d, 1.0)
    return d


def build_double_layer(grid):
    """Neumann-Poincare operator with kernel (1/pi) d/dn_xi log|xi - z|."""
    d = _pair_geometry(grid)
    A = (d * np.conj(grid.nu)[None, :]).real / np.abs(d) ** 2 / np.pi
    np.fill_diagonal(A, grid.kappa / (2 * np.pi))
    return BoundaryOperator(A, grid.weights, "V")


def build_double_layer_adjoint(grid):
    """Kernel (1/pi) d/dn_z log|xi - z|."""
    d = _pair_geometry(grid)
    A = (-d * np.conj(grid.nu)[:, None]).real / np.abs(d) ** 2 / np.pi
    np.fill_diagonal(A, grid.kappa / (2 * np.pi))
    return BoundaryOperator(A, grid.weights, "Vdag")


def _kress_log_circulant(M):
    # int_0^{2pi} (1/2) log(4 sin^2((t-s)/2)) e^{iks} ds = -(pi/|k|) e^{ikt}
    k = np.abs(fourier.wavenumbers(M))
    lam = np.zeros(M)
    lam[k > 0] = -np.pi / k[k > 0]
    col = np.fft.ifft(lam).real
    idx = (np.arange(M)[:, None] - np.arange(M)[None, :]) % M
    return col[idx]


def build_single_layer(grid):
    """Simple layer operator with kernel -(1/2pi) log|z - xi|."""
    M, t = grid.M, grid.t
    dt = t[:, None] - t[None, :]
    d = np.abs(grid.z[:, None] - grid.z[None, :])
    np.fill_diagonal(d, 1.0)
    s4 = 4 * np.sin(0.5 * dt) ** 2
    np.fill_diagonal(s4, 1.0)
    smooth = np.log(d) - 0.5 * np.log(s4)
    np.fill_diagonal(smooth, np.log(grid.sp))
    A = _kress_log_circulant(M) * grid.sp[None, :] + grid.h * smooth * grid.sp[None, :]
    return BoundaryOperator.from_matrix(-A / (2 * np.pi), grid.weights, "K")


def dtn_exterior_matrix(grid):
    return -grid.wprime_ext[:, None] * fourier.abs_k_matrix(grid.M)


def dtn_interior_matrix(grid, imap):
    lam_E = fourier.abs_k(imap.to_uniform.T).T
    return imap.wprime_int[:, None] * (imap.from_uniform @ lam_E)


def dtn_exterior(grid, f):
    return -grid.wprime_ext * fourier.abs_k(f)


def dtn_interior(grid, imap, f):
    return imap.wprime_int * (imap.from_uniform @ fourier.abs_k(imap.to_uniform @ f))


def neumann_jump_fallback_matrix(grid, V=None):
    """N = -2 N^- (I + V)^{-1}."""
    V = build_double_layer(grid) if V is None else V
    IV = np.eye(grid.M) + V.matrix
    try:
        lu = linalg.lu_factor(IV)
    except (linalg.LinAlgError, ValueError) as exc:
        raise SolveFailure(str(exc)) from exc
    # X (I+V) = -2N^-  <=>  (I+V)^T X^T = -2 (N^-)^T
    X = linalg.lu_solve(lu, -2.0 * dtn_exterior_matrix(grid).T, trans=1).T
    if not np.all(np.isfinite(X)):
        raise SolveFailure("non-finite Neumann jump matrix")
    return X


def neumann_jump(grid, f, imap=None):
    if imap is not None:
        return dtn_interior(grid, imap, f) - dtn_exterior(grid, f)
    return neumann_jump_fallback_matrix(grid) @ f


@dataclass(frozen=True)
class Spectrum:
    eigenvalues: np.ndarray  # sorted descending
    max_imag: float
    pair_residuals: np.ndarray  # for each eigenvalue, min_j |lambda_i + lambda_j| over non-unit ones

    @property
    def unit_index(self):
        return int(np.argmin(np.abs(self.eigenvalues - 1.0)))


def fredholm_spectrum(V, imag_tol=1e-8):
    lam = linalg.eigvals(V.matrix if isinstance(V, BoundaryOperator) else V)
    max_imag = float(np.abs(lam.imag).max())
    if max_imag > imag_tol:
        raise ComplexSpectrum("max |Im lambda| = %.2e exceeds %.0e; refine the grid" % (max_imag, imag_tol))
    lam = np.sort(lam.real)[::-1]
    iu = int(np.argmin(np.abs(lam - 1.0)))
    rest = np.delete(lam, iu)
    pair = np.empty_like(lam)
    for i, x in enumerate(lam):
        if i == iu:
            pair[i] = 0.0
            continue
        pair[i] = np.min(np.abs(rest + x))
    return Spectrum(lam, max_imag, pair)


def fredholm_determinant(spectrum, drop_tol=1e-14):
    """det(I + V) as the product over non-negligible eigenvalues."""
    lam = spectrum.eigenvalues
    keep = np.abs(lam) > drop_tol
    return float(np.prod(1.0 + lam[keep]))


def log_fredholm_determinant(spectrum, drop_tol=1e-14):
    lam = spectrum.eigenvalues
    keep = np.abs(lam) > drop_tol
    return float(np.sum(np.log1p(lam[keep])))


def detprime_one_minus(spectrum, drop_tol=1e-14):
    """det'(I - V): the unit eigenvalue of V is removed."""
    lam = np.delete(spectrum.eigenvalues, spectrum.unit_index)
    keep = np.abs(lam) > drop_tol
    return float(np.prod(1.0 - lam[keep]))


def detprime_neumann(grid, spectrum=None):
    """log det' N = -log det(I + V) + log P."""
    if spectrum is None:
        spectrum = fredholm_spectrum(build_double_layer(grid))
    return -log_fredholm_determinant(spectrum) + np.log(grid.P)


class OperatorSet:
    """Lazily built operator matrices sharing one grid (and optional interior map)."""

    def __init__(self, grid, imap=None):
        self.grid = grid
        self.imap = imap

    @cached_property
    def V(self):
        return build_double_layer(self.grid)

    @cached_property
    def Vdag(self):
        return build_double_layer_adjoint(self.grid)

    @cached_property
    def K(self):
        return build_single_layer(self.grid)

    @cached_property
    def Nminus(self):
        return dtn_exterior_matrix(self.grid)

    @cached_property
    def Nplus(self):
        if self.imap is None:
            # N (I - V) = 2 N^+
            return 0.5 * self.N_fallback @ (np.eye(self.grid.M) - self.V.matrix)
        return dtn_interior_matrix(self.grid, self.imap)

    @cached_property
    def N_fallback(self):
        return neumann_jump_fallback_matrix(self.grid, self.V)

    @cached_property
    def N(self):
        if self.imap is None:
            return self.N_fallback
        return self.Nplus - self.Nminus

    @cached_property
    def spectrum(self):
        return fredholm_spectrum(self.V)

    @cached_property
    def log_det_IV(self):
        return log_fredholm_determinant(self.spectrum)

    @cached_property
    def logdetprime_N(self):
        return -self.log_det_IV + np.log(self.grid.P)


def random_band_limited(M, count, kmax=8, seed=0):
    """count real trigonometric polynomials of degree <= kmax sampled on M nodes (columns)."""
    rng = np.random.default_rng(seed)
    t = fourier.nodes(M)
    k = np.arange(1, kmax + 1)
    out = rng.normal(size=(1, count)) + np.zeros((M, count))
    a = rng.normal(size=(kmax, count)) / k[:, None]
    b = rng.normal(size=(kmax, count)) / k[:, None]
    out += np.cos(np.outer(t, k)) @ a + np.sin(np.outer(t, k)) @ b
    return out


def identity_residuals(ops, F):
    """Max residual of each operator identity over the field columns of F.

    Residuals are scaled by the largest field value, so they are relative.
    """
    g = ops.grid
    I = np.eye(g.M)
    N, Np, Nm = ops.N, ops.Nplus, ops.Nminus
    K, V, Vd = ops.K.matrix, ops.V.matrix, ops.Vdag.matrix
    wp = g.wprime_ext
    scale = np.abs(F).max()
    mean_f = g.weights @ F
    mean_wf = g.weights @ (wp[:, None] * F)

    def rel(X):
        return float(np.abs(X).max() / scale)

    KF = K @ F
    return {
        "NK_inverse": rel(N @ KF - (F - np.outer(wp, mean_f) / (2 * np.pi))),
        "KN_inverse": rel(K @ (N @ F) - (F - mean_wf[None, :] / (2 * np.pi))),
        "K_of_wprime": float(np.abs(K @ wp - np.log(1 / g.r)).max()),
        "N_one_plus_V": rel((N @ (I + V) + 2 * Nm) @ F),
        "N_one_minus_V": rel((N @ (I - V) - 2 * Np) @ F),
        "NV_adjoint": rel((N @ V - Vd @ N) @ F),
        "single_layer_interior_flux": rel(-2 * Np @ KF - (-F + Vd @ F)),
        # outside, K f = (bounded extension) - (Q / 2 pi) log|w| with Q = oint f ds
        "single_layer_exterior_flux": rel(-2 * Nm @ KF + np.outer(wp, mean_f) / np.pi - (F + Vd @ F)),
        "det_one_plus_minus_V": abs(log_fredholm_determinant(ops.spectrum)
                                    - np.log(2 * detprime_one_minus(ops.spectrum))),
        "dtn_K_symmetry": rel((Np @ K @ Nm - Nm @ K @ Np) @ F),
    }

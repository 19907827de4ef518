"""Contours given by a normalized exterior conformal map.

A contour is the image of |w| = 1 under

    z(w) = r w + a0 + sum_{k>=1} a_k w^{-k},

so the exterior angle t = arg w is the grid parameter everywhere.
"""
from dataclasses import dataclass, field

import numpy as np
from shapely.geometry import LinearRing

from . import fourier


class NonUnivalent(ValueError):
    pass


class GridTooCoarse(ValueError):
    pass


def _as_complex(x):
    if isinstance(x, (list, tuple)):
        return complex(x[0], x[1])
    return complex(x)


@dataclass(frozen=True)
class LaurentContour:
    r: float
    a0: complex = 0j
    coeffs: tuple = ()

    def __post_init__(self):
        object.__setattr__(self, "r", float(self.r))
        object.__setattr__(self, "a0", complex(self.a0))
        object.__setattr__(self, "coeffs", tuple(complex(c) for c in self.coeffs))

    @classmethod
    def from_json(cls, d):
        return cls(
            r=d["r"],
            a0=_as_complex(d.get("a0", 0.0)),
            coeffs=tuple(_as_complex(c) for c in d.get("coeffs", ())),
        )

    def to_json(self):
        return {
            "r": self.r,
            "a0": [self.a0.real, self.a0.imag],
            "coeffs": [[c.real, c.imag] for c in self.coeffs],
        }

    @property
    def K(self):
        return len(self.coeffs)

    def z(self, w):
        w = np.asarray(w, dtype=complex)
        out = self.r * w + self.a0
        for k, a in enumerate(self.coeffs, start=1):
            out = out + a * w ** (-k)
        return out

    def dz(self, w, order=1):
        """order-th derivative of z(w) with respect to w."""
        w = np.asarray(w, dtype=complex)
        if order == 1:
            out = np.full_like(w, self.r)
        else:
            out = np.zeros_like(w)
        for k, a in enumerate(self.coeffs, start=1):
            # d^n/dw^n w^{-k} = (-1)^n k (k+1)...(k+n-1) w^{-k-n}
            c = (-1) ** order * np.prod(np.arange(k, k + order))
            out = out + c * a * w ** (-k - order)
        return out

    def point(self, t):
        return self.z(np.exp(1j * np.asarray(t, dtype=float)))

    def speed(self, t):
        return np.abs(self.dz(np.exp(1j * np.asarray(t, dtype=float))))

    def scaled(self, c):
        return LaurentContour(c * self.r, c * self.a0, tuple(c * a for a in self.coeffs))

    def translated(self, b):
        return LaurentContour(self.r, self.a0 + b, self.coeffs)

    def rotated(self, theta):
        # z -> e^{i theta} z, reparametrized w -> e^{-i theta} w keeps r real
        e = np.exp(1j * theta)
        return LaurentContour(
            self.r, e * self.a0,
            tuple(a * e ** (k + 1) for k, a in enumerate(self.coeffs, start=1)),
        )

    def with_coeff(self, k, delta):
        """Shift a_k by delta (k >= 1); k == 0 shifts a0."""
        if k == 0:
            return LaurentContour(self.r, self.a0 + delta, self.coeffs)
        cs = list(self.coeffs) + [0j] * max(0, k - self.K)
        cs[k - 1] += delta
        return LaurentContour(self.r, self.a0, tuple(cs))


@dataclass(frozen=True)
class Diagnosis:
    ok: bool
    reason: str = ""

    def __bool__(self):
        return self.ok


def check_univalence(spec, M=1024):
    """Diagnose whether z(w) is univalent on |w| >= 1."""
    if not spec.r > 0:
        return Diagnosis(False, "r must be positive")
    if spec.K:
        # w^{K+1} z'(w) is a degree K+1 polynomial; all its roots must lie in |w| < 1.
        poly = [spec.r, 0.0] + [-k * a for k, a in enumerate(spec.coeffs, start=1)]
        roots = np.roots(poly)
        bad = roots[np.abs(roots) >= 1.0 - 1e-12]
        if bad.size:
            return Diagnosis(False, "z'(w) vanishes at |w| = %.6g >= 1" % np.abs(bad).max())
    t = fourier.nodes(M)
    w = np.exp(1j * t)
    dz = spec.dz(w)
    if np.abs(dz).min() == 0.0:
        return Diagnosis(False, "z'(w) vanishes on |w| = 1")
    # argument principle: z'(e^{it}) must not wind around 0
    winding = np.sum(np.angle(np.roll(dz, -1) / dz)) / (2 * np.pi)
    if abs(winding) > 0.5:
        return Diagnosis(False, "z'(w) has %d zeros in |w| > 1" % round(-winding))
    zs = spec.z(w)
    ring = LinearRing(np.column_stack([zs.real, zs.imag]))
    if not ring.is_simple:
        return Diagnosis(False, "boundary curve self-intersects")
    d = np.abs(zs[:, None] - zs[None, :])
    np.fill_diagonal(d, np.inf)
    if d.min() <= 0.0:
        return Diagnosis(False, "coincident boundary nodes")
    return Diagnosis(True)


@dataclass(frozen=True, eq=False)
class ContourGrid:
    spec: LaurentContour
    M: int
    t: np.ndarray
    z: np.ndarray
    dz: np.ndarray
    nu: np.ndarray
    kappa: np.ndarray
    sp: np.ndarray
    P: float
    wprime_ext: np.ndarray
    curvature_residual: float = field(default=0.0)

    @property
    def h(self):
        return 2 * np.pi / self.M

    @property
    def weights(self):
        """Arclength quadrature weights (2 pi / M) sp_j."""
        return self.h * self.sp

    def integrate(self, f):
        return np.sum(np.asarray(f) * self.weights, axis=-1)

    @property
    def r(self):
        return self.spec.r


def build_contour(spec, M, check=True):
    if M % 2 or M < 8:
        raise ValueError("M must be even and >= 8")
    if check:
        diag = check_univalence(spec)
        if not diag:
            raise NonUnivalent(diag.reason)
    t = fourier.nodes(M)
    w = np.exp(1j * t)
    zp = spec.dz(w)
    sp = np.abs(zp)
    tail = fourier.tail_ratio(sp)
    if tail > 1e-12:
        raise GridTooCoarse("spectral tail of |z'| is %.2e of max at M=%d" % (tail, M))
    dz = 1j * w * zp
    nu = -1j * dz / sp
    kc = 1j * nu * fourier.ddt(np.conj(nu)) / sp
    resid = float(np.abs(kc.imag).max())
    if resid > 1e-8:
        raise GridTooCoarse("curvature imaginary residue %.2e" % resid)
    P = float(np.sum(sp) * 2 * np.pi / M)
    return ContourGrid(
        spec=spec, M=M, t=t, z=spec.z(w), dz=dz, nu=nu, kappa=kc.real, sp=sp, P=P,
        wprime_ext=1.0 / sp, curvature_residual=resid,
    )


def spectral_ds(f, grid):
    """Arclength derivative (df/dt) / sp."""
    return fourier.ddt(f) / grid.sp


def winding_number(grid, z):
    """Winding number of the node polygon around each point of z."""
    z = np.atleast_1d(np.asarray(z, dtype=complex))
    d = grid.z[None, :] - z[:, None]
    ang = np.angle(np.roll(d, -1, axis=1) / d)
    return np.rint(ang.sum(axis=1) / (2 * np.pi)).astype(int)


def is_inside(grid, z):
    return winding_number(grid, z) != 0


def boundary_distance(grid, z):
    z = np.atleast_1d(np.asarray(z, dtype=complex))
    return np.abs(z[:, None] - grid.z[None, :]).min(axis=1)


# Reference contours used by the CLI configs, tests and scripts.
CIRCLE = LaurentContour(1.0)
ELLIPSE_02 = LaurentContour(1.0, 0j, (0.2,))
BLOB = LaurentContour(1.0, 0j, (0.1, 0.05 + 0.05j, 0.04))


def ellipse(q, r=1.0):
    return LaurentContour(r, 0j, (q,))

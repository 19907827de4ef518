"""Boundary formulas for Laplacian determinants, the surgery identity and a
finite-difference harness for contour variations.

Determinants are relative to the unit-disk baseline: the additive
shape-independent constants are dropped.
"""
from dataclasses import dataclass

import numpy as np

from . import fourier
from .geometry import LaurentContour, NonUnivalent, build_contour, check_univalence
from .maps import boundary_schwarzian, green_function, interior_map, map_to_disk
from .operators import OperatorSet


class DeformationBreaksUnivalence(ValueError):
    pass


def logdet_laplacian_interior(imap, grid=None):
    """-(1/12 pi) int_{|w|=1} (phi d_n phi + 2 phi) |dw| with phi = log|z_int'(w)| = -log|w_int'|."""
    phi = imap.uniform_values(-np.log(imap.wprime_int))
    return float(-np.sum(phi * fourier.abs_k(phi) + 2 * phi) / (6.0 * phi.size))


def logdet_laplacian_exterior(grid):
    """(1/12 pi) int_{|w|=1} (phi d_n phi + 2 phi) |dw| with phi = log|z'(w)|, d_n = -|k| from outside."""
    phi = np.log(grid.sp)
    return float(np.sum(-phi * fourier.abs_k(phi) + 2 * phi) / (6.0 * grid.M))


@dataclass(frozen=True)
class DetReport:
    logdet_int_rel: float
    logdet_ext_rel: float
    logdetprimeN: float
    log_P: float
    circle_value: float
    surgery_residual: float

    def to_json(self):
        return dict(self.__dict__)


def _surgery_combination(grid, imap, ops):
    a = logdet_laplacian_interior(imap, grid)
    b = logdet_laplacian_exterior(grid)
    return a, b, ops.logdetprime_N, np.log(grid.P)


def circle_surgery_value(r):
    g = build_contour(LaurentContour(r), 16)
    ops = OperatorSet(g)
    a, b, c, d = _surgery_combination(g, interior_map(g, V=ops.V), ops)
    return a + b + c - d


def surgery_check(grid, imap=None, ops=None):
    if imap is None:
        ops = ops or OperatorSet(grid)
        imap = interior_map(grid, V=ops.V)
    ops = ops or OperatorSet(grid, imap)
    a, b, c, d = _surgery_combination(grid, imap, ops)
    base = circle_surgery_value(grid.r)
    return DetReport(a, b, c, d, base, a + b + c - d - base)


# ---------------------------------------------------------------- deformations

@dataclass(frozen=True)
class DeformationDirection:
    """delta z(w) = e^{i phase} w^{-mode}; mode == 'dilation' means delta z = w."""
    mode: object = "dilation"
    phase: float = 0.0

    def delta_z(self, w):
        if self.mode == "dilation":
            return np.asarray(w, dtype=complex)
        return np.exp(1j * self.phase) * np.asarray(w, dtype=complex) ** (-int(self.mode))

    def delta_n(self, grid):
        """Normal displacement per unit amplitude at the nodes."""
        return (np.conj(grid.nu) * self.delta_z(np.exp(1j * grid.t))).real

    def apply(self, spec, eps):
        if self.mode == "dilation":
            out = LaurentContour(spec.r + eps, spec.a0, spec.coeffs)
        else:
            out = spec.with_coeff(int(self.mode), eps * np.exp(1j * self.phase))
        diag = check_univalence(out)
        if not diag:
            raise DeformationBreaksUnivalence(diag.reason)
        return out


QUANTITIES = ("logr", "logdet_ext", "logdet_int", "detIV", "green")


@dataclass(frozen=True)
class VariationReport:
    quantity: str
    eps: np.ndarray
    fd_value: np.ndarray
    predicted: float
    mismatch: np.ndarray
    slope: float

    def rows(self):
        return [(float(e), float(f), self.predicted, float(m))
                for e, f, m in zip(self.eps, self.fd_value, self.mismatch)]


def _evaluate(quantity, spec, M, points, side):
    g = build_contour(spec, M)
    if quantity == "logr":
        return np.log(spec.r)
    if quantity == "logdet_ext":
        return logdet_laplacian_exterior(g)
    ops = OperatorSet(g)
    if quantity == "detIV":
        return ops.log_det_IV
    imap = interior_map(g, V=ops.V)
    if quantity == "logdet_int":
        return logdet_laplacian_interior(imap, g)
    if quantity == "green":
        a, b = points
        return green_function(side, g, a, b, imap)
    raise ValueError("unknown quantity %r" % quantity)


def poisson_normal_derivative(side, grid, a, imap=None):
    """d_n G(a, xi) at the nodes, outward normal of the contour."""
    wa = map_to_disk(side, grid, a, imap)[0]
    if side == "interior":
        wx = np.exp(1j * imap.psi)
        return imap.wprime_int * (1 - abs(wa) ** 2) / np.abs(wx - wa) ** 2
    wx = np.exp(1j * grid.t)
    return -grid.wprime_ext * (abs(wa) ** 2 - 1) / np.abs(wx - wa) ** 2


def predict_variation(quantity, grid, direction, points=None, side="interior"):
    """Boundary-integral first variation per unit amplitude."""
    dn = direction.delta_n(grid)
    nu2 = grid.nu ** 2
    if quantity == "logr":
        return grid.integrate(grid.wprime_ext ** 2 * dn) / (2 * np.pi)
    if quantity == "logdet_ext":
        S = boundary_schwarzian("exterior", grid)
        return -grid.integrate(((nu2 * S).real - grid.kappa ** 2) * dn) / (6 * np.pi)
    imap = interior_map(grid)
    if quantity == "logdet_int":
        S = boundary_schwarzian("interior", grid, imap)
        return grid.integrate(((nu2 * S).real - grid.kappa ** 2) * dn) / (6 * np.pi)
    if quantity == "detIV":
        # log det(I+V) = logdet_int + logdet_ext + const
        S = boundary_schwarzian("interior", grid, imap) - boundary_schwarzian("exterior", grid)
        return grid.integrate((nu2 * S).real * dn) / (6 * np.pi)
    if quantity == "green":
        a, b = points
        ga = poisson_normal_derivative(side, grid, a, imap)
        gb = poisson_normal_derivative(side, grid, b, imap)
        sign = -1.0 if side == "interior" else 1.0
        return sign * grid.integrate(ga * gb * dn) / (2 * np.pi)
    raise ValueError("unknown quantity %r" % quantity)


def variation_harness(spec, direction, quantity, eps=(1e-2, 5e-3, 2.5e-3), M=256,
                      points=None, side="interior"):
    """Central finite differences (Q(+e) - Q(-e)) / 2e against the variational prediction."""
    if quantity not in QUANTITIES:
        raise ValueError("quantity must be one of %s" % (QUANTITIES,))
    grid = build_contour(spec, M)
    pred = float(predict_variation(quantity, grid, direction, points, side))
    eps = np.asarray(eps, dtype=float)
    fd = []
    for e in eps:
        try:
            plus = _evaluate(quantity, direction.apply(spec, e), M, points, side)
            minus = _evaluate(quantity, direction.apply(spec, -e), M, points, side)
        except NonUnivalent as exc:
            raise DeformationBreaksUnivalence(str(exc)) from exc
        fd.append((plus - minus) / (2 * e))
    fd = np.array(fd)
    mismatch = np.abs(fd - pred)
    with np.errstate(divide="ignore"):
        slope = float(np.polyfit(np.log(eps), np.log(mismatch), 1)[0]) if np.all(mismatch > 0) else np.nan
    return VariationReport(quantity, eps, fd, pred, mismatch, slope)

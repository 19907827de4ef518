"""Leading-order field correlators and vertex-operator means.

phi(z) = -beta hbar sum_j log(z - z_j), varphi = phi + conj(phi). Vertex operators are
V_alpha(z) = prod_j (z - z_j)^alpha and V_alpha(z, zbar) = prod_j |z - z_j|^{2 alpha}.
Only exterior points are covered for the vertex means.
"""
from dataclasses import dataclass

import numpy as np

from .geometry import boundary_distance, is_inside
from .maps import (GUARD, CoincidentPoints, NotExterior, SideMismatch, eval_w_ext,
                   green_function, schwarzian)


def _side(grid, z):
    return "interior" if is_inside(grid, z)[0] else "exterior"


def phi_pair_connected(grid, beta, z, zeta, imap=None):
    """<varphi(z) varphi(zeta)>_c / (2 beta hbar^2) at leading order."""
    z, zeta = complex(z), complex(zeta)
    if z == zeta:
        raise CoincidentPoints("phi_pair_connected needs distinct points")
    for p in (z, zeta):
        if boundary_distance(grid, p)[0] < GUARD * grid.r:
            raise NotExterior("probe %s lies on the contour" % p)
    sz, szeta = _side(grid, z), _side(grid, zeta)
    logd = np.log(abs(z - zeta) / grid.r)
    if sz == szeta == "exterior":
        # G(z, inf) = -log|w(z)|
        return (green_function("exterior", grid, z, zeta)
                + np.log(abs(eval_w_ext(grid, z))) + np.log(abs(eval_w_ext(grid, zeta))) - logd)
    if sz == szeta == "interior":
        return green_function("interior", grid, z, zeta, imap) - logd
    outer = zeta if szeta == "exterior" else z
    return np.log(abs(eval_w_ext(grid, outer))) - logd


def dphi_pair_connected(grid, beta, z, zeta, imap=None):
    """<d varphi(z) d varphi(zeta)>_c / (beta hbar^2) at leading order."""
    z, zeta = complex(z), complex(zeta)
    sz, szeta = _side(grid, z), _side(grid, zeta)
    base = -1.0 / (z - zeta) ** 2
    if sz != szeta:
        return base
    if sz == "exterior":
        wz, wzeta = eval_w_ext(grid, z), eval_w_ext(grid, zeta)
        dz, dzeta = 1 / grid.spec.dz(wz), 1 / grid.spec.dz(wzeta)
    else:
        wz, dz = (x[0] for x in imap.derivatives(z)[:2])
        wzeta, dzeta = (x[0] for x in imap.derivatives(zeta)[:2])
    return dz * dzeta / (wz - wzeta) ** 2 + base


def dphi_sq_connected(grid, beta, z, imap=None):
    """<(d varphi(z))^2>_c / (beta hbar^2) = {w; z} / 6 for the side containing z."""
    return complex(schwarzian(_side(grid, z), grid, z, imap)[0]) / 6.0


def _exterior_w(grid, z):
    z = np.atleast_1d(np.asarray(z, dtype=complex))
    if np.any(is_inside(grid, z)):
        raise SideMismatch("vertex formulas are given for exterior points only")
    w = eval_w_ext(grid, z)
    return w, 1.0 / grid.spec.dz(w)


def vertex_mean(grid, beta, z, alpha, N, kind="holomorphic"):
    r = grid.r
    w, wp = _exterior_w(grid, z)
    e = alpha / beta * (alpha + 1 - beta)
    if kind == "holomorphic":
        # principal branch, cut along arg w = pi
        out = np.exp(alpha * N * np.log(r * w) + 0.5 * e * np.log(r * wp))
    elif kind == "absolute":
        aw = np.abs(w)
        out = aw ** 0 * np.exp(2 * alpha * N * np.log(r * aw) + e * np.log(np.abs(r * wp))
                               - alpha ** 2 / beta * np.log(1 - aw ** -2))
    else:
        raise ValueError("kind must be 'holomorphic' or 'absolute'")
    return out if out.size > 1 else out[0]


@dataclass(frozen=True)
class ProbeSet:
    points: tuple
    alphas: tuple
    N: int

    def __post_init__(self):
        pts = np.asarray(self.points, dtype=complex)
        if len(self.points) != len(self.alphas):
            raise ValueError("points and alphas differ in length")
        d = np.abs(pts[:, None] - pts[None, :]) + np.eye(len(pts))
        if np.any(d == 0):
            raise CoincidentPoints("probe points must be pairwise distinct")

    def sides(self, grid):
        return tuple(_side(grid, p) for p in self.points)


def vertex_product(grid, beta, probes, kind="holomorphic"):
    pts = np.asarray(probes.points, dtype=complex)
    al = np.asarray(probes.alphas, dtype=float)
    w, _ = _exterior_w(grid, pts)
    r = grid.r
    log_out = 0j
    for p, a in zip(pts, al):
        v = vertex_mean(grid, beta, p, a, probes.N, kind)
        log_out += np.log(v)
    m = len(pts)
    for p in range(m):
        for q in range(p + 1, m):
            ratio = (r * w[p] - r * w[q]) / (pts[p] - pts[q])
            if kind == "holomorphic":
                log_out += al[p] * al[q] / beta * np.log(ratio)
            else:
                denom = abs(1 - 1 / (w[p] * np.conj(w[q])))
                log_out += 2 * al[p] * al[q] / beta * np.log(abs(ratio) / denom)
    out = np.exp(log_out)
    return float(out.real) if kind == "absolute" else complex(out)

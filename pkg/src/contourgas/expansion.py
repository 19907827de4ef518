"""Loop-equation iteration: densities rho_0, rho_1, rho_2, the fields phi_0, phi_1
and the free-energy coefficients F_0, F_1, F_2 = F_2^cl + F_2^q.

log Z_N = log N! + (beta - 1) N log N + F_0 N^2 + F_1 N + F_2 + O(1/N).
"""
import math
from dataclasses import dataclass, field

import numpy as np
from scipy.special import gammaln

from . import fourier
from .maps import eval_w_ext, interior_map
from .operators import OperatorSet, detprime_one_minus, log_fredholm_determinant


# ---------------------------------------------------------------- potentials

@dataclass(frozen=True)
class Zero:
    kind = "zero"

    def at(self, spec, t, beta):
        return np.zeros_like(np.asarray(t, dtype=float))

    def to_json(self):
        return {"kind": "zero"}


@dataclass(frozen=True)
class FourierT:
    """W(t) = const + sum_k cos[k-1] cos(k t) + sin[k-1] sin(k t), t the exterior angle."""
    cos: tuple = ()
    sin: tuple = ()
    const: float = 0.0
    kind = "fourier"

    @property
    def kmax(self):
        return max(len(self.cos), len(self.sin))

    def at(self, spec, t, beta):
        t = np.asarray(t, dtype=float)
        out = np.full_like(t, self.const)
        for k, a in enumerate(self.cos, start=1):
            out = out + a * np.cos(k * t)
        for k, b in enumerate(self.sin, start=1):
            out = out + b * np.sin(k * t)
        return out

    def to_json(self):
        return {"kind": "fourier", "cos": list(self.cos), "sin": list(self.sin), "const": self.const}


@dataclass(frozen=True)
class WPrimeMode:
    """W = (1 - beta) log|w'_ext|."""
    kind = "wprime"

    def at(self, spec, t, beta):
        return (beta - 1.0) * np.log(spec.speed(t))

    def to_json(self):
        return {"kind": "wprime"}


def potential_from_json(d):
    if d is None:
        return Zero()
    kind = d.get("kind", "zero")
    if kind == "zero":
        return Zero()
    if kind == "fourier":
        return FourierT(tuple(d.get("cos", ())), tuple(d.get("sin", ())), float(d.get("const", 0.0)))
    if kind == "wprime":
        return WPrimeMode()
    raise ValueError("unknown potential kind %r" % kind)


def potential_values(W, grid, beta):
    W = Zero() if W is None else W
    if isinstance(W, FourierT) and W.kmax >= grid.M // 4:
        raise ValueError("potential is not band-limited below M/4")
    return W.at(grid.spec, grid.t, beta)


# ---------------------------------------------------------------- constants

def log_gamma(x):
    return float(gammaln(x))


def c1(beta):
    return (beta - 1) * math.log(2 * math.pi * beta / math.e) + math.log(2 * math.pi) - log_gamma(beta)


def c2(beta):
    return 0.5 * math.log(2 * beta)


# ---------------------------------------------------------------- densities

def rho0(grid):
    return grid.wprime_ext / (2 * np.pi)


def _operator_set(grid, imap=None, ops=None):
    if ops is not None:
        return ops
    if imap is None:
        imap = interior_map(grid)
    return OperatorSet(grid, imap)


def density_corrections(grid, beta, W=None, imap=None, ops=None, route="primary"):
    ops = _operator_set(grid, imap, ops)
    N = ops.N if route == "primary" else ops.N_fallback
    Wv = potential_values(W, grid, beta)
    r0 = rho0(grid)
    a = (beta - 1) / (4 * np.pi * beta)
    b = 1 / (4 * np.pi * beta)
    NlogR = N @ np.log(r0)
    NW = N @ Wv
    rho1 = a * NlogR + b * NW
    rho2 = a * a * (N @ (NlogR / r0)) + (beta - 1) * b * b * (N @ (NW / r0))
    return rho1, rho2


@dataclass(frozen=True)
class PhiData:
    phi0_in: float
    phi1: np.ndarray
    lambda0: float
    lambda1: float
    beta: float
    grid: object = field(repr=False)

    def phi0(self, z):
        """Leading potential: -2 beta log r inside, minus 2 beta log|w_ext| outside."""
        z = np.atleast_1d(np.asarray(z, dtype=complex))
        from .geometry import is_inside
        out = np.full(z.shape, self.phi0_in)
        ext = ~is_inside(self.grid, z)
        if np.any(ext):
            out[ext] -= 2 * self.beta * np.log(np.abs(eval_w_ext(self.grid, z[ext])))
        return out

    def lam(self, hbar):
        return self.lambda0 + hbar * self.lambda1


def phi_corrections(grid, beta, W=None):
    Wv = potential_values(W, grid, beta)
    logr0 = np.log(rho0(grid))
    # f^H(infinity) is the mean over the exterior angle
    l_inf = fourier.mean(logr0)
    w_inf = fourier.mean(Wv)
    phi1 = (beta - 1) * (logr0 - l_inf) + Wv - w_inf
    return PhiData(
        phi0_in=-2 * beta * np.log(grid.r), phi1=phi1,
        lambda0=-2 * beta * np.log(grid.r), lambda1=-(w_inf + (beta - 1) * l_inf),
        beta=beta, grid=grid,
    )


# ---------------------------------------------------------------- free energy

@dataclass(frozen=True)
class ExpansionResult:
    beta: float
    F0: float
    F1: float
    F2cl: float
    F2q: float
    F2q_detprime: float
    c1: float
    c2: float
    rho0: np.ndarray
    rho1: np.ndarray
    rho2: np.ndarray
    phi: PhiData
    log_det_IV: float
    logdetprimeN: float
    P: float
    r: float

    @property
    def F2(self):
        return self.F2cl + self.F2q

    @property
    def lambda_const(self):
        return self.phi.lambda0

    def summary(self):
        return {
            "beta": self.beta, "F0": self.F0, "F1": self.F1, "F2cl": self.F2cl, "F2q": self.F2q,
            "F2": self.F2, "c1": self.c1, "c2": self.c2, "P": self.P, "r": self.r,
            "log_det_IV": self.log_det_IV, "logdetprimeN": self.logdetprimeN,
        }


def free_energy(grid, beta, W=None, imap=None, ops=None, route="primary"):
    if not beta > 0:
        raise ValueError("beta must be positive")
    ops = _operator_set(grid, imap, ops)
    N = ops.N if route == "primary" else ops.N_fallback
    Wv = potential_values(W, grid, beta)
    r0 = rho0(grid)
    logr0 = np.log(r0)
    k1, k2 = c1(beta), c2(beta)
    u = (beta - 1) * logr0 + Wv
    ldet = log_fredholm_determinant(ops.spectrum)
    ldp = ops.logdetprime_N
    # second route: det(I + V) = 2 det'(I - V), then log det' N = -log det(I + V) + log P
    ldp_alt = -math.log(2 * detprime_one_minus(ops.spectrum)) + math.log(grid.P)
    rho1, rho2 = density_corrections(grid, beta, W, ops=ops, route=route)
    return ExpansionResult(
        beta=beta,
        F0=beta * np.log(grid.r),
        F1=float((beta - 1) * grid.integrate(r0 * logr0) + grid.integrate(r0 * Wv) + k1),
        F2cl=float(grid.integrate(u * (N @ u)) / (8 * np.pi * beta)),
        F2q=-0.5 * ldet + 0.5 * math.log(2 * beta),
        F2q_detprime=0.5 * ldp_alt - 0.5 * math.log(grid.P) + k2,
        c1=k1, c2=k2, rho0=r0, rho1=rho1, rho2=rho2,
        phi=phi_corrections(grid, beta, W),
        log_det_IV=ldet, logdetprimeN=ldp, P=grid.P, r=grid.r,
    )


def predict_logZ(result, beta, N):
    if N < 1:
        raise ValueError("N must be >= 1")
    return (math.lgamma(N + 1) + (beta - 1) * N * math.log(N)
            + result.F0 * N * N + result.F1 * N + result.F2)


# ---------------------------------------------------------------- checks

def truncated_equation_residual(grid, beta, hbar, W=None, ops=None):
    """max | rho - rho0 - hbar/(4 pi beta) N W - (beta-1) hbar/(4 pi beta) N log rho | with rho to O(hbar^2)."""
    ops = _operator_set(grid, None, ops)
    Wv = potential_values(W, grid, beta)
    r0 = rho0(grid)
    rho1, rho2 = density_corrections(grid, beta, W, ops=ops)
    rho = r0 + hbar * rho1 + hbar ** 2 * rho2
    rhs = hbar / (4 * np.pi * beta) * (ops.N @ Wv) + (beta - 1) * hbar / (4 * np.pi * beta) * (ops.N @ np.log(rho))
    return float(np.abs(rho - r0 - rhs).max())


def internal_consistency(grid, beta=1.0, W=None, ops=None):
    """Residuals of identities that tie the expansion to the operators."""
    ops = _operator_set(grid, None, ops)
    res = free_energy(grid, beta, W, ops=ops)
    Wv = potential_values(W, grid, beta)
    r0 = res.rho0
    out = {}
    if W is None or isinstance(W, Zero):
        out["entropy"] = abs(grid.integrate(r0 * np.log(r0)) + np.log(2 * np.pi * grid.r))
    out["F2q_routes"] = abs(res.F2q - res.F2q_detprime)
    f = np.log(r0) + Wv
    out["N_routes"] = float(np.abs((ops.N - ops.N_fallback) @ f).max() / np.abs(f).max())
    # phi_1 - (beta-1) log rho0 - W must be the constant lambda_1
    out["phi1_constant"] = float(np.abs(res.phi.phi1 - (beta - 1) * np.log(r0) - Wv - res.phi.lambda1).max())
    out["rho0_norm"] = abs(grid.integrate(r0) - 1.0)
    out["rho1_mean"] = abs(grid.integrate(res.rho1))
    out["rho2_mean"] = abs(grid.integrate(res.rho2))
    return out

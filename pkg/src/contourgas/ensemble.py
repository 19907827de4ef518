"""Finite-N ground truth for the beta-ensemble on a contour.

Z_N = oint ... oint prod_{i<j} |z_i - z_j|^{2 beta} prod_k e^{W(z_k)} |dz_k|.

Everything here is sampled in the exterior angle t, so |dz| = sp(t) dt.
"""
import math
from dataclasses import dataclass, field

import numpy as np
from scipy import linalg

from . import fourier
from .expansion import Zero, potential_values
from .geometry import build_contour
from .maps import IllConditioned


# ---------------------------------------------------------------- configuration

@dataclass(frozen=True)
class GasConfig:
    spec: object
    beta: float
    N: int
    W: object = field(default_factory=Zero)

    def __post_init__(self):
        if not self.beta > 0:
            raise ValueError("beta must be positive")
        if self.N < 1:
            raise ValueError("N must be >= 1")

    @property
    def hbar(self):
        return 1.0 / self.N

    def W_at(self, t):
        return self.W.at(self.spec, t, self.beta)

    def log_sp(self, t):
        return np.log(self.spec.speed(t))


def gas_log_weight(config, t):
    """log of the integrand of Z_N in t coordinates (Jacobian log sp included)."""
    t = np.asarray(t, dtype=float)
    z = config.spec.point(t)
    d = np.abs(z[:, None] - z[None, :])
    iu = np.triu_indices(t.size, 1)
    if np.any(d[iu] == 0.0):
        return -np.inf
    return float(2 * config.beta * np.sum(np.log(d[iu])) + np.sum(config.W_at(t) + config.log_sp(t)))


# ---------------------------------------------------------------- exact oracles

def circle_logZ(r, beta, N):
    return ((beta * N * N + (1 - beta) * N) * math.log(r) + N * math.log(2 * math.pi)
            + math.lgamma(1 + N * beta) - N * math.lgamma(1 + beta))


def _node_potential(W, grid, beta):
    if W is None:
        return np.zeros(grid.M)
    if isinstance(W, np.ndarray):
        return W
    if callable(W) and not hasattr(W, "at"):
        return np.asarray(W(grid.z), dtype=float)
    return potential_values(W, grid, beta)


def beta1_logZ(grid, N, W=None, method="arnoldi"):
    """log Z_N at beta = 1 from the moment determinant N! det[oint z^i conj(z)^j e^W |dz|].

    method='lu' factors the radius-scaled moment matrix; method='arnoldi' builds
    the monic orthogonal polynomials by Arnoldi and sums log norms, which is
    stable for larger N.
    """
    if N < 1 or N > 256:
        raise ValueError("beta1_logZ requires 1 <= N <= 256")
    if grid.M < 8 * N:
        raise ValueError("quadrature needs M >= 8N (M=%d, N=%d)" % (grid.M, N))
    Wv = _node_potential(W, grid, 1.0)
    wts = grid.weights * np.exp(Wv)
    z = grid.z - grid.spec.a0
    if np.iscomplexobj(Wv) and method != "lu":
        raise ValueError("complex weights need method='lu' (which returns log|Z|)")
    if method == "lu":
        rt = np.abs(z).max()
        V = (z / rt)[None, :] ** np.arange(N)[:, None]
        Mm = (V * wts) @ V.conj().T
        lu, _ = linalg.lu_factor(Mm)
        piv = np.abs(np.diag(lu))
        if piv.min() <= 1e-300 or not np.all(np.isfinite(piv)):
            raise IllConditioned("pivot collapse in the moment matrix")
        # rows/columns scaled by rt^{-i}: det M = det M~ * rt^{N(N-1)}
        return math.lgamma(N + 1) + float(np.sum(np.log(piv))) + N * (N - 1) * math.log(rt)
    if method != "arnoldi":
        raise ValueError("method must be 'arnoldi' or 'lu'")
    q = np.sqrt(wts).astype(complex)
    n0 = np.linalg.norm(q)
    q /= n0
    Q = np.zeros((N, grid.M), dtype=complex)
    Q[0] = q
    lognorm = math.log(n0)
    total = 2 * lognorm
    for k in range(1, N):
        v = z * Q[k - 1]
        for _ in range(2):  # re-orthogonalize
            v -= Q[:k].T @ (Q[:k].conj() @ v)
        h = np.linalg.norm(v)
        if not h > 0:
            raise IllConditioned("Krylov breakdown at degree %d" % k)
        Q[k] = v / h
        lognorm += math.log(h)
        total += 2 * lognorm
    return math.lgamma(N + 1) + total


def cusp_order(beta):
    """Trapezoid error order for the |t - t'|^{2 beta} coincidence cusp; None when smooth."""
    two_b = 2 * beta
    if abs(two_b - round(two_b)) < 1e-12 and round(two_b) % 2 == 0:
        return None
    return two_b + 1


@dataclass(frozen=True)
class QuadCurve:
    """A closed curve sampled on t_j = 2 pi j / M: points and speeds."""
    z: np.ndarray
    sp: np.ndarray

    @property
    def M(self):
        return self.z.size

    @classmethod
    def from_spec(cls, spec, M):
        t = fourier.nodes(M)
        return cls(spec.point(t), spec.speed(t))


def _raw_smallN(curve, beta, N, Wv):
    M = curve.M
    h = 2 * np.pi / M
    a = np.exp(Wv) * curve.sp * h
    if N == 1:
        return float(np.sum(a))
    P = np.abs(curve.z[:, None] - curve.z[None, :]) ** (2 * beta)
    if N == 2:
        return float(a @ P @ a)
    if N == 3:
        V = P * a[None, :]
        return float(np.sum(a * np.sum((V @ P) * V, axis=1)))
    raise ValueError("direct quadrature is limited to N <= 3")


def smallN_logZ(spec, beta, N, W=None, Ms=(128, 256, 512), curve_fn=None):
    """Tensor-product trapezoid value of log Z_N (N <= 3), Richardson-extrapolated over Ms.

    Returns (logZ, error_estimate). curve_fn(M) -> QuadCurve overrides the Laurent contour.
    """
    if N not in (1, 2, 3):
        raise ValueError("smallN_logZ supports N in {1, 2, 3}")
    vals = []
    for M in Ms:
        curve = curve_fn(M) if curve_fn else QuadCurve.from_spec(spec, M)
        if W is None or isinstance(W, Zero):
            Wv = np.zeros(M)
        else:
            Wv = W.at(spec, fourier.nodes(M), beta)
        vals.append(_raw_smallN(curve, beta, N, Wv))
    vals = np.array(vals)
    p = cusp_order(beta)
    if N == 1 or p is None or len(vals) < 2:
        est = vals[-1]
        err = abs(vals[-1] - vals[-2]) if len(vals) > 1 else 0.0
    else:
        f = 2.0 ** p - 1.0
        rich = vals[1:] + (vals[1:] - vals[:-1]) / f
        est = rich[-1]
        err = abs(rich[-1] - rich[-2]) if rich.size > 1 else abs(vals[-1] - vals[-2]) / f
    return math.log(est), err / est


# ---------------------------------------------------------------- N = 2 distributions

@dataclass(frozen=True, eq=False)
class TwoParticle:
    """Quadrature-built R(a) and R(a, b) on the nodes of a grid, N = 2."""
    grid: object
    beta: float
    W: np.ndarray
    Z: float
    R: np.ndarray
    R2: np.ndarray  # R(z_i, z_j)

    @property
    def hbar(self):
        return 0.5


def two_particle(grid, beta, W=None):
    Wv = _node_potential(W, grid, beta)
    eW = np.exp(Wv)
    P = np.abs(grid.z[:, None] - grid.z[None, :]) ** (2 * beta)
    wts = grid.weights * eW
    Z = float(wts @ P @ wts)
    R = eW * (P @ wts) / Z
    R2 = 0.5 * P * np.outer(eW, eW) / Z
    return TwoParticle(grid, beta, Wv, Z, R, R2)


def normalization_residuals(tp):
    g = tp.grid
    return {
        "R_norm": abs(g.integrate(tp.R) - 1.0),
        "R2_marginal": float(np.abs(tp.R2 @ g.weights - 0.5 * tp.R).max()),
    }


def _ds_log_dist_sq(grid):
    """d/ds_z log|z - xi|^2 = 2 Re(i nu(z) / (z - xi)) for z = row node, xi = column node."""
    d = grid.z[:, None] - grid.z[None, :]
    np.fill_diagonal(d, 1.0)
    K = 2 * (1j * grid.nu[:, None] / d).real
    np.fill_diagonal(K, 0.0)
    return K


def bbgky_residual(grid, beta, W=None, tp=None):
    """max_z | beta oint R(z,xi) d_s log|z-xi|^2 + hbar d_s W R - hbar d_s R |, N = 2."""
    tp = tp or two_particle(grid, beta, W)
    K = _ds_log_dist_sq(grid)
    lhs = beta * (tp.R2 * K) @ grid.weights
    dsW = fourier.ddt(tp.W) / grid.sp
    dsR = fourier.ddt(tp.R) / grid.sp
    res = lhs + tp.hbar * dsW * tp.R - tp.hbar * dsR
    return float(np.abs(res).max())


def holomorphic_dW(grid, Wv):
    """dW = -(i/2) conj(nu) d_s W for the extension with vanishing normal derivative."""
    return -0.5j * np.conj(grid.nu) * fourier.ddt(Wv) / grid.sp


def stress_jump(grid, beta, W=None, tp=None):
    """[<T>]_Gamma at the nodes from the Plemelj boundary limits, N = 2."""
    tp = tp or two_particle(grid, beta, W)
    d = grid.z[None, :] - grid.z[:, None]  # zeta_j - z_i
    np.fill_diagonal(d, 1.0)
    C = 1.0 / d
    np.fill_diagonal(C, 0.0)  # R(z, z) = 0 kills the diagonal
    I = (tp.R2 * C) @ grid.weights
    dW = holomorphic_dW(grid, tp.W)
    nb = np.conj(grid.nu)
    dsR = fourier.ddt(tp.R) / grid.sp
    h = tp.hbar
    return 2 * np.pi * beta * nb * (2 * beta * I - 2 * h * dW * tp.R - h * nb * (grid.kappa * tp.R + 1j * dsR))


def jump_reality_residual(grid, beta, W=None, tp=None):
    J = stress_jump(grid, beta, W, tp)
    return float(np.abs((grid.nu ** 2 * J).imag).max())


def mean_stress_finiteN(spec, beta, z, W=None, M=256, curve=None):
    """<T(z)> for N = 2 by direct double quadrature of the defining sum, z off the contour."""
    N, h_ = 2, 0.5
    curve = curve or QuadCurve.from_spec(spec, M)
    M = curve.M
    t = fourier.nodes(M)
    if W is None or isinstance(W, Zero):
        Wv = np.zeros(M)
        dW = np.zeros(M, dtype=complex)
    else:
        grid = build_contour(spec, M)
        Wv = W.at(spec, t, beta)
        dW = holomorphic_dW(grid, Wv)
    wts = np.exp(Wv) * curve.sp * (2 * np.pi / M)
    P = np.abs(curve.z[:, None] - curve.z[None, :]) ** (2 * beta)
    Z = wts @ P @ wts
    z = np.atleast_1d(np.asarray(z, dtype=complex))
    out = []
    for a in z:
        u = 1.0 / (a - curve.z)
        pair = np.outer(u, u)  # j != k term; diagonal carries weight P = 0
        T_pair = beta ** 2 * h_ ** 2 * 2 * pair
        single = beta * h_ ** 2 * u ** 2 + 2 * beta * h_ ** 2 * dW * u
        T = T_pair + single[:, None] + single[None, :]
        out.append(np.sum(T * P * np.outer(wts, wts)) / Z)
    out = np.array(out)
    return out if out.size > 1 else complex(out[0])


# ---------------------------------------------------------------- Monte Carlo

@dataclass(frozen=True)
class ChainConfig:
    seed: int = 0
    steps: int = 100000
    burnin: int = 10000
    width: float = 0.5
    bins: int = 32
    pair_bins: int = 0
    batches: int = 20
    probes: tuple = ()  # (complex point, alpha, kind) triples
    trace: bool = False  # keep the sampled angles, one row per sweep


@dataclass(frozen=True)
class ChainStats:
    acceptance: float
    n_samples: int
    edges: np.ndarray
    bin_length: np.ndarray
    density: np.ndarray
    density_err: np.ndarray
    pair: np.ndarray
    vertex: tuple
    vertex_err: tuple
    final_t: np.ndarray
    flags: tuple
    trace: np.ndarray = None

    def density_csv_rows(self):
        return [(float(a), float(b), float(d), float(e))
                for a, b, d, e in zip(self.edges[:-1], self.edges[1:], self.density, self.density_err)]


def bin_arclength(spec, edges, per_bin=64):
    """int sp dt over each t bin (Gauss-Legendre)."""
    x, wq = np.polynomial.legendre.leggauss(per_bin)
    out = []
    for a, b in zip(edges[:-1], edges[1:]):
        tt = 0.5 * (b - a) * x + 0.5 * (a + b)
        out.append(0.5 * (b - a) * np.sum(wq * spec.speed(tt)))
    return np.array(out)


def _batch_err(samples, batches):
    n = samples.shape[0] // batches * batches
    if n < batches or batches < 2:
        return np.full(samples.shape[1:], np.nan)
    bm = samples[:n].reshape(batches, n // batches, *samples.shape[1:]).mean(axis=1)
    return bm.std(axis=0, ddof=1) / math.sqrt(batches)


def acceptance_probability(dlog):
    """Metropolis rule min(1, e^dlog) for a symmetric proposal."""
    return 1.0 if dlog >= 0 else math.exp(dlog)


def mcmc_run(config, chain):
    """Single-site Metropolis in t with wrapped uniform proposals.

    One sample is recorded per sweep (N proposals) after burn-in.
    """
    if chain.steps <= chain.burnin:
        raise ValueError("steps must exceed burn-in")
    rng = np.random.default_rng(chain.seed)
    spec, beta, N = config.spec, config.beta, config.N
    t = np.sort(rng.uniform(0, 2 * np.pi, N))
    z = spec.point(t)
    loc = config.W_at(t) + config.log_sp(t)
    two_pi = 2 * np.pi
    nb = chain.bins
    edges = np.linspace(0, two_pi, nb + 1)
    probes = [(complex(p), float(a), k) for p, a, k in chain.probes]

    hist_rows, pair_acc, vlogs, rows = [], None, [[] for _ in probes], []
    if chain.pair_bins:
        pair_acc = np.zeros((chain.pair_bins, chain.pair_bins))
    accepted = proposed = 0
    idx = np.arange(N)
    for step in range(chain.steps):
        i = step % N
        tn = (t[i] + chain.width * (2 * rng.random() - 1)) % two_pi
        zn = spec.point(tn)
        others = idx != i
        dnew = np.abs(zn - z[others])
        if np.all(dnew > 0):
            lnew = config.W_at(tn) + config.log_sp(tn)
            dlog = 2 * beta * (np.sum(np.log(dnew)) - np.sum(np.log(np.abs(z[i] - z[others])))) + lnew - loc[i]
            if step >= chain.burnin:
                proposed += 1
            if rng.random() < acceptance_probability(dlog):
                t[i], z[i], loc[i] = tn, zn, lnew
                if step >= chain.burnin:
                    accepted += 1
        elif step >= chain.burnin:
            proposed += 1
        if step >= chain.burnin and i == N - 1:
            b = np.minimum((t / two_pi * nb).astype(int), nb - 1)
            hist_rows.append(np.bincount(b, minlength=nb))
            if chain.trace:
                rows.append(t.copy())
            if pair_acc is not None:
                pb = np.minimum((t / two_pi * chain.pair_bins).astype(int), chain.pair_bins - 1)
                H = np.zeros_like(pair_acc)
                np.add.at(H, (pb[:, None], pb[None, :]), 1.0)
                H[np.diag_indices_from(H)] -= np.bincount(pb, minlength=chain.pair_bins)
                pair_acc += H
            for k, (p, a, kind) in enumerate(probes):
                lg = np.log(p - z)
                if kind == "absolute":
                    vlogs[k].append(2 * a * np.sum(lg.real))
                else:
                    vlogs[k].append(a * np.sum(lg))
    hist = np.array(hist_rows, dtype=float)
    ns = hist.shape[0]
    L = bin_arclength(spec, edges)
    frac = hist / N  # fraction of particles per bin
    density = frac.mean(axis=0) / L
    density_err = _batch_err(frac, chain.batches) / L
    pair = np.zeros((0, 0))
    if pair_acc is not None:
        pe = np.linspace(0, two_pi, chain.pair_bins + 1)
        Lp = bin_arclength(spec, pe)
        pair = pair_acc / ns / N ** 2 / np.outer(Lp, Lp)
    vmeans, verrs = [], []
    for k, (p, a, kind) in enumerate(probes):
        lv = np.array(vlogs[k])
        shift = lv.real.max()
        vals = np.exp(lv - shift)
        m = vals.mean()
        e = _batch_err(vals[:, None].real, chain.batches)[0] + 1j * _batch_err(vals[:, None].imag, chain.batches)[0]
        scale = math.exp(shift)
        if kind == "absolute":
            vmeans.append(float(m.real) * scale)
            verrs.append(float(e.real) * scale)
        else:
            vmeans.append(complex(m) * scale)
            verrs.append(complex(e) * scale)
    acc = accepted / max(proposed, 1)
    flags = () if 0.2 <= acc <= 0.6 else ("acceptance %.3f outside [0.2, 0.6]" % acc,)
    return ChainStats(acc, ns, edges, L, density, density_err, pair, tuple(vmeans), tuple(verrs), t.copy(), flags,
                      np.array(rows) if chain.trace else None)


def binned_profile(grid, f, edges, per_bin=32):
    """Arclength average of node field f over t bins (trig interpolation)."""
    out = []
    for a, b in zip(edges[:-1], edges[1:]):
        tt = np.linspace(a, b, per_bin + 1)
        tt = 0.5 * (tt[1:] + tt[:-1])
        fv = fourier.interpolate(f, tt)
        s = grid.spec.speed(tt)
        out.append(np.sum(fv * s) / np.sum(s))
    return np.array(out)


import numpy as np
import pytest
from scipy.special import hyp2f1

from contourgas.correlators import (ProbeSet, dphi_pair_connected, dphi_sq_connected,
                                    phi_pair_connected, vertex_mean, vertex_product)
from contourgas.ensemble import ChainConfig, GasConfig, _batch_err, beta1_logZ, mcmc_run
from contourgas.geometry import CIRCLE, ELLIPSE_02, build_contour, ellipse
from contourgas.maps import (CoincidentPoints, NotExterior, SideMismatch, eval_w_ext,
                             interior_map, schwarzian)


@pytest.fixture(scope="module")
def circ():
    g = build_contour(CIRCLE, 256)
    return g, interior_map(g)


@pytest.fixture(scope="module")
def ell():
    g = build_contour(ellipse(0.3), 256)
    return g, interior_map(g)


@pytest.fixture(scope="module")
def ell02():
    return build_contour(ELLIPSE_02, 512)


def heine_log_ratio(grid, N, Wv):
    """log <exp(sum_j Wv(z_j))> at beta = 1 from the determinant representation."""
    return beta1_logZ(grid, N, Wv) - beta1_logZ(grid, N)


def gram_ratio(grid, N, weight):
    """det(<p_i, weight p_j>) / det(<p_i, p_j>) over polynomials of degree < N (complex weight)."""
    z = (grid.z - grid.spec.a0) / grid.r
    V = np.vander(z, N, increasing=True) * np.sqrt(grid.weights)[:, None]
    Q, _ = np.linalg.qr(V)
    return np.linalg.det(Q.conj().T @ (weight[:, None] * Q))


# ---------------------------------------------------------------- phi pair

def series_circle_pair(z, zeta):
    """Leading covariance on the unit circle from <|p_k|^2> -> k/beta:
    2 beta Cov(sum log|z - z_j|, sum log|zeta - z_j|) = sum_k Re(u^k)/k = -log|1 - u|."""
    def coef(p):
        return np.conj(p) if abs(p) < 1 else 1 / p
    u = coef(z) * np.conj(coef(zeta)) if abs(z) < 1 else np.conj(coef(z)) * coef(zeta)
    return -np.log(abs(1 - u))


@pytest.mark.parametrize("z,zeta", [(2, 3), (1.5j, -2 + 0.5j), (0.3, -0.4 + 0.2j),
                                     (0.5, 3), (-0.2j, 1.1 + 1j)])
def test_phi_pair_circle_series(circ, z, zeta):
    g, im = circ
    assert abs(phi_pair_connected(g, 2.0, z, zeta, im) - series_circle_pair(z, zeta)) < 1e-12


def test_phi_pair_circle_example(circ):
    g, im = circ
    assert abs(phi_pair_connected(g, 1.0, 2, 3, im) - np.log(6 / 5)) < 1e-13


def test_phi_pair_mixed_case(circ):
    g, im = circ
    v = phi_pair_connected(g, 1.0, 0.5, 3, im)
    assert abs(v - (np.log(3) - np.log(2.5))) < 1e-12
    assert abs(v - phi_pair_connected(g, 1.0, 3, 0.5, im)) < 1e-15


@pytest.mark.parametrize("z,zeta", [(1.8, -1.5 + 1j), (0.2 + 0.1j, -0.3j), (0.1, 2.5j)])
def test_phi_pair_symmetric(ell, z, zeta):
    g, im = ell
    a = phi_pair_connected(g, 1.5, z, zeta, im)
    b = phi_pair_connected(g, 1.5, zeta, z, im)
    assert abs(a - b) < 1e-9


def test_phi_pair_errors(circ):
    g, im = circ
    with pytest.raises(CoincidentPoints):
        phi_pair_connected(g, 1.0, 2.0, 2.0, im)
    with pytest.raises(NotExterior):
        phi_pair_connected(g, 1.0, 1.0, 2.0, im)


@pytest.mark.slow
def test_phi_pair_monte_carlo():
    beta, N = 2.0, 32
    st = mcmc_run(GasConfig(CIRCLE, beta, N),
                  ChainConfig(seed=3, steps=1_000_000, burnin=20000, width=0.3, trace=True))
    z = CIRCLE.point(st.trace)
    g = build_contour(CIRCLE, 128)
    im = interior_map(g)
    for p, q in ((2, 3), (0.3, -0.4 + 0.2j), (0.5, 3)):
        a = np.log(np.abs(p - z)).sum(axis=1)
        b = np.log(np.abs(q - z)).sum(axis=1)
        x = 2 * beta * (a - a.mean()) * (b - b.mean())
        err = _batch_err(x[:, None], 20)[0]
        exact = phi_pair_connected(g, beta, p, q, im)
        assert abs(x.mean() - exact) < 3 * err, (p, q, x.mean(), err, exact)


# ---------------------------------------------------------------- d phi pair

def test_dphi_circle_zero(circ):
    g, im = circ
    for z in (2.0, 1.3 - 1j, 0.3j, -0.5):
        assert abs(dphi_sq_connected(g, 1.0, z, im)) < 1e-9
    # exterior pair on the circle: w = z, so the kernel is 1/(z - zeta)^2 - 1/(z - zeta)^2
    assert abs(dphi_pair_connected(g, 1.0, 2.0, -3j, im)) < 1e-12


def test_dphi_sq_is_schwarzian(ell):
    g, im = ell
    z = 1.7 + 0.4j
    assert abs(dphi_sq_connected(g, 1.0, z, im) - schwarzian("exterior", g, z)[0] / 6) < 1e-14


@pytest.mark.parametrize("z", [1.6 + 0.5j, -2.0j, 0.2 + 0.1j])
def test_dphi_merging_limit(ell, z):
    g, im = ell
    target = dphi_sq_connected(g, 1.0, z, im)
    errs = []
    for d in (4e-2, 2e-2, 1e-2):
        sym = 0.5 * (dphi_pair_connected(g, 1.0, z + d, z - d, im)
                     + dphi_pair_connected(g, 1.0, z + 1j * d, z - 1j * d, im))
        errs.append(abs(sym - target))
    assert errs[2] < errs[1] < errs[0]
    assert errs[2] < 1e-3 * max(abs(target), 1e-2)


def test_dphi_mixed_sides(ell):
    g, im = ell
    z, zeta = 0.1, 2.0 + 1j
    assert abs(dphi_pair_connected(g, 1.0, z, zeta, im) + 1 / (z - zeta) ** 2) < 1e-15


# ---------------------------------------------------------------- vertex means

def test_vertex_alpha_zero(ell):
    g, _ = ell
    for kind in ("holomorphic", "absolute"):
        assert abs(vertex_mean(g, 1.3, 2.0 + 1j, 0.0, 20, kind) - 1) < 1e-14


@pytest.mark.parametrize("beta", [0.5, 1.0, 2.0, 3.7])
def test_vertex_circle_example(circ, beta):
    g, _ = circ
    for a, N in ((1.0, 8), (0.5, 16), (-0.3, 5)):
        assert abs(vertex_mean(g, beta, 2.0, a, N) / 2 ** (a * N) - 1) < 1e-13


def test_vertex_abs_vs_holo(ell):
    g, _ = ell
    beta, a, N = 1.5, 0.7, 12
    for z in (1.6 + 0.3j, -2 - 1j, 3j):
        h = vertex_mean(g, beta, z, a, N)
        ab = vertex_mean(g, beta, z, a, N, "absolute")
        w = complex(eval_w_ext(g, z))
        assert abs(ab / abs(h) ** 2 - (1 - abs(w) ** -2) ** (-a * a / beta)) < 1e-12 * ab / abs(h) ** 2


def test_vertex_holomorphy(ell):
    g, _ = ell
    h = 1e-4
    for z in (1.6 + 0.5j, -1.9 + 0.2j, 0.3 - 1.4j):
        f = lambda x: vertex_mean(g, 1.5, x, 0.6, 10)
        dx = (f(z + h) - f(z - h)) / (2 * h)
        dy = (f(z + 1j * h) - f(z - 1j * h)) / (2 * h)
        dbar = 0.5 * (dx + 1j * dy)
        assert abs(dbar) < 1e-6 * abs(dx)


def test_vertex_rotation(circ):
    g, _ = circ
    a, N, z = 0.4, 9, 1.7 + 0.2j
    base = vertex_mean(g, 2.0, z, a, N)
    for th in (0.3, 1.1, 2.0):
        rot = vertex_mean(g, 2.0, z * np.exp(1j * th), a, N)
        assert abs(abs(rot) - abs(base)) < 1e-12 * abs(base)
        assert abs(rot / base - np.exp(1j * th * a * N)) < 1e-12


def test_vertex_interior_rejected(circ):
    g, _ = circ
    with pytest.raises(SideMismatch):
        vertex_mean(g, 1.0, 0.5, 1.0, 4)
    with pytest.raises(ValueError):
        vertex_mean(g, 1.0, 2.0, 1.0, 4, kind="other")


def test_vertex_N1_circle_quadrature(circ):
    # one particle on the unit circle: <|z - xi|^{2a}> = |z|^{2a} 2F1(-a, -a; 1; |z|^-2)
    g, _ = circ
    z, a = 2.0, 0.5
    exact = z ** (2 * a) * hyp2f1(-a, -a, 1, z ** -2)
    quad = g.integrate(np.abs(z - g.z) ** (2 * a)) / g.P
    assert abs(quad - exact) < 1e-13
    # beta = 1 circle is Toeplitz: corrections to the leading formula shrink like |z|^{-2N}
    errs = []
    for N in (1, 2, 4, 8):
        lead = vertex_mean(g, 1.0, z, a, N, "absolute")
        Wv = 2 * a * np.log(np.abs(z - g.z))
        errs.append(abs(heine_log_ratio(g, N, Wv) - np.log(lead)))
    assert abs(errs[0] - abs(np.log(quad) - np.log(vertex_mean(g, 1.0, z, a, 1, "absolute")))) < 1e-12
    assert all(b < a_ * 0.3 for a_, b in zip(errs, errs[1:]))
    assert errs[-1] < 1e-5


@pytest.mark.parametrize("z,a", [(2.0, 1.0), (-1.5 + 1j, 0.5), (0.4 + 1.3j, -0.7)])
def test_vertex_abs_heine_ellipse(ell02, z, a):
    g = ell02
    N = 32
    Wv = 2 * a * np.log(np.abs(z - g.z))
    exact = heine_log_ratio(g, N, Wv)
    assert abs(exact - np.log(vertex_mean(g, 1.0, z, a, N, "absolute"))) < 1e-10


@pytest.mark.parametrize("z,a", [(2.0, 1.0), (-1.5 + 1j, 0.5)])
def test_vertex_holo_heine_ellipse(ell02, z, a):
    g = ell02
    N = 16
    exact = gram_ratio(g, N, np.exp(a * np.log(z - g.z)))
    got = vertex_mean(g, 1.0, z, a, N)
    assert abs(exact / got - 1) < 1e-10


# ---------------------------------------------------------------- vertex products

def test_probe_set_checks():
    with pytest.raises(CoincidentPoints):
        ProbeSet((2.0, 2.0), (1.0, 1.0), 4)
    with pytest.raises(ValueError):
        ProbeSet((2.0, 3.0), (1.0,), 4)


def test_product_single(ell):
    g, _ = ell
    for kind in ("holomorphic", "absolute"):
        p = vertex_product(g, 1.5, ProbeSet((1.8 + 0.6j,), (0.8,), 10), kind)
        assert abs(p / vertex_mean(g, 1.5, 1.8 + 0.6j, 0.8, 10, kind) - 1) < 1e-13


def test_product_interior_rejected(circ):
    g, _ = circ
    with pytest.raises(SideMismatch):
        vertex_product(g, 1.0, ProbeSet((2.0, 0.1), (1.0, 1.0), 4))


def test_product_factorizes_far_apart(circ):
    g, _ = circ
    a, N = 0.6, 8
    ratios = []
    for R in (1e1, 1e2, 1e3):
        pts = (R, -R * 1.3j)
        pr = vertex_product(g, 2.0, ProbeSet(pts, (a, a), N), "absolute")
        single = vertex_mean(g, 2.0, pts[0], a, N, "absolute") * vertex_mean(g, 2.0, pts[1], a, N, "absolute")
        ratios.append(abs(pr / single - 1))
    assert ratios[2] < ratios[1] < ratios[0] and ratios[2] < 1e-5


@pytest.mark.parametrize("pts,al", [((2.0, -1.6 + 1.2j), (0.8, 0.5)),
                                    ((1.5 + 0.5j, -0.3 - 2j, -2.2), (0.4, -0.6, 0.7))])
def test_product_abs_heine_ellipse(ell02, pts, al):
    g = ell02
    N = 32
    Wv = sum(2 * a * np.log(np.abs(p - g.z)) for p, a in zip(pts, al))
    exact = heine_log_ratio(g, N, Wv)
    got = vertex_product(g, 1.0, ProbeSet(pts, al, N), "absolute")
    assert abs(exact - np.log(got)) < 1e-10


def test_product_holo_heine_ellipse(ell02):
    g = ell02
    pts, al, N = (2.0, -1.6 + 1.2j), (0.8, 0.5), 16
    weight = np.exp(sum(a * np.log(p - g.z) for p, a in zip(pts, al)))
    got = vertex_product(g, 1.0, ProbeSet(pts, al, N))
    assert abs(gram_ratio(g, N, weight) / got - 1) < 1e-10


@pytest.mark.slow
def test_product_monte_carlo_circle():
    beta, N = 2.0, 16
    pts, al = (2.0, -2.5 + 0.5j), (0.5, 0.5)
    st = mcmc_run(GasConfig(CIRCLE, beta, N),
                  ChainConfig(seed=11, steps=600_000, burnin=10000, width=0.5, trace=True))
    z = CIRCLE.point(st.trace)
    lv = sum(2 * a * np.log(np.abs(p - z)).sum(axis=1) for p, a in zip(pts, al))
    shift = lv.max()
    vals = np.exp(lv - shift)
    m, e = vals.mean(), _batch_err(vals[:, None], 20)[0]
    g = build_contour(CIRCLE, 128)
    exact = vertex_product(g, beta, ProbeSet(pts, al, N), "absolute") / np.exp(shift)
    assert abs(m - exact) < 3 * e, (m, e, exact)

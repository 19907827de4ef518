"""Acceptance suite: one test per criterion, each printing a PASS/FAIL line at its tolerance."""
import math
import time

import numpy as np
import pytest

from contourgas.correlators import vertex_mean
from contourgas.ensemble import (ChainConfig, GasConfig, bbgky_residual, beta1_logZ,
                                 binned_profile, circle_logZ, jump_reality_residual, mcmc_run)
from contourgas.expansion import free_energy, internal_consistency, predict_logZ
from contourgas.geometry import BLOB, CIRCLE, ELLIPSE_02, LaurentContour, build_contour, ellipse
from contourgas.maps import interior_map
from contourgas.operators import (OperatorSet, detprime_neumann, identity_residuals,
                                  random_band_limited)
from contourgas.spectral import DeformationDirection, surgery_check, variation_harness


def ops_for(spec, M):
    g = build_contour(spec, M)
    return OperatorSet(g, interior_map(g))


def test_c01_circle_exact_beta1(report):
    t0 = time.perf_counter()
    g = build_contour(CIRCLE, 64)
    res = free_energy(g, 1.0)
    err = max(abs(predict_logZ(res, 1.0, N) - circle_logZ(1.0, 1.0, N)) for N in (1, 2, 8, 32, 128))
    dt = time.perf_counter() - t0
    ok = err < 1e-10 and dt < 1.0
    report(1, "circle exactness (beta=1)", ok, "max|diff| %.1e < 1e-10, %.2fs < 1s" % (err, dt))
    assert ok


def test_c02_circle_asymptotics(report):
    t0 = time.perf_counter()
    Ns = np.array([8, 16, 32, 64])
    worst_slope, worst_64, worst_coef = 0.0, 0.0, 0.0
    for beta in (0.5, 2.0, 3.0):
        for r in (0.5, 2.0):
            res = free_energy(build_contour(LaurentContour(r), 64), beta)
            d = np.array([circle_logZ(r, beta, N) - predict_logZ(res, beta, N) for N in Ns])
            slope = np.polyfit(np.log(Ns), np.log(np.abs(d)), 1)[0]
            worst_slope = max(worst_slope, abs(slope + 1))
            worst_64 = max(worst_64, abs(d[-1]))
            # Stirling: the O(1/N) tail is (1/beta - 1) / (12 N)
            worst_coef = max(worst_coef, abs(d[-1] * 64 - (1 / beta - 1) / 12))
    dt = time.perf_counter() - t0
    ok = worst_slope <= 0.15 and worst_64 < 0.02 and worst_coef < 1e-3 and dt < 1.0
    report(2, "circle asymptotics (general beta)", ok,
           "|slope+1| %.3f <= 0.15, resid(64) %.1e < 0.02, 1/N coef err %.1e, %.2fs"
           % (worst_slope, worst_64, worst_coef, dt))
    assert ok


def test_c03_beta1_oracle_ellipse(report):
    t0 = time.perf_counter()
    M = 512
    g = build_contour(ELLIPSE_02, M)
    ops = OperatorSet(g)
    Ns = np.arange(8, 49, 8)
    gap = np.array([beta1_logZ(g, N) - (math.lgamma(N + 1) + N * N * math.log(g.r)
                                        + N * math.log(2 * math.pi)) for N in Ns])
    # Richardson in 1/N on consecutive pairs: F2 + c/N
    rich = (Ns[1:] * gap[1:] - Ns[:-1] * gap[:-1]) / (Ns[1:] - Ns[:-1])
    F2 = -0.5 * ops.log_det_IV + 0.5 * math.log(2)
    # ellipse Neumann-Poincare eigenvalues are +-q^n: det(I+V) = 2 prod(1 - q^{2n})
    q = 0.2
    F2_exact = -0.5 * sum(math.log(1 - q ** (2 * n)) for n in range(1, 60))
    dt = time.perf_counter() - t0
    err = abs(rich[-1] - F2)
    ok = err < 1e-2 and abs(F2 - F2_exact) < 1e-12 and dt < 30
    report(3, "beta=1 oracle, ellipse q=0.2", ok,
           "|Richardson - F2| %.1e < 1e-2 (F2 %.10f), %.1fs" % (err, F2, dt))
    assert ok


def test_c04_identity_suite(report):
    t0 = time.perf_counter()
    F = random_band_limited(256, 20, kmax=8, seed=2024)
    worst, where = 0.0, ""
    for name, spec in (("circle", CIRCLE), ("ellipse", ellipse(0.3)), ("blob", BLOB)):
        for k, v in identity_residuals(ops_for(spec, 256), F).items():
            if v > worst:
                worst, where = v, "%s/%s" % (name, k)
    dt = time.perf_counter() - t0
    ok = worst < 1e-6 and dt < 20
    report(4, "operator identity suite", ok, "max residual %.1e (%s) < 1e-6, %.1fs" % (worst, where, dt))
    assert ok


def test_c05_neumann_determinant(report):
    t0 = time.perf_counter()
    err = max(abs(detprime_neumann(build_contour(LaurentContour(r), 128)) - math.log(math.pi * r))
              for r in (0.5, 1.0, 2.0))
    dt = time.perf_counter() - t0
    ok = err < 1e-8 and dt < 5
    report(5, "Neumann determinant on circles", ok, "max|diff| %.1e < 1e-8, %.2fs" % (err, dt))
    assert ok


def test_c06_surgery(report):
    t0 = time.perf_counter()
    specs = (CIRCLE, ellipse(0.1), ellipse(0.2), ellipse(0.3), BLOB)
    worst = max(abs(surgery_check(build_contour(s, 512)).surgery_residual) for s in specs)
    dt = time.perf_counter() - t0
    ok = worst < 1e-6 and dt < 60
    report(6, "surgery constancy", ok, "max residual %.1e < 1e-6, %.1fs" % (worst, dt))
    assert ok


def test_c07_variations(report):
    t0 = time.perf_counter()
    eps = (1e-2, 5e-3, 2.5e-3)
    reps = {
        # dilation of a scaled ellipse: the log r prediction is a genuine boundary integral
        "log r": variation_harness(ellipse(0.2, r=2.0), DeformationDirection("dilation"), "logr",
                                   eps=eps, M=256),
        "logdet_ext": variation_harness(ellipse(0.2), DeformationDirection(1), "logdet_ext",
                                        eps=eps, M=256),
        "green": variation_harness(CIRCLE, DeformationDirection(2, 0.3), "green", eps=eps, M=128,
                                   points=(0.2 + 0.1j, -0.3 + 0.25j), side="interior"),
    }
    dt = time.perf_counter() - t0
    parts, ok = [], dt < 60
    for k, r in reps.items():
        good = abs(r.slope - 2) <= 0.1 and r.mismatch[-1] < 1e-6
        ok &= good
        parts.append("%s slope %.3f min %.1e" % (k, r.slope, r.mismatch[-1]))
    report(7, "variational formulas", ok, "; ".join(parts) + " (slope 2+-0.1, <1e-6), %.1fs" % dt)
    assert ok


def test_c08_loop_equation(report):
    t0 = time.perf_counter()
    floor = 1e-12
    mono, detail = True, []
    grids = {M: build_contour(ellipse(0.3), M) for M in (128, 256, 512)}
    for beta in (1.0, 1.5, 2.0):
        r = [bbgky_residual(grids[M], beta) for M in (128, 256, 512)]
        # residuals already at roundoff count as converged
        mono &= all(b < a or max(a, b) < floor for a, b in zip(r, r[1:]))
        detail.append("b=%g %s" % (beta, "/".join("%.0e" % x for x in r)))
    circ = bbgky_residual(build_contour(CIRCLE, 256), 1.5)
    jump = max(jump_reality_residual(grids[256], b) for b in (1.0, 1.5, 2.0))
    dt = time.perf_counter() - t0
    ok = mono and circ < 1e-8 and jump < 1e-5 and dt < 60
    report(8, "finite-N loop equation", ok,
           "monotone %s [%s], circle %.0e < 1e-8, jump reality %.0e < 1e-5, %.1fs"
           % (mono, ", ".join(detail), circ, jump, dt))
    assert ok


@pytest.mark.slow
def test_c09_monte_carlo(report):
    t0 = time.perf_counter()
    st = mcmc_run(GasConfig(CIRCLE, 2.0, 16),
                  ChainConfig(seed=0, steps=1_000_000, burnin=20000, width=0.5, bins=32,
                              probes=((2.0, 1.0, "holomorphic"),)))
    zc = np.abs(st.density - 1 / (2 * np.pi)) / st.density_err
    g = build_contour(CIRCLE, 128)
    pred = abs(vertex_mean(g, 2.0, 2.0, 1.0, 16))
    zv = abs(abs(st.vertex[0]) - pred) / abs(st.vertex_err[0])

    spec, beta, N = ELLIPSE_02, 2.0, 64
    ge = build_contour(spec, 512)
    res = free_energy(ge, beta, ops=OperatorSet(ge, interior_map(ge)))
    ste = mcmc_run(GasConfig(spec, beta, N),
                   ChainConfig(seed=1, steps=1_000_000, burnin=50000, width=0.12, bins=32))
    ref = binned_profile(ge, res.rho0 + res.rho1 / N, ste.edges)
    ze = np.abs(ste.density - ref) / ste.density_err
    frac = float(np.mean(ze < 3))
    dt = time.perf_counter() - t0
    ok = zc.max() < 3 and zv < 3 and frac >= 0.95 and dt < 300
    report(9, "MC vs expansion", ok,
           "circle max z %.2f < 3, vertex z %.2f < 3, ellipse bins within 3sigma %.0f%% >= 95%%, "
           "acc %.2f/%.2f, %.0fs" % (zc.max(), zv, 100 * frac, st.acceptance, ste.acceptance, dt))
    assert ok


def test_c10_internal_consistency(report):
    t0 = time.perf_counter()
    g = build_contour(ellipse(0.3), 256)
    ops = OperatorSet(g, interior_map(g))
    ic = internal_consistency(g, 1.5, ops=ops)
    circ = internal_consistency(build_contour(LaurentContour(2.0), 128), 1.0)
    entropy = max(ic["entropy"], circ["entropy"])
    # z -> 2z: F0 += beta log 2, F1 += (1 - beta) log 2, F2 unchanged
    beta = 1.5
    a = free_energy(g, beta, ops=ops)
    g2 = build_contour(LaurentContour(2.0, 0j, (0.6,)), 256)
    b = free_energy(g2, beta)
    scal = max(abs(b.F0 - a.F0 - beta * math.log(2)), abs(b.F1 - a.F1 - (1 - beta) * math.log(2)),
               abs(b.F2 - a.F2))
    dt = time.perf_counter() - t0
    ok = (entropy < 1e-9 and ic["N_routes"] < 1e-8 and ic["F2q_routes"] < 1e-10
          and scal < 1e-9 and dt < 10)
    report(10, "internal consistency", ok,
           "entropy %.0e < 1e-9, N routes %.0e < 1e-8, F2q routes %.0e < 1e-10, scaling %.0e < 1e-9, %.1fs"
           % (entropy, ic["N_routes"], ic["F2q_routes"], scal, dt))
    assert ok

"""End-to-end acceptance checks, one test per shipped guarantee.

Run with ``pytest -v tests/test_acceptance.py`` to get one pass/fail line
per guarantee.  Tolerances are part of the contract and are asserted
as-is; failing assertions carry the measured values in their messages.
"""

import math

import numpy as np
import pytest

import excursion_kit.mec as mec
from excursion_kit.field import CosineField, SpectralSumField, covariance_at
from excursion_kit.gauss import gauss_tail, hermite_tail_identity_check
from excursion_kit.geometry import Face, RectDomain, enumerate_faces
from excursion_kit.mc import ec_oracle_2d, empirical_ec, empirical_sup_prob, mc_mean_ec
from excursion_kit.mec import (
    excursion_prob_mu,
    face_term_mean_ec,
    face_term_mu,
    mean_euler_characteristic,
    tau_hessian,
    vertex_term,
)
from excursion_kit.quad import QuadSpec

PI = math.pi
SPEC = QuadSpec()
S5 = math.sqrt(5.0)


def cosine():
    return CosineField()


def test_01_hermite_tail_identity_residuals():
    worst = 0.0
    for k in range(1, 7):
        for u in (0.5, 1.0, 2.0, 3.0):
            worst = max(worst, hermite_tail_identity_check(k, u))
    assert worst < 1e-8, f"max residual {worst:.3e}"


def test_02_cosine_covariance_closed_forms():
    model = cosine()
    dom = RectDomain([0.0, 0.0], [PI, PI])
    interior = enumerate_faces(dom)[0]
    edge = Face(domain=dom, sigma=(0,), epsilon=((1, 1),))
    assert np.allclose(model.lambda_mat, 0.5 * np.eye(2), atol=1e-10)
    rng = np.random.default_rng(2024)
    for _ in range(100):
        t1, t2 = rng.uniform(1e-3, PI - 1e-3, size=2)
        cav = covariance_at(model, interior, [t1, t2])
        nu = 3.0 - math.cos(t1) - math.cos(t2)
        assert cav.nu == pytest.approx(nu, abs=1e-10)
        assert np.allclose(
            cav.lam - cav.lam_t,
            0.5 * (np.eye(2) - np.diag([math.cos(t1), math.cos(t2)])),
            atol=1e-10,
        )
        assert np.allclose(cav.c, [0.5 * math.sin(t1), 0.5 * math.sin(t2)], atol=1e-10)
        assert cav.gamma_sq == pytest.approx(
            nu - 0.5 * math.sin(t1) ** 2 - 0.5 * math.sin(t2) ** 2, abs=1e-10
        )
        cav_e = covariance_at(model, edge, [t1])
        assert cav_e.theta_sq == pytest.approx(
            4.0 - math.cos(t1) - 0.5 * math.sin(t1) ** 2, abs=1e-10
        )


def test_03_quadrature_totals_track_reference_constants():
    cases = [
        (
            "mu [0,pi/2]^2",
            RectDomain([0, 0], [PI / 2, PI / 2]),
            excursion_prob_mu,
            lambda u: gauss_tail(u / math.sqrt(3)),
            (0.98, 1.02),
        ),
        (
            "mu [0,3pi/2]x[0,pi/2]",
            RectDomain([0, 0], [1.5 * PI, PI / 2]),
            excursion_prob_mu,
            lambda u: math.sqrt(2) * gauss_tail(u / 2),
            (0.95, 1.05),
        ),
        (
            "mu [0,3pi/2]^2",
            RectDomain([0, 0], [1.5 * PI, 1.5 * PI]),
            excursion_prob_mu,
            lambda u: 2 * gauss_tail(u / S5),
            (0.95, 1.05),
        ),
        (
            "mean_ec [0,pi]^2",
            RectDomain([0, 0], [PI, PI]),
            mean_euler_characteristic,
            lambda u: (3 + 2 * math.sqrt(2)) / 4 * gauss_tail(u / S5),
            (0.9, 1.1),
        ),
        (
            "mean_ec [0,3pi/2]x[0,pi]",
            RectDomain([0, 0], [1.5 * PI, PI]),
            mean_euler_characteristic,
            lambda u: (2 + math.sqrt(2)) / 2 * gauss_tail(u / S5),
            (0.9, 1.1),
        ),
    ]
    problems = []
    for name, dom, fn, ref, (lo, hi) in cases:
        r8 = fn(cosine(), dom, 8.0, SPEC).total / ref(8.0)
        r5 = fn(cosine(), dom, 5.0, SPEC).total / ref(5.0)
        if not (lo <= r8 <= hi):
            problems.append(f"{name}: ratio(8) = {r8:.6f} outside [{lo}, {hi}]")
        if not (abs(r8 - 1) < abs(r5 - 1)):
            problems.append(
                f"{name}: no improvement, |ratio(8)-1| = {abs(r8-1):.4f} "
                f">= |ratio(5)-1| = {abs(r5-1):.4f}"
            )
    assert not problems, "; ".join(problems)


def test_04_monte_carlo_agrees_with_analytic():
    dom = RectDomain([0.0, 0.0], [PI, PI])
    problems = []

    p_hat, se = empirical_sup_prob(cosine(), dom, 4.0, 128, 200_000, seed=4, threads=4)
    target = (3 + 2 * math.sqrt(2)) / 4 * gauss_tail(4.0 / S5)
    rel = abs(p_hat - target) / target
    if rel > 0.10:
        problems.append(
            f"sup prob: p_hat = {p_hat:.6f} +/- {se:.6f} vs {target:.6f} "
            f"(rel dev {rel:.2%} > 10%)"
        )

    mean_chi, chi_se = mc_mean_ec(cosine(), dom, 2.5, 128, 100_000, seed=3, threads=4)
    want = mean_euler_characteristic(cosine(), dom, 2.5, SPEC).total
    tol = 3 * chi_se + 0.05 * abs(want)
    if abs(mean_chi - want) > tol:
        problems.append(
            f"mean EC: {mean_chi:.5f} +/- {chi_se:.5f} vs {want:.5f} (tol {tol:.5f})"
        )
    assert not problems, "; ".join(problems)


def test_05_vertex_term_factorizes_at_zero_gradient():
    # c = 0 with diagonal Lambda makes value and gradient independent, so the
    # orthant probability is exactly Psi(u / sqrt(nu)) / 2^N
    cases = []
    dom2 = RectDomain([0.0, 0.0], [PI, PI])
    v2 = Face(domain=dom2, sigma=(), epsilon=((0, 1), (1, 1)))
    cases.append((cosine(), v2, 3.0, 5.0, 2))

    m1 = SpectralSumField(freqs=np.array([[1.0]]), weights=np.array([0.5]), offset_var=1.0)
    v1 = Face(domain=RectDomain([0.5], [PI]), sigma=(), epsilon=((0, 1),))
    cases.append((m1, v1, 2.0, 3.0, 1))

    m3 = SpectralSumField(freqs=np.eye(3), weights=np.full(3, 0.5), offset_var=1.0)
    v3 = Face(
        domain=RectDomain([0.0] * 3, [PI] * 3),
        sigma=(),
        epsilon=((0, 1), (1, 1), (2, 1)),
    )
    cases.append((m3, v3, 3.0, 7.0, 3))

    for model, vert, u, nu, n in cases:
        res = mec._vertex_term_result(model, vert, u, seed=0)
        want = gauss_tail(u / math.sqrt(nu)) / 2**n
        assert abs(res.p - want) <= 3 * max(res.err_est, 1e-12), (n, res.p, want)

    # headline case: quarter tail at the flat corner of [0, pi]^2
    val = vertex_term(cosine(), v2, 3.0)
    assert val == pytest.approx(0.25 * gauss_tail(3.0 / S5), rel=1e-5)


def test_06_euler_characteristic_routes_agree():
    rng = np.random.default_rng(12345)
    for i in range(500):
        r = int(rng.integers(1, 21))
        c = int(rng.integers(1, 21))
        p = float(rng.uniform(0.2, 0.8))
        mask = rng.random((r, c)) < p
        assert empirical_ec(mask.astype(float), 0.5).chi == ec_oracle_2d(mask), i

    block = np.zeros((8, 8))
    block[2:7, 1:6] = 1.0
    assert empirical_ec(block, 0.5).chi == 1
    ring = np.zeros((8, 8))
    ring[1:5, 1:5] = 1.0
    ring[2:4, 2:4] = 0.0
    assert empirical_ec(ring, 0.5).chi == 0
    two = np.zeros((8, 8))
    two[0:2, 0:2] = 1.0
    two[5:8, 4:8] = 1.0
    assert empirical_ec(two, 0.5).chi == 2


def test_07_structural_properties():
    for n in range(1, 7):
        dom = RectDomain([0.0] * n, [1.0] * n)
        assert len(enumerate_faces(dom)) == 3**n, n

    dom = RectDomain([0.0, 0.0], [PI, PI])
    interior = enumerate_faces(dom)[0]
    a = face_term_mean_ec(cosine(), interior, 6.0, SPEC)
    b = face_term_mu(cosine(), interior, 6.0, SPEC)
    assert a == pytest.approx(b, rel=1e-6)

    res = excursion_prob_mu(cosine(), dom, 7.0, SPEC)
    assert res.total == pytest.approx(
        math.fsum(v for _, v in res.per_face), abs=1e-12 * max(1.0, abs(res.total))
    )

    t1 = excursion_prob_mu(cosine(), dom, 7.0, SPEC, threads=1)
    t4 = excursion_prob_mu(cosine(), dom, 7.0, SPEC, threads=4)
    assert t1.total == t4.total
    assert [v for _, v in t1.per_face] == [v for _, v in t4.per_face]
    p1 = empirical_sup_prob(cosine(), dom, 2.0, 17, 600, seed=6, threads=1)
    p4 = empirical_sup_prob(cosine(), dom, 2.0, 17, 600, seed=6, threads=4)
    assert p1 == p4


def test_08_tau_hessian_reference_values():
    edge_dom = RectDomain([0.0, 0.0], [1.5 * PI, PI / 2])
    edge = Face(domain=edge_dom, sigma=(0,), epsilon=((1, 1),))
    h_edge = tau_hessian(cosine(), edge, [PI, PI / 2])
    assert h_edge.shape == (1, 1)
    assert abs(h_edge[0, 0] + 2.0) < 1e-5, h_edge

    int_dom = RectDomain([0.0, 0.0], [1.5 * PI, 1.5 * PI])
    interior = enumerate_faces(int_dom)[0]
    h_int = tau_hessian(cosine(), interior, [PI, PI])
    assert np.abs(h_int + 2.0 * np.eye(2)).max() < 1e-5, h_int

import math
import warnings

import numpy as np
import pytest

from excursion_kit.errors import CapabilityError, QuadratureError, QuadratureWarning
from excursion_kit.gauss import gauss_tail, hermite
from excursion_kit.geometry import Face, OutwardCone, RectDomain
from excursion_kit.quad import (
    QuadSpec,
    TailMap,
    integrate_box,
    integrate_cone,
    integrate_face,
    integrate_tail,
)

PI = math.pi
SPEC = QuadSpec()


def test_polynomial_exactness():
    # order-24 Gauss-Legendre integrates monomials up to degree 47 exactly
    lower, upper = [0.0], [2.0]
    for k in (0, 1, 5, 17, 31, 47):
        res = integrate_box(lambda t: t[:, 0] ** k, lower, upper, SPEC)
        want = 2.0 ** (k + 1) / (k + 1)
        assert res.value == pytest.approx(want, rel=1e-13), k


def test_separable_product():
    f2 = integrate_box(
        lambda t: np.exp(-t[:, 0] - t[:, 1]), [0.0, 0.0], [1.0, 1.0], SPEC
    )
    f1 = integrate_box(lambda t: np.exp(-t[:, 0]), [0.0], [1.0], SPEC)
    assert f2.value == pytest.approx(f1.value**2, rel=1e-12)


def test_trig_closed_form_2d():
    res = integrate_box(
        lambda t: np.cos(t[:, 0]) * np.sin(t[:, 1]),
        [0.0, 0.0],
        [PI / 2, PI / 2],
        SPEC,
    )
    assert res.value == pytest.approx(1.0, rel=1e-13)


def test_against_plain_monte_carlo():
    # integral of exp(-nu(t)) over [0,pi]^2 with nu = 3 - cos t1 - cos t2;
    # the oracle is brute-force Monte Carlo with its own RNG stream
    def f(t):
        return np.exp(-(3.0 - np.cos(t[:, 0]) - np.cos(t[:, 1])))

    res = integrate_box(f, [0.0, 0.0], [PI, PI], SPEC)
    rng = np.random.default_rng(2024)
    n = 2_000_000
    pts = rng.uniform(0.0, PI, size=(n, 2))
    vals = f(pts)
    mc = vals.mean() * PI**2
    se = vals.std(ddof=1) / math.sqrt(n) * PI**2
    assert abs(res.value - mc) <= 4 * se


def test_adaptive_handles_sharp_bump():
    # narrow Gaussian bump: single-panel quadrature is badly wrong, the
    # adaptive refinement must land within rel_tol
    s = 0.01
    want = s * math.sqrt(2 * PI) * (
        1 - 2 * gauss_tail(0.5 / s)
    )  # mass inside [0,1] of N(0.5, s^2)

    def f(t):
        return np.exp(-0.5 * ((t[:, 0] - 0.5) / s) ** 2)

    res = integrate_box(f, [0.0], [1.0], QuadSpec(rel_tol=1e-9))
    assert res.converged
    assert res.value == pytest.approx(want, rel=1e-7)


def test_nonconvergence_warns():
    # a kink defeats polynomial quadrature; with the depth capped at 1 and an
    # unreachable tolerance the integrator must flag non-convergence
    def f(t):
        return np.abs(t[:, 0] - 0.5) ** 0.3

    with pytest.warns(QuadratureWarning):
        res = integrate_box(
            f, [0.0], [1.0], QuadSpec(rel_tol=1e-15, abs_tol=1e-300, max_subdivisions=1)
        )
    assert not res.converged


def test_non_adaptive_single_pass():
    res = integrate_box(
        lambda t: t[:, 0] ** 2, [0.0], [1.0], QuadSpec(adaptive=False)
    )
    assert res.value == pytest.approx(1 / 3, rel=1e-14)
    assert math.isnan(res.err_est)


def test_nonfinite_integrand_raises():
    def f(t):
        with np.errstate(invalid="ignore"):
            return np.log(t[:, 0] - 0.5)  # NaN on the left half

    with pytest.raises(QuadratureError, match="non-finite"):
        integrate_box(f, [0.0], [1.0], SPEC)


def test_integrate_face_matches_box():
    dom = RectDomain([0.0, 0.0], [2.0, 3.0])
    face = Face(domain=dom, sigma=(1,), epsilon=((0, 1),))

    def g(s):
        return np.sin(s[:, 0])

    res = integrate_face(face, g, SPEC)
    want = 1 - math.cos(3.0)
    assert res.value == pytest.approx(want, rel=1e-12)


# ---------------------------------------------------------------------------
# Tail integrals
# ---------------------------------------------------------------------------


def test_tail_gaussian_mass():
    res = integrate_tail(2.0, lambda x: np.exp(-0.5 * x**2), SPEC)
    assert res.value == pytest.approx(math.sqrt(2 * PI) * gauss_tail(2.0), rel=1e-10)


def test_tail_hermite_identity_k3():
    # int_1^inf He_3(x) e^{-x^2/2} dx = He_2(1) e^{-1/2} = 0
    res = integrate_tail(
        1.0, lambda x: hermite(3, x) * np.exp(-0.5 * x**2), SPEC
    )
    assert abs(res.value) < 1e-10


def test_tail_x_exp():
    res = integrate_tail(0.0, lambda x: x * np.exp(-0.5 * x**2), SPEC)
    assert res.value == pytest.approx(1.0, rel=1e-12)


def test_tail_map_change_of_variables():
    tm = TailMap(origin=3.0, sign=1.0)
    s = np.array([0.0, 0.5, 0.9])
    x = tm.map(s)
    assert x[0] == pytest.approx(3.0)
    assert x[1] == pytest.approx(4.0)
    assert np.all(np.diff(x) > 0)
    assert np.all(tm.weight(s) > 0)


# ---------------------------------------------------------------------------
# Cone integrals
# ---------------------------------------------------------------------------


def std2_pdf(y):
    return np.exp(-0.5 * (y[:, 0] ** 2 + y[:, 1] ** 2)) / (2 * PI)


def test_cone_orthant_quarter():
    cone = OutwardCone(constraints=((0, 1), (1, 1)))
    res = integrate_cone(cone, None, lambda y: std2_pdf(y), SPEC)
    assert res.value == pytest.approx(0.25, rel=1e-8)


def test_cone_sign_symmetry():
    pp = OutwardCone(constraints=((0, 1), (1, 1)))
    mm = OutwardCone(constraints=((0, -1), (1, -1)))
    a = integrate_cone(pp, None, lambda y: std2_pdf(y), SPEC)
    b = integrate_cone(mm, None, lambda y: std2_pdf(y), SPEC)
    assert a.value == pytest.approx(b.value, rel=1e-10)


def test_cone_with_level_coordinate():
    # first coordinate is the field value X ~ N(0, 5), independent of two
    # derivative coordinates each N(0, 1/2): mass above u=2 in the ++ cone
    cone = OutwardCone(constraints=((0, 1), (1, 1)))

    def h(z):
        x, y1, y2 = z[:, 0], z[:, 1], z[:, 2]
        px = np.exp(-0.5 * x**2 / 5.0) / math.sqrt(2 * PI * 5.0)
        py = np.exp(-(y1**2 + y2**2)) / PI  # two N(0, 1/2) densities
        return px * py

    res = integrate_cone(cone, 2.0, h, SPEC)
    want = gauss_tail(2.0 / math.sqrt(5.0)) * 0.25
    assert res.value == pytest.approx(want, rel=1e-7)


def test_cone_dimension_cap():
    cone = OutwardCone(constraints=tuple((j, 1) for j in range(5)))
    with pytest.raises(CapabilityError, match="Monte Carlo"):
        integrate_cone(cone, None, lambda y: np.ones(len(y)), SPEC)


def test_order_doubling_stability():
    def f(t):
        return np.exp(-(3.0 - np.cos(t[:, 0]) - np.cos(t[:, 1])))

    a = integrate_box(f, [0.0, 0.0], [PI, PI], QuadSpec(order_per_axis=24))
    b = integrate_box(f, [0.0, 0.0], [PI, PI], QuadSpec(order_per_axis=48))
    assert a.value == pytest.approx(b.value, rel=1e-11)

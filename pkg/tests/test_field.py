import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from excursion_kit.errors import ConfigError, DegenerateModelError
from excursion_kit.field import (
    CosineField,
    FaultInjectedField,
    GaussianIncrementField,
    SpectralSumField,
    check_h2,
    covariance_at,
    derivative_consistency,
    field_from_dict,
    field_to_dict,
    max_variance,
)
from excursion_kit.geometry import Face, RectDomain, enumerate_faces, face_of_point

PI = math.pi


def cosine():
    return CosineField()


def interior_face(dom):
    return enumerate_faces(dom)[0]


# ---------------------------------------------------------------------------
# Closed-form oracles for the cosine field (independent hand derivations):
#   nu(t)       = 3 - cos t1 - cos t2
#   Lambda      = I/2,  Lambda(t) = diag(cos t1, cos t2)/2
#   c(t)        = (sin t1, sin t2)/2
#   gamma^2(t)  = nu - sin^2 t1 / 2 - sin^2 t2 / 2        (interior face)
#   theta^2(t)  = nu - sin^2 t1 / 2                       (edge, axis-1 free)
# ---------------------------------------------------------------------------


def test_cosine_closed_forms_at_random_points():
    model = cosine()
    dom = RectDomain([0.0, 0.0], [PI, PI])
    interior = interior_face(dom)
    edge = Face(domain=dom, sigma=(0,), epsilon=((1, 1),))  # t2 = pi
    rng = np.random.default_rng(101)
    assert np.allclose(model.lambda_mat, 0.5 * np.eye(2), atol=1e-12)
    for _ in range(100):
        t1, t2 = rng.uniform(0.05, PI - 0.05, size=2)
        cav = covariance_at(model, interior, [t1, t2])
        nu = 3 - math.cos(t1) - math.cos(t2)
        assert cav.nu == pytest.approx(nu, abs=1e-10)
        assert np.allclose(
            cav.lam - cav.lam_t,
            0.5 * (np.eye(2) - np.diag([math.cos(t1), math.cos(t2)])),
            atol=1e-10,
        )
        assert np.allclose(
            cav.c, [0.5 * math.sin(t1), 0.5 * math.sin(t2)], atol=1e-10
        )
        want_gamma = nu - 0.5 * math.sin(t1) ** 2 - 0.5 * math.sin(t2) ** 2
        assert cav.gamma_sq == pytest.approx(want_gamma, abs=1e-10)

        cav_e = covariance_at(model, edge, [t1])
        nu_e = 3 - math.cos(t1) + 1.0
        want_theta = nu_e - 0.5 * math.sin(t1) ** 2
        assert cav_e.theta_sq == pytest.approx(want_theta, abs=1e-10)


def test_lambda_spectral_equals_variogram_route():
    model = cosine()
    assert np.allclose(model.lambda_spectral, model.lambda_mat, atol=1e-12)
    rng = np.random.default_rng(5)
    freqs = rng.standard_normal((4, 3))
    weights = rng.uniform(0.1, 2.0, size=4)
    m = SpectralSumField(freqs=freqs, weights=weights, offset_var=0.5)
    assert np.allclose(m.lambda_spectral, m.lambda_mat, atol=1e-10)


def test_gaussian_increment_structure():
    m = GaussianIncrementField(dim=2, scale=1.5)
    # g(h) = 2(1 - exp(-|h/l|^2)) so Lambda = (2/l^2) I
    assert np.allclose(m.lambda_mat, (2 / 1.5**2) * np.eye(2), atol=1e-12)
    t = np.array([0.3, -0.4])
    want = 2 * (1 - math.exp(-np.dot(t / 1.5, t / 1.5)))
    assert m.variance(t) == pytest.approx(want, rel=1e-12)


def test_derivative_consistency_passes_for_real_models():
    dom2 = RectDomain([0.0, 0.0], [PI, PI])
    assert derivative_consistency(cosine(), dom2).passed
    assert derivative_consistency(GaussianIncrementField(dim=2), dom2).passed
    dom3 = RectDomain([0.0] * 3, [1.0] * 3)
    rng = np.random.default_rng(17)
    m = SpectralSumField(
        freqs=rng.standard_normal((3, 3)),
        weights=rng.uniform(0.2, 1.0, 3),
        offset_var=0.3,
    )
    assert derivative_consistency(m, dom3).passed


def test_derivative_consistency_catches_fault_injection():
    dom = RectDomain([0.0, 0.0], [PI, PI])
    rep = derivative_consistency(FaultInjectedField(cosine(), 1.3), dom)
    assert not rep.passed


@st.composite
def spectral_models(draw):
    n = draw(st.integers(1, 3))
    m = draw(st.integers(1, 3))
    freqs = [
        [draw(st.floats(-2, 2, allow_nan=False)) for _ in range(n)] for _ in range(m)
    ]
    # keep at least one atom per axis direction informative
    for i in range(n):
        freqs[i % m][i] += 1.0
    weights = [draw(st.floats(0.2, 2.0)) for _ in range(m)]
    offset = draw(st.floats(0.1, 2.0))
    return SpectralSumField(
        freqs=np.array(freqs, dtype=float),
        weights=np.array(weights, dtype=float),
        offset_var=offset,
    )


@given(spectral_models(), st.data())
@settings(max_examples=40, deadline=None)
def test_conditional_variances_are_ordered(model, data):
    n = model.dim
    dom = RectDomain([0.1] * n, [1.9] * n)
    interior = interior_face(dom)
    t = [data.draw(st.floats(0.2, 1.8)) for _ in range(n)]
    try:
        cav = covariance_at(model, interior, t)
    except DegenerateModelError:
        return  # randomly drawn atoms may be collinear; nothing to check
    assert cav.gamma_sq >= -1e-12
    assert cav.gamma_sq <= cav.nu + 1e-12
    if n >= 2:
        edge = Face(
            domain=dom, sigma=tuple(range(n - 1)), epsilon=((n - 1, 0),)
        )
        cav_e = covariance_at(model, edge, t[: n - 1])
        # conditioning on more derivatives can only shrink the variance
        assert cav_e.gamma_sq <= cav_e.theta_sq + 1e-12
        assert cav_e.theta_sq <= cav_e.nu + 1e-12


def test_zero_gradient_point_has_full_conditional_variance():
    model = cosine()
    dom = RectDomain([0.5, 0.5], [2 * PI - 0.5, 2 * PI - 0.5])
    cav = covariance_at(model, interior_face(dom), [PI, PI])
    assert np.allclose(cav.c, 0.0, atol=1e-12)
    assert np.allclose(cav.cvec, 0.0, atol=1e-12)
    assert cav.gamma_sq == pytest.approx(cav.nu, rel=1e-12)


# ---------------------------------------------------------------------------
# H2 scan
# ---------------------------------------------------------------------------


def test_check_h2_cosine_clean():
    rep = check_h2(cosine(), RectDomain([0.0, 0.0], [PI, PI]))
    assert not rep.flagged
    assert rep.min_eig > 0


def test_check_h2_flags_zero_frequency_atom():
    m = SpectralSumField(
        freqs=np.array([[0.0, 0.0], [1.0, 0.0]]),
        weights=np.array([1.0, 0.5]),
        offset_var=1.0,
    )
    rep = check_h2(m, RectDomain([0.0, 0.0], [3.0, 3.0]))
    assert rep.flagged


def test_check_h2_flags_full_period_crossing():
    # single-atom model: Lambda - Lambda(t) = (1 - cos t)/2 vanishes at t = 2pi;
    # an odd grid count on a symmetric window pins a grid point exactly there
    m = SpectralSumField(
        freqs=np.array([[1.0]]), weights=np.array([0.5]), offset_var=1.0
    )
    rep = check_h2(m, RectDomain([2 * PI - 1.0], [2 * PI + 1.0]), grid_per_axis=33)
    assert rep.flagged
    assert abs(rep.argmin[0] - 2 * PI) < 1e-9


# ---------------------------------------------------------------------------
# Variance maximizer
# ---------------------------------------------------------------------------


def test_max_variance_corner_case():
    res = max_variance(cosine(), RectDomain([0.0, 0.0], [PI / 2, PI / 2]))
    assert res.sigma_sq == pytest.approx(3.0, abs=1e-9)
    assert np.allclose(res.point, [PI / 2, PI / 2], atol=1e-7)
    assert res.face.k == 0


def test_max_variance_edge_case():
    res = max_variance(cosine(), RectDomain([0.0, 0.0], [3 * PI / 2, PI / 2]))
    assert res.sigma_sq == pytest.approx(4.0, abs=1e-9)
    assert np.allclose(res.point, [PI, PI / 2], atol=1e-6)
    assert res.face.sigma == (0,)


def test_max_variance_interior_case():
    res = max_variance(cosine(), RectDomain([0.0, 0.0], [3 * PI / 2, 3 * PI / 2]))
    assert res.sigma_sq == pytest.approx(5.0, abs=1e-9)
    assert np.allclose(res.point, [PI, PI], atol=1e-6)
    assert res.face.k == 2
    assert not res.tied


def test_max_variance_reports_ties():
    # t1 = pi and t1 = 3pi give the same variance on an elongated rectangle
    res = max_variance(cosine(), RectDomain([0.0, 0.0], [4 * PI, PI / 2]))
    assert res.tied
    assert len(res.candidates) >= 2


# ---------------------------------------------------------------------------
# Serialization
# ---------------------------------------------------------------------------


def test_field_dict_round_trip():
    for model in (
        cosine(),
        GaussianIncrementField(dim=3, scale=0.7, offset_var=0.2),
        SpectralSumField(
            freqs=np.array([[1.0, 0.5]]), weights=np.array([0.4]), offset_var=0.1
        ),
        FaultInjectedField(cosine(), 1.1),
    ):
        d = field_to_dict(model)
        back = field_from_dict(d)
        assert field_to_dict(back) == d


def test_field_from_dict_rejects_junk():
    with pytest.raises(ConfigError):
        field_from_dict({"type": "nope"})
    with pytest.raises(ConfigError):
        field_from_dict({"type": "cosine", "extra": 1})
    with pytest.raises(ConfigError):
        field_from_dict({"type": "spectral_sum", "atoms": []})
    with pytest.raises(ConfigError):
        field_from_dict(
            {"type": "spectral_sum", "atoms": [{"freq": [1.0], "weight": -1.0}]}
        )
    with pytest.raises(ConfigError):
        field_from_dict({"type": "gaussian_increment", "dim": 0})


def test_spectral_rejects_bad_shapes():
    with pytest.raises(ConfigError):
        SpectralSumField(freqs=np.ones((2, 2)), weights=np.ones(3))
    with pytest.raises(ConfigError):
        SpectralSumField(
            freqs=np.ones((1, 1)), weights=np.array([1.0]), offset_var=-1.0
        )

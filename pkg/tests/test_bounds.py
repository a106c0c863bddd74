import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from resonance_atlas.bounds import (
    ASSUMPTION_DROPPED,
    bound_report,
    correction_estimate,
    eval_C2,
    eval_dzC1,
    eval_M3,
    eval_M4,
)
from resonance_atlas.contour import QuadratureSettings, integrate_quadrant
from resonance_atlas.errors import SingularDenominator
from resonance_atlas.friedrichs import TwoLevelModel, f_values, real_zero_principal, zeta_eigenvalue
from resonance_atlas.two_excitation import context_at, eval_C1, principal_real_zero

LAM = 0.1


def z02(mu):
    return principal_real_zero(context_at(LAM, mu)).root


@pytest.fixture(scope="module")
def zeros():
    return {mu: z02(mu) for mu in (1e-4, 3e-3, 6e-3, 6.3662e-3)}


def test_decoupled_is_zero():
    m = TwoLevelModel(0.0, 3e-3)
    assert eval_C2(m, -0.01) == 0 and eval_M3(m, -0.01) == 0 and eval_M4(m, -0.01) == 0
    assert eval_dzC1(m, -0.01) == 0
    assert correction_estimate(m, -0.01) == 0


def test_table_values(zeros):
    m3 = TwoLevelModel(LAM, 3e-3)
    assert abs(eval_C2(m3, zeros[3e-3]).real / 2 - 0.038) <= 0.05 * 0.038
    m6 = TwoLevelModel(LAM, 6e-3)
    assert abs(eval_M3(m6, zeros[6e-3]) / 6 - 7.7e-3) <= 0.1 * 7.7e-3
    assert abs(eval_M4(m6, zeros[6e-3]) / 24 - 3.68e-4) <= 0.1 * 3.68e-4
    mc = TwoLevelModel(LAM, 6.3662e-3)
    assert abs(eval_dzC1(mc, zeros[6.3662e-3]).real - 285) <= 0.05 * 285


def test_dzC1_at_mu0():
    z = zeta_eigenvalue(0, 2, LAM)
    val = eval_dzC1(TwoLevelModel(LAM, 0.0), z)
    assert abs(val - (-0.01 * (2 * z - 1) / LAM ** 4)) < 1e-9
    assert abs(val - 103.9) < 0.05


@settings(max_examples=10, deadline=None)
@given(st.floats(0.5e-3, 6e-3), st.floats(-0.05, -0.012), st.floats(-0.01, 0.01))
def test_dzC1_matches_finite_difference(mu, x, y):
    m = TwoLevelModel(LAM, mu)
    z = complex(x, y)
    h = 1e-6
    fd = (eval_C1(m, z + h) - eval_C1(m, z - h)) / (2 * h)
    assert abs(eval_dzC1(m, z) - fd) <= 1e-6 * (1 + abs(fd))


def test_dzC1_nested_form_agrees(zeros):
    m = TwoLevelModel(LAM, 3e-3)
    z = zeros[3e-3]
    assert abs(eval_dzC1(m, z, "nested") - eval_dzC1(m, z)) <= 1e-9 * abs(eval_dzC1(m, z))


def test_correction_examples(zeros):
    mc = TwoLevelModel(LAM, 6.3662e-3)
    c = correction_estimate(mc, zeros[6.3662e-3])
    assert 3e-4 <= c <= 5e-4
    m1 = TwoLevelModel(LAM, 1e-4)
    assert abs(correction_estimate(m1, zeros[1e-4]) - 1.57e-5) <= 0.05 * 1.57e-5


def test_report_metadata(zeros):
    rep = bound_report(TwoLevelModel(LAM, 1e-4), zeros[1e-4])
    d = rep.as_dict()
    assert ASSUMPTION_DROPPED in d["assumptions"]
    assert d["m3"] >= 0 and d["m4"] >= 0
    assert math.isclose(rep.correction_magnitude, (abs(rep.c2) / 2 + rep.m3 / 6) / abs(rep.dz_c1))


def test_order_decay(zeros):
    for mu, z in zeros.items():
        m = TwoLevelModel(LAM, mu)
        c2, m3, m4 = eval_C2(m, z).real / 2, eval_M3(m, z) / 6, eval_M4(m, z) / 24
        assert c2 > m3 > m4 > 0


def _d2(m, z):
    mu = m.mu
    w = z / mu
    g = lambda x: np.sqrt(2 / np.pi) * x / (1 + x * x)
    f = lambda p: f_values(m.lam, mu, z - mu * p)

    def d2(p, q):
        return g(p) ** 2 * g(q) ** 2 * (p - q) ** 2 / (f(p) * (w - 2 * p) * f(q) * (w - 2 * q) * (w - p - q) ** 2)
    return d2


def test_diagonal_vanishes():
    m = TwoLevelModel(LAM, 3e-3)
    d2 = _d2(m, -0.01)
    p = np.linspace(0.1, 10, 9)
    assert np.all(d2(p, p) == 0)


@settings(max_examples=10, deadline=None)
@given(st.floats(1e-4, 6e-3), st.floats(-0.05, -0.008), st.floats(-0.01, 0.01))
def test_signed_C2_bounded_by_absolute(mu, x, y):
    m = TwoLevelModel(LAM, mu)
    z = complex(x, y)
    d2 = _d2(m, z)
    s = max(1.0, abs(z) / mu)
    loose = QuadratureSettings(abs_tol=1e-16, rel_tol=1e-6, max_subdivisions=60000)
    absolute = LAM ** 4 / mu ** 2 * 4 * integrate_quadrant(lambda p, q: np.abs(d2(p, q)), loose, scale=(s, s)).real
    assert abs(eval_C2(m, z)) <= absolute * (1 + 1e-5)


@settings(max_examples=8, deadline=None)
@given(st.floats(1e-4, 6e-3), st.floats(1e-3, 0.04))
def test_positivity_on_negative_axis(mu, gap):
    m = TwoLevelModel(LAM, mu)
    x = real_zero_principal(m).root.real - gap
    c2 = eval_C2(m, x)
    assert abs(c2.imag) <= 1e-12 * abs(c2) and c2.real >= 0
    assert eval_M3(m, x) >= 0 and eval_M4(m, x) >= 0


def test_singular_ray_rejected():
    m = TwoLevelModel(LAM, 3e-4)
    with pytest.raises(SingularDenominator):
        eval_C2(m, -0.008)

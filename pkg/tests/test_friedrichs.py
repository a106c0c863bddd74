import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from resonance_atlas.contour import integrate_ray
from resonance_atlas.errors import ContinuationLost, EvaluationAtPole, EvaluationOnCut, UnsupportedMu
from resonance_atlas.friedrichs import (
    ParameterPath,
    SheetTag,
    TwoLevelModel,
    eval_df,
    eval_f,
    eval_f_quadrature,
    eval_g,
    f_at_origin,
    mu_critical,
    mu_critical_quadrature,
    phi_eigenvector_coeffs,
    photon_amplitude_psi01,
    real_zero_principal,
    sheet_jump,
    trace_resonance_along_path,
    trace_resonance_in_mu,
    zeta_eigenvalue,
)

P, PLUS, HAT = SheetTag.PRINCIPAL, SheetTag.CONTINUED_PLUS, SheetTag.HAT
lam_st = st.floats(0.01, 0.5)
mu_st = st.floats(1e-3, 3.0)


def test_g_values():
    assert eval_g(0.0) == 0.0
    assert abs(eval_g(1.0) - math.sqrt(2 / math.pi) / 2) < 1e-15
    assert abs(2 * integrate_ray(lambda p: eval_g(p.real) ** 2) - 1) < 1e-12


def test_decoupled_f():
    m = TwoLevelModel(0.0, 1.0)
    assert eval_f(m, 1 + 1e-300j) == pytest.approx(0.0, abs=1e-15)
    assert abs(eval_f(m, 0.3 + 2j) - (0.3 + 2j - 1)) < 1e-15


def test_f_vanishes_at_origin_at_mu_c():
    lam = 0.1
    m = TwoLevelModel(lam, mu_critical(lam))
    assert abs(f_at_origin(m)) < 1e-14
    assert abs(eval_f(m, -1e-9 + 0j)) < 1e-6


def test_closed_form_vs_quadrature_example():
    m = TwoLevelModel(0.1, 1.0)
    assert abs(eval_f(m, -1 + 2j) - eval_f_quadrature(m, -1 + 2j)) <= 1e-10


def test_mu_critical():
    assert mu_critical(0.0) == 0.0
    assert abs(mu_critical(0.1) - 0.02 / math.pi) < 1e-16
    assert abs(mu_critical(0.2) - 2.5465e-2) < 1e-6
    assert abs(mu_critical_quadrature(0.1) - mu_critical(0.1)) < 1e-12


def test_zeta_values():
    assert zeta_eigenvalue(0, 3, 0.0) == 0.0 and zeta_eigenvalue(1, 3, 0.0) == 1.0
    assert abs(zeta_eigenvalue(0, 2, 0.1) + 1.96e-2) < 1e-4
    assert abs(zeta_eigenvalue(1, 2, 0.1) - 1.01962) < 1e-5


@settings(max_examples=40, deadline=None)
@given(st.sampled_from([0, 1]), st.integers(1, 8), st.floats(1e-4, 2.0))
def test_eigenvector_coeffs(i, n, lam):
    ca, cp = phi_eigenvector_coeffs(i, n, lam)
    assert abs(ca * ca + cp * cp - 1) < 1e-14
    s = math.sqrt(n) * lam
    M = np.array([[1.0, s], [s, 0.0]])
    v = np.array([ca, cp])
    assert np.linalg.norm(M @ v - zeta_eigenvalue(i, n, lam) * v) < 1e-14


def test_eigenvector_decoupled_limit():
    ca, cp = phi_eigenvector_coeffs(1, 1, 1e-9)
    assert abs(ca - 1) < 1e-15 and abs(cp) < 1e-8


def test_photon_amplitude():
    m = TwoLevelModel(0.1, 1e-3)
    assert photon_amplitude_psi01(m, 0.0) == 0.0
    z = real_zero_principal(m).root.real
    norm2 = 2 * integrate_ray(lambda p: photon_amplitude_psi01(m, p.real, z) ** 2)
    assert math.isfinite(norm2.real) and norm2.real > 0
    small = TwoLevelModel(0.1, 1e-9)
    p = np.linspace(0.1, 5, 7)
    germ = 0.1 * eval_g(p) / zeta_eigenvalue(0, 1, 0.1)
    assert np.allclose(photon_amplitude_psi01(small, p), germ, rtol=1e-5)
    with pytest.raises(UnsupportedMu):
        photon_amplitude_psi01(TwoLevelModel(0.1, 0.01), 1.0)


def test_removable_point_i_mu():
    m = TwoLevelModel(0.3, 0.5)
    z = 0.5j
    assert abs(eval_f(m, z) - eval_f_quadrature(m, z)) < 1e-10
    near = z + 2e-3
    assert abs(eval_f(m, near) - eval_f(m, z)) < 1e-2
    h = 1e-6
    fd = (eval_f(m, z + h) - eval_f(m, z - h)) / (2 * h)
    assert abs(eval_df(m, z) - fd) < 1e-6
    with pytest.raises(EvaluationAtPole):
        eval_f(m, z, PLUS)


def test_argument_checks():
    m = TwoLevelModel(0.1, 1.0)
    with pytest.raises(EvaluationOnCut):
        eval_f(m, 0.5 + 0j)
    with pytest.raises(EvaluationOnCut):
        eval_f(m, -0.5j, HAT)
    with pytest.raises(EvaluationAtPole):
        eval_f(m, -1j)
    with pytest.raises(EvaluationAtPole):
        eval_f(m, 0j)
    with pytest.raises(UnsupportedMu):
        eval_f(TwoLevelModel(0.1, 0.0), -1 + 0j)
    with pytest.raises(ValueError):
        TwoLevelModel(-0.1, 1.0)


@settings(max_examples=100, deadline=None)
@given(lam_st, mu_st, st.floats(-3, 3), st.floats(0.01, 3))
def test_closed_form_matches_quadrature(lam, mu, x, y):
    m = TwoLevelModel(lam, mu)
    z = complex(x, y)
    if abs(z - 1j * mu) < 1e-2 * mu:
        return
    assert abs(eval_f(m, z) - eval_f_quadrature(m, z)) <= 1e-8


@settings(max_examples=50, deadline=None)
@given(lam_st, mu_st, st.floats(-3, 3), st.floats(-3, -0.01))
def test_sheet_jump_identity(lam, mu, x, y):
    m = TwoLevelModel(lam, mu)
    z = complex(x, y)
    if abs(z + 1j * mu) < 1e-2 * mu or abs(x) < 1e-6:
        return
    jump = sheet_jump(lam, mu, z)
    assert abs(eval_f(m, z, PLUS) - eval_f(m, z, P) - jump) <= 1e-10 * (1 + abs(jump))
    if x > 0:
        # the hat sheet is the continuation from above through the positive axis
        assert abs(eval_f(m, z, PLUS) - eval_f(m, z, HAT)) <= 1e-10 * (1 + abs(jump))
    else:
        assert abs(eval_f(m, z, HAT) - eval_f(m, z, P)) <= 1e-12 * (1 + abs(jump))


def test_sheet_jump_is_boundary_discontinuity():
    m = TwoLevelModel(0.1, 0.5)
    for x in (0.05, 0.3, 2.0):
        gap = eval_f(m, x + 1e-9j) - eval_f(m, x - 1e-9j)
        assert abs(gap - sheet_jump(0.1, 0.5, x)) < 1e-7


@settings(max_examples=60, deadline=None)
@given(lam_st, mu_st, st.floats(-3, 3), st.floats(0.01, 3))
def test_schwarz_reflection(lam, mu, x, y):
    m = TwoLevelModel(lam, mu)
    z = complex(x, y)
    if abs(z - 1j * mu) < 1e-2 * mu:
        return
    assert abs(eval_f(m, z.conjugate()) - eval_f(m, z).conjugate()) <= 1e-12 * (1 + abs(eval_f(m, z)))


@settings(max_examples=30, deadline=None)
@given(lam_st, mu_st, st.floats(-3, 3), st.floats(-3, 3))
def test_derivative_matches_difference(lam, mu, x, y):
    z = complex(x, y)
    m = TwoLevelModel(lam, mu)
    if abs(y) < 0.05 or abs(z + 1j * mu) < 0.05 or abs(z - 1j * mu) < 0.05:
        return
    h = 1e-6
    fd = (eval_f(m, z + h) - eval_f(m, z - h)) / (2 * h)
    assert abs(fd - eval_df(m, z)) <= 1e-6 * (1 + abs(fd))


def test_hat_sheet_continuous_across_positive_axis():
    m = TwoLevelModel(0.1, 1.0)
    above = eval_f(m, 0.7 + 1e-10j, HAT)
    below = eval_f(m, 0.7 - 1e-10j, HAT)
    assert abs(above - below) < 1e-8
    assert abs(eval_f(m, 0.7 + 1e-10j, P) - eval_f(m, 0.7 - 1e-10j, P)) > 1e-3


GRID = [0.0, 1e-4, 1e-3, 3e-3, 6e-3, 6.2e-3, 6.36e-3, 6.366e-3, 0.01, 0.5, 1.0, 2.0]


@pytest.fixture(scope="module")
def traj0():
    return trace_resonance_in_mu(0.1, 0, GRID)


@pytest.fixture(scope="module")
def traj1():
    return trace_resonance_in_mu(0.1, 1, [0.0, 0.01, 0.1, 1.0, 2.0])


def test_trace_family0_examples(traj0):
    assert abs(traj0.at(1e-3).z - (-68e-4)) <= 0.02 * 68e-4
    assert abs(traj0.at(2.0).z - (0.13 - 1.97j)) < 0.01
    assert abs(traj0.at(1.0).z - (0.11 - 0.95j)) < 0.01


def test_trace_family1_examples(traj1):
    assert abs(traj1.at(0.0).z - 1.0099) < 1e-4
    z1 = traj1.at(1.0).z
    assert abs(z1.real - 0.997) < 2e-3 and abs(z1.imag + 0.010) < 2e-3
    z2 = traj1.at(2.0).z
    assert abs(z2.real - 0.995) < 2e-3 and abs(z2.imag + 0.0032) < 2e-3


def test_family0_real_and_increasing_below_mu_c(traj0):
    below = [s for s in traj0.samples if 0 < s.mu < mu_critical(0.1)]
    assert all(s.z.imag == 0 and s.z.real < 0 for s in below)
    xs = [s.z.real for s in below]
    assert all(b > a for a, b in zip(xs, xs[1:]))


@settings(max_examples=10, deadline=None)
@given(st.floats(0.05, 0.3))
def test_real_zero_monotone_in_mu(lam):
    mus = np.linspace(0.05, 0.95, 12) * mu_critical(lam)
    xs = [real_zero_principal(TwoLevelModel(lam, m)).root.real for m in mus]
    assert all(x < 0 for x in xs)
    assert all(b > a for a, b in zip(xs, xs[1:]))


def test_residuals_and_germs(traj0, traj1):
    for traj in (traj0, traj1):
        for s in traj.samples:
            if s.mu == 0:
                continue
            sheet = SheetTag(s.branch)
            r = abs(eval_f(TwoLevelModel(0.1, s.mu), s.z, sheet))
            assert r <= 1e-10 * (1 + abs(s.z))
    assert traj0.samples[0].z == zeta_eigenvalue(0, 1, 0.1)
    assert abs(traj0.at(1e-4).z - zeta_eigenvalue(0, 1, 0.1)) < 10 * 1e-4
    assert traj1.samples[0].z == zeta_eigenvalue(1, 1, 0.1)


def test_trace_is_continuous_across_mu_c():
    lam = 0.1
    mc = mu_critical(lam)
    grid = [mc * (1 - 1e-3), mc * (1 + 1e-3), mc * 1.01]
    tr = trace_resonance_in_mu(lam, 0, grid)
    zs = tr.zs
    assert zs[0].imag == 0
    assert abs(zs[1] - zs[0]) < 1e-5
    assert zs[2].imag < 0


def test_trace_deterministic():
    a = trace_resonance_in_mu(0.1, 0, [0.0, 0.01, 0.5])
    b = trace_resonance_in_mu(0.1, 0, [0.0, 0.01, 0.5])
    assert [s.z for s in a.samples] == [s.z for s in b.samples]


def test_trace_rejects_bad_grid():
    with pytest.raises(ValueError):
        trace_resonance_in_mu(0.1, 0, [0.1, 0.05])
    with pytest.raises(ValueError):
        trace_resonance_in_mu(0.1, 2, [0.1])


def test_path_mu_leg_matches_mu_trace(traj0):
    # mu-path at fixed lambda from just above mu_c to 1 gives the same zero
    start = traj0.at(0.01).z
    tr = trace_resonance_along_path(ParameterPath([(0.1, 0.01), (0.1, 1.0)]), start, steps_per_leg=100)
    assert abs(tr.samples[-1].z - traj0.at(1.0).z) < 1e-9


def test_path_lambda_leg_family1():
    # lambda: 0 -> 0.1 at mu = 1, started just below the real axis at 1
    tr = trace_resonance_along_path(ParameterPath([(1e-4, 1.0), (0.1, 1.0)]), 1 - 1e-8j, steps_per_leg=200)
    end = tr.samples[-1].z
    assert abs(end.real - 0.997) < 2e-3 and abs(end.imag + 0.010) < 2e-3


def test_path_reverse_lambda_tends_to_minus_i(traj0):
    tr = trace_resonance_along_path(ParameterPath([(0.1, 1.0), (0.02, 1.0)]), traj0.at(1.0).z)
    d = [abs(s.z + 1j) for s in tr.samples]
    assert all(b < a for a, b in zip(d, d[1:]))
    assert d[-1] < 0.3


def test_path_pole_guard_halts():
    tr = trace_resonance_along_path(ParameterPath([(0.1, 1.0), (1e-3, 1.0)]),
                                    trace_resonance_in_mu(0.1, 0, [0.0, 1.0]).zs[-1], pole_guard=5e-2)
    assert tr.halted == "pole-approach"


def test_continuation_lost_keeps_partial():
    from resonance_atlas.friedrichs import continue_zero
    with pytest.raises(ContinuationLost):
        # zero of z - s for s < 1, then the function has no zero at all
        list(continue_zero(lambda s, z: (z - s) if s < 1 else 1.0 + 0j, [0.0, 0.5, 2.0], 0j))

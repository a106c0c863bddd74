import cmath
import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from resonance_atlas.contour import (
    PolylinePath,
    QuadratureSettings,
    RootSettings,
    crossings_of_shifted_ray,
    find_root_complex,
    gamma0_path,
    integrate_quadrant,
    integrate_ray,
    integrate_segment,
)
from resonance_atlas.errors import RootNotConverged, ToleranceNotMet
from resonance_atlas.friedrichs import SheetTag, TwoLevelModel, eval_f, g_squared

coord = st.floats(-3, 3, allow_nan=False)


def test_constant_segment():
    assert abs(integrate_segment(lambda z: np.ones_like(z), 0, 1 + 1j) - (1 + 1j)) < 1e-14


def test_one_over_z_quarter_arc():
    val = integrate_segment(lambda z: 1 / z, 1, 1j)
    assert abs(val - (cmath.log(1j) - cmath.log(1))) < 1e-12


def test_ray_examples():
    assert abs(integrate_ray(lambda q: np.exp(-q)) - 1) < 1e-12
    assert abs(integrate_ray(g_squared) - 0.5) < 1e-12
    assert abs(integrate_ray(lambda q: g_squared(q) / q) - 1 / math.pi) < 1e-12


@pytest.mark.parametrize("lam", [0.1, 0.7])
def test_ray_matches_f_decomposition(lam):
    val = integrate_ray(lambda q: g_squared(q) / (-1 - q))
    f = eval_f(TwoLevelModel(lam, 1.0), -1.0 + 0j)
    assert abs(val - (f + 2) / (-2 * lam * lam)) < 1e-12


def test_ray_with_start_and_direction():
    # int_0^inf exp(-(1+i) t)(1+i) dt along direction 1+i from 0 equals 1
    val = integrate_ray(lambda z: np.exp(-z), direction=1 + 1j)
    assert abs(val - 1) < 1e-12


def test_quadrant():
    assert abs(integrate_quadrant(lambda p, q: np.exp(-p - 2 * q)) - 0.5) < 1e-10
    val = integrate_quadrant(lambda p, q: 1 / ((1 + p * p) * (1 + q * q)))
    assert abs(val - math.pi ** 2 / 4) < 1e-8


def test_tolerance_not_met():
    tight = QuadratureSettings(abs_tol=1e-16, rel_tol=1e-16, max_subdivisions=2)
    with pytest.raises(ToleranceNotMet):
        integrate_segment(lambda z: np.sqrt(np.abs(z.real - 0.3)), 0, 1, tight)


@settings(max_examples=30, deadline=None)
@given(coord, coord, coord, coord, st.floats(-2, 2), st.floats(-2, 2))
def test_linearity_and_reversal(ar, ai, br, bi, alpha, beta):
    a, b = complex(ar, ai), complex(br, bi)
    if abs(a - b) < 1e-6:
        return
    u = np.exp
    v = lambda z: z ** 3 - 2j * z
    lhs = integrate_segment(lambda z: alpha * u(z) + beta * v(z), a, b)
    rhs = alpha * integrate_segment(u, a, b) + beta * integrate_segment(v, a, b)
    assert abs(lhs - rhs) <= 2e-9 * (1 + abs(lhs))
    assert abs(integrate_segment(u, b, a) + integrate_segment(u, a, b)) <= 1e-9 * (1 + abs(lhs))
    assert abs(integrate_segment(u, a, b) - (np.exp(b) - np.exp(a))) <= 1e-9 * (1 + abs(np.exp(b)))


def test_crossing_examples():
    path = PolylinePath([-1, -1 + 0.1j, 1 + 0.1j, 1 - 1j])
    assert crossings_of_shifted_ray(path, 0.5 - 0.5j) == 1
    assert crossings_of_shifted_ray(path, 2 - 0.5j) == 0
    upper = PolylinePath([1j, 2 + 1j, 3 + 2j])
    assert crossings_of_shifted_ray(upper, 0.5) == 0


def test_crossing_tie_break():
    # vertex exactly on the ray: shifting the anchor down keeps the count well defined
    path = PolylinePath([1 + 1j, 1 + 0j, 1 - 1j])
    assert crossings_of_shifted_ray(path, 0j) == 1
    # a segment lying on the ray is moved off it by the same shift
    assert crossings_of_shifted_ray(PolylinePath([1 + 0j, 2 + 0j]), 0j) == 0


def _ngon(center, r, sign=1, n=64, phase=0.1):
    t = phase + sign * 2 * np.pi * np.arange(n + 1) / n
    pts = list(center + r * np.exp(1j * t))
    pts[-1] = pts[0]
    return PolylinePath(pts)


@settings(max_examples=60, deadline=None)
@given(coord, coord, st.floats(0.1, 2), st.sampled_from([1, -1]), coord, coord)
def test_crossing_parity_is_winding(cx, cy, r, sign, px, py):
    center = complex(cx, cy)
    c = complex(px, py)
    d = abs(c - center)
    if abs(d - r) < 0.05 * r:
        return
    winding = -sign if d < r * math.cos(math.pi / 64) else 0
    # downward crossings count +1, so clockwise loops (sign -1) wind +1
    assert crossings_of_shifted_ray(_ngon(center, r, sign), c) == winding


def test_gamma0_vertices():
    assert gamma0_path(-0.1, 1 - 1j, 0.01).vertices == (-0.1, -0.1 + 0.01j, 1 + 0.01j, 1 - 1j)
    assert gamma0_path(-0.1, -0.05, 0.01).vertices == (-0.1, -0.1 + 0.01j, -0.05 + 0.01j, -0.05)
    assert crossings_of_shifted_ray(gamma0_path(-0.1, 1 - 1j, 0.01), 0.5 - 0.4j) == 1
    with pytest.raises(ValueError):
        gamma0_path(-0.1, 1, 0.0)


def test_root_examples():
    assert abs(find_root_complex(lambda z: z * z + 1, 0.5 + 0.8j).root - 1j) < 1e-12
    m = TwoLevelModel(0.1, 1.0)
    r = find_root_complex(lambda z: eval_f(m, z, SheetTag.CONTINUED_PLUS), 0.1 - 0.9j)
    assert abs(r.root - (0.11 - 0.95j)) < 0.01
    r = find_root_complex(lambda z: z * (z - 1) - 0.02, -0.02)
    assert abs(r.root - (1 - math.sqrt(1.08)) / 2) < 1e-13


def test_root_failure_reported():
    with pytest.raises(RootNotConverged):
        find_root_complex(lambda z: 1.0 + 0j, 0.3, RootSettings(1e-12, 1e-12, 10))
    res = find_root_complex(lambda z: z * z + 1, 0j, RootSettings(1e-12, 1e-12, 3), raise_on_failure=False)
    assert not res.converged


@settings(max_examples=40, deadline=None)
@given(st.lists(st.complex_numbers(max_magnitude=2), min_size=2, max_size=4),
       st.integers(0, 3), st.floats(-0.3, 0.3), st.floats(-0.3, 0.3))
def test_root_polynomials(roots, pick, dx, dy):
    sep = min(abs(a - b) for i, a in enumerate(roots) for b in roots[i + 1:])
    if sep < 0.2:
        return
    target = roots[pick % len(roots)]
    p = np.poly1d(np.poly(roots))
    seed = target + complex(dx, dy) * sep
    res = find_root_complex(lambda z: complex(p(z)), seed)
    assert abs(res.root - target) < 1e-9
    assert res.residual <= 1e-12 * max(1.0, np.abs(p.coeffs).max())

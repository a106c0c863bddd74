"""Complex-plane plumbing: polylines, adaptive quadrature, ray crossings, roots.

All integrands are expected to be vectorised: they receive a complex ndarray
and return an array of the same shape.  Scalar-only callables can be wrapped
with ``numpy.vectorize`` or passed with ``vectorized=False``.
"""

from __future__ import annotations

import cmath
import math
from dataclasses import dataclass, field
from typing import Callable, Sequence

import numpy as np

from .errors import (
    DegenerateGeometry,
    DivergenceDetected,
    NonFiniteIntegrand,
    RootNotConverged,
    ToleranceNotMet,
)

# Gauss-Kronrod 7/15 abscissae and weights on [-1, 1] (QUADPACK qk15).
_XGK = np.array([
    0.991455371120812639206854697526329,
    0.949107912342758524526189684047851,
    0.864864423359769072789712788640926,
    0.741531185599394439863864773280788,
    0.586087235467691130294144845693013,
    0.405845151377397166906606412076961,
    0.207784955007898467600689403773245,
    0.0,
])
_WGK = np.array([
    0.022935322010529224963732008058970,
    0.063092092629978553290700663189204,
    0.104790010322250183839876322541518,
    0.140653259715525918745189590510238,
    0.169004726639267902826583426598550,
    0.190350578064785409913256402421014,
    0.204432940075298892414161999234649,
    0.209482141084727828012999174891714,
])
_WG = np.array([
    0.129484966168869693270611432679082,
    0.279705391489276667901467771423780,
    0.381830050505118944950369775488975,
    0.417959183673469387755102040816327,
])

# full 15-point layout, ordered from -1 to 1
_NODES = np.concatenate([-_XGK[:-1], [0.0], _XGK[-2::-1]])
_KW = np.concatenate([_WGK[:-1], [_WGK[-1]], _WGK[-2::-1]])
_GW = np.zeros(15)
_GW[1::2] = np.concatenate([_WG[:-1], [_WG[-1]], _WG[-2::-1]])

TIE_EPS = 1e-14
TIE_SHIFT = 1e-12


def _check_point(z, name="point"):
    z = complex(z)
    if not (math.isfinite(z.real) and math.isfinite(z.imag)):
        raise ValueError(f"{name} must be finite, got {z!r}")
    return z


@dataclass(frozen=True)
class QuadratureSettings:
    abs_tol: float = 1e-13
    rel_tol: float = 1e-11
    max_subdivisions: int = 4000

    def __post_init__(self):
        if not (self.abs_tol > 0 and self.rel_tol > 0):
            raise ValueError("quadrature tolerances must be positive")
        if self.max_subdivisions < 1:
            raise ValueError("max_subdivisions must be >= 1")


DEFAULT_QUAD = QuadratureSettings()


@dataclass(frozen=True)
class QuadResult:
    value: complex
    error: float
    intervals: int
    evaluations: int


@dataclass(frozen=True)
class PolylinePath:
    vertices: tuple

    def __init__(self, vertices: Sequence[complex]):
        pts = tuple(_check_point(v, "vertex") for v in vertices)
        if len(pts) < 2:
            raise ValueError("a polyline needs at least two vertices")
        for a, b in zip(pts, pts[1:]):
            if a == b:
                raise ValueError("consecutive vertices must be distinct")
        object.__setattr__(self, "vertices", pts)

    def segments(self):
        return list(zip(self.vertices, self.vertices[1:]))

    def length(self) -> float:
        return float(sum(abs(b - a) for a, b in self.segments()))

    def reversed(self) -> "PolylinePath":
        return PolylinePath(self.vertices[::-1])


def _gk_adaptive(phi, lo, hi, settings, at_infinity=False):
    """Adaptive G7K15 on the real interval [lo, hi] for vectorised ``phi``.

    Intervals are bisected greedily: those carrying the largest error
    estimates are split until the remaining estimate fits the tolerance.
    Summation runs in interval order, so results are deterministic.
    """
    a = np.array([lo], dtype=float)
    b = np.array([hi], dtype=float)
    vals = np.empty(0, dtype=complex)
    errs = np.empty(0, dtype=float)
    los = np.empty(0)
    his = np.empty(0)
    nevals = 0
    while True:
        c = 0.5 * (a + b)
        h = 0.5 * (b - a)
        t = c[:, None] + h[:, None] * _NODES[None, :]
        y = np.asarray(phi(t), dtype=complex)
        nevals += y.size
        if not np.all(np.isfinite(y)):
            bad = t[~np.isfinite(y)]
            raise NonFiniteIntegrand(f"non-finite integrand sample near t={bad.flat[0]!r}")
        k = (y @ _KW) * h
        g = (y @ _GW) * h
        mean = (y @ _KW) / 2.0
        resasc = h * (np.abs(y - mean[:, None]) @ _KW)
        err = np.abs(k - g)
        with np.errstate(divide="ignore", invalid="ignore"):
            scaled = resasc * np.minimum(1.0, (200.0 * err / resasc) ** 1.5)
        err = np.where(resasc > 0, scaled, err)
        # floor against round-off
        err = np.maximum(err, 50 * np.finfo(float).eps * np.abs(k))
        los = np.concatenate([los, a])
        his = np.concatenate([his, b])
        vals = np.concatenate([vals, k])
        errs = np.concatenate([errs, err])
        order = np.argsort(los, kind="stable")
        los, his, vals, errs = los[order], his[order], vals[order], errs[order]
        total = complex(np.sum(vals))
        toterr = float(np.sum(errs))
        tol = max(settings.abs_tol, settings.rel_tol * abs(total))
        if toterr <= tol:
            return QuadResult(total, toterr, len(vals), nevals)
        # split the largest contributors until what is left fits in tol/2
        idx = np.argsort(-errs, kind="stable")
        csum = np.cumsum(errs[idx])
        nsplit = int(np.searchsorted(csum, toterr - 0.5 * tol) + 1)
        nsplit = max(1, min(nsplit, len(idx)))
        chosen = np.sort(idx[:nsplit])
        widths = his[chosen] - los[chosen]
        # stop splitting intervals that cannot be halved any more
        if np.any(widths <= 4 * np.finfo(float).eps * np.maximum(1.0, np.abs(los[chosen]))):
            raise ToleranceNotMet("interval width underflow", total, toterr)
        if len(vals) + nsplit > settings.max_subdivisions:
            worst = int(np.argmax(errs))
            if at_infinity and worst == len(errs) - 1:
                raise DivergenceDetected(
                    "tail estimate does not shrink near infinity; integrand may not decay")
            raise ToleranceNotMet(
                f"max subdivisions ({settings.max_subdivisions}) exhausted; "
                f"error estimate {toterr:.3g} > {tol:.3g}", total, toterr)
        mid = 0.5 * (los[chosen] + his[chosen])
        a = np.concatenate([los[chosen], mid])
        b = np.concatenate([mid, his[chosen]])
        keep = np.ones(len(vals), dtype=bool)
        keep[chosen] = False
        los, his, vals, errs = los[keep], his[keep], vals[keep], errs[keep]


def _as_vectorized(integrand, vectorized):
    if vectorized:
        return integrand
    vec = np.vectorize(lambda x: complex(integrand(complex(x))), otypes=[complex])
    return vec


def integrate_segment(integrand: Callable, a, b, settings: QuadratureSettings = DEFAULT_QUAD,
                      *, full_output: bool = False, vectorized: bool = True):
    """Integral of ``integrand`` along the straight segment a -> b.

    Endpoint singularities of power < 1 are tolerated; the Kronrod nodes
    never touch the endpoints.
    """
    a = _check_point(a, "a")
    b = _check_point(b, "b")
    fn = _as_vectorized(integrand, vectorized)
    d = b - a
    if d == 0:
        res = QuadResult(0j, 0.0, 0, 0)
    else:
        res = _gk_adaptive(lambda t: fn(a + d * t) * d, 0.0, 1.0, settings)
    return res if full_output else res.value


def integrate_path(integrand: Callable, path: PolylinePath,
                   settings: QuadratureSettings = DEFAULT_QUAD, *, vectorized: bool = True):
    return sum((integrate_segment(integrand, p, q, settings, vectorized=vectorized)
                for p, q in path.segments()), 0j)


def integrate_ray(integrand: Callable, settings: QuadratureSettings = DEFAULT_QUAD, *,
                  start=0j, direction=1.0, scale: float = 1.0,
                  full_output: bool = False, vectorized: bool = True):
    """Integral of ``integrand(start + direction*q)*direction`` for q in [0, inf).

    The half line is compactified with q = scale * t / (1 - t).
    """
    start = _check_point(start, "start")
    direction = _check_point(direction, "direction")
    if direction == 0 or scale <= 0:
        raise ValueError("direction must be nonzero and scale positive")
    fn = _as_vectorized(integrand, vectorized)

    def phi(t):
        one_m = 1.0 - t
        q = scale * t / one_m
        return fn(start + direction * q) * (direction * scale / one_m ** 2)

    res = _gk_adaptive(phi, 0.0, 1.0, settings, at_infinity=True)
    return res if full_output else res.value


def integrate_quadrant(integrand: Callable, settings: QuadratureSettings = DEFAULT_QUAD, *,
                       scale=(1.0, 1.0), full_output: bool = False):
    """Adaptive tensor G7K15 cubature over [0, inf)^2.

    ``integrand(p, q)`` receives equally shaped arrays.  Each axis is mapped
    by x = scale * t / (1 - t); cells are halved along the axis whose
    embedded Gauss rule disagrees most.
    """
    sp, sq = (float(scale[0]), float(scale[1]))
    if sp <= 0 or sq <= 0:
        raise ValueError("scale must be positive")
    kk = np.outer(_KW, _KW)
    gk = np.outer(_GW, _KW)
    kg = np.outer(_KW, _GW)

    def evaluate(cells):
        c = 0.5 * (cells[:, 0::2] + cells[:, 1::2])
        h = 0.5 * (cells[:, 1::2] - cells[:, 0::2])
        t = c[:, 0, None] + h[:, 0, None] * _NODES[None, :]
        u = c[:, 1, None] + h[:, 1, None] * _NODES[None, :]
        with np.errstate(divide="ignore"):
            p = sp * t / (1 - t)
            q = sq * u / (1 - u)
        jp = sp / (1 - t) ** 2
        jq = sq / (1 - u) ** 2
        P = np.broadcast_to(p[:, :, None], (len(cells), 15, 15))
        Q = np.broadcast_to(q[:, None, :], (len(cells), 15, 15))
        y = np.asarray(integrand(P, Q), dtype=complex) * jp[:, :, None] * jq[:, None, :]
        if not np.all(np.isfinite(y)):
            raise NonFiniteIntegrand("non-finite integrand sample in quadrant cubature")
        area = h[:, 0] * h[:, 1]
        k = np.einsum("nij,ij->n", y, kk) * area
        ep = np.abs(k - np.einsum("nij,ij->n", y, gk) * area)
        eq = np.abs(k - np.einsum("nij,ij->n", y, kg) * area)
        err = np.maximum(np.maximum(ep, eq), 50 * np.finfo(float).eps * np.abs(k))
        return k, err, ep >= eq

    cells = np.array([[0.0, 1.0, 0.0, 1.0]])
    vals, errs, axis = evaluate(cells)
    nevals = 225
    while True:
        total = complex(np.sum(vals[np.lexsort(cells.T[::-1])]))
        toterr = float(np.sum(errs))
        tol = max(settings.abs_tol, settings.rel_tol * abs(total))
        if toterr <= tol:
            break
        idx = np.argsort(-errs, kind="stable")
        csum = np.cumsum(errs[idx])
        nsplit = int(np.searchsorted(csum, toterr - 0.5 * tol) + 1)
        nsplit = max(1, min(nsplit, len(idx), 256))
        if len(vals) + nsplit > settings.max_subdivisions:
            raise ToleranceNotMet(
                f"max subdivisions ({settings.max_subdivisions}) exhausted; "
                f"error estimate {toterr:.3g} > {tol:.3g}", total, toterr)
        chosen = idx[:nsplit]
        par = cells[chosen]
        lo_child = par.copy()
        hi_child = par.copy()
        for n, ax in enumerate(axis[chosen]):
            j = 0 if ax else 2
            m = 0.5 * (par[n, j] + par[n, j + 1])
            lo_child[n, j + 1] = m
            hi_child[n, j] = m
        new = np.concatenate([lo_child, hi_child])
        nv, ne, na = evaluate(new)
        nevals += 225 * len(new)
        keep = np.ones(len(vals), dtype=bool)
        keep[chosen] = False
        cells = np.concatenate([cells[keep], new])
        vals = np.concatenate([vals[keep], nv])
        errs = np.concatenate([errs[keep], ne])
        axis = np.concatenate([axis[keep], na])
    if full_output:
        return QuadResult(total, toterr, len(vals), nevals)
    return total


def crossings_of_shifted_ray(path: PolylinePath, c) -> int:
    """Signed number of crossings of the horizontal ray c + [0, inf).

    A downward crossing counts +1, an upward one -1.  If a vertex sits on the
    ray (within 1e-14) the ray anchor is moved down by 1e-12 and the count is
    redone.
    """
    c = _check_point(c, "c")
    if _touches_ray(path, c):
        c = complex(c.real, c.imag - TIE_SHIFT)
        if _touches_ray(path, c):
            raise DegenerateGeometry("path vertex lies on the ray even after tie-break shift")
    y0 = c.imag
    count = 0
    for p, q in path.segments():
        dp, dq = p.imag - y0, q.imag - y0
        if dp == 0 and dq == 0:
            raise DegenerateGeometry("segment collinear with the ray")
        if (dp > 0) == (dq > 0):
            continue
        s = dp / (dp - dq)
        x = p.real + s * (q.real - p.real)
        if x > c.real:
            count += 1 if dq < dp else -1
    return count


def _touches_ray(path, c):
    for v in path.vertices:
        if abs(v.imag - c.imag) <= TIE_EPS and v.real >= c.real - TIE_EPS:
            return True
    return False


def gamma0_path(B, z, epsilon: float) -> PolylinePath:
    """The polyline B, B+i eps, Re(z)+i eps, z used as reference path."""
    if not epsilon > 0:
        raise ValueError("epsilon must be positive")
    B = _check_point(B, "B")
    if B.imag != 0:
        raise ValueError("base point B must be real")
    z = _check_point(z, "z")
    pts = [B, B + 1j * epsilon, complex(z.real, epsilon), z]
    dedup = [pts[0]]
    for p in pts[1:]:
        if p != dedup[-1]:
            dedup.append(p)
    return PolylinePath(dedup)


@dataclass(frozen=True)
class RootSettings:
    abs_tol: float = 1e-12
    rel_tol: float = 1e-10
    max_iter: int = 60

    def __post_init__(self):
        if not (self.abs_tol > 0 and self.rel_tol > 0 and self.max_iter >= 1):
            raise ValueError("invalid root settings")


DEFAULT_ROOT = RootSettings()


@dataclass(frozen=True)
class RootResult:
    root: complex
    residual: float
    iterations: int
    converged: bool
    message: str = field(default="")


def _safe_eval(fn, z):
    try:
        v = complex(fn(z))
    except Exception as exc:  # evaluator refused the point (cut, pole, ...)
        return None, exc
    if not (math.isfinite(v.real) and math.isfinite(v.imag)):
        return None, None
    return v, None


def find_root_complex(fn: Callable[[complex], complex], seed,
                      settings: RootSettings = DEFAULT_ROOT, *,
                      raise_on_failure: bool = True) -> RootResult:
    """Newton iteration with a central-difference derivative.

    The derivative step is h = 1e-7 (1 + |z|).  When the derivative is zero
    or non-finite a secant step through the previous iterate is used.  Steps
    that increase |fn| are halved up to eight times.
    """
    z = _check_point(seed, "seed")
    fz, exc = _safe_eval(fn, z)
    if fz is None:
        res = RootResult(z, math.inf, 0, False, f"function undefined at seed: {exc}")
        if raise_on_failure:
            raise RootNotConverged(res.message, res)
        return res
    prev = None
    msg = "iteration cap reached"
    for it in range(1, settings.max_iter + 1):
        h = 1e-7 * (1.0 + abs(z))
        fp, _ = _safe_eval(fn, z + h)
        fm, _ = _safe_eval(fn, z - h)
        d = None
        if fp is not None and fm is not None:
            d = (fp - fm) / (2 * h)
        if d is None or d == 0 or not cmath.isfinite(d):
            if prev is not None and prev[0] != z:
                d = (fz - prev[1]) / (z - prev[0])
            else:
                zz = z + 1e-4 * (1.0 + abs(z))
                fzz, _ = _safe_eval(fn, zz)
                d = None if fzz is None else (fzz - fz) / (zz - z)
            if d is None or d == 0 or not cmath.isfinite(d):
                msg = "derivative singular and secant fallback failed"
                break
        step = -fz / d
        tol_step = settings.rel_tol * abs(z) + settings.abs_tol
        if abs(fz) <= settings.abs_tol and abs(step) <= tol_step:
            return RootResult(z, abs(fz), it - 1, True)
        lam = 1.0
        for _ in range(9):
            znew = z + lam * step
            fnew, _ = _safe_eval(fn, znew)
            if fnew is not None and (abs(fnew) < abs(fz) or abs(fnew) <= settings.abs_tol):
                break
            lam *= 0.5
        else:
            # accept the full step if nothing improved; Newton may still recover
            znew = z + step
            fnew, _ = _safe_eval(fn, znew)
            if fnew is None:
                msg = "function undefined along the Newton direction"
                break
        prev = (z, fz)
        z, fz = znew, fnew
        if abs(fz) <= settings.abs_tol and abs(lam * step) <= settings.rel_tol * abs(z) + settings.abs_tol:
            return RootResult(z, abs(fz), it, True)
    res = RootResult(z, abs(fz) if fz is not None else math.inf, it, False, msg)
    if raise_on_failure:
        raise RootNotConverged(f"root search from {seed!r} failed: {msg}", res)
    return res

"""Error control for the truncated determinant: C2, the Hoelder majorants
M3 and M4, the derivative of C1 in z, and the resulting zero correction.

Integrals over R^2 are folded onto the quadrant (a factor 4); all
integrands depend on |p|, |q| only.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .contour import QuadratureSettings, integrate_quadrant, integrate_ray
from .errors import SingularDenominator
from .friedrichs import (
    SheetTag, TwoLevelModel, df_values, f_values, g_squared, mu_critical, real_zero_principal)

BOUND_QUAD = QuadratureSettings(abs_tol=1e-16, rel_tol=1e-7, max_subdivisions=60000)
RAY_QUAD = QuadratureSettings(abs_tol=1e-15, rel_tol=1e-11, max_subdivisions=4000)

ASSUMPTION_DROPPED = ("terms (z - z0) dC2/dz and (z - z0) dC3/dz neglected in the "
                      "correction estimate")


def _g(x):
    return np.sqrt(2.0 / np.pi) * x / (1.0 + x * x)


def _check(model, z):
    z = complex(z)
    if model.mu > 0 and z.imag == 0 and z.real >= 0:
        raise SingularDenominator("bounds need z off the positive real axis")
    if z.imag == 0 and model.lam > 0 and 0 < model.mu < mu_critical(model.lam):
        # f(z - mu p) vanishes on the ray once z passes the real zero of f
        x01 = real_zero_principal(model).root.real
        if z.real >= x01:
            raise SingularDenominator(f"z = {z.real:.6g} is not below the real zero {x01:.6g} of f")
    return z


def _fw(model, z, p):
    return f_values(model.lam, model.mu, z - model.mu * p, SheetTag.PRINCIPAL)


def _scale(model, z):
    return max(1.0, abs(z) / model.mu)


def eval_C2(model: TwoLevelModel, z, settings: QuadratureSettings = BOUND_QUAD) -> complex:
    """(lam^2/mu)^2 times the R^2 integral of the signed second-order kernel."""
    lam, mu = model.lam, model.mu
    if lam == 0 or mu == 0:
        return 0j
    z = _check(model, z)
    w = z / mu

    def d2(p, q):
        return (_g(p) ** 2 * _g(q) ** 2 * (p - q) ** 2
                / (_fw(model, z, p) * (w - 2 * p) * _fw(model, z, q) * (w - 2 * q) * (w - p - q) ** 2))

    s = _scale(model, z)
    return lam ** 4 / mu ** 2 * 4.0 * integrate_quadrant(d2, settings, scale=(s, s))


def _phi(model, z, gpow, root):
    mu = model.mu
    w = z / mu

    def phi(p, q):
        num = np.abs(_g(p) * _g(q)) ** gpow * (1 + p) ** 0.25 * (1 + q) ** 0.25 * (p - q) ** 2
        den = (np.abs(_fw(model, z, p) * _fw(model, z, q) * (w - 2 * p) * (w - 2 * q)) ** (1.0 / root)
               * np.abs(w - p - q) ** 2)
        return num / den

    return phi


def eval_M3(model: TwoLevelModel, z, settings: QuadratureSettings = BOUND_QUAD) -> float:
    """4 (lam^2/mu)^3 ||phi3||_3^3."""
    lam, mu = model.lam, model.mu
    if lam == 0 or mu == 0:
        return 0.0
    z = _check(model, z)
    phi = _phi(model, z, 1.0, 2)
    s = _scale(model, z)
    val = integrate_quadrant(lambda p, q: phi(p, q) ** 3, settings, scale=(s, s))
    return float(4.0 * (lam * lam / mu) ** 3 * 4.0 * val.real)


def eval_M4(model: TwoLevelModel, z, settings: QuadratureSettings = BOUND_QUAD) -> float:
    """16 (lam^2/mu)^4 ||phi4||_6^6."""
    lam, mu = model.lam, model.mu
    if lam == 0 or mu == 0:
        return 0.0
    z = _check(model, z)
    phi = _phi(model, z, 2.0 / 3.0, 3)
    s = _scale(model, z)
    val = integrate_quadrant(lambda p, q: phi(p, q) ** 6, settings, scale=(s, s))
    return float(16.0 * (lam * lam / mu) ** 4 * 4.0 * val.real)


def eval_dzC1(model: TwoLevelModel, z, method: str = "closed",
              settings: QuadratureSettings = RAY_QUAD) -> complex:
    """Derivative of C1 in z.

    ``closed`` differentiates under the integral with the closed form of
    f'; ``nested`` writes f' itself as an integral, giving a 1D plus a 2D term.
    """
    lam, mu = model.lam, model.mu
    z = complex(z)
    if lam == 0:
        return 0j
    if mu == 0:
        den = z * z - z - lam * lam
        if den == 0:
            raise SingularDenominator("z^2 - z = lam^2")
        return -lam * lam * (2 * z - 1) / den ** 2
    z = _check(model, z)

    if method == "closed":
        def h(p):
            p = p.real
            wp = z - mu * p
            fv = f_values(lam, mu, wp, SheetTag.PRINCIPAL)
            dv = df_values(lam, mu, wp, SheetTag.PRINCIPAL)
            s = z - 2 * mu * p
            return g_squared(p) / (fv * s) * (1.0 / s + dv / fv)

        return -2.0 * lam * lam * integrate_ray(h, settings, scale=_scale(model, z))
    if method != "nested":
        raise ValueError("method must be 'closed' or 'nested'")

    def h1(p):
        p = p.real
        fv = _fw(model, z, p)
        s = z - 2 * mu * p
        return g_squared(p) / (fv * s) * (1.0 / s + 1.0 / fv)

    def h2(p, q):
        fv = _fw(model, z, p)
        return _g(p) ** 2 * _g(q) ** 2 / (fv ** 2 * (z - 2 * mu * p) * (z - mu * (p + q)) ** 2)

    sc = _scale(model, z)
    one = integrate_ray(h1, settings, scale=sc)
    quad2 = QuadratureSettings(abs_tol=1e-14, rel_tol=1e-9, max_subdivisions=60000)
    two = integrate_quadrant(h2, quad2, scale=(sc, 1.0))
    return -2.0 * lam * lam * one - 4.0 * lam ** 4 * two


@dataclass(frozen=True)
class BoundReport:
    lam: float
    mu: float
    z: complex
    c2: float
    m3: float
    m4: float
    dz_c1: float
    correction_magnitude: float
    assumptions: tuple = field(default=(ASSUMPTION_DROPPED,))

    def as_dict(self):
        return {"lam": self.lam, "mu": self.mu, "z": [self.z.real, self.z.imag],
                "c2": self.c2, "m3": self.m3, "m4": self.m4, "dz_c1": self.dz_c1,
                "correction_magnitude": self.correction_magnitude,
                "assumptions": list(self.assumptions)}


def correction_estimate(model: TwoLevelModel, z0) -> float:
    """(|C2|/2 + M3/6) / |dC1/dz| at a zero of the truncated determinant."""
    if model.lam == 0:
        return 0.0
    return bound_report(model, z0, with_m4=False).correction_magnitude


def bound_report(model: TwoLevelModel, z, with_m4: bool = True) -> BoundReport:
    z = complex(z)
    c2 = eval_C2(model, z)
    m3 = eval_M3(model, z)
    m4 = eval_M4(model, z) if with_m4 else float("nan")
    d = eval_dzC1(model, z)
    c2v = c2.real if abs(c2.imag) <= 1e-12 * max(abs(c2), 1e-300) else abs(c2)
    dv = d.real if abs(d.imag) <= 1e-12 * max(abs(d), 1e-300) else abs(d)
    corr = (abs(c2) / 2 + m3 / 6) / abs(d) if d != 0 else math.inf
    return BoundReport(model.lam, model.mu, z, float(c2v), m3, m4, float(dv), corr)

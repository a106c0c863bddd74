"""One-excitation sector of the two-level model.

The coupling function is fixed to g(p) = sqrt(2/pi) p / (1 + p^2), normalised
so that the integral of g^2 over the real line is 1.  The self-energy
function

    f(lam, mu, z) = z - 1 - 2 lam^2 int_0^inf g(p)^2 / (z - mu p) dp

has a closed form (see ``_f_closed``) which is used on every sheet.
"""

from __future__ import annotations

import enum
import math
from dataclasses import dataclass, field
from typing import Iterable, Sequence

import numpy as np
from scipy.optimize import brentq

from .contour import (
    DEFAULT_QUAD,
    RootResult,
    RootSettings,
    find_root_complex,
    integrate_ray,
)
from .errors import (
    ContinuationLost,
    EvaluationAtPole,
    EvaluationOnCut,
    RootNotConverged,
    UnsupportedMu,
)

SQRT_2_OVER_PI = math.sqrt(2.0 / math.pi)
HANDOFF_DELTA = 1e-6
GUARD_MULTIPLE = 5.0
MAX_HALVINGS = 6
MAX_STEP_RATIO = 1.25

TRACE_ROOT = RootSettings(abs_tol=1e-13, rel_tol=1e-11, max_iter=60)


class SheetTag(enum.Enum):
    PRINCIPAL = "principal"
    CONTINUED_PLUS = "continued_plus"
    HAT = "hat"


@dataclass(frozen=True)
class TwoLevelModel:
    lam: float
    mu: float

    def __post_init__(self):
        if not (math.isfinite(self.lam) and math.isfinite(self.mu)):
            raise ValueError("model parameters must be finite")
        if self.lam < 0 or self.mu < 0:
            raise ValueError("lambda and mu must be nonnegative")


def eval_g(p):
    p = np.asarray(p, dtype=float) if not np.iscomplexobj(p) else np.asarray(p)
    out = SQRT_2_OVER_PI * p / (1.0 + p * p)
    return out.item() if out.ndim == 0 else out


def g_squared(x):
    """g(x)^2 continued analytically to complex x (poles at +-i)."""
    return (2.0 / math.pi) * x * x / (1.0 + x * x) ** 2


def mu_critical(lam: float) -> float:
    if lam < 0:
        raise ValueError("lambda must be nonnegative")
    return 2.0 * lam * lam / math.pi


def mu_critical_quadrature(lam: float) -> float:
    """2 lam^2 int_0^inf g(p)^2 / p dp, evaluated numerically."""
    val = integrate_ray(lambda q: g_squared(q) / q)
    return 2.0 * lam * lam * val.real


def _log_minus_z(z, hat):
    lz = np.log(-z)
    if hat:
        # cut moved to the negative imaginary axis: arg(-z) in (-3pi/2, pi/2]
        lz = np.where((lz.imag > 0.5 * np.pi), lz - 2j * np.pi, lz)
    return lz


def _f_closed(lam, mu, z, hat=False):
    z = np.asarray(z, dtype=complex)
    zz = z * z
    num = (2 * mu ** 3 + mu * mu * math.pi * z + 2 * mu * zz - math.pi * z * zz
           + 4 * mu * zz * (math.log(mu) - _log_minus_z(z, hat)))
    return z - 1.0 + lam * lam * num / (math.pi * (mu * mu + zz) ** 2)


def _df_closed(lam, mu, z, hat=False):
    z = np.asarray(z, dtype=complex)
    zz = z * z
    L = math.log(mu) - _log_minus_z(z, hat)
    num = 2 * mu ** 3 + mu * mu * math.pi * z + 2 * mu * zz - math.pi * z * zz + 4 * mu * zz * L
    dnum = mu * mu * math.pi - 3 * math.pi * zz + 8 * mu * z * L
    den = math.pi * (mu * mu + zz) ** 2
    dden = 4 * math.pi * z * (mu * mu + zz)
    return 1.0 + lam * lam * (dnum * den - num * dden) / den ** 2


def sheet_jump(lam, mu, z):
    """f_+ - f = 4 i pi (lam^2/mu) g(z/mu)^2."""
    return 4j * math.pi * lam * lam / mu * g_squared(np.asarray(z, dtype=complex) / mu)


def _sheet_jump_dz(lam, mu, z):
    z = np.asarray(z, dtype=complex)
    x = z / mu
    dg2 = (2.0 / math.pi) * 2 * x * (1 - x * x) / (1 + x * x) ** 3
    return 4j * math.pi * lam * lam / mu * dg2 / mu


def f_values(lam, mu, z, sheet=SheetTag.PRINCIPAL):
    """Vectorised f on a sheet, without argument checks."""
    if sheet is SheetTag.PRINCIPAL:
        return _f_closed(lam, mu, z)
    if sheet is SheetTag.HAT:
        return _f_closed(lam, mu, z, hat=True)
    z = np.asarray(z, dtype=complex)
    # on the positive axis the continued sheet takes the boundary value from above
    base = np.where((z.imag == 0) & (z.real > 0), _f_closed(lam, mu, z, hat=True), _f_closed(lam, mu, z))
    return base + sheet_jump(lam, mu, z)


def df_values(lam, mu, z, sheet=SheetTag.PRINCIPAL):
    if sheet is SheetTag.PRINCIPAL:
        return _df_closed(lam, mu, z)
    if sheet is SheetTag.HAT:
        return _df_closed(lam, mu, z, hat=True)
    z = np.asarray(z, dtype=complex)
    base = np.where((z.imag == 0) & (z.real > 0), _df_closed(lam, mu, z, hat=True), _df_closed(lam, mu, z))
    return base + _sheet_jump_dz(lam, mu, z)


def _check_args(model, z, sheet):
    if model.mu == 0:
        raise UnsupportedMu("f is not evaluated at mu=0; use zeta_eigenvalue")
    z = complex(z)
    if not (math.isfinite(z.real) and math.isfinite(z.imag)):
        raise ValueError("z must be finite")
    if z == 0:
        raise EvaluationAtPole("z=0 is a branch point of f")
    mu = model.mu
    if abs(z + 1j * mu) <= 1e-12 * mu:
        raise EvaluationAtPole("z = -i mu is a pole of the closed form")
    if sheet is SheetTag.CONTINUED_PLUS and abs(z - 1j * mu) <= 1e-12 * mu:
        raise EvaluationAtPole("z = i mu is a pole of g(z/mu)^2")
    if sheet is SheetTag.PRINCIPAL and z.imag == 0 and z.real > 0:
        raise EvaluationOnCut("principal sheet is cut along the positive real axis")
    if sheet is SheetTag.HAT and z.real == 0 and z.imag < 0:
        raise EvaluationOnCut("hat sheet is cut along the negative imaginary axis")
    return z


# the closed form is 0/0 at z = i mu although f is regular there
REMOVABLE_RADIUS = 1e-3


def eval_f(model: TwoLevelModel, z, sheet: SheetTag = SheetTag.PRINCIPAL) -> complex:
    z = _check_args(model, z, sheet)
    if sheet is not SheetTag.CONTINUED_PLUS and abs(z - 1j * model.mu) < REMOVABLE_RADIUS * model.mu:
        return eval_f_quadrature(model, z)
    return complex(f_values(model.lam, model.mu, z, sheet))


def eval_df(model: TwoLevelModel, z, sheet: SheetTag = SheetTag.PRINCIPAL) -> complex:
    z = _check_args(model, z, sheet)
    mu = model.mu
    if sheet is not SheetTag.CONTINUED_PLUS and abs(z - 1j * mu) < REMOVABLE_RADIUS * mu:
        val = integrate_ray(lambda p: g_squared(p) / (z - mu * p) ** 2, DEFAULT_QUAD)
        return 1.0 + 2.0 * model.lam ** 2 * val
    return complex(df_values(model.lam, mu, z, sheet))


def eval_f_quadrature(model: TwoLevelModel, z, settings=DEFAULT_QUAD) -> complex:
    """Direct quadrature of the defining integral (principal sheet)."""
    z = _check_args(model, z, SheetTag.PRINCIPAL)
    lam, mu = model.lam, model.mu
    val = integrate_ray(lambda p: g_squared(p) / (z - mu * p), settings)
    return z - 1.0 - 2.0 * lam * lam * val


def f_at_origin(model: TwoLevelModel) -> float:
    """Limit of f along the negative axis at 0: -1 + mu_c/mu."""
    if model.mu == 0:
        raise UnsupportedMu("mu must be positive")
    return -1.0 + mu_critical(model.lam) / model.mu


def zeta_eigenvalue(i: int, n: int, lam: float) -> float:
    if i not in (0, 1) or n < 1:
        raise ValueError("need i in {0,1} and n >= 1")
    root = math.sqrt(1.0 + 4.0 * n * lam * lam)
    # lower root in cancellation-free form
    return -2.0 * n * lam * lam / (1.0 + root) if i == 0 else 0.5 * (1.0 + root)


def phi_eigenvector_coeffs(i: int, n: int, lam: float):
    """Normalised (atom, photon) coefficients of the zeta_{i,n} eigenvector.

    The vector is proportional to (1, sqrt(n) lam / zeta_{i,n}) in the basis
    |1, g^(n-1)>, |0, g^n> of the 2x2 sector matrix [[1, s],[s, 0]],
    s = sqrt(n) lam.  The same formula serves both families, with zeta of
    the family itself.
    """
    if lam <= 0:
        raise ValueError("lambda must be positive")
    zeta = zeta_eigenvalue(i, n, lam)
    s = math.sqrt(n) * lam
    norm = math.hypot(zeta, s)
    sign = 1.0 if zeta > 0 else -1.0
    return sign * zeta / norm, sign * s / norm


def real_zero_principal(model: TwoLevelModel) -> RootResult:
    """Negative real zero of f for 0 < mu < mu_c, by bracketing."""
    mu, lam = model.mu, model.lam
    if mu <= 0 or mu >= mu_critical(lam):
        raise UnsupportedMu("a real zero of f exists only for 0 < mu < mu_c")
    fr = lambda x: float(_f_closed(lam, mu, complex(x)).real)
    hi = -1e-300
    if fr(hi) <= 0:
        hi = -1e-30
    lo = -1.0
    while fr(lo) > 0:
        lo *= 2.0
    x, info = brentq(fr, lo, hi, xtol=1e-300, rtol=4 * np.finfo(float).eps,
                     maxiter=500, full_output=True)
    return RootResult(complex(x), abs(fr(x)), info.iterations, info.converged)


def photon_amplitude_psi01(model: TwoLevelModel, p, z01=None):
    """lam g(p) / (z01 - mu |p|) for the bound state below mu_c."""
    if model.mu >= mu_critical(model.lam):
        raise UnsupportedMu("above mu_c the state is a resonance, not normalisable")
    if z01 is None:
        if model.mu == 0:
            z01 = zeta_eigenvalue(0, 1, model.lam)
        else:
            z01 = real_zero_principal(model).root.real
    p = np.asarray(p, dtype=float)
    out = model.lam * eval_g(p) / (z01 - model.mu * np.abs(p))
    return out.item() if np.ndim(out) == 0 else out


# ---------------------------------------------------------------------------
# trajectories


@dataclass
class Sample:
    mu: float
    z: complex
    branch: str
    residual: float
    iterations: int
    lam: float | None = None
    arc: float | None = None
    flag: str = ""


@dataclass
class ResonanceTrajectory:
    family: str
    samples: list = field(default_factory=list)
    halted: str = ""

    def append(self, sample: Sample):
        self.samples.append(sample)

    @property
    def mus(self):
        return np.array([s.mu for s in self.samples])

    @property
    def zs(self):
        return np.array([s.z for s in self.samples])

    def at(self, mu: float, rtol: float = 1e-9) -> Sample:
        for s in self.samples:
            if abs(s.mu - mu) <= rtol * max(abs(mu), 1e-300):
                return s
        raise KeyError(mu)


@dataclass(frozen=True)
class ParameterPath:
    waypoints: tuple

    def __init__(self, waypoints: Sequence[tuple]):
        pts = tuple((float(a), float(b)) for a, b in waypoints)
        if len(pts) < 2:
            raise ValueError("a parameter path needs at least two waypoints")
        if any(a < 0 or b < 0 for a, b in pts):
            raise ValueError("waypoints must have nonnegative coordinates")
        object.__setattr__(self, "waypoints", pts)

    def discretize(self, steps_per_leg: int = 100):
        out = [(0.0,) + self.waypoints[0]]
        s = 0.0
        for (l0, m0), (l1, m1) in zip(self.waypoints, self.waypoints[1:]):
            leg = math.hypot(l1 - l0, m1 - m0)
            for k in range(1, steps_per_leg + 1):
                t = k / steps_per_leg
                out.append((s + t * leg, l0 + t * (l1 - l0), m0 + t * (m1 - m0)))
            s += leg
        return out


def continue_zero(F, grid, z0, *, root=TRACE_ROOT, guard=GUARD_MULTIPLE,
                  max_halvings=MAX_HALVINGS, history=None, validate=None):
    """Track a zero of F(s, z) along the increasing-or-decreasing grid.

    Yields (s, RootResult) for every grid point after the first.  A step is
    rejected when the new zero moved more than ``guard`` times the linearly
    extrapolated step; the remaining interval is then halved, at most
    ``max_halvings`` times in a row.  ``validate(s, z)`` may veto a root.
    """
    hist = list(history) if history else [(grid[0], complex(z0))]
    for target in grid[1:]:
        s_last = hist[-1][0]
        step = target - s_last
        halvings = 0
        while True:
            s_try = s_last + step
            z_last = hist[-1][1]
            if len(hist) >= 2 and hist[-1][0] != hist[-2][0]:
                s_prev, z_prev = hist[-2]
                pred = z_last + (z_last - z_prev) * (s_try - s_last) / (s_last - s_prev)
            else:
                pred = z_last
            ok = False
            try:
                res = find_root_complex(lambda z: F(s_try, z), pred, root)
                ok = True
                if validate is not None and not validate(s_try, res.root):
                    ok = False
                extrap = abs(pred - z_last)
                if ok and extrap > 0:
                    jump = abs(res.root - z_last)
                    if jump > guard * extrap + 1e-10 * (1 + abs(z_last)):
                        ok = False
            except RootNotConverged:
                ok = False
            if ok:
                hist.append((s_try, res.root))
                s_last = s_try
                if s_try == target:
                    yield target, res
                    break
                step = target - s_last
                halvings = max(0, halvings - 1)
                continue
            halvings += 1
            if halvings > max_halvings:
                raise ContinuationLost(f"continuation lost near s={s_try!r} (z~{z_last!r})")
            step *= 0.5
        hist[:] = hist[-2:]


def _refine(seq, base, ratio=MAX_STEP_RATIO):
    """Insert geometric substeps so that (m - base) grows by at most ``ratio``."""
    out = [seq[0]]
    for m in seq[1:]:
        prev = out[-1]
        while prev > base and (m - base) > ratio * (prev - base):
            prev = base + ratio * (prev - base)
            out.append(prev)
        out.append(m)
    return out


def trace_resonance_in_mu(lam: float, family: int, mu_grid: Iterable[float],
                          root: RootSettings = TRACE_ROOT) -> ResonanceTrajectory:
    """Continue z_{family,1}(lam, mu) over an increasing grid of mu.

    Family 0 is the real zero of the principal f below mu_c and a zero of f_+
    above it; family 1 is a zero of f_+ throughout.
    """
    grid = [float(m) for m in mu_grid]
    if family not in (0, 1):
        raise ValueError("family must be 0 or 1")
    if not grid or any(b <= a for a, b in zip(grid, grid[1:])) or grid[0] < 0:
        raise ValueError("mu grid must be nonnegative and strictly increasing")
    traj = ResonanceTrajectory(family=f"z{family}1")
    zeta = zeta_eigenvalue(family, 1, lam)
    mu_c = mu_critical(lam)
    plus = SheetTag.CONTINUED_PLUS

    def F(mu, z):
        return complex(f_values(lam, mu, z, plus))

    def check_plus(mu, z):
        return z.imag <= 0 and abs(z + 1j * mu) > 1e-12

    start = 0
    if grid[0] == 0:
        traj.append(Sample(0.0, complex(zeta), "germ", 0.0, 0, lam))
        start = 1
    rest = grid[start:]
    if not rest:
        return traj

    if family == 1:
        mu0 = rest[0]
        # tiny mu grid toward the first point to let Newton start on the germ
        lead = [mu0 * 10.0 ** k for k in range(-6, 0)]
        seq = [0.0] + _refine(lead + rest, 0.0)
        hist = [(0.0, complex(zeta, -1e-15))]
        try:
            for mu, res in continue_zero(F, seq, zeta, root=root, history=hist, validate=check_plus):
                if mu in rest:
                    traj.append(Sample(mu, res.root, plus.value, res.residual, res.iterations, lam))
        except ContinuationLost as exc:
            exc.trajectory = traj
            raise
        return traj

    below = [m for m in rest if m < mu_c]
    above = [m for m in rest if m >= mu_c]
    for mu in below:
        res = real_zero_principal(TwoLevelModel(lam, mu))
        traj.append(Sample(mu, res.root, SheetTag.PRINCIPAL.value, res.residual, res.iterations, lam))
    if not above:
        return traj
    # approach mu_c on the real axis, then hand off to f_+ just above it
    mu_last = below[-1] if below else 0.0
    last_real = traj.samples[-1].z.real if traj.samples else zeta
    for k in range(1, 5):
        m = mu_c * (1.0 - 10.0 ** -k)
        if m > mu_last:
            last_real = real_zero_principal(TwoLevelModel(lam, m)).root.real
    mu0 = mu_c * (1.0 + 1e-4)
    if above[0] < mu0:
        mu0 = 0.5 * (mu_c + above[0])
    res0 = find_root_complex(lambda z: F(mu0, z), complex(last_real, -HANDOFF_DELTA), root)
    seq = [mu0]
    m = mu_c + 1.25 * (mu0 - mu_c)
    while m < above[0]:
        seq.append(m)
        m = mu_c + 1.25 * (m - mu_c)
    seq = _refine(seq + above, mu_c)
    try:
        for mu, res in continue_zero(F, seq, res0.root, root=root, validate=check_plus):
            if mu in above:
                traj.append(Sample(mu, res.root, plus.value, res.residual, res.iterations, lam))
    except ContinuationLost as exc:
        exc.trajectory = traj
        raise
    return traj


def trace_resonance_along_path(path: ParameterPath, start, sheet: SheetTag = SheetTag.CONTINUED_PLUS,
                               steps_per_leg: int = 200, pole_guard: float = 1e-3,
                               root: RootSettings = TRACE_ROOT) -> ResonanceTrajectory:
    """Continue a zero of f along a polyline in the (lam, mu) plane.

    The run halts (``trajectory.halted`` set) when the zero comes within
    ``pole_guard`` of the pole -i mu or of the branch point 0.
    """
    pts = path.discretize(steps_per_leg)
    traj = ResonanceTrajectory(family="path")
    s0, lam0, mu0 = pts[0]
    if mu0 == 0:
        raise UnsupportedMu("paths must stay at mu > 0")
    res = find_root_complex(lambda z: complex(f_values(lam0, mu0, z, sheet)), complex(start), root)
    traj.append(Sample(mu0, res.root, sheet.value, res.residual, res.iterations, lam0, s0))

    def F(t, z):
        # t is a fractional index into the discretised path
        i = min(int(math.floor(t)), len(pts) - 2)
        frac = t - i
        _, l0, m0 = pts[i]
        _, l1, m1 = pts[i + 1]
        lam = l0 + frac * (l1 - l0)
        mu = m0 + frac * (m1 - m0)
        return complex(f_values(lam, mu, z, sheet))

    grid = [float(k) for k in range(len(pts))]
    try:
        for t, r in continue_zero(F, grid, res.root, root=root):
            s, lam, mu = pts[int(t)]
            traj.append(Sample(mu, r.root, sheet.value, r.residual, r.iterations, lam, s))
            if abs(r.root + 1j * mu) < pole_guard or abs(r.root) < pole_guard:
                traj.halted = "pole-approach"
                break
    except ContinuationLost as exc:
        traj.halted = "continuation-lost"
        exc.trajectory = traj
        raise
    return traj

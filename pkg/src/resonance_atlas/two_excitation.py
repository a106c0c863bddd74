"""Two-excitation sector: kernel pieces, the truncated determinant D1 = 1 - C1
and its continuations, and tracing of the resonances z02 and z12 in mu.

Notation: psi(q) = g(q/mu)^2 / ((z - 2q) f(z - q)) and
C1 = (2 lam^2/mu) int_0^inf psi(q) dq.  The one-excitation resonances z01, z11
are branch points; q_i = z - z_i is the matching pole of psi.
"""

from __future__ import annotations

import enum
import math
from dataclasses import dataclass, field
from typing import Callable, Iterable

import numpy as np
from scipy.optimize import brentq

from .contour import (
    DEFAULT_QUAD,
    QuadratureSettings,
    RootResult,
    RootSettings,
    crossings_of_shifted_ray,
    find_root_complex,
    gamma0_path,
    integrate_ray,
    integrate_segment,
)
from .errors import (
    BranchRegionError,
    ContinuationLost,
    RootNotConverged,
    SingularDenominator,
)
from .friedrichs import (
    ResonanceTrajectory,
    Sample,
    SheetTag,
    TwoLevelModel,
    continue_zero,
    df_values,
    f_values,
    g_squared,
    mu_critical,
    real_zero_principal,
    trace_resonance_in_mu,
    zeta_eigenvalue,
)

PLUS = SheetTag.CONTINUED_PLUS
PRINC = SheetTag.PRINCIPAL

# published point used to restart the z02 trace after the bridge window
PUBLISHED_SEED_MU = 7e-3
PUBLISHED_SEED_Z = 2.8e-4 - 2.4e-5j
BRIDGE_FINE_LIMIT = 7.6e-3
BRIDGE_FINE_STEP = 1e-5
GAMMA0_EPS = 1e-3
# z12 is started from its germ no later than this mu
Z12_START_MU = 3e-4

D_ROOT = RootSettings(abs_tol=1e-11, rel_tol=1e-10, max_iter=60)
D_QUAD = QuadratureSettings(abs_tol=1e-13, rel_tol=1e-11, max_subdivisions=4000)


class BranchTag2(enum.Enum):
    PRINCIPAL_REAL = "principal_real"
    LOOP_A0 = "loop_a0"
    LOWER_RIGHT = "lower_right"
    LOWER_RIGHT_NEAR_Z12 = "lower_right_near_z12"


@dataclass(frozen=True)
class TwoExcitationContext:
    """Model plus the one-excitation resonances at the same (lam, mu).

    ``dz01``/``dz11`` are derivatives of f on the sheet where the resonance
    is a zero: the principal sheet for the real z01 below mu_c, f_+ otherwise.
    """
    model: TwoLevelModel
    z01: complex
    z11: complex
    dz01: complex
    dz11: complex
    z01_sheet: SheetTag = PLUS

    @property
    def lam(self):
        return self.model.lam

    @property
    def mu(self):
        return self.model.mu

    @property
    def base_point(self) -> float:
        return zeta_eigenvalue(0, 2, self.model.lam) - 0.05


def make_context(model: TwoLevelModel, z01: complex, z11: complex, tol: float = 1e-10) -> TwoExcitationContext:
    lam, mu = model.lam, model.mu
    z01 = complex(z01)
    z11 = complex(z11)
    sheet01 = PRINC if (mu < mu_critical(lam) and z01.imag == 0 and z01.real < 0) else PLUS
    r0 = abs(complex(f_values(lam, mu, z01, sheet01)))
    r1 = abs(complex(f_values(lam, mu, z11, PLUS)))
    if r0 > tol or r1 > tol:
        raise ValueError(f"resonances not converged (|f(z01)|={r0:.2e}, |f+(z11)|={r1:.2e})")
    return TwoExcitationContext(model, z01, z11,
                                complex(df_values(lam, mu, z01, sheet01)),
                                complex(df_values(lam, mu, z11, PLUS)), sheet01)


class OneExcitationCache:
    """Incremental provider of z01(mu), z11(mu) at fixed lambda."""

    def __init__(self, lam: float):
        self.lam = lam
        self.mu_c = mu_critical(lam)
        self._z01 = {}
        self._z11 = {}

    def _nearest(self, table, mu, side=None):
        keys = [k for k in table if side is None or (k > self.mu_c) == side]
        if not keys:
            return None
        return min(keys, key=lambda k: abs(math.log(k / mu)))

    def _continue(self, table, mu, family):
        F = lambda m, z: complex(f_values(self.lam, m, z, PLUS))
        side = True if family == 0 else None
        start = self._nearest(table, mu, side)
        if start is None:
            tr = trace_resonance_in_mu(self.lam, family, [mu])
            table[mu] = tr.samples[-1].z
            return table[mu]
        if start == mu:
            return table[mu]
        ratio = mu / start
        n = max(1, int(math.ceil(abs(math.log(ratio)) / math.log(1.05))))
        grid = [start * ratio ** (k / n) for k in range(n + 1)]
        grid[-1] = mu
        z = table[start]
        for m, res in continue_zero(F, grid, z):
            z = res.root
        table[mu] = z
        return z

    def z01(self, mu):
        if mu < self.mu_c:
            return real_zero_principal(TwoLevelModel(self.lam, mu)).root
        return self._continue(self._z01, mu, 0)

    def z11(self, mu):
        return self._continue(self._z11, mu, 1)

    def context(self, mu) -> TwoExcitationContext:
        return make_context(TwoLevelModel(self.lam, mu), self.z01(mu), self.z11(mu))


def context_at(lam: float, mu: float) -> TwoExcitationContext:
    return OneExcitationCache(lam).context(mu)


# ---------------------------------------------------------------------------
# kernel pieces


def eval_T(model: TwoLevelModel, z, weights: Callable, p: float,
           settings: QuadratureSettings = DEFAULT_QUAD) -> complex:
    """(T f)(p) = int_R conj(g(q)) f(q) / (z - mu(|p| + |q|)) dq, folded onto q >= 0."""
    z = complex(z)
    mu = model.mu
    if z.imag == 0 and z.real >= mu * abs(p):
        raise SingularDenominator("z lies on [mu|p|, inf): denominator vanishes on the contour")

    def h(q):
        q = q.real
        gq = np.sqrt(2.0 / np.pi) * q / (1.0 + q * q)
        num = gq * np.asarray(weights(q), dtype=complex) + (-gq) * np.asarray(weights(-q), dtype=complex)
        return num / (z - mu * (abs(p) + q))

    return integrate_ray(h, settings)


def eval_K_kernel(model: TwoLevelModel, z, p: float, q: float) -> complex:
    """g(p) g(q) / (f(z - mu|p|) (z - mu(|p| + |q|)))."""
    z = complex(z)
    mu, lam = model.mu, model.lam
    gp = math.sqrt(2 / math.pi) * p / (1 + p * p)
    gq = math.sqrt(2 / math.pi) * q / (1 + q * q)
    w = z - mu * abs(p)
    if mu == 0:
        first = w - 1.0 - (lam * lam / w if lam else 0.0)
    else:
        if w == 0:
            raise SingularDenominator("z - mu|p| hits the branch point 0")
        first = complex(f_values(lam, mu, w, PRINC))
    second = z - mu * (abs(p) + abs(q))
    if first == 0 or second == 0:
        raise SingularDenominator("kernel denominator vanishes")
    return gp * gq / (first * second)


def eval_C1(model: TwoLevelModel, z, settings: QuadratureSettings = D_QUAD) -> complex:
    z = complex(z)
    lam, mu = model.lam, model.mu
    if lam == 0:
        return 0j
    if mu == 0:
        den = z * (z - 1) - lam * lam
        if den == 0:
            raise SingularDenominator("z(z-1) = lam^2")
        return lam * lam / den
    if z.imag == 0 and z.real >= 0:
        raise SingularDenominator("C1 is cut along the positive real axis")

    def h(p):
        p = p.real
        w = z - mu * p
        return g_squared(p) / ((z - 2 * mu * p) * f_values(lam, mu, w, PRINC))

    return 2.0 * lam * lam * integrate_ray(h, settings)


def residue_term(ctx: TwoExcitationContext, z, which: int) -> complex:
    """2 i pi g(q_i/mu)^2 / ((2 z_i - z) f'(z_i)), inside the bracket of D."""
    zi, d = (ctx.z01, ctx.dz01) if which == 0 else (ctx.z11, ctx.dz11)
    if d == 0:
        raise SingularDenominator("derivative of f vanishes at the resonance")
    mu = ctx.mu
    return 2j * math.pi * g_squared((z - zi) / mu) / ((2 * zi - z) * d)


def q0_crossed(ctx: TwoExcitationContext, z) -> bool:
    """True when gamma0(z) crosses z01 + R^+, i.e. the q0 pole crossed R^+."""
    path = gamma0_path(ctx.base_point, complex(z), GAMMA0_EPS)
    return crossings_of_shifted_ray(path, ctx.z01) != 0


def _lower_right_bracket(ctx, z, settings):
    lam, mu = ctx.lam, ctx.mu
    x = z.real

    def psi(sheet):
        def h(q):
            return g_squared(q / mu) / ((z - 2 * q) * f_values(lam, mu, z - q, sheet))
        return h

    psi_p = psi(PLUS)
    psi_f = psi(PRINC)
    # the vertical leg meets z - q = -i mu when Im z < -mu; split there so no
    # node lands on the pole of f_+ (or the 0/0 point of the closed form)
    legs = [x, z]
    if z.imag < -mu:
        legs = [x, complex(x, z.imag + mu), z]
    total = integrate_segment(psi_p, 0.0, x, settings)
    for a, b in zip(legs, legs[1:]):
        total += integrate_segment(psi_p, a, b, settings)
        total -= integrate_segment(psi_f, a, b, settings)
    total += integrate_ray(psi_f, settings, start=x, scale=mu)
    total -= 1j * math.pi * g_squared(z / (2 * mu)) / complex(f_values(lam, mu, z / 2, PLUS))
    return total


def eval_D1(ctx: TwoExcitationContext, z, branch: BranchTag2 = BranchTag2.PRINCIPAL_REAL, *,
            include_q0: bool | None = None, settings: QuadratureSettings = D_QUAD) -> complex:
    """Truncated Fredholm determinant on the requested continuation.

    ``include_q0`` overrides the crossing predicate of the lower-right
    branches (None: decide from gamma0(z)).
    """
    z = complex(z)
    lam, mu = ctx.lam, ctx.mu
    if branch is BranchTag2.PRINCIPAL_REAL:
        _check_principal_region(ctx, z)
        return 1.0 - eval_C1(ctx.model, z, settings)
    if branch is BranchTag2.LOOP_A0:
        if ctx.z01_sheet is not PRINC:
            raise BranchRegionError("the a0 loop is defined for mu < mu_c (real z01)")
        if not (z.real < 0 or z.imag > 0):
            raise BranchRegionError("LoopA0 formula holds for Re z < 0 or Im z > 0")
        _check_principal_region(ctx, z, allow_a0=True)
        return eval_D1(ctx, z, BranchTag2.PRINCIPAL_REAL, settings=settings) + loop_a0_term(ctx, z)
    if not (z.real > 0 and z.imag < 0):
        raise BranchRegionError("lower-right branches need Re z > 0 and Im z < 0")
    if mu == 0:
        raise BranchRegionError("lower-right branches need mu > 0")
    bracket = _lower_right_bracket(ctx, z, settings)
    use_q0 = q0_crossed(ctx, z) if include_q0 is None else include_q0
    if use_q0:
        bracket -= residue_term(ctx, z, 0)
    if branch is BranchTag2.LOWER_RIGHT_NEAR_Z12:
        bracket -= residue_term(ctx, z, 1)
    return 1.0 - 2.0 * lam * lam / mu * bracket


def loop_a0_term(ctx: TwoExcitationContext, z) -> complex:
    """4 i pi (lam^2/mu) g(q0/mu)^2 / ((z - 2 q0) f'(z01))."""
    lam, mu = ctx.lam, ctx.mu
    q0 = z - ctx.z01
    return 4j * math.pi * lam * lam / mu * g_squared(q0 / mu) / ((z - 2 * q0) * ctx.dz01)


def _check_principal_region(ctx, z, allow_a0=False):
    if ctx.mu == 0:
        return
    if z.imag == 0:
        upper = ctx.z01.real if ctx.z01_sheet is PRINC else 0.0
        if z.real >= upper:
            raise SingularDenominator("z lies on a cut of the principal integral")
        return
    if z.imag > 0 or z.real < 0:
        return
    raise BranchRegionError("principal formula holds for Im z > 0 or Re z < 0")


# ---------------------------------------------------------------------------
# tracing


def _principal_real_zero(ctx: TwoExcitationContext) -> RootResult | None:
    """Negative real zero of 1 - C1 left of all branch points, if any."""
    upper = ctx.z01.real if ctx.z01_sheet is PRINC else 0.0
    D = lambda x: (1.0 - eval_C1(ctx.model, complex(x))).real
    # D -> 1 far left; look for the sign change while walking toward the cut
    span = max(abs(upper), 1e-6)
    xs = upper - span * np.geomspace(1e-7, 4.0 / span, 80)[::-1] if upper < 0 else -np.geomspace(4.0, 1e-12, 90)
    prev_x, prev_v = None, None
    for xv in xs:
        v = D(xv)
        if prev_v is not None and np.sign(v) != np.sign(prev_v):
            r, info = brentq(D, prev_x, xv, xtol=1e-300, rtol=1e-14, full_output=True)
            return RootResult(complex(r), abs(D(r)), info.iterations, info.converged)
        prev_x, prev_v = xv, v
    return None


def principal_real_zero(ctx: TwoExcitationContext) -> RootResult:
    res = _principal_real_zero(ctx)
    if res is None:
        raise RootNotConverged("no real zero of the principal D1 below the branch points")
    return res


@dataclass
class TraceDiagnostics:
    skipped: list = field(default_factory=list)
    notes: list = field(default_factory=list)


def _lr_step(cache, branch, mu, pred, z_last, guard=5.0):
    """Zero of the lower-right branch at mu, with q0 term chosen self-consistently."""
    ctx = cache.context(mu)
    cands = []
    for inc in (False, True):
        try:
            r = find_root_complex(lambda z: eval_D1(ctx, z, branch, include_q0=inc), pred, D_ROOT)
        except RootNotConverged:
            continue
        if not (r.root.real > 0 and r.root.imag < 0):
            continue
        if q0_crossed(ctx, r.root) != inc:
            continue
        cands.append((abs(r.root - pred), r, inc))
    if not cands:
        return None
    cands.sort(key=lambda c: c[0])
    _, r, inc = cands[0]
    extrap = abs(pred - z_last)
    if extrap > 0 and abs(r.root - z_last) > guard * extrap + 1e-10 * (1 + abs(z_last)):
        return None
    return r, inc


def _trace_lower_right(cache, branch, seq, z_start, history=None):
    """Yield (mu, RootResult|None, included_q0) along seq, skipping
    parameter values where no self-consistent zero exists."""
    hist = list(history or [])
    for mu in seq:
        if len(hist) >= 2:
            (m1, z1), (m2, z2) = hist[-2], hist[-1]
            pred = z2 + (z2 - z1) * (mu - m2) / (m2 - m1)
            z_last = z2
        elif hist:
            pred = z_last = hist[-1][1]
        else:
            pred = z_last = z_start
        out = _lr_step(cache, branch, mu, pred, z_last)
        if out is None and hist:
            # retry from the last converged value without extrapolation
            out = _lr_step(cache, branch, mu, hist[-1][1], hist[-1][1], guard=np.inf)
        if out is None:
            yield mu, None, None
            continue
        r, inc = out
        hist.append((mu, r.root))
        hist = hist[-2:]
        yield mu, r, inc


def _fine_sequence(start, stop):
    seq = []
    m = start
    while m < stop - 1e-15:
        step = BRIDGE_FINE_STEP if m < BRIDGE_FINE_LIMIT else m * 0.03
        m = min(m + step, stop)
        seq.append(m)
    return seq


def trace_z02(lam: float, mu_grid: Iterable[float], bridge: str = "seed",
              diagnostics: TraceDiagnostics | None = None) -> ResonanceTrajectory:
    """Trace z02 over mu.

    Below mu_c (and while it exists just above) the zero is the real zero of
    the principal D1.  From mu = 7e-3 on it is the zero of the lower-right
    continuation.  Samples in between carry the flag ``bridge``.  With
    ``bridge="seed"`` the lower-right branch restarts at 7e-3 from the
    published point; ``bridge="mirror"`` instead seeds it where the real zero
    disappears, at the reflection of the last real zero across the imaginary
    axis.
    """
    grid = sorted(float(m) for m in mu_grid)
    diag = diagnostics if diagnostics is not None else TraceDiagnostics()
    traj = ResonanceTrajectory(family="z02")
    cache = OneExcitationCache(lam)
    mu_c = cache.mu_c
    lr = BranchTag2.LOWER_RIGHT
    low = [m for m in grid if m < PUBLISHED_SEED_MU]
    high = [m for m in grid if m >= PUBLISHED_SEED_MU]

    last_real = None
    real_gone_at = None
    window = []
    for mu in low:
        if mu == 0:
            z = zeta_eigenvalue(0, 2, lam)
            traj.append(Sample(0.0, complex(z), "germ", 0.0, 0, lam))
            continue
        flag = "" if mu <= mu_c else "bridge"
        res = None if real_gone_at is not None else _principal_real_zero(cache.context(mu))
        if res is not None:
            traj.append(Sample(mu, res.root, BranchTag2.PRINCIPAL_REAL.value, res.residual,
                               res.iterations, lam, flag=flag))
            last_real = (mu, res.root)
            continue
        if mu <= mu_c:
            raise ContinuationLost(f"no real zero of D1 at mu={mu}", traj)
        if real_gone_at is None:
            real_gone_at = mu
        window.append(mu)

    anchor = None
    if high or window:
        if bridge == "seed":
            ctx = cache.context(PUBLISHED_SEED_MU)
            r = find_root_complex(lambda z: eval_D1(ctx, z, lr), PUBLISHED_SEED_Z, D_ROOT)
            anchor = (PUBLISHED_SEED_MU, r)
        elif bridge == "mirror":
            anchor = _mirror_bridge(cache, lam, last_real, diag)
        else:
            raise ValueError("bridge must be 'seed' or 'mirror'")

    # window samples without a real zero: continue the lower-right zero back
    if window:
        back = sorted(set(window + _fine_sequence(window[0], anchor[0])), reverse=True)
        back = [m for m in back if m < anchor[0]]
        found = {}
        for mu, r, inc in _trace_lower_right(cache, lr, back, anchor[1].root, [(anchor[0], anchor[1].root)]):
            if r is None:
                if mu in window:
                    diag.skipped.append(mu)
                continue
            if mu in window:
                found[mu] = r
        for mu in window:
            if mu in found:
                r = found[mu]
                traj.append(Sample(mu, r.root, lr.value, r.residual, r.iterations, lam, flag="bridge"))
        traj.samples.sort(key=lambda s: s.mu)

    if high:
        seq = sorted(set(_fine_sequence(anchor[0], high[-1]) + high))
        seq = [m for m in seq if m > anchor[0]]
        if high[0] == anchor[0]:
            r = anchor[1]
            traj.append(Sample(anchor[0], r.root, lr.value, r.residual, r.iterations, lam))
        for mu, r, inc in _trace_lower_right(cache, lr, seq, anchor[1].root, [(anchor[0], anchor[1].root)]):
            if mu not in high:
                if r is None:
                    diag.notes.append(f"no self-consistent zero at internal mu={mu:.6g}")
                continue
            if r is None:
                diag.skipped.append(mu)
                continue
            traj.append(Sample(mu, r.root, lr.value, r.residual, r.iterations, lam,
                               flag="q0" if inc else ""))
    return traj


def _mirror_bridge(cache, lam, last_real, diag):
    """Seed the lower-right branch just after the real zero disappears."""
    if last_real is None or last_real[0] <= cache.mu_c:
        m = cache.mu_c * (1 + 1e-4)
        res = _principal_real_zero(cache.context(m))
        if res is None:
            raise ContinuationLost("mirror bridge needs a real zero above mu_c")
        last_real = (m, res.root)
    mu0, z0 = last_real
    lr = BranchTag2.LOWER_RIGHT
    # walk forward in small steps until the real zero is gone
    mu = mu0
    zr = z0
    while True:
        mu_next = mu + 1e-5
        res = _principal_real_zero(cache.context(mu_next))
        if res is None:
            break
        mu, zr = mu_next, res.root
    ctx = cache.context(mu_next)
    seed = complex(-zr.real, -0.15 * abs(zr.real))
    r = find_root_complex(lambda z: eval_D1(ctx, z, lr), seed, D_ROOT)
    hist = [(mu_next, r.root)]
    last = (mu_next, r)
    seq = _fine_sequence(mu_next, PUBLISHED_SEED_MU)
    for m, rr, inc in _trace_lower_right(cache, lr, seq, r.root, hist):
        if rr is None:
            diag.notes.append(f"mirror bridge skipped mu={m:.6g}")
            continue
        last = (m, rr)
    if abs(last[0] - PUBLISHED_SEED_MU) > 1e-12:
        raise ContinuationLost("mirror bridge did not reach mu=7e-3")
    diag.notes.append(f"mirror bridge started at mu={mu_next:.7g}")
    return last


def trace_z12(lam: float, mu_grid: Iterable[float],
              diagnostics: TraceDiagnostics | None = None) -> ResonanceTrajectory:
    """Trace z12 from its germ zeta_{1,2} with the Delta form (q1 term always on)."""
    grid = sorted(float(m) for m in mu_grid)
    diag = diagnostics if diagnostics is not None else TraceDiagnostics()
    traj = ResonanceTrajectory(family="z12")
    cache = OneExcitationCache(lam)
    br = BranchTag2.LOWER_RIGHT_NEAR_Z12
    zeta = zeta_eigenvalue(1, 2, lam)
    pos = [m for m in grid if m > 0]
    if grid and grid[0] == 0:
        traj.append(Sample(0.0, complex(zeta), "germ", 0.0, 0, lam))
    if not pos:
        return traj
    mu0 = pos[0]
    first = min(mu0, Z12_START_MU)
    start = None
    for k in range(0, 5):
        m = first / 10 ** k
        ctx = cache.context(m)
        try:
            r = find_root_complex(lambda z: eval_D1(ctx, z, br), complex(zeta, -1e-6), D_ROOT)
            start = (m, r)
            break
        except RootNotConverged:
            continue
    if start is None:
        raise ContinuationLost("could not start z12 from its germ")
    seq = []
    m = start[0]
    for target in pos:
        while m * 1.04 < target:
            m *= 1.04
            seq.append(m)
        seq.append(target)
        m = target
    seq = [s for s in seq if s > start[0]]
    if start[0] == mu0:
        r = start[1]
        traj.append(Sample(mu0, r.root, br.value, r.residual, r.iterations, lam))
    for mu, r, inc in _trace_lower_right(cache, br, seq, start[1].root, [(start[0], start[1].root)]):
        if r is None:
            if mu in pos:
                diag.skipped.append(mu)
            continue
        if mu in pos:
            traj.append(Sample(mu, r.root, br.value, r.residual, r.iterations, lam,
                               flag="" if inc else "no_q0"))
    return traj


def find_a0_zero(ctx: TwoExcitationContext, seed, settings: RootSettings = D_ROOT) -> RootResult:
    """Zero of the a0-loop continuation near zeta_{0,2}."""
    if ctx.lam == 0:
        return find_root_complex(lambda z: 1.0 + 0j, seed, settings)
    return find_root_complex(lambda z: eval_D1(ctx, z, BranchTag2.LOOP_A0), complex(seed), settings)
